#include "ditto/presets.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <set>
#include <stdexcept>

#include "ditto/io.hpp"

namespace ditto::presets {

using json = nlohmann::json;

namespace {
constexpr int kConfigSchemaVersion = 1;

nn::ModelConfig base_model_1d(int n) {
    nn::ModelConfig m;
    m.variant = nn::Variant::ditto;
    m.dimension = 1;
    m.grid = {n};
    m.levels = 4;
    m.base_channels = 16;
    m.channel_mults = {1, 2, 2, 2};
    m.res_blocks_per_level = 1;
    m.attention_levels = {3};
    m.norm_groups = 8;
    m.d_emb = 32;
    m.mlp_hidden = 64;
    return m;
}

nn::ModelConfig base_model_2d(int n, int levels) {
    nn::ModelConfig m = base_model_1d(n);
    m.dimension = 2;
    m.grid = {n, n};
    m.levels = levels;
    m.channel_mults.assign(static_cast<std::size_t>(levels), 2);
    m.channel_mults[0] = 1;
    m.attention_levels = {levels - 1};
    return m;
}

ExperimentRecipe burgers_recipe(double nu, int nx) {
    ExperimentRecipe r;
    r.name = nu == 0.01 ? "burgers-nu0.01" : "burgers-nu0.001";
    r.pde.kind = PdeKind::burgers;
    r.pde.viscosity = nu;
    r.pde.t_final = 1.0;
    r.pde.n_steps = 50;
    r.pde.grid = {nx};
    r.count = 320;
    r.model = base_model_1d(nx);
    r.model.time_scale = 100.0;  // t_final = 1 -> embedded range O(10^2)
    r.schedule.strategy = train::Strategy::subsampled;
    r.schedule.alpha = 0.1;
    r.opt.lr0 = 1e-3;
    r.opt.epochs = 150;
    r.opt.batch_size = 32;
    r.opt.seed = 7;
    return r;
}

ExperimentRecipe ns_re20_recipe() {
    ExperimentRecipe r;
    r.name = "ns-re20";
    r.pde.kind = PdeKind::navier_stokes;
    r.pde.viscosity = 1e-3;
    r.pde.t_final = 50.0;
    r.pde.n_steps = 50;
    r.pde.grid = {64, 64};
    r.count = 200;
    r.model = base_model_2d(64, 3);
    r.model.time_scale = 2.0;
    r.schedule.strategy = train::Strategy::subsampled;
    r.schedule.alpha = 0.2;
    r.opt.epochs = 80;
    r.opt.batch_size = 16;
    r.opt.seed = 11;
    return r;
}

ExperimentRecipe wave2d_recipe() {
    ExperimentRecipe r;
    r.name = "wave2d";
    r.pde.kind = PdeKind::wave2d;
    r.pde.t_final = 2.0;
    r.pde.n_steps = 50;
    r.pde.grid = {64, 64};
    r.count = 200;
    r.model = base_model_2d(64, 3);
    r.model.time_scale = 50.0;
    r.schedule.strategy = train::Strategy::subsampled;
    r.schedule.alpha = 0.2;
    r.opt.epochs = 80;
    r.opt.batch_size = 16;
    r.opt.seed = 13;
    return r;
}

ExperimentRecipe wave3d_recipe() {
    ExperimentRecipe r;
    r.name = "wave3d";
    r.pde.kind = PdeKind::wave3d;
    r.pde.t_final = 2.0;
    r.pde.n_steps = 50;
    r.pde.grid = {32, 32, 32};
    r.count = 100;
    r.model = base_model_2d(32, 3);
    r.model.dimension = 3;
    r.model.grid = {32, 32, 32};
    r.model.base_channels = 8;
    r.model.time_scale = 50.0;
    r.schedule.strategy = train::Strategy::subsampled;
    r.schedule.alpha = 0.2;
    r.opt.epochs = 60;
    r.opt.batch_size = 8;
    r.opt.seed = 17;
    return r;
}

ExperimentRecipe extrap_ns_recipe() {
    ExperimentRecipe r;
    r.name = "extrap-ns-lf-sweep";
    r.pde.kind = PdeKind::navier_stokes;
    r.pde.viscosity = 1e-3;
    r.pde.t_final = 50.0;
    r.pde.n_steps = 200;
    r.pde.grid = {32, 32};
    r.count = 48;
    r.data_seed = 23;
    r.model = base_model_2d(32, 3);
    r.model.base_channels = 12;
    r.model.time_scale = 4.0;
    r.schedule.strategy = train::Strategy::bundled;
    r.schedule.lf = 20;
    r.schedule.train_horizon = 100;
    r.schedule.alpha = 0.05;
    r.opt.epochs = 40;
    r.opt.batch_size = 16;
    r.opt.seed = 29;
    return r;
}

ExperimentRecipe noise_sweep_recipe() {
    ExperimentRecipe r = burgers_recipe(0.01, 128);
    r.name = "noise-sweep";
    return r;
}

json schedule_to_json(const train::TrainingSchedule& s, const train::LossConfig& loss,
                      const train::OptimizerConfig& opt) {
    json j;
    j["strategy"] = train::to_string(s.strategy);
    j["alpha"] = s.alpha;
    j["lf"] = s.lf;
    j["condition_on_offset"] = s.condition_on_offset;
    j["train_horizon"] = s.train_horizon;
    j["max_val_samples"] = s.max_val_samples;
    j["epsilon"] = loss.epsilon;
    j["lr0"] = opt.lr0;
    j["epochs"] = opt.epochs;
    j["batch_size"] = opt.batch_size;
    j["total_steps"] = opt.total_steps;
    j["beta1"] = opt.beta1;
    j["beta2"] = opt.beta2;
    j["clip_norm"] = opt.clip_norm;
    j["seed"] = opt.seed;
    return j;
}

json pde_to_json(const PdeConfig& p, int count, std::uint64_t data_seed,
                 const std::array<double, 3>& ratios) {
    json j;
    j["kind"] = to_string(p.kind);
    j["viscosity"] = p.viscosity;
    j["t_final"] = p.t_final;
    j["n_steps"] = p.n_steps;
    j["grid"] = p.grid;
    j["forcing_id"] = p.forcing_id;
    j["wave_speed_id"] = p.wave_speed_id;
    j["cfl_safety"] = p.cfl_safety;
    j["count"] = count;
    j["seed"] = data_seed;
    j["ratios"] = ratios;
    return j;
}

json eval_to_json(const EvalPlan& e) {
    json j;
    j["nt_tests"] = e.nt_tests;
    j["gammas"] = e.gammas;
    j["lf_sweep"] = e.lf_sweep;
    j["fine_steps"] = e.fine_steps;
    j["noise_seeds"] = e.noise_seeds;
    return j;
}

void check_unknown_keys(const json& j, const std::set<std::string>& allowed,
                        const std::string& scope, std::vector<std::string>& errors) {
    for (const auto& [key, _] : j.items())
        if (!allowed.count(key))
            errors.push_back(scope + ": unknown key '" + key + "'");
}

template <typename T>
void take(const json& j, const char* key, T& dst) {
    if (j.contains(key)) dst = j.at(key).get<T>();
}

}  // namespace

int config_schema_version() { return kConfigSchemaVersion; }

const std::vector<std::string>& recipe_names() {
    static const std::vector<std::string> names = {
        "burgers-nu0.01", "burgers-nu0.001", "ns-re20",     "wave2d",
        "wave3d",         "extrap-ns-lf-sweep", "noise-sweep"};
    return names;
}

ExperimentRecipe get_recipe(const std::string& name) {
    if (name == "burgers-nu0.01") return burgers_recipe(0.01, 128);
    if (name == "burgers-nu0.001") return burgers_recipe(0.001, 256);
    if (name == "ns-re20") return ns_re20_recipe();
    if (name == "wave2d") return wave2d_recipe();
    if (name == "wave3d") return wave3d_recipe();
    if (name == "extrap-ns-lf-sweep") return extrap_ns_recipe();
    if (name == "noise-sweep") return noise_sweep_recipe();
    throw std::invalid_argument("unknown preset '" + name + "'");
}

ConfigResult validate_config_text(const std::string& text) {
    ConfigResult res;
    json j;
    try {
        j = text.empty() || text.find_first_not_of(" \t\r\n") == std::string::npos
                ? json::object()
                : json::parse(text);
    } catch (const std::exception& e) {
        res.errors.push_back(std::string("config: JSON parse error: ") + e.what());
        return res;
    }
    if (!j.is_object()) {
        res.errors.push_back("config: top level must be a JSON object");
        return res;
    }

    check_unknown_keys(j, {"schema_version", "preset", "data", "out", "model", "training",
                           "eval", "pde"},
                       "config", res.errors);

    if (j.contains("schema_version") &&
        j.at("schema_version").get<int>() != kConfigSchemaVersion)
        res.errors.push_back("config: schema_version mismatch (expected " +
                             std::to_string(kConfigSchemaVersion) + ", got " +
                             j.at("schema_version").dump() + "); migrate the config");

    std::string preset = "burgers-nu0.01";
    take(j, "preset", preset);
    try {
        res.recipe = get_recipe(preset);
    } catch (const std::exception& e) {
        res.errors.push_back(std::string("config: ") + e.what());
        return res;
    }
    take(j, "data", res.data_path);
    take(j, "out", res.out_path);

    try {
        if (j.contains("pde")) {
            const json& p = j.at("pde");
            check_unknown_keys(p,
                               {"kind", "viscosity", "t_final", "n_steps", "grid",
                                "forcing_id", "wave_speed_id", "cfl_safety", "count", "seed",
                                "ratios"},
                               "pde", res.errors);
            if (p.contains("kind"))
                res.recipe.pde.kind = pde_kind_from_string(p.at("kind").get<std::string>());
            take(p, "viscosity", res.recipe.pde.viscosity);
            take(p, "t_final", res.recipe.pde.t_final);
            take(p, "n_steps", res.recipe.pde.n_steps);
            take(p, "grid", res.recipe.pde.grid);
            take(p, "forcing_id", res.recipe.pde.forcing_id);
            take(p, "wave_speed_id", res.recipe.pde.wave_speed_id);
            take(p, "cfl_safety", res.recipe.pde.cfl_safety);
            take(p, "count", res.recipe.count);
            take(p, "seed", res.recipe.data_seed);
            take(p, "ratios", res.recipe.ratios);
        }
        if (j.contains("model")) {
            const json& m = j.at("model");
            check_unknown_keys(
                m,
                {"variant", "dimension", "grid", "levels", "base_channels", "channel_mults",
                 "res_blocks_per_level", "attention_levels", "use_attention",
                 "attention_softmax", "norm_groups", "d_emb", "mlp_hidden", "time_scale",
                 "conditioning_residual", "conditioning_scalar_name", "point_coord_scale"},
                "model", res.errors);
            auto& mc = res.recipe.model;
            if (m.contains("variant"))
                mc.variant = nn::variant_from_string(m.at("variant").get<std::string>());
            take(m, "dimension", mc.dimension);
            take(m, "grid", mc.grid);
            take(m, "levels", mc.levels);
            take(m, "base_channels", mc.base_channels);
            take(m, "channel_mults", mc.channel_mults);
            take(m, "res_blocks_per_level", mc.res_blocks_per_level);
            take(m, "attention_levels", mc.attention_levels);
            take(m, "use_attention", mc.use_attention);
            take(m, "attention_softmax", mc.attention_softmax);
            take(m, "norm_groups", mc.norm_groups);
            take(m, "d_emb", mc.d_emb);
            take(m, "mlp_hidden", mc.mlp_hidden);
            take(m, "time_scale", mc.time_scale);
            take(m, "conditioning_residual", mc.conditioning_residual);
            take(m, "conditioning_scalar_name", mc.conditioning_scalar_name);
            take(m, "point_coord_scale", mc.point_coord_scale);
        }
        if (j.contains("training")) {
            const json& t = j.at("training");
            check_unknown_keys(t,
                               {"strategy", "alpha", "lf", "condition_on_offset",
                                "train_horizon", "max_val_samples", "epsilon", "lr0",
                                "epochs", "batch_size", "total_steps", "beta1", "beta2",
                                "clip_norm", "seed"},
                               "training", res.errors);
            auto& s = res.recipe.schedule;
            if (t.contains("strategy"))
                s.strategy = train::strategy_from_string(t.at("strategy").get<std::string>());
            take(t, "alpha", s.alpha);
            take(t, "lf", s.lf);
            take(t, "condition_on_offset", s.condition_on_offset);
            take(t, "train_horizon", s.train_horizon);
            take(t, "max_val_samples", s.max_val_samples);
            take(t, "epsilon", res.recipe.loss.epsilon);
            take(t, "lr0", res.recipe.opt.lr0);
            take(t, "epochs", res.recipe.opt.epochs);
            take(t, "batch_size", res.recipe.opt.batch_size);
            take(t, "total_steps", res.recipe.opt.total_steps);
            take(t, "beta1", res.recipe.opt.beta1);
            take(t, "beta2", res.recipe.opt.beta2);
            take(t, "clip_norm", res.recipe.opt.clip_norm);
            take(t, "seed", res.recipe.opt.seed);
        }
        if (j.contains("eval")) {
            const json& e = j.at("eval");
            check_unknown_keys(e, {"nt_tests", "gammas", "lf_sweep", "fine_steps",
                                   "noise_seeds"},
                               "eval", res.errors);
            take(e, "nt_tests", res.recipe.eval.nt_tests);
            take(e, "gammas", res.recipe.eval.gammas);
            take(e, "lf_sweep", res.recipe.eval.lf_sweep);
            take(e, "fine_steps", res.recipe.eval.fine_steps);
            take(e, "noise_seeds", res.recipe.eval.noise_seeds);
        }
    } catch (const std::exception& e) {
        res.errors.push_back(std::string("config: ") + e.what());
    }

    // Range checks, aggregated.
    const auto& rec = res.recipe;
    if (!(rec.schedule.alpha > 0.0) || rec.schedule.alpha > 1.0)
        res.errors.push_back(
            "training.alpha: sub-sampling requires 0 < alpha <= 1 (alpha < 1 is the "
            "sub-sampled regime; alpha = 1 degenerates to the full schedule); got " +
            std::to_string(rec.schedule.alpha));
    const int nt = rec.schedule.train_horizon > 0 ? rec.schedule.train_horizon
                                                  : rec.pde.n_steps;
    if (rec.schedule.lf < 1 || rec.schedule.lf > nt)
        res.errors.push_back("training.lf: 1 <= lf <= nt required (nt = " +
                             std::to_string(nt) + "); got " +
                             std::to_string(rec.schedule.lf));
    if (rec.opt.lr0 <= 0.0) res.errors.push_back("training.lr0: must be positive");
    if (rec.opt.epochs < 1) res.errors.push_back("training.epochs: must be >= 1");
    if (rec.opt.batch_size < 1) res.errors.push_back("training.batch_size: must be >= 1");
    if (rec.loss.epsilon <= 0.0) res.errors.push_back("training.epsilon: must be positive");
    if (rec.count < 3) res.errors.push_back("pde.count: need at least 3 trajectories");
    double ratio_sum = 0.0;
    for (const double r : rec.ratios) ratio_sum += r;
    if (std::abs(ratio_sum - 1.0) > 1e-9)
        res.errors.push_back("pde.ratios: must sum to 1");
    try {
        rec.pde.validate();
    } catch (const std::exception& e) {
        res.errors.push_back(std::string("pde: ") + e.what());
    }
    // Resolve model defaults in place so the echo below is fully explicit.
    auto& mc = res.recipe.model;
    if (mc.channel_mults.empty()) {
        mc.channel_mults.assign(static_cast<std::size_t>(std::max(mc.levels, 1)), 2);
        mc.channel_mults[0] = 1;
    }
    if (mc.attention_levels.empty() && mc.use_attention)
        mc.attention_levels = {mc.levels - 1};
    try {
        mc.validate();
    } catch (const std::exception& e) {
        res.errors.push_back(std::string("model: ") + e.what());
    }

    // Full default echo.
    json echo;
    echo["schema_version"] = kConfigSchemaVersion;
    echo["preset"] = rec.name;
    echo["data"] = res.data_path;
    echo["out"] = res.out_path;
    echo["pde"] = pde_to_json(rec.pde, rec.count, rec.data_seed, rec.ratios);
    echo["model"] = rec.model.to_json();
    echo["training"] = schedule_to_json(rec.schedule, rec.loss, rec.opt);
    echo["eval"] = eval_to_json(rec.eval);
    res.normalized = echo.dump(2);
    return res;
}

ConfigResult validate_config(const std::filesystem::path& path) {
    return validate_config_text(read_text(path));
}

}  // namespace ditto::presets
