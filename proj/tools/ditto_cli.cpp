// ditto: dataset synthesis, training, evaluation, rollout, POD pipeline, and
// report/plot emission for the continuous-in-time neural operator library.
//
// Exit codes: 0 success, 2 configuration error, 3 numeric failure.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "ditto/dataset.hpp"
#include "ditto/io.hpp"
#include "ditto/nn/checkpoint.hpp"
#include "ditto/pod.hpp"
#include "ditto/presets.hpp"
#include "ditto/report.hpp"
#include "ditto/rollout.hpp"
#include "ditto/train/trainer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace ditto;

namespace {

constexpr const char* kVersion = "0.1.0";

std::optional<std::uint64_t> env_seed_override() {
    const char* v = std::getenv("DITTO_SEED");
    if (!v || !*v) return std::nullopt;
    return std::strtoull(v, nullptr, 10);
}

void write_run_json(const fs::path& out_dir, const std::string& command, const json& config,
                    std::uint64_t seed, double wall_seconds,
                    const std::vector<std::string>& artifacts) {
    json run;
    run["command"] = command;
    run["config"] = config;
    run["seed"] = seed;
    run["code_version"] = kVersion;
    run["wall_time_s"] = wall_seconds;
    run["artifacts"] = artifacts;
    atomic_write(out_dir / "run.json", run.dump(2) + "\n");
}

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

std::vector<Trajectory> test_refs(const DatasetBundle& bundle) {
    std::vector<Trajectory> refs;
    for (const std::size_t m : bundle.indices_of(Split::test))
        refs.push_back(bundle.trajectories[m]);
    return refs;
}

void write_history_csv(const train::TrainResult& result, const fs::path& path) {
    std::string csv = "epoch,train_loss,val_loss,lr\n";
    for (const auto& row : result.history)
        csv += std::to_string(row.epoch) + "," + std::to_string(row.train_loss) + "," +
               std::to_string(row.val_loss) + "," + std::to_string(row.lr) + "\n";
    atomic_write(path, csv);
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

int cmd_gen_data(const std::string& pde, double nu, double t_final, int steps,
                 std::vector<int> grid, int count, std::uint64_t seed, int jobs,
                 const std::string& out) {
    Timer timer;
    PdeConfig cfg;
    cfg.kind = pde_kind_from_string(pde);
    cfg.viscosity = nu;
    cfg.t_final = t_final;
    cfg.n_steps = steps;
    if (grid.size() == 1) {
        const int want_dim = cfg.kind == PdeKind::burgers ? 1
                             : cfg.kind == PdeKind::wave3d ? 3
                                                           : 2;
        grid.assign(static_cast<std::size_t>(want_dim), grid[0]);
    }
    cfg.grid = grid;
    cfg.validate();
    if (const auto env = env_seed_override()) seed = *env;

    DatasetBundle bundle = generate_dataset(cfg, count, seed, jobs);
    split_dataset(bundle, {0.8, 0.1, 0.1}, seed);
    save_dataset(bundle, out);

    json echo;
    echo["pde"] = pde;
    echo["nu"] = nu;
    echo["t_final"] = t_final;
    echo["steps"] = steps;
    echo["grid"] = grid;
    echo["count"] = count;
    echo["jobs"] = jobs;
    write_run_json(out, "gen-data", echo, seed, timer.seconds(), {"manifest.json"});
    std::cout << "wrote " << count << " trajectories to " << out << "\n";
    return 0;
}

int cmd_validate_config(const std::string& config_path) {
    const auto res = presets::validate_config(config_path);
    if (!res.errors.empty()) {
        for (const auto& e : res.errors) std::cerr << "error: " << e << "\n";
        return 2;
    }
    std::cout << res.normalized << "\n";
    return 0;
}

int cmd_train(const std::string& config_path, std::string data, std::string out) {
    Timer timer;
    auto res = config_path.empty() ? presets::validate_config_text("")
                                   : presets::validate_config(config_path);
    if (!res.errors.empty()) {
        for (const auto& e : res.errors) std::cerr << "error: " << e << "\n";
        return 2;
    }
    if (data.empty()) data = res.data_path;
    if (out.empty()) out = res.out_path;
    if (data.empty() || out.empty()) {
        std::cerr << "error: train needs --data and --out (or data/out in the config)\n";
        return 2;
    }
    if (const auto env = env_seed_override()) res.recipe.opt.seed = *env;

    const DatasetBundle bundle = load_dataset(data);
    auto model = nn::build_model(res.recipe.model, res.recipe.opt.seed);
    std::cout << "training " << nn::to_string(res.recipe.model.variant) << " ("
              << model->param_count() << " parameters, strategy "
              << train::to_string(res.recipe.schedule.strategy) << ")\n";

    const auto result =
        train::train(*model, bundle, res.recipe.schedule, res.recipe.loss, res.recipe.opt);

    fs::create_directories(out);
    nn::save_model(*model, fs::path(out) / "checkpoint.ckpt");
    write_history_csv(result, fs::path(out) / "history.csv");
    atomic_write(fs::path(out) / "config.json", res.normalized + "\n");
    write_run_json(out, "train", json::parse(res.normalized), res.recipe.opt.seed,
                   timer.seconds(), {"checkpoint.ckpt", "history.csv", "config.json"});

    if (result.aborted) {
        std::cerr << "training aborted on non-finite loss; last-good checkpoint retained\n";
        return 3;
    }
    std::cout << "best val loss " << result.best_val << " at epoch " << result.best_epoch
              << "\n";
    return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& data, const std::string& mode,
             const std::string& out, int fine_steps, std::vector<int> nt_tests,
             std::vector<double> gammas, int noise_seeds, int lf, int horizon,
             int train_horizon) {
    Timer timer;
    auto model = nn::load_model(checkpoint);
    const DatasetBundle bundle = load_dataset(data);
    const auto test_ids = bundle.indices_of(Split::test);
    if (test_ids.empty()) {
        std::cerr << "error: dataset has no test split\n";
        return 2;
    }
    fs::create_directories(out);

    rollout::EvalReport report;
    std::uint64_t seed = 1234;
    if (const auto env = env_seed_override()) seed = *env;

    if (mode == "superres") {
        const int t_stored = static_cast<int>(bundle.trajectories.front().n_snapshots()) - 1;
        std::vector<Trajectory> refs;
        if (fine_steps == t_stored) {
            refs = test_refs(bundle);
        } else {
            std::cout << "regenerating " << test_ids.size() << " references at "
                      << fine_steps << " steps\n";
            refs = regenerate_at_resolution(bundle, test_ids, fine_steps);
        }
        report = rollout::eval_superresolution(*model, refs, nt_tests,
                                               to_string(bundle.config.kind));
    } else if (mode == "extrap") {
        const auto refs = test_refs(bundle);
        rollout::RolloutConfig rc;
        rc.lf = lf;
        rc.horizon = horizon > 0
                         ? horizon
                         : static_cast<int>(bundle.trajectories.front().n_snapshots()) - 1;
        rc.train_horizon = train_horizon;
        rc.dt = bundle.trajectories.front().times[1];
        report = rollout::eval_extrapolation(
            *model, refs, rc, to_string(bundle.config.kind) + "/lf=" + std::to_string(lf));
    } else if (mode == "noise") {
        const double sigma_d = dataset_std(bundle, Split::train);
        report = rollout::noise_sweep(*model, test_refs(bundle), gammas, sigma_d, seed,
                                      noise_seeds, to_string(bundle.config.kind));
    } else {
        std::cerr << "error: unknown eval mode '" << mode << "'\n";
        return 2;
    }

    report::write_report_csv(report, fs::path(out) / "report.csv");
    json echo;
    echo["checkpoint"] = checkpoint;
    echo["data"] = data;
    echo["mode"] = mode;
    write_run_json(out, "eval", echo, seed, timer.seconds(), {"report.csv"});
    std::cout << "wrote " << report.rows.size() << " report rows to " << out << "\n";
    return 0;
}

int cmd_rollout(const std::string& checkpoint, const std::string& data, int lf, int horizon,
                std::size_t traj, const std::string& out) {
    Timer timer;
    auto model = nn::load_model(checkpoint);
    const DatasetBundle bundle = load_dataset(data);
    if (traj >= bundle.size()) {
        std::cerr << "error: trajectory index out of range\n";
        return 2;
    }
    const auto& ref = bundle.trajectories[traj];
    if (horizon <= 0) horizon = static_cast<int>(ref.n_snapshots()) - 1;

    rollout::RolloutConfig rc;
    rc.lf = lf;
    rc.horizon = horizon;
    rc.dt = ref.times[1];
    Tensor x0(std::vector<std::size_t>(ref.fields.shape().begin() + 1,
                                       ref.fields.shape().end()));
    std::copy(ref.snapshot(0), ref.snapshot(0) + ref.field_size(), x0.data());

    const auto rr = rollout::rollout_bundled(*model, x0, rc);
    fs::create_directories(out);
    atomic_write(fs::path(out) / "rollout.f32", tensor_to_f32(rr.states));

    rollout::EvalReport report;
    if (static_cast<int>(ref.n_snapshots()) - 1 >= horizon) {
        report = rollout::eval_extrapolation(*model, {ref}, rc,
                                             to_string(bundle.config.kind));
        report::write_report_csv(report, fs::path(out) / "report.csv");
    }
    json echo;
    echo["checkpoint"] = checkpoint;
    echo["lf"] = lf;
    echo["horizon"] = horizon;
    echo["traj"] = traj;
    echo["feedback_steps"] = rr.feedback_steps;
    write_run_json(out, "rollout", echo, 0, timer.seconds(), {"rollout.f32"});
    if (rr.truncated_at) {
        std::cerr << "rollout truncated at step " << *rr.truncated_at
                  << " (non-finite state)\n";
        return 3;
    }
    return 0;
}

int cmd_pod(const std::string& data, int modes, int lf, int train_steps, int epochs,
            const std::string& out) {
    Timer timer;
    const DatasetBundle bundle = load_dataset(data);
    const auto& traj = bundle.trajectories.front();
    if (bundle.size() > 1)
        std::cerr << "note: POD pipeline uses trajectory 0 of " << bundle.size() << "\n";

    const std::size_t space = traj.field_size();
    Tensor series({traj.n_snapshots(), space});
    std::copy(traj.fields.data(), traj.fields.data() + traj.fields.size(), series.data());

    pod::PodPipelineConfig cfg;
    cfg.r = modes;
    cfg.lf = lf;
    cfg.train_steps = train_steps > 0
                          ? train_steps
                          : static_cast<int>(0.6 * static_cast<double>(traj.n_snapshots()));
    cfg.model.levels = 1;
    cfg.model.base_channels = 16;
    cfg.model.channel_mults = {1};
    cfg.model.attention_levels = {0};
    cfg.model.d_emb = 16;
    cfg.model.mlp_hidden = 32;
    cfg.model.norm_groups = 8;
    cfg.model.time_scale = 1.0;
    cfg.opt.epochs = epochs;
    cfg.opt.batch_size = 32;
    if (const auto env = env_seed_override()) cfg.seed = *env;

    const auto result = pod::pod_pipeline(series, cfg);
    fs::create_directories(out);
    pod::save_basis(result.basis, fs::path(out) / "basis");
    nn::save_model(*result.model, fs::path(out) / "checkpoint.ckpt");
    report::write_report_csv(result.report, fs::path(out) / "report.csv");

    json echo;
    echo["data"] = data;
    echo["modes"] = modes;
    echo["lf"] = lf;
    echo["train_steps"] = cfg.train_steps;
    echo["windows"] = result.n_windows;
    echo["mean_extrapolation_error"] = result.mean_extrapolation_error;
    write_run_json(out, "pod", echo, cfg.seed, timer.seconds(),
                   {"basis", "checkpoint.ckpt", "report.csv"});
    std::cout << "mean extrapolation rel-L2 error: " << result.mean_extrapolation_error
              << " over " << result.n_windows << " training windows\n";
    return 0;
}

int cmd_report(const std::vector<std::string>& inputs, const std::string& out, bool plot) {
    Timer timer;
    rollout::EvalReport merged;
    for (const auto& in : inputs) {
        const auto r = report::read_report_csv(in);
        merged.rows.insert(merged.rows.end(), r.rows.begin(), r.rows.end());
    }
    fs::create_directories(out);
    report::write_report_csv(merged, fs::path(out) / "report.csv");
    std::vector<std::string> artifacts = {"report.csv"};

    if (plot) {
        std::set<std::string> axes;
        for (const auto& row : merged.rows) axes.insert(row.axis);
        for (const auto& axis : axes) {
            const auto series = report::series_from_report(merged, axis);
            if (series.empty()) continue;
            const std::string name = "errors_vs_" + axis + ".svg";
            report::write_line_chart_svg(fs::path(out) / name, "relative L2 error vs " + axis,
                                         axis, "rel L2 error", series);
            artifacts.push_back(name);
        }
    }
    json echo;
    echo["inputs"] = inputs;
    echo["plot"] = plot;
    write_run_json(out, "report", echo, 0, timer.seconds(), artifacts);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"DiTTO: continuous-in-time neural operators for time-dependent PDEs"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "synthesize a PDE trajectory dataset");
    std::string g_pde = "burgers", g_out;
    double g_nu = 0.01, g_tfinal = 1.0;
    int g_steps = 50, g_count = 16, g_jobs = 1;
    std::vector<int> g_grid = {128};
    std::uint64_t g_seed = 7;
    gen->add_option("--pde", g_pde, "burgers|ns|wave2d|wave3d")->required();
    gen->add_option("--nu", g_nu, "viscosity (burgers/ns)");
    gen->add_option("--t-final", g_tfinal, "physical end time");
    gen->add_option("--steps", g_steps, "stored snapshots T");
    gen->add_option("--grid", g_grid, "nodes per axis (one value or one per axis)");
    gen->add_option("--count", g_count, "number of trajectories");
    gen->add_option("--seed", g_seed, "master seed");
    gen->add_option("--jobs", g_jobs, "parallel workers");
    gen->add_option("--out", g_out, "output directory")->required();

    // validate-config
    auto* vc = app.add_subcommand("validate-config", "check a training config file");
    std::string vc_path;
    vc->add_option("--config", vc_path, "config JSON path")->required();

    // train
    auto* tr = app.add_subcommand("train", "train a model from a config/preset");
    std::string t_config, t_data, t_out;
    tr->add_option("--config", t_config, "config JSON path (defaults to preset defaults)");
    tr->add_option("--data", t_data, "dataset directory");
    tr->add_option("--out", t_out, "output directory");

    // eval
    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
    std::string e_ckpt, e_data, e_mode = "superres", e_out;
    int e_fine = 200, e_noise_seeds = 5, e_lf = 1, e_horizon = 0, e_train_horizon = 0;
    std::vector<int> e_nt = {10, 20, 50, 100, 200};
    std::vector<double> e_gammas = {0.0, 0.1, 0.2, 0.3, 0.5, 1.0};
    ev->add_option("--checkpoint", e_ckpt)->required();
    ev->add_option("--data", e_data)->required();
    ev->add_option("--mode", e_mode, "superres|extrap|noise")->required();
    ev->add_option("--out", e_out)->required();
    ev->add_option("--fine-steps", e_fine, "finest reference resolution (superres)");
    ev->add_option("--nt", e_nt, "temporal resolutions to test (superres)");
    ev->add_option("--gammas", e_gammas, "noise levels (noise)");
    ev->add_option("--noise-seeds", e_noise_seeds, "independent noise draws (noise)");
    ev->add_option("--lf", e_lf, "look-forward window (extrap)");
    ev->add_option("--horizon", e_horizon, "rollout horizon in steps (extrap)");
    ev->add_option("--train-horizon", e_train_horizon, "last step seen in training");

    // rollout
    auto* ro = app.add_subcommand("rollout", "bundled rollout of one trajectory");
    std::string r_ckpt, r_data, r_out;
    int r_lf = 1, r_horizon = 0;
    std::size_t r_traj = 0;
    ro->add_option("--checkpoint", r_ckpt)->required();
    ro->add_option("--data", r_data)->required();
    ro->add_option("--lf", r_lf);
    ro->add_option("--horizon", r_horizon);
    ro->add_option("--traj", r_traj, "trajectory index");
    ro->add_option("--out", r_out)->required();

    // pod
    auto* po = app.add_subcommand("pod", "reduced-order pipeline on a gridded series");
    std::string p_data, p_out;
    int p_modes = 5, p_lf = 10, p_train_steps = 0, p_epochs = 60;
    po->add_option("--data", p_data)->required();
    po->add_option("--modes", p_modes, "retained POD modes r");
    po->add_option("--lf", p_lf, "bundling look-forward window");
    po->add_option("--train-steps", p_train_steps, "training region end (snapshots)");
    po->add_option("--epochs", p_epochs);
    po->add_option("--out", p_out)->required();

    // report
    auto* re = app.add_subcommand("report", "merge report CSVs and render charts");
    std::vector<std::string> rep_in;
    std::string rep_out;
    bool rep_plot = false;
    re->add_option("--in", rep_in, "input report.csv files")->required();
    re->add_option("--out", rep_out)->required();
    re->add_flag("--plot", rep_plot, "emit SVG line charts");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed())
            return cmd_gen_data(g_pde, g_nu, g_tfinal, g_steps, g_grid, g_count, g_seed,
                                g_jobs, g_out);
        if (vc->parsed()) return cmd_validate_config(vc_path);
        if (tr->parsed()) return cmd_train(t_config, t_data, t_out);
        if (ev->parsed())
            return cmd_eval(e_ckpt, e_data, e_mode, e_out, e_fine, e_nt, e_gammas,
                            e_noise_seeds, e_lf, e_horizon, e_train_horizon);
        if (ro->parsed()) return cmd_rollout(r_ckpt, r_data, r_lf, r_horizon, r_traj, r_out);
        if (po->parsed()) return cmd_pod(p_data, p_modes, p_lf, p_train_steps, p_epochs, p_out);
        if (re->parsed()) return cmd_report(rep_in, rep_out, rep_plot);
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
