#include "ditto/nn/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace ditto::nn {

using json = nlohmann::json;

std::string to_string(Variant v) {
    switch (v) {
        case Variant::ditto: return "ditto";
        case Variant::ditto_point: return "ditto_point";
        case Variant::ditto_gate: return "ditto_gate";
        case Variant::baseline_unet: return "baseline_unet";
    }
    return "?";
}

Variant variant_from_string(const std::string& s) {
    if (s == "ditto") return Variant::ditto;
    if (s == "ditto_point") return Variant::ditto_point;
    if (s == "ditto_gate") return Variant::ditto_gate;
    if (s == "baseline_unet") return Variant::baseline_unet;
    throw std::invalid_argument("unknown model variant: " + s);
}

int ModelConfig::channels_at(int level) const {
    return base_channels * channel_mults.at(static_cast<std::size_t>(level));
}

bool ModelConfig::attention_at(int level) const {
    if (!use_attention) return false;
    return std::find(attention_levels.begin(), attention_levels.end(), level) !=
           attention_levels.end();
}

void ModelConfig::validate() const {
    if (dimension < 1 || dimension > 3)
        throw std::invalid_argument("ModelConfig: dimension must be 1..3");
    if (static_cast<int>(grid.size()) != dimension)
        throw std::invalid_argument("ModelConfig: grid rank != dimension");
    if (levels < 1) throw std::invalid_argument("ModelConfig: levels must be >= 1");
    if (base_channels < 1)
        throw std::invalid_argument("ModelConfig: base_channels must be >= 1");
    if (channel_mults.size() != static_cast<std::size_t>(levels))
        throw std::invalid_argument("ModelConfig: channel_mults must have one entry per level");
    if (res_blocks_per_level < 1)
        throw std::invalid_argument("ModelConfig: res_blocks_per_level must be >= 1");
    for (int l : attention_levels)
        if (l < 0 || l >= levels)
            throw std::invalid_argument("ModelConfig: attention level out of range");
    if (d_emb < 2 || d_emb % 2 != 0)
        throw std::invalid_argument("ModelConfig: d_emb must be even and >= 2");
    if (mlp_hidden < 2) throw std::invalid_argument("ModelConfig: mlp_hidden must be >= 2");
    if (time_scale <= 0.0) throw std::invalid_argument("ModelConfig: time_scale must be > 0");

    const int factor = 1 << (levels - 1);
    if (variant != Variant::ditto_point) {
        for (int n : grid) {
            if (n % factor != 0)
                throw std::invalid_argument(
                    "ModelConfig: grid extents must be divisible by 2^(levels-1)");
            if (n / factor < 2)
                throw std::invalid_argument(
                    "ModelConfig: downsampled grid would fall below 2 nodes per axis");
        }
    }
}

json ModelConfig::to_json() const {
    json j;
    j["variant"] = to_string(variant);
    j["dimension"] = dimension;
    j["grid"] = grid;
    j["levels"] = levels;
    j["base_channels"] = base_channels;
    j["channel_mults"] = channel_mults;
    j["res_blocks_per_level"] = res_blocks_per_level;
    j["attention_levels"] = attention_levels;
    j["use_attention"] = use_attention;
    j["attention_softmax"] = attention_softmax;
    j["norm_groups"] = norm_groups;
    j["d_emb"] = d_emb;
    j["mlp_hidden"] = mlp_hidden;
    j["time_scale"] = time_scale;
    j["conditioning_residual"] = conditioning_residual;
    j["conditioning_scalar_name"] = conditioning_scalar_name;
    j["point_coord_scale"] = point_coord_scale;
    return j;
}

ModelConfig ModelConfig::from_json(const json& j) {
    ModelConfig c;
    c.variant = variant_from_string(j.at("variant").get<std::string>());
    c.dimension = j.at("dimension").get<int>();
    c.grid = j.at("grid").get<std::vector<int>>();
    c.levels = j.at("levels").get<int>();
    c.base_channels = j.at("base_channels").get<int>();
    c.channel_mults = j.at("channel_mults").get<std::vector<int>>();
    c.res_blocks_per_level = j.at("res_blocks_per_level").get<int>();
    c.attention_levels = j.at("attention_levels").get<std::vector<int>>();
    c.use_attention = j.at("use_attention").get<bool>();
    c.attention_softmax = j.at("attention_softmax").get<bool>();
    c.norm_groups = j.at("norm_groups").get<int>();
    c.d_emb = j.at("d_emb").get<int>();
    c.mlp_hidden = j.at("mlp_hidden").get<int>();
    c.time_scale = j.at("time_scale").get<double>();
    c.conditioning_residual = j.at("conditioning_residual").get<bool>();
    c.conditioning_scalar_name = j.at("conditioning_scalar_name").get<std::string>();
    c.point_coord_scale = j.at("point_coord_scale").get<double>();
    c.validate();
    return c;
}

namespace {

std::vector<std::size_t> grid_shape(const std::vector<int>& grid) {
    std::vector<std::size_t> s;
    for (int n : grid) s.push_back(static_cast<std::size_t>(n));
    return s;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    const std::size_t batch = a.dim(0), ca = a.dim(1), cb = b.dim(1);
    const std::size_t spatial = a.size() / (batch * ca);
    std::vector<std::size_t> shape = a.shape();
    shape[1] = ca + cb;
    Tensor out = Tensor::uninit(shape);
    for (std::size_t bu = 0; bu < batch; ++bu) {
        std::copy(a.data() + bu * ca * spatial, a.data() + (bu + 1) * ca * spatial,
                  out.data() + bu * (ca + cb) * spatial);
        std::copy(b.data() + bu * cb * spatial, b.data() + (bu + 1) * cb * spatial,
                  out.data() + (bu * (ca + cb) + ca) * spatial);
    }
    return out;
}

void split_channels(const Tensor& g, std::size_t ca, Tensor& ga, Tensor& gb) {
    const std::size_t batch = g.dim(0), c = g.dim(1);
    const std::size_t cb = c - ca;
    const std::size_t spatial = g.size() / (batch * c);
    std::vector<std::size_t> sa = g.shape(), sb = g.shape();
    sa[1] = ca;
    sb[1] = cb;
    ga = Tensor::uninit(sa);
    gb = Tensor::uninit(sb);
    for (std::size_t bu = 0; bu < batch; ++bu) {
        std::copy(g.data() + bu * c * spatial, g.data() + (bu * c + ca) * spatial,
                  ga.data() + bu * ca * spatial);
        std::copy(g.data() + (bu * c + ca) * spatial, g.data() + (bu + 1) * c * spatial,
                  gb.data() + bu * cb * spatial);
    }
}

}  // namespace

Model::Model(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
    if (cfg_.channel_mults.empty()) {
        cfg_.channel_mults.assign(static_cast<std::size_t>(cfg_.levels), 2);
        cfg_.channel_mults[0] = 1;
    }
    if (cfg_.attention_levels.empty() && cfg_.use_attention)
        cfg_.attention_levels = {cfg_.levels - 1};
    cfg_.validate();

    rank_ = cfg_.variant == Variant::ditto_point ? 1 : cfg_.dimension;
    Rng rng(mix_seed(seed, 0xd1770));

    const std::size_t in_ch = cfg_.variant == Variant::ditto_point
                                  ? 1 + static_cast<std::size_t>(cfg_.d_emb)
                                  : 1 + static_cast<std::size_t>(cfg_.dimension);
    const std::size_t cond_w =
        cfg_.conditioned() ? static_cast<std::size_t>(cfg_.mlp_hidden) : 0;

    if (cfg_.conditioned())
        cond_head_.emplace("cond_head", EmbeddingSpec{cfg_.d_emb, cfg_.mlp_hidden}, rng);

    const auto c_of = [&](int l) { return static_cast<std::size_t>(cfg_.channels_at(l)); };
    stem_.emplace("stem", rank_, in_ch, c_of(0), 3, 1, rng);

    for (int l = 0; l < cfg_.levels; ++l) {
        LevelBlocks lv;
        for (int r = 0; r < cfg_.res_blocks_per_level; ++r)
            lv.res.emplace_back("enc" + std::to_string(l) + ".res" + std::to_string(r), rank_,
                                c_of(l), c_of(l), cond_w, cfg_.norm_groups,
                                cfg_.conditioning_residual, rng);
        if (cfg_.attention_at(l)) {
            lv.attn_sp.emplace("enc" + std::to_string(l) + ".attn_sp", c_of(l),
                               AttnMode::spatial, cfg_.attention_softmax, cfg_.norm_groups,
                               rng);
            lv.attn_ch.emplace("enc" + std::to_string(l) + ".attn_ch", c_of(l),
                               AttnMode::channel, cfg_.attention_softmax, cfg_.norm_groups,
                               rng);
        }
        enc_.push_back(std::move(lv));
        if (l + 1 < cfg_.levels)
            down_.emplace_back("down" + std::to_string(l), rank_, c_of(l), c_of(l + 1), 3, 2,
                               rng);
    }

    const std::size_t c_mid = c_of(cfg_.levels - 1);
    mid1_.emplace("mid.res0", rank_, c_mid, c_mid, cond_w, cfg_.norm_groups,
                  cfg_.conditioning_residual, rng);
    if (cfg_.use_attention) {
        mid_sp_.emplace("mid.attn_sp", c_mid, AttnMode::spatial, cfg_.attention_softmax,
                        cfg_.norm_groups, rng);
        mid_ch_.emplace("mid.attn_ch", c_mid, AttnMode::channel, cfg_.attention_softmax,
                        cfg_.norm_groups, rng);
    }
    mid2_.emplace("mid.res1", rank_, c_mid, c_mid, cond_w, cfg_.norm_groups,
                  cfg_.conditioning_residual, rng);

    if (cfg_.variant == Variant::ditto_gate)
        for (int l = 0; l < cfg_.levels; ++l)
            gates_.emplace_back("gate" + std::to_string(l), rank_, c_of(l), cfg_.norm_groups,
                                rng);

    for (int l = cfg_.levels - 1; l >= 0; --l) {
        LevelBlocks lv;
        for (int r = 0; r < cfg_.res_blocks_per_level; ++r) {
            const std::size_t cin = r == 0 ? 2 * c_of(l) : c_of(l);
            lv.res.emplace_back("dec" + std::to_string(l) + ".res" + std::to_string(r), rank_,
                                cin, c_of(l), cond_w, cfg_.norm_groups,
                                cfg_.conditioning_residual, rng);
        }
        if (cfg_.attention_at(l)) {
            lv.attn_sp.emplace("dec" + std::to_string(l) + ".attn_sp", c_of(l),
                               AttnMode::spatial, cfg_.attention_softmax, cfg_.norm_groups,
                               rng);
            lv.attn_ch.emplace("dec" + std::to_string(l) + ".attn_ch", c_of(l),
                               AttnMode::channel, cfg_.attention_softmax, cfg_.norm_groups,
                               rng);
        }
        dec_.push_back(std::move(lv));  // dec_[0] is level L-1
        if (l > 0) {
            up_nn_.emplace_back(rank_);
            up_conv_.emplace_back("up" + std::to_string(l), rank_, c_of(l), c_of(l - 1), 3, 1,
                                  rng);
        }
    }

    out_gn_.emplace("out.gn", c_of(0), cfg_.norm_groups);
    out_conv_.emplace("out.conv", rank_, c_of(0), 1, 3, 1, rng, /*zero_init=*/true);

    // Registry (construction order).
    if (cond_head_) cond_head_->collect(params_);
    stem_->collect(params_);
    for (auto& lv : enc_) {
        for (auto& rb : lv.res) rb.collect(params_);
        if (lv.attn_sp) lv.attn_sp->collect(params_);
        if (lv.attn_ch) lv.attn_ch->collect(params_);
    }
    for (auto& d : down_) d.collect(params_);
    mid1_->collect(params_);
    if (mid_sp_) mid_sp_->collect(params_);
    if (mid_ch_) mid_ch_->collect(params_);
    mid2_->collect(params_);
    for (auto& g : gates_) g.collect(params_);
    for (auto& lv : dec_) {
        for (auto& rb : lv.res) rb.collect(params_);
        if (lv.attn_sp) lv.attn_sp->collect(params_);
        if (lv.attn_ch) lv.attn_ch->collect(params_);
    }
    for (auto& u : up_conv_) u.collect(params_);
    out_gn_->collect(params_);
    out_conv_->collect(params_);
}

std::size_t Model::param_count() const {
    std::size_t n = 0;
    for (const auto* p : params_) n += p->value.size();
    return n;
}

void Model::zero_grad() {
    for (auto* p : params_) p->grad.zero();
}

std::vector<Tensor> Model::snapshot_values() const {
    std::vector<Tensor> out;
    out.reserve(params_.size());
    for (const auto* p : params_) out.push_back(p->value);
    return out;
}

void Model::restore_values(const std::vector<Tensor>& vals) {
    if (vals.size() != params_.size())
        throw std::invalid_argument("Model::restore_values: size mismatch");
    for (std::size_t i = 0; i < vals.size(); ++i) params_[i]->value = vals[i];
}

Tensor Model::assemble_grid_input(const Tensor& x0) const {
    const std::size_t batch = x0.dim(0);
    const auto gshape = grid_shape(cfg_.grid);
    std::size_t n = 1;
    for (auto s : gshape) n *= s;

    std::vector<std::size_t> shape = {batch, 1 + static_cast<std::size_t>(cfg_.dimension)};
    shape.insert(shape.end(), gshape.begin(), gshape.end());
    Tensor in = Tensor::uninit(shape);

    // Channel 0: field. Channels 1..d: coordinates normalized to [0,1].
    for (std::size_t bu = 0; bu < batch; ++bu) {
        std::copy(x0.data() + bu * n, x0.data() + (bu + 1) * n,
                  in.data() + bu * (1 + static_cast<std::size_t>(cfg_.dimension)) * n);
        for (int a = 0; a < cfg_.dimension; ++a) {
            double* dst =
                in.data() +
                (bu * (1 + static_cast<std::size_t>(cfg_.dimension)) + 1 +
                 static_cast<std::size_t>(a)) *
                    n;
            // decode multi-index along axis a
            std::size_t stride = 1;
            for (int aa = cfg_.dimension - 1; aa > a; --aa)
                stride *= gshape[static_cast<std::size_t>(aa)];
            const std::size_t extent = gshape[static_cast<std::size_t>(a)];
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t idx = (i / stride) % extent;
                dst[i] = extent > 1
                             ? static_cast<double>(idx) / static_cast<double>(extent - 1)
                             : 0.0;
            }
        }
    }
    return in;
}

Tensor Model::positional_code(const Tensor& coords) const {
    if (coords.rank() != 2 || coords.dim(1) != static_cast<std::size_t>(cfg_.dimension))
        throw std::invalid_argument("positional_code: coords must be (N, dimension)");
    const std::size_t n = coords.dim(0);
    const auto d_emb = static_cast<std::size_t>(cfg_.d_emb);
    Tensor code({d_emb, n});

    for (int a = 0; a < cfg_.dimension; ++a) {
        double lo = coords.at(0, static_cast<std::size_t>(a));
        double hi = lo;
        for (std::size_t i = 1; i < n; ++i) {
            lo = std::min(lo, coords.at(i, static_cast<std::size_t>(a)));
            hi = std::max(hi, coords.at(i, static_cast<std::size_t>(a)));
        }
        const double span = hi > lo ? hi - lo : 1.0;
        // Incommensurate per-axis scales keep the summed code injective on
        // grids: a plain sum is symmetric under axis swap, and integer scale
        // ratios recreate that symmetry on rational grid coordinates.
        constexpr double golden = 0.6180339887498949;
        const double scale = cfg_.point_coord_scale * (1.0 + a * golden);
        for (std::size_t i = 0; i < n; ++i) {
            const double pos =
                (coords.at(i, static_cast<std::size_t>(a)) - lo) / span * scale;
            const auto e = embed_scalar(pos, cfg_.d_emb);
            for (std::size_t j = 0; j < d_emb; ++j) code.at(j, i) += e[j];
        }
    }
    return code;
}

Tensor Model::forward(const Tensor& x0, const std::vector<double>& scalars) {
    if (!x0.all_finite()) throw std::invalid_argument("Model::forward: non-finite input");
    const auto gshape = grid_shape(cfg_.grid);
    if (x0.rank() != gshape.size() + 1 ||
        !std::equal(gshape.begin(), gshape.end(), x0.shape().begin() + 1))
        throw std::invalid_argument("Model::forward: input grid does not match config (got " +
                                    Tensor::shape_str(x0.shape()) + ")");
    if (scalars.size() != x0.dim(0))
        throw std::invalid_argument("Model::forward: one scalar per sample required");

    x0_shape_ = x0.shape();

    if (cfg_.variant == Variant::ditto_point) {
        std::size_t n = 1;
        for (auto s : gshape) n *= s;
        Tensor values = x0;
        values.reshape({x0.dim(0), n});
        // Row-major flattening of the config grid; recorded here so the
        // round-trip back to the grid layout is the plain inverse reshape.
        Tensor coords({n, static_cast<std::size_t>(cfg_.dimension)});
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t rem = i;
            for (int a = cfg_.dimension - 1; a >= 0; --a) {
                const std::size_t extent = gshape[static_cast<std::size_t>(a)];
                coords.at(i, static_cast<std::size_t>(a)) =
                    extent > 1 ? static_cast<double>(rem % extent) /
                                     static_cast<double>(extent - 1)
                               : 0.0;
                rem /= extent;
            }
        }
        Tensor y = point_forward(values, coords, scalars);
        y.reshape(x0_shape_);
        return y;
    }

    point_path_ = false;
    Tensor in = assemble_grid_input(x0);
    Tensor y = forward_assembled(in, scalars);
    y.reshape(x0_shape_);
    return y;
}

Tensor Model::forward_one(const Tensor& x0, double scalar) {
    std::vector<std::size_t> shape = x0.shape();
    shape.insert(shape.begin(), 1);
    Tensor batched = x0;
    batched.reshape(shape);
    Tensor y = forward(batched, {scalar});
    y.reshape(x0.shape());
    return y;
}

Tensor Model::point_forward(const Tensor& values, const Tensor& coords,
                            const std::vector<double>& scalars) {
    if (cfg_.variant != Variant::ditto_point)
        throw std::invalid_argument("point_forward: model variant is not ditto_point");
    if (values.rank() != 2 || coords.rank() != 2 || values.dim(1) != coords.dim(0))
        throw std::invalid_argument("point_forward: values (B,N) and coords (N,d) required");
    if (!values.all_finite() || !coords.all_finite())
        throw std::invalid_argument("point_forward: non-finite input");

    const std::size_t batch = values.dim(0);
    const std::size_t n = values.dim(1);
    const std::size_t factor = std::size_t(1) << (cfg_.levels - 1);
    const std::size_t n_pad = (n + factor - 1) / factor * factor;
    point_n_ = n;
    point_pad_ = n_pad;
    point_path_ = true;

    const Tensor code = positional_code(coords);  // (d_emb, N)
    const auto d_emb = static_cast<std::size_t>(cfg_.d_emb);

    Tensor in({batch, 1 + d_emb, n_pad});
    for (std::size_t bu = 0; bu < batch; ++bu) {
        double* base = in.data() + bu * (1 + d_emb) * n_pad;
        std::copy(values.data() + bu * n, values.data() + (bu + 1) * n, base);
        for (std::size_t j = 0; j < d_emb; ++j)
            std::copy(code.data() + j * n, code.data() + (j + 1) * n,
                      base + (1 + j) * n_pad);
    }

    Tensor y = forward_assembled(in, scalars);  // (B, 1, n_pad)
    Tensor out({batch, n});
    for (std::size_t bu = 0; bu < batch; ++bu)
        std::copy(y.data() + bu * n_pad, y.data() + bu * n_pad + n, out.data() + bu * n);
    return out;
}

Tensor Model::forward_assembled(const Tensor& input, const std::vector<double>& scalars) {
    if (cfg_.conditioned()) {
        std::vector<double> scaled(scalars.size());
        for (std::size_t i = 0; i < scalars.size(); ++i) {
            if (!(scalars[i] >= 0.0) || !std::isfinite(scalars[i]))
                throw std::invalid_argument(
                    "Model::forward: conditioning scalar must be finite and >= 0");
            scaled[i] = scalars[i] * cfg_.time_scale;
        }
        const Tensor emb = embed_batch(scaled, cfg_.d_emb);
        gvec_ = cond_head_->forward(emb);
    }
    const Tensor* g = cfg_.conditioned() ? &gvec_ : nullptr;

    Tensor h = stem_->forward(input);
    skips_.assign(static_cast<std::size_t>(cfg_.levels), Tensor());
    for (int l = 0; l < cfg_.levels; ++l) {
        if (l > 0) h = down_[static_cast<std::size_t>(l - 1)].forward(h);
        auto& lv = enc_[static_cast<std::size_t>(l)];
        for (auto& rb : lv.res) h = rb.forward(h, g);
        if (lv.attn_sp) h = lv.attn_sp->forward(h);
        if (lv.attn_ch) h = lv.attn_ch->forward(h);
        skips_[static_cast<std::size_t>(l)] = h;
    }

    h = mid1_->forward(h, g);
    if (mid_sp_) h = mid_sp_->forward(h);
    if (mid_ch_) h = mid_ch_->forward(h);
    h = mid2_->forward(h, g);

    for (int l = cfg_.levels - 1; l >= 0; --l) {
        auto& lv = dec_[static_cast<std::size_t>(cfg_.levels - 1 - l)];
        Tensor sk = cfg_.variant == Variant::ditto_gate
                        ? gates_[static_cast<std::size_t>(l)].forward(
                              skips_[static_cast<std::size_t>(l)])
                        : skips_[static_cast<std::size_t>(l)];
        h = concat_channels(h, sk);
        for (auto& rb : lv.res) h = rb.forward(h, g);
        if (lv.attn_sp) h = lv.attn_sp->forward(h);
        if (lv.attn_ch) h = lv.attn_ch->forward(h);
        if (l > 0) {
            h = up_nn_[static_cast<std::size_t>(cfg_.levels - 1 - l)].forward(h);
            h = up_conv_[static_cast<std::size_t>(cfg_.levels - 1 - l)].forward(h);
        }
    }

    h = out_gn_->forward(h);
    h = out_act_.forward(h);
    return out_conv_->forward(h);
}

Tensor Model::backward(const Tensor& gy_in) {
    const std::size_t batch = gy_in.dim(0);
    Tensor g = gy_in;
    if (point_path_) {
        // Re-pad the cropped output gradient.
        Tensor gp({batch, 1, point_pad_});
        for (std::size_t bu = 0; bu < batch; ++bu)
            std::copy(gy_in.data() + bu * point_n_, gy_in.data() + (bu + 1) * point_n_,
                      gp.data() + bu * point_pad_);
        g = gp;
    } else {
        std::size_t n = 1;
        for (std::size_t a = 1; a < x0_shape_.size(); ++a) n *= x0_shape_[a];
        g.reshape({batch, 1, n});
    }

    if (cfg_.conditioned()) dgvec_ = Tensor(gvec_.shape());
    Tensor* dg = cfg_.conditioned() ? &dgvec_ : nullptr;

    g = out_conv_->backward(g);
    g = out_act_.backward(g);
    g = out_gn_->backward(g);

    std::vector<Tensor> gskips(static_cast<std::size_t>(cfg_.levels));
    for (int l = 0; l <= cfg_.levels - 1; ++l) {
        auto& lv = dec_[static_cast<std::size_t>(cfg_.levels - 1 - l)];
        if (l > 0) {
            g = up_conv_[static_cast<std::size_t>(cfg_.levels - 1 - l)].backward(g);
            g = up_nn_[static_cast<std::size_t>(cfg_.levels - 1 - l)].backward(g);
        }
        if (lv.attn_ch) g = lv.attn_ch->backward(g);
        if (lv.attn_sp) g = lv.attn_sp->backward(g);
        for (auto it = lv.res.rbegin(); it != lv.res.rend(); ++it) g = it->backward(g, dg);
        const std::size_t c_keep = skips_[static_cast<std::size_t>(l)].dim(1);
        Tensor gh, gsk;
        split_channels(g, g.dim(1) - c_keep, gh, gsk);
        gskips[static_cast<std::size_t>(l)] =
            cfg_.variant == Variant::ditto_gate
                ? gates_[static_cast<std::size_t>(l)].backward(gsk)
                : gsk;
        g = std::move(gh);
    }

    g = mid2_->backward(g, dg);
    if (mid_ch_) g = mid_ch_->backward(g);
    if (mid_sp_) g = mid_sp_->backward(g);
    g = mid1_->backward(g, dg);

    for (int l = cfg_.levels - 1; l >= 0; --l) {
        auto& lv = enc_[static_cast<std::size_t>(l)];
        for (std::size_t i = 0; i < g.size(); ++i)
            g[i] += gskips[static_cast<std::size_t>(l)][i];
        if (lv.attn_ch) g = lv.attn_ch->backward(g);
        if (lv.attn_sp) g = lv.attn_sp->backward(g);
        for (auto it = lv.res.rbegin(); it != lv.res.rend(); ++it) g = it->backward(g, dg);
        if (l > 0) g = down_[static_cast<std::size_t>(l - 1)].backward(g);
    }
    g = stem_->backward(g);

    if (cfg_.conditioned()) cond_head_->backward(dgvec_);

    // d(loss)/d(x0) is channel 0 of the assembled input gradient.
    const std::size_t in_ch = g.dim(1);
    const std::size_t n = g.size() / (batch * in_ch);
    if (point_path_) {
        Tensor gx({batch, point_n_});
        for (std::size_t bu = 0; bu < batch; ++bu)
            std::copy(g.data() + bu * in_ch * n, g.data() + bu * in_ch * n + point_n_,
                      gx.data() + bu * point_n_);
        if (Tensor::numel_of(x0_shape_) == gx.size()) gx.reshape(x0_shape_);
        return gx;
    }
    Tensor gx(x0_shape_);
    for (std::size_t bu = 0; bu < batch; ++bu)
        std::copy(g.data() + bu * in_ch * n, g.data() + bu * in_ch * n + n,
                  gx.data() + bu * n);
    return gx;
}

std::unique_ptr<Model> build_model(const ModelConfig& cfg, std::uint64_t seed) {
    return std::make_unique<Model>(cfg, seed);
}

}  // namespace ditto::nn
