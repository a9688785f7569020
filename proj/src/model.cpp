#include "aemu/model.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>

#include "aemu/errors.hpp"
#include "aemu/parallel.hpp"
#include "aemu/rng.hpp"

namespace aemu {

using json = nlohmann::ordered_json;

std::string_view activation_name(Activation a) {
    switch (a) {
    case Activation::Relu: return "relu";
    case Activation::LeakyRelu: return "leaky_relu";
    case Activation::Tanh: return "tanh";
    case Activation::Sigmoid: return "sigmoid";
    }
    throw ConfigError("invalid activation value");
}

Activation activation_from_name(std::string_view name) {
    if (name == "relu") return Activation::Relu;
    if (name == "leaky_relu") return Activation::LeakyRelu;
    if (name == "tanh") return Activation::Tanh;
    if (name == "sigmoid") return Activation::Sigmoid;
    throw ConfigError("unknown activation '" + std::string(name) + "'");
}

std::string_view transform_name(Transform t) {
    return t == Transform::Standard ? "standard" : "log";
}

Transform transform_from_name(std::string_view name) {
    if (name == "standard") return Transform::Standard;
    if (name == "log") return Transform::Log;
    throw ConfigError("unknown transform '" + std::string(name) + "'");
}

std::string_view constraint_mode_name(ConstraintMode m) {
    switch (m) {
    case ConstraintMode::None: return "none";
    case ConstraintMode::Correct: return "correct";
    case ConstraintMode::Complete: return "complete";
    case ConstraintMode::CorrectThenComplete: return "correct_then_complete";
    }
    throw ConfigError("invalid constraint mode value");
}

ConstraintMode constraint_mode_from_name(std::string_view name) {
    if (name == "none") return ConstraintMode::None;
    if (name == "correct") return ConstraintMode::Correct;
    if (name == "complete") return ConstraintMode::Complete;
    if (name == "correct_then_complete") return ConstraintMode::CorrectThenComplete;
    throw ConfigError("unknown constraint mode '" + std::string(name) + "'");
}

std::array<int, kNumSpecies> ConstraintConfig::default_completion_indices() {
    std::array<int, kNumSpecies> idx;
    for (int s = 0; s < kNumSpecies; ++s)
        idx[s] = species_output_indices(static_cast<Species>(s)).front();
    return idx;
}

void validate(const ConstraintConfig& cfg) {
    for (int s = 0; s < kNumSpecies; ++s) {
        const auto& group = species_output_indices(static_cast<Species>(s));
        bool found = false;
        for (int i : group) found = found || i == cfg.completion_index[s];
        if (!found)
            throw ConfigError("completion index " + std::to_string(cfg.completion_index[s]) +
                              " is not an output of species " +
                              std::string(species_name(static_cast<Species>(s))));
    }
}

std::size_t MlpParams::parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
    return n;
}

MlpParams init_mlp(const std::vector<int>& arch, Activation activation, std::uint64_t seed) {
    if (arch.size() < 2) throw ConfigError("init_mlp: need at least an input and output width");
    for (int w : arch)
        if (w <= 0) throw ConfigError("init_mlp: layer widths must be positive");

    MlpParams p;
    p.arch = arch;
    p.activation = activation;
    p.weights.reserve(arch.size() - 1);
    p.biases.reserve(arch.size() - 1);
    for (std::size_t l = 0; l + 1 < arch.size(); ++l) {
        const int fan_in = arch[l], fan_out = arch[l + 1];
        Mat w(fan_in, fan_out);
        SplitMix64 rng = SplitMix64::substream(seed, l);
        const double bound = std::sqrt(6.0 / fan_in); // variance 2/fan_in
        for (double& v : w.data) v = rng.uniform(-bound, bound);
        p.weights.push_back(std::move(w));
        p.biases.emplace_back(1, fan_out, 0.0);
    }
    return p;
}

namespace {

void activate(Activation a, Mat& z) {
    switch (a) {
    case Activation::Relu:
        for (double& v : z.data) v = v > 0.0 ? v : 0.0;
        break;
    case Activation::LeakyRelu:
        for (double& v : z.data) v = v > 0.0 ? v : 0.01 * v;
        break;
    case Activation::Tanh:
        for (double& v : z.data) v = std::tanh(v);
        break;
    case Activation::Sigmoid:
        for (double& v : z.data) v = 1.0 / (1.0 + std::exp(-v));
        break;
    }
}

// Derivative from the post-activation value. At the ReLU kinks (a == 0) the
// negative-side subgradient is used: 0 for relu, 0.01 for leaky.
inline double activation_derivative(Activation act, double a) {
    switch (act) {
    case Activation::Relu: return a > 0.0 ? 1.0 : 0.0;
    case Activation::LeakyRelu: return a > 0.0 ? 1.0 : 0.01;
    case Activation::Tanh: return 1.0 - a * a;
    case Activation::Sigmoid: return a * (1.0 - a);
    }
    return 0.0;
}

void layer_forward(const Mat& a, const Mat& w, const Mat& b, Mat& z) {
    gemm(a, w, z);
    const std::size_t cols = z.cols;
    for (std::size_t i = 0; i < z.rows; ++i) {
        double* zi = z.row(i);
        const double* bv = b.row(0);
        for (std::size_t j = 0; j < cols; ++j) zi[j] += bv[j];
    }
}

void forward_into(const MlpParams& p, const Mat& x, Mat& y, ForwardCache* cache, Mat& scratch_a,
                  Mat& scratch_b) {
    const std::size_t L = p.num_layers();
    if (cache) {
        cache->acts.resize(L);
        cache->acts[0] = x;
    }
    const Mat* cur = &x;
    for (std::size_t l = 0; l < L; ++l) {
        Mat& dst = (l == L - 1) ? y : (l % 2 == 0 ? scratch_a : scratch_b);
        layer_forward(*cur, p.weights[l], p.biases[l], dst);
        if (l + 1 < L) {
            activate(p.activation, dst);
            if (cache) cache->acts[l + 1] = dst;
            cur = &dst;
        }
    }
}

} // namespace

void forward(const MlpParams& params, const Mat& x, Mat& y, ForwardCache* cache) {
    if (x.cols != static_cast<std::size_t>(params.arch.front()))
        throw DataError("forward: batch width does not match the input layer");
    for (double v : x.data)
        if (!std::isfinite(v)) throw DataError("forward: non-finite input");
    Mat sa, sb;
    forward_into(params, x, y, cache, sa, sb);
}

void forward_inference(const MlpParams& params, const Mat& x, Mat& y, int threads,
                       std::size_t tile_rows) {
    if (x.cols != static_cast<std::size_t>(params.arch.front()))
        throw DataError("forward: batch width does not match the input layer");
    y.resize(x.rows, params.arch.back());
    parallel_for_tiles(x.rows, tile_rows, threads,
                       [&](std::size_t, std::size_t begin, std::size_t end) {
                           const std::size_t rows = end - begin;
                           Mat xa(rows, x.cols);
                           std::copy(x.row(begin), x.row(begin) + rows * x.cols, xa.data.begin());
                           Mat out, sa, sb;
                           forward_into(params, xa, out, nullptr, sa, sb);
                           std::copy(out.data.begin(), out.data.end(), y.row(begin));
                       });
}

Gradients Gradients::zeros_like(const MlpParams& params) {
    Gradients g;
    g.w.reserve(params.num_layers());
    g.b.reserve(params.num_layers());
    for (std::size_t l = 0; l < params.num_layers(); ++l) {
        g.w.emplace_back(params.weights[l].rows, params.weights[l].cols, 0.0);
        g.b.emplace_back(1, params.biases[l].cols, 0.0);
    }
    return g;
}

void backward(const MlpParams& params, const ForwardCache& cache, const Mat& dy, Gradients& grads,
              Mat* dx) {
    const std::size_t L = params.num_layers();
    if (cache.acts.size() != L) throw DataError("backward: cache does not match the network");
    if (dy.cols != static_cast<std::size_t>(params.arch.back()))
        throw DataError("backward: output gradient width mismatch");

    if (grads.w.size() != L) grads = Gradients::zeros_like(params);
    Mat g = dy;
    Mat g_prev;
    for (std::size_t l = L; l-- > 0;) {
        const Mat& a_in = cache.acts[l];
        grads.w[l].resize(params.weights[l].rows, params.weights[l].cols);
        grads.w[l].fill(0.0);
        gemm_at_b_accumulate(a_in, g, grads.w[l]);
        grads.b[l].resize(1, params.biases[l].cols);
        grads.b[l].fill(0.0);
        double* db = grads.b[l].row(0);
        for (std::size_t i = 0; i < g.rows; ++i) {
            const double* gi = g.row(i);
            for (std::size_t j = 0; j < g.cols; ++j) db[j] += gi[j];
        }
        if (l == 0) {
            if (dx) gemm_a_bt(g, params.weights[0], *dx);
            break;
        }
        gemm_a_bt(g, params.weights[l], g_prev);
        const Mat& a = cache.acts[l]; // post-activation of layer l-1
        for (std::size_t i = 0; i < g_prev.size(); ++i)
            g_prev.data[i] *= activation_derivative(params.activation, a.data[i]);
        std::swap(g, g_prev);
    }
}

void apply_correction(Mat& y_std, const Mat& x_std, const NormStats& stats) {
    if (y_std.rows != x_std.rows) throw DataError("apply_correction: row counts disagree");
    if (y_std.cols != kNumOutputs || x_std.cols != kNumInputs)
        throw DataError("apply_correction: column counts do not match the schema");
    for (std::size_t i = 0; i < y_std.rows; ++i) {
        double* y = y_std.row(i);
        const double* x = x_std.row(i);
        for (int k = 0; k < kNumOutputs; ++k) {
            const double y_orig = y[k] * stats.sigma_y[k] + stats.mu_y[k];
            double corrected;
            if (k < kNumTendencies) {
                const int j = k + 8;
                const double x_orig = x[j] * stats.sigma_x[j] + stats.mu_x[j];
                const double full = y_orig + x_orig;
                corrected = (full > 0.0 ? full : 0.0) - x_orig;
            } else {
                corrected = y_orig > 0.0 ? y_orig : 0.0;
            }
            y[k] = (corrected - stats.mu_y[k]) / stats.sigma_y[k];
        }
    }
}

void apply_completion(Mat& y_std, const NormStats& stats, const ConstraintConfig& cfg) {
    if (y_std.cols != kNumOutputs)
        throw DataError("apply_completion: column count does not match the schema");
    validate(cfg);
    for (std::size_t i = 0; i < y_std.rows; ++i) {
        double* y = y_std.row(i);
        for (int s = 0; s < kNumSpecies; ++s) {
            const int j = cfg.completion_index[s];
            double sum = 0.0;
            for (int k : species_output_indices(static_cast<Species>(s)))
                if (k != j) sum += y[k] * stats.sigma_y[k] + stats.mu_y[k];
            y[j] = (-sum - stats.mu_y[j]) / stats.sigma_y[j];
        }
    }
}

void apply_constraints(Mat& y_std, const Mat& x_std, const NormStats& stats,
                       const ConstraintConfig& cfg) {
    switch (cfg.mode) {
    case ConstraintMode::None: return;
    case ConstraintMode::Correct: apply_correction(y_std, x_std, stats); return;
    case ConstraintMode::Complete: apply_completion(y_std, stats, cfg); return;
    case ConstraintMode::CorrectThenComplete:
        // Pinned order; completion may reintroduce negatives, so both
        // properties are not guaranteed simultaneously.
        apply_correction(y_std, x_std, stats);
        apply_completion(y_std, stats, cfg);
        return;
    }
}

void apply_correction_original(Mat& y_orig, const Mat& x_orig) {
    if (y_orig.rows != x_orig.rows) throw DataError("apply_correction: row counts disagree");
    for (std::size_t i = 0; i < y_orig.rows; ++i) {
        double* y = y_orig.row(i);
        const double* x = x_orig.row(i);
        for (int k = 0; k < kNumOutputs; ++k) {
            if (k < kNumTendencies) {
                const double full = y[k] + x[k + 8];
                y[k] = (full > 0.0 ? full : 0.0) - x[k + 8];
            } else {
                y[k] = y[k] > 0.0 ? y[k] : 0.0;
            }
        }
    }
}

void apply_completion_original(Mat& y_orig, const ConstraintConfig& cfg) {
    validate(cfg);
    for (std::size_t i = 0; i < y_orig.rows; ++i) {
        double* y = y_orig.row(i);
        for (int s = 0; s < kNumSpecies; ++s) {
            const int j = cfg.completion_index[s];
            double sum = 0.0;
            for (int k : species_output_indices(static_cast<Species>(s)))
                if (k != j) sum += y[k];
            y[j] = -sum;
        }
    }
}

void apply_constraints_original(Mat& y_orig, const Mat& x_orig, const ConstraintConfig& cfg) {
    switch (cfg.mode) {
    case ConstraintMode::None: return;
    case ConstraintMode::Correct: apply_correction_original(y_orig, x_orig); return;
    case ConstraintMode::Complete: apply_completion_original(y_orig, cfg); return;
    case ConstraintMode::CorrectThenComplete:
        apply_correction_original(y_orig, x_orig);
        apply_completion_original(y_orig, cfg);
        return;
    }
}

namespace {

json mat_to_json(const Mat& m) {
    json rows = json::array();
    for (std::size_t i = 0; i < m.rows; ++i) {
        json row = json::array();
        for (std::size_t j = 0; j < m.cols; ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Mat mat_from_json(const json& j, const std::string& what) {
    if (!j.is_array() || j.empty()) throw DataError("checkpoint: bad matrix for " + what);
    const std::size_t rows = j.size();
    const std::size_t cols = j[0].size();
    Mat m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        if (j[i].size() != cols) throw DataError("checkpoint: ragged matrix for " + what);
        for (std::size_t c = 0; c < cols; ++c) m(i, c) = j[i][c].get<double>();
    }
    return m;
}

std::uint64_t fnv1a_bytes(const std::string& s) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}

} // namespace

std::string checkpoint_to_json(const Checkpoint& ckpt) {
    json j;
    j["version"] = kCheckpointVersion;
    j["schema_hash"] = schema_hash_hex();
    j["arch"] = ckpt.params.arch;
    j["activation"] = activation_name(ckpt.params.activation);
    j["transform"] = transform_name(ckpt.params.transform);
    json w = json::array(), b = json::array();
    for (std::size_t l = 0; l < ckpt.params.num_layers(); ++l) {
        w.push_back(mat_to_json(ckpt.params.weights[l]));
        json bias = json::array();
        for (std::size_t c = 0; c < ckpt.params.biases[l].cols; ++c)
            bias.push_back(ckpt.params.biases[l](0, c));
        b.push_back(std::move(bias));
    }
    j["weights"] = std::move(w);
    j["biases"] = std::move(b);
    j["norm_stats"] = {{"mu_x", ckpt.stats.mu_x},       {"sigma_x", ckpt.stats.sigma_x},
                       {"mu_y", ckpt.stats.mu_y},       {"sigma_y", ckpt.stats.sigma_y},
                       {"fitted_rows", ckpt.stats.fitted_rows},
                       {"provenance", ckpt.stats.provenance}};
    j["constraint_config"] = {{"mode", constraint_mode_name(ckpt.constraint.mode)}};
    j["completion_indices"] = ckpt.constraint.completion_index;
    if (ckpt.params.transform == Transform::Log) j["log_eps"] = ckpt.log_cfg.eps;
    return j.dump(2) + "\n";
}

Checkpoint checkpoint_from_json(const std::string& text, const std::string& context) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(context + ": not a valid checkpoint: " + e.what());
    }
    try {
        if (j.at("version").get<int>() != kCheckpointVersion)
            throw DataError(context + ": unsupported checkpoint version");
        if (j.at("schema_hash").get<std::string>() != schema_hash_hex())
            throw DataError(context + ": schema hash mismatch (stale or foreign checkpoint)");
        Checkpoint c;
        c.params.arch = j.at("arch").get<std::vector<int>>();
        c.params.activation = activation_from_name(j.at("activation").get<std::string>());
        c.params.transform = transform_from_name(j.at("transform").get<std::string>());
        const auto& w = j.at("weights");
        const auto& b = j.at("biases");
        if (w.size() + 1 != c.params.arch.size() || b.size() != w.size())
            throw DataError(context + ": layer count mismatch");
        for (std::size_t l = 0; l < w.size(); ++l) {
            Mat wm = mat_from_json(w[l], "layer " + std::to_string(l));
            if (wm.rows != static_cast<std::size_t>(c.params.arch[l]) ||
                wm.cols != static_cast<std::size_t>(c.params.arch[l + 1]))
                throw DataError(context + ": weight shape mismatch at layer " + std::to_string(l));
            Mat bm(1, b[l].size());
            for (std::size_t cidx = 0; cidx < bm.cols; ++cidx) bm(0, cidx) = b[l][cidx].get<double>();
            if (bm.cols != wm.cols)
                throw DataError(context + ": bias shape mismatch at layer " + std::to_string(l));
            c.params.weights.push_back(std::move(wm));
            c.params.biases.push_back(std::move(bm));
        }
        const auto& ns = j.at("norm_stats");
        c.stats.mu_x = ns.at("mu_x").get<std::vector<double>>();
        c.stats.sigma_x = ns.at("sigma_x").get<std::vector<double>>();
        c.stats.mu_y = ns.at("mu_y").get<std::vector<double>>();
        c.stats.sigma_y = ns.at("sigma_y").get<std::vector<double>>();
        c.stats.fitted_rows = ns.at("fitted_rows").get<std::size_t>();
        c.stats.provenance = ns.at("provenance").get<std::string>();
        c.constraint.mode =
            constraint_mode_from_name(j.at("constraint_config").at("mode").get<std::string>());
        const auto& ci = j.at("completion_indices");
        for (int s = 0; s < kNumSpecies; ++s) c.constraint.completion_index[s] = ci[s].get<int>();
        validate(c.constraint);
        if (c.params.transform == Transform::Log)
            c.log_cfg.eps = j.at("log_eps").get<std::vector<double>>();
        return c;
    } catch (const json::exception& e) {
        throw DataError(context + ": malformed checkpoint: " + e.what());
    }
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
    const std::string text = checkpoint_to_json(ckpt);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw DataError("write failed for '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint '" + path.string() + "'");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return checkpoint_from_json(text, path.string());
}

std::string checkpoint_id(const Checkpoint& ckpt) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a_bytes(checkpoint_to_json(ckpt))));
    return std::string(buf);
}

} // namespace aemu
