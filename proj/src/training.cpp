#include "aemu/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "aemu/errors.hpp"
#include "aemu/evaluation.hpp"
#include "aemu/rng.hpp"

namespace aemu {

void validate(const TrainConfig& cfg) {
    if (cfg.epochs < 1) throw ConfigError("train: epochs must be >= 1");
    if (!(cfg.learning_rate > 0.0)) throw ConfigError("train: learning rate must be positive");
    if (cfg.batch_size < 1) throw ConfigError("train: batch size must be >= 1");
    if (cfg.weight_decay < 0.0) throw ConfigError("train: weight decay must be >= 0");
    for (double a : cfg.alpha)
        if (a < 0.0) throw ConfigError("train: alpha weights must be >= 0");
    for (double b : cfg.beta)
        if (b < 0.0) throw ConfigError("train: beta weights must be >= 0");
    if (cfg.lambda_mass != 0.0 && cfg.lambda_mass != 1.0)
        throw ConfigError("train: lambda must be 0 or 1");
    if (cfg.mu_pos != 0.0 && cfg.mu_pos != 1.0) throw ConfigError("train: mu must be 0 or 1");
    if (cfg.transform == Transform::Log && (cfg.lambda_mass != 0.0 || cfg.mu_pos != 0.0))
        throw ConfigError("train: mass/positivity regularizers require the standard transform");
    if (!(cfg.val_fraction > 0.0 && cfg.val_fraction < 1.0))
        throw ConfigError("train: validation fraction must be in (0, 1)");
    if (cfg.arch.size() < 2 || cfg.arch.front() != kNumInputs)
        throw ConfigError("train: architecture must start at the 32 input variables");
    if (!(cfg.log_eps > 0.0)) throw ConfigError("train: log floor must be positive");
    if (cfg.threads < 1) throw ConfigError("train: threads must be >= 1");
}

double mse_loss(const Mat& pred, const Mat& target, Mat* grad) {
    if (pred.rows != target.rows || pred.cols != target.cols)
        throw DataError("mse_loss: shape mismatch");
    const double scale = 1.0 / static_cast<double>(pred.size());
    if (grad) grad->resize(pred.rows, pred.cols);
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred.data[i] - target.data[i];
        sum += d * d;
        if (grad) grad->data[i] = 2.0 * d * scale;
    }
    return sum * scale;
}

double mass_loss(const Mat& pred_std, const NormStats& stats, const std::array<double, 4>& alpha,
                 Mat* grad) {
    if (pred_std.cols != kNumOutputs) throw DataError("mass_loss: column count mismatch");
    const std::size_t n = pred_std.rows;
    if (grad) {
        grad->resize(n, kNumOutputs);
        grad->fill(0.0);
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double* y = pred_std.row(i);
        double* g = grad ? grad->row(i) : nullptr;
        for (int s = 0; s < kNumSpecies; ++s) {
            const auto& group = species_output_indices(static_cast<Species>(s));
            double sum = 0.0;
            for (int k : group) sum += y[k] * stats.sigma_y[k] + stats.mu_y[k];
            total += alpha[s] * std::fabs(sum);
            if (g && sum != 0.0) { // subgradient 0 at the kink
                const double sign = sum > 0.0 ? 1.0 : -1.0;
                for (int k : group) g[k] += alpha[s] * sign * stats.sigma_y[k] * inv_n;
            }
        }
    }
    return total * inv_n;
}

double pos_loss(const Mat& pred_std, const Mat& x_std, const NormStats& stats,
                const std::array<double, 6>& beta, Mat* grad) {
    if (pred_std.cols != kNumOutputs || x_std.cols != kNumInputs)
        throw DataError("pos_loss: column count mismatch");
    if (pred_std.rows != x_std.rows) throw DataError("pos_loss: row counts disagree");
    const std::size_t n = pred_std.rows;
    if (grad) {
        grad->resize(n, kNumOutputs);
        grad->fill(0.0);
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double* y = pred_std.row(i);
        const double* x = x_std.row(i);
        double* g = grad ? grad->row(i) : nullptr;
        for (int k = 0; k < kNumOutputs; ++k) {
            double full = y[k] * stats.sigma_y[k] + stats.mu_y[k];
            if (k < kNumTendencies) full += x[k + 8] * stats.sigma_x[k + 8] + stats.mu_x[k + 8];
            if (full < 0.0) {
                const double b = beta[output_group(k)];
                total += b * full * full;
                if (g) g[k] += b * 2.0 * full * stats.sigma_y[k] * inv_n;
            }
        }
    }
    return total * inv_n;
}

double bce_loss(const Mat& logits, const std::vector<std::int8_t>& classes, Mat* grad) {
    if (logits.cols != static_cast<std::size_t>(kNumOutputs * kNumSignClasses))
        throw DataError("bce_loss: logits must have 28x3 columns");
    const std::size_t n = logits.rows;
    if (classes.size() != n * kNumOutputs) throw DataError("bce_loss: class count mismatch");
    if (grad) grad->resize(n, logits.cols);
    const double scale = 1.0 / static_cast<double>(n * kNumOutputs);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double* l = logits.row(i);
        double* g = grad ? grad->row(i) : nullptr;
        for (int k = 0; k < kNumOutputs; ++k) {
            const int cls = classes[i * kNumOutputs + k];
            if (cls < 0 || cls >= kNumSignClasses)
                throw DataError("bce_loss: class id out of range");
            const double* lk = l + k * kNumSignClasses;
            const double m = std::max(lk[0], std::max(lk[1], lk[2]));
            double z = 0.0;
            for (int c = 0; c < kNumSignClasses; ++c) z += std::exp(lk[c] - m);
            const double lse = m + std::log(z);
            total += lse - lk[cls];
            if (g) {
                double* gk = g + k * kNumSignClasses;
                for (int c = 0; c < kNumSignClasses; ++c) {
                    const double softmax = std::exp(lk[c] - m) / z;
                    gk[c] = (softmax - (c == cls ? 1.0 : 0.0)) * scale;
                }
            }
        }
    }
    return total * scale;
}

AdamState AdamState::zeros_like(const MlpParams& params) {
    AdamState s;
    for (std::size_t l = 0; l < params.num_layers(); ++l) {
        s.m_w.emplace_back(params.weights[l].rows, params.weights[l].cols, 0.0);
        s.v_w.emplace_back(params.weights[l].rows, params.weights[l].cols, 0.0);
        s.m_b.emplace_back(1, params.biases[l].cols, 0.0);
        s.v_b.emplace_back(1, params.biases[l].cols, 0.0);
    }
    s.t = 0;
    return s;
}

namespace {

void adam_update(std::vector<double>& theta, const std::vector<double>& grad,
                 std::vector<double>& m, std::vector<double>& v, double lr, double beta1,
                 double beta2, double eps, double wd, bool decoupled, double bc1, double bc2) {
    for (std::size_t i = 0; i < theta.size(); ++i) {
        double g = grad[i];
        if (!decoupled) g += wd * theta[i];
        m[i] = beta1 * m[i] + (1.0 - beta1) * g;
        v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
        const double m_hat = m[i] / bc1;
        const double v_hat = v[i] / bc2;
        theta[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
        if (decoupled) theta[i] -= lr * wd * theta[i];
    }
}

} // namespace

void adam_step(MlpParams& params, const Gradients& grads, AdamState& state, double lr,
               double beta1, double beta2, double eps, double weight_decay, bool decoupled) {
    if (grads.w.size() != params.num_layers()) throw DataError("adam_step: gradient mismatch");
    state.t += 1;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
    for (std::size_t l = 0; l < params.num_layers(); ++l) {
        adam_update(params.weights[l].data, grads.w[l].data, state.m_w[l].data, state.v_w[l].data,
                    lr, beta1, beta2, eps, weight_decay, decoupled, bc1, bc2);
        adam_update(params.biases[l].data, grads.b[l].data, state.m_b[l].data, state.v_b[l].data,
                    lr, beta1, beta2, eps, weight_decay, decoupled, bc1, bc2);
    }
}

namespace {

struct Split {
    Mat x_train, y_train; // original units
    Mat x_val, y_val;
};

Split split_dataset(const TrainConfig& cfg, const Dataset& train_set, const Dataset* val_set) {
    Split sp;
    const std::size_t n = train_set.rows();
    if (n == 0) throw DataError("train: empty dataset");
    std::size_t n_train = n, n_val = 0;
    if (val_set) {
        n_val = val_set->rows();
        if (n_val < 2) throw DataError("train: validation set needs at least 2 rows");
    } else {
        n_val = static_cast<std::size_t>(std::floor(static_cast<double>(n) * cfg.val_fraction));
        if (n_val < 2 || n - n_val < 2)
            throw DataError("train: dataset too small for the validation split");
        n_train = n - n_val;
    }

    auto copy_rows = [](const Mat& src, std::size_t begin, std::size_t rows, Mat& dst) {
        dst.resize(rows, src.cols);
        std::copy(src.row(begin), src.row(begin) + rows * src.cols, dst.data.begin());
    };
    copy_rows(train_set.inputs, 0, n_train, sp.x_train);
    copy_rows(train_set.targets, 0, n_train, sp.y_train);
    if (val_set) {
        sp.x_val = val_set->inputs;
        sp.y_val = val_set->targets;
    } else {
        copy_rows(train_set.inputs, n_train, n_val, sp.x_val);
        copy_rows(train_set.targets, n_train, n_val, sp.y_val);
    }
    return sp;
}

void gather_rows(const Mat& src, const std::vector<std::uint32_t>& order, std::size_t begin,
                 std::size_t end, Mat& dst) {
    dst.resize(end - begin, src.cols);
    for (std::size_t r = begin; r < end; ++r) {
        const double* s = src.row(order[r]);
        std::copy(s, s + src.cols, dst.row(r - begin));
    }
}

// Exact reverse-mode pass through the inference-time constraint layers, for
// the experimental constrain-during-training flag. Correction is a per-value
// ReLU mask on the reconstructed full value; completion redistributes the
// replaced tendency's gradient onto the rest of its species.
void constraint_backward(Mat& grad, const Mat& pred_pre, const Mat& x_std, const NormStats& stats,
                         const ConstraintConfig& cfg) {
    if (cfg.mode == ConstraintMode::None) return;
    const bool correct = cfg.mode == ConstraintMode::Correct ||
                         cfg.mode == ConstraintMode::CorrectThenComplete;
    const bool complete = cfg.mode == ConstraintMode::Complete ||
                          cfg.mode == ConstraintMode::CorrectThenComplete;
    for (std::size_t i = 0; i < grad.rows; ++i) {
        double* g = grad.row(i);
        const double* y = pred_pre.row(i);
        const double* x = x_std.row(i);
        if (complete) {
            for (int s = 0; s < kNumSpecies; ++s) {
                const int j = cfg.completion_index[s];
                const double gj = g[j];
                g[j] = 0.0;
                for (int k : species_output_indices(static_cast<Species>(s)))
                    if (k != j) g[k] -= gj * stats.sigma_y[k] / stats.sigma_y[j];
            }
        }
        if (correct) {
            for (int k = 0; k < kNumOutputs; ++k) {
                double full = y[k] * stats.sigma_y[k] + stats.mu_y[k];
                if (k < kNumTendencies)
                    full += x[k + 8] * stats.sigma_x[k + 8] + stats.mu_x[k + 8];
                if (!(full > 0.0)) g[k] = 0.0;
            }
        }
    }
}

} // namespace

TrainResult train(const TrainConfig& cfg, const Dataset& train_set, const Dataset* val_set) {
    validate(cfg);
    if (cfg.arch.back() != kNumOutputs)
        throw ConfigError("train: regression architecture must end at the 28 outputs");

    Split sp = split_dataset(cfg, train_set, val_set);
    const std::size_t n_train = sp.x_train.rows;

    // Targets on the training scale: standardized tendencies, or standardized
    // log magnitudes for the log pipeline.
    LogTransformConfig log_cfg;
    log_cfg.eps.assign(kNumOutputs, cfg.log_eps);
    Mat y_train_enc = sp.y_train, y_val_enc = sp.y_val;
    if (cfg.transform == Transform::Log) {
        std::vector<std::int8_t> cls;
        encode_log_targets(sp.y_train, log_cfg, y_train_enc, cls);
        encode_log_targets(sp.y_val, log_cfg, y_val_enc, cls);
    }

    const std::string provenance = "train:" + (train_set.meta.id.empty() ? std::string("anonymous")
                                                                         : train_set.meta.id) +
                                   ":rows=" + std::to_string(n_train);
    NormStats stats = fit_stats(sp.x_train, y_train_enc, provenance);

    Mat x_train_std, y_train_std, x_val_std, y_val_std;
    standardize_inputs(sp.x_train, stats, x_train_std);
    standardize_outputs(y_train_enc, stats, y_train_std);
    standardize_inputs(sp.x_val, stats, x_val_std);
    standardize_outputs(y_val_enc, stats, y_val_std);

    MlpParams params = init_mlp(cfg.arch, cfg.activation, cfg.seed);
    params.transform = cfg.transform;
    AdamState adam = AdamState::zeros_like(params);

    TrainResult result;
    result.log.reserve(cfg.epochs);

    std::vector<std::uint32_t> order(n_train);
    std::iota(order.begin(), order.end(), 0u);
    Mat xb, yb, pred, grad_total, grad_term;
    ForwardCache cache;
    Gradients grads;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        // seed-derived shuffle; row streams and epoch streams never overlap
        SplitMix64 shuffle_rng = SplitMix64::substream(cfg.seed, 0x10000000ull + epoch);
        for (std::size_t i = n_train - 1; i > 0; --i) {
            const std::size_t j = shuffle_rng.next_u64() % (i + 1);
            std::swap(order[i], order[j]);
        }

        const std::size_t batch = static_cast<std::size_t>(cfg.batch_size);
        const std::size_t batches = (n_train + batch - 1) / batch;
        const bool constrain = cfg.constrain_during_training &&
                               cfg.transform == Transform::Standard &&
                               cfg.constraint_mode != ConstraintMode::None;
        const ConstraintConfig train_cc{cfg.constraint_mode,
                                        ConstraintConfig::default_completion_indices()};
        Mat pred_pre;
        for (std::size_t b = 0; b < batches; ++b) {
            const std::size_t begin = b * batch;
            const std::size_t end = std::min(n_train, begin + batch);
            gather_rows(x_train_std, order, begin, end, xb);
            gather_rows(y_train_std, order, begin, end, yb);

            forward(params, xb, pred, &cache);
            if (constrain) {
                pred_pre = pred;
                apply_constraints(pred, xb, stats, train_cc);
            }

            double loss = mse_loss(pred, yb, &grad_total);
            if (cfg.lambda_mass != 0.0) {
                loss += cfg.lambda_mass * mass_loss(pred, stats, cfg.alpha, &grad_term);
                for (std::size_t i = 0; i < grad_total.size(); ++i)
                    grad_total.data[i] += cfg.lambda_mass * grad_term.data[i];
            }
            if (cfg.mu_pos != 0.0) {
                loss += cfg.mu_pos * pos_loss(pred, xb, stats, cfg.beta, &grad_term);
                for (std::size_t i = 0; i < grad_total.size(); ++i)
                    grad_total.data[i] += cfg.mu_pos * grad_term.data[i];
            }
            if (!std::isfinite(loss))
                throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) +
                                   ", batch " + std::to_string(b));

            if (constrain) constraint_backward(grad_total, pred_pre, xb, stats, train_cc);
            backward(params, cache, grad_total, grads);
            adam_step(params, grads, adam, cfg.learning_rate, kAdamBeta1, kAdamBeta2, kAdamEps,
                      cfg.weight_decay, cfg.decoupled_weight_decay);
        }

        // validation metrics on base (unconstrained) predictions
        Mat val_pred;
        forward_inference(params, x_val_std, val_pred, cfg.threads);
        EpochRecord rec;
        rec.epoch = epoch;
        rec.mse = mse_loss(val_pred, y_val_std, nullptr);
        const auto r2v = r2_per_column(val_pred, y_val_std);
        rec.r2 = std::accumulate(r2v.begin(), r2v.end(), 0.0) / static_cast<double>(r2v.size());
        if (cfg.transform == Transform::Standard) {
            Mat val_pred_orig;
            back_transform_outputs(val_pred, stats, val_pred_orig);
            rec.mass_violation = mass_metrics(val_pred_orig, sp.x_val).violation;
            rec.neg_fraction =
                positivity_metrics(val_pred_orig, sp.x_val, sp.y_val).fraction;
        } else {
            rec.mass_violation = std::nan("");
            rec.neg_fraction = std::nan("");
        }
        result.log.push_back(rec);

        if (epoch == cfg.epochs)
            for (int k = 0; k < kNumOutputs; ++k) result.val_r2_per_variable[k] = r2v[k];
    }

    // completion index per species: the worst-performing validation variable
    ConstraintConfig constraint;
    constraint.mode = cfg.constraint_mode;
    for (int s = 0; s < kNumSpecies; ++s) {
        const auto& group = species_output_indices(static_cast<Species>(s));
        int worst = group.front();
        for (int k : group)
            if (result.val_r2_per_variable[k] < result.val_r2_per_variable[worst]) worst = k;
        constraint.completion_index[s] = worst;
    }

    result.checkpoint.params = std::move(params);
    result.checkpoint.stats = std::move(stats);
    result.checkpoint.constraint = constraint;
    result.checkpoint.log_cfg = log_cfg;
    return result;
}

std::string epoch_log_csv(const std::vector<EpochRecord>& log) {
    std::string out = "epoch,mse,r2,mass_violation,neg_fraction\n";
    char buf[160];
    for (const EpochRecord& r : log) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g\n", r.epoch, r.mse, r.r2,
                      r.mass_violation, r.neg_fraction);
        out += buf;
    }
    return out;
}

Checkpoint fit_linear_baseline(const Dataset& train_set, const NormStats& stats) {
    const std::size_t n = train_set.rows();
    if (n < 2) throw DataError("linear baseline: need at least 2 rows");
    constexpr double kRidge = 1e-10;
    constexpr int d = kNumInputs + 1; // standardized inputs plus intercept

    Mat x_std, y_std;
    standardize_inputs(train_set.inputs, stats, x_std);
    standardize_outputs(train_set.targets, stats, y_std);

    // Normal equations G c = X~^T Y with the shared design X~ = [x_std | 1].
    // The ridge skips the intercept so constant target combinations are
    // reproduced exactly.
    Mat G(d, d, 0.0), rhs(d, kNumOutputs, 0.0);
    std::vector<double> xrow(d);
    for (std::size_t i = 0; i < n; ++i) {
        const double* x = x_std.row(i);
        std::copy(x, x + kNumInputs, xrow.begin());
        xrow[kNumInputs] = 1.0;
        const double* y = y_std.row(i);
        for (int a = 0; a < d; ++a) {
            for (int b = a; b < d; ++b) G(a, b) += xrow[a] * xrow[b];
            for (int k = 0; k < kNumOutputs; ++k) rhs(a, k) += xrow[a] * y[k];
        }
    }
    for (int a = 0; a < d; ++a)
        for (int b = 0; b < a; ++b) G(a, b) = G(b, a);
    for (int a = 0; a < kNumInputs; ++a) G(a, a) += kRidge;

    // Cholesky; failure means the design is singular beyond the ridge.
    Mat L(d, d, 0.0);
    for (int a = 0; a < d; ++a) {
        for (int b = 0; b <= a; ++b) {
            double sum = G(a, b);
            for (int p = 0; p < b; ++p) sum -= L(a, p) * L(b, p);
            if (a == b) {
                if (sum <= 0.0)
                    throw NumericError("linear baseline: normal matrix is not positive definite");
                L(a, a) = std::sqrt(sum);
            } else {
                L(a, b) = sum / L(b, b);
            }
        }
    }
    // forward/back substitution per output column
    Mat coef(d, kNumOutputs, 0.0);
    std::vector<double> z(d);
    for (int k = 0; k < kNumOutputs; ++k) {
        for (int a = 0; a < d; ++a) {
            double sum = rhs(a, k);
            for (int p = 0; p < a; ++p) sum -= L(a, p) * z[p];
            z[a] = sum / L(a, a);
        }
        for (int a = d - 1; a >= 0; --a) {
            double sum = z[a];
            for (int p = a + 1; p < d; ++p) sum -= L(p, a) * coef(p, k);
            coef(a, k) = sum / L(a, a);
        }
    }

    Checkpoint ckpt;
    ckpt.params.arch = {kNumInputs, kNumOutputs};
    ckpt.params.activation = Activation::Relu; // unused: single linear layer
    ckpt.params.transform = Transform::Standard;
    Mat w(kNumInputs, kNumOutputs);
    for (int a = 0; a < kNumInputs; ++a)
        for (int k = 0; k < kNumOutputs; ++k) w(a, k) = coef(a, k);
    Mat bias(1, kNumOutputs);
    for (int k = 0; k < kNumOutputs; ++k) bias(0, k) = coef(kNumInputs, k);
    ckpt.params.weights.push_back(std::move(w));
    ckpt.params.biases.push_back(std::move(bias));
    ckpt.stats = stats;
    return ckpt;
}

} // namespace aemu
