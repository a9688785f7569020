#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "aemu/dataset.hpp"
#include "aemu/model.hpp"

namespace aemu {

// Paper-default hyperparameters; alpha/beta are the regularizer weights per
// species (SO4, BC, OC, DU) and per output group (SO4, BC, OC, DU, NUM, WAT).
struct TrainConfig {
    std::uint64_t seed = 0;
    int epochs = 100;
    double learning_rate = 1e-3;
    double weight_decay = 1e-9;
    bool decoupled_weight_decay = false; // default coupled (L2 added to gradients)
    int batch_size = 256;
    double lambda_mass = 0.0; // mass regularizer on/off
    double mu_pos = 0.0;      // positivity regularizer on/off
    std::array<double, 4> alpha = {1e-7, 2e4, 2e3, 1e-1};
    std::array<double, 6> beta = {1e-11, 1e7, 1e7, 1e3, 1e-8, 1e1};
    Transform transform = Transform::Standard;
    Activation activation = Activation::Relu;
    std::vector<int> arch = {kNumInputs, 128, 128, 128, kNumOutputs};
    ConstraintMode constraint_mode = ConstraintMode::None;
    bool constrain_during_training = false; // experimentation flag, default off
    double val_fraction = 0.1;              // used when no explicit validation set is given
    double log_eps = 1e-20;
    int threads = 1;
};

void validate(const TrainConfig& cfg);

struct EpochRecord {
    int epoch = 0;
    double mse = 0.0;
    double r2 = 0.0;
    double mass_violation = 0.0; // NaN for the log pipeline
    double neg_fraction = 0.0;   // NaN for the log pipeline
};

// CSV with header "epoch,mse,r2,mass_violation,neg_fraction".
std::string epoch_log_csv(const std::vector<EpochRecord>& log);

// MSE over all n*cols elements; gradient 2*(pred-target)/(n*cols).
double mse_loss(const Mat& pred, const Mat& target, Mat* grad);

// Mean over rows of sum_s alpha_s * |sum_{i in I_s} g(pred)_i|, computed in
// original units via the back transform. Subgradient 0 at the kink.
double mass_loss(const Mat& pred_std, const NormStats& stats, const std::array<double, 4>& alpha,
                 Mat* grad);

// Mean over rows of sum_k beta_group(k) * relu(-(g(pred)_k + h(x)_paired))^2;
// water outputs use the full value g(pred)_k itself.
double pos_loss(const Mat& pred_std, const Mat& x_std, const NormStats& stats,
                const std::array<double, 6>& beta, Mat* grad);

// Softmax cross-entropy over the three sign classes, mean over n*28
// elements. logits is n x 84 with the per-variable class triple contiguous;
// classes holds ids in {0, 1, 2}.
double bce_loss(const Mat& logits, const std::vector<std::int8_t>& classes, Mat* grad);

struct AdamState {
    std::vector<Mat> m_w, v_w, m_b, v_b;
    long t = 0;

    static AdamState zeros_like(const MlpParams& params);
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

// One Adam update with bias correction. Weight decay is coupled by default
// (added to the gradient before the moment updates) and applies to weights
// and biases alike.
void adam_step(MlpParams& params, const Gradients& grads, AdamState& state, double lr,
               double beta1, double beta2, double eps, double weight_decay,
               bool decoupled = false);

struct TrainResult {
    Checkpoint checkpoint;
    std::vector<EpochRecord> log;
    std::array<double, kNumOutputs> val_r2_per_variable{}; // final epoch, validation
};

// Trains the regression MLP. Stats are fitted on the gradient-update rows
// only; when no explicit validation set is given the last val_fraction of
// the training rows is held out. A non-finite loss aborts with a
// NumericError naming the epoch and batch.
TrainResult train(const TrainConfig& cfg, const Dataset& train_set, const Dataset* val_set);

// Least-squares baseline via normal equations (shared design matrix, ridge
// 1e-10 on the weights, free intercept), packaged as a no-hidden-layer
// checkpoint. When the training targets conserve, the fitted predictions
// conserve on any input.
Checkpoint fit_linear_baseline(const Dataset& train_set, const NormStats& stats);

} // namespace aemu
