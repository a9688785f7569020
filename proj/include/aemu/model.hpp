#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "aemu/mat.hpp"
#include "aemu/schema.hpp"
#include "aemu/transforms.hpp"

namespace aemu {

enum class Activation { Relu, LeakyRelu, Tanh, Sigmoid };
enum class Transform { Standard, Log };
enum class ConstraintMode { None, Correct, Complete, CorrectThenComplete };

std::string_view activation_name(Activation a);
Activation activation_from_name(std::string_view name);
std::string_view transform_name(Transform t);
Transform transform_from_name(std::string_view name);
std::string_view constraint_mode_name(ConstraintMode m);
ConstraintMode constraint_mode_from_name(std::string_view name);

// Inference-time hard-constraint configuration. completion_index[s] is the
// output index (within I_s) whose tendency the completion layer replaces;
// training records the worst-validation-R2 variable per species here.
struct ConstraintConfig {
    ConstraintMode mode = ConstraintMode::None;
    std::array<int, kNumSpecies> completion_index = default_completion_indices();

    static std::array<int, kNumSpecies> default_completion_indices();
};

void validate(const ConstraintConfig& cfg);

// Fully connected network parameters. weights[l] maps arch[l] -> arch[l+1]
// and is stored row-major [in x out]; hidden layers apply the activation,
// the output layer is linear.
struct MlpParams {
    std::vector<int> arch;
    Activation activation = Activation::Relu;
    Transform transform = Transform::Standard;
    std::vector<Mat> weights; // [in x out] per layer
    std::vector<Mat> biases;  // [1 x out] per layer

    std::size_t num_layers() const { return weights.size(); }
    std::size_t parameter_count() const;
};

// He-style init: uniform on +-sqrt(6/fan_in) (variance 2/fan_in), zero
// biases, deterministic in the seed.
MlpParams init_mlp(const std::vector<int>& arch, Activation activation, std::uint64_t seed);

// Post-activation values entering each layer; acts[0] is the input batch.
struct ForwardCache {
    std::vector<Mat> acts;
};

// y = f(params, x); pure, batch-order equivariant. Pass a cache to keep the
// intermediate activations for backward.
void forward(const MlpParams& params, const Mat& x, Mat& y, ForwardCache* cache = nullptr);

// Row-sharded forward for large batches. Rows are independent, so the result
// is bit-identical to the serial path for any thread count.
void forward_inference(const MlpParams& params, const Mat& x, Mat& y, int threads,
                       std::size_t tile_rows = 256);

struct Gradients {
    std::vector<Mat> w;
    std::vector<Mat> b;

    static Gradients zeros_like(const MlpParams& params);
};

// Reverse-mode gradients of forward under output gradient dy. Optionally
// also returns the gradient with respect to the input batch.
void backward(const MlpParams& params, const ForwardCache& cache, const Mat& dy,
              Gradients& grads, Mat* dx = nullptr);

// Inequality correction layer (standardized in/out): clamps every
// reconstructed full value at zero by adjusting its tendency; water outputs
// clamp the full value itself.
void apply_correction(Mat& y_std, const Mat& x_std, const NormStats& stats);

// Equality completion layer (standardized in/out): one tendency per species
// becomes the negative sum of the others, giving exact conservation.
void apply_completion(Mat& y_std, const NormStats& stats, const ConstraintConfig& cfg);

void apply_constraints(Mat& y_std, const Mat& x_std, const NormStats& stats,
                       const ConstraintConfig& cfg);

// Original-unit variants used after decoding log-pipeline predictions.
void apply_correction_original(Mat& y_orig, const Mat& x_orig);
void apply_completion_original(Mat& y_orig, const ConstraintConfig& cfg);
void apply_constraints_original(Mat& y_orig, const Mat& x_orig, const ConstraintConfig& cfg);

// A trained model with everything needed to run it: parameters, the training
// normalization stats, the constraint setup and (for the log pipeline) the
// magnitude floor.
struct Checkpoint {
    MlpParams params;
    NormStats stats;
    ConstraintConfig constraint;
    LogTransformConfig log_cfg;
};

inline constexpr int kCheckpointVersion = 1;

// JSON checkpoint with round-trip-exact number formatting; save/load/save is
// byte-identical. Version and schema hash are verified on load.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);
std::string checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const std::string& text, const std::string& context);

// FNV-1a content id of the serialized checkpoint, for report metadata.
std::string checkpoint_id(const Checkpoint& ckpt);

} // namespace aemu
