#pragma once

#include <filesystem>
#include <vector>

#include "aemu/evaluation.hpp"
#include "aemu/training.hpp"

namespace aemu {

// Log-scaled pipeline: a magnitude regressor (28 standardized log
// magnitudes) fused with a sign classifier (28 x 3 class logits). Both share
// the input normalization and schema.
struct LogPipelineBundle {
    Checkpoint magnitude;
    Checkpoint classifier;
};

void validate(const LogPipelineBundle& bundle);

struct ClassifierEpochRecord {
    int epoch = 0;
    double ce = 0.0;       // validation cross-entropy
    double accuracy = 0.0; // validation exact-match accuracy over all variables
};

// CSV with header "epoch,ce,accuracy".
std::string classifier_epoch_log_csv(const std::vector<ClassifierEpochRecord>& log);

struct ClassifierTrainResult {
    Checkpoint checkpoint;
    std::vector<ClassifierEpochRecord> log;
};

// Trains the sign classifier: same architecture family and optimizer as the
// regressor, output layer widened to 28 x 3 logits, cross-entropy loss on
// the sign classes of the log transform.
ClassifierTrainResult train_classifier(const TrainConfig& cfg, const Dataset& train_set,
                                       const Dataset* val_set);

// Argmax class ids per variable (ties break to the lowest class id).
void classify(const Checkpoint& classifier, const Mat& x_orig, std::vector<std::int8_t>& classes,
              int threads = 1);

// Fused prediction in original units: sign from the classifier argmax,
// magnitude from the regressor through the log back transform. Water outputs
// bypass the classifier (their full values are non-negative).
Mat predict_tendencies(const LogPipelineBundle& bundle, const Mat& x_orig, int threads = 1);

// Full log-pipeline evaluation: R2/MSE on the standardized log-magnitude
// scale, mass/positivity metrics on the decoded original-unit tendencies
// (constraints applied after decoding), classifier scores attached.
MetricsReport evaluate_bundle(const LogPipelineBundle& bundle, const Dataset& data,
                              std::optional<ConstraintMode> override_mode = std::nullopt,
                              int threads = 1);

// Bundle directory: magnitude.json + classifier.json + manifest.json.
void save_bundle(const LogPipelineBundle& bundle, const std::filesystem::path& dir);
LogPipelineBundle load_bundle(const std::filesystem::path& dir);
bool is_bundle_dir(const std::filesystem::path& path);

} // namespace aemu
