#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "aemu/dataset.hpp"
#include "aemu/model.hpp"

namespace aemu {

// Coefficient of determination 1 - SS_res/SS_tot. Constant truth has no
// defined R2 and raises a DataError.
double r2_score(const std::vector<double>& pred, const std::vector<double>& truth);
double r2_score(const double* pred, const double* truth, std::size_t n, std::size_t stride);

// Per-column R2 of two n x c matrices on whatever scale they share.
std::vector<double> r2_per_column(const Mat& pred, const Mat& truth);

struct MassMetrics {
    std::array<double, kNumSpecies> bias{};
    double violation = 0.0;
};

// Species mass bias and overall violation in original units, both normalized
// by M_s, the dataset mean of the species' paired full input values.
MassMetrics mass_metrics(const Mat& pred_orig, const Mat& x_orig);

struct PositivityMetrics {
    double fraction = 0.0; // share of reconstructed full values below zero
    double mean = 0.0;     // average clamped negativity, per-variable normalized
};

// Full values are tendency + paired input (water: the value itself). The
// negative-mean denominator m_k is the dataset mean of the variable's true
// full value, so the metric is a property of the predictions alone.
PositivityMetrics positivity_metrics(const Mat& pred_orig, const Mat& x_orig,
                                     const Mat& truth_orig);

struct ClassScores {
    std::array<double, kNumOutputs> accuracy{};
    std::array<double, kNumOutputs> precision{}; // positive class, one-vs-rest
    std::array<double, kNumOutputs> recall{};
};

// Exact-match accuracy over the three sign classes; precision/recall for the
// positive class, matching the binary framing. Empty denominators score 1.
ClassScores class_metrics(const std::vector<std::int8_t>& pred,
                          const std::vector<std::int8_t>& truth, std::size_t rows);

struct MetricsReport {
    double r2_overall = 0.0;
    double mse = 0.0;  // evaluation scale (standardized / standardized log)
    double rmse = 0.0; // sqrt(mse); the tables report both labels
    std::array<double, kNumSpecies> mass_bias{};
    double mass_violation = 0.0;
    double neg_fraction = 0.0;
    double neg_mean = 0.0;
    std::array<double, kNumOutputs> r2_per_variable{};
    std::optional<ClassScores> classifier;
    std::string checkpoint_id;
    std::string dataset_id;
    std::string constraint_mode;
    std::string transform;

    std::string to_json() const;
    std::string to_csv_row() const;       // header + one flat row
    std::string per_variable_csv() const; // variable, r2 [, class scores]
};

// Runs forward + the configured constraint layers + back transform, then all
// metric ops. The constraint mode can be overridden without retraining. The
// log pipeline scores R2/MSE on the standardized log-magnitude scale and
// leaves mass/positivity metrics undefined (NaN) until a sign classifier is
// attached (see classifier_pipeline).
MetricsReport evaluate(const Checkpoint& ckpt, const Dataset& data,
                       std::optional<ConstraintMode> override_mode = std::nullopt,
                       int threads = 1);

} // namespace aemu
