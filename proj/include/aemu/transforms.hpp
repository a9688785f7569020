#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "aemu/dataset.hpp"
#include "aemu/mat.hpp"
#include "aemu/schema.hpp"

namespace aemu {

// Per-variable means and population standard deviations fitted on training
// rows only. The provenance tag travels with the stats so evaluation paths
// can verify they were never refitted on evaluation data.
struct NormStats {
    std::vector<double> mu_x, sigma_x; // 32
    std::vector<double> mu_y, sigma_y; // 28
    std::size_t fitted_rows = 0;
    std::string provenance;
};

// Population mean/std per column over the training rows. A zero-variance
// column is a DataError naming the column. Needs >= 2 rows.
NormStats fit_stats(const Mat& x, const Mat& y, std::string provenance);
NormStats fit_stats(const Dataset& train);

// Inputs-only fit; the output slots get the identity transform. Used by the
// sign classifier, whose logits are not standardized.
NormStats fit_input_stats(const Mat& x, std::string provenance);

// z = (v - mu) / sigma, elementwise per column.
void standardize_inputs(const Mat& x_orig, const NormStats& s, Mat& x_std);
void standardize_outputs(const Mat& y_orig, const NormStats& s, Mat& y_std);

// Back transforms g(y) = y * sigma_y + mu_y and h(x) = x * sigma_x + mu_x.
void back_transform_outputs(const Mat& y_std, const NormStats& s, Mat& y_orig); // g
void back_transform_inputs(const Mat& x_std, const NormStats& s, Mat& x_orig);  // h

// Logarithmic magnitude/sign split for the log-scaled pipeline. Natural log;
// magnitudes below the floor collapse to the zero class.
struct LogTransformConfig {
    std::vector<double> eps = std::vector<double>(kNumOutputs, 1e-20); // original units
};

struct SignMagnitude {
    int sign;         // -1, 0, +1
    double magnitude; // ln max(|y|, eps)
};

SignMagnitude log_transform(double y, double eps);
double inverse_log(int sign, double magnitude);

// Class id used by the sign classifier: 0 = negative, 1 = zero, 2 = positive.
inline int sign_to_class(int sign) { return sign + 1; }
inline int class_to_sign(int cls) { return cls - 1; }
inline constexpr int kNumSignClasses = 3;

// Dataset-level encoding: target magnitudes (n x 28, ln scale) and class ids
// (n x 28, row-major bytes).
void encode_log_targets(const Mat& y_orig, const LogTransformConfig& cfg, Mat& magnitudes,
                        std::vector<std::int8_t>& classes);

} // namespace aemu
