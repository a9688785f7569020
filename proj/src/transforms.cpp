#include "aemu/transforms.hpp"

#include <cmath>

#include "aemu/errors.hpp"

namespace aemu {

namespace {

void fit_columns(const Mat& m, std::vector<double>& mu, std::vector<double>& sigma,
                 const std::string_view* names) {
    const std::size_t n = m.rows, c = m.cols;
    mu.assign(c, 0.0);
    sigma.assign(c, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = m.row(i);
        for (std::size_t j = 0; j < c; ++j) mu[j] += row[j];
    }
    for (std::size_t j = 0; j < c; ++j) mu[j] /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = m.row(i);
        for (std::size_t j = 0; j < c; ++j) {
            const double d = row[j] - mu[j];
            sigma[j] += d * d;
        }
    }
    for (std::size_t j = 0; j < c; ++j) {
        sigma[j] = std::sqrt(sigma[j] / static_cast<double>(n)); // population std
        if (!(sigma[j] > 0.0))
            throw DataError("fit_stats: column '" + std::string(names[j]) +
                            "' has zero variance");
    }
}

void affine(const Mat& src, const std::vector<double>& mu, const std::vector<double>& sigma,
            bool forward, Mat& dst) {
    if (src.cols != mu.size()) throw DataError("standardize: column count mismatch");
    dst.resize(src.rows, src.cols);
    const std::size_t c = src.cols;
    for (std::size_t i = 0; i < src.rows; ++i) {
        const double* s = src.row(i);
        double* d = dst.row(i);
        if (forward)
            for (std::size_t j = 0; j < c; ++j) d[j] = (s[j] - mu[j]) / sigma[j];
        else
            for (std::size_t j = 0; j < c; ++j) d[j] = s[j] * sigma[j] + mu[j];
    }
}

} // namespace

NormStats fit_stats(const Mat& x, const Mat& y, std::string provenance) {
    if (x.rows < 2) throw DataError("fit_stats: need at least 2 rows");
    if (x.rows != y.rows) throw DataError("fit_stats: input/target row counts disagree");
    if (x.cols != kNumInputs || y.cols != kNumOutputs)
        throw DataError("fit_stats: column counts do not match the schema");
    NormStats s;
    const VariableSchema& schema = variable_schema();
    fit_columns(x, s.mu_x, s.sigma_x, schema.input_names.data());
    fit_columns(y, s.mu_y, s.sigma_y, schema.output_names.data());
    s.fitted_rows = x.rows;
    s.provenance = std::move(provenance);
    return s;
}

NormStats fit_stats(const Dataset& train) {
    return fit_stats(train.inputs, train.targets, train.meta.id);
}

NormStats fit_input_stats(const Mat& x, std::string provenance) {
    if (x.rows < 2) throw DataError("fit_stats: need at least 2 rows");
    if (x.cols != kNumInputs) throw DataError("fit_stats: column counts do not match the schema");
    NormStats s;
    fit_columns(x, s.mu_x, s.sigma_x, variable_schema().input_names.data());
    s.mu_y.assign(kNumOutputs, 0.0);
    s.sigma_y.assign(kNumOutputs, 1.0);
    s.fitted_rows = x.rows;
    s.provenance = std::move(provenance);
    return s;
}

void standardize_inputs(const Mat& x_orig, const NormStats& s, Mat& x_std) {
    affine(x_orig, s.mu_x, s.sigma_x, true, x_std);
}

void standardize_outputs(const Mat& y_orig, const NormStats& s, Mat& y_std) {
    affine(y_orig, s.mu_y, s.sigma_y, true, y_std);
}

void back_transform_outputs(const Mat& y_std, const NormStats& s, Mat& y_orig) {
    affine(y_std, s.mu_y, s.sigma_y, false, y_orig);
}

void back_transform_inputs(const Mat& x_std, const NormStats& s, Mat& x_orig) {
    affine(x_std, s.mu_x, s.sigma_x, false, x_orig);
}

SignMagnitude log_transform(double y, double eps) {
    if (!(eps > 0.0)) throw ConfigError("log_transform: eps must be positive");
    const double a = std::fabs(y);
    if (a < eps) return {0, std::log(eps)};
    return {y > 0.0 ? 1 : -1, std::log(a)};
}

double inverse_log(int sign, double magnitude) {
    if (sign == 0) return 0.0;
    if (sign != 1 && sign != -1) throw ConfigError("inverse_log: sign must be -1, 0 or +1");
    return static_cast<double>(sign) * std::exp(magnitude);
}

void encode_log_targets(const Mat& y_orig, const LogTransformConfig& cfg, Mat& magnitudes,
                        std::vector<std::int8_t>& classes) {
    if (y_orig.cols != kNumOutputs) throw DataError("encode_log_targets: bad column count");
    magnitudes.resize(y_orig.rows, y_orig.cols);
    classes.assign(y_orig.rows * y_orig.cols, 0);
    for (std::size_t i = 0; i < y_orig.rows; ++i) {
        const double* y = y_orig.row(i);
        double* m = magnitudes.row(i);
        std::int8_t* c = classes.data() + i * y_orig.cols;
        for (int k = 0; k < kNumOutputs; ++k) {
            const SignMagnitude sm = log_transform(y[k], cfg.eps[k]);
            m[k] = sm.magnitude;
            c[k] = static_cast<std::int8_t>(sign_to_class(sm.sign));
        }
    }
}

} // namespace aemu
