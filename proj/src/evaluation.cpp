#include "aemu/evaluation.hpp"

#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <sstream>

#include "aemu/errors.hpp"
#include "aemu/transforms.hpp"

namespace aemu {

double r2_score(const double* pred, const double* truth, std::size_t n, std::size_t stride) {
    if (n < 2) throw DataError("r2: need at least 2 points");
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += truth[i * stride];
    mean /= static_cast<double>(n);
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = truth[i * stride];
        const double d = pred[i * stride] - t;
        ss_res += d * d;
        ss_tot += (t - mean) * (t - mean);
    }
    if (ss_tot == 0.0) throw DataError("r2: truth is constant, score undefined");
    return 1.0 - ss_res / ss_tot;
}

double r2_score(const std::vector<double>& pred, const std::vector<double>& truth) {
    if (pred.size() != truth.size()) throw DataError("r2: length mismatch");
    return r2_score(pred.data(), truth.data(), pred.size(), 1);
}

std::vector<double> r2_per_column(const Mat& pred, const Mat& truth) {
    if (pred.rows != truth.rows || pred.cols != truth.cols)
        throw DataError("r2_per_column: shape mismatch");
    std::vector<double> out(pred.cols);
    for (std::size_t c = 0; c < pred.cols; ++c)
        out[c] = r2_score(pred.data.data() + c, truth.data.data() + c, pred.rows, pred.cols);
    return out;
}

MassMetrics mass_metrics(const Mat& pred_orig, const Mat& x_orig) {
    if (pred_orig.rows != x_orig.rows) throw DataError("mass_metrics: row counts disagree");
    if (pred_orig.cols != kNumOutputs || x_orig.cols != kNumInputs)
        throw DataError("mass_metrics: column counts do not match the schema");
    const std::size_t n = pred_orig.rows;
    if (n == 0) throw DataError("mass_metrics: empty input");

    MassMetrics m;
    m.violation = 0.0;
    for (int s = 0; s < kNumSpecies; ++s) {
        const auto& group = species_output_indices(static_cast<Species>(s));
        double sum_signed = 0.0, sum_abs = 0.0, mass_sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double* y = pred_orig.row(i);
            const double* x = x_orig.row(i);
            double row_sum = 0.0;
            for (int k : group) {
                row_sum += y[k];
                mass_sum += x[k + 8]; // paired full input value
            }
            sum_signed += row_sum;
            sum_abs += std::fabs(row_sum);
        }
        const double mean_mass = mass_sum / static_cast<double>(n * group.size());
        if (mean_mass == 0.0)
            throw DataError("mass_metrics: mean mass of species " +
                            std::string(species_name(static_cast<Species>(s))) + " is zero");
        m.bias[s] = (sum_signed / static_cast<double>(n)) / mean_mass;
        m.violation += (sum_abs / static_cast<double>(n)) / mean_mass;
    }
    m.violation /= static_cast<double>(kNumSpecies);
    return m;
}

PositivityMetrics positivity_metrics(const Mat& pred_orig, const Mat& x_orig,
                                     const Mat& truth_orig) {
    const std::size_t n = pred_orig.rows;
    if (n == 0) throw DataError("positivity_metrics: empty input");
    if (x_orig.rows != n || truth_orig.rows != n)
        throw DataError("positivity_metrics: row counts disagree");
    if (pred_orig.cols != kNumOutputs || truth_orig.cols != kNumOutputs ||
        x_orig.cols != kNumInputs)
        throw DataError("positivity_metrics: column counts do not match the schema");

    // m_k: dataset mean of the variable's true full value.
    std::array<double, kNumOutputs> m_k{};
    for (std::size_t i = 0; i < n; ++i) {
        const double* t = truth_orig.row(i);
        const double* x = x_orig.row(i);
        for (int k = 0; k < kNumOutputs; ++k)
            m_k[k] += (k < kNumTendencies) ? t[k] + x[k + 8] : t[k];
    }
    for (int k = 0; k < kNumOutputs; ++k) {
        m_k[k] /= static_cast<double>(n);
        if (m_k[k] == 0.0)
            throw DataError("positivity_metrics: mean full value of '" +
                            std::string(variable_schema().output_names[k]) + "' is zero");
    }

    std::size_t negatives = 0;
    double neg_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double* y = pred_orig.row(i);
        const double* x = x_orig.row(i);
        for (int k = 0; k < kNumOutputs; ++k) {
            const double full = (k < kNumTendencies) ? y[k] + x[k + 8] : y[k];
            if (full < 0.0) {
                ++negatives;
                neg_sum += -full / m_k[k];
            }
        }
    }
    const double count = static_cast<double>(n) * kNumOutputs;
    return {static_cast<double>(negatives) / count, neg_sum / count};
}

ClassScores class_metrics(const std::vector<std::int8_t>& pred,
                          const std::vector<std::int8_t>& truth, std::size_t rows) {
    if (pred.size() != truth.size() || pred.size() != rows * kNumOutputs)
        throw DataError("class_metrics: size mismatch");
    constexpr std::int8_t kPos = 2; // class id of sign +1
    ClassScores s;
    for (int k = 0; k < kNumOutputs; ++k) {
        std::size_t correct = 0, tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < rows; ++i) {
            const std::int8_t p = pred[i * kNumOutputs + k];
            const std::int8_t t = truth[i * kNumOutputs + k];
            if (p == t) ++correct;
            if (p == kPos && t == kPos) ++tp;
            if (p == kPos && t != kPos) ++fp;
            if (p != kPos && t == kPos) ++fn;
        }
        s.accuracy[k] = static_cast<double>(correct) / static_cast<double>(rows);
        s.precision[k] = (tp + fp) ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 1.0;
        s.recall[k] = (tp + fn) ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 1.0;
    }
    return s;
}

namespace {

double mean28(const std::array<double, kNumOutputs>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / kNumOutputs;
}

} // namespace

MetricsReport evaluate(const Checkpoint& ckpt, const Dataset& data,
                       std::optional<ConstraintMode> override_mode, int threads) {
    if (data.rows() == 0) throw DataError("evaluate: empty dataset");
    if (ckpt.stats.provenance.empty())
        throw DataError("evaluate: checkpoint stats carry no fit provenance");

    ConstraintConfig cfg = ckpt.constraint;
    if (override_mode) cfg.mode = *override_mode;

    MetricsReport rep;
    rep.checkpoint_id = checkpoint_id(ckpt);
    rep.dataset_id = data.meta.id;
    rep.constraint_mode = std::string(constraint_mode_name(cfg.mode));
    rep.transform = std::string(transform_name(ckpt.params.transform));

    Mat x_std;
    standardize_inputs(data.inputs, ckpt.stats, x_std);
    Mat pred_std;
    forward_inference(ckpt.params, x_std, pred_std, threads);

    if (ckpt.params.transform == Transform::Standard) {
        // Constraints run in original units after the back transform: the
        // layers are algebraically the same there, and clamping against the
        // very x the metrics add back makes the reconstructed full values
        // non-negative exactly, not just to round-off.
        Mat pred_orig;
        back_transform_outputs(pred_std, ckpt.stats, pred_orig);
        apply_constraints_original(pred_orig, data.inputs, cfg);
        if (cfg.mode != ConstraintMode::None)
            standardize_outputs(pred_orig, ckpt.stats, pred_std);

        Mat truth_std;
        standardize_outputs(data.targets, ckpt.stats, truth_std);
        const auto r2v = r2_per_column(pred_std, truth_std);
        std::copy(r2v.begin(), r2v.end(), rep.r2_per_variable.begin());
        rep.r2_overall = mean28(rep.r2_per_variable);

        double se = 0.0;
        for (std::size_t i = 0; i < pred_std.size(); ++i) {
            const double d = pred_std.data[i] - truth_std.data[i];
            se += d * d;
        }
        rep.mse = se / static_cast<double>(pred_std.size());
        rep.rmse = std::sqrt(rep.mse);

        const MassMetrics mm = mass_metrics(pred_orig, data.inputs);
        rep.mass_bias = mm.bias;
        rep.mass_violation = mm.violation;
        const PositivityMetrics pm = positivity_metrics(pred_orig, data.inputs, data.targets);
        rep.neg_fraction = pm.fraction;
        rep.neg_mean = pm.mean;
    } else {
        // Magnitude regressor alone: score on the standardized log scale.
        Mat mag_truth;
        std::vector<std::int8_t> cls_truth;
        encode_log_targets(data.targets, ckpt.log_cfg, mag_truth, cls_truth);
        Mat truth_std;
        standardize_outputs(mag_truth, ckpt.stats, truth_std);
        const auto r2v = r2_per_column(pred_std, truth_std);
        std::copy(r2v.begin(), r2v.end(), rep.r2_per_variable.begin());
        rep.r2_overall = mean28(rep.r2_per_variable);
        double se = 0.0;
        for (std::size_t i = 0; i < pred_std.size(); ++i) {
            const double d = pred_std.data[i] - truth_std.data[i];
            se += d * d;
        }
        rep.mse = se / static_cast<double>(pred_std.size());
        rep.rmse = std::sqrt(rep.mse);
        rep.mass_bias.fill(std::nan(""));
        rep.mass_violation = std::nan("");
        rep.neg_fraction = std::nan("");
        rep.neg_mean = std::nan("");
    }
    return rep;
}

namespace {

nlohmann::ordered_json report_json(const MetricsReport& r) {
    nlohmann::ordered_json j;
    j["r2"] = r.r2_overall;
    j["mse"] = r.mse;
    j["rmse"] = r.rmse;
    j["mass_bias"] = {{"SO4", r.mass_bias[0]},
                      {"BC", r.mass_bias[1]},
                      {"OC", r.mass_bias[2]},
                      {"DU", r.mass_bias[3]}};
    j["mass_violation"] = r.mass_violation;
    j["neg_fraction"] = r.neg_fraction;
    j["neg_mean"] = r.neg_mean;
    j["r2_per_variable"] = r.r2_per_variable;
    if (r.classifier) {
        j["classifier"] = {{"accuracy", r.classifier->accuracy},
                           {"precision", r.classifier->precision},
                           {"recall", r.classifier->recall}};
    }
    j["checkpoint_id"] = r.checkpoint_id;
    j["dataset_id"] = r.dataset_id;
    j["constraint_mode"] = r.constraint_mode;
    j["transform"] = r.transform;
    return j;
}

void append_number(std::ostringstream& os, double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    os << buf;
}

} // namespace

std::string MetricsReport::to_json() const { return report_json(*this).dump(2) + "\n"; }

std::string MetricsReport::to_csv_row() const {
    std::ostringstream os;
    os << "r2,mse,rmse,mass_bias_so4,mass_bias_bc,mass_bias_oc,mass_bias_du,"
          "mass_violation,neg_fraction,neg_mean,constraint_mode,transform\n";
    const double vals[] = {r2_overall,   mse,         rmse,          mass_bias[0],
                           mass_bias[1], mass_bias[2], mass_bias[3], mass_violation,
                           neg_fraction, neg_mean};
    for (double v : vals) {
        append_number(os, v);
        os << ',';
    }
    os << constraint_mode << ',' << transform << "\n";
    return os.str();
}

std::string MetricsReport::per_variable_csv() const {
    std::ostringstream os;
    os << "variable,r2";
    if (classifier) os << ",accuracy,precision,recall";
    os << "\n";
    const VariableSchema& schema = variable_schema();
    for (int k = 0; k < kNumOutputs; ++k) {
        os << schema.output_names[k] << ',';
        append_number(os, r2_per_variable[k]);
        if (classifier) {
            os << ',';
            append_number(os, classifier->accuracy[k]);
            os << ',';
            append_number(os, classifier->precision[k]);
            os << ',';
            append_number(os, classifier->recall[k]);
        }
        os << "\n";
    }
    return os.str();
}

} // namespace aemu
