#include "aemu/classifier.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <numeric>

#include "aemu/errors.hpp"
#include "aemu/rng.hpp"

namespace aemu {

void validate(const LogPipelineBundle& bundle) {
    if (bundle.magnitude.params.transform != Transform::Log)
        throw DataError("bundle: magnitude checkpoint is not log-transformed");
    if (bundle.classifier.params.transform != Transform::Log)
        throw DataError("bundle: classifier checkpoint is not log-transformed");
    if (bundle.magnitude.params.arch.back() != kNumOutputs)
        throw DataError("bundle: magnitude regressor must emit 28 outputs");
    if (bundle.classifier.params.arch.back() != kNumOutputs * kNumSignClasses)
        throw DataError("bundle: classifier must emit 28x3 logits");
    // Both halves must standardize inputs identically.
    if (bundle.magnitude.stats.mu_x != bundle.classifier.stats.mu_x ||
        bundle.magnitude.stats.sigma_x != bundle.classifier.stats.sigma_x)
        throw DataError("bundle: the two checkpoints disagree on input normalization");
}

std::string classifier_epoch_log_csv(const std::vector<ClassifierEpochRecord>& log) {
    std::string out = "epoch,ce,accuracy\n";
    char buf[96];
    for (const ClassifierEpochRecord& r : log) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g\n", r.epoch, r.ce, r.accuracy);
        out += buf;
    }
    return out;
}

namespace {

void argmax_classes(const Mat& logits, std::vector<std::int8_t>& classes) {
    const std::size_t n = logits.rows;
    classes.assign(n * kNumOutputs, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const double* l = logits.row(i);
        for (int k = 0; k < kNumOutputs; ++k) {
            const double* lk = l + k * kNumSignClasses;
            int best = 0;
            for (int c = 1; c < kNumSignClasses; ++c)
                if (lk[c] > lk[best]) best = c;
            classes[i * kNumOutputs + k] = static_cast<std::int8_t>(best);
        }
    }
}

double accuracy_of(const std::vector<std::int8_t>& pred, const std::vector<std::int8_t>& truth) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == truth[i];
    return static_cast<double>(correct) / static_cast<double>(pred.size());
}

} // namespace

ClassifierTrainResult train_classifier(const TrainConfig& cfg, const Dataset& train_set,
                                       const Dataset* val_set) {
    TrainConfig ccfg = cfg;
    ccfg.transform = Transform::Log;
    ccfg.lambda_mass = 0.0;
    ccfg.mu_pos = 0.0;
    // widen the output layer to the class logits
    ccfg.arch.back() = kNumOutputs * kNumSignClasses;
    validate(ccfg);

    const std::size_t n = train_set.rows();
    if (n == 0) throw DataError("train_classifier: empty dataset");
    std::size_t n_train = n;
    if (!val_set) {
        const std::size_t n_val =
            static_cast<std::size_t>(std::floor(static_cast<double>(n) * ccfg.val_fraction));
        if (n_val < 2 || n - n_val < 2)
            throw DataError("train_classifier: dataset too small for the validation split");
        n_train = n - n_val;
    }

    auto slice = [](const Mat& src, std::size_t begin, std::size_t rows) {
        Mat dst(rows, src.cols);
        std::copy(src.row(begin), src.row(begin) + rows * src.cols, dst.data.begin());
        return dst;
    };
    Mat x_train = slice(train_set.inputs, 0, n_train);
    Mat y_train = slice(train_set.targets, 0, n_train);
    Mat x_val = val_set ? val_set->inputs : slice(train_set.inputs, n_train, n - n_train);
    Mat y_val = val_set ? val_set->targets : slice(train_set.targets, n_train, n - n_train);

    LogTransformConfig log_cfg;
    log_cfg.eps.assign(kNumOutputs, ccfg.log_eps);
    Mat mag_unused;
    std::vector<std::int8_t> cls_train, cls_val;
    encode_log_targets(y_train, log_cfg, mag_unused, cls_train);
    encode_log_targets(y_val, log_cfg, mag_unused, cls_val);

    const std::string provenance =
        "train:" + (train_set.meta.id.empty() ? std::string("anonymous") : train_set.meta.id) +
        ":rows=" + std::to_string(n_train) + ":classifier";
    NormStats stats = fit_input_stats(x_train, provenance);

    Mat x_train_std, x_val_std;
    standardize_inputs(x_train, stats, x_train_std);
    standardize_inputs(x_val, stats, x_val_std);

    MlpParams params = init_mlp(ccfg.arch, ccfg.activation, ccfg.seed);
    params.transform = Transform::Log;
    AdamState adam = AdamState::zeros_like(params);

    ClassifierTrainResult result;
    result.log.reserve(ccfg.epochs);

    std::vector<std::uint32_t> order(n_train);
    std::iota(order.begin(), order.end(), 0u);
    Mat xb, logits, grad;
    std::vector<std::int8_t> clsb;
    ForwardCache cache;
    Gradients grads;

    const std::size_t batch = static_cast<std::size_t>(ccfg.batch_size);
    for (int epoch = 1; epoch <= ccfg.epochs; ++epoch) {
        SplitMix64 shuffle_rng = SplitMix64::substream(ccfg.seed, 0x10000000ull + epoch);
        for (std::size_t i = n_train - 1; i > 0; --i) {
            const std::size_t j = shuffle_rng.next_u64() % (i + 1);
            std::swap(order[i], order[j]);
        }
        const std::size_t batches = (n_train + batch - 1) / batch;
        for (std::size_t b = 0; b < batches; ++b) {
            const std::size_t begin = b * batch;
            const std::size_t end = std::min(n_train, begin + batch);
            xb.resize(end - begin, kNumInputs);
            clsb.assign((end - begin) * kNumOutputs, 0);
            for (std::size_t r = begin; r < end; ++r) {
                const std::size_t src = order[r];
                std::copy(x_train_std.row(src), x_train_std.row(src) + kNumInputs,
                          xb.row(r - begin));
                std::copy(cls_train.begin() + static_cast<std::ptrdiff_t>(src * kNumOutputs),
                          cls_train.begin() + static_cast<std::ptrdiff_t>((src + 1) * kNumOutputs),
                          clsb.begin() + static_cast<std::ptrdiff_t>((r - begin) * kNumOutputs));
            }
            forward(params, xb, logits, &cache);
            const double loss = bce_loss(logits, clsb, &grad);
            if (!std::isfinite(loss))
                throw NumericError("train_classifier: non-finite loss at epoch " +
                                   std::to_string(epoch) + ", batch " + std::to_string(b));
            backward(params, cache, grad, grads);
            adam_step(params, grads, adam, ccfg.learning_rate, kAdamBeta1, kAdamBeta2, kAdamEps,
                      ccfg.weight_decay, ccfg.decoupled_weight_decay);
        }

        Mat val_logits;
        forward_inference(params, x_val_std, val_logits, ccfg.threads);
        std::vector<std::int8_t> val_pred;
        argmax_classes(val_logits, val_pred);
        ClassifierEpochRecord rec;
        rec.epoch = epoch;
        rec.ce = bce_loss(val_logits, cls_val, nullptr);
        rec.accuracy = accuracy_of(val_pred, cls_val);
        result.log.push_back(rec);
    }

    result.checkpoint.params = std::move(params);
    result.checkpoint.stats = std::move(stats);
    result.checkpoint.constraint.mode = ConstraintMode::None;
    result.checkpoint.log_cfg = log_cfg;
    return result;
}

void classify(const Checkpoint& classifier, const Mat& x_orig, std::vector<std::int8_t>& classes,
              int threads) {
    Mat x_std, logits;
    standardize_inputs(x_orig, classifier.stats, x_std);
    forward_inference(classifier.params, x_std, logits, threads);
    argmax_classes(logits, classes);
}

Mat predict_tendencies(const LogPipelineBundle& bundle, const Mat& x_orig, int threads) {
    validate(bundle);
    if (x_orig.cols != kNumInputs) throw DataError("predict_tendencies: bad input width");

    Mat x_std;
    standardize_inputs(x_orig, bundle.magnitude.stats, x_std);
    Mat mag_std;
    forward_inference(bundle.magnitude.params, x_std, mag_std, threads);
    Mat mag; // ln|y| in original units
    back_transform_outputs(mag_std, bundle.magnitude.stats, mag);

    std::vector<std::int8_t> classes;
    classify(bundle.classifier, x_orig, classes, threads);

    Mat y(x_orig.rows, kNumOutputs);
    for (std::size_t i = 0; i < y.rows; ++i) {
        const double* m = mag.row(i);
        double* yi = y.row(i);
        for (int k = 0; k < kNumOutputs; ++k) {
            // water full values are non-negative by construction
            const int sign =
                is_water_output(k) ? 1 : class_to_sign(classes[i * kNumOutputs + k]);
            yi[k] = inverse_log(sign, m[k]);
        }
    }
    return y;
}

MetricsReport evaluate_bundle(const LogPipelineBundle& bundle, const Dataset& data,
                              std::optional<ConstraintMode> override_mode, int threads) {
    validate(bundle);
    if (data.rows() == 0) throw DataError("evaluate_bundle: empty dataset");

    // Log-scale accuracy of the magnitude half.
    MetricsReport rep = evaluate(bundle.magnitude, data, std::nullopt, threads);

    ConstraintConfig cfg = bundle.magnitude.constraint;
    if (override_mode) cfg.mode = *override_mode;
    rep.constraint_mode = std::string(constraint_mode_name(cfg.mode));

    // Decode to original units, constrain there, then score mass/positivity.
    Mat pred = predict_tendencies(bundle, data.inputs, threads);
    apply_constraints_original(pred, data.inputs, cfg);
    const MassMetrics mm = mass_metrics(pred, data.inputs);
    rep.mass_bias = mm.bias;
    rep.mass_violation = mm.violation;
    const PositivityMetrics pm = positivity_metrics(pred, data.inputs, data.targets);
    rep.neg_fraction = pm.fraction;
    rep.neg_mean = pm.mean;

    std::vector<std::int8_t> cls_pred, cls_truth;
    classify(bundle.classifier, data.inputs, cls_pred, threads);
    Mat mag_unused;
    encode_log_targets(data.targets, bundle.magnitude.log_cfg, mag_unused, cls_truth);
    rep.classifier = class_metrics(cls_pred, cls_truth, data.rows());
    return rep;
}

void save_bundle(const LogPipelineBundle& bundle, const std::filesystem::path& dir) {
    validate(bundle);
    std::filesystem::create_directories(dir);
    save_checkpoint(bundle.magnitude, dir / "magnitude.json");
    save_checkpoint(bundle.classifier, dir / "classifier.json");
    nlohmann::ordered_json manifest;
    manifest["version"] = kCheckpointVersion;
    manifest["schema_hash"] = schema_hash_hex();
    manifest["magnitude"] = "magnitude.json";
    manifest["classifier"] = "classifier.json";
    std::ofstream out(dir / "manifest.json", std::ios::binary);
    if (!out) throw DataError("cannot write bundle manifest in '" + dir.string() + "'");
    const std::string text = manifest.dump(2) + "\n";
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

LogPipelineBundle load_bundle(const std::filesystem::path& dir) {
    const auto manifest_path = dir / "manifest.json";
    std::ifstream in(manifest_path, std::ios::binary);
    if (!in) throw DataError("cannot open bundle manifest '" + manifest_path.string() + "'");
    nlohmann::json manifest;
    try {
        in >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(manifest_path.string() + ": bad manifest: " + e.what());
    }
    if (manifest.value("schema_hash", "") != schema_hash_hex())
        throw DataError(manifest_path.string() + ": schema hash mismatch");
    LogPipelineBundle b;
    b.magnitude = load_checkpoint(dir / manifest.value("magnitude", "magnitude.json"));
    b.classifier = load_checkpoint(dir / manifest.value("classifier", "classifier.json"));
    validate(b);
    return b;
}

bool is_bundle_dir(const std::filesystem::path& path) {
    return std::filesystem::is_directory(path) &&
           std::filesystem::exists(path / "manifest.json");
}

} // namespace aemu
