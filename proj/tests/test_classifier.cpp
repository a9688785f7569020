#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "aemu/classifier.hpp"
#include "aemu/errors.hpp"
#include "aemu/refmodel.hpp"
#include "aemu/rng.hpp"

using namespace aemu;

TEST_SUITE_BEGIN("classifier");

namespace {

// Bias-only nets: zero weights make the outputs input-independent, which
// pins the fused decode behavior exactly.
LogPipelineBundle constant_bundle(double log_mag, int favored_class) {
    LogPipelineBundle b;

    NormStats stats;
    stats.mu_x.assign(kNumInputs, 0.0);
    stats.sigma_x.assign(kNumInputs, 1.0);
    stats.mu_y.assign(kNumOutputs, 0.0);
    stats.sigma_y.assign(kNumOutputs, 1.0);
    stats.fitted_rows = 2;
    stats.provenance = "test";

    b.magnitude.params = init_mlp({kNumInputs, kNumOutputs}, Activation::Relu, 1);
    b.magnitude.params.transform = Transform::Log;
    b.magnitude.params.weights[0].fill(0.0);
    for (int k = 0; k < kNumOutputs; ++k) b.magnitude.params.biases[0](0, k) = log_mag;
    b.magnitude.stats = stats;

    b.classifier.params =
        init_mlp({kNumInputs, kNumOutputs * kNumSignClasses}, Activation::Relu, 2);
    b.classifier.params.transform = Transform::Log;
    b.classifier.params.weights[0].fill(0.0);
    for (int k = 0; k < kNumOutputs; ++k)
        b.classifier.params.biases[0](0, k * kNumSignClasses + favored_class) = 5.0;
    b.classifier.stats = stats;
    return b;
}

} // namespace

TEST_CASE("predict_tendencies fuses sign and magnitude") {
    Mat x(3, kNumInputs, 0.5);

    SUBCASE("positive class decodes exp(magnitude)") {
        const auto b = constant_bundle(std::log(3.0), sign_to_class(1));
        const Mat y = predict_tendencies(b, x);
        for (std::size_t i = 0; i < y.size(); ++i) CHECK(y.data[i] == doctest::Approx(3.0));
    }
    SUBCASE("zero class forces zero tendencies, water bypasses the classifier") {
        const auto b = constant_bundle(std::log(3.0), sign_to_class(0));
        const Mat y = predict_tendencies(b, x);
        for (std::size_t i = 0; i < y.rows; ++i)
            for (int k = 0; k < kNumOutputs; ++k) {
                if (is_water_output(k))
                    CHECK(y(i, k) == doctest::Approx(3.0)); // forced sign +1
                else
                    CHECK(y(i, k) == 0.0);
            }
    }
    SUBCASE("negative class flips the sign, never the magnitude") {
        const auto b = constant_bundle(std::log(3.0), sign_to_class(-1));
        const Mat y = predict_tendencies(b, x);
        for (std::size_t i = 0; i < y.rows; ++i)
            for (int k = 0; k < kNumOutputs; ++k) {
                if (is_water_output(k))
                    CHECK(y(i, k) == doctest::Approx(3.0));
                else
                    CHECK(y(i, k) == doctest::Approx(-3.0));
            }
    }
}

TEST_CASE("argmax is invariant under a constant logit shift") {
    auto b = constant_bundle(0.0, sign_to_class(1));
    // craft distinct logits per class, then shift all three by the same value
    for (int k = 0; k < kNumOutputs; ++k) {
        b.classifier.params.biases[0](0, k * kNumSignClasses + 0) = 0.3;
        b.classifier.params.biases[0](0, k * kNumSignClasses + 1) = 0.9;
        b.classifier.params.biases[0](0, k * kNumSignClasses + 2) = 0.7;
    }
    Mat x(2, kNumInputs, 1.0);
    std::vector<std::int8_t> before;
    classify(b.classifier, x, before);
    for (int k = 0; k < kNumOutputs; ++k)
        for (int c = 0; c < kNumSignClasses; ++c)
            b.classifier.params.biases[0](0, k * kNumSignClasses + c) += 17.25;
    std::vector<std::int8_t> after;
    classify(b.classifier, x, after);
    CHECK(before == after);
    CHECK(before[0] == sign_to_class(0)); // the middle class wins
}

TEST_CASE("bundle validation catches mismatched halves") {
    auto b = constant_bundle(0.0, 2);
    CHECK_NOTHROW(validate(b));

    auto wrong_transform = b;
    wrong_transform.magnitude.params.transform = Transform::Standard;
    CHECK_THROWS_AS(validate(wrong_transform), DataError);

    auto wrong_stats = b;
    wrong_stats.classifier.stats.mu_x[0] = 42.0;
    CHECK_THROWS_AS(validate(wrong_stats), DataError);
}

TEST_CASE("bundle directory round trip") {
    const auto b = constant_bundle(std::log(2.0), 2);
    const auto dir = std::filesystem::temp_directory_path() / "aemu_bundle_test";
    std::filesystem::remove_all(dir);
    save_bundle(b, dir);
    CHECK(is_bundle_dir(dir));
    const LogPipelineBundle loaded = load_bundle(dir);
    CHECK(loaded.magnitude.params.biases[0].data == b.magnitude.params.biases[0].data);
    CHECK(loaded.classifier.params.biases[0].data == b.classifier.params.biases[0].data);

    Mat x(2, kNumInputs, 0.1);
    const Mat y1 = predict_tendencies(b, x);
    const Mat y2 = predict_tendencies(loaded, x);
    CHECK(y1.data == y2.data);
    std::filesystem::remove_all(dir);
    CHECK_FALSE(is_bundle_dir(dir));
    CHECK_THROWS_AS(load_bundle(dir), DataError);
}

TEST_CASE("single-class targets reach full accuracy after one epoch") {
    // every tendency strictly positive -> one class everywhere
    Dataset ds;
    const std::size_t n = 2000;
    ds.inputs.resize(n, kNumInputs);
    ds.targets.resize(n, kNumOutputs);
    SplitMix64 rng(120);
    for (std::size_t i = 0; i < n; ++i) {
        for (int j = 0; j < kNumInputs; ++j) ds.inputs(i, j) = rng.uniform(0.0, 2.0);
        for (int k = 0; k < kNumOutputs; ++k) ds.targets(i, k) = rng.uniform(0.5, 1.5);
    }
    ds.meta.id = "single-class";

    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.learning_rate = 0.1;
    cfg.batch_size = 64;
    cfg.arch = {kNumInputs, 16, kNumOutputs};

    const ClassifierTrainResult res = train_classifier(cfg, ds, nullptr);
    REQUIRE(res.log.size() == 1);
    CHECK(res.log.back().accuracy == 1.0);
    CHECK(res.checkpoint.params.arch.back() == kNumOutputs * kNumSignClasses);

    // reproducible trajectory
    const ClassifierTrainResult res2 = train_classifier(cfg, ds, nullptr);
    CHECK(checkpoint_to_json(res.checkpoint) == checkpoint_to_json(res2.checkpoint));
    CHECK(classifier_epoch_log_csv(res.log) == classifier_epoch_log_csv(res2.log));
}

TEST_CASE("evaluate_bundle reports both halves") {
    const Dataset train_ds = generate_dataset(3000, 121, GeneratorParams{});
    const Dataset test_ds = generate_dataset(500, 122, GeneratorParams{});

    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.arch = {kNumInputs, 32, kNumOutputs};
    cfg.transform = Transform::Log;
    TrainResult mag = train(cfg, train_ds, nullptr);
    TrainConfig ccfg = cfg;
    ccfg.seed = cfg.seed + 1;
    ClassifierTrainResult cls = train_classifier(ccfg, train_ds, nullptr);
    const LogPipelineBundle bundle{std::move(mag.checkpoint), std::move(cls.checkpoint)};

    const MetricsReport rep = evaluate_bundle(bundle, test_ds);
    CHECK(rep.transform == "log");
    REQUIRE(rep.classifier.has_value());
    for (int k = 0; k < kNumOutputs; ++k) {
        CHECK(rep.classifier->accuracy[k] >= 0.0);
        CHECK(rep.classifier->accuracy[k] <= 1.0);
    }
    CHECK(std::isfinite(rep.mass_violation));
    CHECK(rep.neg_fraction >= 0.0);

    // completion after decoding conserves exactly
    const MetricsReport completed = evaluate_bundle(bundle, test_ds, ConstraintMode::Complete);
    CHECK(completed.mass_violation <= 1e-12);
    // correction after decoding clears negativity exactly
    const MetricsReport corrected = evaluate_bundle(bundle, test_ds, ConstraintMode::Correct);
    CHECK(corrected.neg_fraction == 0.0);
    CHECK(corrected.neg_mean == 0.0);
}

TEST_SUITE_END();
