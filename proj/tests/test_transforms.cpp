#include <doctest.h>

#include <cmath>

#include "aemu/errors.hpp"
#include "aemu/refmodel.hpp"
#include "aemu/rng.hpp"
#include "aemu/transforms.hpp"

using namespace aemu;

TEST_SUITE_BEGIN("transforms");

namespace {

// two-row matrices exercising every column
Mat two_rows(double a, double b, std::size_t cols) {
    Mat m(2, cols);
    for (std::size_t j = 0; j < cols; ++j) {
        m(0, j) = a + static_cast<double>(j);
        m(1, j) = b + static_cast<double>(j);
    }
    return m;
}

} // namespace

TEST_CASE("population mean and std") {
    const Mat x = two_rows(1.0, 3.0, kNumInputs);
    const Mat y = two_rows(1.0, 3.0, kNumOutputs);
    const NormStats s = fit_stats(x, y, "test");
    for (std::size_t j = 0; j < kNumInputs; ++j) {
        CHECK(s.mu_x[j] == doctest::Approx(2.0 + static_cast<double>(j)));
        CHECK(s.sigma_x[j] == doctest::Approx(1.0)); // population, not sample
    }
    CHECK(s.fitted_rows == 2);
    CHECK(s.provenance == "test");
}

TEST_CASE("constant column is rejected by name") {
    Mat x = two_rows(1.0, 3.0, kNumInputs);
    Mat y = two_rows(1.0, 3.0, kNumOutputs);
    x(0, 2) = 7.0;
    x(1, 2) = 7.0; // rel_humidity column constant
    CHECK_THROWS_WITH_AS(fit_stats(x, y, "test"),
                         doctest::Contains("rel_humidity"), DataError);
    CHECK_THROWS_AS(fit_stats(Mat(1, kNumInputs), Mat(1, kNumOutputs), "t"), DataError);
}

TEST_CASE("standardize and back transforms invert each other") {
    const Dataset ds = generate_dataset(512, 11, GeneratorParams{});
    const NormStats s = fit_stats(ds);

    Mat x_std, x_back, y_std, y_back;
    standardize_inputs(ds.inputs, s, x_std);
    back_transform_inputs(x_std, s, x_back); // h
    standardize_outputs(ds.targets, s, y_std);
    back_transform_outputs(y_std, s, y_back); // g

    double max_x = 0.0, max_y = 0.0, err_x = 0.0, err_y = 0.0;
    for (std::size_t i = 0; i < ds.inputs.size(); ++i) {
        max_x = std::max(max_x, std::fabs(ds.inputs.data[i]));
        err_x = std::max(err_x, std::fabs(x_back.data[i] - ds.inputs.data[i]));
    }
    for (std::size_t i = 0; i < ds.targets.size(); ++i) {
        max_y = std::max(max_y, std::fabs(ds.targets.data[i]));
        err_y = std::max(err_y, std::fabs(y_back.data[i] - ds.targets.data[i]));
    }
    CHECK(err_x <= 1e-12 * max_x);
    CHECK(err_y <= 1e-12 * max_y);
}

TEST_CASE("standardizing the mean gives zero, g(0) gives the mean") {
    const Dataset ds = generate_dataset(64, 5, GeneratorParams{});
    const NormStats s = fit_stats(ds);
    Mat mu(1, kNumInputs);
    for (int j = 0; j < kNumInputs; ++j) mu(0, j) = s.mu_x[j];
    Mat z;
    standardize_inputs(mu, s, z);
    for (int j = 0; j < kNumInputs; ++j) CHECK(z(0, j) == doctest::Approx(0.0).epsilon(1e-12));

    Mat zero(1, kNumOutputs, 0.0), back;
    back_transform_outputs(zero, s, back);
    for (int j = 0; j < kNumOutputs; ++j) CHECK(back(0, j) == s.mu_y[j]);
}

TEST_CASE("log transform splits sign and magnitude") {
    SUBCASE("zero maps to the zero class at the floor") {
        const auto sm = log_transform(0.0, 1e-20);
        CHECK(sm.sign == 0);
        CHECK(sm.magnitude == doctest::Approx(std::log(1e-20)));
    }
    SUBCASE("negative values keep their magnitude") {
        const auto sm = log_transform(-std::exp(3.0), 1e-20);
        CHECK(sm.sign == -1);
        CHECK(sm.magnitude == doctest::Approx(3.0));
    }
    SUBCASE("positive small value") {
        const auto sm = log_transform(2.5e-7, 1e-20);
        CHECK(sm.sign == 1);
        CHECK(sm.magnitude == doctest::Approx(-15.201804919084164).epsilon(1e-14));
    }
    SUBCASE("below the floor collapses to zero class") {
        const auto sm = log_transform(1e-30, 1e-20);
        CHECK(sm.sign == 0);
    }
    CHECK_THROWS_AS(log_transform(1.0, 0.0), ConfigError);
}

TEST_CASE("inverse_log") {
    CHECK(inverse_log(0, 123.0) == 0.0);
    CHECK(inverse_log(0, -5.0) == 0.0);
    CHECK(inverse_log(1, 0.0) == 1.0);
    CHECK(inverse_log(-1, 0.0) == -1.0);
    CHECK_THROWS_AS(inverse_log(3, 0.0), ConfigError);
}

TEST_CASE("log pipeline round-trips above the floor") {
    SplitMix64 rng(77);
    const double eps = 1e-20;
    for (int i = 0; i < 2000; ++i) {
        const double mag = std::pow(10.0, rng.uniform(-19.0, 8.0));
        const double y = (rng.next_double() < 0.5 ? -1.0 : 1.0) * mag;
        const auto sm = log_transform(y, eps);
        const double back = inverse_log(sm.sign, sm.magnitude);
        CHECK(std::signbit(back) == std::signbit(y));
        CHECK(std::fabs(back - y) <= 1e-12 * std::fabs(y));
    }
}

TEST_CASE("encode_log_targets maps classes row-major") {
    Mat y(2, kNumOutputs, 0.0);
    y(0, 0) = 4.0;
    y(0, 5) = -2.0;
    y(1, 27) = 1e-30;
    LogTransformConfig cfg;
    Mat mags;
    std::vector<std::int8_t> classes;
    encode_log_targets(y, cfg, mags, classes);
    CHECK(classes[0] == sign_to_class(1));
    CHECK(classes[5] == sign_to_class(-1));
    CHECK(classes[1] == sign_to_class(0));
    CHECK(classes[kNumOutputs + 27] == sign_to_class(0)); // below the 1e-20 floor
    CHECK(mags(0, 0) == doctest::Approx(std::log(4.0)));
    CHECK(mags(0, 5) == doctest::Approx(std::log(2.0)));
}

TEST_SUITE_END();
