#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "aemu/errors.hpp"
#include "aemu/model.hpp"
#include "aemu/refmodel.hpp"
#include "aemu/rng.hpp"
#include "aemu/transforms.hpp"
#include "fd_check.hpp"

using namespace aemu;

TEST_SUITE_BEGIN("model");

namespace {

Mat random_mat(std::size_t r, std::size_t c, std::uint64_t seed, double lo = -1.0,
               double hi = 1.0) {
    Mat m(r, c);
    SplitMix64 rng(seed);
    for (double& v : m.data) v = rng.uniform(lo, hi);
    return m;
}

// identity stats: standardized scale == original units
NormStats identity_stats() {
    NormStats s;
    s.mu_x.assign(kNumInputs, 0.0);
    s.sigma_x.assign(kNumInputs, 1.0);
    s.mu_y.assign(kNumOutputs, 0.0);
    s.sigma_y.assign(kNumOutputs, 1.0);
    s.fitted_rows = 2;
    s.provenance = "test";
    return s;
}

// the 2-2-1 net with pinned weights used for the hand-computed goldens
MlpParams tiny_net(Activation act) {
    MlpParams p;
    p.arch = {2, 2, 1};
    p.activation = act;
    Mat w1(2, 2);
    w1(0, 0) = 0.5;
    w1(0, 1) = -0.25;
    w1(1, 0) = 0.75;
    w1(1, 1) = 1.5;
    Mat b1(1, 2);
    b1(0, 0) = 0.1;
    b1(0, 1) = -0.2;
    Mat w2(2, 1);
    w2(0, 0) = 2.0;
    w2(1, 0) = -1.0;
    Mat b2(1, 1);
    b2(0, 0) = 0.05;
    p.weights = {w1, w2};
    p.biases = {b1, b2};
    return p;
}

} // namespace

TEST_CASE("init is deterministic with He-scaled variance") {
    const MlpParams a = init_mlp({32, 128, 28}, Activation::Relu, 5);
    const MlpParams b = init_mlp({32, 128, 28}, Activation::Relu, 5);
    for (std::size_t l = 0; l < a.num_layers(); ++l) {
        CHECK(a.weights[l].data == b.weights[l].data);
        for (double v : a.biases[l].data) CHECK(v == 0.0);
    }
    const MlpParams c = init_mlp({32, 128, 28}, Activation::Relu, 6);
    CHECK(a.weights[0].data != c.weights[0].data);

    const MlpParams big = init_mlp({128, 128}, Activation::Relu, 1);
    double var = 0.0;
    for (double v : big.weights[0].data) var += v * v;
    var /= static_cast<double>(big.weights[0].size());
    CHECK(var == doctest::Approx(2.0 / 128.0).epsilon(0.05));

    // no hidden layers is a plain linear model
    const MlpParams lin = init_mlp({32, 28}, Activation::Relu, 2);
    CHECK(lin.num_layers() == 1);

    CHECK_THROWS_AS(init_mlp({32, 0, 28}, Activation::Relu, 1), ConfigError);
    CHECK_THROWS_AS(init_mlp({32}, Activation::Relu, 1), ConfigError);
}

TEST_CASE("forward: zero parameters give zero outputs") {
    MlpParams p = init_mlp({4, 3, 2}, Activation::Relu, 1);
    for (auto& w : p.weights) w.fill(0.0);
    const Mat x = random_mat(5, 4, 9);
    Mat y;
    forward(p, x, y);
    for (double v : y.data) CHECK(v == 0.0);
}

TEST_CASE("forward: a single layer is the plain affine map") {
    MlpParams p = init_mlp({6, 4}, Activation::Tanh, 3);
    const Mat x = random_mat(7, 6, 10);
    Mat y;
    forward(p, x, y);
    for (std::size_t i = 0; i < x.rows; ++i)
        for (std::size_t j = 0; j < 4; ++j) {
            double acc = p.biases[0](0, j);
            for (std::size_t k = 0; k < 6; ++k) acc += x(i, k) * p.weights[0](k, j);
            CHECK(y(i, j) == doctest::Approx(acc).epsilon(1e-14));
        }
}

TEST_CASE("forward: hand-computed 2-2-1 goldens") {
    Mat x(1, 2);
    x(0, 0) = 1.0;
    x(0, 1) = 0.5;
    Mat y;
    forward(tiny_net(Activation::Relu), x, y);
    CHECK(y(0, 0) == doctest::Approx(1.7).epsilon(1e-15));
    forward(tiny_net(Activation::Tanh), x, y);
    CHECK(y(0, 0) == doctest::Approx(1.2604739547987431).epsilon(1e-15));
    forward(tiny_net(Activation::Sigmoid), x, y);
    CHECK(y(0, 0) == doctest::Approx(0.9277874457098992).epsilon(1e-15));

    Mat x2(1, 2);
    x2(0, 0) = -1.0;
    x2(0, 1) = 0.5;
    forward(tiny_net(Activation::LeakyRelu), x2, y);
    CHECK(y(0, 0) == doctest::Approx(-0.7505).epsilon(1e-15)); // slope 0.01 branch
}

TEST_CASE("forward is batch-order equivariant and thread-invariant") {
    const MlpParams p = init_mlp({32, 16, 28}, Activation::Relu, 4);
    const Mat x = random_mat(33, 32, 11);
    Mat y;
    forward(p, x, y);

    Mat x_rev(x.rows, x.cols);
    for (std::size_t i = 0; i < x.rows; ++i)
        std::copy(x.row(x.rows - 1 - i), x.row(x.rows - 1 - i) + x.cols, x_rev.row(i));
    Mat y_rev;
    forward(p, x_rev, y_rev);
    for (std::size_t i = 0; i < y.rows; ++i)
        for (std::size_t j = 0; j < y.cols; ++j) CHECK(y(i, j) == y_rev(y.rows - 1 - i, j));

    Mat y_t1, y_t3;
    forward_inference(p, x, y_t1, 1, 8);
    forward_inference(p, x, y_t3, 3, 8);
    CHECK(y_t1.data == y.data);
    CHECK(y_t3.data == y.data); // row sharding never changes bits
}

TEST_CASE("forward rejects bad shapes and non-finite input") {
    const MlpParams p = init_mlp({4, 3}, Activation::Relu, 1);
    Mat x(2, 5);
    Mat y;
    CHECK_THROWS_AS(forward(p, x, y), DataError);
    Mat bad(1, 4, 0.0);
    bad(0, 2) = std::nan("");
    CHECK_THROWS_AS(forward(p, bad, y), DataError);
}

TEST_CASE("backward matches finite differences for every activation") {
    for (Activation act : {Activation::Relu, Activation::LeakyRelu, Activation::Tanh,
                           Activation::Sigmoid}) {
        CAPTURE(activation_name(act));
        MlpParams p = init_mlp({7, 6, 5, 4}, act, 21);
        const Mat x = random_mat(6, 7, 22);
        const Mat dy = random_mat(6, 4, 23);
        REQUIRE(fd::min_preactivation(p, x) > 1e-4); // away from the kinks

        ForwardCache cache;
        Mat y;
        forward(p, x, y, &cache);
        Gradients grads;
        backward(p, cache, dy, grads);

        const auto objective = [&]() {
            Mat yy;
            forward(p, x, yy);
            double s = 0.0;
            for (std::size_t i = 0; i < yy.size(); ++i) s += dy.data[i] * yy.data[i];
            return s;
        };
        const fd::Result res = fd::check_gradients(p, grads, objective);
        CHECK(res.checked == p.parameter_count());
        CHECK(res.max_rel_err <= 1e-6);
    }
}

TEST_CASE("backward: input gradients match finite differences") {
    MlpParams p = init_mlp({5, 6, 3}, Activation::Tanh, 31);
    Mat x = random_mat(4, 5, 32);
    const Mat dy = random_mat(4, 3, 33);
    ForwardCache cache;
    Mat y;
    forward(p, x, y, &cache);
    Gradients grads;
    Mat dx;
    backward(p, cache, dy, grads, &dx);
    REQUIRE(dx.rows == 4);
    REQUIRE(dx.cols == 5);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double saved = x.data[i];
        const double h = fd::step_for(saved);
        double up, down;
        x.data[i] = saved + h;
        {
            Mat yy;
            forward(p, x, yy);
            up = 0.0;
            for (std::size_t j = 0; j < yy.size(); ++j) up += dy.data[j] * yy.data[j];
        }
        x.data[i] = saved - h;
        {
            Mat yy;
            forward(p, x, yy);
            down = 0.0;
            for (std::size_t j = 0; j < yy.size(); ++j) down += dy.data[j] * yy.data[j];
        }
        x.data[i] = saved;
        const double f = (up - down) / (2.0 * h);
        CHECK(dx.data[i] == doctest::Approx(f).epsilon(1e-6));
    }
}

TEST_CASE("backward: zero output gradient and linearity") {
    MlpParams p = init_mlp({6, 5, 3}, Activation::Relu, 41);
    const Mat x = random_mat(4, 6, 42);
    ForwardCache cache;
    Mat y;
    forward(p, x, y, &cache);

    Gradients g0;
    backward(p, cache, Mat(4, 3, 0.0), g0);
    for (std::size_t l = 0; l < p.num_layers(); ++l) {
        for (double v : g0.w[l].data) CHECK(v == 0.0);
        for (double v : g0.b[l].data) CHECK(v == 0.0);
    }

    const Mat dy = random_mat(4, 3, 43);
    Mat dy2 = dy;
    for (double& v : dy2.data) v *= 2.0;
    Gradients g1, g2;
    backward(p, cache, dy, g1);
    backward(p, cache, dy2, g2);
    for (std::size_t l = 0; l < p.num_layers(); ++l)
        for (std::size_t i = 0; i < g1.w[l].size(); ++i)
            CHECK(g2.w[l].data[i] == doctest::Approx(2.0 * g1.w[l].data[i]).epsilon(1e-12));
}

TEST_CASE("correction: identity when full values are already non-negative") {
    const NormStats s = identity_stats();
    Mat x(1, kNumInputs, 1.0);
    Mat y(1, kNumOutputs, 0.5); // all full values 1.5 (water 0.5) > 0
    const Mat before = y;
    apply_correction(y, x, s);
    for (std::size_t i = 0; i < y.size(); ++i)
        CHECK(y.data[i] == doctest::Approx(before.data[i]).epsilon(1e-14));
}

TEST_CASE("correction: clamps the full value at zero") {
    const NormStats s = identity_stats();
    Mat x(1, kNumInputs, 0.0);
    x(0, 8) = 5.0; // paired input of output 0
    Mat y(1, kNumOutputs, 1.0);
    y(0, 0) = -7.0;  // full value would be -2
    y(0, 24) = -3.0; // negative water value
    apply_correction(y, x, s);
    CHECK(y(0, 0) == doctest::Approx(-5.0)); // corrected tendency: full value 0
    CHECK(y(0, 24) == 0.0);                  // water clamps the value itself
    CHECK(y(0, 1) == doctest::Approx(1.0));  // untouched
}

TEST_CASE("correction: random batch satisfies positivity and is idempotent") {
    const Dataset ds = generate_dataset(200, 17, GeneratorParams{});
    const NormStats s = fit_stats(ds);
    Mat x_std;
    standardize_inputs(ds.inputs, s, x_std);
    Mat y = random_mat(200, kNumOutputs, 18, -3.0, 3.0);

    apply_correction(y, x_std, s);
    Mat once = y;
    apply_correction(y, x_std, s);
    for (std::size_t i = 0; i < y.size(); ++i)
        CHECK(y.data[i] == doctest::Approx(once.data[i]).epsilon(1e-12));

    // reconstructed full values are clamped (round-off-level tolerance here;
    // the decoded evaluation path is exactly zero and tested with the metrics)
    Mat y_orig, x_orig;
    back_transform_outputs(once, s, y_orig);
    back_transform_inputs(x_std, s, x_orig);
    double worst = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < y.rows; ++i)
        for (int k = 0; k < kNumOutputs; ++k) {
            const double full =
                k < kNumTendencies ? y_orig(i, k) + x_orig(i, k + 8) : y_orig(i, k);
            worst = std::min(worst, full);
            scale = std::max(scale, std::fabs(full));
        }
    CHECK(worst >= -1e-12 * scale);
}

TEST_CASE("completion: hand case and conservation") {
    const NormStats s = identity_stats();
    ConstraintConfig cfg;
    cfg.completion_index = {2, 5, 9, 13}; // SO4 replaced at its third variable

    Mat y(1, kNumOutputs, 0.0);
    y(0, 0) = 1.0;
    y(0, 1) = 2.0;
    y(0, 2) = 123.0; // gets replaced
    apply_completion(y, s, cfg);
    CHECK(y(0, 2) == doctest::Approx(-3.0));
    CHECK(y(0, 5) == 0.0);

    // already-conserving input: the replaced entry is reproduced
    Mat z(1, kNumOutputs, 0.0);
    z(0, 0) = 1.5;
    z(0, 1) = -0.5;
    z(0, 2) = -1.0; // SO4 sums to zero already
    apply_completion(z, s, cfg);
    CHECK(z(0, 2) == doctest::Approx(-1.0).epsilon(1e-14));
}

TEST_CASE("completion: random batch conserves exactly per species") {
    const Dataset ds = generate_dataset(100, 19, GeneratorParams{});
    const NormStats s = fit_stats(ds);
    Mat y = random_mat(100, kNumOutputs, 20, -2.0, 2.0);
    ConstraintConfig cfg; // default completion indices

    apply_completion(y, s, cfg);
    Mat once = y;
    apply_completion(y, s, cfg);
    for (std::size_t i = 0; i < y.size(); ++i)
        CHECK(y.data[i] == doctest::Approx(once.data[i]).epsilon(1e-12));

    Mat y_orig;
    back_transform_outputs(once, s, y_orig);
    for (std::size_t i = 0; i < y.rows; ++i)
        for (int sp = 0; sp < kNumSpecies; ++sp) {
            double sum = 0.0, scale = 0.0;
            for (int k : species_output_indices(static_cast<Species>(sp))) {
                sum += y_orig(i, k);
                scale += std::fabs(y_orig(i, k));
            }
            CHECK(std::fabs(sum) <= 1e-12 * std::max(scale, 1e-300));
        }

    ConstraintConfig bad;
    bad.completion_index = {0, 0, 9, 13}; // 0 is not a BC output
    CHECK_THROWS_AS(apply_completion(y, s, bad), ConfigError);
}

TEST_CASE("correct_then_complete applies both layers in the pinned order") {
    const Dataset ds = generate_dataset(50, 23, GeneratorParams{});
    const NormStats s = fit_stats(ds);
    Mat x_std;
    standardize_inputs(ds.inputs, s, x_std);
    const Mat y0 = random_mat(50, kNumOutputs, 24, -2.0, 2.0);

    Mat combined = y0;
    ConstraintConfig cfg;
    cfg.mode = ConstraintMode::CorrectThenComplete;
    apply_constraints(combined, x_std, s, cfg);

    Mat stepwise = y0;
    apply_correction(stepwise, x_std, s);
    apply_completion(stepwise, s, cfg);
    CHECK(combined.data == stepwise.data);
}

TEST_CASE("checkpoint round trip is byte-identical and validated") {
    const Dataset ds = generate_dataset(64, 29, GeneratorParams{});
    Checkpoint ckpt;
    ckpt.params = init_mlp({32, 8, 28}, Activation::LeakyRelu, 30);
    ckpt.stats = fit_stats(ds);
    ckpt.constraint.mode = ConstraintMode::Complete;

    const auto dir = std::filesystem::temp_directory_path() / "aemu_model_test";
    std::filesystem::create_directories(dir);
    const auto p1 = dir / "a.json", p2 = dir / "b.json";
    save_checkpoint(ckpt, p1);
    const Checkpoint loaded = load_checkpoint(p1);
    save_checkpoint(loaded, p2);

    std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
    const std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    const std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(s1 == s2);
    CHECK(!s1.empty());
    CHECK(checkpoint_id(ckpt) == checkpoint_id(loaded));

    for (std::size_t l = 0; l < ckpt.params.num_layers(); ++l)
        CHECK(loaded.params.weights[l].data == ckpt.params.weights[l].data);
    CHECK(loaded.stats.mu_y == ckpt.stats.mu_y);
    CHECK(loaded.constraint.mode == ConstraintMode::Complete);

    // corrupt the schema hash
    std::string text = s1;
    const auto pos = text.find("\"schema_hash\": \"");
    REQUIRE(pos != std::string::npos);
    text[pos + 16] = text[pos + 16] == '0' ? '1' : '0';
    CHECK_THROWS_AS(checkpoint_from_json(text, "corrupted"), DataError);
    CHECK_THROWS_AS(checkpoint_from_json("{not json", "garbage"), DataError);

    std::filesystem::remove_all(dir);
}

TEST_SUITE_END();
