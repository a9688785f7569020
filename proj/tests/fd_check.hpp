#pragma once

// Central finite-difference gradient checking shared by the unit tests and
// the acceptance suite. Steps are 1e-6 relative to the parameter; the error
// denominator floors at 5% of the largest analytic entry because below that
// the difference quotient is dominated by objective round-off (eps*|L|/h),
// not by the gradient being checked.

#include <cmath>
#include <functional>
#include <vector>

#include "aemu/model.hpp"

namespace fd {

struct Result {
    double max_rel_err = 0.0;
    std::size_t checked = 0;
};

inline double step_for(double theta) { return 1e-6 * std::max(1.0, std::fabs(theta)); }

// objective: any scalar function of the network parameters
inline Result check_gradients(aemu::MlpParams& params, const aemu::Gradients& analytic,
                              const std::function<double()>& objective) {
    double max_abs = 0.0;
    for (std::size_t l = 0; l < params.num_layers(); ++l) {
        for (double g : analytic.w[l].data) max_abs = std::max(max_abs, std::fabs(g));
        for (double g : analytic.b[l].data) max_abs = std::max(max_abs, std::fabs(g));
    }
    const double floor = 0.05 * max_abs;

    Result res;
    auto probe = [&](double& theta, double a) {
        const double saved = theta;
        const double h = step_for(saved);
        theta = saved + h;
        const double up = objective();
        theta = saved - h;
        const double down = objective();
        theta = saved;
        const double f = (up - down) / (2.0 * h);
        const double rel = std::fabs(a - f) / std::max({std::fabs(a), std::fabs(f), floor});
        res.max_rel_err = std::max(res.max_rel_err, rel);
        ++res.checked;
    };
    for (std::size_t l = 0; l < params.num_layers(); ++l) {
        for (std::size_t i = 0; i < params.weights[l].size(); ++i)
            probe(params.weights[l].data[i], analytic.w[l].data[i]);
        for (std::size_t i = 0; i < params.biases[l].size(); ++i)
            probe(params.biases[l].data[i], analytic.b[l].data[i]);
    }
    return res;
}

// Smallest |pre-activation| of the hidden layers, recomputed independently
// of ForwardCache. Probes near ReLU kinks are excluded by requiring a margin
// on this before running the check.
inline double min_preactivation(const aemu::MlpParams& params, const aemu::Mat& x) {
    aemu::Mat a = x, z;
    double m = 1e300;
    for (std::size_t l = 0; l < params.num_layers(); ++l) {
        aemu::gemm(a, params.weights[l], z);
        for (std::size_t i = 0; i < z.rows; ++i)
            for (std::size_t j = 0; j < z.cols; ++j) z(i, j) += params.biases[l](0, j);
        if (l + 1 == params.num_layers()) break;
        for (double v : z.data) m = std::min(m, std::fabs(v));
        for (double& v : z.data) {
            switch (params.activation) {
            case aemu::Activation::Relu: v = v > 0.0 ? v : 0.0; break;
            case aemu::Activation::LeakyRelu: v = v > 0.0 ? v : 0.01 * v; break;
            case aemu::Activation::Tanh: v = std::tanh(v); break;
            case aemu::Activation::Sigmoid: v = 1.0 / (1.0 + std::exp(-v)); break;
            }
        }
        a = z;
    }
    return m;
}

} // namespace fd
