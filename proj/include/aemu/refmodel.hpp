#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "aemu/dataset.hpp"
#include "aemu/rng.hpp"
#include "aemu/schema.hpp"

namespace aemu {

// One grid-box state: the 32 input variables in schema order, original units.
using BoxState = std::array<double, kNumInputs>;

// Sampling range for one input variable. Uniform draws cover [lo, hi];
// log-uniform draws cover [hi * 10^-decades, hi] with a uniform exponent.
struct SampleRange {
    bool log_scale = false;
    double lo = 0.0;
    double hi = 1.0;
    double decades = 4.0; // used when log_scale

    static SampleRange uniform(double lo, double hi) { return {false, lo, hi, 0.0}; }
    static SampleRange log_uniform(double cap, double decades = 4.0) {
        return {true, 0.0, cap, decades};
    }
};

// Rates and ranges of the synthetic box model. The timestep matches the
// source model's 450 s; the process rates are chosen so condensation,
// nucleation, coagulation and water uptake all contribute at the sampled
// scales.
struct GeneratorParams {
    double dt = 450.0;                    // timestep [s]
    double condensation_rate = 1e-6;      // kappa_c
    double nucleation_rate = 1e-4;        // kappa_n
    double nucleation_particle_mass = 1e-3; // mu_nuc
    double coagulation_rate = 1e-9;       // kappa_a
    double self_coagulation_rate = 1e-7;  // kappa_s
    double water_factor = 0.5;            // omega
    std::array<double, 4> surface_weights = {0.01, 0.1, 1.0, 10.0}; // a_ns..a_cs
    std::array<SampleRange, kNumInputs> ranges = default_ranges();

    static std::array<SampleRange, kNumInputs> default_ranges();

    std::string to_json() const;
    static GeneratorParams from_json(const std::string& text);
};

// Degenerate ranges (lo >= hi, or a non-positive log cap) are a ConfigError.
void validate(const GeneratorParams& params);

// Draws one state; every field independent, invariants hold by construction.
BoxState sample_state(SplitMix64& rng, const GeneratorParams& params);

// One deterministic timestep. Outputs 0..23 are tendencies (post - pre),
// 24..27 the water full values. Per-species tendency sums vanish up to
// round-off and every post-step mass and number stays non-negative.
std::array<double, kNumOutputs> step(const BoxState& state, const GeneratorParams& params);

// n rows of (sample_state, step) pairs; row r uses the substream (seed, r),
// so the result is independent of evaluation order. n == 0 is a ConfigError.
Dataset generate_dataset(std::size_t n, std::uint64_t seed, const GeneratorParams& params);

} // namespace aemu
