#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "aemu/model.hpp"
#include "aemu/refmodel.hpp"

namespace aemu {

// Runtime comparison of one global step: the reference box model versus the
// emulator forward pass including the variable transforms. Each path runs
// `repeats` times over the same rows and reports the median wall time.
struct BenchConfig {
    std::size_t n = 571392; // one global timestep's worth of points
    std::uint64_t seed = 0;
    int threads = 1; // NN path only; the reference baseline is single-threaded
    bool float32 = false;
    int repeats = 5;
    std::optional<Checkpoint> checkpoint; // default-architecture net when absent
    GeneratorParams params;
};

struct BenchReport {
    std::string model; // refmodel | nn-standard | nn-constrained | linear
    std::size_t rows = 0;
    double wall_s = 0.0;
    double rows_per_s = 0.0;
    int threads = 1;
    int float_width = 64;
};

std::vector<BenchReport> run_benchmark(const BenchConfig& cfg);

std::string bench_reports_json(const std::vector<BenchReport>& reports);

} // namespace aemu
