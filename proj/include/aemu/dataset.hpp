#pragma once

#include <cstdint>
#include <string>

#include "aemu/mat.hpp"

namespace aemu {

struct DatasetMeta {
    std::uint64_t seed = 0;
    std::string params_json; // generator params as serialized JSON ("" if unknown)
    std::string id;          // provenance tag, e.g. "gen:seed=1:n=100000"
};

// Rows of (input vector, target vector) in original physical units.
struct Dataset {
    Mat inputs;  // n x 32
    Mat targets; // n x 28
    DatasetMeta meta;

    std::size_t rows() const { return inputs.rows; }
};

} // namespace aemu
