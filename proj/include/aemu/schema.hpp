#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace aemu {

inline constexpr int kNumInputs = 32;
inline constexpr int kNumOutputs = 28;
inline constexpr int kNumTendencies = 24; // outputs 0..23; 24..27 are water full values

// Aerosol species whose total mass one microphysics step conserves. H2SO4 gas
// belongs to the SO4 set: condensation and nucleation exchange gas and
// particulate sulfate, so the sulfate sum only closes with the gas included.
enum class Species : int { SO4 = 0, BC = 1, OC = 2, DU = 3 };
inline constexpr int kNumSpecies = 4;
inline constexpr std::array<Species, 4> kAllSpecies = {Species::SO4, Species::BC, Species::OC,
                                                       Species::DU};

// Input vector layout (fixed; see VariableSchema for names/units).
namespace in {
enum : int {
    pressure = 0,
    temperature = 1,
    rel_humidity = 2,
    ionization_rate = 3,
    cloud_cover = 4,
    boundary_layer = 5,
    forest_fraction = 6,
    h2so4_prod_rate = 7,
    h2so4_mass = 8,
    so4_ns = 9,
    so4_ks = 10,
    so4_as = 11,
    so4_cs = 12,
    bc_ks = 13,
    bc_as = 14,
    bc_cs = 15,
    bc_ki = 16,
    oc_ks = 17,
    oc_as = 18,
    oc_cs = 19,
    oc_ki = 20,
    du_as = 21,
    du_cs = 22,
    du_ai = 23,
    du_ci = 24,
    num_ns = 25,
    num_ks = 26,
    num_as = 27,
    num_cs = 28,
    num_ki = 29,
    num_ai = 30,
    num_ci = 31,
};
}

// Output vector layout: 0..23 are single-step tendencies of inputs 8..31 in
// the same order; 24..27 are aerosol water full values per soluble mode.
namespace out {
enum : int {
    d_h2so4 = 0,
    d_so4_ns = 1,
    d_so4_ks = 2,
    d_so4_as = 3,
    d_so4_cs = 4,
    d_bc_ks = 5,
    d_bc_as = 6,
    d_bc_cs = 7,
    d_bc_ki = 8,
    d_oc_ks = 9,
    d_oc_as = 10,
    d_oc_cs = 11,
    d_oc_ki = 12,
    d_du_as = 13,
    d_du_cs = 14,
    d_du_ai = 15,
    d_du_ci = 16,
    d_num_ns = 17,
    d_num_ks = 18,
    d_num_as = 19,
    d_num_cs = 20,
    d_num_ki = 21,
    d_num_ai = 22,
    d_num_ci = 23,
    water_ns = 24,
    water_ks = 25,
    water_as = 26,
    water_cs = 27,
};
}

// The fixed variable layout: names, units, conservation index sets and
// output-to-input pairings. Compiled in; a content hash versions it in every
// dataset and checkpoint so stale files fail loudly at load time.
struct VariableSchema {
    std::array<std::string_view, kNumInputs> input_names;
    std::array<std::string_view, kNumOutputs> output_names;
    std::array<std::string_view, kNumInputs> input_units;
    std::array<std::string_view, kNumOutputs> output_units;
    std::array<std::vector<int>, kNumSpecies> species_groups; // indexed by Species
    std::array<int, kNumOutputs> water_flag;                  // 1 for outputs 24..27

    // Output indices whose tendencies sum to zero for one species.
    const std::vector<int>& species_outputs(Species s) const {
        return species_groups[static_cast<int>(s)];
    }
};

// The one compiled-in schema.
const VariableSchema& variable_schema();

// I_s for a species id; "SS" and anything else unknown is a SchemaError
// (sea salt is not modelled).
const std::vector<int>& species_output_indices(Species s);
Species species_from_name(std::string_view name);
std::string_view species_name(Species s);

// Input index paired with an output tendency (k+8 for k<=23); water outputs
// have no paired input. Out-of-range indices are a SchemaError.
std::optional<int> paired_input(int output_index);

inline bool is_water_output(int output_index) { return output_index >= kNumTendencies; }

// Group index for the positivity-loss beta vector: SO4, BC, OC, DU, NUM, WAT.
int output_group(int output_index);
inline constexpr int kNumOutputGroups = 6;

// FNV-1a content hash over names, units, groups and pairings.
std::uint64_t schema_hash();
std::string schema_hash_hex();

// Canonical CSV column order: 32 input names then 28 output names. CSV
// headers must match these byte for byte.
const std::vector<std::string>& canonical_columns();

} // namespace aemu
