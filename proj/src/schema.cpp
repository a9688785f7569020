#include "aemu/schema.hpp"

#include <cstdio>
#include <string>

#include "aemu/errors.hpp"

namespace aemu {

namespace {

VariableSchema build_schema() {
    VariableSchema s;
    s.input_names = {
        "pressure",     "temperature",  "rel_humidity",    "ionization_rate",
        "cloud_cover",  "boundary_layer", "forest_fraction", "h2so4_prod_rate",
        "h2so4_mass",   "so4_ns_mass",  "so4_ks_mass",     "so4_as_mass",
        "so4_cs_mass",  "bc_ks_mass",   "bc_as_mass",      "bc_cs_mass",
        "bc_ki_mass",   "oc_ks_mass",   "oc_as_mass",      "oc_cs_mass",
        "oc_ki_mass",   "du_as_mass",   "du_cs_mass",      "du_ai_mass",
        "du_ci_mass",   "num_ns",       "num_ks",          "num_as",
        "num_cs",       "num_ki",       "num_ai",          "num_ci",
    };
    s.output_names = {
        "d_h2so4_mass",  "d_so4_ns_mass", "d_so4_ks_mass", "d_so4_as_mass",
        "d_so4_cs_mass", "d_bc_ks_mass",  "d_bc_as_mass",  "d_bc_cs_mass",
        "d_bc_ki_mass",  "d_oc_ks_mass",  "d_oc_as_mass",  "d_oc_cs_mass",
        "d_oc_ki_mass",  "d_du_as_mass",  "d_du_cs_mass",  "d_du_ai_mass",
        "d_du_ci_mass",  "d_num_ns",      "d_num_ks",      "d_num_as",
        "d_num_cs",      "d_num_ki",      "d_num_ai",      "d_num_ci",
        "water_ns",      "water_ks",      "water_as",      "water_cs",
    };
    // Uniform synthetic units: one mass unit per species (ug m-3), numbers
    // in cm-3, water in kg m-3. The mixed molec/ug units of the real M7
    // table are not reproduced; real-data ingestion would need a conversion.
    s.input_units = {
        "Pa", "K", "-", "-", "-", "-", "-", "cm-3 s-1",
        "ug m-3", "ug m-3", "ug m-3", "ug m-3", "ug m-3", // h2so4 + so4 modes
        "ug m-3", "ug m-3", "ug m-3", "ug m-3",           // bc
        "ug m-3", "ug m-3", "ug m-3", "ug m-3",           // oc
        "ug m-3", "ug m-3", "ug m-3", "ug m-3",           // du
        "cm-3", "cm-3", "cm-3", "cm-3", "cm-3", "cm-3", "cm-3",
    };
    for (int k = 0; k < kNumTendencies; ++k) s.output_units[k] = s.input_units[k + 8];
    for (int k = kNumTendencies; k < kNumOutputs; ++k) s.output_units[k] = "kg m-3";

    s.species_groups[static_cast<int>(Species::SO4)] = {0, 1, 2, 3, 4};
    s.species_groups[static_cast<int>(Species::BC)] = {5, 6, 7, 8};
    s.species_groups[static_cast<int>(Species::OC)] = {9, 10, 11, 12};
    s.species_groups[static_cast<int>(Species::DU)] = {13, 14, 15, 16};

    for (int k = 0; k < kNumOutputs; ++k) s.water_flag[k] = is_water_output(k) ? 1 : 0;
    return s;
}

std::uint64_t fnv1a(std::uint64_t h, std::string_view s) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}

} // namespace

const VariableSchema& variable_schema() {
    static const VariableSchema schema = build_schema();
    return schema;
}

const std::vector<int>& species_output_indices(Species s) {
    return variable_schema().species_outputs(s);
}

Species species_from_name(std::string_view name) {
    if (name == "SO4") return Species::SO4;
    if (name == "BC") return Species::BC;
    if (name == "OC") return Species::OC;
    if (name == "DU") return Species::DU;
    throw SchemaError("unknown species id '" + std::string(name) +
                      "' (expected SO4, BC, OC or DU)");
}

std::string_view species_name(Species s) {
    switch (s) {
    case Species::SO4: return "SO4";
    case Species::BC: return "BC";
    case Species::OC: return "OC";
    case Species::DU: return "DU";
    }
    throw SchemaError("invalid species value");
}

std::optional<int> paired_input(int output_index) {
    if (output_index < 0 || output_index >= kNumOutputs)
        throw SchemaError("output index " + std::to_string(output_index) + " out of range");
    if (is_water_output(output_index)) return std::nullopt;
    return output_index + 8;
}

int output_group(int output_index) {
    if (output_index < 0 || output_index >= kNumOutputs)
        throw SchemaError("output index " + std::to_string(output_index) + " out of range");
    if (output_index <= 4) return 0;  // SO4 (incl. h2so4 gas)
    if (output_index <= 8) return 1;  // BC
    if (output_index <= 12) return 2; // OC
    if (output_index <= 16) return 3; // DU
    if (output_index <= 23) return 4; // NUM
    return 5;                         // WAT
}

std::uint64_t schema_hash() {
    static const std::uint64_t hash = [] {
        const VariableSchema& s = variable_schema();
        std::uint64_t h = 0xCBF29CE484222325ull;
        for (int i = 0; i < kNumInputs; ++i) {
            h = fnv1a(h, s.input_names[i]);
            h = fnv1a(h, ":");
            h = fnv1a(h, s.input_units[i]);
            h = fnv1a(h, ";");
        }
        for (int k = 0; k < kNumOutputs; ++k) {
            h = fnv1a(h, s.output_names[k]);
            h = fnv1a(h, ":");
            h = fnv1a(h, s.output_units[k]);
            h = fnv1a(h, ";");
        }
        for (Species sp : kAllSpecies) {
            h = fnv1a(h, species_name(sp));
            for (int i : s.species_outputs(sp)) h = fnv1a(h, "," + std::to_string(i));
            h = fnv1a(h, ";");
        }
        for (int k = 0; k < kNumOutputs; ++k) {
            auto p = paired_input(k);
            h = fnv1a(h, std::to_string(k) + "->" + (p ? std::to_string(*p) : "none") + ";");
        }
        return h;
    }();
    return hash;
}

std::string schema_hash_hex() {
    static const std::string hex = [] {
        char buf[17];
        std::snprintf(buf, sizeof(buf), "%016llx",
                      static_cast<unsigned long long>(schema_hash()));
        return std::string(buf);
    }();
    return hex;
}

const std::vector<std::string>& canonical_columns() {
    static const std::vector<std::string> cols = [] {
        std::vector<std::string> v;
        v.reserve(kNumInputs + kNumOutputs);
        const VariableSchema& s = variable_schema();
        for (auto n : s.input_names) v.emplace_back(n);
        for (auto n : s.output_names) v.emplace_back(n);
        return v;
    }();
    return cols;
}

} // namespace aemu
