#include <doctest.h>

#include <set>

#include "aemu/errors.hpp"
#include "aemu/schema.hpp"

using namespace aemu;

TEST_SUITE_BEGIN("schema");

TEST_CASE("input ordering is pinned") {
    const auto& s = variable_schema();
    CHECK(s.input_names[0] == "pressure");
    CHECK(s.input_names[1] == "temperature");
    CHECK(s.input_names[2] == "rel_humidity");
    CHECK(s.input_names[3] == "ionization_rate");
    CHECK(s.input_names[4] == "cloud_cover");
    CHECK(s.input_names[5] == "boundary_layer");
    CHECK(s.input_names[6] == "forest_fraction");
    CHECK(s.input_names[7] == "h2so4_prod_rate");
    CHECK(s.input_names[8] == "h2so4_mass");
    CHECK(s.input_names[9] == "so4_ns_mass");
    CHECK(s.input_names[12] == "so4_cs_mass");
    CHECK(s.input_names[13] == "bc_ks_mass");
    CHECK(s.input_names[16] == "bc_ki_mass");
    CHECK(s.input_names[17] == "oc_ks_mass");
    CHECK(s.input_names[20] == "oc_ki_mass");
    CHECK(s.input_names[21] == "du_as_mass");
    CHECK(s.input_names[24] == "du_ci_mass");
    CHECK(s.input_names[25] == "num_ns");
    CHECK(s.input_names[31] == "num_ci");
}

TEST_CASE("output ordering is pinned") {
    const auto& s = variable_schema();
    CHECK(s.output_names[0] == "d_h2so4_mass");
    CHECK(s.output_names[1] == "d_so4_ns_mass");
    CHECK(s.output_names[4] == "d_so4_cs_mass");
    CHECK(s.output_names[5] == "d_bc_ks_mass");
    CHECK(s.output_names[8] == "d_bc_ki_mass");
    CHECK(s.output_names[9] == "d_oc_ks_mass");
    CHECK(s.output_names[13] == "d_du_as_mass");
    CHECK(s.output_names[16] == "d_du_ci_mass");
    CHECK(s.output_names[17] == "d_num_ns");
    CHECK(s.output_names[23] == "d_num_ci");
    CHECK(s.output_names[24] == "water_ns");
    CHECK(s.output_names[27] == "water_cs");
}

TEST_CASE("species groups partition the mass outputs") {
    CHECK(species_output_indices(Species::SO4) == std::vector<int>{0, 1, 2, 3, 4});
    CHECK(species_output_indices(Species::BC) == std::vector<int>{5, 6, 7, 8});
    CHECK(species_output_indices(Species::OC) == std::vector<int>{9, 10, 11, 12});
    CHECK(species_output_indices(Species::DU) == std::vector<int>{13, 14, 15, 16});

    std::set<int> all;
    std::size_t total = 0;
    for (Species sp : kAllSpecies) {
        const auto& g = species_output_indices(sp);
        total += g.size();
        all.insert(g.begin(), g.end());
    }
    CHECK(total == 17);      // groups are disjoint...
    CHECK(all.size() == 17); // ...and their union is exactly 0..16
    CHECK(*all.begin() == 0);
    CHECK(*all.rbegin() == 16);
}

TEST_CASE("species lookup rejects sea salt") {
    CHECK(species_from_name("SO4") == Species::SO4);
    CHECK(species_from_name("DU") == Species::DU);
    CHECK_THROWS_AS(species_from_name("SS"), SchemaError);
    CHECK_THROWS_AS(species_from_name("H2O"), SchemaError);
}

TEST_CASE("output/input pairing") {
    CHECK(paired_input(0) == 8);
    CHECK(paired_input(23) == 31);
    for (int k = 0; k < kNumTendencies; ++k) CHECK(paired_input(k) == k + 8);
    CHECK_FALSE(paired_input(24).has_value());
    CHECK_FALSE(paired_input(25).has_value());
    CHECK_FALSE(paired_input(27).has_value());
    CHECK_THROWS_AS(paired_input(-1), SchemaError);
    CHECK_THROWS_AS(paired_input(28), SchemaError);
}

TEST_CASE("paired names refer to the same physical variable") {
    const auto& s = variable_schema();
    for (int k = 0; k < kNumTendencies; ++k) {
        const auto out_name = s.output_names[k];
        const auto in_name = s.input_names[*paired_input(k)];
        REQUIRE(out_name.size() > in_name.size());
        CHECK(out_name.substr(out_name.size() - in_name.size()) == in_name);
    }
}

TEST_CASE("water outputs and group ids") {
    for (int k = 24; k < 28; ++k) CHECK(is_water_output(k));
    for (int k = 0; k < 24; ++k) CHECK_FALSE(is_water_output(k));
    CHECK(output_group(0) == 0);
    CHECK(output_group(4) == 0);
    CHECK(output_group(5) == 1);
    CHECK(output_group(12) == 2);
    CHECK(output_group(16) == 3);
    CHECK(output_group(17) == 4);
    CHECK(output_group(23) == 4);
    CHECK(output_group(24) == 5);
    CHECK(output_group(27) == 5);
}

TEST_CASE("schema hash and canonical columns") {
    CHECK(schema_hash() != 0);
    CHECK(schema_hash() == schema_hash());
    CHECK(schema_hash_hex().size() == 16);
    const auto& cols = canonical_columns();
    REQUIRE(cols.size() == 60);
    CHECK(cols[0] == "pressure");
    CHECK(cols[31] == "num_ci");
    CHECK(cols[32] == "d_h2so4_mass");
    CHECK(cols[59] == "water_cs");
}

TEST_SUITE_END();
