#include "aemu/refmodel.hpp"

#include <cmath>
#include <json.hpp>

#include "aemu/errors.hpp"

namespace aemu {

namespace {

using json = nlohmann::ordered_json;

// Soluble mode index within {ns, ks, as, cs} helpers used by condensation
// and water uptake.
constexpr int kSolubleNumIdx[4] = {in::num_ns, in::num_ks, in::num_as, in::num_cs};
constexpr int kSo4Idx[4] = {in::so4_ns, in::so4_ks, in::so4_as, in::so4_cs};

// Coagulation edges, applied in exactly this order with sequentially updated
// masses. u/v index the input layout; each transfer stays within one species.
struct Edge {
    int from;
    int to;
    int recv_num; // number concentration of the receiving mode (drives psi)
};
constexpr Edge kEdges[] = {
    {in::so4_ns, in::so4_ks, in::num_ks}, {in::so4_ks, in::so4_as, in::num_as},
    {in::so4_as, in::so4_cs, in::num_cs},                                       // SO4
    {in::bc_ki, in::bc_ks, in::num_ks},   {in::bc_ks, in::bc_as, in::num_as},
    {in::bc_as, in::bc_cs, in::num_cs},                                         // BC
    {in::oc_ki, in::oc_ks, in::num_ks},   {in::oc_ks, in::oc_as, in::num_as},
    {in::oc_as, in::oc_cs, in::num_cs},                                         // OC
    {in::du_ai, in::du_as, in::num_as},   {in::du_ci, in::du_cs, in::num_cs},
    {in::du_as, in::du_cs, in::num_cs},                                         // DU
};

// Per-donor number decrement: each donor mode loses n_u * psi once per step,
// psi taken from its first listed outgoing edge.
struct NumberSink {
    int num;      // donor mode number index
    int recv_num; // receiver number index of the donor's first outgoing edge
};
constexpr NumberSink kNumberSinks[] = {
    {in::num_ns, in::num_ks}, {in::num_ks, in::num_as}, {in::num_as, in::num_cs},
    {in::num_ki, in::num_ks}, {in::num_ai, in::num_as}, {in::num_ci, in::num_cs},
};

} // namespace

// Per-species caps mirror the heterogeneous magnitudes of the source data
// (sulfate counted in molecules, carbon masses in micrograms, numbers per
// cm^3), which is also what keeps the published per-species regularizer
// weights meaningful on this synthetic task.
std::array<SampleRange, kNumInputs> GeneratorParams::default_ranges() {
    std::array<SampleRange, kNumInputs> r;
    r[in::pressure] = SampleRange::uniform(5e3, 1.1e5);
    r[in::temperature] = SampleRange::uniform(190.0, 310.0);
    r[in::rel_humidity] = SampleRange::uniform(0.0, 1.0);
    r[in::ionization_rate] = SampleRange::uniform(0.0, 1.0);
    r[in::cloud_cover] = SampleRange::uniform(0.0, 1.0);
    r[in::boundary_layer] = SampleRange::uniform(0.0, 1.0);
    r[in::forest_fraction] = SampleRange::uniform(0.0, 1.0);
    r[in::h2so4_prod_rate] = SampleRange::log_uniform(1e2);
    r[in::h2so4_mass] = SampleRange::log_uniform(10.0);
    for (int i = in::so4_ns; i <= in::so4_cs; ++i) r[i] = SampleRange::log_uniform(3e7);
    for (int i = in::bc_ks; i <= in::bc_ki; ++i) r[i] = SampleRange::log_uniform(1.5e-4);
    for (int i = in::oc_ks; i <= in::oc_ki; ++i) r[i] = SampleRange::log_uniform(1.5e-3);
    for (int i = in::du_as; i <= in::du_ci; ++i) r[i] = SampleRange::log_uniform(30.0);
    // numbers fall off with particle size; this also keeps the condensation
    // sink A = sum a_k n_k away from permanent saturation
    r[in::num_ns] = SampleRange::log_uniform(1e6);
    r[in::num_ks] = SampleRange::log_uniform(1e5);
    r[in::num_as] = SampleRange::log_uniform(1e4);
    r[in::num_cs] = SampleRange::log_uniform(1e3);
    r[in::num_ki] = SampleRange::log_uniform(1e5);
    r[in::num_ai] = SampleRange::log_uniform(1e4);
    r[in::num_ci] = SampleRange::log_uniform(1e3);
    return r;
}

void validate(const GeneratorParams& p) {
    if (p.dt <= 0.0) throw ConfigError("generator: dt must be positive");
    const double rates[] = {p.condensation_rate, p.nucleation_rate, p.nucleation_particle_mass,
                            p.coagulation_rate, p.self_coagulation_rate, p.water_factor};
    for (double r : rates)
        if (r < 0.0) throw ConfigError("generator: rates must be non-negative");
    if (p.nucleation_particle_mass <= 0.0)
        throw ConfigError("generator: nucleation particle mass must be positive");
    for (int i = 0; i < kNumInputs; ++i) {
        const SampleRange& r = p.ranges[i];
        if (r.log_scale) {
            if (r.hi <= 0.0 || r.decades <= 0.0)
                throw ConfigError("generator: degenerate log range for input " +
                                  std::string(variable_schema().input_names[i]));
        } else if (r.lo >= r.hi) {
            throw ConfigError("generator: degenerate range for input " +
                              std::string(variable_schema().input_names[i]));
        }
    }
}

BoxState sample_state(SplitMix64& rng, const GeneratorParams& params) {
    BoxState s;
    for (int i = 0; i < kNumInputs; ++i) {
        const SampleRange& r = params.ranges[i];
        if (r.log_scale) {
            const double hi_exp = std::log10(r.hi);
            s[i] = std::pow(10.0, rng.uniform(hi_exp - r.decades, hi_exp));
        } else {
            s[i] = rng.uniform(r.lo, r.hi);
        }
    }
    return s;
}

std::array<double, kNumOutputs> step(const BoxState& state, const GeneratorParams& p) {
    double v[kNumInputs];
    for (int i = 0; i < kNumInputs; ++i) v[i] = state[i];

    const double dt = p.dt;
    const double gas0 = v[in::h2so4_mass];
    const double rh = v[in::rel_humidity];

    // (1) condensation: gas moves onto soluble modes weighted by their
    // surface proxy a_k * n_k
    double surface[4];
    double total_surface = 0.0;
    for (int k = 0; k < 4; ++k) {
        surface[k] = p.surface_weights[k] * v[kSolubleNumIdx[k]];
        total_surface += surface[k];
    }
    const double phi = 1.0 - std::exp(-p.condensation_rate * total_surface * dt);
    const double condensed = phi * gas0;
    if (total_surface > 0.0) {
        for (int k = 0; k < 4; ++k) v[kSo4Idx[k]] += condensed * (surface[k] / total_surface);
    }
    v[in::h2so4_mass] -= condensed;

    // (2) nucleation, capped by the remaining (1-phi)*g of gas; using the
    // already-subtracted field keeps the residual non-negative in floating
    // point, not just in exact arithmetic
    const double nucleated =
        std::min(v[in::h2so4_mass], p.nucleation_rate * gas0 * gas0 * rh * dt);
    v[in::so4_ns] += nucleated;
    v[in::h2so4_mass] -= nucleated;
    v[in::num_ns] += nucleated / p.nucleation_particle_mass;

    // (3) coagulation chains. psi values and number decrements use the number
    // snapshot at this stage's entry; masses update sequentially edge by edge.
    const double theta = (v[in::temperature] - 190.0) / 120.0;
    const double coag = p.coagulation_rate * (1.0 + theta) * dt;
    double snap_num[kNumInputs];
    for (int i = in::num_ns; i <= in::num_ci; ++i) snap_num[i] = v[i];
    for (const Edge& e : kEdges) {
        const double psi = 1.0 - std::exp(-coag * snap_num[e.recv_num]);
        const double moved = v[e.from] * psi;
        v[e.from] -= moved;
        v[e.to] += moved;
    }
    for (const NumberSink& sink : kNumberSinks) {
        const double psi = 1.0 - std::exp(-coag * snap_num[sink.recv_num]);
        v[sink.num] -= snap_num[sink.num] * psi;
    }

    // (4) self-coagulation on all seven modes; the rational form keeps the
    // decrement below n for any rate
    for (int i = in::num_ns; i <= in::num_ci; ++i) {
        const double n = v[i];
        const double u = p.self_coagulation_rate * n * dt;
        v[i] -= n * u / (1.0 + u);
    }

    // (5) water uptake, full values per soluble mode from the post-step
    // soluble masses residing in that mode
    const double wfac = p.water_factor * rh * rh;
    const double water[4] = {
        wfac * v[in::so4_ns],
        wfac * (v[in::so4_ks] + v[in::bc_ks] + v[in::oc_ks]),
        wfac * (v[in::so4_as] + v[in::bc_as] + v[in::oc_as] + v[in::du_as]),
        wfac * (v[in::so4_cs] + v[in::bc_cs] + v[in::oc_cs] + v[in::du_cs]),
    };

    std::array<double, kNumOutputs> y;
    for (int k = 0; k < kNumTendencies; ++k) y[k] = v[k + 8] - state[k + 8];
    for (int k = 0; k < 4; ++k) y[kNumTendencies + k] = water[k];
    return y;
}

Dataset generate_dataset(std::size_t n, std::uint64_t seed, const GeneratorParams& params) {
    if (n == 0) throw ConfigError("generate_dataset: row count must be >= 1");
    validate(params);

    Dataset ds;
    ds.inputs.resize(n, kNumInputs);
    ds.targets.resize(n, kNumOutputs);
    for (std::size_t r = 0; r < n; ++r) {
        SplitMix64 rng = SplitMix64::substream(seed, r);
        const BoxState x = sample_state(rng, params);
        const auto y = step(x, params);
        double* xi = ds.inputs.row(r);
        double* yi = ds.targets.row(r);
        for (int i = 0; i < kNumInputs; ++i) xi[i] = x[i];
        for (int k = 0; k < kNumOutputs; ++k) yi[k] = y[k];
    }
    ds.meta.seed = seed;
    ds.meta.params_json = params.to_json();
    ds.meta.id = "gen:seed=" + std::to_string(seed) + ":n=" + std::to_string(n);
    return ds;
}

std::string GeneratorParams::to_json() const {
    json j;
    j["dt"] = dt;
    j["condensation_rate"] = condensation_rate;
    j["nucleation_rate"] = nucleation_rate;
    j["nucleation_particle_mass"] = nucleation_particle_mass;
    j["coagulation_rate"] = coagulation_rate;
    j["self_coagulation_rate"] = self_coagulation_rate;
    j["water_factor"] = water_factor;
    j["surface_weights"] = surface_weights;
    json jranges = json::array();
    for (int i = 0; i < kNumInputs; ++i) {
        const SampleRange& r = ranges[i];
        if (r.log_scale)
            jranges.push_back({{"log_cap", r.hi}, {"decades", r.decades}});
        else
            jranges.push_back({{"lo", r.lo}, {"hi", r.hi}});
    }
    j["ranges"] = std::move(jranges);
    return j.dump();
}

GeneratorParams GeneratorParams::from_json(const std::string& text) {
    GeneratorParams p;
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("generator params: ") + e.what());
    }
    p.dt = j.value("dt", p.dt);
    p.condensation_rate = j.value("condensation_rate", p.condensation_rate);
    p.nucleation_rate = j.value("nucleation_rate", p.nucleation_rate);
    p.nucleation_particle_mass = j.value("nucleation_particle_mass", p.nucleation_particle_mass);
    p.coagulation_rate = j.value("coagulation_rate", p.coagulation_rate);
    p.self_coagulation_rate = j.value("self_coagulation_rate", p.self_coagulation_rate);
    p.water_factor = j.value("water_factor", p.water_factor);
    if (j.contains("surface_weights")) {
        auto w = j.at("surface_weights");
        if (!w.is_array() || w.size() != 4)
            throw ConfigError("generator params: surface_weights must have 4 entries");
        for (int k = 0; k < 4; ++k) p.surface_weights[k] = w[k].get<double>();
    }
    if (j.contains("ranges")) {
        auto rs = j.at("ranges");
        if (!rs.is_array() || rs.size() != kNumInputs)
            throw ConfigError("generator params: ranges must have 32 entries");
        for (int i = 0; i < kNumInputs; ++i) {
            const auto& r = rs[i];
            if (r.contains("log_cap"))
                p.ranges[i] = SampleRange::log_uniform(r.at("log_cap").get<double>(),
                                                       r.value("decades", 4.0));
            else
                p.ranges[i] =
                    SampleRange::uniform(r.at("lo").get<double>(), r.at("hi").get<double>());
        }
    }
    validate(p);
    return p;
}

} // namespace aemu
