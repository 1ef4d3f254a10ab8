#pragma once

// Shared configuration and value types. Frequencies and widths are expressed
// in units of the reference linewidth (the s-mode total width of the bundled
// presets); times in its inverse. The speed of light, hbar, eps0 and mu0 are
// all unity, so lengths carry units of inverse frequency.

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bimodal/errors.hpp"
#include "bimodal/numerics.hpp"

namespace bimodal {

enum class Polarization { s = 0, p = 1 };

inline const char* name(Polarization q) { return q == Polarization::s ? "s" : "p"; }

enum class EvaluationMode { pole_approx, full_green };

// One quasi-discrete cavity resonance.
struct ComplexResonance {
    double omega = 0.0;        // mode frequency
    double gamma_total = 0.0;  // total width
    double gamma_rad = 0.0;    // radiative (out-coupled) part of the width

    cplx pole() const { return {omega, -0.5 * gamma_total}; }
};

struct CavityModeSpec {
    Polarization polarization = Polarization::s;
    ComplexResonance resonance;
    double rabi = 0.0;  // vacuum Rabi frequency of the emitter-mode coupling
};

struct EmitterSpec {
    double omega21 = 0.0;   // transition frequency
    double z_position = 0.0; // axial position inside the stack (full-Green mode)
    std::array<double, 3> dipole_orientation{0.0, 1.0, 0.0}; // unit vector (full-Green mode)
};

// Complex permittivity: constant background plus an optional single-resonance
// absorber pole, eps(w) = bg + S*w0^2 / (w0^2 - w^2 - i*nu*w).
struct Permittivity {
    cplx background{1.0, 0.0};
    double osc_strength = 0.0;
    double osc_omega = 0.0;
    double osc_width = 0.0;

    cplx at(double omega) const {
        cplx eps = background;
        if (osc_strength != 0.0) {
            const double w0sq = osc_omega * osc_omega;
            eps += osc_strength * w0sq / cplx(w0sq - omega * omega, -osc_width * omega);
        }
        return eps;
    }
};

struct Layer {
    std::optional<double> thickness;  // absent: semi-infinite (first/last layer)
    Permittivity permittivity;

    cplx eps(double omega) const { return permittivity.at(omega); }
    double d() const { return thickness.value_or(0.0); }
};

// Planar multilayer. layers[0] is the semi-infinite output half-space; the
// z axis points outward with the outermost interface at z = 0 and the stack
// extending to negative z.
struct LayerStack {
    std::vector<Layer> layers;
    int emitter_layer = 0;

    int n() const { return static_cast<int>(layers.size()) - 1; }

    // interface_z()[j] is the boundary between layer j and layer j+1.
    std::vector<double> interface_z() const {
        std::vector<double> z(layers.size() - 1, 0.0);
        for (std::size_t j = 1; j + 1 < layers.size(); ++j)
            z[j] = z[j - 1] - layers[j].d();
        return z;
    }

    int layer_of(double z) const {
        const auto ifz = interface_z();
        for (std::size_t j = 0; j < ifz.size(); ++j)
            if (z >= ifz[j]) return static_cast<int>(j);
        return n();
    }
};

struct SimGrid {
    double t_max = 10.0;
    int n_time = 10000;       // uniform steps; samples are n_time + 1
    double omega_min = 960.0;
    double omega_max = 1040.0;
    int n_omega = 4001;
    double k_transverse = 0.0;

    double dt() const { return t_max / n_time; }
    double d_omega() const { return (omega_max - omega_min) / (n_omega - 1); }
};

struct ScenarioConfig {
    std::string label;  // preset name or source file
    EmitterSpec emitter;
    std::vector<CavityModeSpec> modes;  // one or two, distinct polarizations
    SimGrid grid;
    EvaluationMode evaluation_mode = EvaluationMode::pole_approx;
    std::optional<LayerStack> stack;  // required in full-Green mode

    const CavityModeSpec* mode(Polarization q) const {
        for (const auto& m : modes)
            if (m.polarization == q) return &m;
        return nullptr;
    }
};

struct ValidationReport {
    std::vector<std::string> violations;
    bool ok() const { return violations.empty(); }
};

// Report-only invariant check; never mutates or throws.
inline ValidationReport validate(const ScenarioConfig& cfg) {
    ValidationReport rep;
    auto fail = [&rep](std::string msg) { rep.violations.push_back(std::move(msg)); };

    if (cfg.emitter.omega21 <= 0.0) fail("emitter transition frequency must be positive");

    if (cfg.modes.empty() || cfg.modes.size() > 2)
        fail("scenario requires one or two cavity modes");
    bool seen[2] = {false, false};
    for (const auto& m : cfg.modes) {
        const auto& r = m.resonance;
        const std::string tag = std::string("mode.") + name(m.polarization) + ": ";
        if (seen[static_cast<int>(m.polarization)])
            fail(tag + "at most one mode per polarization");
        seen[static_cast<int>(m.polarization)] = true;
        if (r.omega <= 0.0) fail(tag + "mode frequency must be positive");
        if (r.gamma_total < 0.0) fail(tag + "total width must be nonnegative");
        if (r.gamma_rad < 0.0) fail(tag + "radiative width must be nonnegative");
        if (r.gamma_rad > r.gamma_total) fail(tag + "radiative width exceeds total");
        if (m.rabi < 0.0) fail(tag + "Rabi frequency must be nonnegative");
    }

    const auto& g = cfg.grid;
    if (!(g.t_max > 0.0)) fail("grid: t_max must be positive");
    if (g.n_time < 2) fail("grid: n_time must be at least 2");
    if (!(g.omega_min < g.omega_max)) fail("grid: omega window must be nonempty");
    if (g.n_omega < 3) fail("grid: n_omega must be at least 3");
    if (g.k_transverse < 0.0) fail("grid: transverse wavevector must be nonnegative");

    if (cfg.evaluation_mode == EvaluationMode::full_green) {
        if (!cfg.stack.has_value()) {
            fail("stack required");
        } else {
            const auto& st = *cfg.stack;
            if (st.n() < 2) fail("stack: needs at least three layers");
            if (!st.layers.empty()) {
                if (st.layers.front().thickness.has_value())
                    fail("stack: first layer must be semi-infinite");
                if (st.layers.back().thickness.has_value())
                    fail("stack: last layer must be semi-infinite");
            }
            for (std::size_t j = 1; j + 1 < st.layers.size(); ++j) {
                if (!st.layers[j].thickness.has_value())
                    fail("stack: interior layer " + std::to_string(j) + " needs a thickness");
                else if (*st.layers[j].thickness < 0.0)
                    fail("stack: interior layer " + std::to_string(j) +
                         " has negative thickness");
            }
            for (std::size_t j = 0; j < st.layers.size(); ++j) {
                const auto& p = st.layers[j].permittivity;
                if (p.background.imag() < 0.0 || p.osc_strength < 0.0 || p.osc_width < 0.0)
                    fail("stack: layer " + std::to_string(j) +
                         " permittivity must have nonnegative absorption");
            }
            if (st.emitter_layer <= 0 || st.emitter_layer >= st.n())
                fail("stack: emitter layer must be strictly interior");
            else {
                const auto ifz = st.interface_z();
                const double top = ifz[st.emitter_layer - 1];
                const double bot = ifz[st.emitter_layer];
                if (!(cfg.emitter.z_position < top && cfg.emitter.z_position > bot))
                    fail("emitter position lies outside its layer");
            }
            const auto& u = cfg.emitter.dipole_orientation;
            const double nrm = std::sqrt(u[0] * u[0] + u[1] * u[1] + u[2] * u[2]);
            if (std::abs(nrm - 1.0) > 1e-9) fail("dipole orientation must be a unit vector");
        }
    }
    return rep;
}

// Bundled reference scenarios. Both couple an emitter at w21 = 1000 to an
// s mode (R = 20, width 1) and a p mode (R = 6, width 1.5); fig1a puts the
// p mode on resonance, fig1b at 990 = w21 - R_s/2, i.e. on the lower Rabi
// sideband of the s mode. All widths are taken fully radiative.
inline ScenarioConfig preset(std::string_view pname) {
    double omega_l = 0.0;
    if (pname == "fig1a")
        omega_l = 1000.0;
    else if (pname == "fig1b")
        omega_l = 990.0;
    else
        throw ConfigError("unknown preset '" + std::string(pname) +
                          "' (available: fig1a, fig1b)");

    ScenarioConfig cfg;
    cfg.label = std::string(pname);
    cfg.emitter.omega21 = 1000.0;
    cfg.modes = {
        CavityModeSpec{Polarization::s, {1000.0, 1.0, 1.0}, 20.0},
        CavityModeSpec{Polarization::p, {omega_l, 1.5, 1.5}, 6.0},
    };
    cfg.grid = SimGrid{10.0, 10000, 960.0, 1040.0, 4001, 0.0};
    cfg.evaluation_mode = EvaluationMode::pole_approx;
    return cfg;
}

} // namespace bimodal
