#include <catch2/catch_amalgamated.hpp>

#include "bimodal/domain.hpp"
#include "bimodal/scenario_format.hpp"

using namespace bimodal;

namespace {

bool mentions(const ValidationReport& rep, const std::string& needle) {
    for (const auto& v : rep.violations)
        if (v.find(needle) != std::string::npos) return true;
    return false;
}

LayerStack tiny_stack() {
    LayerStack st;
    Layer vac;
    Layer slab;
    slab.thickness = 0.5;
    slab.permittivity.background = {2.25, 0.05};
    st.layers = {vac, slab, vac};
    st.emitter_layer = 1;
    return st;
}

} // namespace

TEST_CASE("presets carry the reference parameters") {
    const auto a = preset("fig1a");
    const auto b = preset("fig1b");

    REQUIRE(a.emitter.omega21 == 1000.0);
    REQUIRE(a.mode(Polarization::s)->rabi == 20.0);
    REQUIRE(a.mode(Polarization::s)->resonance.gamma_total == 1.0);
    REQUIRE(a.mode(Polarization::p)->rabi == 6.0);
    REQUIRE(a.mode(Polarization::p)->resonance.gamma_total == 1.5);
    REQUIRE(a.mode(Polarization::p)->resonance.omega == 1000.0);
    REQUIRE(b.mode(Polarization::p)->resonance.omega == 990.0);
    REQUIRE(a.grid.t_max == 10.0);
    REQUIRE(a.grid.k_transverse == 0.0);

    // the detuned mode sits exactly on the lower Rabi sideband
    const double lower_peak = a.emitter.omega21 - a.mode(Polarization::s)->rabi / 2.0;
    REQUIRE(b.mode(Polarization::p)->resonance.omega == lower_peak);

    // radiative width defaults to the total
    for (const auto& cfg : {a, b})
        for (const auto& m : cfg.modes)
            REQUIRE(m.resonance.gamma_rad == m.resonance.gamma_total);

    REQUIRE_THROWS_AS(preset("fig1c"), ConfigError);
}

TEST_CASE("presets validate clean") {
    REQUIRE(validate(preset("fig1a")).ok());
    REQUIRE(validate(preset("fig1b")).ok());
}

TEST_CASE("validate flags the spec'd invariant violations") {
    auto cfg = preset("fig1a");
    cfg.modes[0].resonance.gamma_rad = cfg.modes[0].resonance.gamma_total + 0.5;
    REQUIRE(mentions(validate(cfg), "radiative width exceeds total"));

    cfg = preset("fig1a");
    cfg.evaluation_mode = EvaluationMode::full_green;
    REQUIRE(mentions(validate(cfg), "stack required"));

    cfg = preset("fig1a");
    cfg.modes[1].polarization = Polarization::s;
    REQUIRE(mentions(validate(cfg), "at most one mode per polarization"));

    cfg = preset("fig1a");
    cfg.grid.omega_max = cfg.grid.omega_min;
    REQUIRE(mentions(validate(cfg), "omega window"));

    cfg = preset("fig1a");
    cfg.modes[0].rabi = -1.0;
    REQUIRE_FALSE(validate(cfg).ok());
}

TEST_CASE("full-green scenarios validate the stack geometry") {
    auto cfg = preset("fig1a");
    cfg.evaluation_mode = EvaluationMode::full_green;
    cfg.stack = tiny_stack();
    cfg.emitter.z_position = -0.25;
    REQUIRE(validate(cfg).ok());

    auto bad = cfg;
    bad.stack->emitter_layer = 0;
    REQUIRE(mentions(validate(bad), "strictly interior"));

    bad = cfg;
    bad.emitter.z_position = 0.2;
    REQUIRE(mentions(validate(bad), "outside its layer"));

    bad = cfg;
    bad.emitter.dipole_orientation = {0.0, 2.0, 0.0};
    REQUIRE(mentions(validate(bad), "unit vector"));

    bad = cfg;
    bad.stack->layers[1].permittivity.background = {2.25, -0.01};
    REQUIRE(mentions(validate(bad), "nonnegative absorption"));
}

TEST_CASE("scenario text round-trips value-identically") {
    auto cfg = preset("fig1b");
    cfg.evaluation_mode = EvaluationMode::full_green;
    cfg.stack = tiny_stack();
    cfg.stack->layers[1].permittivity.osc_strength = 0.37;
    cfg.stack->layers[1].permittivity.osc_omega = 1001.25;
    cfg.stack->layers[1].permittivity.osc_width = 2.0 / 3.0;
    cfg.emitter.z_position = -1.0 / 3.0;
    cfg.grid.t_max = 10.0 / 3.0;

    const std::string text = serialize_scenario(cfg);
    auto back = parse_scenario_text(text, "roundtrip");

    REQUIRE(back.emitter.omega21 == cfg.emitter.omega21);
    REQUIRE(back.emitter.z_position == cfg.emitter.z_position);
    REQUIRE(back.grid.t_max == cfg.grid.t_max);
    REQUIRE(back.grid.n_time == cfg.grid.n_time);
    REQUIRE(back.modes.size() == cfg.modes.size());
    for (std::size_t i = 0; i < cfg.modes.size(); ++i) {
        REQUIRE(back.modes[i].polarization == cfg.modes[i].polarization);
        REQUIRE(back.modes[i].resonance.omega == cfg.modes[i].resonance.omega);
        REQUIRE(back.modes[i].resonance.gamma_total == cfg.modes[i].resonance.gamma_total);
        REQUIRE(back.modes[i].resonance.gamma_rad == cfg.modes[i].resonance.gamma_rad);
        REQUIRE(back.modes[i].rabi == cfg.modes[i].rabi);
    }
    REQUIRE(back.stack.has_value());
    REQUIRE(back.stack->layers.size() == cfg.stack->layers.size());
    for (std::size_t j = 0; j < cfg.stack->layers.size(); ++j) {
        const auto& x = back.stack->layers[j];
        const auto& y = cfg.stack->layers[j];
        REQUIRE(x.thickness.has_value() == y.thickness.has_value());
        if (y.thickness) REQUIRE(*x.thickness == *y.thickness);
        REQUIRE(x.permittivity.background == y.permittivity.background);
        REQUIRE(x.permittivity.osc_strength == y.permittivity.osc_strength);
        REQUIRE(x.permittivity.osc_omega == y.permittivity.osc_omega);
        REQUIRE(x.permittivity.osc_width == y.permittivity.osc_width);
    }
    REQUIRE(back.stack->emitter_layer == cfg.stack->emitter_layer);

    // serialized form is itself stable
    REQUIRE(serialize_scenario(back) == text);
}

TEST_CASE("parse errors carry line numbers") {
    const std::string bad = "[emitter]\nomega21 = 1000\n[grid]\nt_max == oops\n";
    try {
        parse_scenario_text(bad, "scen.cfg");
        FAIL("expected a parse error");
    } catch (const ConfigError& e) {
        REQUIRE(std::string(e.what()).find("scen.cfg:4") != std::string::npos);
    }

    REQUIRE_THROWS_AS(parse_scenario_text("[mode.s]\nfrequency = 1\n", "x"), ConfigError);
    REQUIRE_THROWS_AS(parse_scenario_text("omega21 = 1\n", "x"), ConfigError);
    REQUIRE_THROWS_AS(parse_scenario_text("[stack.0]\neps = 1\n", "x"), ConfigError);
    REQUIRE_THROWS_AS(parse_scenario_text("[stack.0]\n[stack.2]\neps = 1 0\n", "x"),
                      ConfigError);
}

TEST_CASE("permittivity absorber model is dissipative") {
    Permittivity p;
    p.background = {1.5, 0.0};
    p.osc_strength = 0.8;
    p.osc_omega = 5.0;
    p.osc_width = 0.4;
    for (double w : {0.5, 2.0, 4.9, 5.1, 9.0, 30.0}) REQUIRE(p.at(w).imag() >= 0.0);
    // static limit recovers background + strength
    REQUIRE(std::abs(p.at(0.0) - cplx(2.3, 0.0)) < 1e-12);
}
