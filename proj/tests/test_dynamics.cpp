#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>

#include "bimodal/domain.hpp"
#include "bimodal/dynamics.hpp"

using namespace bimodal;

namespace {

CavityModeSpec mode(Polarization q, double omega, double gamma, double rabi) {
    return {q, {omega, gamma, gamma}, rabi};
}

SimGrid tgrid(double t_max, int n_time) {
    SimGrid g;
    g.t_max = t_max;
    g.n_time = n_time;
    return g;
}

const EmitterSpec emitter{1000.0, 0.0, {0.0, 1.0, 0.0}};

double max_c2_error(const EmissionTrajectory& a, const EmissionTrajectory& b) {
    REQUIRE(a.samples() == b.samples());
    double mx = 0.0;
    for (std::size_t i = 0; i < a.samples(); ++i)
        mx = std::max(mx, std::abs(a.c2[i] - b.c2[i]));
    return mx;
}

} // namespace

TEST_CASE("kernel reduces to the expected closed forms") {
    // no coupling
    const std::vector<CavityModeSpec> off = {mode(Polarization::s, 1000.0, 1.0, 0.0)};
    for (double t : {0.0, 0.3, 2.7}) REQUIRE(std::abs(kernel_K(off, 1000.0, t)) == 0.0);

    // one lossless resonant mode with R = 2: constant kernel -R^2/4 = -1
    const std::vector<CavityModeSpec> flat = {mode(Polarization::s, 1000.0, 0.0, 2.0)};
    for (double t : {0.0, 1.0, 5.5})
        REQUIRE(std::abs(kernel_K(flat, 1000.0, t) - cplx(-1.0, 0.0)) < 1e-14);

    // reference two-mode scenario at t = 0: -(R_s^2 + R_p^2)/4 = -109
    const auto cfg = preset("fig1a");
    REQUIRE(std::abs(kernel_K(cfg.modes, cfg.emitter.omega21, 0.0) - cplx(-109.0, 0.0)) <
            1e-12);

    // detuned preset has the same magnitude at t = 0
    const auto cfgb = preset("fig1b");
    REQUIRE(std::abs(std::abs(kernel_K(cfgb.modes, cfgb.emitter.omega21, 0.0)) - 109.0) <
            1e-12);
}

TEST_CASE("uncoupled emitter stays in the upper state") {
    const std::vector<CavityModeSpec> off = {mode(Polarization::s, 1000.0, 1.0, 0.0)};
    for (auto traj : {solve(off, emitter, tgrid(5.0, 2000)),
                      solve_volterra_direct(off, emitter, tgrid(5.0, 2000))}) {
        for (std::size_t i = 0; i < traj.samples(); ++i) {
            REQUIRE(std::abs(traj.c2[i] - cplx(1.0, 0.0)) < 1e-13);
            REQUIRE(std::abs(traj.b[0][i]) == 0.0);
        }
        REQUIRE(energy_ledger(traj) < 1e-13);
    }
}

TEST_CASE("lossless resonant mode gives vacuum Rabi oscillation") {
    const double R = 20.0;
    const std::vector<CavityModeSpec> m = {mode(Polarization::s, 1000.0, 0.0, R)};
    const auto traj = solve(m, emitter, tgrid(10.0, 10000));
    double worst = 0.0;
    for (std::size_t i = 0; i < traj.samples(); ++i)
        worst = std::max(worst, std::abs(traj.c2[i] - std::cos(0.5 * R * traj.times[i])));
    REQUIRE(worst < 1e-6);

    // |C2| vanishes at t = pi/R
    double near_zero = 1.0;
    for (std::size_t i = 0; i < traj.samples(); ++i)
        if (std::abs(traj.times[i] - pi / R) < 2e-3)
            near_zero = std::min(near_zero, std::abs(traj.c2[i]));
    REQUIRE(near_zero < 1e-2);
}

TEST_CASE("analytic single-mode solution") {
    SECTION("reduces to cos(Rt/2) without losses") {
        const auto m = mode(Polarization::s, 1000.0, 0.0, 20.0);
        for (double t : {0.0, 0.11, 0.5, 1.7})
            REQUIRE(std::abs(analytic_single_mode(m, 1000.0, t) - std::cos(10.0 * t)) <
                    1e-12);
    }
    SECTION("no coupling means no decay") {
        const auto m = mode(Polarization::s, 1000.0, 0.0, 0.0);
        REQUIRE(std::abs(analytic_single_mode(m, 1000.0, 3.0) - cplx(1.0, 0.0)) < 1e-12);
    }
    SECTION("initial conditions") {
        const auto m = mode(Polarization::s, 997.0, 1.3, 15.0);
        REQUIRE(std::abs(analytic_single_mode(m, 1000.0, 0.0) - cplx(1.0, 0.0)) < 1e-14);
        const double h = 1e-6;
        const cplx dot0 = (analytic_single_mode(m, 1000.0, h) -
                           analytic_single_mode(m, 1000.0, 0.0)) /
                          h;
        REQUIRE(std::abs(dot0) < 1e-4);  // C2'(0) = 0
    }
    SECTION("confluent limit matches the generic branch nearby") {
        // a^2 = R^2 at R = Gamma/2 with zero detuning
        const double g = 8.0;
        const auto degenerate = mode(Polarization::s, 1000.0, g, g / 2.0);
        const auto near = mode(Polarization::s, 1000.0, g, g / 2.0 + 1e-7);
        for (double t : {0.1, 0.9, 2.4})
            REQUIRE(std::abs(analytic_single_mode(degenerate, 1000.0, t) -
                             analytic_single_mode(near, 1000.0, t)) < 1e-5);
    }
    SECTION("oscillation extrema follow the e^{-Gamma t/4} envelope") {
        const auto m = mode(Polarization::s, 1000.0, 1.0, 20.0);
        // |C2| extrema sit near t_k = 2 pi k / R where cos(.) = +-1
        for (int k = 1; k <= 6; ++k) {
            double t_ext = 2.0 * pi * k / m.rabi;
            double best = 0.0;
            for (double t = t_ext - 0.02; t <= t_ext + 0.02; t += 1e-4)
                best = std::max(best, std::abs(analytic_single_mode(m, 1000.0, t)));
            const double envelope = std::exp(-m.resonance.gamma_total * t_ext / 4.0);
            REQUIRE(std::abs(best - envelope) < 0.01 * envelope);
        }
    }
}

TEST_CASE("integrator matches the closed form for damped modes") {
    for (double detuning : {0.0, 5.0}) {
        const auto m = mode(Polarization::s, 1000.0 + detuning, 1.0, 20.0);
        const auto traj = solve({m}, emitter, tgrid(10.0, 20000));
        double worst = 0.0;
        for (std::size_t i = 0; i < traj.samples(); ++i)
            worst = std::max(worst, std::abs(traj.c2[i] - analytic_single_mode(
                                                              m, 1000.0, traj.times[i])));
        REQUIRE(worst < 1e-8);
    }
}

TEST_CASE("direct Volterra solver cross-validates the local system") {
    SECTION("lossless cosine zero") {
        const double R = 20.0;
        const auto traj = solve_volterra_direct({mode(Polarization::s, 1000.0, 0.0, R)},
                                                emitter, tgrid(0.2, 2000));
        double at_zero = 1.0;
        for (std::size_t i = 0; i < traj.samples(); ++i)
            if (std::abs(traj.times[i] - pi / R) <= 5.001e-5)
                at_zero = std::abs(traj.c2[i]);
        REQUIRE(at_zero < 1e-3);
    }
    SECTION("agreement on the reference presets") {
        for (const char* nm : {"fig1a", "fig1b"}) {
            const auto cfg = preset(nm);
            const auto a = solve(cfg.modes, cfg.emitter, cfg.grid);
            const auto v = solve_volterra_direct(cfg.modes, cfg.emitter, cfg.grid);
            REQUIRE(max_c2_error(a, v) < 1e-4);
        }
    }
    SECTION("self-convergence at second order") {
        const auto m = mode(Polarization::s, 1002.0, 1.0, 20.0);
        const auto ref = solve({m}, emitter, tgrid(4.0, 64000));  // much finer, 4th order
        double err[2];
        for (int lvl = 0; lvl < 2; ++lvl) {
            const int n = 4000 << lvl;
            const auto v = solve_volterra_direct({m}, emitter, tgrid(4.0, n));
            double mx = 0.0;
            const std::size_t stride = ref.samples() > v.samples()
                                           ? (ref.samples() - 1) / (v.samples() - 1)
                                           : 1;
            for (std::size_t i = 0; i < v.samples(); ++i)
                mx = std::max(mx, std::abs(v.c2[i] - ref.c2[i * stride]));
            err[lvl] = mx;
        }
        const double order = std::log2(err[0] / err[1]);
        REQUIRE(order >= 1.9);
    }
}

TEST_CASE("energy ledger") {
    SECTION("uncoupled case is exact") {
        const auto traj =
            solve({mode(Polarization::s, 1000.0, 1.0, 0.0)}, emitter, tgrid(5.0, 1000));
        REQUIRE(energy_ledger(traj) == 0.0);
    }
    SECTION("presets stay below 1e-9 at the default step") {
        for (const char* nm : {"fig1a", "fig1b"}) {
            const auto cfg = preset(nm);
            const auto traj = solve(cfg.modes, cfg.emitter, cfg.grid);
            REQUIRE(traj.dt_effective == cfg.grid.dt());  // no auto-refinement needed
            REQUIRE(energy_ledger(traj) < 1e-9);
        }
    }
    SECTION("residual shrinks at fourth order") {
        const auto cfg = preset("fig1a");
        const double r1 = energy_ledger(
            solve(cfg.modes, cfg.emitter, tgrid(cfg.grid.t_max, 2500)));
        const double r2 = energy_ledger(
            solve(cfg.modes, cfg.emitter, tgrid(cfg.grid.t_max, 5000)));
        REQUIRE(std::log2(r1 / r2) >= 3.5);
    }
    SECTION("leakage is monotone") {
        const auto cfg = preset("fig1b");
        const auto traj = solve(cfg.modes, cfg.emitter, cfg.grid);
        for (std::size_t j = 0; j < traj.modes.size(); ++j)
            for (std::size_t i = 1; i < traj.samples(); ++i)
                REQUIRE(traj.leaked[j][i] >= traj.leaked[j][i - 1]);
    }
}

TEST_CASE("frame invariance under a common frequency shift") {
    const double shift = 73.123456789;
    auto cfg = preset("fig1b");
    auto shifted = cfg;
    shifted.emitter.omega21 += shift;
    for (auto& m : shifted.modes) m.resonance.omega += shift;

    const auto a = solve(cfg.modes, cfg.emitter, cfg.grid);
    const auto b = solve(shifted.modes, shifted.emitter, shifted.grid);
    double worst = 0.0;
    for (std::size_t i = 0; i < a.samples(); ++i) {
        worst = std::max(worst, std::abs(std::abs(a.c2[i]) - std::abs(b.c2[i])));
        for (std::size_t j = 0; j < a.modes.size(); ++j)
            worst = std::max(worst, std::abs(std::abs(a.b[j][i]) - std::abs(b.b[j][i])));
    }
    REQUIRE(worst < 1e-10);
}

TEST_CASE("too-coarse steps are rejected up front") {
    const auto cfg = preset("fig1a");
    REQUIRE_THROWS_AS(solve(cfg.modes, cfg.emitter, tgrid(10.0, 100)), ConfigError);
    REQUIRE_THROWS_AS(solve_volterra_direct(cfg.modes, cfg.emitter, tgrid(10.0, 100)),
                      ConfigError);
}
