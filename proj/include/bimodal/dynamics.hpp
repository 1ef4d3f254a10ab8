#pragma once

// Emitter amplitude dynamics. The memory kernel is a sum of exponentials
// (one per quasi-discrete cavity mode), so the integro-differential equation
//
//   dC2/dt = int_0^t K(t - t') C2(t') dt',
//   K(t)   = -(1/4) sum_j R_j^2 exp(-i (Omega_j - w21) t)
//
// reduces to a local system for C2 and the auxiliary mode amplitudes
// B_j = int_0^t exp(-i (Omega_j - w21)(t - t')) C2(t') dt'. The intracavity
// amplitude is b_j = -i (R_j / 2) B_j, which makes
//
//   |C2|^2 + sum_j |b_j|^2 + sum_j Gamma_j int_0^t |b_j|^2 dt'  ==  1
//
// an exact invariant (the energy ledger) used as the integrator diagnostic.
// A direct product-quadrature Volterra solver is kept as an independent
// cross-validation oracle.

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "bimodal/domain.hpp"
#include "bimodal/errors.hpp"
#include "bimodal/numerics.hpp"

namespace bimodal {

struct EmissionTrajectory {
    std::vector<CavityModeSpec> modes;
    double omega21 = 0.0;
    std::vector<double> times;               // uniform grid 0..t_max
    std::vector<cplx> c2;                    // upper-state amplitude
    std::vector<std::vector<cplx>> b;        // [mode][sample], w21 rotating frame
    std::vector<std::vector<double>> leaked; // Gamma_j * int |b_j|^2
    double dt_effective = 0.0;               // integrator step actually used

    std::size_t samples() const { return times.size(); }
    double dt() const { return times.size() > 1 ? times[1] - times[0] : 0.0; }
    double t_max() const { return times.empty() ? 0.0 : times.back(); }

    int mode_index(Polarization q) const {
        for (std::size_t j = 0; j < modes.size(); ++j)
            if (modes[j].polarization == q) return static_cast<int>(j);
        return -1;
    }

    double ledger_residual_at(std::size_t i) const {
        double acc = std::norm(c2[i]);
        for (std::size_t j = 0; j < modes.size(); ++j)
            acc += std::norm(b[j][i]) + leaked[j][i];
        return std::abs(acc - 1.0);
    }
};

inline cplx kernel_K(const std::vector<CavityModeSpec>& modes, double omega21, double t) {
    cplx acc = 0.0;
    for (const auto& m : modes) {
        const cplx detuning = m.resonance.pole() - omega21;
        acc += m.rabi * m.rabi * std::exp(-iu * detuning * t);
    }
    return -0.25 * acc;
}

// Largest ledger residual along the trajectory.
inline double energy_ledger(const EmissionTrajectory& traj) {
    double mx = 0.0;
    for (std::size_t i = 0; i < traj.samples(); ++i)
        mx = std::max(mx, traj.ledger_residual_at(i));
    return mx;
}

namespace detail {

inline void check_step_resolution(const std::vector<CavityModeSpec>& modes, double omega21,
                                  double dt) {
    double fastest = 0.0;
    for (const auto& m : modes) {
        fastest = std::max(fastest, m.rabi);
        fastest = std::max(fastest, std::abs(m.resonance.omega - omega21));
        fastest = std::max(fastest, m.resonance.gamma_total);
    }
    if (fastest > 0.0 && dt > 0.05 * 2.0 * pi / fastest)
        throw ConfigError("time step " + std::to_string(dt) +
                          " too coarse for fastest scale " + std::to_string(fastest) +
                          " (needs dt <= " + std::to_string(0.05 * 2.0 * pi / fastest) + ")");
}

struct DynState {
    cplx c2{1.0, 0.0};
    std::array<cplx, 2> B{};
    std::array<double, 2> L{};
};

inline DynState axpy(const DynState& y, double h, const DynState& d) {
    DynState out;
    out.c2 = y.c2 + h * d.c2;
    for (int j = 0; j < 2; ++j) {
        out.B[j] = y.B[j] + h * d.B[j];
        out.L[j] = y.L[j] + h * d.L[j];
    }
    return out;
}

} // namespace detail

// Classical fixed-step 4th-order integration of the local system. Starts from
// C2(0) = 1, b(0) = 0; the leak integrals ride along in the integrator state.
// If the ledger residual at the requested step exceeds 1e-8 the step is halved
// (output stays on the requested grid) until it passes or gives up.
inline EmissionTrajectory solve(const std::vector<CavityModeSpec>& modes,
                                const EmitterSpec& emitter, const SimGrid& grid) {
    if (modes.empty() || modes.size() > 2)
        throw ConfigError("solve: scenario requires one or two cavity modes");
    const double dt_req = grid.dt();
    detail::check_step_resolution(modes, emitter.omega21, dt_req);

    const std::size_t nm = modes.size();
    std::array<cplx, 2> decay{};  // -i (Omega_j - w21)
    std::array<double, 2> quart_r2{}, gamma{};
    for (std::size_t j = 0; j < nm; ++j) {
        decay[j] = -iu * (modes[j].resonance.pole() - emitter.omega21);
        quart_r2[j] = 0.25 * modes[j].rabi * modes[j].rabi;
        gamma[j] = modes[j].resonance.gamma_total;
    }

    auto deriv = [&](const detail::DynState& y) {
        detail::DynState d;
        d.c2 = 0.0;
        for (std::size_t j = 0; j < nm; ++j) {
            d.c2 -= quart_r2[j] * y.B[j];
            d.B[j] = y.c2 + decay[j] * y.B[j];
            d.L[j] = gamma[j] * quart_r2[j] * std::norm(y.B[j]);
        }
        return d;
    };

    constexpr double ledger_tol = 1e-8;
    EmissionTrajectory traj;
    traj.modes = modes;
    traj.omega21 = emitter.omega21;

    for (int refine = 1; refine <= 64; refine *= 2) {
        const std::size_t n_out = static_cast<std::size_t>(grid.n_time);
        const double h = dt_req / refine;

        traj.times.assign(n_out + 1, 0.0);
        traj.c2.assign(n_out + 1, cplx{});
        traj.b.assign(nm, std::vector<cplx>(n_out + 1));
        traj.leaked.assign(nm, std::vector<double>(n_out + 1, 0.0));
        traj.dt_effective = h;

        detail::DynState y;
        auto store = [&](std::size_t i, const detail::DynState& s) {
            traj.times[i] = i * dt_req;
            traj.c2[i] = s.c2;
            for (std::size_t j = 0; j < nm; ++j) {
                traj.b[j][i] = -iu * 0.5 * modes[j].rabi * s.B[j];
                traj.leaked[j][i] = s.L[j];
            }
        };
        store(0, y);

        for (std::size_t i = 0; i < n_out; ++i) {
            for (int sub = 0; sub < refine; ++sub) {
                const auto k1 = deriv(y);
                const auto k2 = deriv(detail::axpy(y, 0.5 * h, k1));
                const auto k3 = deriv(detail::axpy(y, 0.5 * h, k2));
                const auto k4 = deriv(detail::axpy(y, h, k3));
                detail::DynState d;
                d.c2 = (k1.c2 + 2.0 * k2.c2 + 2.0 * k3.c2 + k4.c2) / 6.0;
                for (std::size_t j = 0; j < nm; ++j) {
                    d.B[j] = (k1.B[j] + 2.0 * k2.B[j] + 2.0 * k3.B[j] + k4.B[j]) / 6.0;
                    d.L[j] = (k1.L[j] + 2.0 * k2.L[j] + 2.0 * k3.L[j] + k4.L[j]) / 6.0;
                }
                y = detail::axpy(y, h, d);
            }
            store(i + 1, y);
        }

        const double residual = energy_ledger(traj);
        if (residual <= ledger_tol) return traj;
    }
    throw NumericalError("energy ledger drift persists after step refinement; residual " +
                         std::to_string(energy_ledger(traj)));
}

// Independent oracle: trapezoidal product quadrature of the memory integral
// with a predict-correct step. Second-order accurate; O(N^2) in the number of
// steps, so meant for cross-checks rather than production runs.
inline EmissionTrajectory solve_volterra_direct(const std::vector<CavityModeSpec>& modes,
                                                const EmitterSpec& emitter,
                                                const SimGrid& grid) {
    if (modes.empty() || modes.size() > 2)
        throw ConfigError("solve_volterra_direct: scenario requires one or two cavity modes");
    const double dt = grid.dt();
    detail::check_step_resolution(modes, emitter.omega21, dt);

    const std::size_t n = static_cast<std::size_t>(grid.n_time);
    const std::size_t nm = modes.size();

    std::vector<cplx> ker(n + 1);
    for (std::size_t d = 0; d <= n; ++d)
        ker[d] = kernel_K(modes, emitter.omega21, d * dt);

    std::vector<cplx> c2(n + 1);
    c2[0] = 1.0;

    // memory integral at sample m over the filled prefix of c2
    auto memory = [&](std::size_t m) {
        if (m == 0) return cplx{};
        cplx acc = 0.5 * (ker[m] * c2[0] + ker[0] * c2[m]);
        for (std::size_t i = 1; i < m; ++i) acc += ker[m - i] * c2[i];
        return dt * acc;
    };

    for (std::size_t m = 0; m < n; ++m) {
        const cplx f_m = memory(m);
        cplx c_next = c2[m] + dt * f_m;  // predictor
        for (int pass = 0; pass < 2; ++pass) {
            c2[m + 1] = c_next;
            const cplx f_next = memory(m + 1);
            c_next = c2[m] + 0.5 * dt * (f_m + f_next);
        }
        c2[m + 1] = c_next;
    }

    EmissionTrajectory traj;
    traj.modes = modes;
    traj.omega21 = emitter.omega21;
    traj.dt_effective = dt;
    traj.times.resize(n + 1);
    for (std::size_t i = 0; i <= n; ++i) traj.times[i] = i * dt;
    traj.c2 = std::move(c2);
    traj.b.assign(nm, std::vector<cplx>(n + 1));
    traj.leaked.assign(nm, std::vector<double>(n + 1, 0.0));

    for (std::size_t j = 0; j < nm; ++j) {
        const cplx decay = -iu * (modes[j].resonance.pole() - emitter.omega21);
        const cplx step = std::exp(decay * dt);
        const double gq = modes[j].resonance.gamma_total * 0.25 * modes[j].rabi * modes[j].rabi;
        cplx B = 0.0;
        double L = 0.0;
        traj.b[j][0] = 0.0;
        for (std::size_t m = 0; m < n; ++m) {
            const cplx B_next = step * B + 0.5 * dt * (step * traj.c2[m] + traj.c2[m + 1]);
            L += 0.5 * dt * gq * (std::norm(B) + std::norm(B_next));
            B = B_next;
            traj.b[j][m + 1] = -iu * 0.5 * modes[j].rabi * B;
            traj.leaked[j][m + 1] = L;
        }
    }
    return traj;
}

// Closed-form solution for a single exponential kernel term: with
// a = i(w_j - w21) + Gamma_j/2 and lambda+- = (-a +- sqrt(a^2 - R^2))/2,
// C2(t) = (l+ e^{l- t} - l- e^{l+ t}) / (l+ - l-), confluent limit included.
inline cplx analytic_single_mode(const CavityModeSpec& mode, double omega21, double t) {
    const cplx a = iu * (mode.resonance.omega - omega21) + 0.5 * mode.resonance.gamma_total;
    const double r = mode.rabi;
    const cplx disc = std::sqrt(a * a - r * r);
    const cplx lp = 0.5 * (-a + disc);
    const cplx lm = 0.5 * (-a - disc);
    const double scale = std::abs(lp) + std::abs(lm);
    if (std::abs(lp - lm) <= 1e-12 * std::max(scale, 1.0)) {
        const cplx l = 0.5 * (lp + lm);
        return (1.0 - l * t) * std::exp(l * t);
    }
    return (lp * std::exp(lm * t) - lm * std::exp(lp * t)) / (lp - lm);
}

} // namespace bimodal
