#pragma once

// Outgoing spectral mode functions per polarization. In the pole
// approximation the outgoing amplitude is the windowed Fourier transform of
// the intracavity amplitude,
//
//   phi_q(w, t) = sqrt(gamma_q / 2pi) int_0^t b_q(t') e^{i (w - w21) t'} dt',
//
// reported on the absolute frequency axis. The efficiency eta_q(t) is the
// L2 norm of phi over the whole real line; by Parseval it equals
// gamma_q/Gamma_q times the trajectory's leak integral exactly, which is the
// consistency check the acceptance suite enforces. The |phi|^2 tails decay
// only algebraically (the transform window cuts b at t), so the norm is
// computed on a symmetric internally extended grid plus closed-form tail
// terms obtained by integrating the transform by parts twice.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "bimodal/dynamics.hpp"
#include "bimodal/format.hpp"
#include "bimodal/errors.hpp"

namespace bimodal {

struct SpectralAmplitude {
    Polarization polarization = Polarization::s;
    double t = 0.0;        // evaluation time (trajectory end)
    double omega21 = 0.0;
    double gamma_rad = 0.0;
    double gamma_total = 0.0;
    std::vector<double> omega;  // reporting grid
    std::vector<cplx> phi;      // unnormalized amplitude
    double eta = 0.0;           // one-photon efficiency (converged quadrature)
    double tail_mass = 0.0;     // |phi|^2 mass beyond the reporting grid
    double ledger_target = 0.0; // gamma/Gamma * leaked(t), the exact norm

    double window_norm2() const {
        std::vector<double> y(phi.size());
        for (std::size_t i = 0; i < phi.size(); ++i) y[i] = std::norm(phi[i]);
        return trapezoid(y, omega.size() > 1 ? omega[1] - omega[0] : 0.0);
    }
    double max_abs_phi() const {
        double mx = 0.0;
        for (const auto& v : phi) mx = std::max(mx, std::abs(v));
        return mx;
    }
};

namespace detail {

// Trapezoid of b(t') e^{i delta t'} over the stored uniform grid.
inline cplx windowed_transform(const std::vector<cplx>& series, double dt, double delta) {
    const std::size_t n = series.size();
    if (n < 2) return {};
    const cplx step = std::exp(iu * delta * dt);
    cplx acc = 0.5 * series[0];
    cplx ph = step;
    for (std::size_t i = 1; i + 1 < n; ++i) {
        acc += series[i] * ph;
        ph *= step;
    }
    acc += 0.5 * series[n - 1] * ph;
    return dt * acc;
}

} // namespace detail

// Canonical pole-approximation spectrum of one mode, evaluated at the end of
// the trajectory on the grid's frequency window.
inline SpectralAmplitude spectral_amplitude_poleapprox(const EmissionTrajectory& traj,
                                                       const CavityModeSpec& mode,
                                                       const SimGrid& grid) {
    const int j = traj.mode_index(mode.polarization);
    if (j < 0)
        throw ConfigError(std::string("trajectory has no ") + name(mode.polarization) +
                          "-polarization channel");
    const double gamma = mode.resonance.gamma_rad;
    const double Gamma = mode.resonance.gamma_total;
    if (gamma > Gamma) throw ConfigError("radiative width exceeds total");

    SpectralAmplitude spec;
    spec.polarization = mode.polarization;
    spec.t = traj.t_max();
    spec.omega21 = traj.omega21;
    spec.gamma_rad = gamma;
    spec.gamma_total = Gamma;
    spec.ledger_target = Gamma > 0.0 ? gamma / Gamma * traj.leaked[j].back() : 0.0;

    spec.omega.resize(grid.n_omega);
    spec.phi.resize(grid.n_omega);
    const double dw = grid.d_omega();
    const double pref = std::sqrt(gamma / (2.0 * pi));
    const auto& series = traj.b[j];
    const double dt = traj.dt();
    for (int i = 0; i < grid.n_omega; ++i) {
        spec.omega[i] = grid.omega_min + i * dw;
        spec.phi[i] =
            pref * detail::windowed_transform(series, dt, spec.omega[i] - traj.omega21);
    }

    const double peak2 = [&spec] {
        double mx = 0.0;
        for (const auto& v : spec.phi) mx = std::max(mx, std::norm(v));
        return mx;
    }();

    if (peak2 > 0.0) {
        const double edge2 = std::max(std::norm(spec.phi.front()), std::norm(spec.phi.back()));
        if (edge2 > 1e-4 * peak2)
            throw NumericalError("frequency window too narrow: boundary |phi|^2 is " +
                                 format_double(edge2 / peak2) +
                                 " of the peak (limit 1e-4); widen the omega window");
    }

    // Norm with symmetric extension about w21 plus closed-form tails.
    double norm2 = spec.window_norm2();
    spec.tail_mass = 0.0;
    if (peak2 > 0.0 && gamma > 0.0) {
        const double x_lo = traj.omega21 - grid.omega_min;
        const double x_hi = grid.omega_max - traj.omega21;
        const double X = std::max({320.0, x_lo, x_hi});
        const double dx = 0.04;
        auto extension = [&](double from, double to) {
            // |phi|^2 integrated over [from, to] (absolute frequencies)
            if (to - from < dx) return 0.0;
            const int nseg = static_cast<int>(std::ceil((to - from) / dx));
            std::vector<double> y(nseg + 1);
            for (int i = 0; i <= nseg; ++i) {
                const double w = from + (to - from) * i / nseg;
                y[i] = std::norm(pref * detail::windowed_transform(series, dt, w - traj.omega21));
            }
            return trapezoid(y, (to - from) / nseg);
        };
        double ext = extension(traj.omega21 - X, grid.omega_min) +
                     extension(grid.omega_max, traj.omega21 + X);

        // Integration by parts of the transform: the |b(t)|^2/X and
        // (|b'(t)|^2+|b'(0)|^2)/(3X^3) tail masses beyond +-X; the odd 1/X^3
        // cross term cancels over the symmetric domain.
        const cplx decay = -iu * (mode.resonance.pole() - traj.omega21);
        const cplx b_end = series.back();
        const cplx bdot_end = -iu * 0.5 * mode.rabi * traj.c2.back() + decay * b_end;
        const cplx bdot_0 = -iu * 0.5 * mode.rabi;  // C2(0) = 1, b(0) = 0
        const double tail = gamma / pi *
                            (std::norm(b_end) / X +
                             (std::norm(bdot_end) + std::norm(bdot_0)) / (3.0 * X * X * X));
        spec.tail_mass = ext + tail;
    }
    spec.eta = norm2 + spec.tail_mass;
    return spec;
}

// eta as the omega quadrature of |phi|^2, verified against the exact ledger
// value (Parseval for the windowed transform).
inline double efficiency_eta(const SpectralAmplitude& spec) {
    const double eta = spec.window_norm2() + spec.tail_mass;
    const double tol = std::max(1e-6 * eta, 1e-15);
    if (std::abs(eta - spec.ledger_target) > tol)
        throw NumericalError("Parseval residual " + format_double(std::abs(eta - spec.ledger_target)) +
                             " exceeds tolerance " + format_double(tol) +
                             "; frequency grid inconsistent with the trajectory");
    return eta;
}

inline SpectralAmplitude normalized_mode_function(const SpectralAmplitude& spec) {
    if (!(spec.eta > 0.0))
        throw NumericalError("mode function undefined: zero efficiency");
    SpectralAmplitude out = spec;
    const double s = 1.0 / std::sqrt(spec.eta);
    for (auto& v : out.phi) v *= s;
    out.tail_mass = spec.tail_mass / spec.eta;
    return out;
}

struct SpectralPeak {
    double omega = 0.0;
    double height = 0.0;
    double prominence = 0.0;
};

// Local maxima of |phi| with both height and topographic prominence at least
// threshold_fraction of the global maximum; positions refined by a parabola
// through the three nearest samples. The prominence filter is what rejects
// the 2pi/t ringing of the finite-time transform.
inline std::vector<SpectralPeak> peak_report(const SpectralAmplitude& spec,
                                             double threshold_fraction = 0.05) {
    if (!(threshold_fraction > 0.0 && threshold_fraction < 1.0))
        throw ConfigError("peak threshold must lie in (0, 1)");
    const std::size_t n = spec.phi.size();
    std::vector<double> y(n);
    double global_max = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = std::abs(spec.phi[i]);
        global_max = std::max(global_max, y[i]);
    }
    std::vector<SpectralPeak> peaks;
    if (global_max <= 0.0 || n < 3) return peaks;
    const double floor = threshold_fraction * global_max;

    for (std::size_t i = 1; i + 1 < n; ++i) {
        if (!(y[i] > y[i - 1] && y[i] > y[i + 1])) continue;
        if (y[i] < floor) continue;
        double low_left = y[i];
        for (std::size_t j = i; j-- > 0;) {
            if (y[j] > y[i]) break;
            low_left = std::min(low_left, y[j]);
        }
        double low_right = y[i];
        for (std::size_t j = i + 1; j < n; ++j) {
            if (y[j] > y[i]) break;
            low_right = std::min(low_right, y[j]);
        }
        const double prominence = y[i] - std::max(low_left, low_right);
        if (prominence < floor) continue;

        const double denom = y[i - 1] - 2.0 * y[i] + y[i + 1];
        double shift = 0.0, refined = y[i];
        if (denom < 0.0) {
            shift = 0.5 * (y[i - 1] - y[i + 1]) / denom;
            refined = y[i] - 0.25 * (y[i - 1] - y[i + 1]) * shift;
        }
        const double dw = spec.omega[1] - spec.omega[0];
        peaks.push_back({spec.omega[i] + shift * dw, refined, prominence});
    }
    std::sort(peaks.begin(), peaks.end(),
              [](const SpectralPeak& a, const SpectralPeak& b) { return a.omega < b.omega; });
    return peaks;
}

} // namespace bimodal
