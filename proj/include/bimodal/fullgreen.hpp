#pragma once

// Full-Green evaluation of the outgoing spectral mode function: the stack's
// Green tensor supplies the frequency response exactly,
//
//   phi_q(w, t)  ~  w^2 / sqrt(c+_q(w)) *
//                   [ int dz eps''(z) (d . G(z_A, z, w)) . g+_q*(z) + flux ]
//                   * conj( int_0^t C2(t') e^{i (w - w21) t'} dt' ),
//
// with the same transparent-exterior flux limits as the out-coupling
// quadrature. The emitter dynamics stays in the pole approximation (the
// kernel is Lorentzian by construction), so C2 comes from the trajectory.
// The overall constant (dipole magnitude, channel normalization) is fixed by
// the ledger sum rule: the spectrum's norm over the window equals
// gamma_q/Gamma_q times the leak integral, exact for a single mode with all
// losses radiative at long times.

#include <cmath>
#include <string>
#include <vector>

#include "bimodal/dynamics.hpp"
#include "bimodal/greens.hpp"
#include "bimodal/outfield.hpp"

namespace bimodal {

inline SpectralAmplitude spectral_amplitude_fullgreen(const EmissionTrajectory& traj,
                                                      const LayerStack& stack,
                                                      const EmitterSpec& emitter,
                                                      const CavityModeSpec& mode,
                                                      const SimGrid& grid) {
    const int j = traj.mode_index(mode.polarization);
    if (j < 0)
        throw ConfigError(std::string("trajectory has no ") + name(mode.polarization) +
                          "-polarization channel");

    // the stack must actually resonate where the mode spec says it does
    const auto poles = find_resonances(stack, mode.polarization, grid.k_transverse,
                                       {grid.omega_min, grid.omega_max});
    const double w0 = mode.resonance.omega;
    bool matched = false;
    for (const auto& p : poles)
        if (std::abs(p.omega - w0) <= 0.5 * std::max(mode.resonance.gamma_total, 1e-12))
            matched = true;
    if (!matched)
        throw NumericalError("stack has no resonance within Gamma/2 of the " +
                             std::string(name(mode.polarization)) + " mode at omega = " +
                             format_double(w0));

    const Vec3c dip{{{emitter.dipole_orientation[0], emitter.dipole_orientation[1],
                      emitter.dipole_orientation[2]}}};

    SpectralAmplitude spec;
    spec.polarization = mode.polarization;
    spec.t = traj.t_max();
    spec.omega21 = traj.omega21;
    spec.gamma_rad = mode.resonance.gamma_rad;
    spec.gamma_total = mode.resonance.gamma_total;
    spec.ledger_target = mode.resonance.gamma_total > 0.0
                             ? mode.resonance.gamma_rad / mode.resonance.gamma_total *
                                   traj.leaked[j].back()
                             : 0.0;

    spec.omega.resize(grid.n_omega);
    spec.phi.resize(grid.n_omega);
    const double dw = grid.d_omega();
    const double dt = traj.dt();

    for (int i = 0; i < grid.n_omega; ++i) {
        const double w = grid.omega_min + i * dw;
        spec.omega[i] = w;

        GreensEvaluator ev(stack, grid.k_transverse, w);
        const int iza = ev.layer_of(emitter.z_position);
        const cplx overlap = ev.lossy_quadrature([&](double z, int layer) {
            const Mat3c g = ev.green_in_layers(emitter.z_position, iza, z, layer);
            const Vec3c gp = ev.g_plus_in_layer(mode.polarization, z, layer);
            return dot(left_apply(dip, g), conj(gp));
        });

        const double cp =
            outcoupling_constant(stack, mode.polarization, grid.k_transverse, w).total;
        if (!(cp > 0.0))
            throw NumericalError("vanishing out-coupling constant at omega = " +
                                 format_double(w));

        const cplx time_part =
            std::conj(detail::windowed_transform(traj.c2, dt, w - traj.omega21));
        spec.phi[i] = w * w / std::sqrt(cp) * overlap * time_part;
    }

    const double raw = spec.window_norm2();
    if (raw > 0.0 && spec.ledger_target > 0.0) {
        const double scale = std::sqrt(spec.ledger_target / raw);
        for (auto& v : spec.phi) v *= scale;
    }
    spec.tail_mass = 0.0;
    spec.eta = spec.window_norm2();

    const double peak2 = [&spec] {
        double mx = 0.0;
        for (const auto& v : spec.phi) mx = std::max(mx, std::norm(v));
        return mx;
    }();
    if (peak2 > 0.0) {
        const double edge2 = std::max(std::norm(spec.phi.front()), std::norm(spec.phi.back()));
        if (edge2 > 1e-4 * peak2)
            throw NumericalError("frequency window too narrow for the full-Green spectrum");
    }
    return spec;
}

} // namespace bimodal
