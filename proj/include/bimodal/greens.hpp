#pragma once

// Electromagnetic Green tensor of a planar multilayer in the per-transverse-
// wavevector representation, natural units (c = hbar = eps0 = mu0 = 1).
//
// Geometry: layers 0..n, layer 0 the semi-infinite output half-space, the
// outermost interface at z = 0 and z increasing toward the output. s and p
// channels decouple; within each channel the tensor is assembled from two
// one-dimensional wave families,
//
//   U(z): satisfies the outgoing condition at the top (pure e^{+i beta_0 z}
//         in layer 0), within layer m proportional to
//         e^{+i b_m (z - T_m)} + r_out[m] e^{-i b_m (z - T_m)},
//   W(z): satisfies the decaying/outgoing condition at the bottom,
//         e^{-i b_m (z - B_m)} + r_back[m] e^{+i b_m (z - B_m)},
//
// with generalized reflection coefficients computed by inward recursion from
// the outermost interfaces and amplitude chains fixed by the single-interface
// Fresnel coefficients. For source and observation in layers i and l,
//
//   G_q(z, z') = xi_q * (i / 2 b_l) e^{i b_l d_l} / (D_l a_l c_l)
//                 * U_q(z_>) (x) W_q(z_<),   xi_s = -1, xi_p = +1,
//
// with the polarization vectors attached to each plane-wave component and the
// source-slot vectors evaluated at -k. D_l = 1 - r_out r_back e^{2 i b d} is
// the multilayer denominator whose complex zeros are the cavity resonances.
//
// Transparent semi-infinite exteriors contribute finite boundary-flux terms
// to every eps''-weighted quadrature (the eps'' -> 0+ limit of the absorbing
// exterior): integral eps'' e^{-2 Im(b) s} ds -> Re(b) / w^2 per propagating
// channel. Without these the out-coupling constant and the imaginary-part
// identity are violated at O(1) for leaky cavities.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bimodal/domain.hpp"
#include "bimodal/errors.hpp"
#include "bimodal/format.hpp"
#include "bimodal/numerics.hpp"

namespace bimodal {

struct AxialWave {
    cplx beta;
    int layer = 0;
    double k = 0.0;
    double omega = 0.0;
};

namespace detail {

inline cplx eps_analytic(const Permittivity& p, cplx omega) {
    cplx eps = p.background;
    if (p.osc_strength != 0.0) {
        const double w0sq = p.osc_omega * p.osc_omega;
        eps += p.osc_strength * w0sq / (w0sq - omega * omega - iu * p.osc_width * omega);
    }
    return eps;
}

// Branch with Re >= 0 and Im >= 0 on the physical sheet (eps'' >= 0); the
// principal square root lands there once a signed zero cannot pull the
// argument below the cut.
inline cplx axial_beta(cplx eps, double k, cplx omega) {
    cplx arg = eps * omega * omega - k * k;
    if (arg.imag() == 0.0) arg = cplx(arg.real(), 0.0);
    return std::sqrt(arg);
}

struct Fresnel {
    cplx r, t;
};

inline Fresnel fresnel_rt(Polarization q, cplx eps_a, cplx beta_a, cplx eps_b, cplx beta_b) {
    if (q == Polarization::s) {
        const cplx den = beta_a + beta_b;
        return {(beta_a - beta_b) / den, 2.0 * beta_a / den};
    }
    const cplx den = eps_b * beta_a + eps_a * beta_b;
    return {(eps_b * beta_a - eps_a * beta_b) / den,
            2.0 * std::sqrt(eps_a) * std::sqrt(eps_b) * beta_a / den};
}

} // namespace detail

inline cplx axial_wavenumber(const Layer& layer, double k, double omega) {
    return detail::axial_beta(layer.eps(omega), k, omega);
}

// Single-interface Fresnel coefficients for a wave in layer_a incident on
// layer_b, in the amplitude convention of the polarization unit vectors.
inline std::pair<cplx, cplx> interface_coefficients(Polarization q, const Layer& layer_a,
                                                    const Layer& layer_b, double k,
                                                    double omega) {
    const cplx ea = layer_a.eps(omega);
    const cplx eb = layer_b.eps(omega);
    const auto f = detail::fresnel_rt(q, ea, detail::axial_beta(ea, k, omega), eb,
                                      detail::axial_beta(eb, k, omega));
    return {f.r, f.t};
}

// Generalized multilayer coefficients at (q, k, omega). r_back[j] is the
// reflection seen from layer j looking toward layer n (referenced at the
// layer's bottom boundary), r_out[j] toward layer 0 (top boundary);
// amp_out/amp_back are the transmission amplitude chains anchored at layers
// 0 and n that play the role of the generalized t coefficients.
struct StackCoefficients {
    Polarization q = Polarization::s;
    double k = 0.0;
    double omega = 0.0;
    std::vector<cplx> eps;
    std::vector<cplx> beta;
    std::vector<cplx> r_out;
    std::vector<cplx> r_back;
    std::vector<cplx> D;
    std::vector<cplx> amp_out;   // a_m, a_0 = 1
    std::vector<cplx> amp_back;  // c_m, c_n = 1
    bool degenerate = false;     // some interior |D_j| vanished on the real axis

    int interior_count() const { return static_cast<int>(D.size()) - 2; }
};

namespace detail {

// Common ladder shared by the real-frequency evaluator and the complex-
// frequency pole search: betas, generalized reflections and denominators.
struct Ladder {
    std::vector<cplx> eps, beta, r_out, r_back, D;
};

inline Ladder build_ladder(const LayerStack& stack, Polarization q, double k, cplx omega) {
    const std::size_t nl = stack.layers.size();
    if (nl < 2) throw ConfigError("stack needs at least two layers");
    Ladder L;
    L.eps.resize(nl);
    L.beta.resize(nl);
    for (std::size_t j = 0; j < nl; ++j) {
        L.eps[j] = eps_analytic(stack.layers[j].permittivity, omega);
        L.beta[j] = axial_beta(L.eps[j], k, omega);
    }
    auto phase2 = [&](std::size_t j) {
        return std::exp(2.0 * iu * L.beta[j] * stack.layers[j].d());
    };

    L.r_back.assign(nl, 0.0);
    for (std::size_t j = nl - 1; j-- > 0;) {
        const auto f = fresnel_rt(q, L.eps[j], L.beta[j], L.eps[j + 1], L.beta[j + 1]);
        const cplx rr = L.r_back[j + 1] * phase2(j + 1);
        L.r_back[j] = (f.r + rr) / (1.0 + f.r * rr);
    }
    L.r_out.assign(nl, 0.0);
    for (std::size_t j = 1; j < nl; ++j) {
        const auto f = fresnel_rt(q, L.eps[j], L.beta[j], L.eps[j - 1], L.beta[j - 1]);
        const cplx rr = L.r_out[j - 1] * phase2(j - 1);
        L.r_out[j] = (f.r + rr) / (1.0 + f.r * rr);
    }
    L.D.resize(nl);
    for (std::size_t j = 0; j < nl; ++j)
        L.D[j] = 1.0 - L.r_out[j] * L.r_back[j] * phase2(j);
    return L;
}

} // namespace detail

inline StackCoefficients stack_coefficients(const LayerStack& stack, Polarization q, double k,
                                            double omega) {
    auto L = detail::build_ladder(stack, q, k, cplx(omega, 0.0));
    const std::size_t nl = stack.layers.size();

    StackCoefficients sc;
    sc.q = q;
    sc.k = k;
    sc.omega = omega;
    sc.eps = std::move(L.eps);
    sc.beta = std::move(L.beta);
    sc.r_out = std::move(L.r_out);
    sc.r_back = std::move(L.r_back);
    sc.D = std::move(L.D);

    for (std::size_t j = 1; j + 1 < nl; ++j)
        if (std::abs(sc.D[j]) < 1e-12) sc.degenerate = true;

    sc.amp_out.assign(nl, 1.0);
    for (std::size_t m = 1; m < nl; ++m) {
        const auto f =
            detail::fresnel_rt(q, sc.eps[m], sc.beta[m], sc.eps[m - 1], sc.beta[m - 1]);
        const double d_prev = stack.layers[m - 1].d();
        const cplx ph = std::exp(iu * sc.beta[m - 1] * d_prev);
        const auto f_prev =
            detail::fresnel_rt(q, sc.eps[m - 1], sc.beta[m - 1], sc.eps[m], sc.beta[m]);
        sc.amp_out[m] = sc.amp_out[m - 1] *
                        (1.0 - f_prev.r * sc.r_out[m - 1] * ph * ph) / (f.t * ph);
    }
    sc.amp_back.assign(nl, 1.0);
    for (std::size_t m = nl - 1; m-- > 0;) {
        const auto f =
            detail::fresnel_rt(q, sc.eps[m], sc.beta[m], sc.eps[m + 1], sc.beta[m + 1]);
        const double d_next = stack.layers[m + 1].d();
        const cplx ph = std::exp(iu * sc.beta[m + 1] * d_next);
        const auto f_next =
            detail::fresnel_rt(q, sc.eps[m + 1], sc.beta[m + 1], sc.eps[m], sc.beta[m]);
        sc.amp_back[m] = sc.amp_back[m + 1] *
                         (1.0 - f_next.r * sc.r_back[m + 1] * ph * ph) / (f.t * ph);
    }
    return sc;
}

struct PlanarGreen {
    Mat3c value;
    double z = 0.0, zp = 0.0, k = 0.0, omega = 0.0;
    bool degenerate = false;
};

// Per-(k, omega) evaluator caching both polarization ladders. The transverse
// direction is x; a negative k argument flips it, which is what reciprocity
// relates. The testing-only branch flip conjugates every axial wavenumber to
// provide a negative control for the branch invariant.
class GreensEvaluator {
public:
    GreensEvaluator(const LayerStack& stack, double k, double omega,
                    bool debug_flip_branch = false)
        : stack_(stack), khat_(k < 0.0 ? -1.0 : 1.0), k_(std::abs(k)), omega_(omega),
          ifz_(stack.interface_z()) {
        for (int qi = 0; qi < 2; ++qi) {
            coeff_[qi] = stack_coefficients(stack, static_cast<Polarization>(qi), k_, omega_);
            if (debug_flip_branch)
                for (auto& b : coeff_[qi].beta) b = std::conj(b);
        }
    }

    double omega() const { return omega_; }
    double k_signed() const { return khat_ * k_; }
    const StackCoefficients& coefficients(Polarization q) const {
        return coeff_[static_cast<int>(q)];
    }
    bool degenerate() const { return coeff_[0].degenerate || coeff_[1].degenerate; }

    int layer_of(double z) const { return stack_.layer_of(z); }

    // top boundary of layer m (reference point of the U family)
    double top_of(int m) const { return m == 0 ? 0.0 : ifz_[m - 1]; }
    // bottom boundary of layer m (reference point of the W family)
    double bottom_of(int m) const {
        return m == static_cast<int>(ifz_.size()) ? ifz_.back() : ifz_[m];
    }

    Mat3c green(double z, double zp) const {
        return green_in_layers(z, layer_of(z), zp, layer_of(zp));
    }

    // Green tensor with explicit layer assignments, needed on interfaces.
    Mat3c green_in_layers(double z, int iz, double zp, int izp) const {
        Mat3c out;
        for (int qi = 0; qi < 2; ++qi) {
            const auto q = static_cast<Polarization>(qi);
            if (z >= zp)
                out = out + scalar_norm(q, izp) *
                                Mat3c::outer(u_field(q, z, iz, +1), w_field(q, zp, izp, -1));
            else
                out = out + scalar_norm(q, izp) *
                                Mat3c::outer(w_field(q, z, iz, +1), u_field(q, zp, izp, -1));
        }
        return out;
    }

    // Source-slot vector of the outgoing channel observed just outside the
    // stack: G(0+, z') = sum_q e_q^outgoing (x) g_plus(q, z').
    Vec3c g_plus(Polarization q, double zp) const { return g_plus_in_layer(q, zp, layer_of(zp)); }

    Vec3c g_plus_in_layer(Polarization q, double zp, int izp) const {
        const auto& sc = coeff_[static_cast<int>(q)];
        if (izp == 0 && zp > 0.0) {
            // source above the observation point: reflected outgoing component
            const cplx pref = xi(q) * 0.5 * iu / sc.beta[0] * sc.r_back[0];
            return pref * std::exp(iu * sc.beta[0] * zp) * pol_vector(q, +1, 0, -1);
        }
        return scalar_norm(q, izp) * w_field(q, zp, izp, -1);
    }

    // Outgoing unit vector at the observation side (layer 0, +k direction).
    Vec3c e_out(Polarization q) const { return pol_vector(q, +1, 0, +1); }

    // eps''-weighted quadratures: sum over absorbing layers of
    // int eps''(z) f(z) dz plus the transparent-exterior flux limits
    // Re(beta_E)/w^2 * f(boundary of E). f must accept (z, layer).
    template <class F, class T = decltype(std::declval<F>()(0.0, 0))>
    T lossy_quadrature(F&& f, double abs_tol = 1e-9, double rel_tol = 1e-8) const {
        const int n = static_cast<int>(stack_.layers.size()) - 1;
        T acc{};
        for (int m = 0; m <= n; ++m) {
            const double epp = stack_.layers[m].eps(omega_).imag();
            if (epp > 0.0) {
                double lo, hi;
                if (m == 0) {
                    const double depth = absorbing_depth(0);
                    lo = 0.0;
                    hi = depth;
                } else if (m == n) {
                    const double depth = absorbing_depth(n);
                    hi = bottom_of(n);
                    lo = hi - depth;
                } else {
                    hi = top_of(m);
                    lo = bottom_of(m);
                }
                if (hi > lo)
                    acc = acc + adaptive_simpson(
                                    [&](double z) { return epp * f(z, m); }, lo, hi,
                                    abs_tol, rel_tol);
            } else if (m == 0 || m == n) {
                // transparent exterior: propagating channels contribute the
                // eps'' -> 0+ boundary flux
                const cplx beta = coeff_[0].beta[m];
                if (std::abs(beta.imag()) < 1e-12 * std::abs(beta) && beta.real() > 0.0) {
                    const double zb = (m == 0) ? 0.0 : bottom_of(n);
                    acc = acc + (beta.real() / (omega_ * omega_)) * f(zb, m);
                }
            }
        }
        return acc;
    }

private:
    static cplx xi(Polarization q) { return q == Polarization::s ? cplx(-1.0) : cplx(1.0); }

    double absorbing_depth(int m) const {
        const double im = coeff_[0].beta[m].imag();
        return 16.0 / std::max(im, 1e-6);
    }

    cplx scalar_norm(Polarization q, int src_layer) const {
        const auto& sc = coeff_[static_cast<int>(q)];
        const double d = stack_.layers[src_layer].d();
        return xi(q) * 0.5 * iu / sc.beta[src_layer] *
               std::exp(iu * sc.beta[src_layer] * d) /
               (sc.D[src_layer] * sc.amp_out[src_layer] * sc.amp_back[src_layer]);
    }

    // polarization unit vectors, Eq.-(A8)/(A9) convention; sign < 0 flips the
    // transverse direction (the -k evaluation of the source slot)
    Vec3c pol_vector(Polarization q, int updown, int layer, int sign) const {
        const double s = khat_ * sign;
        if (q == Polarization::s) return {{{0.0, -s, 0.0}}};
        const auto& sc = coeff_[1];
        const cplx kj = std::sqrt(sc.eps[layer]) * omega_;
        return {{{-static_cast<double>(updown) * s * sc.beta[layer] / kj, 0.0, k_ / kj}}};
    }

    Vec3c u_field(Polarization q, double z, int m, int sign) const {
        const auto& sc = coeff_[static_cast<int>(q)];
        const cplx ph = std::exp(iu * sc.beta[m] * (z - top_of(m)));
        Vec3c up = sc.amp_out[m] * ph * pol_vector(q, +1, m, sign);
        if (m > 0 && sc.r_out[m] != cplx(0.0))
            up = up + sc.amp_out[m] * sc.r_out[m] / ph * pol_vector(q, -1, m, sign);
        return up;
    }

    Vec3c w_field(Polarization q, double z, int m, int sign) const {
        const auto& sc = coeff_[static_cast<int>(q)];
        const cplx ph = std::exp(-iu * sc.beta[m] * (z - bottom_of(m)));
        Vec3c dn = sc.amp_back[m] * ph * pol_vector(q, -1, m, sign);
        const int n = static_cast<int>(stack_.layers.size()) - 1;
        if (m < n && sc.r_back[m] != cplx(0.0))
            dn = dn + sc.amp_back[m] * sc.r_back[m] / ph * pol_vector(q, +1, m, sign);
        return dn;
    }

    const LayerStack& stack_;
    double khat_;
    double k_;
    double omega_;
    std::vector<double> ifz_;
    StackCoefficients coeff_[2];
};

inline PlanarGreen green_planar(const LayerStack& stack, double z, double zp, double k,
                                double omega) {
    GreensEvaluator ev(stack, k, omega);
    PlanarGreen g;
    g.value = ev.green(z, zp);
    g.z = z;
    g.zp = zp;
    g.k = k;
    g.omega = omega;
    g.degenerate = ev.degenerate();
    return g;
}

struct OutcouplingConstant {
    double total = 0.0;       // c+_q(k, w)
    double absorbed = 0.0;    // eps''-weighted quadrature part
    double flux_out = 0.0;    // transparent output-side limit term
    double flux_back = 0.0;   // transparent back-side limit term
};

// c+_q(k, w) = 4 pi w^4 [ int dz' eps''(z') |g+_q(z')|^2 + flux terms ];
// for a vacuum output half-space this must equal pi w^2 / beta_0.
inline OutcouplingConstant outcoupling_constant(const LayerStack& stack, Polarization q,
                                                double k, double omega) {
    GreensEvaluator ev(stack, k, omega);
    const double w4 = 4.0 * pi * omega * omega * omega * omega;
    OutcouplingConstant out;

    const int n = static_cast<int>(stack.layers.size()) - 1;
    auto density = [&](double z, int layer) {
        return norm2(ev.g_plus_in_layer(q, z, layer));
    };

    // reuse the shared quadrature but keep the parts separated for reporting
    for (int m = 0; m <= n; ++m) {
        const double epp = stack.layers[m].eps(omega).imag();
        const auto& beta = ev.coefficients(q).beta[m];
        if (epp > 0.0) {
            double lo, hi;
            if (m == 0) {
                lo = 0.0;
                hi = 16.0 / std::max(beta.imag(), 1e-6);
            } else if (m == n) {
                hi = ev.bottom_of(n);
                lo = hi - 16.0 / std::max(beta.imag(), 1e-6);
            } else {
                hi = ev.top_of(m);
                lo = ev.bottom_of(m);
            }
            if (hi > lo)
                out.absorbed += w4 * adaptive_simpson(
                                         [&](double z) { return epp * density(z, m); }, lo,
                                         hi, 1e-9, 1e-8);
        } else if ((m == 0 || m == n) && std::abs(beta.imag()) < 1e-12 * std::abs(beta) &&
                   beta.real() > 0.0) {
            const double zb = (m == 0) ? 0.0 : ev.bottom_of(n);
            const double flux = w4 * beta.real() / (omega * omega) * density(zb, m);
            (m == 0 ? out.flux_out : out.flux_back) += flux;
        }
    }
    out.total = out.absorbed + out.flux_out + out.flux_back;
    if (!std::isfinite(out.total))
        throw NumericalError("out-coupling quadrature diverged");
    return out;
}

// Local coupling profile 4 w sqrt(mu0 / pi hbar) u . Im G(z_A, z_A) . u for a
// unit dipole along u; near-Lorentzian peaks at the cavity resonances.
inline std::vector<double> local_coupling_spectrum(const LayerStack& stack,
                                                   const EmitterSpec& emitter, double k,
                                                   const std::vector<double>& omega_samples) {
    std::vector<double> profile(omega_samples.size());
    const Vec3c u{{{emitter.dipole_orientation[0], emitter.dipole_orientation[1],
                    emitter.dipole_orientation[2]}}};
    for (std::size_t i = 0; i < omega_samples.size(); ++i) {
        const double w = omega_samples[i];
        GreensEvaluator ev(stack, k, w);
        const Mat3c g = ev.green(emitter.z_position, emitter.z_position);
        const cplx contracted = dot(left_apply(u, g), u);
        profile[i] = 4.0 * w / std::sqrt(pi) * contracted.imag();
    }
    return profile;
}

// Complex roots of the multilayer denominator of the emitter's layer,
// located by secant iteration seeded at the real-axis |D| minima.
inline std::vector<ComplexResonance> find_resonances(const LayerStack& stack, Polarization q,
                                                     double k,
                                                     std::pair<double, double> omega_window,
                                                     int n_scan = 2001) {
    const int jcav = stack.emitter_layer;
    if (jcav <= 0 || jcav >= stack.n())
        throw ConfigError("resonance search needs a strictly interior emitter layer");
    auto Dj = [&](cplx omega) {
        return detail::build_ladder(stack, q, k, omega).D[jcav];
    };

    const auto [w_lo, w_hi] = omega_window;
    if (!(w_lo < w_hi) || n_scan < 3) throw ConfigError("invalid resonance scan window");
    const double dw = (w_hi - w_lo) / (n_scan - 1);

    std::vector<double> mag(n_scan);
    for (int i = 0; i < n_scan; ++i) mag[i] = std::abs(Dj(cplx(w_lo + i * dw, 0.0)));

    std::vector<ComplexResonance> found;
    for (int i = 1; i + 1 < n_scan; ++i) {
        if (!(mag[i] < mag[i - 1] && mag[i] < mag[i + 1])) continue;
        cplx x0(w_lo + i * dw, 0.0);
        cplx x1 = x0 + 0.25 * dw;
        cplx f0 = Dj(x0);
        cplx f1 = Dj(x1);
        bool converged = false;
        for (int it = 0; it < 100; ++it) {
            const cplx denom = f1 - f0;
            if (std::abs(denom) == 0.0) break;
            const cplx x2 = x1 - f1 * (x1 - x0) / denom;
            x0 = x1;
            f0 = f1;
            x1 = x2;
            f1 = Dj(x1);
            if (std::abs(x1 - x0) < 1e-10 * std::abs(x1.real())) {
                converged = true;
                break;
            }
        }
        if (!converged)
            throw NumericalError("resonance search did not converge near omega = " +
                                 format_double(w_lo + i * dw));
        if (x1.real() < w_lo || x1.real() > w_hi || x1.imag() > 1e-9 * std::abs(x1.real()))
            continue;  // refined outside the window or on the wrong half-plane
        bool dup = false;
        for (const auto& r : found)
            if (std::abs(r.omega - x1.real()) < 1e-8 * std::abs(x1.real())) dup = true;
        if (dup) continue;
        ComplexResonance res;
        res.omega = x1.real();
        res.gamma_total = std::max(-2.0 * x1.imag(), 0.0);
        res.gamma_rad = res.gamma_total;
        found.push_back(res);
    }
    std::sort(found.begin(), found.end(),
              [](const ComplexResonance& a, const ComplexResonance& b) {
                  return a.omega < b.omega;
              });
    return found;
}

struct FittedMode {
    double alpha = 0.0;
    CavityModeSpec mode;
};

// Least-squares fit of the sampled coupling profile by n_modes Lorentzians
// alpha (Gamma/2) / (pi |w - Omega|^2); R = sqrt(alpha * omega) is the
// vacuum Rabi frequency for the fitted dipole.
inline std::vector<FittedMode> fit_mode_params(const std::vector<double>& omega,
                                               const std::vector<double>& profile,
                                               int n_modes) {
    if (n_modes < 1 || n_modes > 2) throw ConfigError("fit supports one or two modes");
    if (omega.size() != profile.size() || omega.size() < static_cast<std::size_t>(6 * n_modes))
        throw ConfigError("profile too short for the requested fit");
    const std::size_t ns = omega.size();

    double peak = 0.0;
    for (double v : profile) peak = std::max(peak, v);
    if (!(peak > 0.0)) throw NumericalError("profile has no usable peaks to fit");

    // seeds: the n_modes tallest interior maxima with half-width estimates
    struct Seed {
        double w, h, width;
    };
    std::vector<Seed> seeds;
    for (std::size_t i = 1; i + 1 < ns; ++i) {
        if (!(profile[i] > profile[i - 1] && profile[i] > profile[i + 1])) continue;
        if (profile[i] < 0.02 * peak) continue;
        std::size_t l = i, r = i;
        while (l > 0 && profile[l] > 0.5 * profile[i]) --l;
        while (r + 1 < ns && profile[r] > 0.5 * profile[i]) ++r;
        seeds.push_back({omega[i], profile[i], std::max(omega[r] - omega[l], omega[1] - omega[0])});
    }
    std::sort(seeds.begin(), seeds.end(), [](const Seed& a, const Seed& b) { return a.h > b.h; });
    if (static_cast<int>(seeds.size()) < n_modes)
        throw NumericalError("profile has fewer peaks than requested modes");
    seeds.resize(n_modes);

    const int np = 3 * n_modes;  // (alpha, w0, Gamma) per mode
    std::vector<double> th(np);
    for (int m = 0; m < n_modes; ++m) {
        th[3 * m + 1] = seeds[m].w;
        th[3 * m + 2] = seeds[m].width;
        th[3 * m + 0] = seeds[m].h * pi * seeds[m].width / 2.0;
    }

    auto model = [&](double w, const std::vector<double>& p, int m) {
        const double hw = 0.5 * p[3 * m + 2];
        const double dw = w - p[3 * m + 1];
        return p[3 * m] * hw / (pi * (dw * dw + hw * hw));
    };
    auto cost = [&](const std::vector<double>& p) {
        double acc = 0.0;
        for (std::size_t i = 0; i < ns; ++i) {
            double fit = 0.0;
            for (int m = 0; m < n_modes; ++m) fit += model(omega[i], p, m);
            acc += (profile[i] - fit) * (profile[i] - fit);
        }
        return acc;
    };

    double lambda = 1e-3;
    double c0 = cost(th);
    for (int iter = 0; iter < 200; ++iter) {
        std::vector<double> jtj(np * np, 0.0), jtr(np, 0.0);
        for (std::size_t i = 0; i < ns; ++i) {
            double fit = 0.0;
            std::vector<double> grad(np, 0.0);
            for (int m = 0; m < n_modes; ++m) {
                const double a = th[3 * m], w0 = th[3 * m + 1], g = th[3 * m + 2];
                const double hw = 0.5 * g;
                const double dw = omega[i] - w0;
                const double den = dw * dw + hw * hw;
                const double lz = hw / (pi * den);
                fit += a * lz;
                grad[3 * m + 0] = lz;
                grad[3 * m + 1] = a * hw * 2.0 * dw / (pi * den * den);
                grad[3 * m + 2] = a * (0.5 * den - hw * hw) / (pi * den * den);
            }
            const double res = profile[i] - fit;
            for (int r = 0; r < np; ++r) {
                jtr[r] += grad[r] * res;
                for (int c = 0; c < np; ++c) jtj[r * np + c] += grad[r] * grad[c];
            }
        }
        auto damped = jtj;
        for (int r = 0; r < np; ++r) damped[r * np + r] += lambda * (jtj[r * np + r] + 1e-12);
        std::vector<double> step;
        try {
            step = solve_dense(damped, jtr);
        } catch (const NumericalError&) {
            lambda *= 10.0;
            continue;
        }
        auto trial = th;
        double rel = 0.0;
        for (int r = 0; r < np; ++r) {
            trial[r] += step[r];
            rel = std::max(rel, std::abs(step[r]) / std::max(std::abs(th[r]), 1e-12));
        }
        const double c1 = cost(trial);
        if (c1 < c0) {
            th = trial;
            c0 = c1;
            lambda = std::max(lambda * 0.3, 1e-12);
            if (rel < 1e-10) break;
        } else {
            lambda *= 10.0;
            if (lambda > 1e12) break;
        }
    }

    double ref = 0.0;
    for (std::size_t i = 0; i < ns; ++i) ref += profile[i] * profile[i];
    if (c0 > 0.04 * ref)
        throw NumericalError("profile is not Lorentzian-like (relative residual " +
                             format_double(std::sqrt(c0 / ref)) + ")");

    std::vector<FittedMode> out;
    for (int m = 0; m < n_modes; ++m) {
        FittedMode fm;
        fm.alpha = th[3 * m];
        fm.mode.resonance.omega = th[3 * m + 1];
        fm.mode.resonance.gamma_total = std::abs(th[3 * m + 2]);
        fm.mode.resonance.gamma_rad = fm.mode.resonance.gamma_total;
        fm.mode.rabi = std::sqrt(std::max(fm.alpha * fm.mode.resonance.omega, 0.0));
        out.push_back(fm);
    }
    std::sort(out.begin(), out.end(), [](const FittedMode& a, const FittedMode& b) {
        return a.mode.resonance.omega < b.mode.resonance.omega;
    });
    return out;
}

// Relative residual of the per-k imaginary-part identity,
//   w^2 [ int dz' eps'' G(z,z') G(z'',z')^H + flux ] = (G(z,z'') - G(z'',z)^H) / 2i.
inline double verify_im_identity(const LayerStack& stack, double z, double zpp, double k,
                                 double omega, bool debug_flip_branch = false) {
    GreensEvaluator ev(stack, k, omega, debug_flip_branch);
    const Mat3c lhs_int = ev.lossy_quadrature([&](double zp, int layer) {
        const Mat3c ga = ev.green_in_layers(z, ev.layer_of(z), zp, layer);
        const Mat3c gb = ev.green_in_layers(zpp, ev.layer_of(zpp), zp, layer);
        return mul_adjoint(ga, gb);
    });
    const Mat3c lhs = (omega * omega) * lhs_int;
    const Mat3c rhs = (1.0 / (2.0 * iu)) * (ev.green(z, zpp) - adjoint(ev.green(zpp, z)));
    const double scale = max_abs(rhs);
    if (scale == 0.0) return max_abs(lhs);
    return max_abs(lhs - rhs) / scale;
}

// Fraction of the channel's local coupling at z_A that leaves through the
// output half-space; the wanted/unwanted split gamma_q / Gamma_q at omega.
inline double radiative_fraction(const LayerStack& stack, Polarization q, double k,
                                 double omega, double z_a) {
    GreensEvaluator ev(stack, k, omega);
    const Vec3c u = q == Polarization::s ? Vec3c{{{0.0, 1.0, 0.0}}} : Vec3c{{{1.0, 0.0, 0.0}}};
    const int iz = ev.layer_of(z_a);

    auto channel_density = [&](double zp, int layer) {
        const Mat3c g = ev.green_in_layers(z_a, iz, zp, layer);
        return norm2(left_apply(u, g));
    };

    const int n = stack.n();
    double total = 0.0, wanted = 0.0;
    for (int m = 0; m <= n; ++m) {
        const double epp = stack.layers[m].eps(omega).imag();
        const auto& beta = ev.coefficients(q).beta[m];
        if (epp > 0.0) {
            double lo, hi;
            if (m == 0) {
                lo = 0.0;
                hi = 16.0 / std::max(beta.imag(), 1e-6);
            } else if (m == n) {
                hi = ev.bottom_of(n);
                lo = hi - 16.0 / std::max(beta.imag(), 1e-6);
            } else {
                hi = ev.top_of(m);
                lo = ev.bottom_of(m);
            }
            if (hi > lo)
                total += adaptive_simpson([&](double zp) { return epp * channel_density(zp, m); },
                                          lo, hi, 1e-12, 1e-8);
        } else if ((m == 0 || m == n) && std::abs(beta.imag()) < 1e-12 * std::abs(beta) &&
                   beta.real() > 0.0) {
            const double zb = (m == 0) ? 0.0 : ev.bottom_of(n);
            const double flux = beta.real() / (omega * omega) * channel_density(zb, m);
            total += flux;
            if (m == 0) wanted += flux;
        }
    }
    if (!(total > 0.0)) throw NumericalError("channel has no loss at this frequency");
    return wanted / total;
}

} // namespace bimodal
