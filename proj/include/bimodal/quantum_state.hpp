#pragma once

// Quantum state of the excited outgoing modes. Each polarization's excited
// nonmonochromatic mode is the mixed state (1 - eta)|0><0| + eta|1><1|, so
// its Wigner function is the matching convex combination of the vacuum and
// one-photon Gaussians. The joint characteristic function
//
//   C_out = exp[-(n_s + n_p)/2] (1 - |beta_s + beta_p|^2)
//
// does not factorize into s and p parts unless one efficiency vanishes; the
// factorization deviation probes that on a disc of test amplitudes
// proportional to the normalized mode functions.

#include <cmath>
#include <vector>

#include "bimodal/errors.hpp"
#include "bimodal/numerics.hpp"
#include "bimodal/outfield.hpp"

namespace bimodal {

enum class WignerKind { vacuum, one_photon };

inline double wigner_component(WignerKind kind, cplx gamma) {
    const double g2 = std::norm(gamma);
    const double gauss = 2.0 / pi * std::exp(-2.0 * g2);
    return kind == WignerKind::vacuum ? gauss : gauss * (4.0 * g2 - 1.0);
}

struct WignerGridSpec {
    double extent = 4.0;  // grid spans [-extent, extent] in both quadratures
    int n = 161;          // samples per axis
};

struct WignerGrid {
    Polarization polarization = Polarization::s;
    double eta = 0.0;
    double extent = 4.0;
    int n = 0;
    std::vector<double> values;  // row-major over (re, im)

    double at(int ire, int iim) const { return values[ire * n + iim]; }
    double coord(int idx) const { return -extent + 2.0 * extent * idx / (n - 1); }
};

// W = (1 - eta) W_vac + eta W_one on the grid; every other nonmonochromatic
// mode stays in the vacuum.
inline WignerGrid wigner_sigma(double eta, const WignerGridSpec& spec,
                               Polarization q = Polarization::s) {
    if (!(eta >= 0.0 && eta <= 1.0))
        throw ConfigError("efficiency must lie in [0, 1]");
    if (spec.n < 2 || !(spec.extent > 0.0))
        throw ConfigError("invalid Wigner grid");
    WignerGrid grid;
    grid.polarization = q;
    grid.eta = eta;
    grid.extent = spec.extent;
    grid.n = spec.n;
    grid.values.resize(static_cast<std::size_t>(spec.n) * spec.n);
    for (int ire = 0; ire < spec.n; ++ire) {
        for (int iim = 0; iim < spec.n; ++iim) {
            const cplx g{grid.coord(ire), grid.coord(iim)};
            grid.values[static_cast<std::size_t>(ire) * spec.n + iim] =
                (1.0 - eta) * wigner_component(WignerKind::vacuum, g) +
                eta * wigner_component(WignerKind::one_photon, g);
        }
    }
    return grid;
}

// 2D trapezoid of the grid; should be 1 within quadrature accuracy.
inline double wigner_norm(const WignerGrid& grid) {
    const double h = 2.0 * grid.extent / (grid.n - 1);
    double acc = 0.0;
    for (int ire = 0; ire < grid.n; ++ire) {
        const double wr = (ire == 0 || ire == grid.n - 1) ? 0.5 : 1.0;
        for (int iim = 0; iim < grid.n; ++iim) {
            const double wi = (iim == 0 || iim == grid.n - 1) ? 0.5 : 1.0;
            acc += wr * wi * grid.at(ire, iim);
        }
    }
    return acc * h * h;
}

struct OverlapPair {
    cplx beta_s{};
    cplx beta_p{};
};

// Joint characteristic function for test-amplitude overlaps beta_sigma and
// norms n_sigma = int |beta_sigma(w)|^2.
inline double characteristic_out(const OverlapPair& overlaps, double n_s, double n_p) {
    return std::exp(-0.5 * (n_s + n_p)) *
           (1.0 - std::norm(overlaps.beta_s + overlaps.beta_p));
}

// Largest deviation of C_out from the product of its marginals over test
// amplitudes alpha_sigma * F_sigma (|alpha| <= radius, n x n per mode).
// Zero iff at least one efficiency vanishes.
inline double factorization_deviation(const SpectralAmplitude& spec_s,
                                      const SpectralAmplitude& spec_p,
                                      double probe_radius = 2.0, int probe_n = 21) {
    if (std::abs(spec_s.t - spec_p.t) > 1e-12 * std::max(1.0, std::abs(spec_s.t)))
        throw ConfigError("spectra evaluated at different times");
    const double eta_s = spec_s.eta;
    const double eta_p = spec_p.eta;

    std::vector<cplx> disc;
    for (int ix = 0; ix < probe_n; ++ix)
        for (int iy = 0; iy < probe_n; ++iy) {
            const cplx a{-probe_radius + 2.0 * probe_radius * ix / (probe_n - 1),
                         -probe_radius + 2.0 * probe_radius * iy / (probe_n - 1)};
            if (std::abs(a) <= probe_radius) disc.push_back(a);
        }

    const double rs = std::sqrt(eta_s);
    const double rp = std::sqrt(eta_p);
    double worst = 0.0;
    for (const cplx& as : disc) {
        const double ns = std::norm(as);
        const double cs = characteristic_out({as * rs, 0.0}, ns, 0.0);
        for (const cplx& ap : disc) {
            const double np = std::norm(ap);
            const double joint = characteristic_out({as * rs, ap * rp}, ns, np);
            const double cp = characteristic_out({0.0, ap * rp}, 0.0, np);
            worst = std::max(worst, std::abs(joint - cs * cp));
        }
    }
    return worst;
}

} // namespace bimodal
