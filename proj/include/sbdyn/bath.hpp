// bath.hpp - Drude-Lorentz spectral density, quantum noise spectrum,
// bath correlation function, and finite-mode bath discretization schemes.

#pragma once

#include <string>

#include <Eigen/Dense>

#include "sbdyn/common.hpp"

namespace sbdyn {

// ------------------------------ spectral density ------------------------------

// Drude-Lorentz (overdamped) spectral density, extended to an odd function of
// frequency: J(w) = 2 * alpha * omega_c * w / (w^2 + omega_c^2).
struct SpectralDensity {
    double alpha = 0.1;   // dimensionless coupling strength
    double omega_c = 1.0; // cutoff frequency

    double value(double omega) const {
        return 2.0 * alpha * omega_c * omega /
               (omega * omega + omega_c * omega_c);
    }
};

// Quantum (temperature-dressed) noise spectrum
//   S_beta(w) = (1/2pi) J(w) [coth(beta w / 2) + 1],
// finite and positive for all real w, with S_beta(0) = 2 alpha / (pi beta
// omega_c).  Evaluated in branches that avoid overflow for |beta w| >> 1 and
// cancellation near w = 0.
double quantum_noise_spectrum(const SpectralDensity& J, double beta,
                              double omega);

// ---------------------------- correlation function ----------------------------

// Bath correlation function C(t) = Integral_{-W}^{W} S_beta(w) e^{-i w t} dw
// with band edge W = omega_max (composite Simpson rule with `intervals`
// subintervals, compensated summation).
cd bath_correlation_function(const SpectralDensity& J, double beta, double t,
                             double omega_max, int intervals = 20000);

struct BcfGrid {
    Eigen::VectorXd times;
    Eigen::VectorXcd values;
};

// Same integral evaluated on a whole grid of times at once; the spectrum is
// sampled once per quadrature node and reused across times.
BcfGrid bcf_grid(const SpectralDensity& J, double beta,
                 const Eigen::VectorXd& times, double omega_max,
                 int intervals = 20000);

// ------------------------------ discretized bath ------------------------------

// A finite-mode surrogate bath: C_disc(t) = sum_k g_k^2 e^{-i omega_k t} with
// g_k = sqrt(z_k * S_beta(omega_k)) and nonnegative quadrature weights z_k.
struct DiscretizedBath {
    Eigen::VectorXd frequencies; // omega_k, strictly ascending
    Eigen::VectorXd weights;     // z_k >= 0
    Eigen::VectorXd couplings;   // g_k = sqrt(z_k * S_beta(omega_k))
    double beta = 0.0;
    double certification_error = 0.0; // sup-norm BCF error, relative

    int size() const { return static_cast<int>(frequencies.size()); }
    bool has_nonpositive_frequency() const {
        return frequencies.size() > 0 && frequencies.minCoeff() <= 0.0;
    }
    // C_disc evaluated on a grid of times.
    Eigen::VectorXcd correlation(const Eigen::VectorXd& times) const;
};

// Shared knobs for discretization and certification.
struct BathFitOptions {
    double t_max = 10.0;        // correlation-function fit window [0, t_max]
    int n_times = 400;          // sample times on the window (inclusive ends)
    double omega_max = -1.0;    // band edge; negative means 10 * J.omega_c
    int n_candidates = 2000;    // ID candidate frequencies on [-omega_max, omega_max]
    int max_modes = 400;        // cap on the ID rank search
    int quad_intervals = 20000; // Simpson subintervals for the reference BCF
};

// max_t |C_disc(t) - C(t)| / max_t |C(t)| over the fit grid of `opts`.
double bath_certification_error(const DiscretizedBath& bath,
                                const SpectralDensity& J,
                                const BathFitOptions& opts = {});

// Interpolative-decomposition discretization.  Candidate frequencies cover
// [-omega_max, omega_max]; a column-pivoted QR of the stacked (Re, Im)
// correlation matrix ranks them, the retained count grows along the pivot
// order until the certified BCF error drops to `tolerance`, and nonnegative
// weights come from an NNLS fit.  Zero-weight modes are dropped and the
// result is sorted by frequency.  Throws std::runtime_error if the tolerance
// cannot be certified within opts.max_modes retained columns.
DiscretizedBath discretize_id(const SpectralDensity& J, double beta,
                              double tolerance,
                              const BathFitOptions& opts = {});

// Logarithmic baseline: n geometric intervals between omega_min_factor *
// omega_max and omega_max, one mode per interval at the geometric midpoint,
// weight equal to the interval length.  Positive frequencies only.  The
// certification error is recorded but not driven to any target.
DiscretizedBath discretize_log(const SpectralDensity& J, double beta,
                               int n_modes, double omega_min_factor = 1e-3,
                               const BathFitOptions& opts = {});

// ---------------------------------- file IO ----------------------------------

// Plain-text format, one mode per row:
//   # omega_k  z_k  g_k  beta  cert_err
// All values printed with 17 significant digits; beta and cert_err repeat on
// every row so each line is self-contained.
void write_bath(const DiscretizedBath& bath, const std::string& path);
DiscretizedBath read_bath(const std::string& path);

} // namespace sbdyn
