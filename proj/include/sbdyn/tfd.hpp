// tfd.hpp - thermofield doubling: Bogoliubov angles and the effective
// zero-temperature Hamiltonian built from two discretized baths.

#pragma once

#include <Eigen/Dense>

#include "sbdyn/bath.hpp"

namespace sbdyn {

// ------------------------------ Bogoliubov angles ------------------------------

// theta_k = arctanh(exp(-beta * omega_k / 2)) per mode.  Requires beta > 0 and
// strictly positive mode frequencies; a bath containing a nonpositive
// frequency is rejected with a diagnostic naming the offending mode.
Eigen::VectorXd bogoliubov_angles(const DiscretizedBath& bath, double beta);

struct ThermalBathPair {
    double beta_left = 0.0;
    double beta_right = 0.0;
    Eigen::VectorXd theta_left;  // one angle per left-bath mode
    Eigen::VectorXd theta_right; // one angle per right-bath mode
};

ThermalBathPair make_thermal_pair(const DiscretizedBath& bath_left,
                                  double beta_left,
                                  const DiscretizedBath& bath_right,
                                  double beta_right);

// ---------------------------- effective Hamiltonian ----------------------------

// H = (omega0/2) sigma_z + sum_k epsilon_k b_k^dag b_k
//   + sigma_x sum_k coupling_k (b_k^dag + b_k)
// over K = 2(N_l + N_r) doubled modes.  Column blocks, in order:
//   [left real | left tilde | right real | right tilde]
// Real blocks carry epsilon = +omega and coupling = g cosh(theta); tilde
// blocks carry the exact negation epsilon = -omega and coupling =
// g sinh(theta).
struct EffectiveHamiltonian {
    double omega0 = 1.0;
    int n_left = 0;  // modes of the left physical bath
    int n_right = 0; // modes of the right physical bath
    Eigen::VectorXd epsilon;  // size K, signed mode frequencies
    Eigen::VectorXd coupling; // size K, sigma_x coupling coefficients

    int modes() const { return static_cast<int>(epsilon.size()); }
    bool is_tilde(int kappa) const {
        return (kappa >= n_left && kappa < 2 * n_left) ||
               kappa >= 2 * n_left + n_right;
    }
};

// Assembles the block table above.  Throws std::invalid_argument if an angle
// sequence length does not match its bath's mode count.
EffectiveHamiltonian build_effective_hamiltonian(
    const DiscretizedBath& bath_left, const DiscretizedBath& bath_right,
    const ThermalBathPair& thermal, double omega0 = 1.0);

// Convenience overload computing the angles in place.
EffectiveHamiltonian build_effective_hamiltonian(
    const DiscretizedBath& bath_left, double beta_left,
    const DiscretizedBath& bath_right, double beta_right,
    double omega0 = 1.0);

} // namespace sbdyn
