// tfd.cpp - Bogoliubov angles and effective-Hamiltonian assembly

#include "sbdyn/tfd.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace sbdyn {

Eigen::VectorXd bogoliubov_angles(const DiscretizedBath& bath, double beta) {
    if (beta <= 0.0)
        throw std::invalid_argument("bogoliubov_angles: beta must be > 0");
    Eigen::VectorXd theta(bath.size());
    for (int k = 0; k < bath.size(); ++k) {
        const double w = bath.frequencies(k);
        if (w <= 0.0) {
            std::ostringstream msg;
            msg << "bogoliubov_angles: mode " << k << " has frequency " << w
                << " <= 0; the thermal rotation arctanh(e^{-beta omega/2}) "
                   "requires positive frequencies (rediscretize with a "
                   "positive-frequency scheme)";
            throw std::invalid_argument(msg.str());
        }
        theta(k) = std::atanh(std::exp(-0.5 * beta * w));
    }
    return theta;
}

ThermalBathPair make_thermal_pair(const DiscretizedBath& bath_left,
                                  double beta_left,
                                  const DiscretizedBath& bath_right,
                                  double beta_right) {
    ThermalBathPair pair;
    pair.beta_left = beta_left;
    pair.beta_right = beta_right;
    pair.theta_left = bogoliubov_angles(bath_left, beta_left);
    pair.theta_right = bogoliubov_angles(bath_right, beta_right);
    return pair;
}

EffectiveHamiltonian build_effective_hamiltonian(
    const DiscretizedBath& bath_left, const DiscretizedBath& bath_right,
    const ThermalBathPair& thermal, double omega0) {
    if (thermal.theta_left.size() != bath_left.size() ||
        thermal.theta_right.size() != bath_right.size())
        throw std::invalid_argument(
            "build_effective_hamiltonian: angle sequence lengths do not "
            "match bath mode counts");

    EffectiveHamiltonian H;
    H.omega0 = omega0;
    H.n_left = bath_left.size();
    H.n_right = bath_right.size();
    const int K = 2 * (H.n_left + H.n_right);
    H.epsilon.resize(K);
    H.coupling.resize(K);

    // [left real | left tilde | right real | right tilde]
    for (int k = 0; k < H.n_left; ++k) {
        const double w = bath_left.frequencies(k);
        const double g = bath_left.couplings(k);
        const double th = thermal.theta_left(k);
        H.epsilon(k) = w;
        H.coupling(k) = g * std::cosh(th);
        H.epsilon(H.n_left + k) = -w;
        H.coupling(H.n_left + k) = g * std::sinh(th);
    }
    const int right0 = 2 * H.n_left;
    for (int k = 0; k < H.n_right; ++k) {
        const double w = bath_right.frequencies(k);
        const double g = bath_right.couplings(k);
        const double th = thermal.theta_right(k);
        H.epsilon(right0 + k) = w;
        H.coupling(right0 + k) = g * std::cosh(th);
        H.epsilon(right0 + H.n_right + k) = -w;
        H.coupling(right0 + H.n_right + k) = g * std::sinh(th);
    }
    return H;
}

EffectiveHamiltonian build_effective_hamiltonian(
    const DiscretizedBath& bath_left, double beta_left,
    const DiscretizedBath& bath_right, double beta_right, double omega0) {
    return build_effective_hamiltonian(
        bath_left, bath_right,
        make_thermal_pair(bath_left, beta_left, bath_right, beta_right),
        omega0);
}

} // namespace sbdyn
