// ansatz.hpp - multi-configuration coherent-state trial wavefunction:
// state container, overlap (Debye-Waller) table, observables, spectra,
// initialization, and snapshot IO.

#pragma once

#include <cstdint>
#include <string>

#include <Eigen/Dense>

#include "sbdyn/common.hpp"
#include "sbdyn/tfd.hpp"

namespace sbdyn {

// ----------------------------------- state -----------------------------------

// |D(t)> = sum_r [A_r |+> + B_r |->] (x) |coherent(d_r)>, where d_r is row r
// of `disp` over the K = 2(n_left + n_right) doubled modes, column blocks
// ordered [left real | left tilde | right real | right tilde] to match
// EffectiveHamiltonian.
struct MD2State {
    Eigen::VectorXcd A; // size M, spin-up amplitudes
    Eigen::VectorXcd B; // size M, spin-down amplitudes
    Eigen::MatrixXcd disp; // M x K displacements
    int n_left = 0;
    int n_right = 0;
    double time = 0.0;

    int multiplicity() const { return static_cast<int>(A.size()); }
    int modes() const { return static_cast<int>(disp.cols()); }
};

bool state_is_finite(const MD2State& state);

// Largest displacement modulus within the tilde column blocks (diagnostic for
// the zero-temperature decoupling property).
double max_tilde_displacement(const MD2State& state);

// --------------------------------- overlaps ----------------------------------

// S(r,s) = <config_r | config_s>
//        = exp( -1/2 sum_k |d_rk - d_sk|^2 + i sum_k Im(conj(d_rk) d_sk) ).
// The real part of the exponent is a sum of nonpositive terms, so |S| <= 1 and
// S(r,r) = 1 hold exactly in floating point; the table is exactly Hermitian.
Eigen::MatrixXcd overlap_matrix(const MD2State& state);

// Pairwise kernels shared by observables and equation-of-motion assembly.
// All are M x M over configuration pairs (r = bra row, s = ket column).
struct PairTables {
    Eigen::MatrixXcd S; // overlap
    Eigen::MatrixXcd P; // conj(A_r) A_s + conj(B_r) B_s
    Eigen::MatrixXcd Q; // conj(A_r) B_s + conj(B_r) A_s
    Eigen::MatrixXcd Z; // conj(A_r) A_s - conj(B_r) B_s
    Eigen::MatrixXcd E; // sum_k eps_k conj(d_rk) d_sk
    Eigen::MatrixXcd X; // sum_k c_k (conj(d_rk) + d_sk)
};

PairTables build_pair_tables(const MD2State& state,
                             const EffectiveHamiltonian& H);

// -------------------------------- observables --------------------------------

// <D|D>; strictly positive for nondegenerate states.
double norm_squared(const MD2State& state);
double norm_squared(const PairTables& t);

// <sigma_z> normalized by the state norm.  Throws on zero norm.
double sigma_z_expectation(const MD2State& state);
double sigma_z_expectation(const PairTables& t);

// <H> normalized by the state norm.
double energy_expectation(const MD2State& state,
                          const EffectiveHamiltonian& H);
double energy_expectation(const PairTables& t, double omega0);

// <H^2> normalized by the state norm (factored coherent-state form, cost
// O(M^2 K)).
double energy_squared_expectation(const MD2State& state,
                                  const EffectiveHamiltonian& H);
double energy_squared_expectation(const MD2State& state,
                                  const EffectiveHamiltonian& H,
                                  const PairTables& t);

// ------------------------------- initial state --------------------------------

enum class QubitInit { up, down, plus_x };

// Product state: qubit per `init` on configuration 0, all bath modes at the
// doubled-mode vacuum.  Symmetry-breaking noise (complex values drawn
// uniformly from the disc of radius `noise_amplitude`) fills every
// displacement and the non-dominant amplitudes of whichever qubit components
// `init` populates; the result is normalized.  Deterministic in `seed`.
MD2State initial_state(const EffectiveHamiltonian& H, QubitInit init, int M,
                       double noise_amplitude = 1e-4, std::uint64_t seed = 1);

QubitInit parse_qubit_init(const std::string& name);
std::string qubit_init_name(QubitInit init);

// ------------------------------ series spectrum -------------------------------

// One-sided discrete-Fourier amplitude spectrum of a uniformly sampled real
// series, mean subtracted: omega_j = 2 pi j / (n dt), amplitude_j =
// (2/n)|sum_i x_i e^{-i omega_j t_i}| for j >= 1.  Rejects non-uniform grids.
struct SpectrumTable {
    Eigen::VectorXd omega;
    Eigen::VectorXd amplitude;
};

SpectrumTable series_spectrum(const Eigen::VectorXd& times,
                              const Eigen::VectorXd& values);

// --------------------------------- snapshots ----------------------------------

// Plain-text snapshot: header `# md2-state`, a dimension/time line, then the
// amplitude and displacement rows at 17 significant digits.
void write_state(const MD2State& state, const std::string& path);
MD2State read_state(const std::string& path);

} // namespace sbdyn
