// oracle.hpp - exact reference propagation of the effective Hamiltonian in a
// truncated Fock space, for certifying variational trajectories at desk scale.

#pragma once

#include <cstddef>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "sbdyn/ansatz.hpp"
#include "sbdyn/tfd.hpp"
#include "sbdyn/trajectory.hpp"

namespace sbdyn {

// --------------------------------- Fock space ---------------------------------

// Truncated product basis: |spin> (x) |n_0> (x) ... (x) |n_{K-1}> with
// 0 <= n_k <= n_max(k).  Spin index 0 is the sigma_z = +1 component.  The
// bosonic index is row-major with the last mode fastest.
struct FockSpace {
    Eigen::VectorXi n_max;        // per-mode cutoff
    std::size_t boson_dim = 1;    // prod(n_max + 1)
    std::size_t dim = 2;          // 2 * boson_dim

    static FockSpace create(const Eigen::VectorXi& n_max,
                            std::size_t dim_cap = 200000);
    static FockSpace uniform(int modes, int n_max,
                             std::size_t dim_cap = 200000);
};

// Sparse matrix of the effective Hamiltonian on the truncated space.
Eigen::SparseMatrix<cd> fock_hamiltonian(const FockSpace& space,
                                         const EffectiveHamiltonian& H);

// Qubit (x) all-mode vacuum.
Eigen::VectorXcd fock_product_start(const FockSpace& space, QubitInit init);

// Embeds a trial state into the Fock basis.  Every per-mode coherent tail
// beyond the cutoff must be below `tail_bound` or the embedding throws,
// naming the worst offending mode.
Eigen::VectorXcd coherent_state_embed(const FockSpace& space,
                                      const MD2State& state,
                                      double tail_bound = 1e-12);

// Exact expectations on a Fock vector (normalized by the vector norm).
double fock_sigma_z(const FockSpace& space, const Eigen::VectorXcd& psi);
double fock_expectation(const Eigen::SparseMatrix<cd>& Hm,
                        const Eigen::VectorXcd& psi);
double fock_expectation_squared(const Eigen::SparseMatrix<cd>& Hm,
                                const Eigen::VectorXcd& psi);

// One step of psi <- exp(-i dt H) psi via a Lanczos-Krylov subspace of
// dimension at most `krylov_dim`; unitary up to roundoff.
void krylov_step(const Eigen::SparseMatrix<cd>& Hm, Eigen::VectorXcd& psi,
                 double dt, int krylov_dim = 20);

// ------------------------------ exact propagation ------------------------------

struct FockConfig {
    EffectiveHamiltonian H;
    int n_max = 4;                 // initial uniform per-mode cutoff
    QubitInit qubit_init = QubitInit::up;
    double dt = 0.01;
    double t_final = 10.0;
    int output_stride = 10;        // record every this many steps
    std::size_t dim_cap = 200000;
    bool certify = true;           // double n_max until sigma_z settles
    double certify_tolerance = 1e-4;
    int krylov_dim = 20;
};

// Propagates qubit (x) vacuum under cfg.H.  With certification enabled the
// cutoff is doubled until consecutive trajectories agree to
// certify_tolerance in max|delta sigma_z|; metadata records `n_max`,
// `cutoff_certified` and `cutoff_bound`.  If doubling would exceed dim_cap
// before certifying, the best available trajectory is returned with
// cutoff_certified=false.
Trajectory exact_propagate(const FockConfig& cfg);

// Same propagation loop from an arbitrary start vector on a fixed space (no
// certification); used for cross-checks against embedded trial states.
Trajectory exact_propagate_vector(const FockSpace& space,
                                  const EffectiveHamiltonian& H,
                                  Eigen::VectorXcd psi, double dt,
                                  double t_final, int output_stride = 10,
                                  int krylov_dim = 20);

} // namespace sbdyn
