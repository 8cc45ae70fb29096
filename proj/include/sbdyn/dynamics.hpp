// dynamics.hpp - variational equations of motion for the multi-configuration
// coherent-state ansatz: Gram/right-hand-side assembly, ridge least-squares
// velocity solves (iterative production path with a dense spectral fallback),
// fixed-step RK4 propagation, the accuracy deviation sigma^2, the trajectory
// driver, and the two-stage convergence sweep.

#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sbdyn/ansatz.hpp"
#include "sbdyn/tfd.hpp"
#include "sbdyn/trajectory.hpp"

namespace sbdyn {

// ------------------------------ tangent layout -------------------------------
//
// The tangent space of an M-configuration state with K doubled modes is
// spanned by P = 2M + M*K frame directions:
//
//   spin-up amplitude, row r      -> index r
//   spin-down amplitude, row r    -> index M + r
//   displacement (row r, mode k)  -> index 2M + k*M + r   (mode-major)
//
// The frame vectors are |up> Phi_r, |down> Phi_r, and C_r b^dag_k Phi_r with
// C_r = A_r|up> + B_r|down> and Phi_r the coherent configuration.  Writing
// d|D>/dt = sum v_i tau_i, the coefficients relate to the parameter
// derivatives by  v_d(r,k) = d/dt disp(r,k),  v_a(r) = dA_r/dt - mu_r A_r,
// v_b(r) = dB_r/dt - mu_r B_r  with the real normalization drift
// mu_r = Re sum_k v_d(r,k) conj(disp(r,k)).
//
// Rows/columns of EomSystem::gram and all flat velocity vectors follow this
// layout; the displacement block of a flat vector is the column-major M x K
// matrix starting at offset 2M.

inline int eom_dimension(int M, int K) { return 2 * M + M * K; }
inline int up_index(int /*M*/, int r) { return r; }
inline int down_index(int M, int r) { return M + r; }
inline int displacement_index(int M, int r, int k) { return 2 * M + k * M + r; }

// ------------------------------ regularization -------------------------------

inline constexpr double kRidgeStart = 1e-12;
inline constexpr double kRidgeCap = 1e-6;
inline constexpr double kRidgeFactor = 100.0;
// A solution with norm beyond this is treated as divergent at the current
// ridge level.
inline constexpr double kDivergenceNorm = 1e8;
// Largest relative normal-equation residual the iterative solver accepts;
// below this the implied change in the state's time derivative is far under
// the integrator truncation error.  Beyond it the solve defers to the dense
// spectral route.
inline constexpr double kCgAcceptResidual = 1e-9;

// Thrown when the ridge cap is reached and the solve still diverges: the
// occupied manifold cannot support the requested multiplicity (degenerate
// configurations) or the state has collapsed numerically.
struct SolveDivergence : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ------------------------------- linear system -------------------------------

// The velocity solve is the ridge (Tikhonov) least-squares problem
//
//   v = argmin  |gram * v - rhs|^2 + ridge * |v|^2,
//
// i.e. (gram^2 + ridge I) v = gram * rhs, in the tangent layout above.
// Because `gram` is Hermitian positive-semidefinite this damps near-null
// directions toward zero velocity (gauge freedom of barely-occupied
// configurations) instead of amplifying their round-off forcing, while
// leaving well-conditioned directions untouched to O(ridge).  `gram` is
// assembled without the ridge; `rhs` equals -i <tau_i | H | D>.
struct EomSystem {
    Eigen::MatrixXcd gram;
    Eigen::VectorXcd rhs;
    // Starting ridge for solve_eom; updated to the value actually used.
    double regularization = kRidgeStart;
    // Filled by solve_eom from the Gram spectrum (max/min eigenvalue modulus).
    double condition_estimate = 0.0;
};

// Dense assembly.  Both triangles of `gram` are computed independently from
// the defining inner products (not mirrored), so the Hermiticity self-check
// in solve_eom genuinely exercises the assembly.
EomSystem assemble_eom(const MD2State& state, const EffectiveHamiltonian& H);

// Dense reference solve: eigendecomposition of `gram`, spectral filter
// lambda / (lambda^2 + ridge) applied to rhs, with the adaptive ridge policy:
// start at sys.regularization, multiply by kRidgeFactor whenever the solution
// is non-finite or its norm exceeds kDivergenceNorm, stop at ridge_cap.
// Escalations are appended to *events when given.  Throws std::logic_error if
// `gram` fails the Hermiticity self-check (residual > 1e-8 * scale) and
// SolveDivergence when the cap is exhausted.
Eigen::VectorXcd solve_eom(EomSystem& sys,
                           std::vector<std::string>* events = nullptr,
                           double ridge_cap = kRidgeCap);

// ------------------------------ production solve -----------------------------

struct SolveOptions {
    double ridge_start = kRidgeStart;
    double ridge_cap = kRidgeCap;
    // Relative residual target of the iterative path, measured on the
    // regularized normal equations (G^2 + ridge I) v = G w.
    double cg_tolerance = 1e-13;
    int cg_max_iterations = 300;
    // Optional sink for ridge-escalation / fallback notices.
    std::vector<std::string>* events = nullptr;
};

struct FrameSolution {
    Eigen::VectorXcd v;            // frame coefficients of d|D>/dt
    double ridge = 0.0;            // ridge actually used
    double residual = 0.0;         // relative normal-equation residual
    int iterations = 0;            // conjugate-gradient iterations spent
    bool direct_fallback = false;  // dense spectral solve finished the job
};

// Production solve of the ridge least-squares problem without materializing
// G: preconditioned conjugate gradient on (G^2 + ridge I) y = w followed by
// v = G y (equivalent in exact arithmetic, but the trailing G application
// annihilates null-space round-off instead of amplifying it by 1/ridge),
// with the block preconditioner diag(S^2+eI, S^2+eI, (T^2+eI) x I_K), each
// iteration two Gram applications of O(M^2 K).  Convergence is judged on the
// normal-equation residual of v; results worse than kCgAcceptResidual fall
// back to the dense spectral solve.  Ridge policy as in solve_eom.
FrameSolution solve_frame_velocity(const MD2State& state,
                                   const EffectiveHamiltonian& H,
                                   const SolveOptions& opts = {});

// The dense spectral solve used as the fallback, exposed for tests: assembles
// the Gram explicitly and applies the eigenvalue filter at the given ridge
// (no escalation).  O((2M + M K)^3).
Eigen::VectorXcd solve_frame_velocity_direct(const MD2State& state,
                                             const EffectiveHamiltonian& H,
                                             double ridge);

// Gram application y = G v (no ridge) in O(M^2 K), exposed for tests and for
// the deviation bilinear form.
Eigen::VectorXcd apply_gram(const MD2State& state,
                            const EffectiveHamiltonian& H,
                            const Eigen::VectorXcd& v);

// --------------------------- chart <-> frame maps ----------------------------

// Parameter (chart) derivatives recovered from frame coefficients.
struct StateDerivative {
    Eigen::VectorXcd a_dot;
    Eigen::VectorXcd b_dot;
    Eigen::MatrixXcd disp_dot;
};

StateDerivative chart_derivative(const MD2State& state,
                                 const Eigen::VectorXcd& v);
Eigen::VectorXcd frame_velocity(const MD2State& state,
                                const StateDerivative& du);

// --------------------------------- deviation ---------------------------------

// sigma^2 = [<D|H^2|D> - <dD/dt|dD/dt>] / omega0^2 with both bilinear forms
// raw (norm-unnormalized) and <dD/dt|dD/dt> = Re v^dag G v evaluated through
// apply_gram.  For any ridge least-squares velocity, v^dag G v never exceeds
// the unregularized stationary value, so the numerator stays nonnegative up
// to round-off; a result below the cancellation floor -1e-10 * max(1, <H^2>)
// throws a numerical-inconsistency diagnostic and small negative remainders
// are clipped to zero.  (For the degenerate omega0 = 0 case the divisor is 1.)
double deviation_sigma2(const MD2State& state, const EffectiveHamiltonian& H,
                        const Eigen::VectorXcd& v);

// ------------------------------- time stepping -------------------------------

// Classical fixed-step RK4; four assemble+solve stages per call.  The second
// overload reuses an already-solved first stage for `state` (the driver
// solves it anyway to record observables).  Propagates SolveDivergence.
MD2State rk4_step(const MD2State& state, const EffectiveHamiltonian& H,
                  double dt, const SolveOptions& opts = {});
MD2State rk4_step(const MD2State& state, const EffectiveHamiltonian& H,
                  double dt, const FrameSolution& first_stage,
                  const SolveOptions& opts = {});

// ------------------------------ trajectory driver ----------------------------

struct PropagationConfig {
    EffectiveHamiltonian H;
    int multiplicity = 1;
    QubitInit init = QubitInit::up;
    double noise_amplitude = 1e-4;
    std::uint64_t seed = 1;
    double dt = 0.01;
    double t_final = 10.0;
    // Observables and sigma^2 are recorded every `output_stride` steps (and
    // always at t_final); sigma^2 dominates the per-record cost.
    int output_stride = 10;
    double ridge_start = kRidgeStart;
    double ridge_cap = kRidgeCap;
};

// Initializes the state from the config (or takes one explicitly), advances
// to t_final, and records (t, sigma_z, norm, energy, deviation).  On a solve
// abort or loss of finiteness the partial trajectory is returned with an
// "aborted" metadata entry.  Identical configs (including seed) produce
// bitwise-identical trajectories.
Trajectory run_trajectory(const PropagationConfig& config);
Trajectory run_trajectory(const PropagationConfig& config, MD2State state);

// ------------------------------ convergence sweep ----------------------------

struct SweepStage {
    std::vector<int> values;            // parameter values actually run
    std::vector<double> max_diffs;      // sup |sigma_z - sigma_z(next value)|
    std::vector<double> max_deviations; // max_t sigma^2 per run
    int converged = -1;                 // first value passing both tests
};

struct SweepResult {
    SweepStage multiplicity_stage;
    SweepStage bath_stage;
    bool converged = false;
    int converged_multiplicity = -1;
    int converged_bath_size = -1;
};

// Two-stage protocol: hold the bath of `base` fixed and raise the
// multiplicity until consecutive sigma_z series agree within tol_sigma_z
// (sup norm) and max_t sigma^2 < tol_deviation; then hold that multiplicity
// and raise the bath size through `bath_for_size`.  Lists must be
// nondecreasing.  Non-convergence is reported, not thrown.
SweepResult convergence_sweep(
    const PropagationConfig& base, const std::vector<int>& multiplicities,
    const std::function<EffectiveHamiltonian(int)>& bath_for_size,
    const std::vector<int>& bath_sizes, double tol_sigma_z = 0.02,
    double tol_deviation = 1e-2);

} // namespace sbdyn
