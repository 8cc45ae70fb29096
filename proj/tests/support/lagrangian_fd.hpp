// Finite-difference Euler-Lagrange oracle for the variational equations of
// motion.  Everything here is computed from a self-contained evaluation of
// the action Lagrangian
//
//   L(u, udot) = -Im <D|dD/dt> - <D|H|D>
//
// written directly from coherent-state matrix elements with explicit loops,
// so it shares no code with the assembled Gram / right-hand-side under test.
// The check: for every chart coordinate u_i,
//
//   d/dt (dL/d conj(udot_i)) - dL/d conj(u_i)   [central finite differences]
//
// must equal the same row assembled from the EOM system.  The chart layout
// matches the tangent layout (A_r -> r, B_r -> M+r, disp(r,k) -> 2M+k*M+r).

#pragma once

#include <complex>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "sbdyn/ansatz.hpp"
#include "sbdyn/dynamics.hpp"
#include "sbdyn/tfd.hpp"

namespace sbdyn::testsupport {

using cd = std::complex<double>;

// ------------------------------ chart packing --------------------------------

inline Eigen::VectorXcd pack_state(const MD2State& s) {
    const int M = s.multiplicity();
    const int K = s.modes();
    Eigen::VectorXcd u(eom_dimension(M, K));
    u.segment(0, M) = s.A;
    u.segment(M, M) = s.B;
    Eigen::Map<Eigen::MatrixXcd>(u.data() + 2 * M, M, K) = s.disp;
    return u;
}

inline MD2State unpack_state(const Eigen::VectorXcd& u, const MD2State& like) {
    const int M = like.multiplicity();
    const int K = like.modes();
    MD2State s = like;
    s.A = u.segment(0, M);
    s.B = u.segment(M, M);
    s.disp = Eigen::Map<const Eigen::MatrixXcd>(u.data() + 2 * M, M, K);
    return s;
}

inline StateDerivative unpack_derivative(const Eigen::VectorXcd& ud, int M,
                                         int K) {
    StateDerivative d;
    d.a_dot = ud.segment(0, M);
    d.b_dot = ud.segment(M, M);
    d.disp_dot = Eigen::Map<const Eigen::MatrixXcd>(ud.data() + 2 * M, M, K);
    return d;
}

// --------------------------- independent Lagrangian --------------------------

// <Phi_j | Phi_i> for normalized coherent configurations.
inline cd coherent_overlap(const Eigen::MatrixXcd& d, int j, int i) {
    cd expo = 0.0;
    for (int k = 0; k < d.cols(); ++k)
        expo += std::conj(d(j, k)) * d(i, k) -
                0.5 * (std::norm(d(j, k)) + std::norm(d(i, k)));
    return std::exp(expo);
}

// <D|H|D>, raw (not norm-normalized), from first-quantized matrix elements.
inline double raw_energy(const MD2State& s, const EffectiveHamiltonian& H) {
    const int M = s.multiplicity();
    const int K = s.modes();
    cd total = 0.0;
    for (int j = 0; j < M; ++j) {
        for (int i = 0; i < M; ++i) {
            const cd S = coherent_overlap(s.disp, j, i);
            const cd pop = std::conj(s.A(j)) * s.A(i) + std::conj(s.B(j)) * s.B(i);
            const cd flip = std::conj(s.A(j)) * s.B(i) + std::conj(s.B(j)) * s.A(i);
            cd bath = 0.0, drive = 0.0;
            for (int k = 0; k < K; ++k) {
                bath += H.epsilon(k) * std::conj(s.disp(j, k)) * s.disp(i, k);
                drive += H.coupling(k) * (std::conj(s.disp(j, k)) + s.disp(i, k));
            }
            const cd spin_z = std::conj(s.A(j)) * s.A(i) - std::conj(s.B(j)) * s.B(i);
            total += S * (0.5 * H.omega0 * spin_z + pop * bath + flip * drive);
        }
    }
    return std::real(total);
}

// <D|dD/dt> for chart velocities (Adot, Bdot, ddot).
inline cd braket_ddt(const MD2State& s, const StateDerivative& du) {
    const int M = s.multiplicity();
    const int K = s.modes();
    cd total = 0.0;
    for (int i = 0; i < M; ++i) {
        cd mu = 0.0;
        for (int k = 0; k < K; ++k)
            mu += 0.5 * (du.disp_dot(i, k) * std::conj(s.disp(i, k)) +
                         std::conj(du.disp_dot(i, k)) * s.disp(i, k));
        for (int j = 0; j < M; ++j) {
            const cd S = coherent_overlap(s.disp, j, i);
            const cd pop = std::conj(s.A(j)) * s.A(i) + std::conj(s.B(j)) * s.B(i);
            cd kin = 0.0;
            for (int k = 0; k < K; ++k)
                kin += std::conj(s.disp(j, k)) * du.disp_dot(i, k);
            total += S * (std::conj(s.A(j)) * du.a_dot(i) +
                          std::conj(s.B(j)) * du.b_dot(i) + pop * (kin - mu));
        }
    }
    return total;
}

inline double lagrangian(const MD2State& like, const EffectiveHamiltonian& H,
                         const Eigen::VectorXcd& u, const Eigen::VectorXcd& ud) {
    const MD2State s = unpack_state(u, like);
    const StateDerivative du =
        unpack_derivative(ud, like.multiplicity(), like.modes());
    return -std::imag(braket_ddt(s, du)) - raw_energy(s, H);
}

// --------------------------- finite-difference side --------------------------

// dL/d conj(udot_i): L is real-linear in udot, so the conjugate momentum is
// read off exactly from two evaluations per coordinate (no differencing):
// writing L_kin = sum_i [a_i udot_i + conj(a_i udot_i)],
//   a_i = [K(e_i) - i K(i e_i)] / 2  with K(ud) = L(u, ud) + E(u),
// and dL/d conj(udot_i) = conj(a_i).
inline Eigen::VectorXcd conjugate_momentum(const MD2State& like,
                                           const EffectiveHamiltonian& H,
                                           const Eigen::VectorXcd& u) {
    const int P = static_cast<int>(u.size());
    const MD2State s = unpack_state(u, like);
    const double energy = raw_energy(s, H);
    Eigen::VectorXcd g(P);
    Eigen::VectorXcd ud = Eigen::VectorXcd::Zero(P);
    for (int i = 0; i < P; ++i) {
        ud(i) = 1.0;
        const double kr = lagrangian(like, H, u, ud) + energy;
        ud(i) = cd(0.0, 1.0);
        const double ki = lagrangian(like, H, u, ud) + energy;
        ud(i) = 0.0;
        g(i) = std::conj(0.5 * cd(kr, -ki));
    }
    return g;
}

// Euler-Lagrange rows d/dt dL/d(conj udot) - dL/d(conj u) by central finite
// differences in the state coordinates, evaluated at chart velocity ud.
inline Eigen::VectorXcd euler_lagrange_fd(const MD2State& like,
                                          const EffectiveHamiltonian& H,
                                          const Eigen::VectorXcd& u,
                                          const Eigen::VectorXcd& ud,
                                          double h = 1e-6) {
    const int P = static_cast<int>(u.size());
    Eigen::VectorXcd rows = Eigen::VectorXcd::Zero(P);

    // d/dt g_i = sum_j [dg_i/du_j udot_j + dg_i/dconj(u_j) conj(udot_j)],
    // with the Wirtinger derivatives of the whole momentum vector taken one
    // displaced evaluation at a time.
    for (int j = 0; j < P; ++j) {
        Eigen::VectorXcd up = u, um = u;
        up(j) += h;
        um(j) -= h;
        const Eigen::VectorXcd gx =
            (conjugate_momentum(like, H, up) - conjugate_momentum(like, H, um)) /
            (2.0 * h);
        up = u; um = u;
        up(j) += cd(0.0, h);
        um(j) -= cd(0.0, h);
        const Eigen::VectorXcd gy =
            (conjugate_momentum(like, H, up) - conjugate_momentum(like, H, um)) /
            (2.0 * h);
        const Eigen::VectorXcd du_j = 0.5 * (gx - cd(0.0, 1.0) * gy);
        const Eigen::VectorXcd dubar_j = 0.5 * (gx + cd(0.0, 1.0) * gy);
        rows += du_j * ud(j) + dubar_j * std::conj(ud(j));
    }

    // - dL/d conj(u_i) at fixed udot: for real L,
    // dL/dconj(u_i) = (dL/dx_i + i dL/dy_i) / 2.
    for (int i = 0; i < P; ++i) {
        Eigen::VectorXcd up = u, um = u;
        up(i) += h;
        um(i) -= h;
        const double lx = (lagrangian(like, H, up, ud) -
                           lagrangian(like, H, um, ud)) / (2.0 * h);
        up = u; um = u;
        up(i) += cd(0.0, h);
        um(i) -= cd(0.0, h);
        const double ly = (lagrangian(like, H, up, ud) -
                           lagrangian(like, H, um, ud)) / (2.0 * h);
        rows(i) -= 0.5 * cd(lx, ly);
    }
    return rows;
}

// ------------------------------ assembled side -------------------------------

// The same Euler-Lagrange rows built from the assembled EOM system.  With the
// frame residual R = -i G v + h (v the frame coefficients of ud, h = i rhs):
// amplitude rows are R directly; displacement rows carry the coherent-state
// normalization anomaly  R_d(j,k) - disp(j,k) * Re[conj(A_j) R_a(j) +
// conj(B_j) R_b(j)].
inline Eigen::VectorXcd euler_lagrange_assembled(const MD2State& s,
                                                 const EffectiveHamiltonian& H,
                                                 const Eigen::VectorXcd& ud) {
    const int M = s.multiplicity();
    const int K = s.modes();
    EomSystem sys = assemble_eom(s, H);
    const Eigen::VectorXcd v =
        frame_velocity(s, unpack_derivative(ud, M, K));
    const Eigen::VectorXcd h = cd(0.0, 1.0) * sys.rhs;
    const Eigen::VectorXcd R = cd(0.0, -1.0) * (sys.gram * v) + h;

    Eigen::VectorXcd rows = R;
    for (int j = 0; j < M; ++j) {
        const double anomaly =
            std::real(std::conj(s.A(j)) * R(up_index(M, j)) +
                      std::conj(s.B(j)) * R(down_index(M, j)));
        for (int k = 0; k < K; ++k)
            rows(displacement_index(M, j, k)) -= s.disp(j, k) * anomaly;
    }
    return rows;
}

// ------------------------------ random fixtures ------------------------------

inline MD2State random_state(int M, int n_left, int n_right, std::mt19937_64& rng,
                             double amp_scale = 1.0, double disp_scale = 0.6) {
    std::normal_distribution<double> g(0.0, 1.0);
    MD2State s;
    s.n_left = n_left;
    s.n_right = n_right;
    s.time = 0.0;
    const int K = 2 * (n_left + n_right);
    s.A.resize(M);
    s.B.resize(M);
    s.disp.resize(M, K);
    for (int r = 0; r < M; ++r) {
        s.A(r) = amp_scale * cd(g(rng), g(rng));
        s.B(r) = amp_scale * cd(g(rng), g(rng));
        for (int k = 0; k < K; ++k)
            s.disp(r, k) = disp_scale * cd(g(rng), g(rng));
    }
    const double n = std::sqrt(norm_squared(s));
    s.A /= n;
    s.B /= n;
    return s;
}

inline EffectiveHamiltonian random_hamiltonian(int n_left, int n_right,
                                               std::mt19937_64& rng,
                                               double coupling_scale = 0.3) {
    std::uniform_real_distribution<double> u(0.3, 1.7);
    EffectiveHamiltonian H;
    H.omega0 = 1.0;
    H.n_left = n_left;
    H.n_right = n_right;
    const int K = 2 * (n_left + n_right);
    H.epsilon.resize(K);
    H.coupling.resize(K);
    int k = 0;
    for (int i = 0; i < n_left; ++i, ++k) {
        H.epsilon(k) = u(rng);
        H.coupling(k) = coupling_scale * u(rng);
    }
    for (int i = 0; i < n_left; ++i, ++k) {
        H.epsilon(k) = -u(rng);
        H.coupling(k) = 0.6 * coupling_scale * u(rng);
    }
    for (int i = 0; i < n_right; ++i, ++k) {
        H.epsilon(k) = u(rng);
        H.coupling(k) = 0.8 * coupling_scale * u(rng);
    }
    for (int i = 0; i < n_right; ++i, ++k) {
        H.epsilon(k) = -u(rng);
        H.coupling(k) = 0.5 * coupling_scale * u(rng);
    }
    return H;
}

} // namespace sbdyn::testsupport
