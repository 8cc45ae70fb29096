// oracle.cpp - truncated-Fock exact propagation used as an independent
// reference for the variational dynamics.

#include "sbdyn/oracle.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "sbdyn/common.hpp"

namespace sbdyn {

namespace {

// Per-mode strides for the row-major bosonic index (last mode fastest).
std::vector<std::size_t> boson_strides(const Eigen::VectorXi& n_max) {
    const int K = static_cast<int>(n_max.size());
    std::vector<std::size_t> stride(static_cast<std::size_t>(K), 1);
    for (int k = K - 2; k >= 0; --k) {
        stride[static_cast<std::size_t>(k)] =
            stride[static_cast<std::size_t>(k) + 1] *
            static_cast<std::size_t>(n_max(k + 1) + 1);
    }
    return stride;
}

int occupation(std::size_t b, const std::vector<std::size_t>& stride,
               const Eigen::VectorXi& n_max, int k) {
    return static_cast<int>((b / stride[static_cast<std::size_t>(k)]) %
                            static_cast<std::size_t>(n_max(k) + 1));
}

} // namespace

FockSpace FockSpace::create(const Eigen::VectorXi& n_max, std::size_t dim_cap) {
    if (n_max.size() == 0) {
        throw std::invalid_argument("Fock space needs at least one mode");
    }
    FockSpace space;
    space.n_max = n_max;
    space.boson_dim = 1;
    for (Eigen::Index k = 0; k < n_max.size(); ++k) {
        if (n_max(k) < 1) {
            throw std::invalid_argument(
                "per-mode cutoff must be at least 1 (mode " +
                std::to_string(k) + " has " + std::to_string(n_max(k)) + ")");
        }
        const auto factor = static_cast<std::size_t>(n_max(k)) + 1;
        if (space.boson_dim > dim_cap / factor + 1) {
            throw std::runtime_error(
                "truncated Fock dimension exceeds the cap of " +
                std::to_string(dim_cap) +
                " states; lower the cutoff or the mode count");
        }
        space.boson_dim *= factor;
    }
    space.dim = 2 * space.boson_dim;
    if (space.dim > dim_cap) {
        throw std::runtime_error(
            "truncated Fock dimension " + std::to_string(space.dim) +
            " exceeds the cap of " + std::to_string(dim_cap) +
            " states; lower the cutoff or the mode count");
    }
    return space;
}

FockSpace FockSpace::uniform(int modes, int n_max, std::size_t dim_cap) {
    if (modes < 1) {
        throw std::invalid_argument("Fock space needs at least one mode");
    }
    return create(Eigen::VectorXi::Constant(modes, n_max), dim_cap);
}

Eigen::SparseMatrix<cd> fock_hamiltonian(const FockSpace& space,
                                         const EffectiveHamiltonian& H) {
    const int K = H.modes();
    if (K != static_cast<int>(space.n_max.size())) {
        throw std::invalid_argument(
            "Fock space has " + std::to_string(space.n_max.size()) +
            " modes but the Hamiltonian has " + std::to_string(K));
    }
    const std::size_t nb = space.boson_dim;
    const auto stride = boson_strides(space.n_max);

    std::vector<Eigen::Triplet<cd>> trips;
    trips.reserve(space.dim * static_cast<std::size_t>(K + 1));

    for (std::size_t b = 0; b < nb; ++b) {
        double bath_energy = 0.0;
        for (int k = 0; k < K; ++k) {
            bath_energy += H.epsilon(k) * occupation(b, stride, space.n_max, k);
        }
        const auto up = static_cast<Eigen::Index>(b);
        const auto dn = static_cast<Eigen::Index>(nb + b);
        trips.emplace_back(up, up, cd(0.5 * H.omega0 + bath_energy, 0.0));
        trips.emplace_back(dn, dn, cd(-0.5 * H.omega0 + bath_energy, 0.0));

        // sigma_x * sum_k c_k (b_k^dag + b_k): emit each raising element and
        // its transpose once, which covers the lowering part as well.
        for (int k = 0; k < K; ++k) {
            const int n = occupation(b, stride, space.n_max, k);
            if (n >= space.n_max(k)) continue;
            const std::size_t br = b + stride[static_cast<std::size_t>(k)];
            const cd val(H.coupling(k) * std::sqrt(n + 1.0), 0.0);
            const auto up_r = static_cast<Eigen::Index>(br);
            const auto dn_r = static_cast<Eigen::Index>(nb + br);
            trips.emplace_back(dn_r, up, val);
            trips.emplace_back(up, dn_r, val);
            trips.emplace_back(up_r, dn, val);
            trips.emplace_back(dn, up_r, val);
        }
    }

    Eigen::SparseMatrix<cd> Hm(static_cast<Eigen::Index>(space.dim),
                               static_cast<Eigen::Index>(space.dim));
    Hm.setFromTriplets(trips.begin(), trips.end());
    Hm.makeCompressed();
    return Hm;
}

Eigen::VectorXcd fock_product_start(const FockSpace& space, QubitInit init) {
    Eigen::VectorXcd psi =
        Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(space.dim));
    const auto vac_up = Eigen::Index(0);
    const auto vac_dn = static_cast<Eigen::Index>(space.boson_dim);
    switch (init) {
    case QubitInit::up:
        psi(vac_up) = cd(1.0, 0.0);
        break;
    case QubitInit::down:
        psi(vac_dn) = cd(1.0, 0.0);
        break;
    case QubitInit::plus_x:
        psi(vac_up) = cd(1.0 / std::sqrt(2.0), 0.0);
        psi(vac_dn) = cd(1.0 / std::sqrt(2.0), 0.0);
        break;
    }
    return psi;
}

Eigen::VectorXcd coherent_state_embed(const FockSpace& space,
                                      const MD2State& state,
                                      double tail_bound) {
    const int K = state.modes();
    if (K != static_cast<int>(space.n_max.size())) {
        throw std::invalid_argument(
            "state has " + std::to_string(K) + " modes but the Fock space has " +
            std::to_string(space.n_max.size()));
    }
    const int M = state.multiplicity();

    // Reject embeddings whose coherent occupation leaks past the cutoff.
    double worst_tail = 0.0;
    int worst_mode = -1;
    int worst_particle = -1;
    for (int r = 0; r < M; ++r) {
        for (int k = 0; k < K; ++k) {
            const double x = std::norm(state.disp(r, k));
            double term = std::exp(-x);
            double sum = term;
            for (int n = 1; n <= space.n_max(k); ++n) {
                term *= x / n;
                sum += term;
            }
            const double tail = std::max(0.0, 1.0 - sum);
            if (tail > worst_tail) {
                worst_tail = tail;
                worst_mode = k;
                worst_particle = r;
            }
        }
    }
    if (worst_tail > tail_bound) {
        throw std::runtime_error(
            "coherent occupation tail " + format_g17(worst_tail) +
            " beyond the cutoff for mode " + std::to_string(worst_mode) +
            " (particle " + std::to_string(worst_particle) +
            ") exceeds the bound " + format_g17(tail_bound) +
            "; raise the cutoff");
    }

    Eigen::VectorXcd psi =
        Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(space.dim));
    for (int r = 0; r < M; ++r) {
        // Iterated Kronecker product of per-mode coherent coefficients,
        // matching the row-major (last mode fastest) bosonic index.
        Eigen::VectorXcd boson = Eigen::VectorXcd::Ones(1);
        for (int k = 0; k < K; ++k) {
            const cd d = state.disp(r, k);
            const int nk = space.n_max(k);
            Eigen::VectorXcd coeff(nk + 1);
            coeff(0) = cd(std::exp(-0.5 * std::norm(d)), 0.0);
            for (int n = 1; n <= nk; ++n) {
                coeff(n) = coeff(n - 1) * d / std::sqrt(double(n));
            }
            Eigen::VectorXcd next(boson.size() * (nk + 1));
            for (Eigen::Index i = 0; i < boson.size(); ++i) {
                next.segment(i * (nk + 1), nk + 1) = boson(i) * coeff;
            }
            boson.swap(next);
        }
        psi.head(static_cast<Eigen::Index>(space.boson_dim)) +=
            state.A(r) * boson;
        psi.tail(static_cast<Eigen::Index>(space.boson_dim)) +=
            state.B(r) * boson;
    }
    return psi;
}

double fock_sigma_z(const FockSpace& space, const Eigen::VectorXcd& psi) {
    const auto nb = static_cast<Eigen::Index>(space.boson_dim);
    const double up = psi.head(nb).squaredNorm();
    const double dn = psi.tail(nb).squaredNorm();
    return (up - dn) / (up + dn);
}

double fock_expectation(const Eigen::SparseMatrix<cd>& Hm,
                        const Eigen::VectorXcd& psi) {
    const cd val = psi.dot(Hm * psi);
    return val.real() / psi.squaredNorm();
}

double fock_expectation_squared(const Eigen::SparseMatrix<cd>& Hm,
                                const Eigen::VectorXcd& psi) {
    // H is Hermitian, so <H^2> = ||H psi||^2 / ||psi||^2.
    return (Hm * psi).squaredNorm() / psi.squaredNorm();
}

void krylov_step(const Eigen::SparseMatrix<cd>& Hm, Eigen::VectorXcd& psi,
                 double dt, int krylov_dim) {
    const Eigen::Index dim = psi.size();
    const double nrm = psi.norm();
    if (nrm == 0.0) return;
    const int m = static_cast<int>(
        std::min<Eigen::Index>(std::max(krylov_dim, 1), dim));

    Eigen::MatrixXcd V(dim, m);
    Eigen::VectorXd alpha(m);
    Eigen::VectorXd beta(std::max(m - 1, 1));
    V.col(0) = psi / nrm;

    int k_eff = m;
    double scale = 1.0;
    for (int j = 0; j < m; ++j) {
        Eigen::VectorXcd w = Hm * V.col(j);
        alpha(j) = V.col(j).dot(w).real();
        scale = std::max(scale, std::abs(alpha(j)));
        w -= alpha(j) * V.col(j);
        if (j > 0) w -= beta(j - 1) * V.col(j - 1);
        // One classical Gram-Schmidt sweep keeps the basis orthonormal, which
        // in turn keeps the step unitary to roundoff.
        w -= V.leftCols(j + 1) * (V.leftCols(j + 1).adjoint() * w);
        if (j == m - 1) break;
        const double b = w.norm();
        if (b <= 1e-12 * scale) {
            k_eff = j + 1; // invariant subspace: the result is exact
            break;
        }
        beta(j) = b;
        scale = std::max(scale, b);
        V.col(j + 1) = w / b;
    }

    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(k_eff, k_eff);
    for (int j = 0; j < k_eff; ++j) {
        T(j, j) = alpha(j);
        if (j + 1 < k_eff) {
            T(j, j + 1) = beta(j);
            T(j + 1, j) = beta(j);
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
    const Eigen::MatrixXd& U = es.eigenvectors();
    const Eigen::VectorXd& lam = es.eigenvalues();

    Eigen::VectorXcd c = Eigen::VectorXcd::Zero(k_eff);
    for (int l = 0; l < k_eff; ++l) {
        const cd phase = std::exp(cd(0.0, -dt * lam(l)));
        c += (U(0, l) * phase) * U.col(l).cast<cd>();
    }
    psi = nrm * (V.leftCols(k_eff) * c);
}

namespace {

Trajectory propagate_loop(const Eigen::SparseMatrix<cd>& Hm,
                          const FockSpace& space, Eigen::VectorXcd psi,
                          double dt, double t_final, int stride, int m) {
    if (dt <= 0.0) throw std::invalid_argument("time step must be positive");
    if (t_final < 0.0) throw std::invalid_argument("final time must be nonnegative");
    if (stride < 1) throw std::invalid_argument("output stride must be at least 1");
    const auto n_steps = static_cast<long>(std::llround(t_final / dt));

    std::vector<double> times, sigma_z, norm, energy;
    auto record = [&](double t) {
        times.push_back(t);
        sigma_z.push_back(fock_sigma_z(space, psi));
        norm.push_back(psi.norm());
        energy.push_back(fock_expectation(Hm, psi));
    };
    record(0.0);
    for (long step = 1; step <= n_steps; ++step) {
        krylov_step(Hm, psi, dt, m);
        if (step % stride == 0 || step == n_steps) record(step * dt);
    }

    Trajectory traj;
    const auto n = static_cast<Eigen::Index>(times.size());
    traj.times = Eigen::Map<const Eigen::VectorXd>(times.data(), n);
    traj.sigma_z = Eigen::Map<const Eigen::VectorXd>(sigma_z.data(), n);
    traj.norm = Eigen::Map<const Eigen::VectorXd>(norm.data(), n);
    traj.energy = Eigen::Map<const Eigen::VectorXd>(energy.data(), n);
    traj.deviation = Eigen::VectorXd::Zero(n);
    traj.metadata["engine"] = "fock";
    return traj;
}

} // namespace

Trajectory exact_propagate_vector(const FockSpace& space,
                                  const EffectiveHamiltonian& H,
                                  Eigen::VectorXcd psi, double dt,
                                  double t_final, int output_stride,
                                  int krylov_dim) {
    const Eigen::SparseMatrix<cd> Hm = fock_hamiltonian(space, H);
    return propagate_loop(Hm, space, std::move(psi), dt, t_final,
                          output_stride, krylov_dim);
}

Trajectory exact_propagate(const FockConfig& cfg) {
    if (cfg.n_max < 1) {
        throw std::invalid_argument("initial cutoff must be at least 1");
    }
    const int K = cfg.H.modes();

    Trajectory prev;
    bool have_prev = false;
    double bound = -1.0; // last cutoff-doubling comparison, if any

    auto annotate = [&](Trajectory& t, int cutoff) {
        t.metadata["n_max"] = std::to_string(cutoff);
        t.metadata["dt"] = format_g17(cfg.dt);
        t.metadata["qubit_init"] = qubit_init_name(cfg.qubit_init);
    };

    for (int cutoff = cfg.n_max;; cutoff *= 2) {
        FockSpace space;
        try {
            space = FockSpace::uniform(K, cutoff, cfg.dim_cap);
        } catch (const std::runtime_error&) {
            if (!have_prev) throw;
            prev.metadata["cutoff_certified"] = "false";
            prev.metadata["cutoff_warning"] =
                "dimension cap " + std::to_string(cfg.dim_cap) +
                " reached before the cutoff sweep settled";
            if (bound >= 0.0) prev.metadata["cutoff_bound"] = format_g17(bound);
            return prev;
        }

        const Eigen::SparseMatrix<cd> Hm = fock_hamiltonian(space, cfg.H);
        Trajectory traj =
            propagate_loop(Hm, space, fock_product_start(space, cfg.qubit_init),
                           cfg.dt, cfg.t_final, cfg.output_stride,
                           cfg.krylov_dim);
        annotate(traj, cutoff);

        if (!cfg.certify) {
            traj.metadata["cutoff_certified"] = "unchecked";
            return traj;
        }
        if (have_prev) {
            bound = (traj.sigma_z - prev.sigma_z).cwiseAbs().maxCoeff();
            if (bound < cfg.certify_tolerance) {
                traj.metadata["cutoff_certified"] = "true";
                traj.metadata["cutoff_bound"] = format_g17(bound);
                return traj;
            }
        }
        prev = std::move(traj);
        have_prev = true;
    }
}

} // namespace sbdyn
