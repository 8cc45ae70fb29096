// ansatz.cpp - trial-state overlaps, observables, initialization, snapshots

#include "sbdyn/ansatz.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace sbdyn {

// ----------------------------------- state -----------------------------------

bool state_is_finite(const MD2State& state) {
    return state.A.allFinite() && state.B.allFinite() &&
           state.disp.allFinite();
}

double max_tilde_displacement(const MD2State& state) {
    double worst = 0.0;
    const int nl = state.n_left;
    const int nr = state.n_right;
    for (int r = 0; r < state.multiplicity(); ++r) {
        for (int k = nl; k < 2 * nl; ++k)
            worst = std::max(worst, std::abs(state.disp(r, k)));
        for (int k = 2 * nl + nr; k < 2 * nl + 2 * nr; ++k)
            worst = std::max(worst, std::abs(state.disp(r, k)));
    }
    return worst;
}

// --------------------------------- overlaps ----------------------------------

Eigen::MatrixXcd overlap_matrix(const MD2State& state) {
    const int M = state.multiplicity();
    const int K = state.modes();
    Eigen::MatrixXcd S(M, M);
    for (int r = 0; r < M; ++r) {
        S(r, r) = cd(1.0, 0.0);
        for (int s = r + 1; s < M; ++s) {
            // log S = -1/2 sum_k |d_r - d_s|^2 + i sum_k Im(conj(d_r) d_s):
            // the real part is a sum of nonpositive terms, keeping |S| <= 1
            // exact in floating point.
            Kahan re, im;
            for (int k = 0; k < K; ++k) {
                const cd a = state.disp(r, k);
                const cd b = state.disp(s, k);
                re.add(-0.5 * std::norm(a - b));
                im.add(a.real() * b.imag() - a.imag() * b.real());
            }
            const cd val = std::exp(cd(re.value(), im.value()));
            S(r, s) = val;
            S(s, r) = std::conj(val);
        }
    }
    return S;
}

namespace {

void fill_amplitude_kernels(const MD2State& state, PairTables& t) {
    const int M = state.multiplicity();
    t.S = overlap_matrix(state);
    t.P.resize(M, M);
    t.Q.resize(M, M);
    t.Z.resize(M, M);
    for (int r = 0; r < M; ++r) {
        for (int s = 0; s < M; ++s) {
            const cd aa = std::conj(state.A(r)) * state.A(s);
            const cd bb = std::conj(state.B(r)) * state.B(s);
            t.P(r, s) = aa + bb;
            t.Z(r, s) = aa - bb;
            t.Q(r, s) = std::conj(state.A(r)) * state.B(s) +
                        std::conj(state.B(r)) * state.A(s);
        }
    }
}

} // namespace

PairTables build_pair_tables(const MD2State& state,
                             const EffectiveHamiltonian& H) {
    if (state.modes() != H.modes())
        throw std::invalid_argument(
            "build_pair_tables: state and Hamiltonian mode counts differ");
    const int M = state.multiplicity();
    PairTables t;
    fill_amplitude_kernels(state, t);
    const Eigen::VectorXcd epsc = H.epsilon.cast<cd>();
    t.E = state.disp.conjugate() * epsc.asDiagonal() * state.disp.transpose();
    const Eigen::VectorXcd cc = H.coupling.cast<cd>();
    const Eigen::VectorXcd xbra = state.disp.conjugate() * cc;
    const Eigen::VectorXcd xket = state.disp * cc;
    t.X.resize(M, M);
    for (int r = 0; r < M; ++r)
        for (int s = 0; s < M; ++s)
            t.X(r, s) = xbra(r) + xket(s);
    return t;
}

// -------------------------------- observables --------------------------------

namespace {

// Hermitian quadratic forms evaluate to real numbers; tolerate only rounding
// in the imaginary residue.
double take_real(cd value, const char* what) {
    const double scale = std::max(1.0, std::abs(value));
    if (std::abs(value.imag()) > 1e-10 * scale) {
        std::ostringstream msg;
        msg << what << ": imaginary residue " << value.imag()
            << " exceeds tolerance (value " << value.real() << ")";
        throw std::runtime_error(msg.str());
    }
    return value.real();
}

PairTables tables_without_hamiltonian(const MD2State& state) {
    // S/P/Q/Z do not involve the Hamiltonian; norm and sigma_z need no more.
    PairTables t;
    fill_amplitude_kernels(state, t);
    return t;
}

} // namespace

double norm_squared(const PairTables& t) {
    KahanC acc;
    const int M = static_cast<int>(t.S.rows());
    for (int r = 0; r < M; ++r)
        for (int s = 0; s < M; ++s)
            acc.add(t.P(r, s) * t.S(r, s));
    return take_real(acc.value(), "norm_squared");
}

double norm_squared(const MD2State& state) {
    return norm_squared(tables_without_hamiltonian(state));
}

double sigma_z_expectation(const PairTables& t) {
    const double n2 = norm_squared(t);
    if (n2 <= 0.0)
        throw std::runtime_error("sigma_z_expectation: degenerate zero norm");
    KahanC acc;
    const int M = static_cast<int>(t.S.rows());
    for (int r = 0; r < M; ++r)
        for (int s = 0; s < M; ++s)
            acc.add(t.Z(r, s) * t.S(r, s));
    return take_real(acc.value(), "sigma_z_expectation") / n2;
}

double sigma_z_expectation(const MD2State& state) {
    return sigma_z_expectation(tables_without_hamiltonian(state));
}

double energy_expectation(const PairTables& t, double omega0) {
    const double n2 = norm_squared(t);
    if (n2 <= 0.0)
        throw std::runtime_error("energy_expectation: degenerate zero norm");
    KahanC acc;
    const int M = static_cast<int>(t.S.rows());
    for (int r = 0; r < M; ++r)
        for (int s = 0; s < M; ++s)
            acc.add((0.5 * omega0 * t.Z(r, s) + t.P(r, s) * t.E(r, s) +
                     t.Q(r, s) * t.X(r, s)) *
                    t.S(r, s));
    return take_real(acc.value(), "energy_expectation") / n2;
}

double energy_expectation(const MD2State& state,
                          const EffectiveHamiltonian& H) {
    return energy_expectation(build_pair_tables(state, H), H.omega0);
}

double energy_squared_expectation(const MD2State& state,
                                  const EffectiveHamiltonian& H,
                                  const PairTables& t) {
    const double n2 = norm_squared(t);
    if (n2 <= 0.0)
        throw std::runtime_error(
            "energy_squared_expectation: degenerate zero norm");
    const int M = state.multiplicity();
    const Eigen::VectorXcd eps2 =
        H.epsilon.array().square().matrix().cast<cd>();
    const Eigen::MatrixXcd N2 =
        state.disp.conjugate() * eps2.asDiagonal() * state.disp.transpose();
    const Eigen::VectorXcd epsc_c =
        (H.epsilon.array() * H.coupling.array()).matrix().cast<cd>();
    const Eigen::VectorXcd wbra = state.disp.conjugate() * epsc_c;
    const Eigen::VectorXcd wket = state.disp * epsc_c;
    const double c2sum = H.coupling.squaredNorm();
    const double w0 = H.omega0;

    KahanC acc;
    for (int r = 0; r < M; ++r) {
        for (int s = 0; s < M; ++s) {
            const cd E = t.E(r, s);
            const cd X = t.X(r, s);
            const cd bath2 = E * E + N2(r, s);          // squared bath energy
            const cd int2 = X * X + c2sum;              // squared interaction
            const cd cross = 2.0 * E * X + wbra(r) + wket(s);
            acc.add(t.S(r, s) *
                    (t.P(r, s) * (0.25 * w0 * w0 + bath2 + int2) +
                     w0 * t.Z(r, s) * E + t.Q(r, s) * cross));
        }
    }
    return take_real(acc.value(), "energy_squared_expectation") / n2;
}

double energy_squared_expectation(const MD2State& state,
                                  const EffectiveHamiltonian& H) {
    return energy_squared_expectation(state, H, build_pair_tables(state, H));
}

// ------------------------------- initial state --------------------------------

MD2State initial_state(const EffectiveHamiltonian& H, QubitInit init, int M,
                       double noise_amplitude, std::uint64_t seed) {
    if (M < 1)
        throw std::invalid_argument("initial_state: multiplicity must be >= 1");
    if (noise_amplitude < 0.0)
        throw std::invalid_argument(
            "initial_state: noise amplitude must be >= 0");
    const int K = H.modes();
    MD2State state;
    state.A = Eigen::VectorXcd::Zero(M);
    state.B = Eigen::VectorXcd::Zero(M);
    state.disp = Eigen::MatrixXcd::Zero(M, K);
    state.n_left = H.n_left;
    state.n_right = H.n_right;
    state.time = 0.0;

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const auto disc_noise = [&]() {
        // Uniform over the disc of radius noise_amplitude: the modulus never
        // exceeds the configured amplitude.
        const double rad = noise_amplitude * std::sqrt(uni(rng));
        const double phase = 2.0 * pi * uni(rng);
        return cd(rad * std::cos(phase), rad * std::sin(phase));
    };

    switch (init) {
    case QubitInit::up:
        state.A(0) = 1.0;
        for (int r = 1; r < M; ++r)
            state.A(r) = disc_noise();
        break;
    case QubitInit::down:
        state.B(0) = 1.0;
        for (int r = 1; r < M; ++r)
            state.B(r) = disc_noise();
        break;
    case QubitInit::plus_x:
        state.A(0) = state.B(0) = 1.0 / std::sqrt(2.0);
        for (int r = 1; r < M; ++r) {
            state.A(r) = disc_noise();
            state.B(r) = disc_noise();
        }
        break;
    }
    for (int r = 0; r < M; ++r)
        for (int k = 0; k < K; ++k)
            state.disp(r, k) = disc_noise();

    const double n2 = norm_squared(state);
    if (n2 <= 0.0)
        throw std::runtime_error("initial_state: degenerate initial norm");
    const double scale = 1.0 / std::sqrt(n2);
    state.A *= scale;
    state.B *= scale;
    return state;
}

QubitInit parse_qubit_init(const std::string& name) {
    if (name == "up")
        return QubitInit::up;
    if (name == "down")
        return QubitInit::down;
    if (name == "plus_x")
        return QubitInit::plus_x;
    throw std::invalid_argument("parse_qubit_init: unknown qubit state '" +
                                name + "' (expected up, down, or plus_x)");
}

std::string qubit_init_name(QubitInit init) {
    switch (init) {
    case QubitInit::up:
        return "up";
    case QubitInit::down:
        return "down";
    case QubitInit::plus_x:
        return "plus_x";
    }
    return "up";
}

// ------------------------------ series spectrum -------------------------------

SpectrumTable series_spectrum(const Eigen::VectorXd& times,
                              const Eigen::VectorXd& values) {
    const int n = static_cast<int>(times.size());
    if (n < 2 || values.size() != n)
        throw std::invalid_argument(
            "series_spectrum: need >= 2 samples with matching lengths");
    const double dt = times(1) - times(0);
    if (dt <= 0.0)
        throw std::invalid_argument("series_spectrum: times must increase");
    for (int i = 1; i < n; ++i) {
        if (std::abs((times(i) - times(i - 1)) - dt) > 1e-9 * std::max(1.0, dt))
            throw std::invalid_argument(
                "series_spectrum: non-uniform sampling grid");
    }
    const double mean = values.mean();
    const int n_bins = n / 2;
    SpectrumTable table;
    table.omega.resize(n_bins + 1);
    table.amplitude.resize(n_bins + 1);
    for (int j = 0; j <= n_bins; ++j) {
        const double w = 2.0 * pi * j / (n * dt);
        KahanC acc;
        for (int i = 0; i < n; ++i) {
            const double phase = -w * (times(i) - times(0));
            acc.add((values(i) - mean) * cd(std::cos(phase), std::sin(phase)));
        }
        table.omega(j) = w;
        table.amplitude(j) = 2.0 * std::abs(acc.value()) / n;
    }
    return table;
}

// --------------------------------- snapshots ----------------------------------

void write_state(const MD2State& state, const std::string& path) {
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("write_state: cannot open " + path);
    const int M = state.multiplicity();
    const int K = state.modes();
    out << "# md2-state\n";
    out << M << " " << state.n_left << " " << state.n_right << " "
        << format_g17(state.time) << "\n";
    for (int r = 0; r < M; ++r)
        out << format_g17(state.A(r).real()) << " "
            << format_g17(state.A(r).imag()) << " "
            << format_g17(state.B(r).real()) << " "
            << format_g17(state.B(r).imag()) << "\n";
    for (int r = 0; r < M; ++r) {
        for (int k = 0; k < K; ++k) {
            out << format_g17(state.disp(r, k).real()) << " "
                << format_g17(state.disp(r, k).imag());
            out << (k + 1 < K ? " " : "\n");
        }
        if (K == 0)
            out << "\n";
    }
    if (!out)
        throw std::runtime_error("write_state: write failed for " + path);
}

MD2State read_state(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("read_state: cannot open " + path);
    std::string header;
    std::getline(in, header);
    if (header.rfind("# md2-state", 0) != 0)
        throw std::runtime_error("read_state: missing snapshot header in " +
                                 path);
    MD2State state;
    int M = 0;
    if (!(in >> M >> state.n_left >> state.n_right >> state.time) || M < 1 ||
        state.n_left < 0 || state.n_right < 0)
        throw std::runtime_error("read_state: malformed dimension line in " +
                                 path);
    const int K = 2 * (state.n_left + state.n_right);
    state.A.resize(M);
    state.B.resize(M);
    state.disp.resize(M, K);
    for (int r = 0; r < M; ++r) {
        double ar, ai, br, bi;
        if (!(in >> ar >> ai >> br >> bi))
            throw std::runtime_error("read_state: truncated amplitudes in " +
                                     path);
        state.A(r) = cd(ar, ai);
        state.B(r) = cd(br, bi);
    }
    for (int r = 0; r < M; ++r) {
        for (int k = 0; k < K; ++k) {
            double re, im;
            if (!(in >> re >> im))
                throw std::runtime_error(
                    "read_state: truncated displacements in " + path);
            state.disp(r, k) = cd(re, im);
        }
    }
    return state;
}

} // namespace sbdyn
