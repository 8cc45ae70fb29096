// test_bath.cpp - spectral density, correlation function, NNLS, and
// bath-discretization checks. Reference numbers were computed ahead of time
// with independent arbitrary-precision / reference-library evaluations and
// are pinned here as literals.

#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "sbdyn/bath.hpp"
#include "sbdyn/nnls.hpp"

using namespace sbdyn;

namespace {

const SpectralDensity kJ{0.2, 1.0};   // workhorse parameter set
constexpr double kBeta = 5.0;

// Reduced-size fit options so property tests stay fast; accuracy statements
// are always made against these same options.
BathFitOptions small_opts() {
    BathFitOptions o;
    o.n_times = 120;
    o.n_candidates = 600;
    o.quad_intervals = 6000;
    return o;
}

} // namespace

// ------------------------------ spectral density ------------------------------

TEST_CASE("drude-lorentz value at cutoff equals alpha") {
    CHECK(kJ.value(kJ.omega_c) == doctest::Approx(kJ.alpha).epsilon(1e-15));
    SpectralDensity other{0.015, 1.5};
    CHECK(other.value(1.5) == doctest::Approx(0.015).epsilon(1e-15));
}

TEST_CASE("drude-lorentz is odd and peaks at the cutoff") {
    for (double w : {0.1, 0.7, 1.0, 3.3, 9.0}) {
        CHECK(kJ.value(-w) == doctest::Approx(-kJ.value(w)).epsilon(1e-15));
        if (w != kJ.omega_c)
            CHECK(kJ.value(w) < kJ.value(kJ.omega_c));
    }
}

// ------------------------------- noise spectrum -------------------------------

TEST_CASE("noise spectrum at zero frequency matches closed form") {
    // S(0) = 2 alpha / (pi beta omega_c), reference value from
    // arbitrary-precision evaluation.
    const double s0 = quantum_noise_spectrum(kJ, kBeta, 0.0);
    CHECK(s0 == doctest::Approx(0.025464790894703257).epsilon(1e-14));
    CHECK(s0 ==
          doctest::Approx(2.0 * kJ.alpha / (pi * kBeta * kJ.omega_c))
              .epsilon(1e-14));
}

TEST_CASE("noise spectrum reference values") {
    CHECK(quantum_noise_spectrum(kJ, kBeta, 1.3) ==
          doctest::Approx(0.0616246715544884).epsilon(1e-12));
    CHECK(quantum_noise_spectrum(kJ, kBeta, -1.3) ==
          doctest::Approx(9.264894646938622e-05).epsilon(1e-12));
    SpectralDensity warm{0.015, 1.5};
    CHECK(quantum_noise_spectrum(warm, 0.5, 1.0) ==
          doctest::Approx(0.011201298814371679709).epsilon(1e-12));
}

TEST_CASE("noise spectrum obeys detailed balance") {
    for (double w : {1e-6, 1e-3, 0.05, 0.4, 1.0, 2.7, 8.0}) {
        const double sp = quantum_noise_spectrum(kJ, kBeta, w);
        const double sm = quantum_noise_spectrum(kJ, kBeta, -w);
        CHECK(sm == doctest::Approx(std::exp(-kBeta * w) * sp).epsilon(1e-12));
    }
}

TEST_CASE("noise spectrum reaches the zero-temperature limit") {
    // At beta = 1e3 the thermal occupation of a unit-frequency mode is
    // e^{-1000}: S reduces to J/pi on the positive axis and to zero below.
    CHECK(quantum_noise_spectrum(kJ, 1e3, 1.0) ==
          doctest::Approx(kJ.value(1.0) / pi).epsilon(1e-12));
    CHECK(quantum_noise_spectrum(kJ, 1e3, -1.0) == doctest::Approx(0.0));
}

TEST_CASE("noise spectrum is continuous across its evaluation branches") {
    // The implementation switches formulas at |beta w / 2| = 1e-2.
    const double w_switch = 2.0 * 1e-2 / kBeta;
    for (double sign : {1.0, -1.0}) {
        const double lo =
            quantum_noise_spectrum(kJ, kBeta, sign * w_switch * 0.999);
        const double hi =
            quantum_noise_spectrum(kJ, kBeta, sign * w_switch * 1.001);
        CHECK(lo == doctest::Approx(hi).epsilon(1e-5)); // smooth function
        // and both branches agree tightly at the very same point:
        const double at =
            quantum_noise_spectrum(kJ, kBeta, sign * w_switch * 0.9999999);
        const double at2 =
            quantum_noise_spectrum(kJ, kBeta, sign * w_switch * 1.0000001);
        CHECK(at == doctest::Approx(at2).epsilon(1e-9));
    }
}

TEST_CASE("noise spectrum is positive") {
    for (double w = -9.5; w <= 9.5; w += 0.5)
        CHECK(quantum_noise_spectrum(kJ, kBeta, w) > 0.0);
}

// ---------------------------- correlation function ----------------------------

TEST_CASE("correlation function reference values") {
    const cd c0 = bath_correlation_function(kJ, kBeta, 0.0, 10.0);
    CHECK(c0.real() == doctest::Approx(0.3088327584322712691).epsilon(1e-12));
    CHECK(c0.imag() == doctest::Approx(0.0));
    CHECK(c0.real() > 0.0);

    const cd c07 = bath_correlation_function(kJ, kBeta, 0.7, 10.0);
    CHECK(c07.real() ==
          doctest::Approx(0.038571615738804704576).epsilon(1e-11));
    CHECK(c07.imag() ==
          doctest::Approx(-0.084673745760000258177).epsilon(1e-11));
}

TEST_CASE("correlation function is hermitian in time") {
    for (double t : {0.3, 1.1, 2.9, 7.4}) {
        const cd plus = bath_correlation_function(kJ, kBeta, t, 10.0);
        const cd minus = bath_correlation_function(kJ, kBeta, -t, 10.0);
        CHECK(std::abs(minus - std::conj(plus)) < 1e-10);
    }
}

TEST_CASE("correlation quadrature is self-converged") {
    const Eigen::VectorXd times = Eigen::VectorXd::LinSpaced(21, 0.0, 10.0);
    const BcfGrid a = bcf_grid(kJ, kBeta, times, 10.0, 20000);
    const BcfGrid b = bcf_grid(kJ, kBeta, times, 10.0, 40000);
    const double scale = a.values.cwiseAbs().maxCoeff();
    CHECK((a.values - b.values).cwiseAbs().maxCoeff() / scale < 1e-8);
}

TEST_CASE("zero-temperature correlation reduces to the response integral") {
    // At beta = 1e6 only positive frequencies contribute, where the spectrum
    // is J(w)/pi; compare against an independently coded one-sided quadrature
    // of -(1/pi) Integral_0^W J(w) sin(w t) dw for the imaginary part and
    // (1/pi) Integral_0^W J(w) cos(w t) dw for the real part.
    const double W = 10.0;
    const int n = 40000;
    const double h = W / n;
    for (double t : {0.5, 1.7, 4.0}) {
        Kahan re, im;
        for (int j = 0; j <= n; ++j) {
            const double w = h * j;
            const double simpson =
                (j == 0 || j == n) ? 1.0 : (j % 2 == 1 ? 4.0 : 2.0);
            const double jw = kJ.value(w) / pi * simpson * h / 3.0;
            re.add(jw * std::cos(w * t));
            im.add(-jw * std::sin(w * t));
        }
        const cd c = bath_correlation_function(kJ, 1e6, t, W);
        CHECK(c.real() == doctest::Approx(re.value()).epsilon(1e-7));
        CHECK(c.imag() == doctest::Approx(im.value()).epsilon(1e-7));
    }
}

TEST_CASE("grid evaluation matches pointwise evaluation") {
    Eigen::VectorXd times(3);
    times << 0.0, 0.9, 4.2;
    const BcfGrid grid = bcf_grid(kJ, kBeta, times, 10.0, 4000);
    for (int i = 0; i < 3; ++i) {
        const cd single =
            bath_correlation_function(kJ, kBeta, times(i), 10.0, 4000);
        CHECK(std::abs(grid.values(i) - single) == 0.0);
    }
}

// ------------------------------------ NNLS ------------------------------------

TEST_CASE("nnls reproduces reference solution") {
    Eigen::MatrixXd A(4, 3);
    A << 1.0, 0.5, 0.0,
         0.0, 1.0, 0.5,
         0.5, 0.0, 1.0,
         0.2, 0.2, 0.2;
    Eigen::VectorXd b(4);
    b << 1.0, -0.5, 0.3, 0.1;
    const NnlsResult r = nnls(A, b, 100);
    REQUIRE(r.converged);
    // Reference solver gives x = (39/43, 0, 0), residual 0.5374357722577885.
    CHECK(r.x(0) == doctest::Approx(39.0 / 43.0).epsilon(1e-12));
    CHECK(r.x(1) == 0.0);
    CHECK(r.x(2) == 0.0);
    CHECK(r.residual_norm ==
          doctest::Approx(0.5374357722577885).epsilon(1e-12));
}

TEST_CASE("nnls recovers an exactly representable nonnegative solution") {
    Eigen::MatrixXd A(4, 3);
    A << 2.0, 0.1, 0.0,
         0.0, 1.5, 0.2,
         0.1, 0.0, 1.0,
         0.3, 0.3, 0.3;
    Eigen::VectorXd x_true(3);
    x_true << 1.0, 0.0, 2.5;
    const Eigen::VectorXd b = A * x_true;
    const NnlsResult r = nnls(A, b, 100);
    REQUIRE(r.converged);
    CHECK((r.x - x_true).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(r.residual_norm < 1e-10);
}

TEST_CASE("nnls zero rhs gives zero solution") {
    const Eigen::MatrixXd A = Eigen::MatrixXd::Random(5, 3);
    const NnlsResult r = nnls(A, Eigen::VectorXd::Zero(5), 100);
    CHECK(r.converged);
    CHECK(r.x.cwiseAbs().maxCoeff() == 0.0);
    CHECK(r.residual_norm == 0.0);
}

TEST_CASE("nnls satisfies the optimality conditions on random problems") {
    std::mt19937 rng(12345);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::MatrixXd A(6, 4);
        Eigen::VectorXd b(6);
        for (int i = 0; i < 6; ++i) {
            b(i) = gauss(rng);
            for (int j = 0; j < 4; ++j)
                A(i, j) = gauss(rng);
        }
        const NnlsResult r = nnls(A, b, 200);
        REQUIRE(r.converged);
        // Primal feasibility: exact nonnegativity.
        for (int j = 0; j < 4; ++j)
            CHECK(r.x(j) >= 0.0);
        // Dual feasibility and complementary slackness (sufficient for the
        // global optimum of this convex problem).
        const Eigen::VectorXd w = A.transpose() * (b - A * r.x);
        const double scale =
            std::max(1.0, (A.transpose() * b).cwiseAbs().maxCoeff());
        for (int j = 0; j < 4; ++j) {
            CHECK(w(j) <= 1e-8 * scale);
            if (r.x(j) > 0.0)
                CHECK(std::abs(w(j)) <= 1e-8 * scale);
        }
    }
}

// ----------------------------- log discretization -----------------------------

TEST_CASE("single-interval log bath reference values") {
    const DiscretizedBath bath = discretize_log(kJ, kBeta, 1);
    REQUIRE(bath.size() == 1);
    // Geometric midpoint of [0.01, 10] and its interval measure.
    CHECK(bath.frequencies(0) ==
          doctest::Approx(0.31622776601683794).epsilon(1e-14));
    CHECK(bath.weights(0) == doctest::Approx(9.99).epsilon(1e-14));
    CHECK(bath.couplings(0) ==
          doctest::Approx(0.6785163166945215).epsilon(1e-12));
    CHECK_FALSE(bath.has_nonpositive_frequency());
    CHECK(bath.beta == kBeta);
}

TEST_CASE("log bath has geometric structure") {
    const DiscretizedBath bath = discretize_log(kJ, kBeta, 5, 1e-3, small_opts());
    REQUIRE(bath.size() == 5);
    const double ratio = bath.frequencies(1) / bath.frequencies(0);
    for (int k = 1; k < 4; ++k)
        CHECK(bath.frequencies(k + 1) / bath.frequencies(k) ==
              doctest::Approx(ratio).epsilon(1e-12));
    // Interval measures tile [omega_min, omega_max] exactly.
    CHECK(bath.weights.sum() == doctest::Approx(10.0 - 0.01).epsilon(1e-12));
    for (int k = 0; k < 5; ++k)
        CHECK(bath.couplings(k) * bath.couplings(k) ==
              doctest::Approx(bath.weights(k) *
                              quantum_noise_spectrum(kJ, kBeta,
                                                     bath.frequencies(k)))
                  .epsilon(1e-12));
}

TEST_CASE("log bath error decreases as mode count doubles") {
    const double e30 = discretize_log(kJ, kBeta, 30).certification_error;
    const double e60 = discretize_log(kJ, kBeta, 60).certification_error;
    const double e120 = discretize_log(kJ, kBeta, 120).certification_error;
    CHECK(e30 > e60);
    CHECK(e60 > e120);
}

TEST_CASE("log bath rejects invalid arguments") {
    CHECK_THROWS_AS(discretize_log(kJ, kBeta, 0), std::invalid_argument);
    CHECK_THROWS_AS(discretize_log(kJ, kBeta, 10, 1.5), std::invalid_argument);
    CHECK_THROWS_AS(discretize_log(kJ, kBeta, 10, 0.0), std::invalid_argument);
}

// ----------------------------- ID discretization ------------------------------

TEST_CASE("id bath certifies its requested tolerance") {
    const BathFitOptions opts = small_opts();
    for (double tol : {1e-2, 1e-4}) {
        const DiscretizedBath bath = discretize_id(kJ, kBeta, tol, opts);
        CHECK(bath.certification_error <= tol);
        // Weight nonnegativity is exact, frequencies strictly ascend.
        for (int k = 0; k < bath.size(); ++k) {
            CHECK(bath.weights(k) >= 0.0);
            if (k > 0)
                CHECK(bath.frequencies(k) > bath.frequencies(k - 1));
            CHECK(bath.couplings(k) * bath.couplings(k) ==
                  doctest::Approx(bath.weights(k) *
                                  quantum_noise_spectrum(
                                      kJ, kBeta, bath.frequencies(k)))
                      .epsilon(1e-12));
        }
    }
}

TEST_CASE("tighter tolerance never shrinks the id bath") {
    const BathFitOptions opts = small_opts();
    const int loose = discretize_id(kJ, kBeta, 1e-2, opts).size();
    const int tight = discretize_id(kJ, kBeta, 1e-4, opts).size();
    CHECK(tight >= loose);
}

TEST_CASE("stored certification error is reproducible") {
    const BathFitOptions opts = small_opts();
    const DiscretizedBath bath = discretize_id(kJ, kBeta, 1e-3, opts);
    const double recheck = bath_certification_error(bath, kJ, opts);
    CHECK(recheck == bath.certification_error);
}

TEST_CASE("very loose tolerance yields a small bath") {
    const DiscretizedBath bath = discretize_id(kJ, kBeta, 0.5, small_opts());
    CHECK(bath.size() <= 12);
    CHECK(bath.certification_error <= 0.5);
}

TEST_CASE("high-temperature id bath selects negative frequencies") {
    // With substantial thermal occupation the negative-frequency side of the
    // spectrum carries real weight, and the column selection picks it up.
    SpectralDensity warm{0.015, 1.5};
    const DiscretizedBath bath = discretize_id(warm, 0.5, 0.3, small_opts());
    CHECK(bath.has_nonpositive_frequency());
}

TEST_CASE("id bath rejects invalid arguments and impossible requests") {
    CHECK_THROWS_AS(discretize_id(kJ, kBeta, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(discretize_id(kJ, kBeta, -1.0), std::invalid_argument);
    BathFitOptions opts = small_opts();
    opts.max_modes = 3; // far too few columns for this tolerance
    CHECK_THROWS_WITH_AS(discretize_id(kJ, kBeta, 1e-10, opts),
                         doctest::Contains("not certified"),
                         std::runtime_error);
}

// ----------------------------------- file IO ----------------------------------

TEST_CASE("bath file round-trips exactly") {
    const DiscretizedBath bath = discretize_id(kJ, kBeta, 1e-2, small_opts());
    const std::string path = "bath_roundtrip.dat";
    write_bath(bath, path);
    const DiscretizedBath back = read_bath(path);
    REQUIRE(back.size() == bath.size());
    for (int k = 0; k < bath.size(); ++k) {
        CHECK(back.frequencies(k) == bath.frequencies(k));
        CHECK(back.weights(k) == bath.weights(k));
        CHECK(back.couplings(k) == bath.couplings(k));
    }
    CHECK(back.beta == bath.beta);
    CHECK(back.certification_error == bath.certification_error);
    std::remove(path.c_str());
}

TEST_CASE("bath file layout is the documented five-column table") {
    DiscretizedBath bath;
    bath.frequencies = Eigen::VectorXd::Constant(1, 0.25);
    bath.weights = Eigen::VectorXd::Constant(1, 2.0);
    bath.couplings = Eigen::VectorXd::Constant(1, 0.5);
    bath.beta = 4.0;
    bath.certification_error = 1e-3;
    const std::string path = "bath_layout.dat";
    write_bath(bath, path);
    std::ifstream in(path);
    std::string header, row;
    REQUIRE(std::getline(in, header));
    CHECK(header == "# omega_k  z_k  g_k  beta  cert_err");
    REQUIRE(std::getline(in, row));
    std::istringstream fields(row);
    double v;
    int count = 0;
    while (fields >> v)
        ++count;
    CHECK(count == 5);
    std::remove(path.c_str());
}

TEST_CASE("malformed bath file is rejected") {
    const std::string path = "bath_malformed.dat";
    {
        std::ofstream out(path);
        out << "# omega_k  z_k  g_k  beta  cert_err\n";
        out << "0.5 1.0 not_a_number 4.0 1e-3\n";
    }
    CHECK_THROWS_AS(read_bath(path), std::runtime_error);
    std::remove(path.c_str());
    CHECK_THROWS_AS(read_bath("definitely_missing_file.dat"),
                    std::runtime_error);
}
