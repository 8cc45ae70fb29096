// config.hpp - run configuration: plain-text schema, validation, canonical
// serialization, and coupling-regime classification.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>

#include "sbdyn/ansatz.hpp"

namespace sbdyn {

// ------------------------------- configuration -------------------------------

enum class DiscretizationScheme { log_grid, id_nnls };

std::string scheme_name(DiscretizationScheme s);
DiscretizationScheme parse_scheme(const std::string& name);

// Optional exact-reference block: propagate the same effective Hamiltonian in
// a truncated Fock space alongside the variational run (desk-scale systems
// only; the Fock dimension grows exponentially in the mode count).
struct OracleBlock {
    bool enabled = false;
    int n_max = 4;            // initial uniform per-mode cutoff
    double tolerance = 1e-4;  // cutoff certification target on sigma_z

    friend bool operator==(const OracleBlock&, const OracleBlock&) = default;
};

// All quantities are expressed in units of the qubit splitting omega0 (and
// hbar = k_B = 1); omega0_eV is carried into outputs as metadata for
// dimensional reconstruction but never used in any computation.
struct RunConfig {
    // Spectral density per bath (shared keys `alpha` / `omega_c` set both).
    double alpha_left = 0.0;
    double alpha_right = 0.0;
    double omega_c_left = 0.0;
    double omega_c_right = 0.0;

    // Bath temperatures.  The shared key `T` sets a mean value with the fixed
    // relative split T_left/right = T * (1 +/- 0.005), i.e. a difference of
    // 0.01 T with the left bath hotter.
    double T_left = 0.0;
    double T_right = 0.0;

    // Discretization: `n_modes` applies per bath to the logarithmic scheme,
    // `id_tolerance` is the certified correlation-function error target of
    // the interpolative scheme.  The candidate band edge is
    // omega_max_mult * omega_c (per bath).
    DiscretizationScheme scheme = DiscretizationScheme::log_grid;
    int n_modes = 12;
    double id_tolerance = 0.05;
    double omega_max_mult = 10.0;

    // Trial-state parameters.
    int multiplicity = 0;  // required; number of coherent configurations
    double noise_amplitude = 1e-4;
    std::uint64_t seed = 1;
    QubitInit init = QubitInit::up;

    // Integrator.
    double dt = 0.01;
    double t_final = 10.0;
    int output_stride = 10;   // observable recording stride (steps)
    int sigma2_stride = 10;   // deviation-column thinning in exported files

    // The propagator implements a pure sigma_z qubit term; a transverse
    // tunneling term is not part of the equations of motion, so any nonzero
    // value is rejected at parse time rather than silently ignored.
    double tunneling = 0.0;

    // Zero-temperature critical coupling entering classify_regime.  No
    // quantitative fidelity is claimed for the default.
    double alpha_c0 = 1.0;

    double omega0_eV = 1.0;  // metadata only

    OracleBlock oracle;

    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

// Raised for schema, type, and cross-field violations; messages are anchored
// as "<source>:<line>: ..." where a line is attributable.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Parses the line-oriented `key = value` format ('#' starts a comment,
// blank lines ignored).  Unknown keys, duplicate keys, malformed values,
// missing required keys (temperature, spectral density, multiplicity), and
// invariant violations (non-positive physical scales, nonzero tunneling,
// conflicting shared/per-bath keys) all raise ConfigError.
RunConfig parse_config(std::istream& in,
                       const std::string& source_name = "<config>");
RunConfig parse_config_file(const std::string& path);

// Canonical form: every field written once as `key = value` with per-bath
// temperatures and spectral parameters explicit.  parse(serialize(c)) == c.
std::string serialize_config(const RunConfig& cfg);

// Advisory (non-fatal) stability note: resolving a mode of frequency omega
// wants several steps per period, so dt >= 1/max|omega_k| merits a warning.
// Returns the message, or nullopt when the step is fine.
std::optional<std::string> timestep_advisory(double dt, double max_frequency);

// ---------------------------- regime classification ---------------------------

enum class Regime { weak, intermediate, strong };

std::string regime_name(Regime r);

// Temperature-corrected coupling bands around the critical coupling
// alpha_c(T) = alpha_c0 / (1 + omega_c / T):
//   weak:          alpha <  0.1 * alpha_c(T)
//   intermediate:  0.1 * alpha_c(T) <= alpha <= alpha_c(T)   (closed)
//   strong:        alpha >  alpha_c(T)
// All inputs must be positive.
Regime classify_regime(double alpha, double omega_c, double T,
                       double alpha_c0 = 1.0);

} // namespace sbdyn
