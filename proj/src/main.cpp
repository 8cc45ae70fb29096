// main.cpp - command-line interface: bath discretization, configured runs,
// convergence sweeps, exact-reference propagation, trajectory comparison,
// and spectrum export.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sbdyn/ansatz.hpp"
#include "sbdyn/bath.hpp"
#include "sbdyn/config.hpp"
#include "sbdyn/oracle.hpp"
#include "sbdyn/pipeline.hpp"
#include "sbdyn/tfd.hpp"
#include "sbdyn/trajectory.hpp"

namespace {

using sbdyn::format_g17;

constexpr int kExitOk = 0;
constexpr int kExitError = 1;    // config / usage / IO errors
constexpr int kExitAborted = 2;  // solver abort; partial artifacts preserved

struct BathArgs {
    double alpha = 0.1;
    double omega_c = 1.0;
    double temperature = 1.0;
    std::string scheme = "log";
    int modes = 12;
    double tolerance = 0.05;
    double omega_max_mult = 10.0;
    double horizon = 10.0;
    std::string out = "bath.dat";
};

int cmd_bath(const BathArgs& a) {
    const sbdyn::SpectralDensity J{a.alpha, a.omega_c};
    const double beta = 1.0 / a.temperature;
    sbdyn::BathFitOptions opts;
    opts.t_max = a.horizon;
    opts.omega_max = a.omega_max_mult * a.omega_c;
    const sbdyn::DiscretizedBath bath =
        a.scheme == "id" ? sbdyn::discretize_id(J, beta, a.tolerance, opts)
                         : sbdyn::discretize_log(J, beta, a.modes, 1e-3, opts);
    sbdyn::write_bath(bath, a.out);
    std::cout << "modes " << bath.size() << "\n"
              << "certification_error " << format_g17(bath.certification_error)
              << "\n"
              << "written " << a.out << "\n";
    return kExitOk;
}

struct Overrides {
    int multiplicity = -1;
    double dt = -1.0;
    double t_final = -1.0;
    long long seed = -1;
    double noise = -1.0;
    std::string qubit_init;
    int n_modes = -1;
};

void apply_overrides(sbdyn::RunConfig& cfg, const Overrides& ov) {
    if (ov.multiplicity > 0) cfg.multiplicity = ov.multiplicity;
    if (ov.dt > 0.0) cfg.dt = ov.dt;
    if (ov.t_final >= 0.0) cfg.t_final = ov.t_final;
    if (ov.seed >= 0) cfg.seed = static_cast<std::uint64_t>(ov.seed);
    if (ov.noise >= 0.0) cfg.noise_amplitude = ov.noise;
    if (!ov.qubit_init.empty()) cfg.init = sbdyn::parse_qubit_init(ov.qubit_init);
    if (ov.n_modes > 0) cfg.n_modes = ov.n_modes;
}

int cmd_run(const std::string& config_path, const std::string& out_dir,
            const Overrides& ov) {
    sbdyn::RunConfig cfg = sbdyn::parse_config_file(config_path);
    apply_overrides(cfg, ov);
    const sbdyn::RunResult result = sbdyn::execute_run(cfg);
    const std::string summary = sbdyn::write_run_result(result, out_dir);
    std::cout << summary;
    if (result.aborted) {
        std::cerr << "run aborted: "
                  << result.trajectory.metadata.at("aborted")
                  << " (partial artifacts in " << out_dir << ")\n";
        return kExitAborted;
    }
    return kExitOk;
}

int cmd_sweep(const std::string& config_path, const std::string& out_dir,
              std::vector<int> multiplicities, std::vector<int> bath_sizes,
              double tol_sigma_z, double tol_deviation, int workers,
              const Overrides& ov) {
    sbdyn::RunConfig cfg = sbdyn::parse_config_file(config_path);
    apply_overrides(cfg, ov);
    if (multiplicities.empty()) multiplicities = {cfg.multiplicity};
    if (bath_sizes.empty()) bath_sizes = {cfg.n_modes};

    const sbdyn::DiscretizedBath left = sbdyn::build_bath(cfg, true);
    const sbdyn::DiscretizedBath right = sbdyn::build_bath(cfg, false);

    sbdyn::PropagationConfig base;
    base.H = sbdyn::build_effective_hamiltonian(left, 1.0 / cfg.T_left, right,
                                                1.0 / cfg.T_right, 1.0);
    base.multiplicity = cfg.multiplicity;
    base.init = cfg.init;
    base.noise_amplitude = cfg.noise_amplitude;
    base.seed = cfg.seed;
    base.dt = cfg.dt;
    base.t_final = cfg.t_final;
    base.output_stride = cfg.output_stride;

    // The bath stage always sweeps the logarithmic discretization mode count;
    // sizes for the interpolative scheme are tolerance-driven, not counted.
    auto bath_for_size = [&](int n) {
        sbdyn::RunConfig c = cfg;
        c.scheme = sbdyn::DiscretizationScheme::log_grid;
        c.n_modes = n;
        const sbdyn::DiscretizedBath l = sbdyn::build_bath(c, true);
        const sbdyn::DiscretizedBath r = sbdyn::build_bath(c, false);
        return sbdyn::build_effective_hamiltonian(l, 1.0 / c.T_left, r,
                                                  1.0 / c.T_right, 1.0);
    };

    const sbdyn::SweepResult res = sbdyn::parallel_convergence_sweep(
        base, multiplicities, bath_for_size, bath_sizes, tol_sigma_z,
        tol_deviation, workers);
    const std::string report = sbdyn::sweep_report(res);

    std::filesystem::create_directories(out_dir);
    std::ofstream out(std::filesystem::path(out_dir) / "sweep.json");
    out << report;
    std::cout << report;
    return kExitOk;
}

int cmd_oracle(const std::string& config_path, const std::string& out_dir) {
    const sbdyn::RunConfig cfg = sbdyn::parse_config_file(config_path);
    const sbdyn::DiscretizedBath left = sbdyn::build_bath(cfg, true);
    const sbdyn::DiscretizedBath right = sbdyn::build_bath(cfg, false);

    sbdyn::FockConfig fc;
    fc.H = sbdyn::build_effective_hamiltonian(left, 1.0 / cfg.T_left, right,
                                              1.0 / cfg.T_right, 1.0);
    fc.n_max = cfg.oracle.n_max;
    fc.qubit_init = cfg.init;
    fc.dt = cfg.dt;
    fc.t_final = cfg.t_final;
    fc.output_stride = cfg.output_stride;
    fc.certify_tolerance = cfg.oracle.tolerance;
    const sbdyn::Trajectory traj = sbdyn::exact_propagate(fc);

    std::filesystem::create_directories(out_dir);
    sbdyn::write_trajectory(
        traj, (std::filesystem::path(out_dir) / "oracle.dat").string());

    nlohmann::json j;
    j["samples"] = traj.size();
    for (const char* key : {"n_max", "cutoff_certified", "cutoff_bound"}) {
        auto it = traj.metadata.find(key);
        j[key] = it == traj.metadata.end() ? nlohmann::json(nullptr)
                                           : nlohmann::json(it->second);
    }
    const std::string text = j.dump(2) + "\n";
    std::ofstream out(std::filesystem::path(out_dir) / "oracle_summary.json");
    out << text;
    std::cout << text;
    return kExitOk;
}

int cmd_compare(const std::string& path_a, const std::string& path_b,
                double threshold) {
    const sbdyn::Trajectory a = sbdyn::read_trajectory(path_a);
    const sbdyn::Trajectory b = sbdyn::read_trajectory(path_b);
    const sbdyn::ComparisonMetrics m =
        sbdyn::compare_trajectories(a, b, threshold);
    nlohmann::json j;
    j["max_abs_diff"] = m.max_abs_diff;
    j["rms_diff"] = m.rms_diff;
    j["first_crossing"] = m.has_crossing() ? nlohmann::json(m.first_crossing)
                                           : nlohmann::json(nullptr);
    j["n_points"] = m.n_points;
    j["threshold"] = threshold;
    std::cout << j.dump(2) << "\n";
    return kExitOk;
}

int cmd_spectrum(const std::string& in_path, const std::string& out_path) {
    const sbdyn::Trajectory traj = sbdyn::read_trajectory(in_path);
    const sbdyn::SpectrumTable spec =
        sbdyn::series_spectrum(traj.times, traj.sigma_z);
    std::ofstream out(out_path);
    if (!out) {
        std::cerr << "cannot open " << out_path << " for writing\n";
        return kExitError;
    }
    out << "# omega amplitude\n";
    for (int i = 0; i < spec.omega.size(); ++i)
        out << format_g17(spec.omega(i)) << " "
            << format_g17(spec.amplitude(i)) << "\n";
    std::cout << "peaks " << spec.omega.size() << "\nwritten " << out_path
              << "\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"qubit-boson dynamics with a multi-configuration "
                 "coherent-state ansatz at finite temperature"};
    app.require_subcommand(1);

    BathArgs bath_args;
    CLI::App* bath = app.add_subcommand(
        "bath", "discretize a spectral density and certify the result");
    bath->add_option("--alpha", bath_args.alpha, "coupling strength")
        ->required();
    bath->add_option("--omega-c", bath_args.omega_c, "cutoff frequency")
        ->required();
    bath->add_option("--temperature", bath_args.temperature,
                     "bath temperature")
        ->required();
    bath->add_option("--scheme", bath_args.scheme, "log or id")
        ->check(CLI::IsMember({"log", "id"}));
    bath->add_option("--modes", bath_args.modes, "mode count (log scheme)");
    bath->add_option("--tolerance", bath_args.tolerance,
                     "certified error target (id scheme)");
    bath->add_option("--omega-max-mult", bath_args.omega_max_mult,
                     "band edge as a multiple of omega_c");
    bath->add_option("--horizon", bath_args.horizon,
                     "correlation-function fit window");
    bath->add_option("--out", bath_args.out, "output file");

    std::string config_path, out_dir = "out";
    Overrides ov;
    auto add_overrides = [&](CLI::App* cmd) {
        cmd->add_option("--multiplicity", ov.multiplicity,
                        "override trial-state multiplicity");
        cmd->add_option("--dt", ov.dt, "override time step");
        cmd->add_option("--t-final", ov.t_final, "override final time");
        cmd->add_option("--seed", ov.seed, "override noise seed");
        cmd->add_option("--noise", ov.noise, "override noise amplitude");
        cmd->add_option("--qubit-init", ov.qubit_init,
                        "override initial qubit state (up/down/plus_x)");
        cmd->add_option("--n-modes", ov.n_modes,
                        "override per-bath mode count (log scheme)");
    };

    CLI::App* run = app.add_subcommand(
        "run", "execute a configured run and export all artifacts");
    run->add_option("--config", config_path, "configuration file")->required();
    run->add_option("--out", out_dir, "output directory");
    add_overrides(run);

    std::vector<int> sweep_M, sweep_modes;
    double tol_sigma_z = 0.02, tol_deviation = sbdyn::kDeviationThreshold;
    int workers = 0;
    CLI::App* sweep = app.add_subcommand(
        "sweep", "two-stage convergence sweep over multiplicity and bath size");
    sweep->add_option("--config", config_path, "configuration file")
        ->required();
    sweep->add_option("--out", out_dir, "output directory");
    sweep->add_option("--M", sweep_M, "multiplicities to sweep (nondecreasing)")
        ->delimiter(',');
    sweep->add_option("--bath-modes", sweep_modes,
                      "per-bath mode counts to sweep (nondecreasing)")
        ->delimiter(',');
    sweep->add_option("--tol-sigma-z", tol_sigma_z,
                      "population agreement tolerance");
    sweep->add_option("--tol-deviation", tol_deviation,
                      "deviation diagnostic tolerance");
    sweep->add_option("--workers", workers,
                      "worker threads (default: SBDYN_WORKERS or hardware)");
    add_overrides(sweep);

    CLI::App* oracle = app.add_subcommand(
        "oracle", "exact truncated-Fock reference propagation");
    oracle->add_option("--config", config_path, "configuration file")
        ->required();
    oracle->add_option("--out", out_dir, "output directory");

    std::string path_a, path_b;
    double threshold = 1e-2;
    CLI::App* compare = app.add_subcommand(
        "compare", "sigma_z difference metrics between two trajectory files");
    compare->add_option("--a", path_a, "reference trajectory file")->required();
    compare->add_option("--b", path_b, "trajectory file compared against it")
        ->required();
    compare->add_option("--threshold", threshold,
                        "divergence threshold for the first-crossing time");

    std::string spec_in, spec_out = "spectrum.dat";
    CLI::App* spectrum = app.add_subcommand(
        "spectrum", "one-sided amplitude spectrum of a sigma_z record");
    spectrum->add_option("--in", spec_in, "trajectory file")->required();
    spectrum->add_option("--out", spec_out, "output column file");

    CLI11_PARSE(app, argc, argv);

    try {
        if (bath->parsed()) return cmd_bath(bath_args);
        if (run->parsed()) return cmd_run(config_path, out_dir, ov);
        if (sweep->parsed())
            return cmd_sweep(config_path, out_dir, sweep_M, sweep_modes,
                             tol_sigma_z, tol_deviation, workers, ov);
        if (oracle->parsed()) return cmd_oracle(config_path, out_dir);
        if (compare->parsed()) return cmd_compare(path_a, path_b, threshold);
        if (spectrum->parsed()) return cmd_spectrum(spec_in, spec_out);
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kExitError;
    }
    return kExitError;
}
