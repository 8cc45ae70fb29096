// pipeline.cpp - run orchestration, comparison metrics, artifact export,
// and the parallel sweep driver.

#include "sbdyn/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "sbdyn/ansatz.hpp"
#include "sbdyn/common.hpp"
#include "sbdyn/oracle.hpp"

namespace sbdyn {

namespace {

using json = nlohmann::json;
using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point t0) {
    return std::chrono::duration<double>(clock_type::now() - t0).count();
}

double max_norm_error(const Trajectory& t) {
    return t.size() > 0 ? (t.norm.array() - 1.0).abs().maxCoeff() : 0.0;
}

double relative_energy_drift(const Trajectory& t) {
    if (t.size() == 0) return 0.0;
    const double e0 = t.energy(0);
    return (t.energy.array() - e0).abs().maxCoeff() /
           std::max(1.0, std::abs(e0));
}

json finite_or_null(double x) {
    if (std::isfinite(x)) return x;
    return nullptr;
}

void write_columns(const std::string& path, const std::string& header,
                   const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                   int stride) {
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot open " + path + " for writing");
    out << "# " << header << "\n";
    for (int i = 0; i < x.size(); i += stride)
        out << format_g17(x(i)) << " " << format_g17(y(i)) << "\n";
    // The final sample is always included so the plotted horizon matches the
    // run horizon regardless of the thinning stride.
    if (x.size() > 0 && (x.size() - 1) % stride != 0)
        out << format_g17(x(x.size() - 1)) << " "
            << format_g17(y(x.size() - 1)) << "\n";
}

} // namespace

// --------------------------- trajectory comparison ----------------------------

ComparisonMetrics compare_trajectories(const Trajectory& a, const Trajectory& b,
                                       double divergence_threshold) {
    if (a.size() == 0 || b.size() == 0)
        throw std::invalid_argument(
            "compare_trajectories: empty trajectory record");
    const double lo = std::max(a.times(0), b.times(0));
    const double hi =
        std::min(a.times(a.size() - 1), b.times(b.size() - 1));
    if (!(lo <= hi))
        throw std::invalid_argument(
            "compare_trajectories: time ranges are disjoint");

    ComparisonMetrics m;
    double sumsq = 0.0;
    int j = 0;
    const double slack = 1e-12 * std::max(1.0, std::abs(hi));
    for (int i = 0; i < a.size(); ++i) {
        const double t = a.times(i);
        if (t < lo - slack || t > hi + slack) continue;
        while (j + 1 < b.size() && b.times(j + 1) < t) ++j;
        double bv;
        if (j + 1 >= b.size()) {
            bv = b.sigma_z(b.size() - 1);
        } else {
            const double t0 = b.times(j), t1 = b.times(j + 1);
            const double w =
                t1 > t0 ? std::clamp((t - t0) / (t1 - t0), 0.0, 1.0) : 0.0;
            bv = (1.0 - w) * b.sigma_z(j) + w * b.sigma_z(j + 1);
        }
        const double diff = std::abs(a.sigma_z(i) - bv);
        m.max_abs_diff = std::max(m.max_abs_diff, diff);
        sumsq += diff * diff;
        ++m.n_points;
        if (!m.has_crossing() && diff > divergence_threshold)
            m.first_crossing = t;
    }
    if (m.n_points > 0) m.rms_diff = std::sqrt(sumsq / m.n_points);
    return m;
}

// ------------------------------- run pipeline ---------------------------------

DiscretizedBath build_bath(const RunConfig& cfg, bool left) {
    const SpectralDensity J{left ? cfg.alpha_left : cfg.alpha_right,
                            left ? cfg.omega_c_left : cfg.omega_c_right};
    const double T = left ? cfg.T_left : cfg.T_right;
    const double beta = 1.0 / T;
    BathFitOptions opts;
    opts.t_max = cfg.t_final > 0.0 ? cfg.t_final : opts.t_max;
    opts.omega_max = cfg.omega_max_mult * J.omega_c;
    if (cfg.scheme == DiscretizationScheme::id_nnls)
        return discretize_id(J, beta, cfg.id_tolerance, opts);
    return discretize_log(J, beta, cfg.n_modes, 1e-3, opts);
}

RunResult execute_run(const RunConfig& cfg) {
    RunResult r;
    r.config = cfg;
    const auto t_start = clock_type::now();

    const auto t_bath = clock_type::now();
    r.bath_left = build_bath(cfg, true);
    r.bath_right = build_bath(cfg, false);
    r.timings.bath_seconds = seconds_since(t_bath);

    r.H = build_effective_hamiltonian(r.bath_left, 1.0 / cfg.T_left,
                                      r.bath_right, 1.0 / cfg.T_right, 1.0);

    const double max_freq =
        r.H.epsilon.size() > 0 ? r.H.epsilon.cwiseAbs().maxCoeff() : 0.0;
    if (auto note = timestep_advisory(cfg.dt, max_freq)) {
        r.warnings.push_back(*note);
    }

    r.regime = classify_regime(0.5 * (cfg.alpha_left + cfg.alpha_right),
                               0.5 * (cfg.omega_c_left + cfg.omega_c_right),
                               0.5 * (cfg.T_left + cfg.T_right), cfg.alpha_c0);

    PropagationConfig pc;
    pc.H = r.H;
    pc.multiplicity = cfg.multiplicity;
    pc.init = cfg.init;
    pc.noise_amplitude = cfg.noise_amplitude;
    pc.seed = cfg.seed;
    pc.dt = cfg.dt;
    pc.t_final = cfg.t_final;
    pc.output_stride = cfg.output_stride;

    const auto t_prop = clock_type::now();
    r.trajectory = run_trajectory(pc);
    r.timings.propagate_seconds = seconds_since(t_prop);

    r.aborted = r.trajectory.metadata.count("aborted") > 0;
    if (r.trajectory.size() > 0) r.max_sigma2 = r.trajectory.deviation.maxCoeff();
    r.converged = !r.aborted && r.trajectory.size() > 0 &&
                  r.max_sigma2 < kDeviationThreshold;

    if (cfg.oracle.enabled) {
        FockConfig fc;
        fc.H = r.H;
        fc.n_max = cfg.oracle.n_max;
        fc.qubit_init = cfg.init;
        fc.dt = cfg.dt;
        fc.t_final = cfg.t_final;
        fc.output_stride = cfg.output_stride;
        fc.certify = true;
        fc.certify_tolerance = cfg.oracle.tolerance;
        const auto t_oracle = clock_type::now();
        r.oracle = exact_propagate(fc);
        r.timings.oracle_seconds = seconds_since(t_oracle);
        r.oracle_run = true;
    }

    r.timings.total_seconds = seconds_since(t_start);
    return r;
}

std::string run_summary(const RunResult& r) {
    const RunConfig& cfg = r.config;
    json j;
    j["regime"] = regime_name(r.regime);
    j["converged"] = r.converged;
    j["aborted"] = r.aborted;
    j["max_sigma2"] = finite_or_null(r.max_sigma2);
    j["deviation_threshold"] = kDeviationThreshold;
    j["omega0_eV"] = cfg.omega0_eV;

    auto bath_block = [&](const DiscretizedBath& bath, double T) {
        json b;
        b["scheme"] = scheme_name(cfg.scheme);
        b["modes"] = bath.size();
        b["certification_error"] = bath.certification_error;
        b["beta"] = 1.0 / T;
        b["temperature"] = T;
        return b;
    };
    j["bath"]["left"] = bath_block(r.bath_left, cfg.T_left);
    j["bath"]["right"] = bath_block(r.bath_right, cfg.T_right);

    json t;
    t["samples"] = r.trajectory.size();
    t["multiplicity"] = cfg.multiplicity;
    t["dt"] = cfg.dt;
    t["t_final"] = cfg.t_final;
    t["final_sigma_z"] = r.trajectory.size() > 0
                             ? json(r.trajectory.sigma_z(r.trajectory.size() - 1))
                             : json(nullptr);
    t["max_norm_error"] = max_norm_error(r.trajectory);
    t["relative_energy_drift"] = relative_energy_drift(r.trajectory);
    auto meta_int = [&](const char* key) {
        auto it = r.trajectory.metadata.find(key);
        return it == r.trajectory.metadata.end() ? 0 : std::stoi(it->second);
    };
    t["ridge_escalations"] = meta_int("ridge_escalations");
    t["direct_fallbacks"] = meta_int("direct_fallbacks");
    if (r.aborted) t["abort_reason"] = r.trajectory.metadata.at("aborted");
    j["trajectory"] = t;

    j["timings"]["bath_seconds"] = r.timings.bath_seconds;
    j["timings"]["propagate_seconds"] = r.timings.propagate_seconds;
    j["timings"]["oracle_seconds"] = r.timings.oracle_seconds;
    j["timings"]["total_seconds"] = r.timings.total_seconds;
    j["warnings"] = r.warnings;

    if (r.oracle_run) {
        json o;
        o["samples"] = r.oracle.size();
        auto meta = [&](const char* key) -> json {
            auto it = r.oracle.metadata.find(key);
            return it == r.oracle.metadata.end() ? json(nullptr)
                                                 : json(it->second);
        };
        o["n_max"] = meta("n_max");
        o["cutoff_certified"] = meta("cutoff_certified");
        o["cutoff_bound"] = meta("cutoff_bound");
        if (!r.aborted && r.trajectory.size() > 0 && r.oracle.size() > 0) {
            const ComparisonMetrics m =
                compare_trajectories(r.trajectory, r.oracle);
            o["comparison"]["max_abs_diff"] = m.max_abs_diff;
            o["comparison"]["rms_diff"] = m.rms_diff;
            o["comparison"]["first_crossing"] =
                m.has_crossing() ? json(m.first_crossing) : json(nullptr);
            o["comparison"]["n_points"] = m.n_points;
        }
        j["oracle"] = o;
    }
    return j.dump(2) + "\n";
}

std::string write_run_result(const RunResult& r, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const fs::path dir(out_dir);

    {
        std::ofstream out(dir / "config.cfg");
        out << serialize_config(r.config);
    }
    write_trajectory(r.trajectory, (dir / "trajectory.dat").string());
    write_bath(r.bath_left, (dir / "bath_left.dat").string());
    write_bath(r.bath_right, (dir / "bath_right.dat").string());

    if (r.trajectory.size() > 0) {
        write_columns((dir / "population.dat").string(), "t sigma_z",
                      r.trajectory.times, r.trajectory.sigma_z, 1);
        const int thin = std::max(
            1, r.config.sigma2_stride / std::max(1, r.config.output_stride));
        write_columns((dir / "deviation.dat").string(), "t sigma2",
                      r.trajectory.times, r.trajectory.deviation, thin);
    }
    if (r.oracle_run)
        write_trajectory(r.oracle, (dir / "oracle.dat").string());

    const std::string summary = run_summary(r);
    {
        std::ofstream out(dir / "summary.json");
        out << summary;
    }
    return summary;
}

// -------------------------------- worker pool ---------------------------------

int default_worker_count() {
    if (const char* env = std::getenv("SBDYN_WORKERS")) {
        char* end = nullptr;
        const long n = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && n >= 1)
            return static_cast<int>(n);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

// ------------------------------- parallel sweep -------------------------------

namespace {

SweepStage parallel_stage(const std::vector<int>& values,
                          const std::function<PropagationConfig(int)>& make,
                          double tol_sigma_z, double tol_deviation,
                          int workers) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    SweepStage stage;
    stage.values = values;
    const std::vector<Trajectory> runs = parallel_map(
        values, [&](const int& v) { return run_trajectory(make(v)); },
        workers);

    for (const Trajectory& tr : runs)
        stage.max_deviations.push_back(
            tr.deviation.size() > 0 ? tr.deviation.maxCoeff() : inf);
    for (std::size_t i = 1; i < runs.size(); ++i) {
        double diff = inf;
        const bool aborted = runs[i].metadata.count("aborted") > 0;
        if (!aborted && runs[i].sigma_z.size() == runs[i - 1].sigma_z.size() &&
            runs[i].sigma_z.size() > 0)
            diff = (runs[i].sigma_z - runs[i - 1].sigma_z).cwiseAbs().maxCoeff();
        stage.max_diffs.push_back(diff);
        if (stage.converged < 0 && diff < tol_sigma_z &&
            stage.max_deviations[i - 1] < tol_deviation)
            stage.converged = stage.values[i - 1];
    }
    if (stage.converged < 0 && stage.values.size() == 1 &&
        stage.max_deviations[0] < tol_deviation)
        stage.converged = stage.values[0];
    return stage;
}

bool stage_nondecreasing(const std::vector<int>& xs) {
    for (std::size_t i = 1; i < xs.size(); ++i)
        if (xs[i] < xs[i - 1]) return false;
    return true;
}

} // namespace

SweepResult parallel_convergence_sweep(
    const PropagationConfig& base, const std::vector<int>& multiplicities,
    const std::function<EffectiveHamiltonian(int)>& bath_for_size,
    const std::vector<int>& bath_sizes, double tol_sigma_z,
    double tol_deviation, int workers) {
    if (!stage_nondecreasing(multiplicities) || !stage_nondecreasing(bath_sizes))
        throw std::invalid_argument(
            "parallel_convergence_sweep: sweep lists must be nondecreasing");

    SweepResult res;
    res.multiplicity_stage = parallel_stage(
        multiplicities,
        [&](int m) {
            PropagationConfig c = base;
            c.multiplicity = m;
            return c;
        },
        tol_sigma_z, tol_deviation, workers);
    res.converged_multiplicity = res.multiplicity_stage.converged;
    if (res.converged_multiplicity < 0) return res;

    res.bath_stage = parallel_stage(
        bath_sizes,
        [&](int n) {
            PropagationConfig c = base;
            c.multiplicity = res.converged_multiplicity;
            c.H = bath_for_size(n);
            return c;
        },
        tol_sigma_z, tol_deviation, workers);
    res.converged_bath_size = res.bath_stage.converged;
    res.converged = res.converged_bath_size >= 0;
    return res;
}

std::string sweep_report(const SweepResult& res) {
    json j;
    auto stage_block = [](const SweepStage& s) {
        json b;
        b["values"] = s.values;
        json diffs = json::array();
        for (double d : s.max_diffs) diffs.push_back(finite_or_null(d));
        b["max_sigma_z_diffs"] = diffs;
        json devs = json::array();
        for (double d : s.max_deviations) devs.push_back(finite_or_null(d));
        b["max_deviations"] = devs;
        b["converged_value"] = s.converged;
        return b;
    };
    j["multiplicity_stage"] = stage_block(res.multiplicity_stage);
    j["bath_stage"] = stage_block(res.bath_stage);
    j["converged"] = res.converged;
    j["converged_multiplicity"] = res.converged_multiplicity;
    j["converged_bath_size"] = res.converged_bath_size;
    return j.dump(2) + "\n";
}

} // namespace sbdyn
