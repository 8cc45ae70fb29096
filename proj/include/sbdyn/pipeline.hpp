// pipeline.hpp - run orchestration: bath construction, effective-Hamiltonian
// assembly, propagation, exact-reference cross-checks, artifact export,
// trajectory comparison metrics, and a worker pool for sweeps.

#pragma once

#include <atomic>
#include <exception>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <type_traits>
#include <vector>

#include "sbdyn/bath.hpp"
#include "sbdyn/config.hpp"
#include "sbdyn/dynamics.hpp"
#include "sbdyn/tfd.hpp"
#include "sbdyn/trajectory.hpp"

namespace sbdyn {

// A trajectory counts as converged when it completes and its deviation
// diagnostic stays below this threshold throughout.
inline constexpr double kDeviationThreshold = 1e-2;

// --------------------------- trajectory comparison ----------------------------

struct ComparisonMetrics {
    double max_abs_diff = 0.0;
    double rms_diff = 0.0;
    // First time (on a's grid) where |sigma_z difference| exceeds the
    // divergence threshold; NaN when it never does.
    double first_crossing = std::numeric_limits<double>::quiet_NaN();
    int n_points = 0;  // overlapping samples compared

    bool has_crossing() const { return first_crossing == first_crossing; }
};

// Compares sigma_z records: b is interpolated linearly onto a's time grid
// over the overlapping range.  Throws std::invalid_argument when either
// trajectory is empty or the time ranges are disjoint.
ComparisonMetrics compare_trajectories(const Trajectory& a, const Trajectory& b,
                                       double divergence_threshold = 1e-2);

// ------------------------------- run pipeline ---------------------------------

struct RunTimings {
    double bath_seconds = 0.0;
    double propagate_seconds = 0.0;
    double oracle_seconds = 0.0;
    double total_seconds = 0.0;
};

struct RunResult {
    RunConfig config;
    DiscretizedBath bath_left, bath_right;
    EffectiveHamiltonian H;
    Trajectory trajectory;
    Trajectory oracle;  // empty unless oracle_run
    bool oracle_run = false;
    bool aborted = false;
    bool converged = false;  // completed with max_sigma2 < kDeviationThreshold
    double max_sigma2 = std::numeric_limits<double>::infinity();
    Regime regime = Regime::weak;
    std::vector<std::string> warnings;
    RunTimings timings;
};

// Discretizes one bath per the config scheme (left = true selects the left
// bath's spectral parameters and temperature).  The fit window follows the
// run horizon.
DiscretizedBath build_bath(const RunConfig& cfg, bool left);

// Full pipeline: both baths -> doubled-mode effective Hamiltonian ->
// variational propagation -> (optional) truncated-Fock reference.  Solver
// aborts are reported through RunResult::aborted with the partial trajectory
// retained, not thrown.
RunResult execute_run(const RunConfig& cfg);

// JSON summary naming (at minimum) the regime label, the bath certification
// errors, and the maximum of the deviation diagnostic.  Serialized with
// 2-space indentation; parseable by any JSON reader.
std::string run_summary(const RunResult& r);

// Writes into `out_dir` (created if absent): config.cfg (canonical form),
// trajectory.dat, bath_left.dat, bath_right.dat, summary.json, and the
// figure-ready column files population.dat (t, sigma_z) and deviation.dat
// (t, sigma^2; thinned to the configured sigma2 stride).  When the oracle
// ran, also oracle.dat.  Returns the summary JSON text.
std::string write_run_result(const RunResult& r, const std::string& out_dir);

// -------------------------------- worker pool ---------------------------------

// SBDYN_WORKERS when set (clamped to >= 1), else the hardware concurrency.
int default_worker_count();

// Applies `fn` to every item on `workers` threads.  Results land in slots
// indexed by input position and exceptions are rethrown for the lowest
// failing index, so output content is independent of scheduling.
template <typename In, typename Fn>
auto parallel_map(const std::vector<In>& items, Fn fn, int workers = 0)
    -> std::vector<std::invoke_result_t<Fn&, const In&>> {
    using Out = std::invoke_result_t<Fn&, const In&>;
    if (workers <= 0) workers = default_worker_count();
    const int n = static_cast<int>(items.size());
    std::vector<std::optional<Out>> slots(n);
    std::vector<std::exception_ptr> errors(n);
    std::atomic<int> next{0};
    auto body = [&]() {
        while (true) {
            const int i = next.fetch_add(1);
            if (i >= n) break;
            try {
                slots[i].emplace(fn(items[i]));
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (workers <= 1 || n <= 1) {
        body();
    } else {
        std::vector<std::thread> pool;
        const int spawn = std::min(workers, n);
        pool.reserve(spawn);
        for (int t = 0; t < spawn; ++t) pool.emplace_back(body);
        for (std::thread& t : pool) t.join();
    }
    for (int i = 0; i < n; ++i)
        if (errors[i]) std::rethrow_exception(errors[i]);
    std::vector<Out> out;
    out.reserve(n);
    for (int i = 0; i < n; ++i) out.push_back(std::move(*slots[i]));
    return out;
}

// Same two-stage protocol and convergence rule as convergence_sweep, but
// every requested value is dispatched to the worker pool up front (no early
// stop), so stage arrays cover the full lists.  The reported converged
// values coincide with the sequential protocol's.
SweepResult parallel_convergence_sweep(
    const PropagationConfig& base, const std::vector<int>& multiplicities,
    const std::function<EffectiveHamiltonian(int)>& bath_for_size,
    const std::vector<int>& bath_sizes, double tol_sigma_z = 0.02,
    double tol_deviation = 1e-2, int workers = 0);

// JSON report of a sweep: per-stage value/diff/deviation tables plus the
// converged flags.
std::string sweep_report(const SweepResult& res);

} // namespace sbdyn
