// trajectory.hpp - time-series record shared by the variational propagator
// and the exact reference propagator, plus its text serialization.

#pragma once

#include <map>
#include <string>

#include <Eigen/Dense>

namespace sbdyn {

// One row per output step; all columns share the same length.  `deviation`
// holds the squared Schrodinger-residual diagnostic (identically zero for
// exact propagation).  Free-form metadata records run provenance
// (multiplicity, mode counts, step size, seed, bath files, regularization
// events, ...).
struct Trajectory {
    Eigen::VectorXd times;
    Eigen::VectorXd sigma_z;
    Eigen::VectorXd norm;
    Eigen::VectorXd energy;
    Eigen::VectorXd deviation;
    std::map<std::string, std::string> metadata;

    int size() const { return static_cast<int>(times.size()); }
};

// Plain-text format: `# trajectory`, `# meta <key> <value>` lines, a column
// header, then rows at 17 significant digits.
void write_trajectory(const Trajectory& traj, const std::string& path);
Trajectory read_trajectory(const std::string& path);

} // namespace sbdyn
