// trajectory.cpp - trajectory text serialization

#include "sbdyn/trajectory.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "sbdyn/common.hpp"

namespace sbdyn {

void write_trajectory(const Trajectory& traj, const std::string& path) {
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("write_trajectory: cannot open " + path);
    out << "# trajectory\n";
    for (const auto& [key, value] : traj.metadata)
        out << "# meta " << key << " " << value << "\n";
    out << "# columns: time sigma_z norm energy deviation\n";
    for (int i = 0; i < traj.size(); ++i) {
        out << format_g17(traj.times(i)) << " " << format_g17(traj.sigma_z(i))
            << " " << format_g17(traj.norm(i)) << " "
            << format_g17(traj.energy(i)) << " "
            << format_g17(traj.deviation(i)) << "\n";
    }
    if (!out)
        throw std::runtime_error("write_trajectory: write failed for " + path);
}

Trajectory read_trajectory(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("read_trajectory: cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("# trajectory", 0) != 0)
        throw std::runtime_error("read_trajectory: missing header in " + path);
    Trajectory traj;
    std::vector<double> t, sz, nn, en, dev;
    while (std::getline(in, line)) {
        if (line.rfind("# meta ", 0) == 0) {
            std::istringstream meta(line.substr(7));
            std::string key;
            meta >> key;
            std::string value;
            std::getline(meta, value);
            if (!value.empty() && value.front() == ' ')
                value.erase(value.begin());
            traj.metadata[key] = value;
            continue;
        }
        if (line.empty() || line.front() == '#')
            continue;
        std::istringstream row(line);
        double a, b, c, d, e;
        if (!(row >> a >> b >> c >> d >> e))
            throw std::runtime_error("read_trajectory: malformed row in " +
                                     path + ": " + line);
        t.push_back(a);
        sz.push_back(b);
        nn.push_back(c);
        en.push_back(d);
        dev.push_back(e);
    }
    const int n = static_cast<int>(t.size());
    traj.times = Eigen::Map<Eigen::VectorXd>(t.data(), n);
    traj.sigma_z = Eigen::Map<Eigen::VectorXd>(sz.data(), n);
    traj.norm = Eigen::Map<Eigen::VectorXd>(nn.data(), n);
    traj.energy = Eigen::Map<Eigen::VectorXd>(en.data(), n);
    traj.deviation = Eigen::Map<Eigen::VectorXd>(dev.data(), n);
    return traj;
}

} // namespace sbdyn
