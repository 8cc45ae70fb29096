// config.cpp - key = value configuration parsing with line-anchored
// diagnostics, canonical serialization, and regime classification.

#include "sbdyn/config.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "sbdyn/common.hpp"

namespace sbdyn {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

struct RawEntry {
    std::string value;
    int line = 0;
};

class Parser {
  public:
    Parser(std::istream& in, std::string source) : source_(std::move(source)) {
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const std::size_t hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            const std::string stripped = trim(line);
            if (stripped.empty()) continue;
            const std::size_t eq = stripped.find('=');
            if (eq == std::string::npos)
                fail(lineno, "expected `key = value`, got \"" + stripped + "\"");
            const std::string key = trim(stripped.substr(0, eq));
            const std::string value = trim(stripped.substr(eq + 1));
            if (key.empty()) fail(lineno, "empty key");
            if (value.empty()) fail(lineno, "key `" + key + "` has no value");
            if (entries_.count(key))
                fail(lineno, "duplicate key `" + key + "` (first set on line " +
                                 std::to_string(entries_[key].line) + ")");
            entries_[key] = {value, lineno};
        }
    }

    bool has(const std::string& key) const { return entries_.count(key) > 0; }

    [[noreturn]] void fail(int line, const std::string& msg) const {
        throw ConfigError(source_ + ":" + std::to_string(line) + ": " + msg);
    }
    [[noreturn]] void fail(const std::string& msg) const {
        throw ConfigError(source_ + ": " + msg);
    }
    [[noreturn]] void fail_key(const std::string& key,
                               const std::string& msg) const {
        fail(entries_.at(key).line, "key `" + key + "`: " + msg);
    }

    double number(const std::string& key) {
        const std::string& v = take(key).value;
        char* end = nullptr;
        const double x = std::strtod(v.c_str(), &end);
        if (end == v.c_str() || *end != '\0')
            fail_key(key, "cannot parse \"" + v + "\" as a number");
        return x;
    }

    long long integer(const std::string& key) {
        const std::string& v = take(key).value;
        char* end = nullptr;
        const long long x = std::strtoll(v.c_str(), &end, 10);
        if (end == v.c_str() || *end != '\0')
            fail_key(key, "cannot parse \"" + v + "\" as an integer");
        return x;
    }

    std::uint64_t unsigned_integer(const std::string& key) {
        const std::string& v = take(key).value;
        char* end = nullptr;
        const unsigned long long x = std::strtoull(v.c_str(), &end, 10);
        if (end == v.c_str() || *end != '\0' || v.front() == '-')
            fail_key(key, "cannot parse \"" + v + "\" as a nonnegative integer");
        return x;
    }

    bool boolean(const std::string& key) {
        const std::string& v = take(key).value;
        if (v == "true" || v == "on" || v == "1") return true;
        if (v == "false" || v == "off" || v == "0") return false;
        fail_key(key, "cannot parse \"" + v + "\" as a boolean (true/false)");
    }

    std::string word(const std::string& key) { return take(key).value; }

    int line_of(const std::string& key) const { return entries_.at(key).line; }

    // Any key neither consumed by the schema nor recognized is an error; the
    // first (lowest-line) offender is reported.
    void finish() const {
        const RawEntry* worst = nullptr;
        const std::string* worst_key = nullptr;
        for (const auto& [key, entry] : entries_) {
            if (taken_.count(key)) continue;
            if (!worst || entry.line < worst->line) {
                worst = &entry;
                worst_key = &key;
            }
        }
        if (worst) fail(worst->line, "unknown key `" + *worst_key + "`");
    }

  private:
    const RawEntry& take(const std::string& key) {
        taken_.insert({key, true});
        return entries_.at(key);
    }

    std::string source_;
    std::map<std::string, RawEntry> entries_;
    std::map<std::string, bool> taken_;
};

void require_positive(const Parser& p, const std::string& key, double x) {
    if (!(x > 0.0)) p.fail_key(key, "must be positive");
}

} // namespace

std::string scheme_name(DiscretizationScheme s) {
    return s == DiscretizationScheme::log_grid ? "log" : "id";
}

DiscretizationScheme parse_scheme(const std::string& name) {
    if (name == "log") return DiscretizationScheme::log_grid;
    if (name == "id") return DiscretizationScheme::id_nnls;
    throw ConfigError("unknown discretization scheme \"" + name +
                      "\" (expected log or id)");
}

RunConfig parse_config(std::istream& in, const std::string& source_name) {
    Parser p(in, source_name);
    RunConfig cfg;

    // Spectral density: shared keys or explicit per-bath values, not both.
    const bool shared_alpha = p.has("alpha");
    const bool split_alpha = p.has("alpha_left") || p.has("alpha_right");
    if (shared_alpha && split_alpha)
        p.fail_key("alpha", "conflicts with alpha_left/alpha_right");
    if (shared_alpha) {
        cfg.alpha_left = cfg.alpha_right = p.number("alpha");
        require_positive(p, "alpha", cfg.alpha_left);
    } else if (split_alpha) {
        if (!p.has("alpha_left") || !p.has("alpha_right"))
            p.fail("missing required key `" +
                   std::string(p.has("alpha_left") ? "alpha_right"
                                                   : "alpha_left") +
                   "` (both per-bath couplings are needed)");
        cfg.alpha_left = p.number("alpha_left");
        cfg.alpha_right = p.number("alpha_right");
        require_positive(p, "alpha_left", cfg.alpha_left);
        require_positive(p, "alpha_right", cfg.alpha_right);
    } else {
        p.fail("missing required key `alpha` (or `alpha_left` and "
               "`alpha_right`)");
    }

    const bool shared_wc = p.has("omega_c");
    const bool split_wc = p.has("omega_c_left") || p.has("omega_c_right");
    if (shared_wc && split_wc)
        p.fail_key("omega_c", "conflicts with omega_c_left/omega_c_right");
    if (shared_wc) {
        cfg.omega_c_left = cfg.omega_c_right = p.number("omega_c");
        require_positive(p, "omega_c", cfg.omega_c_left);
    } else if (split_wc) {
        if (!p.has("omega_c_left") || !p.has("omega_c_right"))
            p.fail("missing required key `" +
                   std::string(p.has("omega_c_left") ? "omega_c_right"
                                                     : "omega_c_left") +
                   "` (both per-bath cutoffs are needed)");
        cfg.omega_c_left = p.number("omega_c_left");
        cfg.omega_c_right = p.number("omega_c_right");
        require_positive(p, "omega_c_left", cfg.omega_c_left);
        require_positive(p, "omega_c_right", cfg.omega_c_right);
    } else {
        p.fail("missing required key `omega_c` (or `omega_c_left` and "
               "`omega_c_right`)");
    }

    // Temperatures: mean with the fixed 1% split, or explicit per bath.
    const bool mean_T = p.has("T");
    const bool split_T = p.has("T_left") || p.has("T_right");
    if (mean_T && split_T)
        p.fail_key("T", "conflicts with T_left/T_right");
    if (mean_T) {
        const double T = p.number("T");
        require_positive(p, "T", T);
        cfg.T_left = T * 1.005;
        cfg.T_right = T * 0.995;
    } else if (split_T) {
        if (!p.has("T_left") || !p.has("T_right"))
            p.fail("missing required key `" +
                   std::string(p.has("T_left") ? "T_right" : "T_left") +
                   "` (both bath temperatures are needed)");
        cfg.T_left = p.number("T_left");
        cfg.T_right = p.number("T_right");
        require_positive(p, "T_left", cfg.T_left);
        require_positive(p, "T_right", cfg.T_right);
    } else {
        p.fail("missing required key `T` (or `T_left` and `T_right`)");
    }

    if (p.has("scheme")) {
        const std::string s = p.word("scheme");
        if (s != "log" && s != "id")
            p.fail_key("scheme", "unknown scheme \"" + s +
                                     "\" (expected log or id)");
        cfg.scheme = parse_scheme(s);
    }
    if (p.has("n_modes")) {
        cfg.n_modes = static_cast<int>(p.integer("n_modes"));
        if (cfg.n_modes < 1) p.fail_key("n_modes", "must be >= 1");
    }
    if (p.has("id_tolerance")) {
        cfg.id_tolerance = p.number("id_tolerance");
        require_positive(p, "id_tolerance", cfg.id_tolerance);
    }
    if (p.has("omega_max_mult")) {
        cfg.omega_max_mult = p.number("omega_max_mult");
        require_positive(p, "omega_max_mult", cfg.omega_max_mult);
    }

    if (!p.has("multiplicity"))
        p.fail("missing required key `multiplicity`");
    cfg.multiplicity = static_cast<int>(p.integer("multiplicity"));
    if (cfg.multiplicity < 1) p.fail_key("multiplicity", "must be >= 1");

    if (p.has("noise_amplitude")) {
        cfg.noise_amplitude = p.number("noise_amplitude");
        if (cfg.noise_amplitude < 0.0)
            p.fail_key("noise_amplitude", "must be >= 0");
    }
    if (p.has("seed")) cfg.seed = p.unsigned_integer("seed");
    if (p.has("qubit_init")) {
        const std::string s = p.word("qubit_init");
        try {
            cfg.init = parse_qubit_init(s);
        } catch (const std::exception&) {
            p.fail_key("qubit_init", "unknown initial state \"" + s +
                                         "\" (expected up, down, or plus_x)");
        }
    }

    if (p.has("dt")) {
        cfg.dt = p.number("dt");
        require_positive(p, "dt", cfg.dt);
    }
    if (p.has("t_final")) {
        cfg.t_final = p.number("t_final");
        if (cfg.t_final < 0.0) p.fail_key("t_final", "must be >= 0");
    }
    if (p.has("output_stride")) {
        cfg.output_stride = static_cast<int>(p.integer("output_stride"));
        if (cfg.output_stride < 1) p.fail_key("output_stride", "must be >= 1");
    }
    if (p.has("sigma2_stride")) {
        cfg.sigma2_stride = static_cast<int>(p.integer("sigma2_stride"));
        if (cfg.sigma2_stride < 1) p.fail_key("sigma2_stride", "must be >= 1");
    }

    if (p.has("tunneling")) {
        cfg.tunneling = p.number("tunneling");
        if (cfg.tunneling != 0.0)
            p.fail_key("tunneling",
                       "must be 0; the propagator implements a pure sigma_z "
                       "qubit term and a transverse tunneling term is outside "
                       "its equations of motion (see README, configuration "
                       "notes)");
    }
    if (p.has("alpha_c0")) {
        cfg.alpha_c0 = p.number("alpha_c0");
        require_positive(p, "alpha_c0", cfg.alpha_c0);
    }
    if (p.has("omega0_eV")) {
        cfg.omega0_eV = p.number("omega0_eV");
        require_positive(p, "omega0_eV", cfg.omega0_eV);
    }

    if (p.has("oracle")) cfg.oracle.enabled = p.boolean("oracle");
    if (p.has("oracle_n_max")) {
        cfg.oracle.n_max = static_cast<int>(p.integer("oracle_n_max"));
        if (cfg.oracle.n_max < 1) p.fail_key("oracle_n_max", "must be >= 1");
    }
    if (p.has("oracle_tolerance")) {
        cfg.oracle.tolerance = p.number("oracle_tolerance");
        require_positive(p, "oracle_tolerance", cfg.oracle.tolerance);
    }

    p.finish();
    return cfg;
}

RunConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError(path + ": cannot open configuration file");
    return parse_config(in, path);
}

std::string serialize_config(const RunConfig& cfg) {
    std::ostringstream out;
    out << "alpha_left = " << format_g17(cfg.alpha_left) << "\n"
        << "alpha_right = " << format_g17(cfg.alpha_right) << "\n"
        << "omega_c_left = " << format_g17(cfg.omega_c_left) << "\n"
        << "omega_c_right = " << format_g17(cfg.omega_c_right) << "\n"
        << "T_left = " << format_g17(cfg.T_left) << "\n"
        << "T_right = " << format_g17(cfg.T_right) << "\n"
        << "scheme = " << scheme_name(cfg.scheme) << "\n"
        << "n_modes = " << cfg.n_modes << "\n"
        << "id_tolerance = " << format_g17(cfg.id_tolerance) << "\n"
        << "omega_max_mult = " << format_g17(cfg.omega_max_mult) << "\n"
        << "multiplicity = " << cfg.multiplicity << "\n"
        << "noise_amplitude = " << format_g17(cfg.noise_amplitude) << "\n"
        << "seed = " << cfg.seed << "\n"
        << "qubit_init = " << qubit_init_name(cfg.init) << "\n"
        << "dt = " << format_g17(cfg.dt) << "\n"
        << "t_final = " << format_g17(cfg.t_final) << "\n"
        << "output_stride = " << cfg.output_stride << "\n"
        << "sigma2_stride = " << cfg.sigma2_stride << "\n"
        << "tunneling = " << format_g17(cfg.tunneling) << "\n"
        << "alpha_c0 = " << format_g17(cfg.alpha_c0) << "\n"
        << "omega0_eV = " << format_g17(cfg.omega0_eV) << "\n"
        << "oracle = " << (cfg.oracle.enabled ? "true" : "false") << "\n"
        << "oracle_n_max = " << cfg.oracle.n_max << "\n"
        << "oracle_tolerance = " << format_g17(cfg.oracle.tolerance) << "\n";
    return out.str();
}

std::optional<std::string> timestep_advisory(double dt, double max_frequency) {
    if (max_frequency > 0.0 && dt * max_frequency >= 1.0)
        return "dt = " + format_g17(dt) +
               " does not resolve the fastest bath mode (|omega_max| = " +
               format_g17(max_frequency) +
               "); consider dt < " + format_g17(1.0 / max_frequency);
    return std::nullopt;
}

std::string regime_name(Regime r) {
    switch (r) {
        case Regime::weak: return "weak";
        case Regime::intermediate: return "intermediate";
        case Regime::strong: return "strong";
    }
    return "unknown";
}

Regime classify_regime(double alpha, double omega_c, double T,
                       double alpha_c0) {
    if (!(alpha > 0.0) || !(omega_c > 0.0) || !(T > 0.0) || !(alpha_c0 > 0.0))
        throw std::invalid_argument(
            "classify_regime: all inputs must be positive");
    const double alpha_c = alpha_c0 / (1.0 + omega_c / T);
    if (alpha < 0.1 * alpha_c) return Regime::weak;
    if (alpha <= alpha_c) return Regime::intermediate;
    return Regime::strong;
}

} // namespace sbdyn
