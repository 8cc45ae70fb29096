// common.hpp - shared scalar types and small numeric helpers

#pragma once

#include <complex>
#include <cstdio>
#include <string>

namespace sbdyn {

using cd = std::complex<double>;

inline constexpr double pi = 3.14159265358979323846;

// Compensated (Kahan) accumulator. Long reductions (quadratures, log-overlap
// sums) go through this so results are tight and independent of chunking.
struct Kahan {
    double sum = 0.0;
    double carry = 0.0;

    void add(double x) {
        const double y = x - carry;
        const double t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    double value() const { return sum; }
};

struct KahanC {
    Kahan re, im;

    void add(cd x) {
        re.add(x.real());
        im.add(x.imag());
    }
    cd value() const { return {re.value(), im.value()}; }
};

// 17 significant digits: round-trips IEEE double exactly.
inline std::string format_g17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

} // namespace sbdyn
