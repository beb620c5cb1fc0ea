#include "hev/special.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "hev/errors.hpp"

namespace hev {

namespace {

void require_positive(double x, const char* name) {
    if (!(x > 0.0) || !std::isfinite(x)) {
        throw DomainError(std::string(name) + ": argument must be finite and > 0, got " + std::to_string(x));
    }
}

// Lanczos coefficients for g = 671/128 (14 terms).
constexpr std::array<double, 14> kLanczos = {
    57.1562356658629235,      -59.5979603554754912,     14.1360979747417471,
    -0.491913816097620199,    0.339946499848118887e-4,  0.465236289270485756e-4,
    -0.983744753048795646e-4, 0.158088703224912494e-3,  -0.210264441724104883e-3,
    0.217439618115212643e-3,  -0.164318106536763890e-3, 0.844182239838527433e-4,
    -0.261908384015814087e-4, 0.368991826595316234e-5};

double lanczos_log_gamma(double x) {
    double denom = x;
    const double t = x + 671.0 / 128.0;
    double series = 0.999999999999997092;
    for (double c : kLanczos) {
        denom += 1.0;
        series += c / denom;
    }
    return (x + 0.5) * std::log(t) - t + std::log(2.5066282746310005 * series / x);
}

// Stirling series, accurate to rounding for x >= 10.
double stirling_log_gamma(double x) {
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    const double corr =
        inv * (1.0 / 12.0 -
               inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 * (1.0 / 1680.0 - inv2 * (1.0 / 1188.0)))));
    return (x - 0.5) * std::log(x) - x + 0.5 * std::log(2.0 * std::numbers::pi) + corr;
}

}  // namespace

double log_gamma(double x) {
    require_positive(x, "log_gamma");
    // Exact zeros at 1 and 2 keep F(0) and friends free of rounding noise.
    if (x == 1.0 || x == 2.0) return 0.0;
    if (x < 10.0) return lanczos_log_gamma(x);
    return stirling_log_gamma(x);
}

double digamma(double x) {
    require_positive(x, "digamma");
    double acc = 0.0;
    while (x < 10.0) {
        acc -= 1.0 / x;
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    // Bernoulli terms B_2k / (2k x^2k), k = 1..7
    const double tail =
        inv2 * (1.0 / 12.0 -
                inv2 * (1.0 / 120.0 -
                        inv2 * (1.0 / 252.0 -
                                inv2 * (1.0 / 240.0 -
                                        inv2 * (1.0 / 132.0 - inv2 * (691.0 / 32760.0 - inv2 * (1.0 / 12.0)))))));
    return acc + std::log(x) - 0.5 * inv - tail;
}

double trigamma(double x) {
    require_positive(x, "trigamma");
    double acc = 0.0;
    while (x < 10.0) {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    // 1/x + 1/(2x^2) + sum_k B_2k / x^(2k+1)
    const double tail =
        inv * inv2 *
        (1.0 / 6.0 -
         inv2 * (1.0 / 30.0 -
                 inv2 * (1.0 / 42.0 - inv2 * (1.0 / 30.0 - inv2 * (5.0 / 66.0 - inv2 * (691.0 / 2730.0 - inv2 * (7.0 / 6.0)))))));
    return acc + inv + 0.5 * inv2 + tail;
}

}  // namespace hev
