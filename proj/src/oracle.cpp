#include "bfbs/oracle.hpp"

#include "bfbs/types.hpp"

#include <cmath>

namespace bfbs::oracle {

void RadialCase::validate() const {
    if (!(p > 1.0)) throw DomainError("radial case needs p > 1");
    if (n < 2) throw DomainError("radial case needs n >= 2");
    if (!(a > 0.0 && R > a)) throw DomainError("radial case needs R > a > 0");
}

namespace {

void check_radius(const RadialCase& rc, double r) {
    rc.validate();
    // Accept round-off at the endpoints.
    const double slack = 1e-12 * rc.R;
    if (!(r >= rc.a - slack && r <= rc.R + slack)) throw DomainError("radius outside [a, R]");
}

}  // namespace

// Written with expm1 so beta -> 0 passes smoothly into the logarithmic case.
double radial_potential(const RadialCase& rc, double r) {
    check_radius(rc, r);
    const double b = rc.beta();
    const double lr = std::log(r / rc.R);
    const double la = std::log(rc.a / rc.R);
    if (b == 0.0) return lr / la;
    return std::expm1(b * lr) / std::expm1(b * la);
}

double radial_gradient(const RadialCase& rc, double r) {
    check_radius(rc, r);
    const double b = rc.beta();
    const double la = std::log(rc.R / rc.a);
    if (b == 0.0) return 1.0 / (r * la);
    // |b| r^{b-1} / |a^b - R^b| = |b| (r/a)^b / (r |expm1(b ln(R/a))|)
    return std::abs(b) * std::pow(r / rc.a, b) / (r * std::abs(std::expm1(b * la)));
}

BernoulliRoot bernoulli_radius(double p, int n, double a, double c) {
    if (!(c > 0.0)) throw DomainError("Bernoulli constant must be positive");
    if (!(a > 0.0)) throw DomainError("inner radius must be positive");
    auto outer_gradient = [&](double big_r) { return radial_gradient(RadialCase{p, n, a, big_r}, big_r); };
    double lo = a * (1.0 + 1e-9);
    double hi = a * std::ldexp(1.0, 40);
    if (!(outer_gradient(lo) > c && outer_gradient(hi) < c))
        throw DomainError("Bernoulli radius not bracketed in [a(1+1e-9), a 2^40]");
    // Bisection in log R; the gradient is strictly decreasing in R.
    for (int it = 0; it < 200; ++it) {
        const double mid = std::sqrt(lo * hi);
        if (mid <= lo || mid >= hi) break;
        if (outer_gradient(mid) > c) lo = mid;
        else hi = mid;
    }
    const double r = std::sqrt(lo * hi);
    return {r, std::abs(outer_gradient(r) / c - 1.0)};
}

}  // namespace bfbs::oracle
