#pragma once

namespace bfbs::oracle {

/// Concentric balls B(0,a) inside B(0,R) in R^n, capacitary potential of the
/// p-Laplacian: u(a) = 1, u(R) = 0.
struct RadialCase {
    double p = 2.0;
    int n = 2;
    double a = 1.0;
    double R = 2.0;

    void validate() const;
    /// (p - n) / (p - 1); the potential is affine in r^beta (log r when beta = 0).
    double beta() const { return (p - n) / (p - 1.0); }
};

double radial_potential(const RadialCase& rc, double r);

/// |u'(r)|, proportional to r^{(1-n)/(p-1)}.
double radial_gradient(const RadialCase& rc, double r);

struct BernoulliRoot {
    double radius;
    double residual;  // |g(R)/c - 1|
};

/// Outer radius R with |u'(R)| = c for the ring B(0,R) \ B(0,a).
BernoulliRoot bernoulli_radius(double p, int n, double a, double c);

}  // namespace bfbs::oracle
