#include "bfbs/operator.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace bfbs {

std::string_view to_string(OperatorFamily family) {
    switch (family) {
        case OperatorFamily::p_laplace: return "p_laplace";
        case OperatorFamily::quadratic_form: return "quadratic_form";
    }
    return "unknown";
}

OperatorFamily operator_family_from_string(std::string_view name) {
    if (name == "p_laplace") return OperatorFamily::p_laplace;
    if (name == "quadratic_form") return OperatorFamily::quadratic_form;
    throw DomainError("unknown operator family '" + std::string(name) + "'");
}

double p_laplace_alpha(double p) { return std::max(p - 1.0, 1.0 / (p - 1.0)); }

namespace {

// Jacobian-continuity constant large enough for pairs of comparable size,
// |eta|/2 <= |eta'| <= 2|eta| (the regime check_mp samples).
double default_lambda_cap(double p, double cond) {
    return 4.0 * (1.0 + std::abs(p - 2.0)) * std::pow(2.0, std::abs(p - 3.0)) * cond * cond;
}

double condition_number(const Mat2& q) {
    Eigen::SelfAdjointEigenSolver<Mat2> es(q);
    const auto ev = es.eigenvalues();
    return ev(1) / ev(0);
}

}  // namespace

OperatorSpec OperatorSpec::p_laplace(double p) {
    OperatorSpec op;
    op.family = OperatorFamily::p_laplace;
    op.p = p;
    op.alpha = p_laplace_alpha(p);
    op.lambda_cap = default_lambda_cap(p, 1.0);
    return op;
}

OperatorSpec OperatorSpec::quadratic_form(double p, const Mat2& q) {
    OperatorSpec op;
    op.family = OperatorFamily::quadratic_form;
    op.p = p;
    op.q = q;
    // J = q^m Q^{1/2} (I + (p-2) w w^T/|w|^2) Q^{1/2} with w = Q^{1/2} eta and
    // q = |w|^2 in [lo, hi] |eta|^2, which brackets the ellipticity ratios.
    Eigen::SelfAdjointEigenSolver<Mat2> es(q);
    const double lo = es.eigenvalues()(0), hi = es.eigenvalues()(1);
    const double m = (p - 2.0) / 2.0;
    const double pow_hi = std::max(std::pow(lo, m), std::pow(hi, m));
    const double pow_lo = std::min(std::pow(lo, m), std::pow(hi, m));
    op.alpha = std::max({std::max(1.0, p - 1.0) * hi * pow_hi,
                         1.0 / (std::min(1.0, p - 1.0) * lo * pow_lo), 1.0});
    op.lambda_cap = default_lambda_cap(p, condition_number(q)) * hi * pow_hi;
    return op;
}

void OperatorSpec::validate() const {
    if (!(p >= kMinExponent && p <= kMaxExponent))
        throw DomainError("p out of supported range [1.2, 8]: " + std::to_string(p));
    if (!(alpha >= 1.0)) throw DomainError("alpha must be >= 1");
    if (!(lambda_cap >= 1.0)) throw DomainError("lambda must be >= 1");
    if (family == OperatorFamily::quadratic_form) {
        if (std::abs(q(0, 1) - q(1, 0)) > 1e-12 * q.norm()) throw DomainError("Q must be symmetric");
        Eigen::SelfAdjointEigenSolver<Mat2> es(q);
        if (!(es.eigenvalues()(0) > 0.0)) throw DomainError("Q must be positive definite");
    }
}

Vec2 eval_a(const OperatorSpec& op, const Vec2& eta) {
    if (eta.x() == 0.0 && eta.y() == 0.0) return Vec2::Zero();
    if (op.family == OperatorFamily::p_laplace) {
        return std::pow(eta.norm(), op.p - 2.0) * eta;
    }
    const Vec2 qe = op.q * eta;
    return std::pow(eta.dot(qe), (op.p - 2.0) / 2.0) * qe;
}

namespace {

// Shared closed form: with norm2 = |eta|^2 (resp. eta.Q eta) plus the
// regularisation, J = norm2^{(p-2)/2} (S + (p-2) v v^T / norm2), where
// S = I, v = eta (resp. S = Q, v = Q eta).
Mat2 jacobian_form(const OperatorSpec& op, const Vec2& eta, double delta2) {
    const bool plap = op.family == OperatorFamily::p_laplace;
    const Mat2 s = plap ? Mat2::Identity() : op.q;
    const Vec2 v = plap ? eta : Vec2(op.q * eta);
    const double norm2 = eta.dot(v) + delta2;
    const double scale = std::pow(norm2, (op.p - 2.0) / 2.0);
    if (norm2 == 0.0) return scale * s;
    return scale * (s + (op.p - 2.0) / norm2 * (v * v.transpose()));
}

}  // namespace

Mat2 eval_jacobian(const OperatorSpec& op, const Vec2& eta) {
    if (eta.x() == 0.0 && eta.y() == 0.0)
        throw DomainError("Jacobian of A is undefined at eta = 0");
    return jacobian_form(op, eta, 0.0);
}

Mat2 regularized_jacobian(const OperatorSpec& op, const Vec2& eta, double delta) {
    if (!(delta > 0.0)) throw DomainError("regularization delta must be positive");
    return jacobian_form(op, eta, delta * delta);
}

OperatorSpec rotated(const OperatorSpec& op, double phi) {
    OperatorSpec out = op;
    if (op.family == OperatorFamily::quadratic_form) {
        const Mat2 r = rotation(phi);
        out.q = r * op.q * r.transpose();
        out.q(0, 1) = out.q(1, 0) = 0.5 * (out.q(0, 1) + out.q(1, 0));
    }
    return out;
}

CheckReport check_mp(const OperatorSpec& op, double alpha, int sample_count) {
    if (sample_count < 100) throw DomainError("check_mp needs sample_count >= 100");

    constexpr int kRadii = 9;
    const int per_radius = (sample_count + kRadii - 1) / kRadii;
    std::vector<Vec2> etas;
    etas.reserve(static_cast<std::size_t>(per_radius) * kRadii);
    for (int k = -4; k <= 4; ++k) {
        const double r = std::ldexp(1.0, k);
        for (int a = 0; a < per_radius; ++a) {
            // Half-step offset keeps samples off the coordinate axes.
            const double th = 2.0 * kPi * (a + 0.5) / per_radius;
            etas.emplace_back(r * std::cos(th), r * std::sin(th));
        }
    }
    const double p = op.p;

    CheckReport ellip;
    ellip.name = "ellipticity";
    ellip.tolerance = 1e-12;
    ellip.worst_case = std::numeric_limits<double>::infinity();
    double sharp_alpha = 1.0;
    for (std::size_t i = 0; i < etas.size(); ++i) {
        const Vec2& eta = etas[i];
        const Mat2 jac = eval_jacobian(op, eta);
        const Mat2 sym = 0.5 * (jac + jac.transpose());
        Eigen::SelfAdjointEigenSolver<Mat2> es(sym);
        const double scale = std::pow(eta.norm(), p - 2.0);
        const double lo = es.eigenvalues()(0) / scale;
        const double hi = es.eigenvalues()(1) / scale;
        sharp_alpha = std::max({sharp_alpha, hi, 1.0 / lo});
        const double margin = std::min(lo * alpha - 1.0, 1.0 - hi / alpha);
        if (margin < ellip.worst_case) {
            ellip.worst_case = margin;
            ellip.location = "eta=(" + std::to_string(eta.x()) + "," + std::to_string(eta.y()) + ")";
        }
    }
    ellip.metadata = {{"alpha", alpha}, {"sharp_alpha", sharp_alpha}};
    ellip.settle();

    CheckReport homog;
    homog.name = "homogeneity";
    homog.tolerance = 1e-12;
    double worst_rel = 0.0;
    for (const Vec2& eta : etas) {
        const Vec2 a = eval_a(op, eta);
        for (double s : {2.0, 0.5, 3.0}) {
            const Vec2 as = eval_a(op, s * eta);
            const double sp = std::pow(s, p - 1.0);
            const double rel = (as - sp * a).norm() / (sp * a.norm());
            if (rel > worst_rel) {
                worst_rel = rel;
                homog.location = "s=" + std::to_string(s);
            }
        }
    }
    homog.worst_case = -worst_rel;
    homog.settle();

    // Pair partners: a deterministic spread of far pairs, the origin, the
    // antipode and a nearby perturbation.
    const std::size_t n = etas.size();
    auto partners = [&](std::size_t i) {
        std::vector<Vec2> out;
        for (std::size_t m = 1; m <= 6; ++m) out.push_back(etas[(i * 7919 + m * 104729) % n]);
        out.push_back(Vec2::Zero());
        out.push_back(-etas[i]);
        out.push_back(rotation(1e-3) * etas[i] * (1.0 + 1e-3));
        return out;
    };

    CheckReport mono;
    mono.name = "monotonicity";
    mono.tolerance = 0.0;
    double ratio_min = std::numeric_limits<double>::infinity(), ratio_max = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2& eta = etas[i];
        const Vec2 a = eval_a(op, eta);
        for (const Vec2& other : partners(i)) {
            const Vec2 d = eta - other;
            if (d.norm() == 0.0) continue;
            const double inner = (a - eval_a(op, other)).dot(d);
            const double ref = d.squaredNorm() * std::pow(eta.norm() + other.norm(), p - 2.0);
            const double ratio = inner / ref;
            if (ratio < ratio_min) {
                ratio_min = ratio;
                mono.location = "eta=(" + std::to_string(eta.x()) + "," + std::to_string(eta.y()) + ")";
            }
            ratio_max = std::max(ratio_max, ratio);
        }
    }
    mono.worst_case = ratio_min;
    mono.metadata = {{"ratio_min", ratio_min},
                     {"ratio_max", ratio_max},
                     {"derived_constant", std::max(ratio_max, 1.0 / ratio_min)}};
    mono.settle();
    mono.passed = ratio_min > 0.0;

    CheckReport cont;
    cont.name = "jacobian_continuity";
    cont.tolerance = 1e-12;
    double lambda_emp = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2& eta = etas[i];
        const Mat2 j1 = eval_jacobian(op, eta);
        for (const Vec2& other : partners(i)) {
            const double ratio_norm = other.norm() / eta.norm();
            if (ratio_norm < 0.5 || ratio_norm > 2.0) continue;
            const Vec2 d = eta - other;
            if (d.norm() == 0.0) continue;
            const Mat2 diff = j1 - eval_jacobian(op, other);
            const double entry = diff.cwiseAbs().maxCoeff();
            const double lam = entry / (d.norm() * std::pow(eta.norm(), p - 3.0));
            lambda_emp = std::max(lambda_emp, lam);
        }
    }
    cont.worst_case = 1.0 - lambda_emp / op.lambda_cap;
    cont.metadata = {{"lambda_cap", op.lambda_cap}, {"empirical_lambda", lambda_emp}};
    cont.settle();

    CheckReport report;
    report.name = "operator_structure";
    report.children = {ellip, homog, mono, cont};
    report.passed = ellip.passed && homog.passed && mono.passed && cont.passed;
    report.worst_case = std::min({ellip.worst_case, homog.worst_case, cont.worst_case});
    report.tolerance = 1e-12;
    report.metadata = {{"family", std::string(to_string(op.family))},
                       {"p", p},
                       {"alpha", alpha},
                       {"samples", static_cast<int>(n)}};
    return report;
}

}  // namespace bfbs
