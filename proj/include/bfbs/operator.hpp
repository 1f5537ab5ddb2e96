#pragma once

#include "bfbs/check_report.hpp"
#include "bfbs/types.hpp"

#include <string>
#include <string_view>

namespace bfbs {

enum class OperatorFamily { p_laplace, quadratic_form };

std::string_view to_string(OperatorFamily family);
OperatorFamily operator_family_from_string(std::string_view name);

inline constexpr double kMinExponent = 1.2;
inline constexpr double kMaxExponent = 8.0;

/// A (p-1)-homogeneous vector field A on R^2.
///
/// p_laplace:       A(eta) = |eta|^{p-2} eta
/// quadratic_form:  A(eta) = (eta.Q eta)^{(p-2)/2} Q eta,  Q symmetric positive definite
///
/// `alpha` is the claimed ellipticity constant and `lambda_cap` the claimed
/// Jacobian-continuity constant; both are checked, not assumed, by check_mp.
struct OperatorSpec {
    OperatorFamily family = OperatorFamily::p_laplace;
    double p = 2.0;
    Mat2 q = Mat2::Identity();
    double alpha = 1.0;
    double lambda_cap = 1.0;

    static OperatorSpec p_laplace(double p);
    static OperatorSpec quadratic_form(double p, const Mat2& q);

    /// Throws DomainError when p is outside [kMinExponent, kMaxExponent], Q is
    /// not symmetric positive definite, or alpha/lambda_cap are below 1.
    void validate() const;
};

/// Smallest alpha for which the p-Laplace Jacobian satisfies the two-sided
/// ellipticity bound: max(p - 1, 1 / (p - 1)).
double p_laplace_alpha(double p);

Vec2 eval_a(const OperatorSpec& op, const Vec2& eta);

/// Exact Jacobian dA_i/deta_j. Throws DomainError at eta = 0.
Mat2 eval_jacobian(const OperatorSpec& op, const Vec2& eta);

/// Jacobian with |eta| replaced by sqrt(|eta|^2 + delta^2) (for the quadratic
/// form, eta.Q eta replaced by eta.Q eta + delta^2). Uniformly elliptic for
/// delta > 0, defined at eta = 0.
Mat2 regularized_jacobian(const OperatorSpec& op, const Vec2& eta, double delta);

/// Operator conjugated by a rotation: if u solves div A(grad u) = 0 then
/// x -> u(R^T x) solves div A'(grad) = 0 with A'(xi) = R A(R^T xi).
OperatorSpec rotated(const OperatorSpec& op, double phi);

/// Sampled verification of the structural conditions:
///   ellipticity     alpha^{-1}|eta|^{p-2}|xi|^2 <= xi.DA(eta)xi <= alpha|eta|^{p-2}|xi|^2
///   homogeneity     A(s eta) = s^{p-1} A(eta), s in {2, 1/2, 3}
///   monotonicity    <A(eta)-A(eta'), eta-eta'> > 0, with the empirical two-sided constant
///   continuity      |DA(eta)-DA(eta')| <= Lambda |eta-eta'| |eta|^{p-3}
/// eta is sampled on circles of radii 2^k, k = -4..4. The report has one child
/// per condition, in that order.
CheckReport check_mp(const OperatorSpec& op, double alpha, int sample_count);

}  // namespace bfbs
