#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "bfbs/operator.hpp"

#include <cmath>

using namespace bfbs;

TEST_CASE("p-Laplace field and Jacobian closed forms") {
    const auto op = OperatorSpec::p_laplace(3.0);
    const Vec2 a = eval_a(op, Vec2(3.0, 4.0));
    CHECK(a.x() == doctest::Approx(15.0));
    CHECK(a.y() == doctest::Approx(20.0));

    // DA = |eta|^{p-2} (I + (p-2) e e^T) at eta = (2, 0): diag(2 * 2, 2).
    const Mat2 j = eval_jacobian(op, Vec2(2.0, 0.0));
    CHECK(j(0, 0) == doctest::Approx(4.0));
    CHECK(j(1, 1) == doctest::Approx(2.0));
    CHECK(j(0, 1) == doctest::Approx(0.0));
    CHECK_THROWS_AS(eval_jacobian(op, Vec2::Zero()), DomainError);
}

TEST_CASE("regularized Jacobian tends to the exact one") {
    const auto op = OperatorSpec::p_laplace(1.5);
    const Vec2 eta(0.3, -0.7);
    const Mat2 exact = eval_jacobian(op, eta);
    const Mat2 reg = regularized_jacobian(op, eta, 1e-9);
    CHECK((exact - reg).norm() < 1e-8 * exact.norm());
    CHECK(std::isfinite(regularized_jacobian(op, Vec2::Zero(), 1e-3).norm()));
}

TEST_CASE("sharp ellipticity constant") {
    CHECK(p_laplace_alpha(3.0) == doctest::Approx(2.0));
    CHECK(p_laplace_alpha(1.5) == doctest::Approx(2.0));
    CHECK(p_laplace_alpha(2.0) == doctest::Approx(1.0));
    CHECK(p_laplace_alpha(4.0) == doctest::Approx(3.0));
}

TEST_CASE("homogeneity of degree p - 1") {
    for (double p : {1.5, 2.0, 3.0, 4.0}) {
        const auto op = OperatorSpec::p_laplace(p);
        const Vec2 eta(0.4, 1.3);
        const Vec2 lhs = eval_a(op, 2.5 * eta);
        const Vec2 rhs = std::pow(2.5, p - 1.0) * eval_a(op, eta);
        CHECK((lhs - rhs).norm() <= 1e-12 * rhs.norm());
    }
}

TEST_CASE("identity quadratic form coincides with the p-Laplacian") {
    const auto q = OperatorSpec::quadratic_form(3.0, Mat2::Identity());
    const auto pl = OperatorSpec::p_laplace(3.0);
    const Vec2 eta(-1.2, 0.5);
    CHECK((eval_a(q, eta) - eval_a(pl, eta)).norm() < 1e-14);
}

TEST_CASE("check_mp accepts the sharp constant and rejects 0.75 of it") {
    for (double p : {1.5, 2.0, 3.0, 4.0}) {
        CAPTURE(p);
        const auto op = OperatorSpec::p_laplace(p);
        const double alpha = p_laplace_alpha(p) + 1e-9;
        const CheckReport ok = check_mp(op, alpha, 1000);
        CHECK(ok.passed);
        REQUIRE(ok.children.size() == 4);
        CHECK(ok.children[1].name == "homogeneity");
        CHECK(ok.children[1].passed);
        CHECK(ok.children[2].passed);
        if (p != 2.0) CHECK_FALSE(check_mp(op, 0.75 * alpha, 1000).passed);
    }
}

TEST_CASE("quadratic form passes with its bracketing constant") {
    Mat2 q;
    q << 1.0, 0.0, 0.0, 2.0;
    const auto op = OperatorSpec::quadratic_form(3.0, q);
    CHECK(check_mp(op, op.alpha, 1000).passed);
    CHECK_FALSE(check_mp(op, 1.0, 1000).passed);
}

TEST_CASE("rotated operator conjugates the field") {
    Mat2 q;
    q << 1.0, 0.0, 0.0, 2.0;
    const auto op = OperatorSpec::quadratic_form(2.5, q);
    const double phi = kPi / 4.0;
    const auto rop = rotated(op, phi);
    const Mat2 r = rotation(phi);
    const Vec2 xi(0.8, -0.3);
    const Vec2 expected = r * eval_a(op, r.transpose() * xi);
    CHECK((eval_a(rop, xi) - expected).norm() < 1e-13);

    const auto pl = OperatorSpec::p_laplace(3.0);
    CHECK((eval_a(rotated(pl, 0.7), xi) - eval_a(pl, xi)).norm() < 1e-14);
}

TEST_CASE("validation") {
    CHECK_THROWS_AS(OperatorSpec::p_laplace(0.9).validate(), DomainError);
    CHECK_THROWS_AS(OperatorSpec::p_laplace(9.0).validate(), DomainError);
    Mat2 bad;
    bad << 1.0, 2.0, 2.0, 1.0;  // indefinite
    CHECK_THROWS_AS(OperatorSpec::quadratic_form(2.0, bad).validate(), DomainError);
    CHECK(operator_family_from_string("quadratic_form") == OperatorFamily::quadratic_form);
    CHECK_THROWS_AS(operator_family_from_string("laplace"), DomainError);
}
