#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "bfbs/verify.hpp"

#include <cmath>

using namespace bfbs;

namespace {

PotentialField ring(const ShapeSpec& k, double big_r, const OperatorSpec& op, int layers = 128, std::size_t m = 256) {
    return solve_potential(op, build_grid(make_body(k, m), make_body(Disk{big_r}, m), layers));
}

PotentialField disk_ring(double p, double big_r, int layers = 128) {
    return ring(Disk{1.0}, big_r, OperatorSpec::p_laplace(p), layers);
}

const CheckReport& named(const std::vector<CheckReport>& reports, const std::string& name) {
    for (const auto& r : reports)
        if (r.name == name) return r;
    FAIL("missing report " << name);
    return reports.front();
}

}  // namespace

TEST_CASE("level-set convexity") {
    const auto f = ring(Ellipse{2.0, 1.0, 0.0}, 5.0, OperatorSpec::p_laplace(2.0));
    const auto ok = check_levelset_convexity(f, {0.25, 0.5, 0.75});
    CHECK(ok.passed);
    CHECK(ok.children.size() == 3);
    CHECK(check_levelset_convexity(disk_ring(3.0, 2.0)).passed);

    const auto bad = check_levelset_convexity(corrupt_field(f, 11));
    CHECK_FALSE(bad.passed);
    CHECK(bad.worst_case < -1e-6);
}

TEST_CASE("inner trace dominates the matched outer trace") {
    // 1/log 2 - 1/(2 log 2)
    const auto r = check_inner_outer_domination(disk_ring(2.0, 2.0));
    CHECK(r.passed);
    CHECK(r.worst_case == doctest::Approx(0.7213475).epsilon(2e-3));
    CHECK(check_inner_outer_domination(ring(Ellipse{1.5, 1.0, 0.0}, 4.0, OperatorSpec::p_laplace(2.0))).passed);

    // Negative control: u = 1 - (r - 1)^2 has gradient 0 on K and 2 on Omega.
    const auto f = disk_ring(2.0, 2.0);
    auto u = f.u;
    for (std::size_t j = 0; j < f.grid.angles(); ++j)
        for (int i = 0; i <= f.grid.layers(); ++i) {
            const double r = f.grid.node(i, j).norm();
            u[f.grid.index(i, j)] = 1.0 - (r - 1.0) * (r - 1.0);
        }
    CHECK_FALSE(check_inner_outer_domination(make_field(f.grid, f.op, u)).passed);
}

TEST_CASE("gradient bound") {
    const auto f = disk_ring(2.0, 2.0);
    const auto r = check_gradient_bound(f);
    CHECK(r.passed);
    REQUIRE(r.children.size() == 2);
    CHECK(r.children[0].worst_case == doctest::Approx(1.0 - 0.7213475).epsilon(5e-3));

    const auto g = ring(Disk{1.0}, 1.5, OperatorSpec::p_laplace(3.0));
    CHECK(check_gradient_bound(g).children[0].metadata["bound"].get<double>() == doctest::Approx(2.0).epsilon(1e-3));
    CHECK(check_gradient_bound(g).passed);

    CHECK_FALSE(check_gradient_bound(f, 1.0).passed);  // interior max is 1/log 2
}

TEST_CASE("decay exponent") {
    for (double p : {2.0, 3.0, 4.0}) {
        CAPTURE(p);
        const auto r = check_decay_exponent(disk_ring(p, 3.0, 64));
        CHECK(r.passed);
        CHECK(r.metadata["expected_slope"].get<double>() == doctest::Approx(-1.0 / (p - 1.0)));
    }
    const auto f = disk_ring(2.0, 3.0, 64);
    CHECK_FALSE(check_decay_exponent(make_field(f.grid, OperatorSpec::p_laplace(3.0), f.u)).passed);
    CHECK_THROWS_AS(check_decay_exponent(ring(Ellipse{1.5, 1.0, 0.0}, 4.0, OperatorSpec::p_laplace(2.0), 64)),
                    DomainError);
}

TEST_CASE("rotation covariance") {
    BernoulliProblem pb(make_body(Ellipse{1.5, 1.0, 0.3}, 256), OperatorSpec::p_laplace(2.0));
    const auto omega = make_body(Disk{3.0}, 256);
    const auto exact = check_rotation_covariance(pb, omega, kPi / 2.0);
    CHECK(exact.passed);
    CHECK(exact.worst_case > -1e-9);
    CHECK(check_rotation_covariance(pb, omega, kPi / 7.0).passed);

    Mat2 q;
    q << 1.0, 0.0, 0.0, 2.0;
    BernoulliProblem qp(make_body(Disk{1.0}, 256), OperatorSpec::quadratic_form(2.0, q));
    CHECK(check_rotation_covariance(qp, omega, kPi / 4.0).passed);
    CHECK_FALSE(check_rotation_covariance(qp, omega, kPi / 4.0, 1e-3, false).passed);
}

TEST_CASE("Harnack and Caccioppoli constants are refinement stable") {
    const auto fine = ring(Ellipse{1.5, 1.0, 0.0}, 3.0, OperatorSpec::p_laplace(3.0), 128);
    const auto coarse = ring(Ellipse{1.5, 1.0, 0.0}, 3.0, OperatorSpec::p_laplace(3.0), 64);
    const auto h = check_harnack(fine, coarse);
    CHECK(h.passed);
    CHECK(h.metadata["constant_fine"].get<double>() > 1.0);
    CHECK(check_caccioppoli(fine, coarse).passed);

    const auto bad = corrupt_field(fine, 0, 0.2);
    CHECK_FALSE(check_harnack(bad, coarse).passed);
    CHECK_FALSE(check_caccioppoli(bad, coarse).passed);
}

TEST_CASE("comparison and maximum principle") {
    const auto f = disk_ring(3.0, 2.0, 64);
    SolveOptions raised;
    raised.inner_value = 1.1;
    const auto g = solve_potential(f.op, f.grid, raised);
    CHECK(check_comparison(f, g).passed);
    CHECK_FALSE(check_comparison(g, f).passed);

    CHECK(check_max_principle(f).passed);
    auto u = f.u;
    u[f.grid.index(30, 5)] = 1.2;
    CHECK_FALSE(check_max_principle(make_field(f.grid, f.op, u)).passed);
}

TEST_CASE("residual checks catch a corrupted ray") {
    const auto f = disk_ring(2.0, 2.0);
    CHECK(check_weak_residual(f).passed);
    CHECK(check_discrete_residual(f).passed);
    const auto bad = corrupt_field(f, 0);
    CHECK_FALSE(check_discrete_residual(bad).passed);
}

TEST_CASE("uniqueness") {
    BernoulliProblem pb(make_body(Disk{1.0}, 256), OperatorSpec::p_laplace(2.0));
    const auto same = check_uniqueness(pb, {make_body(Disk{3.0}, 256), make_body(Disk{3.0}, 256)}, UpdateMode::normal);
    CHECK(same.passed);
    CHECK(same.metadata["max_hausdorff"].get<double>() == 0.0);

    const auto starved = check_uniqueness(pb, {make_body(Disk{3.0}, 256)}, UpdateMode::normal, 1);
    CHECK_FALSE(starved.passed);
    CHECK(starved.metadata.contains("error"));
}

TEST_CASE("suite on the radial case, clean and corrupted") {
    BernoulliProblem pb(make_body(Disk{1.0}, 256), OperatorSpec::p_laplace(2.0));
    const auto clean = run_suite(pb);
    for (const auto& r : clean) {
        CAPTURE(r.to_json().dump());
        CHECK(r.passed);
    }
    CHECK(all_passed(clean));
    CHECK(to_json(clean).size() == clean.size());

    SuiteOptions o;
    o.inject_corruption = true;
    const auto bad = run_suite(pb, o);
    CHECK_FALSE(all_passed(bad));
    CHECK_FALSE(named(bad, "levelset_convexity").passed);
    CHECK_FALSE(named(bad, "discrete_residual").passed);
    CHECK_FALSE(named(bad, "weak_residual").passed);
    CHECK(named(bad, "operator_structure").passed);
}
