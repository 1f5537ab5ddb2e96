#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "bfbs/oracle.hpp"
#include "bfbs/types.hpp"

#include <cmath>

using namespace bfbs;
using namespace bfbs::oracle;

TEST_CASE("logarithmic potential for p = n = 2") {
    const RadialCase rc{2.0, 2, 1.0, 2.0};
    CHECK(radial_potential(rc, 1.0) == doctest::Approx(1.0));
    CHECK(radial_potential(rc, 2.0) == doctest::Approx(0.0));
    CHECK(radial_potential(rc, std::sqrt(2.0)) == doctest::Approx(0.5));
    CHECK(radial_gradient(rc, 1.0) == doctest::Approx(1.0 / std::log(2.0)));
    CHECK(radial_gradient(rc, 2.0) == doctest::Approx(0.7213475204444817));
}

TEST_CASE("power potential for p = 3") {
    // u = 2 - sqrt(r) on 1 < r < 4
    const RadialCase rc{3.0, 2, 1.0, 4.0};
    CHECK(radial_potential(rc, 2.25) == doctest::Approx(0.5));
    CHECK(radial_gradient(rc, 1.0) == doctest::Approx(0.5));
    CHECK(radial_gradient(rc, 4.0) == doctest::Approx(0.25));
}

TEST_CASE("exponent near n joins the logarithmic case") {
    const RadialCase near{2.0 + 1e-9, 2, 1.0, 3.0};
    const RadialCase exact{2.0, 2, 1.0, 3.0};
    CHECK(radial_potential(near, 1.7) == doctest::Approx(radial_potential(exact, 1.7)).epsilon(1e-7));
}

TEST_CASE("Bernoulli radius") {
    const auto r2 = bernoulli_radius(2.0, 2, 1.0, 1.0);
    CHECK(r2.radius == doctest::Approx(1.763222834).epsilon(1e-9));
    CHECK(r2.residual < 1e-10);
    // p = 3: sqrt(R) (sqrt(R) - 1) = 1/2, R = 1 + sqrt(3)/2
    CHECK(bernoulli_radius(3.0, 2, 1.0, 1.0).radius == doctest::Approx(1.0 + std::sqrt(3.0) / 2.0).epsilon(1e-10));
    CHECK(bernoulli_radius(4.0, 2, 1.0, 1.0).radius == doctest::Approx(1.90668).epsilon(1e-5));
    CHECK(bernoulli_radius(1.5, 2, 1.0, 1.0).radius == doctest::Approx(1.618034).epsilon(1e-6));
    // scaling: R(a, c) = a R(1, a c)
    CHECK(bernoulli_radius(2.0, 2, 2.0, 0.5).radius == doctest::Approx(2.0 * r2.radius).epsilon(1e-9));
}

TEST_CASE("invalid radial cases") {
    CHECK_THROWS_AS(radial_potential(RadialCase{2.0, 2, 2.0, 1.0}, 1.5), DomainError);
    CHECK_THROWS_AS(radial_potential(RadialCase{1.0, 2, 1.0, 2.0}, 1.5), DomainError);
    CHECK_THROWS_AS(radial_potential(RadialCase{2.0, 2, 1.0, 2.0}, 3.0), DomainError);
    CHECK_THROWS_AS(bernoulli_radius(2.0, 2, 1.0, 0.0), DomainError);
}
