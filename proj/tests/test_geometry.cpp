#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "bfbs/geometry.hpp"

#include <cmath>
#include <sstream>

using namespace bfbs;

namespace {

StarBody rounded_square(double r) {
    return make_body(RoundedPolygon{{{-1, -1}, {1, -1}, {1, 1}, {-1, 1}}, r}, 256);
}

}  // namespace

TEST_CASE("ellipse polar form") {
    const auto e = make_body(Ellipse{2.0, 1.0, 0.0}, 256);
    CHECK(e.rho(0) == doctest::Approx(2.0));
    CHECK(e.rho(64) == doctest::Approx(1.0));
    // ab / sqrt(b^2 cos^2 + a^2 sin^2) at theta = pi/4: 2 / sqrt(2.5)
    CHECK(e.rho(32) == doctest::Approx(2.0 / std::sqrt(2.5)));
    CHECK(is_convex(make_body(Ellipse{3.0, 1.0, 0.7}, 256)));
}

TEST_CASE("rounded polygon") {
    const auto sq = rounded_square(0.2);
    CHECK(is_convex(sq));
    // Discrete normals at the arc/edge junctions cost up to one edge length.
    const double h = sq.mean_edge_length();
    CHECK(interior_ball_radius(sq) >= 0.2 - h);
    CHECK(interior_ball_radius(sq) <= 0.2 + h);
    CHECK(sq.rho(0) == doctest::Approx(1.0));
    CHECK_THROWS_AS(rounded_square(0.0), DomainError);
    CHECK_THROWS_AS(make_body(RoundedPolygon{{{0, 0}, {1, 0}}, 0.1}, 256), DomainError);
}

TEST_CASE("resolution rules") {
    CHECK(valid_resolution(64));
    CHECK(valid_resolution(256));
    CHECK_FALSE(valid_resolution(100));
    CHECK_FALSE(valid_resolution(32));
    CHECK_THROWS_AS(make_body(Disk{1.0}, 100), DomainError);
    CHECK_THROWS_AS(make_body(Disk{-1.0}, 256), DomainError);
}

TEST_CASE("convexify removes a dent") {
    std::vector<double> rho(128, 1.0);
    rho[10] = 0.7;
    const StarBody dented({0.0, 0.0}, rho);
    CHECK_FALSE(is_convex(dented));
    const auto hull = convexify(dented);
    CHECK(is_convex(hull));
    CHECK(hull.rho(10) > 0.99);
    CHECK(contains(hull, dented, -1e-12));
}

TEST_CASE("rotation by a multiple of the angular step is an index shift") {
    const auto e = make_body(Ellipse{2.0, 1.0, 0.3}, 256);
    const auto r = rotated(e, kPi / 2.0);
    for (std::size_t j = 0; j < 256; ++j) CHECK(r.rho((j + 64) % 256) == doctest::Approx(e.rho(j)).epsilon(1e-12));
}

TEST_CASE("distances between concentric disks") {
    const auto a = make_body(Disk{1.0}, 256);
    const auto b = make_body(Disk{1.5}, 256);
    CHECK(hausdorff_distance(a, b) == doctest::Approx(0.5).epsilon(1e-3));
    CHECK(boundary_gap(b, a) == doctest::Approx(0.5).epsilon(1e-3));
    CHECK(hausdorff_distance(a, a) == 0.0);
    CHECK(signed_clearance(b, {0.0, 0.0}) == doctest::Approx(1.5).epsilon(1e-3));
    CHECK(signed_clearance(a, {2.0, 0.0}) == doctest::Approx(-1.0).epsilon(1e-3));
    CHECK(contains(b, a, 0.4));
    CHECK_FALSE(contains(a, b, 0.0));
}

TEST_CASE("matched point on concentric disks is the radial one") {
    const auto k = make_body(Disk{1.0}, 128);
    const auto omega = make_body(Disk{2.0}, 128);
    for (std::size_t j = 0; j < 128; j += 7) CHECK(matched_index(k, omega, j) == j);
}

TEST_CASE("supporting and trimming half-planes") {
    const auto d = make_body(Disk{1.0}, 256);
    const HalfPlane h = supporting_halfplane(d, 0);
    CHECK(h.normal.x() == doctest::Approx(1.0));
    CHECK(h.signed_distance({0.0, 0.0}) < 0.0);
    HalfPlane cut = h;
    cut.point = {0.8, 0.0};
    const auto t = trim_halfplane(d, cut);
    CHECK(t.rho(0) == doctest::Approx(0.8));
    CHECK(is_convex(t));
    CHECK(t.area() < d.area());

    std::vector<double> rho(128, 1.0);
    rho[5] = 0.5;
    CHECK_THROWS_AS(supporting_halfplane(StarBody({0.0, 0.0}, rho), 5), DomainError);
}

TEST_CASE("intersect needs a shared center") {
    const auto a = make_body(Disk{1.0}, 128);
    const auto b = translated(make_body(Disk{1.0}, 128), {0.1, 0.0});
    CHECK_THROWS_AS(intersect(a, b), DomainError);
    const auto c = intersect(a, scaled(a, 0.5));
    CHECK(c.max_rho() == doctest::Approx(0.5));
}

TEST_CASE("boundary csv layout") {
    std::ostringstream os;
    write_boundary_csv(os, make_body(Disk{2.0}, 64));
    std::istringstream in(os.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "j,theta,rho,x,y");
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 64);
}
