#pragma once

#include "bfbs/types.hpp"

#include <iosfwd>
#include <span>
#include <variant>
#include <vector>

namespace bfbs {

/// Default slack for convexity: signed cross products of consecutive edges
/// may dip to -kConvexTol * L^2 (L = mean edge length).
inline constexpr double kConvexTol = 1e-6;

struct Disk {
    double r = 1.0;
};

/// Ellipse with semi-axes a (along phi) and b.
struct Ellipse {
    double a = 1.0;
    double b = 1.0;
    double phi = 0.0;
};

/// Convex polygon (counter-clockwise vertices) whose corners are replaced by
/// circular arcs of radius corner_radius tangent to both adjacent edges.
struct RoundedPolygon {
    std::vector<Vec2> vertices;
    double corner_radius = 0.0;
};

using ShapeSpec = std::variant<Disk, Ellipse, RoundedPolygon>;

/// A star-shaped planar body: boundary point j is center + rho[j] (cos t_j, sin t_j),
/// t_j = 2 pi j / M. Convexity is a predicate, not an invariant.
class StarBody {
public:
    StarBody(Vec2 center, std::vector<double> rho);

    std::size_t size() const { return rho_.size(); }
    const Vec2& center() const { return center_; }
    std::span<const double> rho() const { return rho_; }
    double rho(std::size_t j) const { return rho_[j]; }
    double theta(std::size_t j) const { return 2.0 * kPi * static_cast<double>(j) / static_cast<double>(size()); }
    Vec2 direction(std::size_t j) const;
    Vec2 point(std::size_t j) const { return center_ + rho_[j] * direction(j); }
    std::vector<Vec2> points() const;

    double min_rho() const;
    double max_rho() const;
    double mean_rho() const;
    double mean_edge_length() const;
    double area() const;

    /// Radius of the sampled polygon along an arbitrary direction angle.
    double radius_at(double angle) const;

private:
    Vec2 center_;
    std::vector<double> rho_;
};

/// Supporting line through a boundary point; the body lies on the side
/// normal.(x - point) <= 0.
struct HalfPlane {
    Vec2 point;
    Vec2 normal;

    double signed_distance(const Vec2& x) const { return normal.dot(x - point); }
};

/// True for powers of two >= 64.
bool valid_resolution(std::size_t m);

/// Radial sampling of a shape about its centroid.
StarBody make_body(const ShapeSpec& shape, std::size_t m);

/// Same body about another interior point (rays re-intersected with the
/// boundary polygon).
StarBody resample(const StarBody& body, const Vec2& new_center);

StarBody translated(const StarBody& body, const Vec2& offset);
StarBody scaled(const StarBody& body, double factor);

/// Rotation by phi about the origin. Multiples of 2 pi / M are an exact index
/// shift; other angles re-intersect the polygon.
StarBody rotated(const StarBody& body, double phi);

/// Minimum over vertices of cross(e_{j-1}, e_j) / L^2.
double convexity_margin(const StarBody& body);
bool is_convex(const StarBody& body, double tol = kConvexTol);

/// Radial sampling of the convex hull of the boundary points.
StarBody convexify(const StarBody& body);

/// Supporting half-plane at boundary point j. Throws DomainError for
/// non-convex bodies.
HalfPlane supporting_halfplane(const StarBody& body, std::size_t j, double tol = kConvexTol);

/// Index on omega's boundary of the point y maximising a.(y - x), where x is
/// boundary point j of k and a its supporting normal.
std::size_t matched_index(const StarBody& k, const StarBody& omega, std::size_t j);
Vec2 matched_point(const StarBody& k, const StarBody& omega, std::size_t j);

/// Pointwise minimum of radial functions; bodies must share center and M.
StarBody intersect(const StarBody& b1, const StarBody& b2);

/// Cut away the part of the body beyond the plane.
StarBody trim_halfplane(const StarBody& body, const HalfPlane& plane);

/// Largest radius of interior balls touching every boundary sample.
double interior_ball_radius(const StarBody& body);

/// Symmetric Hausdorff distance between the boundary polylines.
double hausdorff_distance(const StarBody& b1, const StarBody& b2);

/// Signed distance from x to the boundary polygon, positive inside.
double signed_clearance(const StarBody& body, const Vec2& x);

/// Every boundary sample of inner lies in outer with clearance >= margin.
bool contains(const StarBody& outer, const StarBody& inner, double margin);

/// Minimum Euclidean distance between the two boundary polylines.
double boundary_gap(const StarBody& outer, const StarBody& inner);

/// Grid tolerance used for nesting/containment comparisons.
double grid_epsilon(const StarBody& body);

/// Boundary CSV: header j,theta,rho,x,y with 12 significant digits.
void write_boundary_csv(std::ostream& os, const StarBody& body);

}  // namespace bfbs
