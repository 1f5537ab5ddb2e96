#include "bfbs/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>

namespace bfbs {

namespace {

double wrap_angle(double a) {
    a = std::fmod(a, 2.0 * kPi);
    if (a < 0.0) a += 2.0 * kPi;
    return a;
}

double point_segment_distance(const Vec2& x, const Vec2& a, const Vec2& b) {
    const Vec2 ab = b - a;
    const double len2 = ab.squaredNorm();
    double t = len2 > 0.0 ? (x - a).dot(ab) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return (x - (a + t * ab)).norm();
}

double point_polyline_distance(const Vec2& x, const std::vector<Vec2>& poly) {
    double best = std::numeric_limits<double>::infinity();
    const std::size_t n = poly.size();
    for (std::size_t k = 0; k < n; ++k) best = std::min(best, point_segment_distance(x, poly[k], poly[(k + 1) % n]));
    return best;
}

// Largest positive parameter t with origin + t*dir on the closed polygon.
double ray_polygon(const std::vector<Vec2>& poly, const Vec2& origin, const Vec2& dir) {
    double best = -1.0;
    const std::size_t n = poly.size();
    for (std::size_t k = 0; k < n; ++k) {
        const Vec2& a = poly[k];
        const Vec2 e = poly[(k + 1) % n] - a;
        const double den = cross(dir, e);
        if (den == 0.0) continue;
        const Vec2 w = a - origin;
        const double t = cross(w, e) / den;
        const double s = cross(w, dir) / den;
        const double slack = 1e-12;
        if (s >= -slack && s <= 1.0 + slack && t > 0.0) best = std::max(best, t);
    }
    if (best <= 0.0) throw DomainError("ray does not leave the polygon: origin not interior");
    return best;
}

StarBody sample_polygon(const std::vector<Vec2>& poly, const Vec2& center, std::size_t m) {
    std::vector<double> rho(m);
    for (std::size_t j = 0; j < m; ++j) {
        const double th = 2.0 * kPi * static_cast<double>(j) / static_cast<double>(m);
        rho[j] = ray_polygon(poly, center, Vec2(std::cos(th), std::sin(th)));
    }
    return StarBody(center, std::move(rho));
}

Vec2 polygon_centroid(const std::vector<Vec2>& pts) {
    double a = 0.0;
    Vec2 c = Vec2::Zero();
    const std::size_t n = pts.size();
    for (std::size_t k = 0; k < n; ++k) {
        const Vec2& p = pts[k];
        const Vec2& q = pts[(k + 1) % n];
        const double w = cross(p, q);
        a += w;
        c += w * (p + q);
    }
    return c / (3.0 * a);
}

// Distance from x to a convex polygon (0 inside).
double convex_polygon_distance(const Vec2& x, const std::vector<Vec2>& poly) {
    bool inside = true;
    const std::size_t n = poly.size();
    for (std::size_t k = 0; k < n; ++k) {
        if (cross(poly[(k + 1) % n] - poly[k], x - poly[k]) < 0.0) {
            inside = false;
            break;
        }
    }
    return inside ? 0.0 : point_polyline_distance(x, poly);
}

StarBody make_rounded_polygon(const RoundedPolygon& shape, std::size_t m) {
    std::vector<Vec2> v = shape.vertices;
    if (v.size() < 3) throw DomainError("rounded_polygon needs at least 3 vertices");
    if (!(shape.corner_radius > 0.0))
        throw DomainError("rounded_polygon corner_radius must be > 0: sharp corners violate the interior ball condition");
    double signed_area = 0.0;
    for (std::size_t k = 0; k < v.size(); ++k) signed_area += cross(v[k], v[(k + 1) % v.size()]);
    if (signed_area < 0.0) std::reverse(v.begin(), v.end());
    const std::size_t n = v.size();
    for (std::size_t k = 0; k < n; ++k) {
        const Vec2 e0 = v[(k + 1) % n] - v[k];
        const Vec2 e1 = v[(k + 2) % n] - v[(k + 1) % n];
        if (!(cross(e0, e1) > 0.0)) throw DomainError("rounded_polygon vertices are not strictly convex");
    }

    // Inset polygon: each edge line moved inward by r; the rounded shape is
    // the set of points within r of it.
    const double r = shape.corner_radius;
    std::vector<Vec2> inset(n);
    for (std::size_t k = 0; k < n; ++k) {
        const Vec2& a0 = v[(k + n - 1) % n];
        const Vec2& a1 = v[k];
        const Vec2& b1 = v[(k + 1) % n];
        const Vec2 d0 = (a1 - a0).normalized();
        const Vec2 d1 = (b1 - a1).normalized();
        const Vec2 n0(-d0.y(), d0.x());
        const Vec2 n1(-d1.y(), d1.x());
        const Vec2 p0 = a0 + r * n0;
        const Vec2 p1 = a1 + r * n1;
        const double t = cross(p1 - p0, d1) / cross(d0, d1);
        inset[k] = p0 + t * d0;
    }
    for (std::size_t k = 0; k < n; ++k) {
        const Vec2 e = inset[(k + 1) % n] - inset[k];
        if (e.dot(v[(k + 1) % n] - v[k]) <= 0.0)
            throw DomainError("rounded_polygon corner_radius too large for the polygon");
    }

    auto radial = [&](const Vec2& c, double th) {
        const Vec2 u(std::cos(th), std::sin(th));
        double hi = 0.0;
        for (const Vec2& p : v) hi = std::max(hi, (p - c).norm());
        hi *= 2.0;
        double lo = 0.0;
        for (int it = 0; it < 80; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (convex_polygon_distance(c + mid * u, inset) <= r) lo = mid;
            else hi = mid;
        }
        return 0.5 * (lo + hi);
    };

    Vec2 c0 = Vec2::Zero();
    for (const Vec2& p : v) c0 += p;
    c0 /= static_cast<double>(n);
    constexpr std::size_t kFine = 4096;
    std::vector<Vec2> fine(kFine);
    for (std::size_t j = 0; j < kFine; ++j) {
        const double th = 2.0 * kPi * static_cast<double>(j) / kFine;
        fine[j] = c0 + radial(c0, th) * Vec2(std::cos(th), std::sin(th));
    }
    const Vec2 centroid = polygon_centroid(fine);
    std::vector<double> rho(m);
    for (std::size_t j = 0; j < m; ++j) rho[j] = radial(centroid, 2.0 * kPi * static_cast<double>(j) / static_cast<double>(m));
    return StarBody(centroid, std::move(rho));
}

}  // namespace

StarBody::StarBody(Vec2 center, std::vector<double> rho) : center_(std::move(center)), rho_(std::move(rho)) {
    if (rho_.size() < 3) throw DomainError("star body needs at least 3 samples");
    for (double r : rho_)
        if (!(r > 0.0) || !std::isfinite(r)) throw DomainError("star body radii must be positive and finite");
}

Vec2 StarBody::direction(std::size_t j) const {
    const double th = theta(j);
    return {std::cos(th), std::sin(th)};
}

std::vector<Vec2> StarBody::points() const {
    std::vector<Vec2> pts(size());
    for (std::size_t j = 0; j < size(); ++j) pts[j] = point(j);
    return pts;
}

double StarBody::min_rho() const { return *std::min_element(rho_.begin(), rho_.end()); }
double StarBody::max_rho() const { return *std::max_element(rho_.begin(), rho_.end()); }
double StarBody::mean_rho() const { return std::accumulate(rho_.begin(), rho_.end(), 0.0) / static_cast<double>(size()); }

double StarBody::mean_edge_length() const {
    double total = 0.0;
    for (std::size_t j = 0; j < size(); ++j) total += (point((j + 1) % size()) - point(j)).norm();
    return total / static_cast<double>(size());
}

double StarBody::area() const {
    const double h = 2.0 * kPi / static_cast<double>(size());
    double a = 0.0;
    for (std::size_t j = 0; j < size(); ++j) a += rho_[j] * rho_[(j + 1) % size()];
    return 0.5 * std::sin(h) * a;
}

double StarBody::radius_at(double angle) const {
    const std::size_t m = size();
    const double h = 2.0 * kPi / static_cast<double>(m);
    const double a = wrap_angle(angle);
    std::size_t j = static_cast<std::size_t>(std::floor(a / h)) % m;
    const Vec2 pa = rho_[j] * direction(j);
    const Vec2 pb = rho_[(j + 1) % m] * direction((j + 1) % m);
    const Vec2 u(std::cos(a), std::sin(a));
    const Vec2 e = pb - pa;
    return cross(pa, e) / cross(u, e);
}

bool valid_resolution(std::size_t m) { return m >= 64 && (m & (m - 1)) == 0; }

StarBody make_body(const ShapeSpec& shape, std::size_t m) {
    if (!valid_resolution(m)) throw DomainError("angular resolution must be a power of two >= 64");
    if (const auto* d = std::get_if<Disk>(&shape)) {
        if (!(d->r > 0.0)) throw DomainError("disk radius must be positive");
        return StarBody(Vec2::Zero(), std::vector<double>(m, d->r));
    }
    if (const auto* e = std::get_if<Ellipse>(&shape)) {
        if (!(e->a > 0.0 && e->b > 0.0)) throw DomainError("ellipse semi-axes must be positive");
        std::vector<double> rho(m);
        for (std::size_t j = 0; j < m; ++j) {
            const double t = 2.0 * kPi * static_cast<double>(j) / static_cast<double>(m) - e->phi;
            const double bc = e->b * std::cos(t), as = e->a * std::sin(t);
            rho[j] = e->a * e->b / std::sqrt(bc * bc + as * as);
        }
        return StarBody(Vec2::Zero(), std::move(rho));
    }
    return make_rounded_polygon(std::get<RoundedPolygon>(shape), m);
}

StarBody resample(const StarBody& body, const Vec2& new_center) {
    if (signed_clearance(body, new_center) <= 0.0) throw DomainError("new center is not interior to the body");
    return sample_polygon(body.points(), new_center, body.size());
}

StarBody translated(const StarBody& body, const Vec2& offset) {
    return StarBody(body.center() + offset, std::vector<double>(body.rho().begin(), body.rho().end()));
}

StarBody scaled(const StarBody& body, double factor) {
    std::vector<double> rho(body.rho().begin(), body.rho().end());
    for (double& r : rho) r *= factor;
    return StarBody(body.center() * factor, std::move(rho));
}

StarBody rotated(const StarBody& body, double phi) {
    const std::size_t m = body.size();
    const Mat2 rot = rotation(phi);
    const Vec2 c = rot * body.center();
    const double steps = phi * static_cast<double>(m) / (2.0 * kPi);
    const double rounded = std::round(steps);
    if (std::abs(steps - rounded) < 1e-9) {
        const auto shift = static_cast<long long>(rounded);
        const auto mm = static_cast<long long>(m);
        std::vector<double> rho(m);
        for (std::size_t j = 0; j < m; ++j) {
            const long long src = ((static_cast<long long>(j) - shift) % mm + mm) % mm;
            rho[j] = body.rho(static_cast<std::size_t>(src));
        }
        return StarBody(c, std::move(rho));
    }
    std::vector<Vec2> pts = body.points();
    for (Vec2& p : pts) p = rot * p;
    return sample_polygon(pts, c, m);
}

double convexity_margin(const StarBody& body) {
    const std::vector<Vec2> pts = body.points();
    const std::size_t m = pts.size();
    const double l = body.mean_edge_length();
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < m; ++j) {
        const Vec2 e0 = pts[j] - pts[(j + m - 1) % m];
        const Vec2 e1 = pts[(j + 1) % m] - pts[j];
        worst = std::min(worst, cross(e0, e1) / (l * l));
    }
    return worst;
}

bool is_convex(const StarBody& body, double tol) { return convexity_margin(body) >= -tol; }

StarBody convexify(const StarBody& body) {
    std::vector<Vec2> pts = body.points();
    std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
        return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
    });
    // Andrew's monotone chain, counter-clockwise, collinear points dropped.
    std::vector<Vec2> hull(2 * pts.size());
    std::size_t k = 0;
    for (const Vec2& p : pts) {
        while (k >= 2 && cross(hull[k - 1] - hull[k - 2], p - hull[k - 2]) <= 0.0) --k;
        hull[k++] = p;
    }
    for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
        const Vec2& p = pts[i];
        while (k >= lower && cross(hull[k - 1] - hull[k - 2], p - hull[k - 2]) <= 0.0) --k;
        hull[k++] = p;
    }
    hull.resize(k - 1);
    StarBody out = sample_polygon(hull, body.center(), body.size());
    // Points on the original rays never move inward.
    std::vector<double> rho(out.rho().begin(), out.rho().end());
    for (std::size_t j = 0; j < rho.size(); ++j) rho[j] = std::max(rho[j], body.rho(j));
    return StarBody(body.center(), std::move(rho));
}

HalfPlane supporting_halfplane(const StarBody& body, std::size_t j, double tol) {
    if (!is_convex(body, tol)) throw DomainError("supporting half-plane requires a convex body");
    const std::size_t m = body.size();
    const Vec2 p = body.point(j);
    const Vec2 e0 = p - body.point((j + m - 1) % m);
    const Vec2 e1 = body.point((j + 1) % m) - p;
    const Vec2 n0 = Vec2(e0.y(), -e0.x()).normalized();
    const Vec2 n1 = Vec2(e1.y(), -e1.x()).normalized();
    return HalfPlane{p, (n0 + n1).normalized()};
}

std::size_t matched_index(const StarBody& k, const StarBody& omega, std::size_t j) {
    if (!contains(omega, k, 0.0)) throw DomainError("matched point requires K inside Omega");
    const HalfPlane plane = supporting_halfplane(k, j);
    std::size_t best = omega.size();
    double best_val = 0.0;
    for (std::size_t i = 0; i < omega.size(); ++i) {
        const double v = plane.signed_distance(omega.point(i));
        if (v > best_val) {
            best_val = v;
            best = i;
        }
    }
    if (best == omega.size()) throw DomainError("no boundary point of Omega beyond the supporting line");
    return best;
}

Vec2 matched_point(const StarBody& k, const StarBody& omega, std::size_t j) {
    return omega.point(matched_index(k, omega, j));
}

StarBody intersect(const StarBody& b1, const StarBody& b2) {
    if (b1.size() != b2.size()) throw DomainError("intersect requires equal angular resolution");
    const double scale = std::max(b1.max_rho(), b2.max_rho());
    if ((b1.center() - b2.center()).norm() > 1e-12 * scale)
        throw DomainError("intersect requires a shared center; resample first");
    std::vector<double> rho(b1.size());
    for (std::size_t j = 0; j < rho.size(); ++j) rho[j] = std::min(b1.rho(j), b2.rho(j));
    if (*std::min_element(rho.begin(), rho.end()) <= 0.0) throw DomainError("intersection has empty interior");
    StarBody out(b1.center(), std::move(rho));
    return is_convex(out) ? out : convexify(out);
}

StarBody trim_halfplane(const StarBody& body, const HalfPlane& plane) {
    const double d_center = plane.signed_distance(body.center());
    if (d_center >= 0.0) throw DomainError("trim plane removes the body center; re-center first");
    std::vector<double> rho(body.rho().begin(), body.rho().end());
    for (std::size_t j = 0; j < rho.size(); ++j) {
        const double den = plane.normal.dot(body.direction(j));
        if (den > 0.0) rho[j] = std::min(rho[j], -d_center / den);
    }
    return StarBody(body.center(), std::move(rho));
}

double interior_ball_radius(const StarBody& body) {
    const std::vector<Vec2> pts = body.points();
    const std::size_t m = pts.size();
    double result = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < m; ++j) {
        const Vec2 inward = -supporting_halfplane(body, j).normal;
        auto fits = [&](double delta) {
            const Vec2 z = pts[j] + delta * inward;
            const double limit = delta * (1.0 - 1e-12);
            for (const Vec2& q : pts)
                if ((q - z).norm() < limit) return false;
            return true;
        };
        double lo = 0.0, hi = 2.0 * body.max_rho();
        if (hi > result) hi = result;  // only need to know whether j is binding
        if (fits(hi)) {
            result = std::min(result, hi);
            continue;
        }
        for (int it = 0; it < 64; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (fits(mid)) lo = mid;
            else hi = mid;
        }
        result = std::min(result, lo);
    }
    return result;
}

double hausdorff_distance(const StarBody& b1, const StarBody& b2) {
    const std::vector<Vec2> p1 = b1.points();
    const std::vector<Vec2> p2 = b2.points();
    double d = 0.0;
    for (const Vec2& x : p1) d = std::max(d, point_polyline_distance(x, p2));
    for (const Vec2& x : p2) d = std::max(d, point_polyline_distance(x, p1));
    return d;
}

double signed_clearance(const StarBody& body, const Vec2& x) {
    const Vec2 rel = x - body.center();
    const double dist = point_polyline_distance(x, body.points());
    if (rel.norm() == 0.0) return dist;
    const double inside = body.radius_at(std::atan2(rel.y(), rel.x())) - rel.norm();
    return inside >= 0.0 ? dist : -dist;
}

bool contains(const StarBody& outer, const StarBody& inner, double margin) {
    for (std::size_t j = 0; j < inner.size(); ++j)
        if (signed_clearance(outer, inner.point(j)) < margin) return false;
    return true;
}

double boundary_gap(const StarBody& outer, const StarBody& inner) {
    const std::vector<Vec2> po = outer.points();
    const std::vector<Vec2> pi = inner.points();
    double d = std::numeric_limits<double>::infinity();
    for (const Vec2& x : pi) d = std::min(d, point_polyline_distance(x, po));
    for (const Vec2& x : po) d = std::min(d, point_polyline_distance(x, pi));
    return d;
}

double grid_epsilon(const StarBody& body) { return 1e-9 * body.max_rho(); }

void write_boundary_csv(std::ostream& os, const StarBody& body) {
    os << "j,theta,rho,x,y\n";
    os << std::setprecision(12);
    for (std::size_t j = 0; j < body.size(); ++j) {
        const Vec2 p = body.point(j);
        os << j << ',' << body.theta(j) << ',' << body.rho(j) << ',' << p.x() << ',' << p.y() << '\n';
    }
}

}  // namespace bfbs
