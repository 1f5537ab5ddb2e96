#pragma once

#include "bfbs/check_report.hpp"
#include "bfbs/geometry.hpp"
#include "bfbs/operator.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

namespace bfbs {

/// Relative pinch threshold: rho_Omega - rho_K must exceed this times max rho_K.
inline constexpr double kGapMinFraction = 1e-3;

/// Flux through one face of the (s, theta) computational grid, expressed as a
/// stencil on node values.
struct GridFace {
    int dir = 0;                   // 0: s-face (i+1/2, j), 1: theta-face (i, j+1/2)
    std::array<std::size_t, 6> nodes{};
    std::array<double, 6> ws{};    // u_s = sum ws[k] u[nodes[k]]
    std::array<double, 6> wt{};    // u_theta = sum wt[k] u[nodes[k]]
    Mat2 to_physical;              // (u_s, u_theta) -> grad u (global frame)
    Mat2 to_flux;                  // physical vector -> contravariant flux (s, theta)
    std::size_t plus = 0;          // node gaining +weight * flux
    std::size_t minus = 0;         // node gaining -weight * flux
    double weight = 0.0;
};

/// Curvilinear grid on the ring Omega \ K: node (i, j) sits at
/// center + r(s_i, theta_j) e(theta_j) with r = rho_K + s (rho_Omega - rho_K),
/// s_i = i / N. Node storage index is j * (N + 1) + i.
class AnnularGrid {
public:
    AnnularGrid(StarBody inner, StarBody outer, int layers);

    const StarBody& inner() const { return inner_; }
    const StarBody& outer() const { return outer_; }
    int layers() const { return layers_; }
    std::size_t angles() const { return inner_.size(); }
    std::size_t node_count() const { return angles() * static_cast<std::size_t>(layers_ + 1); }
    std::size_t index(int i, std::size_t j) const { return j * static_cast<std::size_t>(layers_ + 1) + static_cast<std::size_t>(i); }

    double hs() const { return 1.0 / layers_; }
    double htheta() const { return 2.0 * kPi / static_cast<double>(angles()); }
    double s(int i) const { return static_cast<double>(i) / layers_; }
    double theta(std::size_t j) const { return inner_.theta(j); }
    double gap(std::size_t j) const { return outer_.rho(j) - inner_.rho(j); }
    double min_gap() const;
    double mean_gap() const;

    Vec2 node(int i, std::size_t j) const;
    /// Map Jacobian determinant w * r at a node.
    double jacobian(int i, std::size_t j) const;
    /// (u_s, u_theta) -> physical gradient at a node.
    Mat2 node_to_physical(int i, std::size_t j) const;

    const std::vector<GridFace>& faces() const { return faces_; }

    /// Locate a physical point: returns (s, fractional angle index) or nullopt
    /// when the point is outside the ring.
    std::optional<std::array<double, 2>> locate(const Vec2& x) const;

private:
    void build_faces();

    StarBody inner_;
    StarBody outer_;
    int layers_;
    std::vector<double> drho_inner_;  // centered d rho / d theta at nodes
    std::vector<double> drho_outer_;
    std::vector<GridFace> faces_;
};

/// Validates containment/pinch/resolution and builds the grid.
AnnularGrid build_grid(const StarBody& inner, const StarBody& outer, int layers);

struct SolveMeta {
    int iterations = 0;
    double increment = 0.0;
    double residual = 0.0;
    double delta_final = 0.0;
    double damping_final = 0.0;
    double wall_ms = 0.0;
    double max_principle_violation = 0.0;
    std::vector<double> residual_history;

    nlohmann::json to_json() const;
};

struct PotentialField {
    AnnularGrid grid;
    OperatorSpec op;
    std::vector<double> u;
    std::vector<Vec2> grad;
    SolveMeta meta;

    double at(int i, std::size_t j) const { return u[grid.index(i, j)]; }
    const Vec2& grad_at(int i, std::size_t j) const { return grad[grid.index(i, j)]; }
};

/// Field from given node values (no solve); gradients are recomputed.
PotentialField make_field(const AnnularGrid& grid, const OperatorSpec& op, std::vector<double> u);

struct SolveOptions {
    double tol = 1e-8;          // Picard increment, max norm
    double tol_residual = 1e-6; // normalised nonlinear residual
    int max_picard = 200;
    double delta0 = 0.0;        // 0: 0.1 / mean ring width
    double delta_min = 1e-8;
    double damping = 0.0;       // 0: 1 / (p - 1)
    double linear_tol = 1e-10;
    double inner_value = 1.0;
    double outer_value = 0.0;
    const std::vector<double>* warm_start = nullptr;
};

/// A-capacitary potential of the ring by damped Picard iteration on the
/// linearised operator div(DA(grad u_prev, delta) grad u_next) = 0.
/// Throws ConvergenceError when max_picard is exhausted or a linear solve fails.
PotentialField solve_potential(const OperatorSpec& op, const AnnularGrid& grid, const SolveOptions& opts = {});

/// Normalised discrete divergence of A(grad u) over interior nodes.
double nonlinear_residual(const PotentialField& field);

/// Node gradients of an arbitrary node array on the grid (physical frame).
std::vector<Vec2> node_gradients(const AnnularGrid& grid, const std::vector<double>& values);

enum class Side { inner, outer };

struct TraceData {
    Side side = Side::outer;
    std::vector<double> g;
};

/// |grad u| on the boundary row by one-sided second-order differences.
TraceData boundary_gradient_trace(const PotentialField& field, Side side);

/// Body {u > t} recovered ray by ray by cubic inverse interpolation in s.
StarBody level_set(const PotentialField& field, double t);

/// |grad u| interpolated along ray j at parameter s.
double gradient_norm_on_ray(const PotentialField& field, std::size_t j, double s);

/// Bilinear interpolation of u at a physical point inside the ring.
std::optional<double> sample_field(const PotentialField& field, const Vec2& x);

/// Bilinear interpolation of the node gradients.
std::optional<Vec2> sample_gradient(const PotentialField& field, const Vec2& x);

/// max over bump test functions eta of |int <A(grad u), grad eta>| / int |A||grad eta|.
double weak_residual(const PotentialField& field, int bump_count, std::uint64_t seed = 7);

/// Discrete L_u applied to an arbitrary node array, in physical units
/// (div(DA(grad u) grad w)), zero on boundary rows.
std::vector<double> apply_linearized(const PotentialField& field, const std::vector<double>& w);

/// L_u u = 0, L_u u_{x_k} = 0 and L_u |grad u|^2 >= 0 on interior nodes with
/// a 3-cell margin, normalised by |DA| (|D^2 w| + |grad w| / width).
CheckReport linearized_identities(const PotentialField& field, double tol_lin = 5e-2);

void write_field_csv(std::ostream& os, const PotentialField& field);

}  // namespace bfbs
