#include "bfbs/pde_solver.hpp"

#include <Eigen/Sparse>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseLU>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <random>

namespace bfbs {

namespace {

struct RayGeom {
    double w;   // rho_Omega - rho_K
    double r;   // rho_K + s w
    double rt;  // d r / d theta
    double angle;
};

Mat2 frame(double angle) {
    Mat2 m;
    m << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
    return m;
}

// (u_s, u_theta) -> physical gradient, global frame.
Mat2 to_physical(const RayGeom& g) {
    Mat2 loc;
    loc << 1.0 / g.w, 0.0, -g.rt / (g.w * g.r), 1.0 / g.r;
    return frame(g.angle) * loc;
}

// Physical vector (global frame) -> contravariant flux J F^{-1} V.
Mat2 to_flux(const RayGeom& g) {
    Mat2 loc;
    loc << g.r, -g.rt, 0.0, g.w;
    return loc * frame(g.angle).transpose();
}

std::vector<double> centered_derivative(const StarBody& b) {
    const std::size_t m = b.size();
    const double h = 2.0 * kPi / static_cast<double>(m);
    std::vector<double> d(m);
    for (std::size_t j = 0; j < m; ++j) d[j] = (b.rho((j + 1) % m) - b.rho((j + m - 1) % m)) / (2.0 * h);
    return d;
}

double lagrange4(const double* xs, const double* ys, double x) {
    double acc = 0.0;
    for (int a = 0; a < 4; ++a) {
        double l = 1.0;
        for (int b = 0; b < 4; ++b)
            if (b != a) l *= (x - xs[b]) / (xs[a] - xs[b]);
        acc += l * ys[a];
    }
    return acc;
}

// Start index of a 4-point window containing [i, i+1] inside [0, n].
int window_start(int i, int n) { return std::clamp(i - 1, 0, n - 3); }

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

bool is_linear(const OperatorSpec& op) { return op.p == 2.0; }

Vec2 face_gradient(const GridFace& f, const std::vector<double>& u) {
    double us = 0.0, ut = 0.0;
    for (int k = 0; k < 6; ++k) {
        us += f.ws[k] * u[f.nodes[k]];
        ut += f.wt[k] * u[f.nodes[k]];
    }
    return Vec2(us, ut);
}

struct RowSums {
    std::vector<double> value;
    std::vector<double> magnitude;
};

RowSums divergence_rows(const AnnularGrid& grid, const OperatorSpec& op, const std::vector<double>& u) {
    RowSums rs{std::vector<double>(grid.node_count(), 0.0), std::vector<double>(grid.node_count(), 0.0)};
    for (const GridFace& f : grid.faces()) {
        const Vec2 a = eval_a(op, f.to_physical * face_gradient(f, u));
        const double flux = f.weight * (f.to_flux * a)(f.dir);
        rs.value[f.plus] += flux;
        rs.value[f.minus] -= flux;
        rs.magnitude[f.plus] += std::abs(flux);
        rs.magnitude[f.minus] += std::abs(flux);
    }
    return rs;
}

bool interior_row(const AnnularGrid& grid, std::size_t node) {
    const auto i = static_cast<int>(node % static_cast<std::size_t>(grid.layers() + 1));
    return i > 0 && i < grid.layers();
}

}  // namespace

AnnularGrid::AnnularGrid(StarBody inner, StarBody outer, int layers)
    : inner_(std::move(inner)), outer_(std::move(outer)), layers_(layers) {
    drho_inner_ = centered_derivative(inner_);
    drho_outer_ = centered_derivative(outer_);
    build_faces();
}

double AnnularGrid::min_gap() const {
    double g = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < angles(); ++j) g = std::min(g, gap(j));
    return g;
}

double AnnularGrid::mean_gap() const { return outer_.mean_rho() - inner_.mean_rho(); }

Vec2 AnnularGrid::node(int i, std::size_t j) const {
    return inner_.center() + (inner_.rho(j) + s(i) * gap(j)) * inner_.direction(j);
}

double AnnularGrid::jacobian(int i, std::size_t j) const { return gap(j) * (inner_.rho(j) + s(i) * gap(j)); }

Mat2 AnnularGrid::node_to_physical(int i, std::size_t j) const {
    const double w = gap(j);
    const double wp = drho_outer_[j] - drho_inner_[j];
    return to_physical(RayGeom{w, inner_.rho(j) + s(i) * w, drho_inner_[j] + s(i) * wp, theta(j)});
}

void AnnularGrid::build_faces() {
    const std::size_t m = angles();
    const int n = layers_;
    const double h_s = hs(), h_t = htheta();
    faces_.clear();
    faces_.reserve(m * static_cast<std::size_t>(2 * n - 1));
    for (std::size_t j = 0; j < m; ++j) {
        const std::size_t jp = (j + 1) % m, jm = (j + m - 1) % m;
        const double w = gap(j);
        const double wp = drho_outer_[j] - drho_inner_[j];
        for (int i = 0; i < n; ++i) {
            const double sm = (i + 0.5) * h_s;
            const RayGeom g{w, inner_.rho(j) + sm * w, drho_inner_[j] + sm * wp, theta(j)};
            GridFace f;
            f.dir = 0;
            f.nodes = {index(i + 1, j), index(i, j), index(i, jp), index(i + 1, jp), index(i, jm), index(i + 1, jm)};
            const double q = 1.0 / (4.0 * h_t);
            f.ws = {1.0 / h_s, -1.0 / h_s, 0.0, 0.0, 0.0, 0.0};
            f.wt = {0.0, 0.0, q, q, -q, -q};
            f.to_physical = to_physical(g);
            f.to_flux = to_flux(g);
            f.plus = index(i, j);
            f.minus = index(i + 1, j);
            f.weight = h_t;
            faces_.push_back(f);
        }
        const double rk = 0.5 * (inner_.rho(j) + inner_.rho(jp));
        const double ro = 0.5 * (outer_.rho(j) + outer_.rho(jp));
        const double dk = (inner_.rho(jp) - inner_.rho(j)) / h_t;
        const double dout = (outer_.rho(jp) - outer_.rho(j)) / h_t;
        for (int i = 1; i < n; ++i) {
            const double si = s(i);
            const RayGeom g{ro - rk, rk + si * (ro - rk), dk + si * (dout - dk), theta(j) + 0.5 * h_t};
            GridFace f;
            f.dir = 1;
            f.nodes = {index(i, jp), index(i, j), index(i + 1, j), index(i + 1, jp), index(i - 1, j), index(i - 1, jp)};
            const double q = 1.0 / (4.0 * h_s);
            f.wt = {1.0 / h_t, -1.0 / h_t, 0.0, 0.0, 0.0, 0.0};
            f.ws = {0.0, 0.0, q, q, -q, -q};
            f.to_physical = to_physical(g);
            f.to_flux = to_flux(g);
            f.plus = index(i, j);
            f.minus = index(i, jp);
            f.weight = h_s;
            faces_.push_back(f);
        }
    }
}

std::optional<std::array<double, 2>> AnnularGrid::locate(const Vec2& x) const {
    const Vec2 rel = x - inner_.center();
    double a = std::atan2(rel.y(), rel.x());
    if (a < 0.0) a += 2.0 * kPi;
    const double jf = a / htheta();
    const std::size_t m = angles();
    const auto j0 = static_cast<std::size_t>(std::floor(jf)) % m;
    const std::size_t j1 = (j0 + 1) % m;
    const double t = jf - std::floor(jf);
    const double rk = (1.0 - t) * inner_.rho(j0) + t * inner_.rho(j1);
    const double ro = (1.0 - t) * outer_.rho(j0) + t * outer_.rho(j1);
    const double sv = (rel.norm() - rk) / (ro - rk);
    const double slack = 1e-9;
    if (sv < -slack || sv > 1.0 + slack) return std::nullopt;
    return std::array<double, 2>{std::clamp(sv, 0.0, 1.0), jf};
}

AnnularGrid build_grid(const StarBody& inner, const StarBody& outer, int layers) {
    if (layers < 32) throw DomainError("grid needs at least 32 layers");
    if (inner.size() != outer.size()) throw DomainError("inner and outer bodies need the same angular resolution");
    if (!valid_resolution(inner.size())) throw DomainError("angular resolution must be a power of two >= 64");
    const double scale = std::max(inner.max_rho(), outer.max_rho());
    if ((inner.center() - outer.center()).norm() > 1e-12 * scale)
        throw DomainError("inner and outer bodies need a shared center");
    const double gap_min = kGapMinFraction * inner.max_rho();
    for (std::size_t j = 0; j < inner.size(); ++j) {
        const double g = outer.rho(j) - inner.rho(j);
        if (g <= 0.0) throw DomainError("outer body does not contain the inner body (negative map Jacobian)");
        if (g < gap_min) throw DomainError("ring pinches: gap below minimum at angle index " + std::to_string(j));
    }
    return AnnularGrid(inner, outer, layers);
}

nlohmann::json SolveMeta::to_json() const {
    nlohmann::json j;
    j["iterations"] = iterations;
    j["increment"] = increment;
    j["residual"] = residual;
    j["delta_final"] = delta_final;
    j["damping_final"] = damping_final;
    j["max_principle_violation"] = max_principle_violation;
    j["wall_ms"] = wall_ms;
    return j;
}

std::vector<Vec2> node_gradients(const AnnularGrid& grid, const std::vector<double>& v) {
    const int n = grid.layers();
    const std::size_t m = grid.angles();
    const double h_s = grid.hs(), h_t = grid.htheta();
    std::vector<Vec2> g(grid.node_count());
    for (std::size_t j = 0; j < m; ++j) {
        const std::size_t jp = (j + 1) % m, jm = (j + m - 1) % m;
        for (int i = 0; i <= n; ++i) {
            double us;
            if (i == 0) us = (-3.0 * v[grid.index(0, j)] + 4.0 * v[grid.index(1, j)] - v[grid.index(2, j)]) / (2.0 * h_s);
            else if (i == n) us = (3.0 * v[grid.index(n, j)] - 4.0 * v[grid.index(n - 1, j)] + v[grid.index(n - 2, j)]) / (2.0 * h_s);
            else us = (v[grid.index(i + 1, j)] - v[grid.index(i - 1, j)]) / (2.0 * h_s);
            const double ut = (v[grid.index(i, jp)] - v[grid.index(i, jm)]) / (2.0 * h_t);
            g[grid.index(i, j)] = grid.node_to_physical(i, j) * Vec2(us, ut);
        }
    }
    return g;
}

PotentialField make_field(const AnnularGrid& grid, const OperatorSpec& op, std::vector<double> u) {
    if (u.size() != grid.node_count()) throw DomainError("field size does not match the grid");
    std::vector<Vec2> g = node_gradients(grid, u);
    return PotentialField{grid, op, std::move(u), std::move(g), SolveMeta{}};
}

double nonlinear_residual(const PotentialField& field) {
    const RowSums rs = divergence_rows(field.grid, field.op, field.u);
    double worst = 0.0;
    for (std::size_t k = 0; k < rs.value.size(); ++k) {
        if (!interior_row(field.grid, k) || rs.magnitude[k] == 0.0) continue;
        worst = std::max(worst, std::abs(rs.value[k]) / rs.magnitude[k]);
    }
    return worst;
}

PotentialField solve_potential(const OperatorSpec& op, const AnnularGrid& grid, const SolveOptions& opts) {
    op.validate();
    const auto t0 = std::chrono::steady_clock::now();
    const int n = grid.layers();
    const std::size_t m = grid.angles();
    const std::size_t nodes = grid.node_count();
    const auto unknowns = static_cast<Eigen::Index>(m * static_cast<std::size_t>(n - 1));
    std::vector<Eigen::Index> unk(nodes, -1);
    for (std::size_t j = 0; j < m; ++j)
        for (int i = 1; i < n; ++i) unk[grid.index(i, j)] = static_cast<Eigen::Index>(j * static_cast<std::size_t>(n - 1) + static_cast<std::size_t>(i - 1));

    std::vector<double> u(nodes);
    if (opts.warm_start != nullptr) {
        if (opts.warm_start->size() != nodes) throw DomainError("warm start does not match the grid");
        u = *opts.warm_start;
    } else {
        for (std::size_t j = 0; j < m; ++j)
            for (int i = 0; i <= n; ++i) u[grid.index(i, j)] = opts.inner_value + grid.s(i) * (opts.outer_value - opts.inner_value);
    }
    for (std::size_t j = 0; j < m; ++j) {
        u[grid.index(0, j)] = opts.inner_value;
        u[grid.index(n, j)] = opts.outer_value;
    }

    const bool linear = is_linear(op);
    const double omega_star = linear ? 1.0 : (opts.damping > 0.0 ? opts.damping : 1.0 / (op.p - 1.0));
    double omega = omega_star;
    double delta = opts.delta0 > 0.0 ? opts.delta0 : 0.1 / grid.mean_gap();
    delta = std::max(delta, opts.delta_min);

    Eigen::IncompleteLUT<double> ilut;
    bool have_prec = false;
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(grid.faces().size() * 12);
    Eigen::VectorXd rhs(unknowns);

    PotentialField field{grid, op, {}, {}, SolveMeta{}};
    field.u = u;
    double res = nonlinear_residual(field);
    SolveMeta& meta = field.meta;
    meta.residual_history.push_back(res);

    bool converged = false;
    for (int it = 1; it <= opts.max_picard; ++it) {
        trip.clear();
        rhs.setZero();
        for (const GridFace& f : grid.faces()) {
            const Vec2 grad = f.to_physical * face_gradient(f, u);
            const Mat2 b = linear ? eval_jacobian(op, Vec2(1.0, 0.0)) : regularized_jacobian(op, grad, delta);
            const Mat2 c = f.to_flux * b * f.to_physical;
            const double cs = f.weight * c(f.dir, 0), ct = f.weight * c(f.dir, 1);
            for (int k = 0; k < 6; ++k) {
                const double coef = cs * f.ws[k] + ct * f.wt[k];
                const std::size_t col = f.nodes[k];
                for (int side = 0; side < 2; ++side) {
                    const std::size_t row = side == 0 ? f.plus : f.minus;
                    const Eigen::Index r = unk[row];
                    if (r < 0) continue;
                    // Rows negated so the matrix has a positive diagonal.
                    const double val = side == 0 ? -coef : coef;
                    if (unk[col] >= 0) trip.emplace_back(r, unk[col], val);
                    else rhs(r) -= val * u[col];
                }
            }
        }
        Eigen::SparseMatrix<double> a(unknowns, unknowns);
        a.setFromTriplets(trip.begin(), trip.end());
        a.makeCompressed();
        Eigen::VectorXd x(unknowns);
        for (std::size_t k = 0; k < nodes; ++k)
            if (unk[k] >= 0) x(unk[k]) = u[k];
        const double rhs_norm = std::max(rhs.norm(), std::numeric_limits<double>::min());
        // BiCGSTAB preconditioned by an incomplete LU that is kept across
        // Picard steps while it stays effective; sparse LU as the fallback.
        bool solved = false;
        for (int attempt = 0; attempt < 2 && !solved; ++attempt) {
            if (!have_prec || attempt > 0) {
                ilut.setDroptol(1e-3);
                ilut.setFillfactor(10);
                ilut.compute(a);
                have_prec = ilut.info() == Eigen::Success;
                if (!have_prec) break;
            }
            Eigen::VectorXd y = x;
            Eigen::Index iters = 80;
            double err = 0.1 * opts.linear_tol;
            Eigen::internal::bicgstab(a, rhs, y, ilut, iters, err);
            if ((a * y - rhs).norm() / rhs_norm <= opts.linear_tol) {
                x = y;
                solved = true;
                if (iters > 40) have_prec = false;
            }
        }
        if (!solved) {
            Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
            lu.compute(a);
            if (lu.info() != Eigen::Success) throw ConvergenceError("linear-solve breakdown: sparse factorisation failed");
            x = lu.solve(rhs);
            x += lu.solve(rhs - a * x);
            if (!((a * x - rhs).norm() / rhs_norm <= opts.linear_tol))
                throw ConvergenceError("linear-solve breakdown: relative residual above tolerance");
        }

        std::vector<double> trial = u;
        double incr = 0.0;
        for (std::size_t k = 0; k < nodes; ++k) {
            if (unk[k] < 0) continue;
            trial[k] = u[k] + omega * (x(unk[k]) - u[k]);
            incr = std::max(incr, std::abs(trial[k] - u[k]));
        }
        field.u = trial;
        const double res_new = nonlinear_residual(field);
        meta.iterations = it;
        if (!linear && res_new > res * (1.0 + 1e-3) && res > 1e-2 * opts.tol_residual && omega > omega_star / 64.0) {
            omega *= 0.5;
            field.u = u;
            continue;
        }
        u = std::move(trial);
        res = res_new;
        meta.residual_history.push_back(res);
        meta.increment = incr;
        meta.delta_final = delta;
        if (linear) {
            // Frozen coefficients do not depend on u: one solve is the fixed point.
            meta.increment = 0.0;
            converged = true;
            break;
        }
        omega = std::min(omega_star, 1.5 * omega);
        double gmin = std::numeric_limits<double>::infinity();
        for (const GridFace& f : grid.faces()) gmin = std::min(gmin, (f.to_physical * face_gradient(f, u)).norm());
        const double delta_stop = std::max(opts.delta_min, 1e-6 * gmin);
        if (incr <= opts.tol && res <= opts.tol_residual && delta <= delta_stop) {
            converged = true;
            break;
        }
        delta = std::max(opts.delta_min, 0.5 * delta);
    }
    meta.residual = res;
    meta.damping_final = omega;
    if (!converged)
        throw ConvergenceError("Picard iteration did not converge in " + std::to_string(opts.max_picard) +
                               " steps (increment " + std::to_string(meta.increment) + ", residual " + std::to_string(res) + ")");

    const double lo = std::min(opts.inner_value, opts.outer_value);
    const double hi = std::max(opts.inner_value, opts.outer_value);
    for (double v : u) meta.max_principle_violation = std::max({meta.max_principle_violation, v - hi, lo - v});
    field.u = std::move(u);
    field.grad = node_gradients(grid, field.u);
    meta.wall_ms = elapsed_ms(t0);
    return field;
}

TraceData boundary_gradient_trace(const PotentialField& field, Side side) {
    const AnnularGrid& grid = field.grid;
    const int i = side == Side::inner ? 0 : grid.layers();
    TraceData t{side, std::vector<double>(grid.angles())};
    for (std::size_t j = 0; j < grid.angles(); ++j) t.g[j] = field.grad_at(i, j).norm();
    return t;
}

StarBody level_set(const PotentialField& field, double t) {
    const AnnularGrid& grid = field.grid;
    const int n = grid.layers();
    std::vector<double> rho(grid.angles());
    std::vector<double> ss(static_cast<std::size_t>(n + 1));
    for (int i = 0; i <= n; ++i) ss[static_cast<std::size_t>(i)] = grid.s(i);
    for (std::size_t j = 0; j < grid.angles(); ++j) {
        std::vector<double> vals(static_cast<std::size_t>(n + 1));
        for (int i = 0; i <= n; ++i) vals[static_cast<std::size_t>(i)] = field.at(i, j);
        if (!(t < vals.front() && t > vals.back())) throw DomainError("level outside the boundary values");
        int bracket = -1;
        for (int i = 0; i < n; ++i) {
            if (!(vals[static_cast<std::size_t>(i + 1)] < vals[static_cast<std::size_t>(i)]))
                throw DomainError("potential not strictly decreasing along ray " + std::to_string(j));
            if (bracket < 0 && vals[static_cast<std::size_t>(i)] >= t && vals[static_cast<std::size_t>(i + 1)] < t) bracket = i;
        }
        const auto w0 = static_cast<std::size_t>(window_start(bracket, n));
        double lo = grid.s(bracket), hi = grid.s(bracket + 1);
        // Bisection on the cubic through the 4-point window.
        for (int it = 0; it < 80; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (lagrange4(&ss[w0], &vals[w0], mid) >= t) lo = mid;
            else hi = mid;
        }
        const double sv = 0.5 * (lo + hi);
        rho[j] = grid.inner().rho(j) + sv * grid.gap(j);
    }
    return StarBody(grid.inner().center(), std::move(rho));
}

double gradient_norm_on_ray(const PotentialField& field, std::size_t j, double s) {
    const AnnularGrid& grid = field.grid;
    const int n = grid.layers();
    const double sc = std::clamp(s, 0.0, 1.0);
    const int i = std::min(static_cast<int>(std::floor(sc * n)), n - 1);
    const int w0 = window_start(i, n);
    double xs[4], ys[4];
    for (int k = 0; k < 4; ++k) {
        xs[k] = grid.s(w0 + k);
        ys[k] = field.grad_at(w0 + k, j).norm();
    }
    return lagrange4(xs, ys, sc);
}

namespace {

struct Bilinear {
    int i0;
    std::size_t j0, j1;
    double a, b;
};

std::optional<Bilinear> bilinear_at(const AnnularGrid& grid, const Vec2& x) {
    const auto loc = grid.locate(x);
    if (!loc) return std::nullopt;
    const double sf = (*loc)[0] * grid.layers();
    const int i0 = std::min(static_cast<int>(std::floor(sf)), grid.layers() - 1);
    const double jf = (*loc)[1];
    const std::size_t m = grid.angles();
    const auto j0 = static_cast<std::size_t>(std::floor(jf)) % m;
    return Bilinear{i0, j0, (j0 + 1) % m, sf - i0, jf - std::floor(jf)};
}

// Returns by value: with Eigen types an auto return would hold dangling temporaries.
template <typename Get>
auto blend(const Bilinear& w, Get&& get) -> std::decay_t<decltype(get(0, std::size_t{0}))> {
    return (1 - w.a) * (1 - w.b) * get(w.i0, w.j0) + w.a * (1 - w.b) * get(w.i0 + 1, w.j0) +
           (1 - w.a) * w.b * get(w.i0, w.j1) + w.a * w.b * get(w.i0 + 1, w.j1);
}

}  // namespace

std::optional<double> sample_field(const PotentialField& field, const Vec2& x) {
    const auto w = bilinear_at(field.grid, x);
    if (!w) return std::nullopt;
    return blend(*w, [&](int i, std::size_t j) { return field.at(i, j); });
}

std::optional<Vec2> sample_gradient(const PotentialField& field, const Vec2& x) {
    const auto w = bilinear_at(field.grid, x);
    if (!w) return std::nullopt;
    return blend(*w, [&](int i, std::size_t j) -> Vec2 { return field.grad_at(i, j); });
}

double weak_residual(const PotentialField& field, int bump_count, std::uint64_t seed) {
    if (bump_count < 1) throw DomainError("weak residual needs at least one test function");
    const AnnularGrid& grid = field.grid;
    const int n = grid.layers();
    const std::size_t m = grid.angles();
    const double h_s = grid.hs(), h_t = grid.htheta();

    struct Cell {
        Vec2 x;
        Vec2 a;
        double area;
    };
    std::vector<Cell> cells;
    cells.reserve(m * static_cast<std::size_t>(n));
    for (std::size_t j = 0; j < m; ++j) {
        const std::size_t jp = (j + 1) % m;
        const double rk = 0.5 * (grid.inner().rho(j) + grid.inner().rho(jp));
        const double ro = 0.5 * (grid.outer().rho(j) + grid.outer().rho(jp));
        const double dk = (grid.inner().rho(jp) - grid.inner().rho(j)) / h_t;
        const double dout = (grid.outer().rho(jp) - grid.outer().rho(j)) / h_t;
        const double ang = grid.theta(j) + 0.5 * h_t;
        for (int i = 0; i < n; ++i) {
            const double sm = (i + 0.5) * h_s;
            const RayGeom g{ro - rk, rk + sm * (ro - rk), dk + sm * (dout - dk), ang};
            const double u00 = field.at(i, j), u10 = field.at(i + 1, j), u01 = field.at(i, jp), u11 = field.at(i + 1, jp);
            const Vec2 xi((u10 + u11 - u00 - u01) / (2.0 * h_s), (u01 + u11 - u00 - u10) / (2.0 * h_t));
            const Vec2 grad = to_physical(g) * xi;
            cells.push_back({grid.inner().center() + g.r * Vec2(std::cos(ang), std::sin(ang)), eval_a(field.op, grad),
                             g.w * g.r * h_s * h_t});
        }
    }

    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> pick_i(1, n - 1);
    std::uniform_int_distribution<std::size_t> pick_j(0, m - 1);
    double worst = 0.0;
    int placed = 0;
    for (int attempt = 0; placed < bump_count && attempt < 100 * bump_count; ++attempt) {
        const int i = pick_i(rng);
        const std::size_t j = pick_j(rng);
        const Vec2 z = grid.node(i, j);
        const double rr = grid.inner().rho(j) + grid.s(i) * grid.gap(j);
        const double radius = 3.0 * std::max(grid.gap(j) * h_s, rr * h_t);
        if (-signed_clearance(grid.inner(), z) < radius || signed_clearance(grid.outer(), z) < radius) continue;
        ++placed;
        double integral = 0.0, norm = 0.0;
        for (const Cell& c : cells) {
            const Vec2 d = c.x - z;
            const double q = d.squaredNorm() / (radius * radius);
            if (q >= 1.0) continue;
            const double om = 1.0 - q;
            const Vec2 grad_eta = std::exp(-1.0 / om) * (-1.0 / (om * om)) * (2.0 / (radius * radius)) * d;
            integral += c.a.dot(grad_eta) * c.area;
            norm += c.a.norm() * grad_eta.norm() * c.area;
        }
        if (norm > 0.0) worst = std::max(worst, std::abs(integral) / norm);
    }
    if (placed == 0) throw DomainError("ring too thin to place test functions");
    return worst;
}

std::vector<double> apply_linearized(const PotentialField& field, const std::vector<double>& w) {
    const AnnularGrid& grid = field.grid;
    if (w.size() != grid.node_count()) throw DomainError("array size does not match the grid");
    std::vector<double> out(grid.node_count(), 0.0);
    for (const GridFace& f : grid.faces()) {
        const Vec2 grad_u = f.to_physical * face_gradient(f, field.u);
        const Mat2 b = is_linear(field.op) ? eval_jacobian(field.op, Vec2(1.0, 0.0)) : regularized_jacobian(field.op, grad_u, 1e-8);
        const double flux = f.weight * (f.to_flux * (b * (f.to_physical * face_gradient(f, w))))(f.dir);
        out[f.plus] += flux;
        out[f.minus] -= flux;
    }
    const double cell = grid.hs() * grid.htheta();
    for (std::size_t j = 0; j < grid.angles(); ++j) {
        for (int i = 0; i <= grid.layers(); ++i) {
            double& v = out[grid.index(i, j)];
            if (i == 0 || i == grid.layers()) v = 0.0;
            else v /= cell * grid.jacobian(i, j);
        }
    }
    return out;
}

CheckReport linearized_identities(const PotentialField& field, double tol_lin) {
    const AnnularGrid& grid = field.grid;
    const int n = grid.layers();
    const int margin = 3;
    const double width = grid.mean_gap();
    const std::size_t count = grid.node_count();

    std::vector<double> lam(count, 0.0);
    for (std::size_t j = 0; j < grid.angles(); ++j) {
        for (int i = 0; i <= n; ++i) {
            const Vec2& g = field.grad_at(i, j);
            const Mat2 b = is_linear(field.op) ? eval_jacobian(field.op, Vec2(1.0, 0.0)) : regularized_jacobian(field.op, g, 1e-8);
            const Mat2 sym = 0.5 * (b + b.transpose());
            lam[grid.index(i, j)] = Eigen::SelfAdjointEigenSolver<Mat2>(sym).eigenvalues().maxCoeff();
        }
    }

    // Returns per-node L w and the normalising scale.
    auto evaluate = [&](const std::vector<double>& w, std::vector<double>& lw, std::vector<double>& scale) {
        lw = apply_linearized(field, w);
        const std::vector<Vec2> gw = node_gradients(grid, w);
        std::vector<double> gx(count), gy(count);
        for (std::size_t k = 0; k < count; ++k) {
            gx[k] = gw[k].x();
            gy[k] = gw[k].y();
        }
        const std::vector<Vec2> hx = node_gradients(grid, gx);
        const std::vector<Vec2> hy = node_gradients(grid, gy);
        scale.assign(count, 0.0);
        double top = 0.0;
        for (std::size_t k = 0; k < count; ++k) {
            const double off = 0.5 * (hx[k].y() + hy[k].x());
            const double hess = std::sqrt(hx[k].x() * hx[k].x() + hy[k].y() * hy[k].y() + 2.0 * off * off);
            scale[k] = lam[k] * (hess + gw[k].norm() / width);
            top = std::max(top, scale[k]);
        }
        for (double& s : scale) s += 1e-3 * top;
    };

    auto interior = [&](auto&& fn) {
        for (std::size_t j = 0; j < grid.angles(); ++j)
            for (int i = margin; i <= n - margin; ++i) fn(grid.index(i, j), i, j);
    };

    auto zero_check = [&](const std::string& name, const std::vector<std::vector<double>>& ws) {
        CheckReport r;
        r.name = name;
        r.tolerance = 0.0;
        double worst_ratio = 0.0;
        std::string where;
        for (const auto& w : ws) {
            std::vector<double> lw, scale;
            evaluate(w, lw, scale);
            interior([&](std::size_t k, int i, std::size_t j) {
                const double ratio = std::abs(lw[k]) / scale[k];
                if (ratio > worst_ratio) {
                    worst_ratio = ratio;
                    where = "node (" + std::to_string(i) + ", " + std::to_string(j) + ")";
                }
            });
        }
        r.worst_case = tol_lin - worst_ratio;
        r.location = where;
        r.metadata["max_ratio"] = worst_ratio;
        r.metadata["tol_lin"] = tol_lin;
        r.settle();
        return r;
    };

    std::vector<double> ux(count), uy(count), g2(count);
    for (std::size_t k = 0; k < count; ++k) {
        ux[k] = field.grad[k].x();
        uy[k] = field.grad[k].y();
        g2[k] = field.grad[k].squaredNorm();
    }

    CheckReport out;
    out.name = "linearized_identities";
    out.children.push_back(zero_check("L_u(u)", {field.u}));
    out.children.push_back(zero_check("L_u(grad u)", {ux, uy}));

    CheckReport sub;
    sub.name = "L_u(|grad u|^2) >= 0";
    {
        std::vector<double> lw, scale;
        evaluate(g2, lw, scale);
        double lowest = std::numeric_limits<double>::infinity();
        interior([&](std::size_t k, int i, std::size_t j) {
            const double v = lw[k] / scale[k];
            if (v < lowest) {
                lowest = v;
                sub.location = "node (" + std::to_string(i) + ", " + std::to_string(j) + ")";
            }
        });
        sub.worst_case = tol_lin + lowest;
        sub.metadata["min_normalised"] = lowest;
        sub.metadata["tol_lin"] = tol_lin;
        sub.settle();
    }
    out.children.push_back(sub);

    out.worst_case = std::numeric_limits<double>::infinity();
    for (const CheckReport& c : out.children) {
        if (c.worst_case < out.worst_case) {
            out.worst_case = c.worst_case;
            out.location = c.name + " at " + c.location;
        }
    }
    out.metadata["layers"] = n;
    out.metadata["margin_cells"] = margin;
    out.settle();
    return out;
}

void write_field_csv(std::ostream& os, const PotentialField& field) {
    const AnnularGrid& grid = field.grid;
    os << "i,j,s,theta,x,y,u,gx,gy\n";
    os << std::setprecision(12);
    for (std::size_t j = 0; j < grid.angles(); ++j) {
        for (int i = 0; i <= grid.layers(); ++i) {
            const Vec2 x = grid.node(i, j);
            const Vec2& g = field.grad_at(i, j);
            os << i << ',' << j << ',' << grid.s(i) << ',' << grid.theta(j) << ',' << x.x() << ',' << x.y() << ','
               << field.at(i, j) << ',' << g.x() << ',' << g.y() << '\n';
        }
    }
}

}  // namespace bfbs
