#include "bfbs/free_boundary.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <numeric>
#include <ostream>

namespace bfbs {

namespace {

PotentialField solve_ring(const BernoulliProblem& problem, const StarBody& omega, const PotentialField* warm) {
    const AnnularGrid grid = build_grid(problem.k, omega, problem.layers);
    if (warm != nullptr && warm->u.size() == grid.node_count()) {
        SolveOptions opts = problem.solver;
        opts.warm_start = &warm->u;
        opts.delta0 = opts.delta_min;
        try {
            return solve_potential(problem.op, grid, opts);
        } catch (const ConvergenceError&) {
            // fall through to a cold start
        }
    }
    return solve_potential(problem.op, grid, problem.solver);
}

StarBody disk_about(const StarBody& k, double r) {
    return StarBody(k.center(), std::vector<double>(k.size(), r));
}

// Real DFT smoothing: mode k scaled by 1 / (1 + k).
std::vector<double> smooth_modes(const std::vector<double>& v) {
    const std::size_t m = v.size();
    std::vector<double> cs(m), sn(m);
    for (std::size_t n = 0; n < m; ++n) {
        const double a = 2.0 * kPi * static_cast<double>(n) / static_cast<double>(m);
        cs[n] = std::cos(a);
        sn[n] = std::sin(a);
    }
    std::vector<double> out(m, 0.0);
    for (std::size_t k = 0; k <= m / 2; ++k) {
        double a = 0.0, b = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            a += v[j] * cs[(k * j) % m];
            b += v[j] * sn[(k * j) % m];
        }
        const double mult = (k == 0 || 2 * k == m) ? 1.0 : 2.0;
        const double f = mult / (static_cast<double>(m) * (1.0 + static_cast<double>(k)));
        for (std::size_t j = 0; j < m; ++j) out[j] += f * (a * cs[(k * j) % m] + b * sn[(k * j) % m]);
    }
    return out;
}

double support(const StarBody& body, const Vec2& n) {
    double h = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < body.size(); ++j) h = std::max(h, n.dot(body.point(j)));
    return h;
}

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

// Fraction of the level-consistent depth a single trim may remove.
constexpr double kLevelFraction = 0.5;

double potential_on_ray(const PotentialField& field, std::size_t j, double s) {
    const int n = field.grid.layers();
    const int i = std::min(static_cast<int>(std::floor(s * n)), n - 1);
    const int w0 = std::clamp(i - 1, 0, n - 3);
    double acc = 0.0;
    for (int a = 0; a < 4; ++a) {
        double l = 1.0;
        for (int b = 0; b < 4; ++b)
            if (b != a) l *= (s - field.grid.s(w0 + b)) / (field.grid.s(w0 + a) - field.grid.s(w0 + b));
        acc += l * field.at(w0 + a, j);
    }
    return acc;
}

// Radial distance from the outer boundary, along ray j, to the first point
// where the rescaled gradient |grad u| / (1 - u) of the level set through it
// reaches c.
double level_depth(const PotentialField& field, std::size_t j, double c) {
    auto rescaled = [&](double s) {
        const double u = potential_on_ray(field, j, s);
        return gradient_norm_on_ray(field, j, s) / std::max(1.0 - u, 1e-12);
    };
    double lo = 0.0, hi = 1.0;  // s: inner at 0, outer at 1
    if (rescaled(1.0) >= c) return 0.0;
    for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (rescaled(mid) >= c) lo = mid;
        else hi = mid;
    }
    return (1.0 - lo) * field.grid.gap(j);
}

}  // namespace

void BernoulliProblem::validate() const {
    op.validate();
    if (!(c > 0.0) || !std::isfinite(c)) throw DomainError("Bernoulli constant c must be positive");
    if (!is_convex(k)) throw DomainError("K must be convex");
    if (!(interior_ball_radius(k) > 0.0)) throw DomainError("K must satisfy the interior ball condition");
    if (layers < 32) throw DomainError("grid needs at least 32 layers");
    if (!valid_resolution(k.size())) throw DomainError("angular resolution must be a power of two >= 64");
    if (!(band_final > 0.0 && band_interior > 0.0)) throw DomainError("bands must be positive");
    if (!(tau > 0.0 && tau <= 1.0)) throw DomainError("tau must lie in (0, 1]");
    if (!(kappa > 0.0 && kappa <= 1.0)) throw DomainError("kappa must lie in (0, 1]");
    if (trim_cuts < 0) throw DomainError("trim_cuts must be non-negative");
    if (trim_backtracks < 0) throw DomainError("trim_backtracks must be non-negative");
}

std::string_view to_string(BeurlingClass cls) {
    switch (cls) {
        case BeurlingClass::subsolution: return "subsolution";
        case BeurlingClass::supersolution: return "supersolution";
        case BeurlingClass::solution: return "solution";
        case BeurlingClass::mixed: return "mixed";
    }
    return "mixed";
}

std::string_view to_string(UpdateMode mode) { return mode == UpdateMode::normal ? "normal" : "trim"; }

UpdateMode update_mode_from_string(std::string_view name) {
    if (name == "normal") return UpdateMode::normal;
    if (name == "trim") return UpdateMode::trim;
    throw DomainError("unknown update mode '" + std::string(name) + "' (expected normal or trim)");
}

BeurlingClass classify_trace(const TraceData& outer, double c, double band) {
    const auto [lo, hi] = std::minmax_element(outer.g.begin(), outer.g.end());
    const bool super = *hi <= c * (1.0 + band);
    const bool sub = *lo >= c * (1.0 - band);
    if (super && sub) return BeurlingClass::solution;
    if (super) return BeurlingClass::supersolution;
    if (sub) return BeurlingClass::subsolution;
    return BeurlingClass::mixed;
}

BeurlingClass classify(const BernoulliProblem& problem, const StarBody& omega, double band) {
    if (!contains(omega, problem.k, problem.gap_min())) throw DomainError("Omega must contain K with clearance gap_min");
    if (!is_convex(omega)) throw DomainError("Omega must be convex");
    const PotentialField field = solve_ring(problem, omega, nullptr);
    return classify_trace(boundary_gradient_trace(field, Side::outer), problem.c, band);
}

StarBody initial_supersolution(const BernoulliProblem& problem) {
    problem.validate();
    double r = 4.0 * problem.k.max_rho();
    for (int step = 0; step <= 10; ++step, r *= 2.0) {
        const BeurlingClass cls = classify(problem, disk_about(problem.k, r), problem.band_final);
        if (cls == BeurlingClass::supersolution || cls == BeurlingClass::solution) return disk_about(problem.k, r);
    }
    throw DomainError("no supersolution disk found within 2^10 doublings");
}

StarBody initial_subsolution(const BernoulliProblem& problem, const StarBody& omega1) {
    problem.validate();
    const PotentialField field = solve_ring(problem, omega1, nullptr);
    const double target = problem.c * (1.0 + problem.band_final);
    for (double t = 0.5; t >= 1e-4; t *= 0.5) {
        const StarBody level = level_set(field, 1.0 - t);
        double gmin = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < level.size(); ++j) {
            const double s = (level.rho(j) - problem.k.rho(j)) / field.grid.gap(j);
            gmin = std::min(gmin, gradient_norm_on_ray(field, j, s) / t);
        }
        if (gmin >= target) {
            StarBody out = convexify(level);
            if (!contains(out, problem.k, problem.gap_min()))
                throw DomainError("subsolution level set pinches onto K; refine the grid");
            return out;
        }
    }
    throw DomainError("subsolution level parameter t underflowed below 1e-4");
}

StarBody update_normal_motion(const BernoulliProblem& problem, const StarBody& omega, const TraceData& trace, double tau) {
    if (!(tau > 0.0 && tau <= 1.0)) throw DomainError("tau must lie in (0, 1]");
    const std::size_t m = omega.size();
    if (trace.g.size() != m) throw DomainError("trace does not match the body");
    std::vector<double> v(m);
    double vmax = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        v[j] = trace.g[j] / problem.c - 1.0;
        vmax = std::max(vmax, std::abs(v[j]));
    }
    const std::vector<double> vs = smooth_modes(v);
    const double scale = 1.0 / std::max(1.0, vmax);
    for (double t = tau; t >= 1e-4; t *= 0.5) {
        std::vector<double> rho(m);
        bool positive = true;
        for (std::size_t j = 0; j < m; ++j) {
            rho[j] = omega.rho(j) * (1.0 + t * vs[j] * scale);
            positive = positive && rho[j] > 0.0;
        }
        if (!positive) continue;
        StarBody out = convexify(StarBody(omega.center(), std::move(rho)));
        if (contains(out, problem.k, problem.gap_min())) return out;
    }
    throw DomainError("normal-motion update cannot keep K inside Omega even with tau below 1e-4");
}

StarBody update_trim(const BernoulliProblem& problem, const PotentialField& field, const TraceData& trace, double band,
                     double depth_scale) {
    const StarBody& omega = field.grid.outer();
    const std::size_t m = omega.size();
    if (trace.g.size() != m) throw DomainError("trace does not match the body");
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return trace.g[a] < trace.g[b]; });
    const double floor = problem.c * (1.0 - band);
    if (trace.g[order.front()] >= floor) return omega;

    const std::size_t cuts = problem.trim_cuts == 0 ? m : static_cast<std::size_t>(problem.trim_cuts);
    const auto spacing = static_cast<long long>(std::max<std::size_t>(1, m / (2 * cuts)));
    const double eps_min = 10.0 * grid_epsilon(omega);
    std::vector<std::size_t> chosen;
    StarBody out = omega;
    for (std::size_t j : order) {
        if (chosen.size() >= cuts || trace.g[j] >= floor) break;
        bool clear = true;
        for (std::size_t q : chosen) {
            const long long d = std::abs(static_cast<long long>(j) - static_cast<long long>(q));
            if (std::min<long long>(d, static_cast<long long>(m) - d) < spacing) clear = false;
        }
        if (!clear) continue;
        const HalfPlane plane = supporting_halfplane(omega, j);
        const double top = plane.normal.dot(plane.point);
        double eps = problem.kappa * omega.rho(j) * (1.0 - trace.g[j] / problem.c);
        eps = std::min(eps, kLevelFraction * level_depth(field, j, problem.c) * plane.normal.dot(omega.direction(j)));
        eps *= depth_scale;
        eps = std::min(eps, 0.5 * (top - support(problem.k, plane.normal)));
        // Samples already within the band stay on the boundary.
        for (std::size_t i = 0; i < m; ++i)
            if (trace.g[i] >= floor) eps = std::min(eps, top - plane.normal.dot(omega.point(i)));
        if (eps <= eps_min) continue;
        out = trim_halfplane(out, HalfPlane{plane.point - eps * plane.normal, plane.normal});
        chosen.push_back(j);
    }
    out = convexify(out);
    if (!contains(out, problem.k, problem.gap_min())) throw DomainError("trim would cut into K even after capping");
    return out;
}

nlohmann::json IterationRecord::to_json() const {
    nlohmann::json j;
    j["iter"] = iter;
    j["sup_dev"] = sup_dev;
    j["inf_dev"] = inf_dev;
    j["hausdorff_step"] = hausdorff_step;
    j["nesting_margin"] = nesting_margin;
    j["class"] = std::string(to_string(cls));
    j["solver_iters"] = solver_iters;
    j["backtracks"] = backtracks;
    j["wall_ms"] = wall_ms;
    j["hash"] = hash;
    return j;
}

nlohmann::json IterationReport::to_json() const {
    nlohmann::json j;
    j["status"] = status;
    j["total_solves"] = total_solves;
    j["interior_gradient_min"] = interior_gradient_min;
    j["interior_bound_ok"] = interior_bound_ok;
    j["iterations"] = nlohmann::json::array();
    for (const IterationRecord& r : records) j["iterations"].push_back(r.to_json());
    return j;
}

void IterationReport::write_jsonl(std::ostream& os) const {
    for (const IterationRecord& r : records) os << r.to_json().dump() << '\n';
}

std::string body_hash(const StarBody& body) {
    std::uint64_t h = 1469598103934665603ULL;
    for (double r : body.rho()) {
        unsigned char bytes[sizeof(double)];
        std::memcpy(bytes, &r, sizeof(double));
        for (unsigned char b : bytes) {
            h ^= b;
            h *= 1099511628211ULL;
        }
    }
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int k = 15; k >= 0; --k, h >>= 4) out[static_cast<std::size_t>(k)] = digits[h & 0xF];
    return out;
}

BernoulliResult solve_bernoulli(const BernoulliProblem& problem, UpdateMode mode, int max_iter, const std::optional<StarBody>& start) {
    problem.validate();
    if (max_iter < 0) throw DomainError("max_iter must be non-negative");
    IterationReport report;
    StarBody omega = start ? *start : initial_supersolution(problem);
    if (omega.size() != problem.k.size()) throw DomainError("start body must match K's angular resolution");
    if ((omega.center() - problem.k.center()).norm() > 1e-12 * omega.max_rho()) omega = resample(omega, problem.k.center());
    if (!contains(omega, problem.k, problem.gap_min())) throw DomainError("start body must contain K with clearance gap_min");
    if (!is_convex(omega)) throw DomainError("start body must be convex");

    std::optional<PotentialField> field;
    std::optional<PotentialField> pending;  // already solved on the accepted next body
    int growing = 0;
    double last_step = std::numeric_limits<double>::infinity();
    double trim_scale = 1.0;  // depth scale of the last accepted trim
    const double eps_grid = grid_epsilon(omega);
    auto fail = [&](IterationRecord& rec, std::chrono::steady_clock::time_point t0, const std::string& status,
                    const std::string& what) {
        rec.wall_ms = elapsed_ms(t0);
        report.records.push_back(rec);
        report.status = status;
        throw FreeBoundaryError(what, report);
    };
    for (int iter = 0;; ++iter) {
        const auto t0 = std::chrono::steady_clock::now();
        IterationRecord rec;
        rec.iter = iter;
        rec.hash = body_hash(omega);
        if (pending) {
            field = std::move(pending);
            pending.reset();
        } else {
            try {
                field = solve_ring(problem, omega, field ? &*field : nullptr);
            } catch (const std::exception& e) {
                report.status = std::string("solver failure: ") + e.what();
                throw FreeBoundaryError(report.status, report);
            }
            ++report.total_solves;
        }
        const TraceData trace = boundary_gradient_trace(*field, Side::outer);
        const auto [lo, hi] = std::minmax_element(trace.g.begin(), trace.g.end());
        rec.sup_dev = *hi / problem.c - 1.0;
        rec.inf_dev = *lo / problem.c - 1.0;
        rec.cls = classify_trace(trace, problem.c, problem.band_final);
        rec.solver_iters = field->meta.iterations;
        report.iterates.push_back(omega);

        if (rec.cls == BeurlingClass::solution) {
            rec.wall_ms = elapsed_ms(t0);
            report.records.push_back(rec);
            break;
        }
        if (iter >= max_iter)
            fail(rec, t0, "max_iter exceeded", "free-boundary iteration did not converge in " + std::to_string(max_iter) + " updates");

        StarBody next = omega;
        try {
            if (mode == UpdateMode::normal) {
                next = update_normal_motion(problem, omega, trace, problem.tau);
            } else {
                // Halve the cut depths until the trimmed body keeps the class.
                const bool keep_class = rec.cls == BeurlingClass::supersolution;
                double scale = std::min(1.0, 2.0 * trim_scale);
                for (int attempt = 0;; ++attempt, scale *= 0.5) {
                    trim_scale = scale;
                    next = update_trim(problem, *field, trace, problem.band_final, scale);
                    if (hausdorff_distance(omega, next) <= eps_grid) break;
                    pending = solve_ring(problem, next, &*field);
                    ++report.total_solves;
                    const BeurlingClass cls = classify_trace(boundary_gradient_trace(*pending, Side::outer), problem.c, problem.band_final);
                    if (!keep_class || cls == BeurlingClass::supersolution || cls == BeurlingClass::solution ||
                        attempt >= problem.trim_backtracks)
                        break;
                    ++rec.backtracks;
                }
            }
        } catch (const DomainError& e) {
            fail(rec, t0, std::string("update failure: ") + e.what(), std::string("update failure: ") + e.what());
        } catch (const ConvergenceError& e) {
            fail(rec, t0, std::string("solver failure: ") + e.what(), std::string("solver failure: ") + e.what());
        }
        rec.hausdorff_step = hausdorff_distance(omega, next);
        double margin = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < next.size(); ++j) margin = std::min(margin, signed_clearance(omega, next.point(j)));
        rec.nesting_margin = margin;

        if (rec.hausdorff_step <= eps_grid)
            fail(rec, t0, "stalled: update leaves the body unchanged",
                 "free-boundary iteration stalled (trace above c(1+band) cannot be lowered by trimming)");
        growing = rec.hausdorff_step > last_step ? growing + 1 : 0;
        last_step = rec.hausdorff_step;
        if (mode == UpdateMode::normal && growing >= 5)
            fail(rec, t0, "oscillation detected",
                 "free-boundary iteration oscillates: Hausdorff step grew 5 times in a row; try a smaller tau");
        rec.wall_ms = elapsed_ms(t0);
        report.records.push_back(rec);
        omega = std::move(next);
    }

    double gmin = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < field->grid.angles(); ++j)
        for (int i = 1; i < field->grid.layers(); ++i) gmin = std::min(gmin, field->grad_at(i, j).norm());
    report.interior_gradient_min = gmin;
    report.interior_bound_ok = gmin >= problem.c * (1.0 - problem.band_interior);
    report.status = "converged";
    return BernoulliResult{omega, std::move(*field), std::move(report)};
}

}  // namespace bfbs
