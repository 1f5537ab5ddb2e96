#include "bfbs/verify.hpp"

#include "bfbs/operator.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

namespace bfbs {

namespace {

std::string ray_location(const AnnularGrid& grid, int i, std::size_t j) {
    return "i=" + std::to_string(i) + " j=" + std::to_string(j) + " theta=" + std::to_string(grid.theta(j));
}

StarBody disk_about(const StarBody& k, double r) { return StarBody(k.center(), std::vector<double>(k.size(), r)); }

bool is_disk(const StarBody& body) {
    return body.max_rho() - body.min_rho() <= 1e-9 * body.max_rho();
}

double max_gradient(const PotentialField& field) {
    double m = 0.0;
    for (const auto& g : field.grad) m = std::max(m, g.norm());
    return m;
}

// Interior test disks: centred on the middle row at eight angles, with the
// radius chosen so that B(w, reach * r) stays inside the ring.
struct TestDisk {
    Vec2 w;
    double r;
    std::size_t j;
};

std::vector<TestDisk> test_disks(const AnnularGrid& grid, double reach) {
    std::vector<TestDisk> out;
    const std::size_t m = grid.angles();
    for (std::size_t k = 0; k < 8; ++k) {
        const std::size_t j = k * m / 8;
        const Vec2 w = grid.node(grid.layers() / 2, j);
        const double clearance = std::min(-signed_clearance(grid.inner(), w), signed_clearance(grid.outer(), w));
        out.push_back({w, 0.95 * clearance / reach, j});
    }
    return out;
}

Vec2 polar(const Vec2& w, double r, double t) { return w + r * Vec2(std::cos(t), std::sin(t)); }

double sample_or_throw(const PotentialField& field, const Vec2& x) {
    const auto v = sample_field(field, x);
    if (!v) throw DomainError("test disk leaves the ring");
    return *v;
}

double harnack_constant(const PotentialField& field, const TestDisk& d) {
    double hi = sample_or_throw(field, d.w);
    double lo = hi;
    for (int k = 1; k <= 4; ++k) {
        for (int a = 0; a < 16; ++a) {
            const double v = sample_or_throw(field, polar(d.w, d.r * k / 4.0, 2.0 * kPi * a / 16.0));
            hi = std::max(hi, v);
            lo = std::min(lo, v);
        }
    }
    if (!(lo > 0.0)) throw DomainError("nonpositive potential inside the ring");
    return hi / lo;
}

double caccioppoli_constant(const PotentialField& field, const TestDisk& d) {
    const double p = field.op.p;
    constexpr int nr = 16;
    constexpr int na = 64;
    double integral = 0.0;
    for (int k = 0; k < nr; ++k) {
        const double rr = d.r * (k + 0.5) / nr;
        for (int a = 0; a < na; ++a) {
            const auto g = sample_gradient(field, polar(d.w, rr, 2.0 * kPi * (a + 0.5) / na));
            if (!g) throw DomainError("test disk leaves the ring");
            integral += std::pow(g->norm(), p) * rr * (d.r / nr) * (2.0 * kPi / na);
        }
    }
    double umax = sample_or_throw(field, d.w);
    for (int k = 1; k <= 8; ++k)
        for (int a = 0; a < 32; ++a)
            umax = std::max(umax, sample_or_throw(field, polar(d.w, 2.0 * d.r * k / 8.0, 2.0 * kPi * a / 32.0)));
    return std::pow(d.r, p - 2.0) * integral / std::pow(umax, p);
}

// Shared shape of the two refinement-stability checks.
CheckReport stability_check(std::string name, const PotentialField& fine, const PotentialField& coarse, double reach,
                            double tol_rel, const std::function<double(const PotentialField&, const TestDisk&)>& constant) {
    CheckReport r;
    r.name = std::move(name);
    r.tolerance = tol_rel;
    r.worst_case = 0.0;
    double c_fine = 0.0;
    double c_coarse = 0.0;
    nlohmann::json per_disk = nlohmann::json::array();
    for (const auto& d : test_disks(fine.grid, reach)) {
        const double cf = constant(fine, d);
        const double cc = constant(coarse, d);
        c_fine = std::max(c_fine, cf);
        c_coarse = std::max(c_coarse, cc);
        const double change = std::abs(cf - cc) / cf;
        per_disk.push_back({{"j", d.j}, {"radius", d.r}, {"fine", cf}, {"coarse", cc}});
        if (-change < r.worst_case) {
            r.worst_case = -change;
            r.location = "ray j=" + std::to_string(d.j);
        }
    }
    r.metadata = {{"constant_fine", c_fine},
                  {"constant_coarse", c_coarse},
                  {"layers_fine", fine.grid.layers()},
                  {"layers_coarse", coarse.grid.layers()},
                  {"disks", per_disk}};
    r.settle();
    return r;
}

CheckReport guarded(const std::string& name, const std::function<CheckReport()>& fn) {
    try {
        return fn();
    } catch (const std::exception& e) {
        return failed_report(name, e.what());
    }
}

}  // namespace

CheckReport check_levelset_convexity(const PotentialField& field, const std::vector<double>& levels, double tol) {
    CheckReport r;
    r.name = "levelset_convexity";
    r.tolerance = tol;
    r.worst_case = std::numeric_limits<double>::infinity();
    nlohmann::json margins = nlohmann::json::object();
    for (const double t : levels) {
        CheckReport child;
        child.name = "level " + std::to_string(t);
        child.tolerance = tol;
        try {
            child.worst_case = convexity_margin(level_set(field, t));
        } catch (const std::exception& e) {
            child = failed_report(child.name, e.what());
            child.tolerance = tol;
        }
        child.settle();
        if (child.worst_case < r.worst_case) {
            r.worst_case = child.worst_case;
            r.location = "t=" + std::to_string(t);
        }
        r.children.push_back(std::move(child));
    }
    r.metadata = {{"levels", levels}, {"layers", field.grid.layers()}, {"angles", field.grid.angles()}};
    r.settle();
    return r;
}

CheckReport check_inner_outer_domination(const PotentialField& field, double tol) {
    const auto& k = field.grid.inner();
    const auto& omega = field.grid.outer();
    const TraceData gk = boundary_gradient_trace(field, Side::inner);
    const TraceData go = boundary_gradient_trace(field, Side::outer);
    CheckReport r;
    r.name = "inner_outer_domination";
    r.tolerance = tol;
    r.worst_case = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < k.size(); ++j) {
        const std::size_t mj = matched_index(k, omega, j);
        const double margin = gk.g[j] - go.g[mj];
        if (margin < r.worst_case) {
            r.worst_case = margin;
            r.location = "j=" + std::to_string(j) + " matched=" + std::to_string(mj);
        }
    }
    r.metadata = {{"inner_max", *std::max_element(gk.g.begin(), gk.g.end())},
                  {"outer_max", *std::max_element(go.g.begin(), go.g.end())}};
    r.settle();
    return r;
}

CheckReport check_gradient_bound(const PotentialField& field, double m_expected, double tol) {
    const double d0 = boundary_gap(field.grid.outer(), field.grid.inner());
    const TraceData go = boundary_gradient_trace(field, Side::outer);
    const auto it = std::max_element(go.g.begin(), go.g.end());

    CheckReport outer;
    outer.name = "outer_trace_bound";
    outer.tolerance = tol;
    outer.worst_case = 1.0 / d0 - *it;
    outer.location = "j=" + std::to_string(it - go.g.begin());
    outer.metadata = {{"d0", d0}, {"bound", 1.0 / d0}, {"outer_max", *it}};
    outer.settle();

    CheckReport inner;
    inner.name = "interior_bound";
    inner.tolerance = tol;
    std::size_t arg = 0;
    for (std::size_t n = 0; n < field.grad.size(); ++n)
        if (field.grad[n].norm() > field.grad[arg].norm()) arg = n;
    const double gmax = field.grad[arg].norm();
    inner.worst_case = std::isfinite(m_expected) ? m_expected - gmax : std::numeric_limits<double>::infinity();
    const auto stride = static_cast<std::size_t>(field.grid.layers() + 1);
    inner.location = ray_location(field.grid, static_cast<int>(arg % stride), arg / stride);
    inner.metadata = {{"max_gradient", gmax}};
    if (std::isfinite(m_expected)) inner.metadata["m_expected"] = m_expected;
    inner.settle();

    CheckReport r;
    r.name = "gradient_bound";
    r.tolerance = tol;
    r.worst_case = std::min(outer.worst_case, inner.worst_case);
    r.location = outer.worst_case <= inner.worst_case ? outer.location : inner.location;
    r.children = {outer, inner};
    r.settle();
    return r;
}

CheckReport check_decay_exponent(const PotentialField& field, double tol) {
    const auto& grid = field.grid;
    if (field.op.family != OperatorFamily::p_laplace) throw DomainError("decay exponent needs the p-Laplacian");
    if (!is_disk(grid.inner()) || !is_disk(grid.outer()) || (grid.inner().center() - grid.outer().center()).norm() > 0.0)
        throw DomainError("decay exponent needs concentric disks");
    const double expected = (1.0 - 2.0) / (field.op.p - 1.0);
    const int n = grid.layers();
    CheckReport r;
    r.name = "decay_exponent";
    r.tolerance = tol;
    r.worst_case = std::numeric_limits<double>::infinity();
    double mean_slope = 0.0;
    for (std::size_t j = 0; j < grid.angles(); ++j) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        int count = 0;
        for (int i = n / 4; i <= 3 * n / 4; ++i) {
            const double x = std::log((grid.node(i, j) - grid.inner().center()).norm());
            const double y = std::log(field.grad_at(i, j).norm());
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
            ++count;
        }
        const double slope = (count * sxy - sx * sy) / (count * sxx - sx * sx);
        mean_slope += slope / static_cast<double>(grid.angles());
        const double margin = -std::abs(slope - expected);
        if (margin < r.worst_case) {
            r.worst_case = margin;
            r.location = "j=" + std::to_string(j);
        }
    }
    r.metadata = {{"expected_slope", expected}, {"mean_slope", mean_slope}, {"layers", n}};
    r.settle();
    return r;
}

CheckReport check_uniqueness(const BernoulliProblem& problem, const std::vector<StarBody>& starts, UpdateMode mode,
                             int max_iter) {
    CheckReport r;
    r.name = "uniqueness";
    r.tolerance = 0.0;
    std::vector<StarBody> ends;
    nlohmann::json runs = nlohmann::json::array();
    for (const auto& s : starts) {
        try {
            auto res = solve_bernoulli(problem, mode, max_iter, s);
            runs.push_back({{"start_max_rho", s.max_rho()},
                            {"iterations", res.report.records.size()},
                            {"mean_rho", res.omega.mean_rho()},
                            {"interior_gradient_min", res.report.interior_gradient_min}});
            ends.push_back(std::move(res.omega));
        } catch (const std::exception& e) {
            auto f = failed_report("uniqueness", e.what());
            f.metadata["start_max_rho"] = s.max_rho();
            return f;
        }
    }
    if (ends.empty()) throw DomainError("uniqueness needs at least one start");
    double mean_rho = 0.0;
    for (const auto& e : ends) mean_rho += e.mean_rho() / static_cast<double>(ends.size());
    const double cell = 2.0 * kPi * mean_rho / static_cast<double>(ends.front().size());
    double dmax = 0.0;
    for (std::size_t a = 0; a < ends.size(); ++a) {
        for (std::size_t b = a + 1; b < ends.size(); ++b) {
            const double d = hausdorff_distance(ends[a], ends[b]);
            if (d > dmax) {
                dmax = d;
                r.location = "starts " + std::to_string(a) + "," + std::to_string(b);
            }
        }
    }
    r.worst_case = 3.0 * cell - dmax;
    r.metadata = {{"mode", to_string(mode)}, {"cell", cell}, {"max_hausdorff", dmax}, {"runs", runs}};
    r.settle();
    return r;
}

CheckReport check_rotation_covariance(const BernoulliProblem& problem, const StarBody& omega, double phi,
                                      double tol_disc, bool conjugate_operator) {
    const auto g1 = build_grid(problem.k, omega, problem.layers);
    const auto g2 = build_grid(rotated(problem.k, phi), rotated(omega, phi), problem.layers);
    const auto f1 = solve_potential(problem.op, g1, problem.solver);
    const auto f2 = solve_potential(conjugate_operator ? rotated(problem.op, phi) : problem.op, g2, problem.solver);
    const Mat2 rot = rotation(phi);
    CheckReport r;
    r.name = "rotation_covariance";
    r.tolerance = tol_disc;
    double worst = 0.0;
    std::size_t compared = 0;
    for (std::size_t j = 0; j < g1.angles(); ++j) {
        for (int i = 1; i < g1.layers(); ++i) {
            const auto v = sample_field(f2, rot * g1.node(i, j));
            if (!v) continue;
            ++compared;
            const double d = std::abs(f1.at(i, j) - *v);
            if (d > worst) {
                worst = d;
                r.location = ray_location(g1, i, j);
            }
        }
    }
    r.worst_case = -worst;
    r.metadata = {{"phi", phi},
                  {"max_node_difference", worst},
                  {"nodes_compared", compared},
                  {"conjugated", conjugate_operator}};
    r.settle();
    return r;
}

CheckReport check_harnack(const PotentialField& fine, const PotentialField& coarse, double tol_rel) {
    return stability_check("harnack", fine, coarse, 4.0, tol_rel, harnack_constant);
}

CheckReport check_caccioppoli(const PotentialField& fine, const PotentialField& coarse, double tol_rel) {
    return stability_check("caccioppoli", fine, coarse, 2.0, tol_rel, caccioppoli_constant);
}

CheckReport check_comparison(const PotentialField& lower, const PotentialField& upper, double tol) {
    if (lower.u.size() != upper.u.size()) throw DomainError("comparison needs fields on one grid");
    CheckReport r;
    r.name = "comparison";
    r.tolerance = tol;
    r.worst_case = std::numeric_limits<double>::infinity();
    const auto& grid = lower.grid;
    for (std::size_t j = 0; j < grid.angles(); ++j) {
        for (int i = 0; i <= grid.layers(); ++i) {
            const double d = upper.at(i, j) - lower.at(i, j);
            if (d < r.worst_case) {
                r.worst_case = d;
                r.location = ray_location(grid, i, j);
            }
        }
    }
    r.settle();
    return r;
}

CheckReport check_max_principle(const PotentialField& field, double tol) {
    const auto [lo, hi] = std::minmax_element(field.u.begin(), field.u.end());
    const double top = std::max(field.at(0, 0), field.at(field.grid.layers(), 0));
    const double bottom = std::min(field.at(0, 0), field.at(field.grid.layers(), 0));
    CheckReport r;
    r.name = "max_principle";
    r.tolerance = tol;
    r.worst_case = std::min(*lo - bottom, top - *hi);
    r.metadata = {{"min", *lo}, {"max", *hi}};
    r.settle();
    return r;
}

CheckReport check_weak_residual(const PotentialField& field, double tol, int bump_count, std::uint64_t seed) {
    CheckReport r;
    r.name = "weak_residual";
    r.tolerance = tol;
    const double w = weak_residual(field, bump_count, seed);
    r.worst_case = -w;
    r.metadata = {{"residual", w}, {"bumps", bump_count}, {"seed", seed}};
    r.settle();
    return r;
}

CheckReport check_discrete_residual(const PotentialField& field, double tol) {
    CheckReport r;
    r.name = "discrete_residual";
    r.tolerance = tol;
    const double res = nonlinear_residual(field);
    r.worst_case = -res;
    r.metadata = {{"residual", res}};
    r.settle();
    return r;
}

PotentialField corrupt_field(const PotentialField& field, std::size_t j, double amplitude) {
    auto u = field.u;
    const auto& grid = field.grid;
    for (int i = 0; i <= grid.layers(); ++i) u[grid.index(i, j % grid.angles())] += amplitude * std::sin(kPi * grid.s(i));
    auto out = make_field(grid, field.op, std::move(u));
    out.meta = field.meta;
    return out;
}

std::vector<CheckReport> run_suite(const BernoulliProblem& problem, const SuiteOptions& options) {
    std::vector<CheckReport> out;
    out.push_back(guarded("operator_structure", [&] {
        return check_mp(problem.op, problem.op.alpha + 1e-9, 1000);
    }));

    std::optional<BernoulliResult> result;
    try {
        result = solve_bernoulli(problem, options.mode, options.max_iter);
    } catch (const std::exception& e) {
        out.push_back(failed_report("bernoulli_solve", e.what()));
        return out;
    }
    const PotentialField field =
        options.inject_corruption ? corrupt_field(result->field, 0) : result->field;
    const StarBody& omega = result->omega;

    out.push_back(guarded("minimal_element_interior_bound", [&] {
        CheckReport r;
        r.name = "minimal_element_interior_bound";
        r.tolerance = 0.0;
        r.worst_case = result->report.interior_gradient_min - 0.95 * problem.c;
        r.metadata = {{"interior_gradient_min", result->report.interior_gradient_min}, {"c", problem.c}};
        r.settle();
        return r;
    }));
    if (options.mode == UpdateMode::trim) {
        out.push_back(guarded("nested_iterates", [&] {
            CheckReport r;
            r.name = "nested_iterates";
            r.tolerance = grid_epsilon(problem.k);
            r.worst_case = std::numeric_limits<double>::infinity();
            const auto& recs = result->report.records;
            for (std::size_t n = 0; n + 1 < recs.size(); ++n) {
                if (recs[n].nesting_margin < r.worst_case) {
                    r.worst_case = recs[n].nesting_margin;
                    r.location = "iteration " + std::to_string(recs[n].iter);
                }
            }
            if (recs.size() < 2) r.worst_case = 0.0;
            r.settle();
            return r;
        }));
    }

    out.push_back(guarded("levelset_convexity", [&] { return check_levelset_convexity(field); }));
    out.push_back(guarded("inner_outer_domination", [&] { return check_inner_outer_domination(field); }));
    out.push_back(guarded("max_principle", [&] { return check_max_principle(field); }));
    out.push_back(guarded("weak_residual", [&] { return check_weak_residual(field, 5e-3, 64, options.seed); }));
    out.push_back(guarded("discrete_residual", [&] { return check_discrete_residual(field, problem.solver.tol_residual); }));
    out.push_back(guarded("linearized_identities", [&] { return linearized_identities(field); }));

    std::optional<PotentialField> coarse;
    try {
        coarse = solve_potential(problem.op, build_grid(problem.k, omega, problem.layers / 2), problem.solver);
    } catch (const std::exception& e) {
        for (const char* name : {"gradient_bound", "harnack", "caccioppoli"}) out.push_back(failed_report(name, e.what()));
    }
    if (coarse) {
        out.push_back(guarded("gradient_bound", [&] {
            auto r = check_gradient_bound(field, 1.02 * max_gradient(*coarse));
            r.metadata["layers_coarse"] = coarse->grid.layers();
            return r;
        }));
        out.push_back(guarded("harnack", [&] { return check_harnack(field, *coarse); }));
        out.push_back(guarded("caccioppoli", [&] { return check_caccioppoli(field, *coarse); }));
    }

    out.push_back(guarded("comparison", [&] {
        SolveOptions raised = problem.solver;
        raised.inner_value = problem.solver.inner_value + 0.1;
        return check_comparison(field, solve_potential(problem.op, field.grid, raised));
    }));

    if (problem.op.family == OperatorFamily::p_laplace && is_disk(problem.k)) {
        out.push_back(guarded("decay_exponent", [&] {
            const auto ring = build_grid(problem.k, disk_about(problem.k, omega.mean_rho()), problem.layers);
            return check_decay_exponent(solve_potential(problem.op, ring, problem.solver));
        }));
    }

    out.push_back(guarded("rotation_covariance",
                          [&] { return check_rotation_covariance(problem, omega, options.rotation_angle); }));
    out.push_back(guarded("uniqueness", [&] {
        const double circ = problem.k.max_rho();
        return check_uniqueness(problem, {disk_about(problem.k, 3.0 * circ), disk_about(problem.k, 6.0 * circ)},
                                options.mode, options.max_iter);
    }));
    return out;
}

bool all_passed(const std::vector<CheckReport>& reports) {
    return std::all_of(reports.begin(), reports.end(), [](const CheckReport& r) { return r.passed; });
}

nlohmann::json to_json(const std::vector<CheckReport>& reports) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& r : reports) a.push_back(r.to_json());
    return a;
}

}  // namespace bfbs
