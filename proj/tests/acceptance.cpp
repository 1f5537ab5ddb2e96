// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include "bfbs/free_boundary.hpp"
#include "bfbs/oracle.hpp"
#include "bfbs/verify.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

using namespace bfbs;

namespace {

constexpr std::size_t kAngles = 256;
constexpr int kLayers = 128;

struct Outcome {
    bool passed = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) passed = false;
        if (!detail.empty()) detail += "; ";
        detail += what + (ok ? "" : " [x]");
    }
};

std::string num(double v, int digits = 4) {
    std::ostringstream os;
    os.precision(digits);
    os << v;
    return os.str();
}

StarBody rounded_square() { return make_body(RoundedPolygon{{{-1, -1}, {1, -1}, {1, 1}, {-1, 1}}, 0.25}, kAngles); }

BernoulliProblem problem(const StarBody& k, double p) {
    BernoulliProblem pb(k, OperatorSpec::p_laplace(p));
    pb.layers = kLayers;
    return pb;
}

// Converged rings collected along the way, for criteria 5, 7 and 9.
struct Converged {
    std::string label;
    PotentialField field;
    IterationReport report;
};
std::vector<Converged> g_converged;

BernoulliResult solve_and_keep(const std::string& label, const BernoulliProblem& pb, UpdateMode mode,
                               const std::optional<StarBody>& start = std::nullopt) {
    auto res = solve_bernoulli(pb, mode, 200, start);
    g_converged.push_back({label, res.field, res.report});
    return res;
}

double radial_error(const BernoulliResult& res, double expected) {
    return std::max(std::abs(res.omega.max_rho() / expected - 1.0), std::abs(res.omega.min_rho() / expected - 1.0));
}

std::optional<BernoulliResult> g_radial_trim;

// Interior minima of the solutions computed inside the uniqueness runs.
std::vector<std::pair<std::string, double>> g_uniqueness_minima;

Outcome criterion1() {
    Outcome o;
    const double oracle_r = oracle::bernoulli_radius(2.0, 2, 1.0, 1.0).radius;
    const auto t0 = std::chrono::steady_clock::now();
    g_radial_trim = solve_and_keep("disk p=2 trim", problem(make_body(Disk{1.0}, kAngles), 2.0), UpdateMode::trim);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const double err = radial_error(*g_radial_trim, oracle_r);
    o.require(err <= 0.01, "R in [" + num(g_radial_trim->omega.min_rho(), 6) + ", " + num(g_radial_trim->omega.max_rho(), 6) +
                               "] vs " + num(oracle_r, 10) + " (rel " + num(err, 2) + ")");
    o.require(secs <= 60.0, "time " + num(secs, 3) + " s");
    return o;
}

Outcome criterion2() {
    Outcome o;
    const double oracle_r = oracle::bernoulli_radius(3.0, 2, 1.0, 1.0).radius;
    for (auto mode : {UpdateMode::normal, UpdateMode::trim}) {
        const auto res = solve_and_keep("disk p=3 " + std::string(to_string(mode)), problem(make_body(Disk{1.0}, kAngles), 3.0), mode);
        const double err = radial_error(res, oracle_r);
        o.require(err <= 0.01, std::string(to_string(mode)) + " rel err " + num(err, 2));
    }
    o.detail += "; oracle " + num(oracle_r, 10);
    return o;
}

Outcome criterion3() {
    Outcome o;
    auto error = [&](double p, int n, std::size_t m) {
        const auto grid = build_grid(make_body(Disk{1.0}, m), make_body(Disk{2.0}, m), n);
        const auto f = solve_potential(OperatorSpec::p_laplace(p), grid);
        const oracle::RadialCase rc{p, 2, 1.0, 2.0};
        double e = 0.0;
        for (std::size_t j = 0; j < m; ++j)
            for (int i = 0; i <= n; ++i)
                e = std::max(e, std::abs(f.at(i, j) - oracle::radial_potential(rc, grid.node(i, j).norm())));
        return e;
    };
    for (double p : {1.5, 2.0, 3.0, 4.0}) {
        const double coarse = error(p, 64, 128);
        const double fine = error(p, 128, 256);
        const double order = std::log2(coarse / fine);
        o.require(fine <= 5e-4 && order >= 1.8, "p=" + num(p) + " err " + num(fine, 2) + " order " + num(order, 3));
    }
    return o;
}

Outcome criterion4() {
    Outcome o;
    const std::vector<std::pair<std::string, StarBody>> bodies{{"ellipse(2,1)", make_body(Ellipse{2.0, 1.0, 0.0}, kAngles)},
                                                               {"rounded square", rounded_square()}};
    std::optional<PotentialField> sample;
    for (const auto& [name, k] : bodies) {
        for (double p : {2.0, 3.0}) {
            const auto res = solve_and_keep(name + " p=" + num(p), problem(k, p), UpdateMode::normal);
            const auto r = check_levelset_convexity(res.field, kDefaultLevels, 1e-6);
            o.require(r.passed, name + " p=" + num(p) + " margin " + num(r.worst_case, 3));
            if (!sample) sample = res.field;
        }
    }
    const auto bad = check_levelset_convexity(corrupt_field(*sample, 11), kDefaultLevels, 1e-6);
    o.require(!bad.passed, "corrupted field margin " + num(bad.worst_case, 3));
    return o;
}

Outcome criterion5() {
    Outcome o;
    for (double p : {2.0, 3.0, 4.0}) {
        const auto grid = build_grid(make_body(Disk{1.0}, kAngles), make_body(Disk{3.0}, kAngles), kLayers);
        const auto r = check_decay_exponent(solve_potential(OperatorSpec::p_laplace(p), grid), 0.05);
        o.require(r.passed, "slope p=" + num(p) + " " + num(r.metadata["mean_slope"].get<double>(), 4));
    }
    double worst_bound = 1e300, worst_dom = 1e300;
    bool bound_ok = true, dom_ok = true;
    for (const auto& c : g_converged) {
        const auto b = check_gradient_bound(c.field, std::numeric_limits<double>::infinity(), 1e-3);
        const auto d = check_inner_outer_domination(c.field, 1e-3);
        bound_ok = bound_ok && b.passed;
        dom_ok = dom_ok && d.passed;
        worst_bound = std::min(worst_bound, b.worst_case);
        worst_dom = std::min(worst_dom, d.worst_case);
    }
    o.require(bound_ok, "1/d0 slack min " + num(worst_bound, 3) + " over " + std::to_string(g_converged.size()) + " rings");
    o.require(dom_ok, "domination margin min " + num(worst_dom, 3));
    return o;
}

Outcome criterion6() {
    Outcome o;
    const std::vector<std::pair<std::string, StarBody>> bodies{{"disk", make_body(Disk{1.0}, kAngles)},
                                                               {"ellipse(1.5,1)", make_body(Ellipse{1.5, 1.0, 0.0}, kAngles)}};
    for (const auto& [name, k] : bodies) {
        for (double p : {2.0, 3.0}) {
            const auto pb = problem(k, p);
            const double circ = k.max_rho();
            const StarBody s3(k.center(), std::vector<double>(kAngles, 3.0 * circ));
            const StarBody s6(k.center(), std::vector<double>(kAngles, 6.0 * circ));
            const auto r = check_uniqueness(pb, {s3, s6}, UpdateMode::normal);
            const std::string what = name + " p=" + num(p);
            if (r.metadata.contains("error")) o.require(false, what + " " + r.metadata["error"].get<std::string>());
            else o.require(r.passed, what + " d/cell " + num(r.metadata["max_hausdorff"].get<double>() / r.metadata["cell"].get<double>(), 3));
            if (r.metadata.contains("runs"))
                for (const auto& run : r.metadata["runs"])
                    g_uniqueness_minima.emplace_back(what + " start " + num(run["start_max_rho"].get<double>()),
                                                     run["interior_gradient_min"].get<double>());
        }
    }
    return o;
}

Outcome criterion7() {
    Outcome o;
    double lowest = 1e300;
    std::string where;
    std::vector<std::pair<std::string, double>> minima = g_uniqueness_minima;
    for (const auto& c : g_converged) minima.emplace_back(c.label, c.report.interior_gradient_min);
    for (const auto& [label, v] : minima) {
        if (v < lowest) {
            lowest = v;
            where = label;
        }
    }
    o.require(lowest >= 0.95, "min interior |grad u| " + num(lowest, 5) + " (" + where + ") over " +
                                  std::to_string(minima.size()) + " solutions, c = 1");
    return o;
}

Outcome criterion8() {
    Outcome o;
    for (double p : {1.5, 2.0, 3.0, 4.0}) {
        const auto op = OperatorSpec::p_laplace(p);
        const double alpha = p_laplace_alpha(p) + 1e-9;
        const auto ok = check_mp(op, alpha, 1000);
        const auto low = check_mp(op, 0.75 * alpha, 1000);
        const bool homog = ok.children.at(1).passed;
        const bool mono = ok.children.at(2).passed;
        o.require(ok.passed && !low.passed && homog && mono, "p=" + num(p));
    }
    return o;
}

Outcome criterion9() {
    Outcome o;
    const double tol_lin = 5e-2;
    for (const auto& c : g_converged) {
        const auto r = linearized_identities(c.field, tol_lin);
        o.require(r.passed, c.label + " " + num(r.worst_case, 3));
    }
    o.detail += "; tol_lin " + num(tol_lin);
    return o;
}

Outcome criterion10() {
    Outcome o;
    const auto& rep = g_radial_trim->report;
    double worst = 1e300;
    bool ok = true;
    for (std::size_t n = 0; n + 1 < rep.records.size(); ++n) {
        worst = std::min(worst, rep.records[n].nesting_margin);
        ok = ok && rep.records[n].nesting_margin >= -grid_epsilon(rep.iterates[n]);
    }
    o.require(ok, std::to_string(rep.records.size()) + " iterates, min nesting margin " + num(worst, 3));
    return o;
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"radial p=2 trim radius and runtime", criterion1},
        {"radial p=3 both modes", criterion2},
        {"concentric potentials accuracy and order", criterion3},
        {"level-set convexity", criterion4},
        {"gradient bounds and decay", criterion5},
        {"uniqueness from two starts", criterion6},
        {"interior gradient bound", criterion7},
        {"operator structure", criterion8},
        {"linearized identities", criterion9},
        {"trim nesting", criterion10},
    };
    int failures = 0;
    for (std::size_t n = 0; n < criteria.size(); ++n) {
        Outcome o;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            o = criteria[n].second();
        } catch (const std::exception& e) {
            o.passed = false;
            o.detail = std::string("error: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (!o.passed) ++failures;
        std::printf("criterion %2zu %s: %s | %s (%.1f s)\n", n + 1, o.passed ? "PASS" : "FAIL", criteria[n].first.c_str(),
                    o.detail.c_str(), secs);
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
