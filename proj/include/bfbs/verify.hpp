#pragma once

#include "bfbs/check_report.hpp"
#include "bfbs/free_boundary.hpp"
#include "bfbs/pde_solver.hpp"

#include <cstdint>
#include <limits>
#include <vector>

namespace bfbs {

inline const std::vector<double> kDefaultLevels{0.1, 0.25, 0.5, 0.75, 0.9};

/// Level sets {u > t} are convex: worst case is the least normalised cross
/// product over all levels.
CheckReport check_levelset_convexity(const PotentialField& field, const std::vector<double>& levels = kDefaultLevels,
                                     double tol = kConvexTol);

/// Inner trace at each K sample dominates the outer trace at the matched
/// point of Omega.
CheckReport check_inner_outer_domination(const PotentialField& field, double tol = 1e-3);

/// Outer trace <= 1/d0 (d0: Euclidean gap between the boundaries) and
/// interior max |grad u| <= m_expected.
CheckReport check_gradient_bound(const PotentialField& field,
                                 double m_expected = std::numeric_limits<double>::infinity(), double tol = 1e-3);

/// Least-squares slope of log|grad u| against log r over the middle half of
/// every ray, compared with (1 - n)/(p - 1), n = 2. Requires concentric disks
/// and the p-Laplacian; throws DomainError otherwise.
CheckReport check_decay_exponent(const PotentialField& field, double tol = 0.05);

/// Runs solve_bernoulli from each start and compares the converged
/// boundaries pairwise against 3 angular cells of the mean outer radius.
CheckReport check_uniqueness(const BernoulliProblem& problem, const std::vector<StarBody>& starts, UpdateMode mode,
                             int max_iter = 200);

/// Solves on (K, Omega) and on both bodies rotated by phi with the
/// conjugated operator, then compares u1(x) with u2(R x) at interior nodes.
/// conjugate_operator = false keeps the unrotated operator (negative control).
CheckReport check_rotation_covariance(const BernoulliProblem& problem, const StarBody& omega, double phi,
                                      double tol_disc = 1e-3, bool conjugate_operator = true);

/// max u / min u over interior disks B(w, r) with B(w, 4r) in the ring; the
/// constant must agree between the two resolutions within tol_rel.
CheckReport check_harnack(const PotentialField& fine, const PotentialField& coarse, double tol_rel = 0.05);

/// r^{p-2} int_{B(w,r)} |grad u|^p / max_{B(w,2r)} u^p, stable between two
/// resolutions within tol_rel.
CheckReport check_caccioppoli(const PotentialField& fine, const PotentialField& coarse, double tol_rel = 0.05);

/// Node-wise lower <= upper + tol on one grid.
CheckReport check_comparison(const PotentialField& lower, const PotentialField& upper, double tol = 1e-8);

/// Node values inside [outer_value, inner_value] up to tol.
CheckReport check_max_principle(const PotentialField& field, double tol = 1e-9);

/// Weak residual over seeded bump functions below tol.
CheckReport check_weak_residual(const PotentialField& field, double tol = 5e-3, int bump_count = 64,
                                std::uint64_t seed = 7);

/// Discrete nonlinear residual below tol.
CheckReport check_discrete_residual(const PotentialField& field, double tol = 1e-6);

/// Adds amplitude * sin(pi s) to u along ray j.
PotentialField corrupt_field(const PotentialField& field, std::size_t j, double amplitude = 0.05);

struct SuiteOptions {
    UpdateMode mode = UpdateMode::normal;
    int max_iter = 200;
    bool inject_corruption = false;
    std::uint64_t seed = 7;
    double rotation_angle = kPi / 7.0;
};

/// Every check on one problem. Failures (including thrown errors) become
/// failed reports; the suite never aborts.
std::vector<CheckReport> run_suite(const BernoulliProblem& problem, const SuiteOptions& options = {});

bool all_passed(const std::vector<CheckReport>& reports);
nlohmann::json to_json(const std::vector<CheckReport>& reports);

}  // namespace bfbs
