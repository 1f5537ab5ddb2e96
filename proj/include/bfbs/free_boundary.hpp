#pragma once

#include "bfbs/geometry.hpp"
#include "bfbs/operator.hpp"
#include "bfbs/pde_solver.hpp"

#include <nlohmann/json.hpp>

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace bfbs {

/// Exterior Bernoulli problem: find convex Omega containing K with the
/// capacitary potential of Omega \ K satisfying |grad u| = c on the boundary of Omega.
struct BernoulliProblem {
    BernoulliProblem(StarBody k_body, OperatorSpec op_spec) : k(std::move(k_body)), op(std::move(op_spec)) {}

    StarBody k;
    OperatorSpec op;
    double c = 1.0;
    int layers = 128;
    double band_final = 0.01;
    double band_interior = 0.05;
    double tau = 0.3;         // normal-motion step
    double kappa = 0.25;      // trim depth factor
    int trim_cuts = 0;        // half-planes removed per trim step, 0: every deficient sample
    int trim_backtracks = 6;  // depth halvings while a trim loses the supersolution class
    SolveOptions solver;

    /// K convex with a positive interior ball, c > 0, operator valid.
    void validate() const;
    /// Minimum clearance between K and every trial body.
    double gap_min() const { return kGapMinFraction * k.max_rho(); }
};

enum class BeurlingClass { subsolution, supersolution, solution, mixed };
enum class UpdateMode { normal, trim };

std::string_view to_string(BeurlingClass cls);
std::string_view to_string(UpdateMode mode);
UpdateMode update_mode_from_string(std::string_view name);

/// Class of an outer trace: supersolution if max g <= c(1+band), subsolution
/// if min g >= c(1-band), solution if both.
BeurlingClass classify_trace(const TraceData& outer, double c, double band);

/// Solves on Omega \ K and classifies the outer trace.
BeurlingClass classify(const BernoulliProblem& problem, const StarBody& omega, double band);

/// Disk about K's center, doubling from 4 times the circumradius until it
/// classifies as a supersolution.
StarBody initial_supersolution(const BernoulliProblem& problem);

/// Level set {u > 1 - t} of the potential on omega1 \ K for the largest
/// t = 2^-k whose rescaled trace |grad u| / t is at least c(1+band).
StarBody initial_subsolution(const BernoulliProblem& problem, const StarBody& omega1);

/// rho <- rho (1 + tau V / max(1, |V|_inf)), V = g/c - 1 smoothed by 1/(1+|k|)
/// per Fourier mode, then convexified. tau is halved while K is not contained.
StarBody update_normal_motion(const BernoulliProblem& problem, const StarBody& omega, const TraceData& trace, double tau);

/// Cuts Omega (the outer body of field's grid) by the supporting half-plane at
/// the point of least outer gradient, moved inward by kappa rho (1 - g/c),
/// then convexifies. The depth is capped by half the gap to K, by half the
/// depth at which the level set through the ray has rescaled gradient c, and
/// so that samples already within the band are not removed.
StarBody update_trim(const BernoulliProblem& problem, const PotentialField& field, const TraceData& trace, double band,
                     double depth_scale = 1.0);

struct IterationRecord {
    int iter = 0;
    double sup_dev = 0.0;          // max g/c - 1
    double inf_dev = 0.0;          // min g/c - 1
    double hausdorff_step = 0.0;   // distance to the next iterate (0 on the last)
    double nesting_margin = 0.0;   // clearance of the next iterate inside this one
    BeurlingClass cls = BeurlingClass::mixed;
    int solver_iters = 0;
    int backtracks = 0;
    double wall_ms = 0.0;
    std::string hash;

    nlohmann::json to_json() const;
};

struct IterationReport {
    std::vector<IterationRecord> records;
    std::vector<StarBody> iterates;
    std::string status = "running";
    int total_solves = 0;
    double interior_gradient_min = 0.0;
    bool interior_bound_ok = false;

    nlohmann::json to_json() const;
    void write_jsonl(std::ostream& os) const;
};

struct BernoulliResult {
    StarBody omega;
    PotentialField field;
    IterationReport report;
};

/// Raised when the iteration fails; carries the partial report.
class FreeBoundaryError : public ConvergenceError {
public:
    FreeBoundaryError(const std::string& what, IterationReport report)
        : ConvergenceError(what), report_(std::move(report)) {}
    const IterationReport& report() const { return report_; }

private:
    IterationReport report_;
};

/// Iterates updates from start (default: initial_supersolution) until
/// |g/c - 1|_inf <= band_final. Throws FreeBoundaryError on max_iter or
/// oscillation (five consecutive growing steps).
BernoulliResult solve_bernoulli(const BernoulliProblem& problem, UpdateMode mode, int max_iter,
                                const std::optional<StarBody>& start = std::nullopt);

/// FNV-1a hash of the radial samples, 16 hex digits.
std::string body_hash(const StarBody& body);

}  // namespace bfbs
