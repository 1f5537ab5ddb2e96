#pragma once

#include "bfbs/free_boundary.hpp"
#include "bfbs/geometry.hpp"
#include "bfbs/operator.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace bfbs {

/// Malformed, unknown or out-of-range configuration. Maps to exit status 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;

/// Flat `key = value` configuration. Every key is optional:
///
///   operator.family  p_laplace | quadratic_form          (p_laplace)
///   operator.p       exponent in [1.2, 8]                (2)
///   operator.q       four decimals, row-major             (1 0 0 1)
///   operator.alpha   ellipticity constant                 (sharp value for the family)
///   operator.lambda  Jacobian continuity constant         (family default)
///   domain.shape     disk r | ellipse a b phi |
///                    rounded_polygon radius x1 y1 x2 y2 ... (disk 1)
///   bernoulli.c      Bernoulli constant                   (1)
///   grid.angles      M, power of two >= 64                (256)
///   grid.layers      N >= 32                              (128)
///   fb.mode          normal | trim                        (normal)
///   fb.max_iter      iteration budget                     (200)
///   fb.band          final band on |g/c - 1|              (0.01)
///   solver.tol       Picard increment tolerance           (1e-8)
///   output.dir       artifact directory                   (out)
///   output.timings   keep wall-clock fields in artifacts  (false)
///   seed             sampling seed for verify             (7)
///   sweep.p          exponents for sweep                  (1.5 2 3)
///   sweep.c          Bernoulli constants for sweep        (0.5 1 2)
///   verify.corrupt   inject a corrupted field             (false)
struct RunConfig {
    OperatorFamily family = OperatorFamily::p_laplace;
    double p = 2.0;
    Mat2 q = Mat2::Identity();
    std::optional<double> alpha;
    std::optional<double> lambda;
    std::string shape_text = "disk 1";
    ShapeSpec shape = Disk{1.0};
    double c = 1.0;
    int angles = 256;
    int layers = 128;
    UpdateMode mode = UpdateMode::normal;
    int max_iter = 200;
    double band = 0.01;
    double tol = 1e-8;
    std::string output_dir = "out";
    bool timings = false;
    std::uint64_t seed = 7;
    std::vector<double> sweep_p{1.5, 2.0, 3.0};
    std::vector<double> sweep_c{0.5, 1.0, 2.0};
    bool verify_corrupt = false;

    OperatorSpec make_operator(double p_override = 0.0) const;
    BernoulliProblem make_problem() const;
    nlohmann::json to_json() const;
};

/// Throws ConfigError naming the line for malformed lines, unknown or
/// repeated keys, and out-of-range values. The problem is fully validated.
RunConfig parse_config(std::istream& in, const std::string& source = "<config>");
RunConfig parse_config_file(const std::filesystem::path& path);

/// `disk r`, `ellipse a b phi`, `rounded_polygon radius x1 y1 ...`.
ShapeSpec parse_shape(const std::string& text);

/// output.dir, overridden by the BFBS_OUTPUT_DIR environment variable.
std::filesystem::path output_directory(const RunConfig& config);

/// Solve and write boundary.csv, field.csv, report.json, iterations.jsonl and
/// figure.svg. report.json is written on failure as well.
int run_solve(const RunConfig& config, std::ostream& log);

/// Runs the check suite; prints and writes verify.json.
int run_verify(const RunConfig& config, std::ostream& out);

/// Prints {"R": ..., "residual": ...}.
int run_oracle(double p, int n, double a, double c, std::ostream& out);

/// One Bernoulli solve per (p, c) cell, written to sweep.csv.
int run_sweep(const RunConfig& config, std::ostream& log);

/// SVG with K, Omega and the given level sets of the field.
void write_figure_svg(std::ostream& os, const PotentialField& field, const std::vector<double>& levels);

/// Max and total variation of the discrete curvature along the boundary.
nlohmann::json boundary_smoothness(const StarBody& body);

/// Drops every "wall_ms" member, recursively.
nlohmann::json strip_timings(nlohmann::json j);

}  // namespace bfbs
