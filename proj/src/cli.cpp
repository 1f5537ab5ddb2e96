#include "bfbs/cli.hpp"

#include "bfbs/oracle.hpp"
#include "bfbs/verify.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>

namespace bfbs {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> tokens(const std::string& s) {
    std::istringstream in(s);
    std::vector<std::string> out;
    for (std::string t; in >> t;) out.push_back(t);
    return out;
}

double to_double(const std::string& t) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(v))
        throw ConfigError("'" + t + "' is not a number");
    return v;
}

std::vector<double> to_doubles(const std::string& s) {
    std::vector<double> out;
    for (const auto& t : tokens(s)) out.push_back(to_double(t));
    return out;
}

long long to_integer(const std::string& t) {
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size()) throw ConfigError("'" + t + "' is not an integer");
    return v;
}

bool to_bool(const std::string& t) {
    if (t == "true" || t == "1") return true;
    if (t == "false" || t == "0") return false;
    throw ConfigError("'" + t + "' is not a boolean");
}

void expect_count(const std::vector<double>& v, std::size_t n, const std::string& what) {
    if (v.size() != n) throw ConfigError(what + " expects " + std::to_string(n) + " numbers");
}

using Setter = std::function<void(RunConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table{
        {"operator.family", [](RunConfig& c, const std::string& v) { c.family = operator_family_from_string(v); }},
        {"operator.p",
         [](RunConfig& c, const std::string& v) {
             c.p = to_double(v);
             if (!(c.p >= kMinExponent && c.p <= kMaxExponent)) throw ConfigError("p out of supported range [1.2, 8]");
         }},
        {"operator.q",
         [](RunConfig& c, const std::string& v) {
             const auto q = to_doubles(v);
             expect_count(q, 4, "operator.q");
             c.q << q[0], q[1], q[2], q[3];
         }},
        {"operator.alpha", [](RunConfig& c, const std::string& v) { c.alpha = to_double(v); }},
        {"operator.lambda", [](RunConfig& c, const std::string& v) { c.lambda = to_double(v); }},
        {"domain.shape",
         [](RunConfig& c, const std::string& v) {
             c.shape = parse_shape(v);
             c.shape_text = v;
         }},
        {"bernoulli.c",
         [](RunConfig& c, const std::string& v) {
             c.c = to_double(v);
             if (!(c.c > 0.0)) throw ConfigError("bernoulli.c must be positive");
         }},
        {"grid.angles",
         [](RunConfig& c, const std::string& v) {
             const long long m = to_integer(v);
             if (m < 64 || m > (1 << 16) || !valid_resolution(static_cast<std::size_t>(m)))
                 throw ConfigError("grid.angles must be a power of two >= 64");
             c.angles = static_cast<int>(m);
         }},
        {"grid.layers",
         [](RunConfig& c, const std::string& v) {
             const long long n = to_integer(v);
             if (n < 32 || n > 4096) throw ConfigError("grid.layers must lie in [32, 4096]");
             c.layers = static_cast<int>(n);
         }},
        {"fb.mode", [](RunConfig& c, const std::string& v) { c.mode = update_mode_from_string(v); }},
        {"fb.max_iter",
         [](RunConfig& c, const std::string& v) {
             const long long n = to_integer(v);
             if (n < 1 || n > 100000) throw ConfigError("fb.max_iter must lie in [1, 100000]");
             c.max_iter = static_cast<int>(n);
         }},
        {"fb.band",
         [](RunConfig& c, const std::string& v) {
             c.band = to_double(v);
             if (!(c.band > 0.0 && c.band < 1.0)) throw ConfigError("fb.band must lie in (0, 1)");
         }},
        {"solver.tol",
         [](RunConfig& c, const std::string& v) {
             c.tol = to_double(v);
             if (!(c.tol > 0.0 && c.tol < 1.0)) throw ConfigError("solver.tol must lie in (0, 1)");
         }},
        {"output.dir",
         [](RunConfig& c, const std::string& v) {
             if (v.empty()) throw ConfigError("output.dir is empty");
             c.output_dir = v;
         }},
        {"output.timings", [](RunConfig& c, const std::string& v) { c.timings = to_bool(v); }},
        {"seed",
         [](RunConfig& c, const std::string& v) {
             const long long s = to_integer(v);
             if (s < 0) throw ConfigError("seed must be non-negative");
             c.seed = static_cast<std::uint64_t>(s);
         }},
        {"sweep.p",
         [](RunConfig& c, const std::string& v) {
             c.sweep_p = to_doubles(v);
             if (c.sweep_p.empty()) throw ConfigError("sweep.p is empty");
             for (double p : c.sweep_p)
                 if (!(p >= kMinExponent && p <= kMaxExponent)) throw ConfigError("p out of supported range [1.2, 8]");
         }},
        {"sweep.c",
         [](RunConfig& c, const std::string& v) {
             c.sweep_c = to_doubles(v);
             if (c.sweep_c.empty()) throw ConfigError("sweep.c is empty");
             for (double x : c.sweep_c)
                 if (!(x > 0.0)) throw ConfigError("sweep.c values must be positive");
         }},
        {"verify.corrupt", [](RunConfig& c, const std::string& v) { c.verify_corrupt = to_bool(v); }},
    };
    return table;
}

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(12) << v;
    return os.str();
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    std::ofstream os(path);
    os << j.dump(2) << '\n';
}

template <typename Fn>
void write_file(const std::filesystem::path& path, Fn&& fn) {
    std::ofstream os(path);
    if (!os) throw DomainError("cannot write " + path.string());
    fn(os);
}

nlohmann::json error_json(const std::string& type, const std::string& message) {
    return {{"type", type}, {"message", message}};
}

}  // namespace

ShapeSpec parse_shape(const std::string& text) {
    const auto t = tokens(text);
    if (t.empty()) throw ConfigError("domain.shape is empty");
    std::vector<double> v;
    for (std::size_t k = 1; k < t.size(); ++k) v.push_back(to_double(t[k]));
    if (t[0] == "disk") {
        expect_count(v, 1, "disk");
        if (!(v[0] > 0.0)) throw ConfigError("disk radius must be positive");
        return Disk{v[0]};
    }
    if (t[0] == "ellipse") {
        expect_count(v, 3, "ellipse");
        if (!(v[0] > 0.0 && v[1] > 0.0)) throw ConfigError("ellipse semi-axes must be positive");
        return Ellipse{v[0], v[1], v[2]};
    }
    if (t[0] == "rounded_polygon") {
        if (v.size() < 7 || v.size() % 2 == 0)
            throw ConfigError("rounded_polygon expects a corner radius followed by at least 3 vertex pairs");
        if (!(v[0] > 0.0))
            throw ConfigError("rounded_polygon corner_radius must be > 0: sharp corners violate the interior ball condition");
        RoundedPolygon poly;
        poly.corner_radius = v[0];
        for (std::size_t k = 1; k + 1 < v.size(); k += 2) poly.vertices.emplace_back(v[k], v[k + 1]);
        return poly;
    }
    throw ConfigError("unknown shape '" + t[0] + "' (expected disk, ellipse or rounded_polygon)");
}

OperatorSpec RunConfig::make_operator(double p_override) const {
    const double pp = p_override > 0.0 ? p_override : p;
    OperatorSpec op = family == OperatorFamily::p_laplace ? OperatorSpec::p_laplace(pp) : OperatorSpec::quadratic_form(pp, q);
    if (alpha) op.alpha = *alpha;
    if (lambda) op.lambda_cap = *lambda;
    op.validate();
    return op;
}

BernoulliProblem RunConfig::make_problem() const {
    BernoulliProblem problem{make_body(shape, static_cast<std::size_t>(angles)), make_operator()};
    problem.c = c;
    problem.layers = layers;
    problem.band_final = band;
    problem.band_interior = std::max(problem.band_interior, band);
    problem.solver.tol = tol;
    problem.validate();
    return problem;
}

nlohmann::json RunConfig::to_json() const {
    nlohmann::json j;
    j["operator.family"] = std::string(to_string(family));
    j["operator.p"] = p;
    j["operator.q"] = {q(0, 0), q(0, 1), q(1, 0), q(1, 1)};
    j["operator.alpha"] = alpha ? nlohmann::json(*alpha) : nlohmann::json(nullptr);
    j["operator.lambda"] = lambda ? nlohmann::json(*lambda) : nlohmann::json(nullptr);
    j["domain.shape"] = shape_text;
    j["bernoulli.c"] = c;
    j["grid.angles"] = angles;
    j["grid.layers"] = layers;
    j["fb.mode"] = std::string(to_string(mode));
    j["fb.max_iter"] = max_iter;
    j["fb.band"] = band;
    j["solver.tol"] = tol;
    j["seed"] = seed;
    return j;
}

RunConfig parse_config(std::istream& in, const std::string& source) {
    RunConfig cfg;
    std::map<std::string, int> seen;
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::string where = source + ":" + std::to_string(number) + ": ";
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(where + "malformed line, expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty()) throw ConfigError(where + "malformed line, expected 'key = value'");
        const auto it = setters().find(key);
        if (it == setters().end()) throw ConfigError(where + "unknown key '" + key + "'");
        if (seen.count(key)) throw ConfigError(where + "repeated key '" + key + "'");
        seen[key] = number;
        try {
            it->second(cfg, value);
        } catch (const ConfigError& e) {
            throw ConfigError(where + key + ": " + e.what());
        } catch (const DomainError& e) {
            throw ConfigError(where + key + ": " + e.what());
        }
    }
    if (cfg.family == OperatorFamily::p_laplace && seen.count("operator.q"))
        throw ConfigError(source + ":" + std::to_string(seen["operator.q"]) + ": operator.q applies to quadratic_form only");
    try {
        cfg.make_problem();
    } catch (const DomainError& e) {
        throw ConfigError(source + ": " + e.what());
    }
    return cfg;
}

RunConfig parse_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    return parse_config(in, path.string());
}

std::filesystem::path output_directory(const RunConfig& config) {
    if (const char* env = std::getenv("BFBS_OUTPUT_DIR"); env && *env) return env;
    return config.output_dir;
}

nlohmann::json strip_timings(nlohmann::json j) {
    if (j.is_object()) {
        j.erase("wall_ms");
        for (auto& [k, v] : j.items()) v = strip_timings(v);
    } else if (j.is_array()) {
        for (auto& v : j) v = strip_timings(v);
    }
    return j;
}

nlohmann::json boundary_smoothness(const StarBody& body) {
    const auto pts = body.points();
    const std::size_t m = pts.size();
    std::vector<double> kappa(m);
    for (std::size_t j = 0; j < m; ++j) {
        const Vec2 e0 = pts[j] - pts[(j + m - 1) % m];
        const Vec2 e1 = pts[(j + 1) % m] - pts[j];
        const double turn = std::atan2(cross(e0, e1), e0.dot(e1));
        kappa[j] = turn / (0.5 * (e0.norm() + e1.norm()));
    }
    double max_jump = 0.0, total = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        const double d = std::abs(kappa[(j + 1) % m] - kappa[j]);
        max_jump = std::max(max_jump, d);
        total += d;
    }
    const auto [lo, hi] = std::minmax_element(kappa.begin(), kappa.end());
    return {{"curvature_min", *lo}, {"curvature_max", *hi}, {"curvature_max_jump", max_jump}, {"curvature_variation", total}};
}

void write_figure_svg(std::ostream& os, const PotentialField& field, const std::vector<double>& levels) {
    const StarBody& omega = field.grid.outer();
    double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
    for (const Vec2& p : omega.points()) {
        x0 = std::min(x0, p.x());
        x1 = std::max(x1, p.x());
        y0 = std::min(y0, p.y());
        y1 = std::max(y1, p.y());
    }
    const double pad = 0.05 * std::max(x1 - x0, y1 - y0);
    x0 -= pad, x1 += pad, y0 -= pad, y1 += pad;
    const double size = 600.0;
    const double scale = size / std::max(x1 - x0, y1 - y0);
    const double width = scale * (x1 - x0), height = scale * (y1 - y0);

    auto curve = [&](const StarBody& body, const std::string& stroke, const std::string& label, double w) {
        os << "  <polygon class=\"" << label << "\" fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"" << w
           << "\" points=\"";
        for (const Vec2& p : body.points())
            os << std::fixed << std::setprecision(3) << scale * (p.x() - x0) << ',' << scale * (y1 - p.y()) << ' ';
        os << std::defaultfloat << "\"/>\n";
    };

    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << std::lround(width) << "\" height=\""
       << std::lround(height) << "\" viewBox=\"0 0 " << fmt(width) << ' ' << fmt(height) << "\">\n";
    os << "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    curve(field.grid.inner(), "#1f4e79", "K", 2.0);
    curve(omega, "#b22222", "Omega", 2.0);
    for (double t : levels) {
        try {
            curve(level_set(field, t), "#7f7f7f", "level-" + fmt(t), 1.0);
        } catch (const std::exception& e) {
            os << "  <!-- level " << fmt(t) << " skipped: " << e.what() << " -->\n";
        }
    }
    os << "</svg>\n";
}

int run_solve(const RunConfig& config, std::ostream& log) {
    const auto dir = output_directory(config);
    std::filesystem::create_directories(dir);
    auto finish = [&](nlohmann::json j) { write_json(dir / "report.json", config.timings ? j : strip_timings(j)); };
    auto write_iterations = [&](const IterationReport& rep) {
        write_file(dir / "iterations.jsonl", [&](std::ostream& os) {
            for (const auto& r : rep.records) os << (config.timings ? r.to_json() : strip_timings(r.to_json())).dump() << '\n';
        });
    };

    nlohmann::json report;
    report["config"] = config.to_json();
    try {
        const BernoulliProblem problem = config.make_problem();
        const BernoulliResult res = solve_bernoulli(problem, config.mode, config.max_iter);
        write_file(dir / "boundary.csv", [&](std::ostream& os) { write_boundary_csv(os, res.omega); });
        write_file(dir / "field.csv", [&](std::ostream& os) { write_field_csv(os, res.field); });
        write_file(dir / "figure.svg", [&](std::ostream& os) { write_figure_svg(os, res.field, {0.25, 0.5, 0.75}); });
        write_iterations(res.report);
        report["status"] = "converged";
        report["error"] = nullptr;
        report["iteration_report"] = res.report.to_json();
        report["solve_meta"] = res.field.meta.to_json();
        report["outer_radius"] = {{"min", res.omega.min_rho()}, {"max", res.omega.max_rho()}, {"mean", res.omega.mean_rho()}};
        report["boundary_hash"] = body_hash(res.omega);
        report["boundary_smoothness"] = boundary_smoothness(res.omega);
        finish(report);
        log << "converged in " << res.report.records.size() << " iterations, outer radius in [" << fmt(res.omega.min_rho())
            << ", " << fmt(res.omega.max_rho()) << "], artifacts in " << dir.string() << '\n';
        return kExitOk;
    } catch (const FreeBoundaryError& e) {
        write_iterations(e.report());
        report["status"] = "failed";
        report["error"] = error_json("convergence", e.what());
        report["iteration_report"] = e.report().to_json();
        finish(report);
        log << "error: " << e.what() << '\n';
    } catch (const ConvergenceError& e) {
        report["status"] = "failed";
        report["error"] = error_json("convergence", e.what());
        finish(report);
        log << "error: " << e.what() << '\n';
    } catch (const DomainError& e) {
        report["status"] = "failed";
        report["error"] = error_json("domain", e.what());
        finish(report);
        log << "error: " << e.what() << '\n';
    }
    return kExitFailure;
}

int run_verify(const RunConfig& config, std::ostream& out) {
    const auto dir = output_directory(config);
    std::filesystem::create_directories(dir);
    SuiteOptions options;
    options.mode = config.mode;
    options.max_iter = config.max_iter;
    options.inject_corruption = config.verify_corrupt;
    options.seed = config.seed;
    const auto reports = run_suite(config.make_problem(), options);
    const auto j = to_json(reports);
    write_json(dir / "verify.json", j);
    out << j.dump(2) << '\n';
    return all_passed(reports) ? kExitOk : kExitFailure;
}

int run_oracle(double p, int n, double a, double c, std::ostream& out) {
    const auto root = oracle::bernoulli_radius(p, n, a, c);
    out << nlohmann::json{{"R", root.radius}, {"residual", root.residual}}.dump() << '\n';
    return kExitOk;
}

int run_sweep(const RunConfig& config, std::ostream& log) {
    const auto dir = output_directory(config);
    std::filesystem::create_directories(dir);
    const auto* disk = std::get_if<Disk>(&config.shape);
    std::ofstream csv(dir / "sweep.csv");
    csv << "p,c,R_numeric,R_oracle,hausdorff_to_oracle,status\n";
    int failures = 0;
    for (double p : config.sweep_p) {
        for (double c : config.sweep_c) {
            RunConfig cell = config;
            cell.p = p;
            cell.c = c;
            std::string r_num, r_orc, haus, status = "converged";
            try {
                const auto res = solve_bernoulli(cell.make_problem(), cell.mode, cell.max_iter);
                r_num = fmt(res.omega.mean_rho());
                if (disk) {
                    const double big_r = oracle::bernoulli_radius(p, 2, disk->r, c).radius;
                    r_orc = fmt(big_r);
                    const StarBody ref(res.omega.center(), std::vector<double>(res.omega.size(), big_r));
                    haus = fmt(hausdorff_distance(res.omega, ref));
                }
            } catch (const std::exception& e) {
                status = "failed";
                ++failures;
                log << "p=" << fmt(p) << " c=" << fmt(c) << ": " << e.what() << '\n';
            }
            csv << fmt(p) << ',' << fmt(c) << ',' << r_num << ',' << r_orc << ',' << haus << ',' << status << '\n';
            log << "p=" << fmt(p) << " c=" << fmt(c) << " R=" << (r_num.empty() ? "-" : r_num)
                << (r_orc.empty() ? "" : " oracle=" + r_orc) << '\n';
        }
    }
    return failures == 0 ? kExitOk : kExitFailure;
}

}  // namespace bfbs
