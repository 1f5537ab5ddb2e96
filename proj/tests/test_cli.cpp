#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "bfbs/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace bfbs;
namespace fs = std::filesystem;

namespace {

RunConfig parse(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in, "cfg");
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

std::size_t count(const std::string& hay, const std::string& needle) {
    std::size_t n = 0;
    for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) ++n;
    return n;
}

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("bfbs_test_cli_" + name);
    fs::remove_all(dir);
    return dir;
}

}  // namespace

TEST_CASE("defaults from a minimal file") {
    const auto c = parse("operator.p = 2\nbernoulli.c = 1\ndomain.shape = disk 1\n");
    CHECK(c.angles == 256);
    CHECK(c.layers == 128);
    CHECK(c.mode == UpdateMode::normal);
    CHECK(c.max_iter == 200);
    CHECK(c.band == doctest::Approx(0.01));
    CHECK(c.seed == 7u);
    CHECK(std::holds_alternative<Disk>(c.shape));
}

TEST_CASE("comments, spacing and every shape") {
    const auto c = parse("# header\n  operator.p=3   # trailing\n\ndomain.shape = ellipse 1.5 1 0.2\nfb.mode = trim\n");
    CHECK(c.p == 3.0);
    CHECK(c.mode == UpdateMode::trim);
    CHECK(std::get<Ellipse>(c.shape).b == 1.0);
    const auto r = parse("domain.shape = rounded_polygon 0.25 -1 -1 1 -1 1 1 -1 1\n");
    CHECK(std::get<RoundedPolygon>(r.shape).vertices.size() == 4);
    const auto q = parse("operator.family = quadratic_form\noperator.q = 1 0 0 2\n");
    CHECK(q.make_operator().q(1, 1) == 2.0);
}

TEST_CASE("config errors name the line") {
    CHECK_THROWS_WITH_AS(parse("operator.p = 0.9\n"), doctest::Contains("p out of supported range"), ConfigError);
    CHECK_THROWS_WITH_AS(parse("seed = 1\nfoo.bar = 1\n"), doctest::Contains("cfg:2: unknown key"), ConfigError);
    CHECK_THROWS_WITH_AS(parse("operator.p 2\n"), doctest::Contains("cfg:1: malformed"), ConfigError);
    CHECK_THROWS_WITH_AS(parse("seed = 1\nseed = 2\n"), doctest::Contains("repeated"), ConfigError);
    CHECK_THROWS_WITH_AS(parse("domain.shape = rounded_polygon 0 -1 -1 1 -1 1 1 -1 1\n"),
                         doctest::Contains("interior ball condition"), ConfigError);
    CHECK_THROWS_AS(parse("grid.angles = 100\n"), ConfigError);
    CHECK_THROWS_AS(parse("bernoulli.c = -1\n"), ConfigError);
    CHECK_THROWS_AS(parse("operator.p = two\n"), ConfigError);
    CHECK_THROWS_AS(parse("fb.mode = sideways\n"), ConfigError);
    CHECK_THROWS_AS(parse("operator.q = 1 0 0 2\n"), ConfigError);
    CHECK_THROWS_AS(parse("operator.family = quadratic_form\noperator.q = 1 2 2 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_file("/nonexistent/bfbs.cfg"), ConfigError);
}

TEST_CASE("output directory override") {
    auto c = parse("output.dir = here\n");
    ::unsetenv("BFBS_OUTPUT_DIR");
    CHECK(output_directory(c) == fs::path("here"));
    ::setenv("BFBS_OUTPUT_DIR", "/tmp/elsewhere", 1);
    CHECK(output_directory(c) == fs::path("/tmp/elsewhere"));
    ::unsetenv("BFBS_OUTPUT_DIR");
}

TEST_CASE("timing fields are stripped recursively") {
    const nlohmann::json j = {{"wall_ms", 3}, {"a", {{"wall_ms", 1}, {"b", 2}}}, {"list", {{{"wall_ms", 5}}}}};
    const auto s = strip_timings(j);
    CHECK_FALSE(s.contains("wall_ms"));
    CHECK_FALSE(s["a"].contains("wall_ms"));
    CHECK(s["a"]["b"] == 2);
    CHECK(s["list"][0].empty());
}

TEST_CASE("oracle subcommand output") {
    std::ostringstream os;
    CHECK(run_oracle(2.0, 2, 1.0, 1.0, os) == kExitOk);
    const auto j = nlohmann::json::parse(os.str());
    CHECK(j["R"].get<double>() == doctest::Approx(1.763222834).epsilon(1e-9));
    CHECK(j["residual"].get<double>() < 1e-10);
}

TEST_CASE("solve writes every artifact and is repeatable") {
    auto c = parse("domain.shape = disk 1\n");
    c.output_dir = scratch("solve").string();
    std::ostringstream log;
    REQUIRE(run_solve(c, log) == kExitOk);
    const fs::path dir = c.output_dir;
    for (const char* f : {"boundary.csv", "field.csv", "report.json", "iterations.jsonl", "figure.svg"})
        CHECK(fs::exists(dir / f));

    std::ifstream csv(dir / "boundary.csv");
    std::string line;
    std::getline(csv, line);
    int rows = 0;
    while (std::getline(csv, line)) {
        ++rows;
        const double rho = std::stod(line.substr(line.find(',', line.find(',') + 1) + 1));
        CHECK(rho == doctest::Approx(1.763222834).epsilon(0.01));
    }
    CHECK(rows == 256);

    const auto report = nlohmann::json::parse(slurp(dir / "report.json"));
    CHECK(report["status"] == "converged");
    CHECK(report["error"].is_null());
    CHECK(report.contains("boundary_smoothness"));

    const std::string svg = slurp(dir / "figure.svg");
    CHECK(count(svg, "<polygon") == 5);  // K, Omega and three level sets

    const std::string first = slurp(dir / "report.json") + slurp(dir / "field.csv") + slurp(dir / "iterations.jsonl");
    REQUIRE(run_solve(c, log) == kExitOk);
    CHECK(first == slurp(dir / "report.json") + slurp(dir / "field.csv") + slurp(dir / "iterations.jsonl"));
}

TEST_CASE("failed solve still writes report.json") {
    auto c = parse("domain.shape = ellipse 1.5 1 0\nfb.max_iter = 1\n");
    c.output_dir = scratch("fail").string();
    std::ostringstream log;
    CHECK(run_solve(c, log) == kExitFailure);
    const auto report = nlohmann::json::parse(slurp(fs::path(c.output_dir) / "report.json"));
    CHECK(report["status"] == "failed");
    CHECK(report["error"]["type"] == "convergence");
    CHECK(report["iteration_report"]["iterations"].size() == 2);
}

TEST_CASE("sweep rows") {
    auto c = parse("domain.shape = disk 1\nsweep.p = 2 3\nsweep.c = 1 2\n");
    c.output_dir = scratch("sweep").string();
    std::ostringstream log;
    REQUIRE(run_sweep(c, log) == kExitOk);
    std::ifstream in(fs::path(c.output_dir) / "sweep.csv");
    std::string line;
    std::getline(in, line);
    CHECK(line == "p,c,R_numeric,R_oracle,hausdorff_to_oracle,status");
    int rows = 0;
    while (std::getline(in, line)) {
        ++rows;
        std::istringstream ls(line);
        std::vector<std::string> cells;
        for (std::string cell; std::getline(ls, cell, ',');) cells.push_back(cell);
        REQUIRE(cells.size() == 6);
        CHECK(cells[5] == "converged");
        CHECK(std::stod(cells[2]) == doctest::Approx(std::stod(cells[3])).epsilon(0.01));
    }
    CHECK(rows == 4);
}
