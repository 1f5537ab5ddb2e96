#include "bfbs/cli.hpp"
#include "bfbs/types.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"Exterior Bernoulli free-boundary solver for A-harmonic operators"};
    app.require_subcommand(1);

    std::string config_path;
    auto* solve = app.add_subcommand("solve", "Solve and write boundary, field, report and figure");
    solve->add_option("config", config_path, "key = value configuration file")->required();
    auto* verify = app.add_subcommand("verify", "Run the property-check suite");
    verify->add_option("config", config_path, "key = value configuration file")->required();
    auto* sweep = app.add_subcommand("sweep", "Solve over the sweep.p x sweep.c grid");
    sweep->add_option("config", config_path, "key = value configuration file")->required();

    double p = 0.0, a = 0.0, c = 0.0;
    int n = 0;
    auto* oracle = app.add_subcommand("oracle", "Radial Bernoulli radius by bisection");
    oracle->add_option("p", p)->required();
    oracle->add_option("n", n)->required();
    oracle->add_option("a", a)->required();
    oracle->add_option("c", c)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : bfbs::kExitConfig;
    }

    try {
        if (*oracle) return bfbs::run_oracle(p, n, a, c, std::cout);
        const bfbs::RunConfig config = bfbs::parse_config_file(config_path);
        if (*solve) return bfbs::run_solve(config, std::cerr);
        if (*verify) return bfbs::run_verify(config, std::cout);
        return bfbs::run_sweep(config, std::cerr);
    } catch (const bfbs::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return bfbs::kExitConfig;
    } catch (const bfbs::DomainError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return *oracle ? bfbs::kExitConfig : bfbs::kExitFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return bfbs::kExitFailure;
    }
}
