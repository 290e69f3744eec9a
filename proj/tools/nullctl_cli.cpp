#include "nullctl/runner.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <map>

int main(int argc, char** argv) {
    CLI::App app{"Null control solver and Carleman audit runner"};
    app.require_subcommand(1);

    std::string config_path;
    std::string output;
    const std::map<std::string, std::string> about{
        {"weights-audit", "sample the Carleman weights and check their properties"},
        {"solve", "forward and adjoint trajectories from the initial datum"},
        {"carleman-audit", "weighted integrals of a Carleman inequality over the (s, lambda) sweep"},
        {"hum", "penalized HUM control at the configured epsilon"},
        {"sweep", "HUM over the epsilon list"},
        {"semilinear", "fixed-point null control of the semilinear problem"},
    };
    for (const auto& name : nullctl::subcommands()) {
        auto* sub = app.add_subcommand(name, about.at(name));
        sub->add_option("config", config_path, "experiment config (JSON)")->required();
        sub->add_option("-o,--output", output, "run directory, overrides the config");
    }
    std::string run_dir;
    auto* man = app.add_subcommand("manifest", "print the manifest of a completed run");
    man->add_option("run_dir", run_dir)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : nullctl::ExitConfigParse;
    }

    if (man->parsed()) {
        try {
            std::cout << nullctl::manifest(run_dir).dump(2) << '\n';
            return nullctl::ExitOk;
        } catch (const nullctl::Error& e) {
            std::cerr << nullctl::to_string(e.kind()) << ": " << e.what() << '\n';
            return nullctl::ExitValidation;
        }
    }

    nullctl::RunOptions opts;
    if (!output.empty()) opts.output = output;
    const std::string sub = app.get_subcommands().front()->get_name();
    return nullctl::run(sub, config_path, std::cerr, opts);
}
