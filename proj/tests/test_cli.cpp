#include "nullctl/hum.hpp"
#include "nullctl/runner.hpp"

#include <doctest.h>

#include <sys/wait.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace nullctl;
namespace fs = std::filesystem;

namespace {

const char* kSmall = R"({
  "domain": {"dim": 1, "extent": [1.0], "control": {"lo": [0.3], "hi": [0.7]}, "inner": {"lo": [0.4], "hi": [0.6]}},
  "grid": {"nodes": [16], "steps": 100, "T": 0.5},
  "initial": {"kind": "sine", "amplitude": 1.0, "mode": [1]},
  "weights": {"lambda": [1, 2], "s0": [1, 2]},
  "hum": {"epsilon": 1e-4, "epsilon_list": [1e-2, 1e-3, 1e-4, 1e-5, 1e-6]},
  "nonlinearity": {"name": "sine", "a": 0.1, "b": 1.0},
  "seed": 3
})";

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("nullctl_test_cli_" + std::to_string(::getpid())) / name;
    fs::remove_all(p);
    fs::create_directories(p.parent_path());
    return p;
}

fs::path write_config(const std::string& name, const std::string& text) {
    const fs::path p = scratch(name);
    std::ofstream(p) << text;
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

int cli(const std::string& args) {
    const std::string cmd = std::string(NULLCTL_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

ExperimentConfig small(const fs::path& out, std::uint64_t seed = 3) {
    ExperimentConfig c = parse_config_text(kSmall);
    c.output = out.string();
    c.seed = seed;
    return c;
}

}  // namespace

TEST_CASE("config round trip and validation") {
    const ExperimentConfig c = parse_config_text(kSmall);
    CHECK(parse_config(to_json(c)) == c);
    CHECK(c.grids().space.size() == 16);
    CHECK(c.s_values().size() == 2);

    const ExperimentConfig bench = load_config(std::string(NULLCTL_SOURCE_DIR) + "/configs/benchmark_1d.json");
    CHECK(bench.grids().time.T == 0.5);
    CHECK(parse_config(to_json(bench)) == bench);

    try {
        parse_config_text(R"({"grid": {"nodes": [16], "stepz": 10}})");
        FAIL("expected a parse error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ConfigParse);
    }
    try {
        parse_config_text("{not json");
        FAIL("expected a parse error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ConfigParse);
    }
    ExperimentConfig bad = c;
    bad.epsilon = -1;
    try {
        bad.validate();
        FAIL("expected a validation error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Validation);
    }
}

TEST_CASE("exit codes of the command line tool") {
    const fs::path out = scratch("exit_codes_run");
    const fs::path good = write_config("good.json", kSmall);
    CHECK(cli("weights-audit " + good.string() + " -o " + out.string()) == 0);
    CHECK(fs::exists(out / "weights_summary.json"));
    CHECK(fs::exists(out / "config.json"));
    CHECK(cli("manifest " + out.string()) == 0);

    const fs::path broken = write_config("broken.json", "{\"grid\": ");
    CHECK(cli("hum " + broken.string()) == ExitConfigParse);
    CHECK(cli("frobnicate " + good.string()) == ExitConfigParse);
    CHECK(cli("hum " + (fs::path(NULLCTL_SOURCE_DIR) / "configs/bad_region.json").string() + " -o " +
              scratch("bad_region_run").string()) == ExitValidation);
    CHECK(cli("manifest " + scratch("never_ran").string()) == ExitValidation);

    CHECK(exit_code(ErrorKind::ConfigParse) == ExitConfigParse);
    CHECK(exit_code(ErrorKind::InvalidRegion) == ExitValidation);
    CHECK(exit_code(ErrorKind::Instability) == ExitSolver);
}

TEST_CASE("sweep subcommand matches the library sweep") {
    const fs::path out = scratch("sweep_run");
    const ExperimentConfig c = small(out);
    std::ostringstream log;
    REQUIRE(run("sweep", c, log) == ExitOk);

    std::istringstream csv(slurp(out / "sweep.csv"));
    std::string line;
    std::getline(csv, line);
    CHECK(line == "epsilon,terminal_norm,control_norm,cost,cg_iters,bound_quotient");
    int rows = 0;
    while (std::getline(csv, line)) ++rows;
    CHECK(rows == 5);

    const auto summary = nlohmann::json::parse(slurp(out / "sweep_summary.json"));
    const SweepReport rep = epsilon_sweep(c.hum_config(), c.initial.sample(c.grids().space, c.seed), Mat{},
                                          c.epsilon_list);
    CHECK(summary["fitted_exponent"].get<double>() == doctest::Approx(rep.fitted_exponent).epsilon(1e-12));

    const auto m = manifest(out.string());
    CHECK(m["subcommand"] == "sweep");
    CHECK(m["exit_status"] == 0);
    CHECK(m["seed"] == 3);
    std::vector<std::string> names;
    for (const auto& a : m["artifacts"]) names.push_back(a["name"]);
    CHECK(std::is_sorted(names.begin(), names.end()));
    for (const auto& a : m["artifacts"]) {
        const std::string name = a["name"];
        if (name == "manifest.json") continue;
        CHECK(a["fnv1a"] == hex64(fnv1a(slurp(out / name))));
    }
}

TEST_CASE("every subcommand runs on the small config") {
    for (const auto& sub : subcommands()) {
        CAPTURE(sub);
        const fs::path out = scratch("all_" + sub);
        std::ostringstream log;
        CHECK(run(sub, small(out), log) == ExitOk);
        CHECK(fs::exists(out / "manifest.json"));
        CHECK_FALSE(fs::exists(out / "diagnostic.json"));
    }
}

TEST_CASE("runs are deterministic") {
    for (const std::string sub : {"weights-audit", "sweep", "semilinear", "carleman-audit"}) {
        CAPTURE(sub);
        const fs::path a = scratch("det_a_" + sub), b = scratch("det_b_" + sub), c = scratch("det_c_" + sub);
        std::ostringstream log;
        REQUIRE(run(sub, small(a), log) == ExitOk);
        REQUIRE(run(sub, small(b), log) == ExitOk);
        REQUIRE(run(sub, small(c, 99), log) == ExitOk);
        int csvs = 0;
        for (const auto& entry : fs::directory_iterator(a)) {
            if (entry.path().extension() != ".csv") continue;
            ++csvs;
            const std::string name = entry.path().filename().string();
            CAPTURE(name);
            CHECK(slurp(a / name) == slurp(b / name));
            // the sine datum ignores the seed
            CHECK(slurp(a / name) == slurp(c / name));
        }
        CHECK(csvs > 0);
        CHECK(manifest(a.string())["seed"] != manifest(c.string())["seed"]);
    }
}

TEST_CASE("FNV-1a reference values") {
    CHECK(hex64(fnv1a("")) == "cbf29ce484222325");
    CHECK(hex64(fnv1a("a")) == "af63dc4c8601ec8c");
    CHECK(hex64(fnv1a("foobar")) == "85944171f73967e8");
}

TEST_CASE("missing run directory") {
    try {
        manifest(scratch("absent").string());
        FAIL("expected a missing run");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::MissingRun);
    }
}
