#include "nullctl/runner.hpp"

#include "nullctl/carleman.hpp"
#include "nullctl/hum.hpp"
#include "nullctl/io.hpp"
#include "nullctl/semilinear.hpp"
#include "nullctl/solver.hpp"
#include "nullctl/weights.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#ifndef NULLCTL_VERSION
#define NULLCTL_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using nlohmann::json;

namespace nullctl {

std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex;
    os.width(16);
    os.fill('0');
    os << v;
    return os.str();
}

int exit_code(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::ConfigParse:
            return ExitConfigParse;
        case ErrorKind::Validation:
        case ErrorKind::InvalidRegion:
        case ErrorKind::ConstructionInfeasible:
            return ExitValidation;
        default:
            return ExitSolver;
    }
}

const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> names{"weights-audit", "solve", "carleman-audit",
                                                "hum",           "sweep", "semilinear"};
    return names;
}

namespace {

// Collects the artifacts of one run; every file goes through here.
class RunDir {
public:
    explicit RunDir(fs::path root) : root_(std::move(root)) { fs::create_directories(root_); }

    void write(const std::string& name, const std::string& bytes) {
        std::ofstream out(root_ / name, std::ios::binary);
        if (!out) fail(ErrorKind::InvalidArgument, "cannot write " + (root_ / name).string());
        out << bytes;
        hashes_[name] = fnv1a(bytes);
    }

    template <class F>
    void write_with(const std::string& name, F&& fill) {
        std::ostringstream os(std::ios::binary);
        fill(os);
        write(name, os.str());
    }

    void write_json(const std::string& name, const json& j) { write(name, j.dump(2) + "\n"); }

    json artifact_list() const {
        json a = json::array();
        for (const auto& [name, h] : hashes_) a.push_back({{"name", name}, {"fnv1a", hex64(h)}});
        return a;
    }

    const fs::path& root() const { return root_; }

private:
    fs::path root_;
    std::map<std::string, std::uint64_t> hashes_;  // sorted by name
};

std::string number_tag(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json hum_summary(const HumResult& r) {
    return {{"epsilon", r.epsilon},
            {"terminal_norm", r.terminal_norm},
            {"control_norm", r.control_norm},
            {"cost", r.cost},
            {"cg_iterations", r.cg_iterations},
            {"optimality_residual", r.optimality_residual},
            {"log_weighted_source_norm", finite_or_null(r.log_weighted_source_norm)},
            {"converged", r.converged}};
}

void run_weights(const ExperimentConfig& c, RunDir& dir) {
    const Grids g = c.grids();
    const EtaField eta = build_eta(c.domain);
    const double s = c.s_values().front();
    json reports = json::array();
    for (double lambda : c.lambda) {
        const WeightBundle b = eval_weights(eta, s, lambda, g.time, g.space);
        const WeightPropertyReport r = check_weight_properties(b, eta);
        dir.write_with("weights_lambda_" + number_tag(lambda) + ".csv",
                       [&](std::ostream& os) { write_weights_csv(os, b); });
        reports.push_back(weights_summary(b, r));
    }
    const EtaCheck ec = check_eta(eta, 65);
    dir.write_json("weights_summary.json",
                   {{"reports", reports},
                    {"eta", {{"sup_norm", eta.sup_norm},
                             {"max_boundary", ec.max_boundary},
                             {"min_interior", ec.min_interior},
                             {"min_gradient_outside", ec.min_gradient_outside},
                             {"corners_excluded", ec.corners_excluded}}}});
}

void run_solve(const ExperimentConfig& c, RunDir& dir) {
    const Grids g = c.grids();
    const CoefficientSet coef = c.coefficients(g);
    const Vec y0 = c.initial.sample(g.space, c.seed);
    const Mat src = c.source_field(g);
    const SpaceTimeField y = solve_forward(g, coef, y0, Mat{}, src);
    const SpaceTimeField z = solve_backward(g, coef, AdjointMode::Full, y0, src);
    dir.write_with("forward.bin", [&](std::ostream& os) { write_trajectory(os, g, y); });
    dir.write_with("adjoint.bin", [&](std::ostream& os) { write_trajectory(os, g, z); });
    if (g.space.dim() == 1) {
        dir.write_with("forward.csv", [&](std::ostream& os) { write_trajectory_csv(os, g, y); });
        dir.write_with("adjoint.csv", [&](std::ostream& os) { write_trajectory_csv(os, g, z); });
    }
    dir.write_json("solve_summary.json", {{"datum_norm", g.space.norm(y0)},
                                          {"forward_terminal_norm", g.space.norm(y.terminal())},
                                          {"adjoint_initial_norm", g.space.norm(z.slice(0))},
                                          {"forward_l2", space_time_norm(g, y.values)},
                                          {"adjoint_l2", space_time_norm(g, z.values)}});
}

void run_carleman(const ExperimentConfig& c, RunDir& dir) {
    const Grids g = c.grids();
    AuditSetup setup{g, c.coefficients(g), build_eta(c.domain)};
    const Vec z0 = c.initial.sample(g.space, c.seed);
    const std::vector<double> s_list = c.s_values();
    if (c.audit == "prop34") {
        const SpaceTimeField z = solve_backward(g, setup.coefficients, AdjointMode::Free, z0);
        json rows = json::array();
        std::ostringstream csv;
        csv << "s,lambda,log_grad_w,log_lap_w,log_hess_w,log_w,log_u,log_z,quotient,stationarity,iterations\n";
        csv.precision(17);
        std::vector<double> lambdas = c.lambda;
        std::sort(lambdas.begin(), lambdas.end());
        std::vector<double> ss = s_list;
        std::sort(ss.begin(), ss.end());
        for (double lambda : lambdas) {
            for (double s : ss) {
                const DualExtremalResult r = solve_dual_extremal(setup, z, s, lambda);
                csv << s << ',' << lambda;
                for (const auto& t : r.bound_lhs) csv << ',' << t.log_value;
                csv << ',' << r.bound_rhs.log_value << ',' << r.quotient << ',' << r.stationarity_residual << ','
                    << r.iterations << '\n';
                rows.push_back(dual_extremal_summary(r));
            }
        }
        dir.write("dual_extremal.csv", csv.str());
        dir.write_json("dual_extremal_summary.json", {{"results", rows}});
        return;
    }
    const CarlemanTarget target = c.audit == "lemma22" ? CarlemanTarget::Lemma22 : CarlemanTarget::Theorem322;
    const Mat src = c.source_field(g);
    const SourceTerm gsrc = src.size() ? SourceTerm::plain(src) : SourceTerm{};
    const ConstantSweep sweep = constant_sweep(setup, target, z0, gsrc, s_list, c.lambda);
    const std::string stem = "carleman_" + to_string(target);
    dir.write_with(stem + ".csv", [&](std::ostream& os) { write_constant_sweep_csv(os, sweep); });
    dir.write_json(stem + "_summary.json", constant_sweep_summary(sweep));
}

void run_hum(const ExperimentConfig& c, RunDir& dir) {
    const HumConfig h = c.hum_config();
    const Vec y0 = c.initial.sample(h.grids.space, c.seed);
    const Mat src = c.source_field(h.grids);
    const HumResult r = hum_solve(h, y0, src);
    dir.write_with("cg_history.csv", [&](std::ostream& os) {
        os << "iter,residual\n";
        os.precision(17);
        for (std::size_t i = 0; i < r.residual_history.size(); ++i) os << i << ',' << r.residual_history[i] << '\n';
    });
    dir.write_with("state.bin", [&](std::ostream& os) { write_trajectory(os, h.grids, r.y); });
    dir.write_with("control.bin", [&](std::ostream& os) { write_trajectory(os, h.grids, r.v); });
    dir.write_json("hum_summary.json", hum_summary(r));
}

void run_sweep(const ExperimentConfig& c, RunDir& dir) {
    const HumConfig h = c.hum_config();
    const Vec y0 = c.initial.sample(h.grids.space, c.seed);
    const Mat src = c.source_field(h.grids);
    try {
        const SweepReport rep = epsilon_sweep(h, y0, src, c.epsilon_list);
        dir.write_with("sweep.csv", [&](std::ostream& os) { write_sweep_csv(os, rep); });
        dir.write_json("sweep_summary.json", sweep_summary(rep));
    } catch (const SweepDivergenceError& e) {
        dir.write_with("sweep.csv", [&](std::ostream& os) { write_sweep_csv(os, e.report()); });
        dir.write_json("sweep_summary.json", sweep_summary(e.report()));
        throw;
    }
}

void run_semilinear(const ExperimentConfig& c, RunDir& dir) {
    const HumConfig h = c.hum_config();
    const Vec y0 = c.initial.sample(h.grids.space, c.seed);
    const Mat src = c.source_field(h.grids);
    const NonlinearitySpec F = c.nonlinearity.value_or(NonlinearitySpec::zero());
    const auto emit = [&](const FixedPointResult& r) {
        dir.write_with("trace.csv", [&](std::ostream& os) { write_trace_csv(os, r.trace); });
        json s = fixed_point_summary(r);
        s["nonlinearity"] = to_string(F.kind);
        s["state_only"] = c.state_only;
        dir.write_json("fixed_point_summary.json", s);
    };
    try {
        emit(c.state_only ? state_only_variant(h, y0, src, F, c.fixed_point)
                          : fixed_point_solve(h, y0, src, F, c.fixed_point));
    } catch (const FixedPointError& e) {
        emit(e.partial());
        throw;
    }
}

json diagnostic(const Error& e, const std::string& subcommand) {
    json d = {{"subcommand", subcommand}, {"error", to_string(e.kind())}, {"message", e.what()}};
    if (const auto* cg = dynamic_cast<const CgStagnationError*>(&e)) {
        d["cg_iterations"] = cg->best().cg_iterations;
        d["residual_history"] = cg->best().residual_history;
    } else if (const auto* fp = dynamic_cast<const FixedPointError*>(&e)) {
        json dist = json::array();
        for (const auto& r : fp->partial().trace.rows) dist.push_back(r.distance);
        d["distances"] = dist;
    } else if (const auto* sw = dynamic_cast<const SweepDivergenceError*>(&e)) {
        d["control_ratio"] = sw->report().control_ratio;
    }
    return d;
}

}  // namespace

int run(const std::string& subcommand, const ExperimentConfig& config, std::ostream& log) {
    if (std::find(subcommands().begin(), subcommands().end(), subcommand) == subcommands().end()) {
        log << "validation: unknown subcommand '" << subcommand << "'\n";
        return ExitValidation;
    }
    try {
        config.validate();
        build_eta(config.domain);
    } catch (const Error& e) {
        log << to_string(e.kind()) << ": " << e.what() << '\n';
        return exit_code(e.kind());
    }

    RunDir dir(config.output);
    const std::string config_text = to_json(config).dump(2) + "\n";
    dir.write("config.json", config_text);

    const auto start = std::chrono::steady_clock::now();
    int status = ExitOk;
    try {
        if (subcommand == "weights-audit")
            run_weights(config, dir);
        else if (subcommand == "solve")
            run_solve(config, dir);
        else if (subcommand == "carleman-audit")
            run_carleman(config, dir);
        else if (subcommand == "hum")
            run_hum(config, dir);
        else if (subcommand == "sweep")
            run_sweep(config, dir);
        else
            run_semilinear(config, dir);
    } catch (const Error& e) {
        status = exit_code(e.kind());
        log << to_string(e.kind()) << ": " << e.what() << '\n';
        dir.write_json("diagnostic.json", diagnostic(e, subcommand));
    }
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    json m = {{"subcommand", subcommand},
              {"config_hash", hex64(fnv1a(config_text))},
              {"seed", config.seed},
              {"version", NULLCTL_VERSION},
              {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                            std::to_string(EIGEN_MINOR_VERSION)},
              {"compiler", __VERSION__},
              {"wall_time_seconds", wall},
              {"exit_status", status},
              {"artifacts", dir.artifact_list()}};
    std::ofstream(dir.root() / "manifest.json") << m.dump(2) << '\n';
    if (status == ExitOk) log << "wrote " << dir.root().string() << '\n';
    return status;
}

int run(const std::string& subcommand, const std::string& config_path, std::ostream& log,
        const RunOptions& options) {
    ExperimentConfig config;
    try {
        config = load_config(config_path);
    } catch (const Error& e) {
        log << to_string(e.kind()) << ": " << e.what() << '\n';
        return exit_code(e.kind());
    }
    if (options.output) config.output = *options.output;
    return run(subcommand, config, log);
}

json manifest(const std::string& run_dir) {
    const fs::path p = fs::path(run_dir) / "manifest.json";
    std::ifstream in(p);
    if (!in) fail(ErrorKind::MissingRun, "no manifest.json in '" + run_dir + "'");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        fail(ErrorKind::MissingRun, std::string("unreadable manifest: ") + e.what());
    }
}

}  // namespace nullctl
