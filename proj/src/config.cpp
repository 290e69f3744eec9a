#include "nullctl/config.hpp"

#include "nullctl/carleman.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

namespace nullctl {

using nlohmann::json;

DomainSpec default_domain() {
    DomainSpec d;
    d.control = Box{{0.3, 0.0}, {0.7, 0.0}};
    d.inner = Box{{0.4, 0.0}, {0.6, 0.0}};
    return d;
}

Vec InitialDatum::sample(const SpatialGrid& grid, std::uint64_t seed) const {
    const int dim = grid.dim();
    if (kind == Kind::Sine) {
        Vec v(grid.size());
        const Mat pts = grid.points();
        for (Eigen::Index k = 0; k < grid.size(); ++k) {
            double s = amplitude;
            for (int a = 0; a < dim; ++a) s *= std::sin(mode[a] * std::numbers::pi * pts(a, k) / grid.extent(a));
            v(k) = s;
        }
        return v;
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    Vec modal = Vec::Zero(grid.size());
    const int n0 = std::min(modes, grid.nodes(0));
    const int n1 = dim == 2 ? std::min(modes, grid.nodes(1)) : 1;
    for (int j = 0; j < n1; ++j) {
        for (int i = 0; i < n0; ++i) {
            const double k2 = (i + 1.0) * (i + 1.0) + (dim == 2 ? (j + 1.0) * (j + 1.0) : 0.0);
            modal(i + static_cast<Eigen::Index>(j) * grid.nodes(0)) = normal(rng) / k2;
        }
    }
    Vec v = grid.to_nodal(modal);
    const double n = grid.norm(v);
    return n > 0 ? Vec(v * (amplitude / n)) : v;
}

void ExperimentConfig::validate() const {
    const auto invalid = [](const std::string& what) { fail(ErrorKind::Validation, what); };
    try {
        domain.validate();
    } catch (const Error& e) {
        invalid(std::string("domain: ") + e.what());
    }
    for (int a = 0; a < domain.dim; ++a)
        if (nodes[a] < 8) invalid("grid: resolution must be at least 8 nodes per axis");
    if (steps < 8) invalid("grid: resolution must be at least 8 time steps");
    if (!(T > 0)) invalid("grid: T must be positive");
    if (!b0.empty() && static_cast<int>(b0.size()) != domain.dim)
        invalid("coefficients: b0 needs one profile per axis");
    if (!d.empty() && static_cast<int>(d.size()) != domain.dim * domain.dim)
        invalid("coefficients: d needs dim * dim profiles");
    if (initial.kind == InitialDatum::Kind::Random && initial.modes < 1)
        invalid("initial: random datum needs at least one mode");
    if (lambda.empty()) invalid("weights: lambda list is empty");
    for (double l : lambda)
        if (!(l > 0)) invalid("weights: lambda values must be positive");
    if (s0.empty()) invalid("weights: s0 list is empty");
    for (double s : s0)
        if (!(s > 0)) invalid("weights: s0 values must be positive");
    if (!(epsilon > 0)) invalid("hum: epsilon must be positive");
    for (std::size_t i = 0; i < epsilon_list.size(); ++i) {
        if (!(epsilon_list[i] > 0)) invalid("hum: epsilon_list values must be positive");
        if (i && !(epsilon_list[i] < epsilon_list[i - 1])) invalid("hum: epsilon_list must be decreasing");
    }
    if (!(cg_tolerance > 0 && cg_tolerance < 1)) invalid("hum: tolerance must lie in (0, 1)");
    if (cg_max_iterations < 1) invalid("hum: max_iterations must be positive");
    if (audit != "lemma22" && audit != "theorem322" && audit != "prop34")
        invalid("audit: target must be lemma22, theorem322 or prop34");
    if (state_only && nonlinearity && !nonlinearity->state_only())
        invalid("nonlinearity: state_only needs a nonlinearity of u alone");
    if (!(fixed_point.tolerance > 0)) invalid("fixed_point: tolerance must be positive");
    if (fixed_point.max_iterations < 1) invalid("fixed_point: max_iterations must be positive");
    if (fixed_point.quad_nodes < 2) invalid("fixed_point: quad_nodes must be at least 2");
    if (!(fixed_point.damping > 0 && fixed_point.damping <= 1)) invalid("fixed_point: damping must lie in (0, 1]");
    if (output.empty()) invalid("output: directory is empty");
}

Grids ExperimentConfig::grids() const {
    return Grids{SpatialGrid(domain.dim, {nodes[0], domain.dim == 2 ? nodes[1] : 1}, domain.extent),
                 TimeGrid{T, steps}};
}

CoefficientSet ExperimentConfig::coefficients(const Grids& g) const {
    CoefficientSet c = CoefficientSet::zero(g, domain);
    if (a0) c.a0 = a0->sample(g);
    if (a1) c.a1 = a1->sample(g);
    for (const auto& p : b0) c.b0.push_back(p.sample(g));
    for (const auto& p : d) c.d.push_back(p.sample(g));
    return c;
}

Mat ExperimentConfig::source_field(const Grids& g) const { return source ? source->sample(g) : Mat{}; }

HumConfig ExperimentConfig::hum_config() const {
    HumConfig h;
    h.epsilon = epsilon;
    h.tolerance = cg_tolerance;
    h.max_iterations = cg_max_iterations;
    h.precondition = precondition;
    h.grids = grids();
    h.coefficients = coefficients(h.grids);
    h.weights = WeightParams{build_eta(domain), s_values().front(), lambda.front()};
    return h;
}

std::vector<double> ExperimentConfig::s_values() const { return default_s_values(T, s0); }

// JSON ---------------------------------------------------------------------

namespace {

json axes(const std::array<double, 2>& v, int dim) {
    json a = json::array();
    for (int i = 0; i < dim; ++i) a.push_back(v[i]);
    return a;
}

json axes(const std::array<int, 2>& v, int dim) {
    json a = json::array();
    for (int i = 0; i < dim; ++i) a.push_back(v[i]);
    return a;
}

json box_json(const Box& b, int dim) { return {{"lo", axes(b.lo, dim)}, {"hi", axes(b.hi, dim)}}; }

void check_keys(const json& j, const char* section, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) fail(ErrorKind::ConfigParse, std::string(section) + ": expected an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [k, v] : j.items())
        if (!ok.count(k)) fail(ErrorKind::ConfigParse, std::string(section) + ": unknown key '" + k + "'");
}

template <class T, std::size_t N>
std::array<T, N> read_axes(const json& j, std::array<T, N> fallback, const char* what) {
    if (!j.is_array() || j.empty() || j.size() > N)
        fail(ErrorKind::ConfigParse, std::string(what) + ": expected an array of 1 or 2 numbers");
    for (std::size_t i = 0; i < j.size(); ++i) fallback[i] = j[i].get<T>();
    return fallback;
}

Box read_box(const json& j, const char* what) {
    check_keys(j, what, {"lo", "hi"});
    Box b;
    b.lo = read_axes<double, 2>(j.at("lo"), {0.0, 0.0}, what);
    b.hi = read_axes<double, 2>(j.at("hi"), {0.0, 0.0}, what);
    return b;
}

std::vector<double> read_list(const json& j, const char* what) {
    if (!j.is_array()) fail(ErrorKind::ConfigParse, std::string(what) + ": expected an array");
    return j.get<std::vector<double>>();
}

json nonlinearity_json(const NonlinearitySpec& f) {
    return {{"name", to_string(f.kind)}, {"a", f.a}, {"b", f.b}, {"c", f.c}, {"d", f.d}};
}

std::string initial_kind_name(InitialDatum::Kind k) { return k == InitialDatum::Kind::Sine ? "sine" : "random"; }

}  // namespace

json to_json(const Profile& p) {
    json j = {{"kind", to_string(p.kind)},
              {"value", p.value},
              {"amplitude", p.amplitude},
              {"mode", {p.mode[0], p.mode[1]}},
              {"frequency", p.frequency},
              {"support", box_json(p.support, 2)}};
    j["time_window"] = p.time_window ? json{(*p.time_window)[0], (*p.time_window)[1]} : json(nullptr);
    return j;
}

Profile profile_from_json(const json& j) {
    check_keys(j, "profile", {"kind", "value", "amplitude", "mode", "frequency", "support", "time_window"});
    Profile p;
    p.kind = profile_kind_from_string(j.at("kind").get<std::string>());
    p.value = j.value("value", 0.0);
    p.amplitude = j.value("amplitude", 0.0);
    if (j.contains("mode")) p.mode = read_axes<int, 2>(j["mode"], {1, 1}, "profile.mode");
    p.frequency = j.value("frequency", 0.0);
    if (j.contains("support")) p.support = read_box(j["support"], "profile.support");
    if (j.contains("time_window") && !j["time_window"].is_null()) {
        const auto w = read_axes<double, 2>(j["time_window"], {0.0, 0.0}, "profile.time_window");
        if (j["time_window"].size() != 2) fail(ErrorKind::ConfigParse, "profile.time_window: expected [t0, t1]");
        p.time_window = w;
    }
    return p;
}

json to_json(const ExperimentConfig& c) {
    const int dim = c.domain.dim;
    json j;
    j["domain"] = {{"dim", dim},
                   {"extent", axes(c.domain.extent, dim)},
                   {"control", box_json(c.domain.control, dim)},
                   {"inner", box_json(c.domain.inner, dim)}};
    j["grid"] = {{"nodes", axes(c.nodes, dim)}, {"steps", c.steps}, {"T", c.T}};
    json coef = json::object();
    coef["a0"] = c.a0 ? to_json(*c.a0) : json(nullptr);
    coef["a1"] = c.a1 ? to_json(*c.a1) : json(nullptr);
    coef["b0"] = json::array();
    for (const auto& p : c.b0) coef["b0"].push_back(to_json(p));
    coef["d"] = json::array();
    for (const auto& p : c.d) coef["d"].push_back(to_json(p));
    j["coefficients"] = coef;
    j["source"] = c.source ? to_json(*c.source) : json(nullptr);
    j["initial"] = {{"kind", initial_kind_name(c.initial.kind)},
                    {"amplitude", c.initial.amplitude},
                    {"mode", axes(c.initial.mode, dim)},
                    {"modes", c.initial.modes}};
    j["weights"] = {{"lambda", c.lambda}, {"s0", c.s0}};
    j["hum"] = {{"epsilon", c.epsilon},
                {"epsilon_list", c.epsilon_list},
                {"tolerance", c.cg_tolerance},
                {"max_iterations", c.cg_max_iterations},
                {"precondition", c.precondition}};
    j["audit"] = {{"target", c.audit}};
    if (c.nonlinearity) {
        json n = nonlinearity_json(*c.nonlinearity);
        n["state_only"] = c.state_only;
        j["nonlinearity"] = n;
    } else {
        j["nonlinearity"] = nullptr;
    }
    j["fixed_point"] = {{"tolerance", c.fixed_point.tolerance},
                        {"max_iterations", c.fixed_point.max_iterations},
                        {"quad_nodes", c.fixed_point.quad_nodes},
                        {"damping", c.fixed_point.damping}};
    j["output"] = c.output;
    j["seed"] = c.seed;
    return j;
}

ExperimentConfig parse_config(const json& j) {
    try {
        check_keys(j, "config",
                   {"domain", "grid", "coefficients", "source", "initial", "weights", "hum", "audit", "nonlinearity",
                    "fixed_point", "output", "seed"});
        ExperimentConfig c;
        if (j.contains("domain")) {
            const json& d = j["domain"];
            check_keys(d, "domain", {"dim", "extent", "control", "inner"});
            c.domain.dim = d.value("dim", 1);
            if (d.contains("extent")) c.domain.extent = read_axes<double, 2>(d["extent"], {1.0, 1.0}, "domain.extent");
            c.domain.control = read_box(d.at("control"), "domain.control");
            c.domain.inner = read_box(d.at("inner"), "domain.inner");
        }
        if (j.contains("grid")) {
            const json& g = j["grid"];
            check_keys(g, "grid", {"nodes", "steps", "T"});
            if (g.contains("nodes")) c.nodes = read_axes<int, 2>(g["nodes"], {32, 1}, "grid.nodes");
            c.steps = g.value("steps", c.steps);
            c.T = g.value("T", c.T);
        }
        if (j.contains("coefficients")) {
            const json& k = j["coefficients"];
            check_keys(k, "coefficients", {"a0", "a1", "b0", "d"});
            if (k.contains("a0") && !k["a0"].is_null()) c.a0 = profile_from_json(k["a0"]);
            if (k.contains("a1") && !k["a1"].is_null()) c.a1 = profile_from_json(k["a1"]);
            if (k.contains("b0"))
                for (const auto& p : k["b0"]) c.b0.push_back(profile_from_json(p));
            if (k.contains("d"))
                for (const auto& p : k["d"]) c.d.push_back(profile_from_json(p));
        }
        if (j.contains("source") && !j["source"].is_null()) c.source = profile_from_json(j["source"]);
        if (j.contains("initial")) {
            const json& i = j["initial"];
            check_keys(i, "initial", {"kind", "amplitude", "mode", "modes"});
            const std::string kind = i.value("kind", std::string("sine"));
            if (kind == "sine")
                c.initial.kind = InitialDatum::Kind::Sine;
            else if (kind == "random")
                c.initial.kind = InitialDatum::Kind::Random;
            else
                fail(ErrorKind::ConfigParse, "initial.kind: expected sine or random");
            c.initial.amplitude = i.value("amplitude", 1.0);
            if (i.contains("mode")) c.initial.mode = read_axes<int, 2>(i["mode"], {1, 1}, "initial.mode");
            c.initial.modes = i.value("modes", 4);
        }
        if (j.contains("weights")) {
            const json& w = j["weights"];
            check_keys(w, "weights", {"lambda", "s0"});
            if (w.contains("lambda")) c.lambda = read_list(w["lambda"], "weights.lambda");
            if (w.contains("s0")) c.s0 = read_list(w["s0"], "weights.s0");
        }
        if (j.contains("hum")) {
            const json& h = j["hum"];
            check_keys(h, "hum", {"epsilon", "epsilon_list", "tolerance", "max_iterations", "precondition"});
            c.epsilon = h.value("epsilon", c.epsilon);
            if (h.contains("epsilon_list")) c.epsilon_list = read_list(h["epsilon_list"], "hum.epsilon_list");
            c.cg_tolerance = h.value("tolerance", c.cg_tolerance);
            c.cg_max_iterations = h.value("max_iterations", c.cg_max_iterations);
            c.precondition = h.value("precondition", c.precondition);
        }
        if (j.contains("audit")) {
            check_keys(j["audit"], "audit", {"target"});
            c.audit = j["audit"].value("target", c.audit);
        }
        if (j.contains("nonlinearity") && !j["nonlinearity"].is_null()) {
            const json& n = j["nonlinearity"];
            check_keys(n, "nonlinearity", {"name", "a", "b", "c", "d", "state_only"});
            NonlinearitySpec f;
            f.kind = nonlinearity_kind_from_string(n.at("name").get<std::string>());
            f.a = n.value("a", 0.0);
            f.b = n.value("b", 0.0);
            f.c = n.value("c", 0.0);
            f.d = n.value("d", 0.0);
            c.nonlinearity = f;
            c.state_only = n.value("state_only", false);
        }
        if (j.contains("fixed_point")) {
            const json& f = j["fixed_point"];
            check_keys(f, "fixed_point", {"tolerance", "max_iterations", "quad_nodes", "damping"});
            c.fixed_point.tolerance = f.value("tolerance", c.fixed_point.tolerance);
            c.fixed_point.max_iterations = f.value("max_iterations", c.fixed_point.max_iterations);
            c.fixed_point.quad_nodes = f.value("quad_nodes", c.fixed_point.quad_nodes);
            c.fixed_point.damping = f.value("damping", c.fixed_point.damping);
        }
        c.output = j.value("output", c.output);
        c.seed = j.value("seed", c.seed);
        return c;
    } catch (const json::exception& e) {
        fail(ErrorKind::ConfigParse, e.what());
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::ConfigParse) throw;
        fail(ErrorKind::ConfigParse, e.what());
    }
}

ExperimentConfig parse_config_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        fail(ErrorKind::ConfigParse, e.what());
    }
    return parse_config(j);
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::ConfigParse, "cannot open config '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

}  // namespace nullctl
