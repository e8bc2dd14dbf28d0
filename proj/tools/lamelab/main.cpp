// lamelab: batch driver for the Lame-system laboratory.  One subcommand per
// experiment, JSON config in, CSV/JSON/SVG artifacts plus a manifest out.
//
// Exit codes: 0 success, 2 validation failure (bad config or arguments,
// nothing written), 3 numerical failure (non-convergence, bad evaluation),
// 4 property-check failure demanded by the config (reports are still
// written so the failure can be inspected).

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "lamelab/carleman.hpp"
#include "lamelab/cauchy.hpp"
#include "lamelab/fd_solver.hpp"
#include "lamelab/fields.hpp"
#include "lamelab/grid_field.hpp"
#include "lamelab/lame_operator.hpp"
#include "lamelab/poly3.hpp"
#include "lamelab/quadrature.hpp"
#include "lamelab/report_io.hpp"
#include "lamelab/solutions.hpp"
#include "lamelab/three_spheres.hpp"
#include "lamelab/version.hpp"

namespace {

using nlohmann::json;
using namespace lamelab;

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& m) : std::runtime_error(m) {}
};

struct PropertyFailure : std::runtime_error {
    explicit PropertyFailure(const std::string& m) : std::runtime_error(m) {}
};

// ---- schema validation ------------------------------------------------------

enum class Kind { Number, Integer, Boolean, String, Object, NumArray, Vector3, AnyArray };

struct KeySpec {
    const char* name;
    Kind kind;
    bool required;
};

[[noreturn]] void bad(const std::string& where, const std::string& what) {
    throw ConfigError(where + ": " + what);
}

const char* kind_name(Kind k) {
    switch (k) {
        case Kind::Number: return "a number";
        case Kind::Integer: return "an integer";
        case Kind::Boolean: return "a boolean";
        case Kind::String: return "a string";
        case Kind::Object: return "an object";
        case Kind::NumArray: return "an array of numbers";
        case Kind::Vector3: return "an array of 3 numbers";
        case Kind::AnyArray: return "an array";
    }
    return "?";
}

bool kind_matches(const json& v, Kind k) {
    switch (k) {
        case Kind::Number: return v.is_number();
        case Kind::Integer: return v.is_number_integer() || v.is_number_unsigned();
        case Kind::Boolean: return v.is_boolean();
        case Kind::String: return v.is_string();
        case Kind::Object: return v.is_object();
        case Kind::NumArray:
            if (!v.is_array()) return false;
            for (const auto& e : v)
                if (!e.is_number()) return false;
            return true;
        case Kind::Vector3:
            if (!v.is_array() || v.size() != 3) return false;
            for (const auto& e : v)
                if (!e.is_number()) return false;
            return true;
        case Kind::AnyArray: return v.is_array();
    }
    return false;
}

/// Rejects unknown keys, missing required keys, and type mismatches.
void require_object(const json& v, const std::string& where,
                    std::initializer_list<KeySpec> keys) {
    if (!v.is_object()) bad(where, "expected an object");
    for (auto it = v.begin(); it != v.end(); ++it) {
        bool known = false;
        for (const KeySpec& k : keys)
            if (it.key() == k.name) {
                known = true;
                break;
            }
        if (!known) bad(where, "unknown key '" + it.key() + "'");
    }
    for (const KeySpec& k : keys) {
        if (!v.contains(k.name)) {
            if (k.required) bad(where, std::string("missing required key '") + k.name + "'");
            continue;
        }
        if (!kind_matches(v.at(k.name), k.kind))
            bad(where + "." + k.name, std::string("expected ") + kind_name(k.kind));
    }
}

double num(const json& o, const char* k, double def) {
    return o.contains(k) ? o.at(k).get<double>() : def;
}

double req_num(const json& o, const char* k) { return o.at(k).get<double>(); }

long long integer(const json& o, const char* k, long long def) {
    return o.contains(k) ? o.at(k).get<long long>() : def;
}

std::string str(const json& o, const char* k, const std::string& def) {
    return o.contains(k) ? o.at(k).get<std::string>() : def;
}

bool flag(const json& o, const char* k, bool def) {
    return o.contains(k) ? o.at(k).get<bool>() : def;
}

Vec3 vec3(const json& o, const char* k, const Vec3& def) {
    if (!o.contains(k)) return def;
    const json& a = o.at(k);
    return {a[0].get<double>(), a[1].get<double>(), a[2].get<double>()};
}

std::vector<double> num_list(const json& o, const char* k) {
    std::vector<double> out;
    for (const auto& e : o.at(k)) out.push_back(e.get<double>());
    return out;
}

// ---- config selectors -------------------------------------------------------

CoefficientPair coefficients_of(const json& spec, const std::string& where) {
    require_object(spec, where,
                   {{"family", Kind::String, true},
                    {"mu", Kind::Number, false},
                    {"lambda", Kind::Number, false}});
    std::string family = spec.at("family").get<std::string>();
    if (family == "wavy") {
        if (spec.contains("mu") || spec.contains("lambda"))
            bad(where, "family 'wavy' takes no mu/lambda parameters");
        return coefficients_wavy();
    }
    if (family == "constant") return coefficients_constant(num(spec, "mu", 1.0), num(spec, "lambda", 1.0));
    bad(where + ".family", "expected 'constant' or 'wavy', got '" + family + "'");
}

Poly3 poly_of(const json& terms, const std::string& where) {
    if (!terms.is_array()) bad(where, "expected an array of [i, j, k, c] terms");
    Poly3 p;
    for (std::size_t t = 0; t < terms.size(); ++t) {
        const json& m = terms[t];
        std::string at = where + "[" + std::to_string(t) + "]";
        if (!m.is_array() || m.size() != 4) bad(at, "expected [i, j, k, c]");
        for (int q = 0; q < 3; ++q)
            if (!m[q].is_number_integer() && !m[q].is_number_unsigned())
                bad(at, "exponents must be integers");
        if (!m[3].is_number()) bad(at, "coefficient must be a number");
        int i = m[0].get<int>(), j = m[1].get<int>(), k = m[2].get<int>();
        if (i < 0 || j < 0 || k < 0) bad(at, "exponents must be nonnegative");
        p.add_term(i, j, k, m[3].get<double>());
    }
    return p;
}

DisplacementField default_cubic() {
    Poly3 u1 = Poly3::monomial(3, 0, 0) + Poly3::monomial(1, 1, 1, 0.5) +
               Poly3::monomial(0, 2, 0, -1.0);
    Poly3 u2 = Poly3::monomial(0, 3, 0, 0.7) + Poly3::monomial(2, 1, 0, -0.3);
    Poly3 u3 = Poly3::monomial(0, 0, 3, 0.4) + Poly3::monomial(1, 0, 2, 0.6);
    return polynomial_displacement(u1, u2, u3);
}

/// Builds the configured exact/reference solution.  `coeffs` is only used by
/// the fd_dirichlet selector (discrete solve needs the operator).
DisplacementField solution_of(const json& spec, const std::string& where,
                              const CoefficientPair& coeffs) {
    if (!spec.is_object() || !spec.contains("type") || !spec.at("type").is_string())
        bad(where, "expected an object with a string 'type'");
    std::string type = spec.at("type").get<std::string>();

    if (type == "kelvin") {
        require_object(spec, where,
                       {{"type", Kind::String, true},
                        {"source", Kind::Vector3, false},
                        {"force", Kind::Vector3, false},
                        {"mu0", Kind::Number, false},
                        {"lambda0", Kind::Number, false}});
        KelvinSource src;
        src.source_point = vec3(spec, "source", {1.5, 0.0, 0.0});
        src.force = vec3(spec, "force", {1.0, 0.0, 0.0});
        src.mu0 = num(spec, "mu0", 1.0);
        src.lambda0 = num(spec, "lambda0", 1.0);
        return kelvin_field(src);
    }
    if (type == "harmonic_gradient") {
        require_object(spec, where,
                       {{"type", Kind::String, true},
                        {"potential", Kind::String, false},
                        {"monomials", Kind::AnyArray, false}});
        if (spec.contains("potential") && spec.contains("monomials"))
            bad(where, "give either 'potential' or 'monomials', not both");
        Poly3 pot;
        if (spec.contains("monomials")) {
            pot = poly_of(spec.at("monomials"), where + ".monomials");
        } else {
            std::string name = str(spec, "potential", "xyz");
            if (name != "xyz") bad(where + ".potential", "the only named potential is 'xyz'");
            pot = Poly3::monomial(1, 1, 1);
        }
        return harmonic_gradient_field(HarmonicGradient{pot});
    }
    if (type == "constant") {
        require_object(spec, where,
                       {{"type", Kind::String, true}, {"value", Kind::Vector3, true}});
        return constant_displacement(vec3(spec, "value", {}));
    }
    if (type == "polynomial") {
        require_object(spec, where,
                       {{"type", Kind::String, true}, {"components", Kind::AnyArray, true}});
        const json& comps = spec.at("components");
        if (comps.size() != 3) bad(where + ".components", "expected 3 component term lists");
        return polynomial_displacement(poly_of(comps[0], where + ".components[0]"),
                                       poly_of(comps[1], where + ".components[1]"),
                                       poly_of(comps[2], where + ".components[2]"));
    }
    if (type == "fd_dirichlet") {
        require_object(spec, where,
                       {{"type", Kind::String, true},
                        {"base", Kind::Object, true},
                        {"box_lo", Kind::Vector3, true},
                        {"side", Kind::Number, true},
                        {"cells", Kind::Integer, true},
                        {"tol", Kind::Number, false}});
        DisplacementField base = solution_of(spec.at("base"), where + ".base", coeffs);
        Vec3 lo = vec3(spec, "box_lo", {});
        double side = req_num(spec, "side");
        auto cells = static_cast<std::int64_t>(integer(spec, "cells", 0));
        if (cells < 2) bad(where + ".cells", "need at least 2 cells");
        if (!(side > 0.0)) bad(where + ".side", "need side > 0");
        Grid3 grid(lo, side / static_cast<double>(cells), {cells + 1, cells + 1, cells + 1});
        auto f = [&coeffs, base](const Vec3& x) { return apply_lame_full(coeffs, base, x); };
        GridSolution sol = solve_dirichlet(coeffs, f, base.value, grid, num(spec, "tol", 1e-8));
        return grid_field_view(sol.values);
    }
    bad(where + ".type",
        "expected kelvin | harmonic_gradient | fd_dirichlet | constant | polynomial, got '" +
            type + "'");
}

ProductBallRule rule_of(const json& cfg, const char* key, const std::string& where, int nr,
                        int np, int na) {
    if (cfg.contains(key)) {
        const json& r = cfg.at(key);
        require_object(r, where,
                       {{"n_r", Kind::Integer, false},
                        {"n_p", Kind::Integer, false},
                        {"n_a", Kind::Integer, false}});
        nr = static_cast<int>(integer(r, "n_r", nr));
        np = static_cast<int>(integer(r, "n_p", np));
        na = static_cast<int>(integer(r, "n_a", na));
    }
    return {nr, np, na};
}

// ---- run context --------------------------------------------------------------

struct RunContext {
    std::string name; // subcommand
    json cfg;
    std::string config_text;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false; // --seed given on the command line
    bool quiet = false;

    std::uint64_t resolve_seed(long long config_default) const {
        if (seed_set) return seed;
        return static_cast<std::uint64_t>(integer(cfg, "seed", config_default));
    }

    std::string path(const std::string& file) const { return out_dir + "/" + file; }

    void note(const std::string& line) const {
        if (!quiet) std::printf("%s\n", line.c_str());
    }

    /// Creates the output directory lazily, right before the first write.
    void prepare_out() const { std::filesystem::create_directories(out_dir); }

    void finish(const std::vector<std::string>& files) const {
        write_manifest(out_dir, name, config_text, files);
        if (quiet) return;
        std::string all;
        for (const auto& f : files) all += (all.empty() ? "" : ", ") + path(f);
        std::printf("wrote %s, %s\n", all.c_str(), path("manifest.json").c_str());
    }
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

// ---- experiment runners --------------------------------------------------------

void run_ellipticity(RunContext& ctx) {
    require_object(ctx.cfg, "config",
                   {{"experiment", Kind::String, false},
                    {"coefficients", Kind::Object, true},
                    {"region", Kind::Object, true},
                    {"samples", Kind::Integer, false},
                    {"require_pass", Kind::Boolean, false},
                    {"output_dir", Kind::String, false}});
    CoefficientPair coeffs = coefficients_of(ctx.cfg.at("coefficients"), "config.coefficients");
    const json& reg = ctx.cfg.at("region");
    require_object(reg, "config.region",
                   {{"center", Kind::Vector3, false}, {"radius", Kind::Number, true}});
    BallSpec region(vec3(reg, "center", {}), req_num(reg, "radius"));
    int samples = static_cast<int>(integer(ctx.cfg, "samples", 2000));
    if (samples < 1) bad("config.samples", "need at least 1 sample");

    EllipticityReport rep = validate_ellipticity(coeffs, region, samples);

    json out = to_json(rep);
    out["experiment"] = ctx.name;
    ctx.prepare_out();
    write_json_file(ctx.path("ellipticity.json"), out);
    ctx.finish({"ellipticity.json"});
    ctx.note("min mu " + fmt("%.6g", rep.min_mu) + ", min 2mu+lambda " +
             fmt("%.6g", rep.min_2mu_lambda) + ", " + (rep.pass ? "pass" : "FAIL"));

    if (flag(ctx.cfg, "require_pass", true) && !rep.pass)
        throw PropertyFailure("ellipticity floors violated on the sampled region (min mu " +
                              fmt("%.6g", rep.min_mu) + ", min 2mu+lambda " +
                              fmt("%.6g", rep.min_2mu_lambda) + ")");
}

void run_factorization(RunContext& ctx) {
    require_object(ctx.cfg, "config",
                   {{"experiment", Kind::String, false},
                    {"coefficients", Kind::Object, true},
                    {"field_count", Kind::Integer, false},
                    {"max_degree", Kind::Integer, false},
                    {"probes", Kind::Object, false},
                    {"seed", Kind::Integer, false},
                    {"max_residual", Kind::Number, false},
                    {"max_second", Kind::Number, false},
                    {"output_dir", Kind::String, false}});
    CoefficientPair coeffs = coefficients_of(ctx.cfg.at("coefficients"), "config.coefficients");
    int count = static_cast<int>(integer(ctx.cfg, "field_count", 10));
    int degree = static_cast<int>(integer(ctx.cfg, "max_degree", 3));
    if (count < 1) bad("config.field_count", "need at least 1 field");
    std::uint64_t seed = ctx.resolve_seed(1);

    Vec3 center{};
    double radius = 1.0;
    int n_probes = 50;
    if (ctx.cfg.contains("probes")) {
        const json& p = ctx.cfg.at("probes");
        require_object(p, "config.probes",
                       {{"center", Kind::Vector3, false},
                        {"radius", Kind::Number, false},
                        {"count", Kind::Integer, false}});
        center = vec3(p, "center", {});
        radius = num(p, "radius", 1.0);
        n_probes = static_cast<int>(integer(p, "count", 50));
    }
    std::vector<Vec3> probes = halton_ball_points(BallSpec(center, radius), n_probes);

    double worst_res = 0.0, worst_second = 0.0;
    json per_field = json::array();
    std::vector<std::vector<double>> rows;
    for (int k = 0; k < count; ++k) {
        DisplacementField u = random_polynomial_displacement(degree, seed + static_cast<std::uint64_t>(k));
        FactorizationReport rep = factorization_residual(coeffs, u, probes);
        worst_res = std::max(worst_res, rep.max_vector_residual);
        worst_second = std::max(worst_second, rep.max_second_component);
        per_field.push_back(to_json(rep));
        rows.push_back({static_cast<double>(k), rep.max_vector_residual, rep.max_second_component});
    }

    json out{{"experiment", ctx.name},
             {"seed", seed},
             {"field_count", count},
             {"max_degree", degree},
             {"probe_count", n_probes},
             {"max_vector_residual", worst_res},
             {"max_second_component", worst_second},
             {"per_field", per_field}};
    ctx.prepare_out();
    write_json_file(ctx.path("factorization.json"), out);
    write_csv(ctx.path("factorization.csv"),
              {"field", "max_vector_residual", "max_second_component"}, rows);
    ctx.finish({"factorization.csv", "factorization.json"});
    ctx.note("max residual " + fmt("%.3g", worst_res) + ", max second component " +
             fmt("%.3g", worst_second));

    if (ctx.cfg.contains("max_residual") && worst_res > req_num(ctx.cfg, "max_residual"))
        throw PropertyFailure("factorization residual " + fmt("%.3g", worst_res) +
                              " exceeds the configured bound " +
                              fmt("%.3g", req_num(ctx.cfg, "max_residual")));
    if (ctx.cfg.contains("max_second") && worst_second > req_num(ctx.cfg, "max_second"))
        throw PropertyFailure("second component " + fmt("%.3g", worst_second) +
                              " exceeds the configured bound " +
                              fmt("%.3g", req_num(ctx.cfg, "max_second")));
}

void run_carleman_scan(RunContext& ctx) {
    require_object(ctx.cfg, "config",
                   {{"experiment", Kind::String, false},
                    {"coefficients", Kind::Object, true},
                    {"theta", Kind::Number, true},
                    {"r_out", Kind::Number, true},
                    {"s", Kind::Number, true},
                    {"taus", Kind::NumArray, true},
                    {"direction", Kind::Vector3, false},
                    {"rule", Kind::Object, false},
                    {"require_positive", Kind::Boolean, false},
                    {"max_spread", Kind::Number, false},
                    {"output_dir", Kind::String, false}});
    CoefficientPair coeffs = coefficients_of(ctx.cfg.at("coefficients"), "config.coefficients");
    double theta = req_num(ctx.cfg, "theta");
    double r_out = req_num(ctx.cfg, "r_out");
    double s = req_num(ctx.cfg, "s");
    std::vector<double> taus = num_list(ctx.cfg, "taus");
    if (taus.empty()) bad("config.taus", "need at least one tau");
    ProductBallRule rule = rule_of(ctx.cfg, "rule", "config.rule", 32, 24, 48);

    CarlemanWeights w(r_out, theta, s);
    DisplacementField u = bump_displacement(theta, r_out, vec3(ctx.cfg, "direction", {1, 0, 0}));
    std::vector<CarlemanScanRow> scan = carleman_scan(coeffs, u, w, rule, taus);

    std::vector<std::vector<double>> rows;
    PlotSeries series{"(t1+t2+t3)/rhs", {}, {}};
    double rmin = std::numeric_limits<double>::infinity(), rmax = 0.0;
    for (const CarlemanScanRow& r : scan) {
        rows.push_back({r.tau, r.t1, r.t2, r.t3, r.rhs, r.ratio});
        series.x.push_back(r.tau);
        series.y.push_back(r.ratio);
        rmin = std::min(rmin, r.ratio);
        rmax = std::max(rmax, r.ratio);
    }

    json out = to_json(scan);
    json wrapped{{"experiment", ctx.name}, {"theta", theta}, {"r_out", r_out}, {"s", s},
                 {"ratio_spread", rmax / rmin}, {"rows", out}};
    ctx.prepare_out();
    write_json_file(ctx.path("carleman_scan.json"), wrapped);
    write_csv(ctx.path("carleman_scan.csv"), {"tau", "t1", "t2", "t3", "rhs", "ratio"}, rows);
    write_svg_plot(ctx.path("carleman_ratio.svg"), "Carleman sides ratio vs tau", {series},
                   true, true);
    ctx.finish({"carleman_ratio.svg", "carleman_scan.csv", "carleman_scan.json"});
    ctx.note("ratio range [" + fmt("%.6g", rmin) + ", " + fmt("%.6g", rmax) + "], spread " +
             fmt("%.4g", rmax / rmin));

    if (flag(ctx.cfg, "require_positive", true))
        for (const CarlemanScanRow& r : scan)
            if (!(r.t1 > 0) || !(r.t2 > 0) || !(r.t3 > 0) || !(r.rhs > 0) ||
                !std::isfinite(r.ratio))
                throw PropertyFailure("nonpositive or non-finite integral at tau " +
                                      fmt("%g", r.tau));
    if (ctx.cfg.contains("max_spread") && rmax / rmin > req_num(ctx.cfg, "max_spread"))
        throw PropertyFailure("ratio spread " + fmt("%.4g", rmax / rmin) +
                              " exceeds the configured bound " +
                              fmt("%.4g", req_num(ctx.cfg, "max_spread")));
}

void run_three_spheres(RunContext& ctx) {
    require_object(ctx.cfg, "config",
                   {{"experiment", Kind::String, false},
                    {"coefficients", Kind::Object, false},
                    {"solution", Kind::Object, false},
                    {"radii", Kind::NumArray, true},
                    {"rule", Kind::Object, false},
                    {"sources", Kind::Object, false},
                    {"require_nondegenerate", Kind::Boolean, false},
                    {"seed", Kind::Integer, false},
                    {"output_dir", Kind::String, false}});
    if (ctx.cfg.contains("solution") == ctx.cfg.contains("sources"))
        bad("config", "give exactly one of 'solution' (single report) or 'sources' (Kelvin family)");
    std::vector<double> radii = num_list(ctx.cfg, "radii");
    if (radii.size() != 3) bad("config.radii", "expected [r1, r2, r_out]");
    ThreeRadii three(radii[0], radii[1], radii[2]);
    ProductBallRule rule = rule_of(ctx.cfg, "rule", "config.rule", 8, 12, 24);
    CoefficientPair coeffs = ctx.cfg.contains("coefficients")
                                 ? coefficients_of(ctx.cfg.at("coefficients"), "config.coefficients")
                                 : coefficients_constant(1.0, 1.0);
    bool demand = flag(ctx.cfg, "require_nondegenerate", false);

    if (ctx.cfg.contains("solution")) {
        DisplacementField u = solution_of(ctx.cfg.at("solution"), "config.solution", coeffs);
        ThreeSpheresReport rep = verify_three_spheres(u, three, rule);
        json out = to_json(rep);
        out["experiment"] = ctx.name;
        if (!rep.degenerate)
            out["middle_sq_over_product"] = rep.n2 * rep.n2 / (rep.n1 * rep.nR);
        ctx.prepare_out();
        write_json_file(ctx.path("three_spheres.json"), out);
        ctx.finish({"three_spheres.json"});
        ctx.note(rep.degenerate ? std::string("degenerate report")
                                : "sigma_star " + fmt("%.9g", rep.sigma_star));
        if (demand && rep.degenerate)
            throw PropertyFailure("degenerate three-spheres report, nondegenerate demanded");
        return;
    }

    const json& src_cfg = ctx.cfg.at("sources");
    require_object(src_cfg, "config.sources",
                   {{"count", Kind::Integer, false},
                    {"radius_min", Kind::Number, false},
                    {"radius_max", Kind::Number, false},
                    {"mu0", Kind::Number, false},
                    {"lambda0", Kind::Number, false}});
    int count = static_cast<int>(integer(src_cfg, "count", 20));
    double rmin = num(src_cfg, "radius_min", 1.1);
    double rmax = num(src_cfg, "radius_max", 3.0);
    if (count < 1) bad("config.sources.count", "need at least 1 source");
    if (!(rmin <= rmax)) bad("config.sources", "need radius_min <= radius_max");
    std::uint64_t seed = ctx.resolve_seed(7);

    std::mt19937_64 rng(seed);
    auto unit = [&rng]() { return static_cast<double>(rng() >> 11) * 0x1p-53; };
    std::vector<ThreeSpheresReport> reports;
    json report_list = json::array();
    int degenerate_count = 0;
    for (int i = 0; i < count; ++i) {
        double r = rmin + (rmax - rmin) * unit();
        double cphi = 2.0 * unit() - 1.0;
        double az = 2.0 * 3.14159265358979323846 * unit();
        double sphi = std::sqrt(std::max(0.0, 1.0 - cphi * cphi));
        KelvinSource src;
        src.source_point = {r * sphi * std::cos(az), r * sphi * std::sin(az), r * cphi};
        src.force = {2.0 * unit() - 1.0, 2.0 * unit() - 1.0, 2.0 * unit() - 1.0};
        src.mu0 = num(src_cfg, "mu0", 1.0);
        src.lambda0 = num(src_cfg, "lambda0", 1.0);
        DisplacementField u = kelvin_field(src, BallSpec({}, three.r_out));
        ThreeSpheresReport rep = verify_three_spheres(u, three, rule);
        degenerate_count += rep.degenerate ? 1 : 0;
        reports.push_back(rep);
        report_list.push_back(to_json(rep));
    }
    SigmaCurve curve = fit_sigma_c(reports);

    std::vector<std::vector<double>> rows;
    PlotSeries series{"C(sigma)", {}, {}};
    for (const SigmaCurvePoint& p : curve.points) {
        rows.push_back({p.sigma, p.c});
        series.x.push_back(p.sigma);
        series.y.push_back(p.c);
    }
    json out{{"experiment", ctx.name},
             {"seed", seed},
             {"source_count", count},
             {"degenerate_count", degenerate_count},
             {"reports", report_list},
             {"sigma_curve", to_json(curve)}};
    ctx.prepare_out();
    write_json_file(ctx.path("three_spheres.json"), out);
    write_csv(ctx.path("sigma_curve.csv"), {"sigma", "c"}, rows);
    write_svg_plot(ctx.path("sigma_curve.svg"), "C(sigma) envelope", {series}, false, true);
    ctx.finish({"sigma_curve.csv", "sigma_curve.svg", "three_spheres.json"});
    ctx.note("min sigma_star " + fmt("%.6g", curve.min_sigma_star) + ", C(min) " +
             fmt("%.12g", curve.c_at_min_sigma) + ", degenerate " +
             std::to_string(degenerate_count) + "/" + std::to_string(count));

    if (demand && degenerate_count > 0)
        throw PropertyFailure(std::to_string(degenerate_count) +
                              " degenerate reports, nondegenerate demanded");
}

void run_iteration_plan(RunContext& ctx) {
    require_object(ctx.cfg, "config",
                   {{"experiment", Kind::String, false},
                    {"r1", Kind::Number, true},
                    {"r2", Kind::Number, true},
                    {"r_out", Kind::Number, true},
                    {"eps", Kind::Number, true},
                    {"s", Kind::Number, true},
                    {"chain", Kind::Object, false},
                    {"theta_contraction", Kind::Object, false},
                    {"decay", Kind::Object, false},
                    {"output_dir", Kind::String, false}});
    IterationPlan plan = iteration_plan(req_num(ctx.cfg, "r1"), req_num(ctx.cfg, "r2"),
                                        req_num(ctx.cfg, "r_out"), req_num(ctx.cfg, "eps"),
                                        req_num(ctx.cfg, "s"));
    json out = to_json(plan);
    out["experiment"] = ctx.name;

    if (ctx.cfg.contains("chain")) {
        const json& c = ctx.cfg.at("chain");
        require_object(c, "config.chain",
                       {{"e1", Kind::Number, true}, {"mass_r", Kind::Number, true}});
        out["chain_bound"] = chain_bound(plan, req_num(c, "e1"), req_num(c, "mass_r"));
    }

    ThetaContraction tc{};
    bool have_tc = ctx.cfg.contains("theta_contraction");
    if (have_tc) {
        const json& t = ctx.cfg.at("theta_contraction");
        require_object(t, "config.theta_contraction", {{"theta", Kind::Number, true}});
        tc = theta_contraction(req_num(t, "theta"), req_num(ctx.cfg, "r_out"),
                               req_num(ctx.cfg, "s"));
        out["theta_contraction"] = to_json(tc);
    }

    std::vector<std::string> files{"iteration_plan.json"};
    std::string decay_verdict;
    std::string expected;
    ctx.prepare_out();
    if (ctx.cfg.contains("decay")) {
        const json& d = ctx.cfg.at("decay");
        require_object(d, "config.decay",
                       {{"eps", Kind::Number, true},
                        {"c_tilde", Kind::Number, true},
                        {"r1_list", Kind::NumArray, true},
                        {"expected_verdict", Kind::String, false}});
        double inv = have_tc ? tc.inv_ln_a : plan.inv_ln_a;
        DecayLimitReport rep = decay_limit_check(req_num(d, "eps"), inv, req_num(d, "c_tilde"),
                                                 num_list(d, "r1_list"));
        out["decay_limit"] = to_json(rep);
        decay_verdict = rep.verdict;
        expected = str(d, "expected_verdict", "");
        std::vector<std::vector<double>> rows;
        PlotSeries series{"decay factor", {}, {}};
        for (std::size_t i = 0; i < rep.r1_list.size(); ++i) {
            rows.push_back({rep.r1_list[i], rep.decay_factors[i], rep.values[i]});
            series.x.push_back(rep.r1_list[i]);
            series.y.push_back(rep.decay_factors[i]);
        }
        write_csv(ctx.path("decay.csv"), {"r1", "decay_factor", "value"}, rows);
        write_svg_plot(ctx.path("decay.svg"), "Decay factor vs R1", {series}, true, true);
        files.push_back("decay.csv");
        files.push_back("decay.svg");
    }
    write_json_file(ctx.path("iteration_plan.json"), out);
    ctx.finish(files);
    std::string line = "theta " + fmt("%.9g", plan.theta) + ", N " + std::to_string(plan.n) +
                       ", sigma " + fmt("%.6g", plan.sigma) + ", eta " + fmt("%.9g", plan.eta);
    if (!decay_verdict.empty()) line += ", decay verdict '" + decay_verdict + "'";
    ctx.note(line);

    if (!expected.empty() && expected != decay_verdict)
        throw PropertyFailure("decay verdict '" + decay_verdict + "' but config expected '" +
                              expected + "'");
}

void run_vanishing(RunContext& ctx) {
    require_object(ctx.cfg, "config",
                   {{"experiment", Kind::String, false},
                    {"coefficients", Kind::Object, false},
                    {"solution", Kind::Object, true},
                    {"center", Kind::Vector3, false},
                    {"radii", Kind::NumArray, true},
                    {"rule", Kind::Object, false},
                    {"expected_classification", Kind::String, false},
                    {"output_dir", Kind::String, false}});
    CoefficientPair coeffs = ctx.cfg.contains("coefficients")
                                 ? coefficients_of(ctx.cfg.at("coefficients"), "config.coefficients")
                                 : coefficients_constant(1.0, 1.0);
    DisplacementField u = solution_of(ctx.cfg.at("solution"), "config.solution", coeffs);
    std::vector<double> radii = num_list(ctx.cfg, "radii");
    ProductBallRule rule = rule_of(ctx.cfg, "rule", "config.rule", 6, 10, 20);

    VanishingProfile prof = vanishing_profile(u, vec3(ctx.cfg, "center", {}), radii, rule);

    json out = to_json(prof);
    out["experiment"] = ctx.name;
    std::vector<std::vector<double>> rows;
    PlotSeries series{"ball mass", {}, {}};
    for (std::size_t i = 0; i < prof.radii.size(); ++i) {
        rows.push_back({prof.radii[i], prof.masses[i]});
        series.x.push_back(prof.radii[i]);
        series.y.push_back(prof.masses[i]);
    }
    ctx.prepare_out();
    write_json_file(ctx.path("vanishing.json"), out);
    write_csv(ctx.path("vanishing_profile.csv"), {"radius", "mass"}, rows);
    write_svg_plot(ctx.path("vanishing_profile.svg"), "Ball mass vs radius", {series}, true,
                   true);
    ctx.finish({"vanishing.json", "vanishing_profile.csv", "vanishing_profile.svg"});
    ctx.note("slope " + fmt("%.4f", prof.slope) + ", classification '" + prof.classification +
             "'");

    std::string expected = str(ctx.cfg, "expected_classification", "");
    if (!expected.empty() && expected != prof.classification)
        throw PropertyFailure("classification '" + prof.classification +
                              "' but config expected '" + expected + "'");
}

void run_cauchy_stability(RunContext& ctx) {
    require_object(ctx.cfg, "config",
                   {{"experiment", Kind::String, false},
                    {"coefficients", Kind::Object, true},
                    {"solution", Kind::Object, true},
                    {"theta", Kind::Number, true},
                    {"r_out", Kind::Number, true},
                    {"s", Kind::Number, true},
                    {"zeta_list", Kind::NumArray, true},
                    {"cells", Kind::Integer, true},
                    {"beta_rule", Kind::Object, false},
                    {"seed", Kind::Integer, false},
                    {"require_holder", Kind::Boolean, false},
                    {"output_dir", Kind::String, false}});
    CoefficientPair coeffs = coefficients_of(ctx.cfg.at("coefficients"), "config.coefficients");
    DisplacementField u = solution_of(ctx.cfg.at("solution"), "config.solution", coeffs);
    double theta = req_num(ctx.cfg, "theta");
    double r_out = req_num(ctx.cfg, "r_out");
    double s = req_num(ctx.cfg, "s");
    std::vector<double> zetas = num_list(ctx.cfg, "zeta_list");
    auto cells = integer(ctx.cfg, "cells", 0);
    if (cells < 4) bad("config.cells", "need at least 4 cells across the unit length");
    std::uint64_t seed = ctx.resolve_seed(7);

    BetaRule rule;
    if (ctx.cfg.contains("beta_rule")) {
        const json& b = ctx.cfg.at("beta_rule");
        require_object(b, "config.beta_rule",
                       {{"beta_min", Kind::Number, false},
                        {"beta_max", Kind::Number, false},
                        {"count", Kind::Integer, false}});
        rule.beta_min = num(b, "beta_min", rule.beta_min);
        rule.beta_max = num(b, "beta_max", rule.beta_max);
        rule.count = static_cast<int>(integer(b, "count", rule.count));
    }

    double h = 1.0 / static_cast<double>(cells);
    auto n = static_cast<std::int64_t>(std::llround(r_out * static_cast<double>(cells)));
    std::int64_t half = n + 2;
    double lo = -static_cast<double>(half) * h;
    Grid3 grid({lo, lo, lo}, h, {2 * half + 1, 2 * half + 1, 2 * half + 1});

    StabilityReport rep = stability_experiment(coeffs, u, theta, r_out, s, zetas, grid, rule, seed);

    json out = to_json(rep);
    out["experiment"] = ctx.name;
    out["seed"] = seed;
    out["cells"] = cells;
    std::vector<std::vector<double>> rows;
    PlotSeries series{"l2(omega) error", {}, {}};
    for (std::size_t i = 0; i < rep.zeta_rel.size(); ++i) {
        rows.push_back({rep.zeta_rel[i], rep.zeta0[i], rep.betas[i], rep.errors[i]});
        series.x.push_back(rep.zeta0[i]);
        series.y.push_back(rep.errors[i]);
    }
    ctx.prepare_out();
    write_json_file(ctx.path("stability.json"), out);
    write_csv(ctx.path("stability.csv"), {"zeta_rel", "zeta0", "beta", "error"}, rows);
    write_svg_plot(ctx.path("stability.svg"), "Reconstruction error vs data perturbation",
                   {series}, true, true);
    ctx.finish({"stability.csv", "stability.json", "stability.svg"});
    ctx.note("eps_emp " + fmt("%.4f", rep.eps_emp) + ", verdict '" + rep.verdict + "'");

    if (flag(ctx.cfg, "require_holder", false) && !rep.holder_consistent)
        throw PropertyFailure("verdict '" + rep.verdict + "' (eps_emp " +
                              fmt("%.4f", rep.eps_emp) + ") but config demanded Hoelder-consistent");
}

void run_solver_convergence(RunContext& ctx) {
    require_object(ctx.cfg, "config",
                   {{"experiment", Kind::String, false},
                    {"coefficients", Kind::Object, true},
                    {"solution", Kind::Object, false},
                    {"box_lo", Kind::Vector3, false},
                    {"side", Kind::Number, false},
                    {"divisions", Kind::NumArray, false},
                    {"tol", Kind::Number, false},
                    {"ratio_bounds", Kind::NumArray, false},
                    {"output_dir", Kind::String, false}});
    CoefficientPair coeffs = coefficients_of(ctx.cfg.at("coefficients"), "config.coefficients");
    DisplacementField u = ctx.cfg.contains("solution")
                              ? solution_of(ctx.cfg.at("solution"), "config.solution", coeffs)
                              : default_cubic();
    std::vector<int> divisions{16, 32};
    if (ctx.cfg.contains("divisions")) {
        divisions.clear();
        for (const auto& e : ctx.cfg.at("divisions")) {
            if (!e.is_number_integer() && !e.is_number_unsigned())
                bad("config.divisions", "entries must be integers");
            divisions.push_back(e.get<int>());
        }
        if (divisions.empty()) bad("config.divisions", "need at least one entry");
    }
    double side = num(ctx.cfg, "side", 1.0);
    Vec3 lo = vec3(ctx.cfg, "box_lo", {});
    double tol = num(ctx.cfg, "tol", 1e-10);

    ConvergenceStudy study = manufactured_convergence(coeffs, u, lo, side, divisions, tol);

    json out = to_json(study);
    out["experiment"] = ctx.name;
    std::vector<std::vector<double>> rows;
    PlotSeries series{"l2 error", {}, {}};
    for (std::size_t i = 0; i < study.h_values.size(); ++i) {
        rows.push_back({study.h_values[i], study.l2_errors[i]});
        series.x.push_back(study.h_values[i]);
        series.y.push_back(study.l2_errors[i]);
    }
    ctx.prepare_out();
    write_json_file(ctx.path("convergence.json"), out);
    write_csv(ctx.path("convergence.csv"), {"h", "l2_error"}, rows);
    write_svg_plot(ctx.path("convergence.svg"), "Interior l2 error vs spacing", {series}, true,
                   true);
    ctx.finish({"convergence.csv", "convergence.json", "convergence.svg"});
    std::string ratios;
    for (double r : study.ratios) ratios += (ratios.empty() ? "" : ", ") + fmt("%.4g", r);
    ctx.note("error ratios per halving: " + (ratios.empty() ? std::string("n/a") : ratios));

    if (ctx.cfg.contains("ratio_bounds")) {
        std::vector<double> bounds = num_list(ctx.cfg, "ratio_bounds");
        if (bounds.size() != 2) bad("config.ratio_bounds", "expected [low, high]");
        for (double r : study.ratios)
            if (r < bounds[0] || r > bounds[1])
                throw PropertyFailure("error ratio " + fmt("%.4g", r) + " outside [" +
                                      fmt("%.4g", bounds[0]) + ", " + fmt("%.4g", bounds[1]) +
                                      "]");
    }
}

// ---- dispatch ----------------------------------------------------------------

using Runner = void (*)(RunContext&);

struct Subcommand {
    const char* name;
    const char* blurb;
    Runner run;
};

constexpr Subcommand kSubcommands[] = {
    {"ellipticity-check", "sample the coefficient floors on a ball", run_ellipticity},
    {"factorization-check", "factorization residuals on random polynomial fields",
     run_factorization},
    {"carleman-scan", "weighted Carleman sides across a tau list", run_carleman_scan},
    {"three-spheres", "ball-mass reports and the C(sigma) envelope", run_three_spheres},
    {"iteration-plan", "ball-chain bookkeeping with contraction and decay checks",
     run_iteration_plan},
    {"vanishing", "vanishing-order profile around a point", run_vanishing},
    {"cauchy-stability", "noise sweep for the annulus continuation problem",
     run_cauchy_stability},
    {"solver-convergence", "manufactured-solution grid convergence study",
     run_solver_convergence},
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"lamelab: numerical laboratory for the 3D Lame system"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    std::uint64_t seed = 0;
    bool quiet = false;
    for (const Subcommand& sc : kSubcommands) {
        CLI::App* sub = app.add_subcommand(sc.name, sc.blurb);
        sub->add_option("--config", config_path, "JSON experiment configuration")->required();
        sub->add_option("--out", out_dir, "output directory (overrides config output_dir)");
        sub->add_option("--seed", seed, "seed override");
        sub->add_flag("--quiet", quiet, "suppress the stdout summary");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int r = app.exit(e);
        return r == 0 ? 0 : 2;
    }

    CLI::App* chosen = app.get_subcommands().front();

    try {
        RunContext ctx;
        ctx.name = chosen->get_name();
        ctx.quiet = quiet;
        ctx.seed = seed;
        ctx.seed_set = chosen->count("--seed") > 0;

        std::ifstream in(config_path, std::ios::binary);
        if (!in) throw ConfigError("cannot read config file '" + config_path + "'");
        std::stringstream buf;
        buf << in.rdbuf();
        ctx.config_text = buf.str();
        try {
            ctx.cfg = json::parse(ctx.config_text);
        } catch (const json::parse_error& e) {
            throw ConfigError(std::string("config is not valid JSON: ") + e.what());
        }
        if (ctx.cfg.contains("experiment")) {
            if (!ctx.cfg.at("experiment").is_string() ||
                ctx.cfg.at("experiment").get<std::string>() != ctx.name)
                throw ConfigError("config.experiment does not name '" + ctx.name + "'");
        }
        ctx.out_dir = !out_dir.empty()
                          ? out_dir
                          : (ctx.cfg.is_object() ? str(ctx.cfg, "output_dir", ".") : ".");

        for (const Subcommand& sc : kSubcommands)
            if (ctx.name == sc.name) {
                sc.run(ctx);
                return 0;
            }
        std::fprintf(stderr, "lamelab: unknown subcommand '%s'\n", ctx.name.c_str());
        return 2;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "lamelab: config error: %s\n", e.what());
        return 2;
    } catch (const PreconditionError& e) {
        std::fprintf(stderr, "lamelab: validation error: %s\n", e.what());
        return 2;
    } catch (const SolverError& e) {
        std::fprintf(stderr, "lamelab: numerical failure: %s\n", e.what());
        return 3;
    } catch (const EvaluationError& e) {
        std::fprintf(stderr, "lamelab: numerical failure: %s\n", e.what());
        return 3;
    } catch (const OverflowError& e) {
        std::fprintf(stderr, "lamelab: numerical failure: %s\n", e.what());
        return 3;
    } catch (const PropertyFailure& e) {
        std::fprintf(stderr, "lamelab: property check failed: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "lamelab: error: %s\n", e.what());
        return 3;
    }
}
