#include "lamelab/report_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "lamelab/version.hpp"

namespace lamelab {

namespace {

using nlohmann::json;

json vec_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

std::string csv_quote(const std::string& cell) {
    if (cell.find_first_of(",\"\r\n") == std::string::npos) return cell;
    std::string out = "\"";
    for (char ch : cell) {
        out += ch;
        if (ch == '"') out += '"';
    }
    out += '"';
    return out;
}

std::string tick_label(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string px(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

} // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string hex64(std::uint64_t value) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

std::string format_double(double v) {
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw EvaluationError("write_text_file: cannot open " + path);
    out << text;
    if (!out) throw EvaluationError("write_text_file: short write to " + path);
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
    std::string text;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i) text += ',';
        text += csv_quote(header[i]);
    }
    text += "\r\n";
    for (const auto& row : rows) {
        if (row.size() != header.size())
            throw PreconditionError("write_csv: row width does not match the header");
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) text += ',';
            text += format_double(row[i]);
        }
        text += "\r\n";
    }
    write_text_file(path, text);
}

void write_json_file(const std::string& path, const json& j) {
    write_text_file(path, j.dump(2) + "\n");
}

void write_svg_plot(const std::string& path, const std::string& title,
                    const std::vector<PlotSeries>& series, bool log_x, bool log_y) {
    constexpr double width = 640, height = 440;
    constexpr double left = 72, right = 620, top = 44, bottom = 392;
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c",
                                    "#9467bd", "#ff7f0e", "#8c564b"};

    struct Pt {
        double x, y;
    };
    std::vector<std::vector<Pt>> lines;
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    for (const auto& s : series) {
        if (s.x.size() != s.y.size())
            throw PreconditionError("write_svg_plot: series x/y length mismatch");
        std::vector<Pt> line;
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            double x = s.x[i], y = s.y[i];
            if (log_x) {
                if (!(x > 0.0)) continue;
                x = std::log10(x);
            }
            if (log_y) {
                if (!(y > 0.0)) continue;
                y = std::log10(y);
            }
            xmin = std::min(xmin, x);
            xmax = std::max(xmax, x);
            ymin = std::min(ymin, y);
            ymax = std::max(ymax, y);
            line.push_back({x, y});
        }
        lines.push_back(std::move(line));
    }
    if (!(xmin <= xmax)) throw PreconditionError("write_svg_plot: no plottable points");
    if (xmax == xmin) {
        xmin -= 0.5;
        xmax += 0.5;
    }
    if (ymax == ymin) {
        ymin -= 0.5;
        ymax += 0.5;
    }
    auto sx = [&](double x) { return left + (x - xmin) / (xmax - xmin) * (right - left); };
    auto sy = [&](double y) { return bottom - (y - ymin) / (ymax - ymin) * (bottom - top); };

    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" + px(width) +
           "\" height=\"" + px(height) + "\" viewBox=\"0 0 " + px(width) + " " + px(height) +
           "\">\n";
    svg += "<rect x=\"0\" y=\"0\" width=\"" + px(width) + "\" height=\"" + px(height) +
           "\" fill=\"white\"/>\n";
    svg += "<text x=\"" + px(0.5 * width) + "\" y=\"24\" font-family=\"sans-serif\" font-size=\"15\""
           " text-anchor=\"middle\">" + title + "</text>\n";
    svg += "<rect x=\"" + px(left) + "\" y=\"" + px(top) + "\" width=\"" + px(right - left) +
           "\" height=\"" + px(bottom - top) + "\" fill=\"none\" stroke=\"#333333\"/>\n";

    constexpr int n_ticks = 5;
    for (int t = 0; t < n_ticks; ++t) {
        double f = static_cast<double>(t) / (n_ticks - 1);
        double xv = xmin + f * (xmax - xmin);
        double yv = ymin + f * (ymax - ymin);
        double xp = sx(xv), yp = sy(yv);
        svg += "<line x1=\"" + px(xp) + "\" y1=\"" + px(bottom) + "\" x2=\"" + px(xp) + "\" y2=\"" +
               px(bottom + 5) + "\" stroke=\"#333333\"/>\n";
        svg += "<text x=\"" + px(xp) + "\" y=\"" + px(bottom + 20) +
               "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">" +
               tick_label(log_x ? std::pow(10.0, xv) : xv) + "</text>\n";
        svg += "<line x1=\"" + px(left - 5) + "\" y1=\"" + px(yp) + "\" x2=\"" + px(left) +
               "\" y2=\"" + px(yp) + "\" stroke=\"#333333\"/>\n";
        svg += "<text x=\"" + px(left - 8) + "\" y=\"" + px(yp + 4) +
               "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">" +
               tick_label(log_y ? std::pow(10.0, yv) : yv) + "</text>\n";
    }

    for (std::size_t s = 0; s < lines.size(); ++s) {
        const char* color = palette[s % (sizeof palette / sizeof palette[0])];
        if (lines[s].size() >= 2) {
            svg += "<polyline fill=\"none\" stroke=\"";
            svg += color;
            svg += "\" stroke-width=\"1.5\" points=\"";
            for (const Pt& p : lines[s]) svg += px(sx(p.x)) + "," + px(sy(p.y)) + " ";
            svg += "\"/>\n";
        }
        for (const Pt& p : lines[s])
            svg += "<circle cx=\"" + px(sx(p.x)) + "\" cy=\"" + px(sy(p.y)) +
                   "\" r=\"2.5\" fill=\"" + color + "\"/>\n";
        double ly = top + 16 + 16 * static_cast<double>(s);
        svg += "<line x1=\"" + px(left + 10) + "\" y1=\"" + px(ly - 4) + "\" x2=\"" +
               px(left + 34) + "\" y2=\"" + px(ly - 4) + "\" stroke=\"";
        svg += color;
        svg += "\" stroke-width=\"1.5\"/>\n";
        svg += "<text x=\"" + px(left + 40) + "\" y=\"" + px(ly) +
               "\" font-family=\"sans-serif\" font-size=\"12\">" + series[s].label + "</text>\n";
    }
    svg += "</svg>\n";
    write_text_file(path, svg);
}

json to_json(const ThreeSpheresReport& rep) {
    json j{{"n1", rep.n1}, {"n2", rep.n2}, {"nR", rep.nR}, {"degenerate", rep.degenerate}};
    if (!rep.degenerate) j["sigma_star"] = rep.sigma_star;
    return j;
}

json to_json(const SigmaCurve& curve) {
    json sig = json::array(), c = json::array();
    for (const auto& p : curve.points) {
        sig.push_back(p.sigma);
        c.push_back(p.c);
    }
    return json{{"sigma", sig},
                {"C", c},
                {"min_sigma_star", curve.min_sigma_star},
                {"C_at_min_sigma_star", curve.c_at_min_sigma}};
}

json to_json(const IterationPlan& plan) {
    return json{{"R1", plan.r1},         {"R2", plan.r2},     {"R_out", plan.r_out},
                {"eps", plan.eps},       {"s", plan.s},       {"R0", plan.r0},
                {"theta", plan.theta},   {"theta1", plan.theta1}, {"theta2", plan.theta2},
                {"a", plan.a},           {"r", plan.r},       {"N", plan.n},
                {"sigma", plan.sigma},   {"eta", plan.eta},   {"inv_ln_a", plan.inv_ln_a}};
}

json to_json(const ThetaContraction& tc) {
    return json{{"theta", tc.theta},
                {"theta1", tc.theta1},
                {"theta2", tc.theta2},
                {"a", tc.a},
                {"inv_ln_a", tc.inv_ln_a}};
}

json to_json(const VanishingProfile& prof) {
    json j{{"radii", prof.radii},
           {"masses", prof.masses},
           {"slope", prof.slope},
           {"classification", prof.classification}};
    if (prof.exp_fit_valid) {
        j["exp_c"] = prof.exp_c;
        j["exp_eps"] = prof.exp_eps;
    }
    if (prof.poly_order >= 0) j["poly_order"] = prof.poly_order;
    return j;
}

json to_json(const DecayLimitReport& rep) {
    return json{{"eps", rep.eps},
                {"inv_ln_a", rep.inv_ln_a},
                {"C_tilde", rep.c_tilde},
                {"R1", rep.r1_list},
                {"values", rep.values},
                {"decay_factors", rep.decay_factors},
                {"verdict", rep.verdict}};
}

json to_json(const StabilityReport& rep) {
    return json{{"zeta_rel", rep.zeta_rel},
                {"zeta0", rep.zeta0},
                {"errors", rep.errors},
                {"betas", rep.betas},
                {"M0", rep.m0},
                {"eps_emp", rep.eps_emp},
                {"omega", json{{"r_inner", rep.theta}, {"r_outer", rep.theta1}}},
                {"holder_consistent", rep.holder_consistent},
                {"verdict", rep.verdict}};
}

json to_json(const EllipticityReport& rep) {
    return json{{"min_mu", rep.min_mu},
                {"min_2mu_lambda", rep.min_2mu_lambda},
                {"worst_mu_point", vec_json(rep.worst_mu_point)},
                {"worst_2mu_lambda_point", vec_json(rep.worst_2mu_lambda_point)},
                {"samples", rep.samples},
                {"pass", rep.pass}};
}

json to_json(const DerivativeConsistencyReport& rep) {
    return json{{"max_jacobian_discrepancy", rep.max_jacobian_discrepancy},
                {"max_hessian_discrepancy", rep.max_hessian_discrepancy},
                {"worst_point", vec_json(rep.worst_point)}};
}

json to_json(const FactorizationReport& rep) {
    return json{{"max_vector_residual", rep.max_vector_residual},
                {"max_second_component", rep.max_second_component}};
}

json to_json(const ConvergenceStudy& study) {
    return json{{"h", study.h_values}, {"l2_error", study.l2_errors}, {"ratio", study.ratios}};
}

json to_json(const std::vector<CarlemanScanRow>& scan) {
    json rows = json::array();
    for (const auto& r : scan)
        rows.push_back(json{{"tau", r.tau},
                            {"t1", r.t1},
                            {"t2", r.t2},
                            {"t3", r.t3},
                            {"rhs", r.rhs},
                            {"ratio", r.ratio}});
    return rows;
}

void write_manifest(const std::string& dir, const std::string& experiment,
                    const std::string& config_text, const std::vector<std::string>& outputs) {
    std::vector<std::string> sorted = outputs;
    std::sort(sorted.begin(), sorted.end());
    json j{{"experiment", experiment},
           {"config_hash", "fnv1a64:" + hex64(fnv1a64(config_text))},
           {"artifact_version", artifact_version()},
           {"outputs", sorted}};
    write_json_file(dir + "/manifest.json", j);
}

} // namespace lamelab
