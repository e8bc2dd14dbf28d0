#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "lamelab/carleman.hpp"
#include "lamelab/cauchy.hpp"
#include "lamelab/fd_solver.hpp"
#include "lamelab/fields.hpp"
#include "lamelab/lame_operator.hpp"
#include "lamelab/three_spheres.hpp"

namespace lamelab {

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t value);

/// Shortest round-trip decimal form.
std::string format_double(double v);

/// RFC-4180: CRLF records, cells quoted only when they contain a comma,
/// quote, or line break.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

struct PlotSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

/// Minimal SVG 1.1 line chart; log axes drop nonpositive points.
void write_svg_plot(const std::string& path, const std::string& title,
                    const std::vector<PlotSeries>& series, bool log_x = false,
                    bool log_y = false);

void write_text_file(const std::string& path, const std::string& text);

/// 2-space indent plus trailing newline, so repeated runs diff cleanly.
void write_json_file(const std::string& path, const nlohmann::json& j);

nlohmann::json to_json(const ThreeSpheresReport& rep);
nlohmann::json to_json(const SigmaCurve& curve);
nlohmann::json to_json(const IterationPlan& plan);
nlohmann::json to_json(const ThetaContraction& tc);
nlohmann::json to_json(const VanishingProfile& prof);
nlohmann::json to_json(const DecayLimitReport& rep);
nlohmann::json to_json(const StabilityReport& rep);
nlohmann::json to_json(const EllipticityReport& rep);
nlohmann::json to_json(const DerivativeConsistencyReport& rep);
nlohmann::json to_json(const FactorizationReport& rep);
nlohmann::json to_json(const ConvergenceStudy& study);
nlohmann::json to_json(const std::vector<CarlemanScanRow>& scan);

/// manifest.json next to the outputs: experiment name, FNV-1a hash of the
/// config text, artifact version, output file list.  No timestamps.
void write_manifest(const std::string& dir, const std::string& experiment,
                    const std::string& config_text, const std::vector<std::string>& outputs);

} // namespace lamelab
