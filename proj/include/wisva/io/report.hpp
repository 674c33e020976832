#pragma once

#include <filesystem>
#include <sstream>
#include <string>

#include <json.hpp>

#include "wisva/eval.hpp"
#include "wisva/hash.hpp"
#include "wisva/io/binary.hpp"
#include "wisva/io/png.hpp"

namespace wisva::io {

/// `<scenario>_seed<seed>_<first 8 hex digits of the config hash>`.
inline std::string report_dir_name(Scenario s, std::uint64_t seed, std::uint64_t cfg_hash) {
  return std::string(to_string(s)) + "_seed" + std::to_string(seed) + "_" + hex64(cfg_hash).substr(0, 8);
}

inline std::string grid_csv(const GridD& g) {
  std::ostringstream os;
  os.precision(9);
  for (int i = 0; i < g.rows(); ++i) {
    for (int j = 0; j < g.cols(); ++j) os << (j ? "," : "") << g(i, j);
    os << '\n';
  }
  return os.str();
}

/// Writes report.json, metrics.csv and one PNG per retained error map into
/// `<base>/<report_dir_name>`; returns that directory.
inline std::filesystem::path write_report(EvalReport& rep, const std::filesystem::path& base,
                                          std::uint64_t cfg_hash, const nlohmann::json& provenance = {}) {
  namespace fs = std::filesystem;
  const fs::path dir = base / report_dir_name(rep.scenario, rep.seed, cfg_hash);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create report directory '" + dir.string() + "': " + ec.message());

  double hi = 0.0;
  for (const auto& m : rep.maps) hi = std::max(hi, grid_max(m.values));
  if (!(hi > 0.0)) hi = 1.0;
  for (const auto& m : rep.maps) {
    const std::string file = "error_" + m.model + "_" + m.label + ".png";
    export_heatmap_png(m.values, 0.0, hi, (dir / file).string());
    for (auto& r : rep.models)
      if (r.name == m.model) r.error_map_paths.push_back(file);
  }

  nlohmann::json models = nlohmann::json::array();
  std::ostringstream csv;
  csv.precision(9);
  csv << "model,mae_db,max_pixel_error_db,samples\n";
  for (const auto& r : rep.models) {
    models.push_back({{"name", r.name},
                      {"mae_db", r.mae_db},
                      {"max_pixel_error_db", r.max_pixel_error_db},
                      {"samples", r.samples},
                      {"error_maps", r.error_map_paths}});
    csv << r.name << ',' << r.mae_db << ',' << r.max_pixel_error_db << ',' << r.samples << '\n';
  }
  nlohmann::json j{{"scenario", to_string(rep.scenario)},
                   {"seed", rep.seed},
                   {"config_hash", hex64(cfg_hash)},
                   {"error_map_range_db", {0.0, hi}},
                   {"models", models},
                   {"details", rep.details},
                   {"provenance", provenance}};
  try {
    j["config"] = nlohmann::json::parse(rep.config_json);
  } catch (const nlohmann::json::exception&) {
    j["config"] = rep.config_json;
  }
  write_text((dir / "report.json").string(), j.dump(2) + "\n");
  write_text((dir / "metrics.csv").string(), csv.str());
  return dir;
}

}  // namespace wisva::io
