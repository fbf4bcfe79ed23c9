#pragma once

// File formats. Every format starts with a version header; see
// docs/formats.md.

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cmsd/relcap.hpp"
#include "cmsd/synth.hpp"

namespace cmsd::io {

using nlohmann::json;
namespace fs = std::filesystem;

json to_json(const synth::SynthConfig& c);
synth::SynthConfig synth_config_from_json(const json& j);
json to_json(const relcap::RelcapConfig& c);
relcap::RelcapConfig relcap_config_from_json(const json& j);

/// 16 hex digits of FNV-1a over the compact dump of `config`.
std::string config_hash(const json& config);

/// Writes through a temporary sibling and renames it into place.
void write_text(const fs::path& path, const std::string& text);
std::string read_text(const fs::path& path);

// Synthetic splits: "cmsd-synth v1 <count>" then one line per pair with
// a b c d y1[16] y2[16] at full double precision.
std::string format_synth(std::span<const synth::PairedSequences> pairs);
std::vector<synth::PairedSequences> parse_synth(const std::string& text);

// Scenes and labels: JSON lines with a header object first.
std::string format_scenes(std::span<const relcap::Scene> scenes);
/// Scenes without captions; attach them with attach_labels.
std::vector<relcap::Scene> parse_scenes(const std::string& text);
std::string format_labels(std::span<const std::vector<relcap::Caption>> captions);
std::vector<std::vector<relcap::Caption>> parse_labels(const std::string& text);
void attach_labels(std::vector<relcap::Scene>& scenes, std::vector<std::vector<relcap::Caption>> captions);

json to_json(const ParameterSet& params);
/// Copies values and momentum into matching parameters; names and shapes must agree.
void load(ParameterSet& params, const json& j);

json to_json(const TrainProgress& p);
TrainProgress progress_from_json(const json& j);

json to_json(const synth::Normalizer& n);
synth::Normalizer normalizer_from_json(const json& j);

struct ReportRow {
  std::string metric;
  double value = 0.0;
  std::size_t n_items = 0;
};

/// CSV: header "metric,value,n_items,config_hash", one row per metric.
std::string format_report(std::span<const ReportRow> rows, const std::string& hash);
std::vector<ReportRow> parse_report(const std::string& text);

}  // namespace cmsd::io
