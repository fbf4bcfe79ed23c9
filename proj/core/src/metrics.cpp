#include "cmsd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "cmsd/errors.hpp"

namespace cmsd::metrics {

Tokens tokenize(const std::string& text) {
  std::istringstream in(text);
  Tokens out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

double bleu1(std::span<const std::string> candidate, std::span<const std::string> reference) {
  if (reference.empty()) throw DomainError("bleu1: empty reference");
  if (candidate.empty()) return 0.0;
  std::map<std::string_view, std::size_t> ref_counts, cand_counts;
  for (const auto& w : reference) ++ref_counts[w];
  for (const auto& w : candidate) ++cand_counts[w];
  std::size_t clipped = 0;
  for (const auto& [w, n] : cand_counts) {
    auto it = ref_counts.find(w);
    if (it != ref_counts.end()) clipped += std::min(n, it->second);
  }
  const double c = static_cast<double>(candidate.size());
  const double r = static_cast<double>(reference.size());
  const double precision = static_cast<double>(clipped) / c;
  return precision * std::exp(std::min(0.0, 1.0 - r / c));
}

double mean_pairwise_bleu1(std::span<const Tokens> descriptions) {
  if (descriptions.size() < 2) throw DomainError("pairwise BLEU-1 needs at least two descriptions");
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < descriptions.size(); ++i) {
    for (std::size_t j = i + 1; j < descriptions.size(); ++j) {
      total += 0.5 * (bleu1(descriptions[i], descriptions[j]) + bleu1(descriptions[j], descriptions[i]));
      ++pairs;
    }
  }
  return total / static_cast<double>(pairs);
}

ConsistencyScore consistency_score(std::span<const BoxDescriptions> boxes) {
  ConsistencyScore s;
  double total = 0.0;
  for (const auto& box : boxes) {
    if (box.descriptions.size() < 2) continue;
    total += mean_pairwise_bleu1(box.descriptions);
    ++s.boxes;
  }
  if (s.boxes == 0) throw UndefinedScoreError("consistency score: no box has two or more descriptions");
  s.value = 100.0 * total / static_cast<double>(s.boxes);
  return s;
}

DiversityScore bbox_diversity(std::span<const std::vector<Tokens>> runs) {
  DiversityScore s;
  double total = 0.0;
  for (const auto& mention : runs) {
    if (mention.size() < 2) throw ConfigError("bbox diversity needs at least 2 runs per box");
    total += mean_pairwise_bleu1(mention);
    ++s.mentions;
  }
  if (s.mentions == 0) throw UndefinedScoreError("bbox diversity: no box mentions");
  s.value = 100.0 * total / static_cast<double>(s.mentions);
  return s;
}

double image_level_recall(std::span<const std::vector<Tokens>> generated,
                          std::span<const std::vector<Tokens>> ground_truth) {
  if (generated.size() != ground_truth.size()) throw DimensionError("image_level_recall: image counts differ");
  if (ground_truth.empty()) throw DomainError("image_level_recall: no images");
  double total = 0.0;
  for (std::size_t i = 0; i < ground_truth.size(); ++i) {
    std::set<std::string> truth, seen;
    for (const auto& cap : ground_truth[i]) truth.insert(cap.begin(), cap.end());
    if (truth.empty()) throw DomainError("image_level_recall: image without ground-truth words");
    for (const auto& cap : generated[i]) seen.insert(cap.begin(), cap.end());
    const auto hit = std::count_if(truth.begin(), truth.end(), [&](const auto& w) { return seen.count(w) > 0; });
    total += static_cast<double>(hit) / static_cast<double>(truth.size());
  }
  return 100.0 * total / static_cast<double>(ground_truth.size());
}

}  // namespace cmsd::metrics
