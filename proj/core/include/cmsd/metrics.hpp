#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace cmsd::metrics {

using Tokens = std::vector<std::string>;

/// Whitespace tokenisation.
Tokens tokenize(const std::string& text);

/// Clipped unigram precision times exp(min(0, 1 - |ref| / |cand|)).
/// Empty candidate scores 0; empty reference is a DomainError.
double bleu1(std::span<const std::string> candidate, std::span<const std::string> reference);

/// Mean over unordered pairs {a, b} of (bleu1(a|b) + bleu1(b|a)) / 2.
/// Needs at least two descriptions.
double mean_pairwise_bleu1(std::span<const Tokens> descriptions);

/// Descriptions of one bounding box gathered from a single image.
struct BoxDescriptions {
  std::vector<Tokens> descriptions;
};

/// Corpus consistency: boxes with at least two descriptions contribute their
/// mean pairwise BLEU-1; the mean over those boxes is scaled to [0, 100].
/// Throws UndefinedScoreError when no box qualifies.
struct ConsistencyScore {
  double value = 0.0;
  std::size_t boxes = 0;
};
ConsistencyScore consistency_score(std::span<const BoxDescriptions> boxes);

/// Diversity across runs: `runs[b]` holds one description per run for box
/// mention b. Mean pairwise BLEU-1 per mention, averaged and scaled to
/// [0, 100]; lower means more diverse. Needs R >= 2 (ConfigError).
struct DiversityScore {
  double value = 0.0;
  std::size_t mentions = 0;
};
DiversityScore bbox_diversity(std::span<const std::vector<Tokens>> runs);

/// Per image, the share of distinct ground-truth words that appear anywhere in
/// the generated captions; averaged over images and scaled to [0, 100].
/// `generated[i]` and `ground_truth[i]` list image i's captions.
double image_level_recall(std::span<const std::vector<Tokens>> generated,
                          std::span<const std::vector<Tokens>> ground_truth);

}  // namespace cmsd::metrics
