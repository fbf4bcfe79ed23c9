#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cmsd/decoder.hpp"
#include "cmsd/metrics.hpp"
#include "cmsd/training.hpp"

namespace cmsd::relcap {

using TokenId = std::size_t;

/// Part-of-speech classes predicted alongside every word.
enum class Pos { subj = 0, pred = 1, obj = 2 };
inline constexpr std::size_t kPosClasses = 3;

std::string_view to_string(Pos pos);

/// Every noun and adjective group holds this many synonyms. Index v of a
/// noun group pairs with index v of an adjective group, so a description
/// such as "pale desk" or "white table" uses one variant throughout.
inline constexpr std::size_t kVariants = 2;

/// Closed toy vocabulary: nouns and adjectives come in synonym groups,
/// predicates are single tokens.
class Vocabulary {
 public:
  static const Vocabulary& toy();

  std::size_t size() const { return words_.size(); }
  TokenId sos() const { return 0; }
  TokenId eos() const { return 1; }
  const std::string& word(TokenId id) const;
  TokenId id(std::string_view word) const;

  const std::vector<std::vector<TokenId>>& noun_groups() const { return nouns_; }
  const std::vector<std::vector<TokenId>>& adjective_groups() const { return adjectives_; }
  const std::vector<TokenId>& predicates() const { return predicates_; }

  std::string join(std::span<const TokenId> tokens) const;

 private:
  Vocabulary();
  TokenId add(std::string word);

  std::vector<std::string> words_;
  std::unordered_map<std::string, TokenId> index_;
  std::vector<std::vector<TokenId>> nouns_, adjectives_;
  std::vector<TokenId> predicates_;
};

/// Longest caption, EOS included.
inline constexpr std::size_t kMaxCaption = 8;

/// Caption words (no SOS/EOS) with one POS tag per word.
struct Caption {
  std::vector<TokenId> tokens;
  std::vector<Pos> pos;

  friend bool operator==(const Caption&, const Caption&) = default;
};

/// Words tagged `tag`, in order.
std::vector<TokenId> extract(const Caption& caption, Pos tag);

struct Region {
  std::size_t category = 0;   // noun group
  std::size_t attribute = 0;  // adjective group
  std::size_t variant = 0;    // this scene's way of referring to the region
  TokenId noun = 0;
  TokenId adjective = 0;
  std::vector<double> feature;
};

struct Relation {
  std::size_t subject = 0;
  std::size_t object = 0;
  TokenId predicate = 0;
  std::vector<double> feature;  // [subject view, object view, union view]
};

struct Scene {
  std::size_t id = 0;
  std::vector<Region> regions;
  std::vector<Relation> relations;
  std::vector<Caption> captions;  // original labels, one per relation
};

enum class LabelVariant { original, consistent };
std::string_view to_string(LabelVariant v);
LabelVariant parse_label_variant(std::string_view text);

struct SceneConfig {
  std::size_t regions = 8;
  std::size_t pairs = 20;
  double synonym_rate = 0.5;  // chance a mention redraws its variant uniformly
  std::size_t feature_dim = 16;
  double hint = 0.0;          // visual evidence for the scene's reference words
  double noise = 0.3;         // per-view feature noise
};

/// Seeded synthetic scene. Every region takes part in at least one relation
/// and relations are distinct ordered pairs.
Scene generate_scene(Rng& rng, std::size_t id, const SceneConfig& config);
std::vector<Scene> generate_corpus(std::size_t scenes, std::uint64_t seed, const SceneConfig& config);

/// Captions where every region is described by its modal description
/// within the scene; ties go to the lexicographically smallest text.
std::vector<Caption> make_consistent_labels(const Scene& scene);
std::vector<Caption> labels(const Scene& scene, LabelVariant variant);

/// Captions sharing a region are correlated (symmetric edges).
DecoderGraph scene_graph(const Scene& scene);

/// Where the fused context comes from while training with teacher forcing.
enum class FuseSource {
  prediction,    // embeddings of the words each decoder actually predicted
  ground_truth,  // embeddings of every decoder's ground-truth previous word
};
std::string_view to_string(FuseSource s);
FuseSource parse_fuse_source(std::string_view text);

struct RelcapConfig {
  std::size_t train_scenes = 200, val_scenes = 20, test_scenes = 200;
  SceneConfig scene;
  LabelVariant labels = LabelVariant::original;
  std::size_t embed = 32;
  std::size_t hidden = 64;
  double pos_weight = 0.1;  // lambda
  std::size_t epochs = 30;
  double momentum = 0.98;
  LrSchedule schedule{2e-2, 1e-6, 2, 0};
  double clip_norm = 5.0;
  DecodeMode mode = DecodeMode::consistent;
  FusionConfig fusion{FusionMode::full, 2};
  FuseSource fuse_source = FuseSource::prediction;
  std::uint64_t seed = 1;
};

RelcapConfig relcap_preset(std::string_view name);

struct Corpus {
  std::vector<Scene> train, val, test;
};

/// Splits drawn from disjoint seed streams of config.seed.
Corpus build_corpus(const RelcapConfig& config);

struct Generated {
  std::vector<Caption> captions;  // one per relation
};

enum class Decoding { greedy, sample };

/// One decoder per relation, all sharing parameters. Step 1 reads the pair's
/// visual features, step 2 the start token, later steps the previous word.
class RelcapModel {
 public:
  explicit RelcapModel(const RelcapConfig& config);

  struct Loss {
    Tensor total;
    Tensor caption;
    Tensor pos;
  };
  /// Teacher-forced multi-task loss on one scene.
  Loss loss(const Scene& scene, std::span<const Caption> targets) const;

  /// Captions every relation of `scene`; decoding of a caption stops at EOS
  /// or kMaxCaption tokens.
  Generated caption(const Scene& scene, Decoding decoding, Rng& rng) const;

  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }
  const RelcapConfig& config() const { return config_; }

 private:
  RelcapConfig config_;
  ParameterSet params_;
  Linear visual_;
  EmbeddingTable words_;
  LstmParams cell_;
  Linear word_head_, pos_head_;
  std::optional<FusionParams> fusion_;
};

/// `runs` captionings of a scene (greedy runs are identical).
std::vector<Generated> caption_scene(const RelcapModel& model, const Scene& scene, Decoding decoding,
                                     std::size_t runs, Rng& rng);

using EpochCallback = std::function<void(const RelcapModel&, const TrainProgress&)>;

/// SGD over scenes (one scene per step). Validation metric is the mean
/// teacher-forced loss on the validation scenes.
TrainProgress train_relcap(RelcapModel& model, const Corpus& corpus, std::optional<TrainProgress> progress = {},
                           const EpochCallback& on_epoch = {});

/// Mean teacher-forced loss over scenes.
double mean_loss(const RelcapModel& model, std::span<const Scene> scenes);

/// Region descriptions pulled from generated captions by their POS tags,
/// one group per region of the scene. Empty extractions are dropped and
/// counted in `dropped`.
std::vector<metrics::BoxDescriptions> box_descriptions(const Scene& scene, const Generated& generated,
                                                       std::size_t* dropped = nullptr);

struct RelcapScores {
  double consistency = 0.0;
  std::size_t consistency_boxes = 0;
  double bbox_diversity = 0.0;
  std::size_t diversity_mentions = 0;
  double image_recall = 0.0;
  std::size_t dropped_descriptions = 0;
};

/// Consistency and image-level recall from greedy captions; BBox diversity
/// from `runs` sampled captionings per scene.
RelcapScores evaluate(const RelcapModel& model, std::span<const Scene> scenes, std::size_t runs, std::uint64_t seed);

}  // namespace cmsd::relcap
