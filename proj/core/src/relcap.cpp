#include "cmsd/relcap.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "cmsd/errors.hpp"
#include "cmsd/ops.hpp"

namespace cmsd::relcap {

std::string_view to_string(Pos pos) {
  switch (pos) {
    case Pos::subj: return "SUBJ";
    case Pos::pred: return "PRED";
    case Pos::obj: return "OBJ";
  }
  return "?";
}

std::string_view to_string(LabelVariant v) { return v == LabelVariant::original ? "original" : "consistent"; }

LabelVariant parse_label_variant(std::string_view text) {
  if (text == "original") return LabelVariant::original;
  if (text == "consistent") return LabelVariant::consistent;
  throw ConfigError("unknown label set '" + std::string(text) + "'");
}

std::string_view to_string(FuseSource s) { return s == FuseSource::prediction ? "prediction" : "ground_truth"; }

FuseSource parse_fuse_source(std::string_view text) {
  if (text == "prediction") return FuseSource::prediction;
  if (text == "ground_truth") return FuseSource::ground_truth;
  throw ConfigError("unknown fuse source '" + std::string(text) + "'");
}

Vocabulary::Vocabulary() {
  add("<sos>");
  add("<eos>");
  const std::vector<std::vector<std::string>> nouns = {
      {"table", "desk"},   {"man", "guy"},      {"woman", "lady"},    {"car", "automobile"}, {"dog", "puppy"},
      {"tree", "plant"},   {"shirt", "top"},    {"building", "house"}, {"cup", "mug"},       {"bike", "bicycle"},
      {"sign", "placard"}, {"road", "street"},  {"hat", "cap"},       {"bag", "purse"},      {"couch", "sofa"},
      {"rock", "stone"},   {"boat", "ship"},    {"phone", "cellphone"}};
  const std::vector<std::vector<std::string>> adjectives = {
      {"white", "pale"}, {"red", "crimson"},  {"big", "large"},   {"small", "little"}, {"black", "dark"},
      {"old", "worn"},   {"wooden", "timber"}, {"green", "leafy"}, {"shiny", "glossy"}, {"tall", "high"}};
  for (const auto& group : nouns) {
    nouns_.emplace_back();
    for (const auto& w : group) nouns_.back().push_back(add(w));
  }
  for (const auto& group : adjectives) {
    adjectives_.emplace_back();
    for (const auto& w : group) adjectives_.back().push_back(add(w));
  }
  for (const char* w : {"on", "near", "behind", "under", "holding", "wearing", "beside", "above", "in", "with"})
    predicates_.push_back(add(w));
}

TokenId Vocabulary::add(std::string word) {
  const TokenId id = words_.size();
  index_.emplace(word, id);
  words_.push_back(std::move(word));
  return id;
}

const Vocabulary& Vocabulary::toy() {
  static const Vocabulary vocab;
  return vocab;
}

const std::string& Vocabulary::word(TokenId id) const {
  if (id >= words_.size()) throw IndexError("token id " + std::to_string(id) + " outside vocabulary");
  return words_[id];
}

TokenId Vocabulary::id(std::string_view word) const {
  auto it = index_.find(std::string(word));
  if (it == index_.end()) throw IndexError("word '" + std::string(word) + "' not in vocabulary");
  return it->second;
}

std::string Vocabulary::join(std::span<const TokenId> tokens) const {
  std::string out;
  for (auto t : tokens) {
    if (!out.empty()) out += ' ';
    out += word(t);
  }
  return out;
}

std::vector<TokenId> extract(const Caption& caption, Pos tag) {
  if (caption.pos.size() != caption.tokens.size()) throw DimensionError("caption has mismatched POS tags");
  std::vector<TokenId> out;
  for (std::size_t i = 0; i < caption.tokens.size(); ++i)
    if (caption.pos[i] == tag) out.push_back(caption.tokens[i]);
  return out;
}

namespace {

// Fixed visual prototypes shared by every scene.
struct World {
  std::vector<std::vector<double>> category, attribute, token;

  explicit World(std::size_t dim) {
    const auto& v = Vocabulary::toy();
    Rng rng(0x5ce7e);
    std::normal_distribution<double> n(0.0, 1.0);
    auto draw = [&] {
      std::vector<double> x(dim);
      for (auto& e : x) e = n(rng);
      return x;
    };
    for (std::size_t i = 0; i < v.noun_groups().size(); ++i) category.push_back(draw());
    for (std::size_t i = 0; i < v.adjective_groups().size(); ++i) attribute.push_back(draw());
    for (std::size_t i = 0; i < v.size(); ++i) token.push_back(draw());
  }

  static const World& of(std::size_t dim) {
    static std::map<std::size_t, World> worlds;
    auto it = worlds.find(dim);
    if (it == worlds.end()) it = worlds.emplace(dim, World(dim)).first;
    return it->second;
  }
};

template <typename T>
const T& pick(const std::vector<T>& items, Rng& rng) {
  std::uniform_int_distribution<std::size_t> u(0, items.size() - 1);
  return items[u(rng)];
}

}  // namespace

Scene generate_scene(Rng& rng, std::size_t id, const SceneConfig& config) {
  const std::size_t r = config.regions;
  if (r < 2) throw ConfigError("scene needs at least 2 regions");
  if (config.pairs < (r + 1) / 2 || config.pairs > r * (r - 1)) {
    throw ConfigError("cannot cover " + std::to_string(r) + " regions with " + std::to_string(config.pairs) +
                      " distinct pairs");
  }
  if (config.synonym_rate < 0.0 || config.synonym_rate > 1.0) throw ConfigError("synonym_rate must lie in [0,1]");
  if (config.feature_dim == 0) throw ConfigError("feature_dim must be positive");
  const auto& vocab = Vocabulary::toy();
  const auto& world = World::of(config.feature_dim);
  std::normal_distribution<double> noise(0.0, config.noise);
  std::uniform_int_distribution<std::size_t> category(0, vocab.noun_groups().size() - 1);
  std::uniform_int_distribution<std::size_t> attribute(0, vocab.adjective_groups().size() - 1);
  std::uniform_int_distribution<std::size_t> variant(0, kVariants - 1);

  Scene scene;
  scene.id = id;
  for (std::size_t i = 0; i < r; ++i) {
    Region reg;
    reg.category = category(rng);
    reg.attribute = attribute(rng);
    reg.variant = variant(rng);
    reg.noun = vocab.noun_groups()[reg.category][reg.variant];
    reg.adjective = vocab.adjective_groups()[reg.attribute][reg.variant];
    reg.feature.resize(config.feature_dim);
    for (std::size_t k = 0; k < config.feature_dim; ++k) {
      reg.feature[k] = world.category[reg.category][k] + world.attribute[reg.attribute][k] +
                       config.hint * (world.token[reg.noun][k] + world.token[reg.adjective][k]);
    }
    scene.regions.push_back(std::move(reg));
  }

  std::set<std::pair<std::size_t, std::size_t>> used;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<bool> covered(r, false);
  std::uniform_int_distribution<std::size_t> any(0, r - 1);
  auto push = [&](std::size_t s, std::size_t o) {
    if (s == o || !used.insert({s, o}).second) return false;
    pairs.emplace_back(s, o);
    covered[s] = covered[o] = true;
    return true;
  };
  for (std::size_t i = 0; i < r; ++i) {
    if (covered[i]) continue;
    // Partner among uncovered regions first so small pair budgets still cover everything.
    std::vector<std::size_t> open;
    for (std::size_t j = 0; j < r; ++j)
      if (j != i && !covered[j]) open.push_back(j);
    std::size_t j = open.empty() ? (i + 1 + any(rng) % (r - 1)) % r : pick(open, rng);
    const bool flip = std::bernoulli_distribution(0.5)(rng);
    push(flip ? j : i, flip ? i : j);
  }
  while (pairs.size() < config.pairs) push(any(rng), any(rng));
  std::shuffle(pairs.begin(), pairs.end(), rng);

  std::bernoulli_distribution redraw(config.synonym_rate);
  auto mention = [&](const Region& reg, Pos tag, Caption& cap) {
    const std::size_t v = redraw(rng) ? variant(rng) : reg.variant;
    cap.tokens.insert(cap.tokens.end(), {vocab.adjective_groups()[reg.attribute][v], vocab.noun_groups()[reg.category][v]});
    cap.pos.insert(cap.pos.end(), {tag, tag});
  };
  for (auto [s, o] : pairs) {
    Relation rel;
    rel.subject = s;
    rel.object = o;
    rel.predicate = pick(vocab.predicates(), rng);
    const std::size_t f = config.feature_dim;
    rel.feature.resize(3 * f);
    for (std::size_t k = 0; k < f; ++k) {
      rel.feature[k] = scene.regions[s].feature[k] + noise(rng);
      rel.feature[f + k] = scene.regions[o].feature[k] + noise(rng);
      rel.feature[2 * f + k] = world.token[rel.predicate][k] + noise(rng);
    }
    Caption cap;
    mention(scene.regions[s], Pos::subj, cap);
    cap.tokens.push_back(rel.predicate);
    cap.pos.push_back(Pos::pred);
    mention(scene.regions[o], Pos::obj, cap);
    scene.relations.push_back(std::move(rel));
    scene.captions.push_back(std::move(cap));
  }
  return scene;
}

std::vector<Scene> generate_corpus(std::size_t scenes, std::uint64_t seed, const SceneConfig& config) {
  std::vector<Scene> out;
  out.reserve(scenes);
  for (std::size_t i = 0; i < scenes; ++i) {
    auto rng = stream_rng(seed, i);
    out.push_back(generate_scene(rng, i, config));
  }
  return out;
}

std::vector<Caption> make_consistent_labels(const Scene& scene) {
  const auto& vocab = Vocabulary::toy();
  // region -> description text -> (count, tokens)
  std::vector<std::map<std::string, std::pair<std::size_t, std::vector<TokenId>>>> seen(scene.regions.size());
  for (std::size_t i = 0; i < scene.relations.size(); ++i) {
    const auto& rel = scene.relations[i];
    for (auto [region, tag] : {std::pair{rel.subject, Pos::subj}, std::pair{rel.object, Pos::obj}}) {
      auto words = extract(scene.captions.at(i), tag);
      auto& slot = seen[region][vocab.join(words)];
      ++slot.first;
      slot.second = std::move(words);
    }
  }
  std::vector<std::vector<TokenId>> modal(scene.regions.size());
  for (std::size_t r = 0; r < seen.size(); ++r) {
    std::size_t best = 0;
    for (const auto& [text, entry] : seen[r]) {  // ascending text, so ties keep the smallest
      if (entry.first > best) {
        best = entry.first;
        modal[r] = entry.second;
      }
    }
  }
  std::vector<Caption> out;
  for (std::size_t i = 0; i < scene.relations.size(); ++i) {
    const auto& rel = scene.relations[i];
    const auto& cap = scene.captions[i];
    Caption c;
    const auto& subj = modal[rel.subject];
    const auto& obj = modal[rel.object];
    c.tokens.insert(c.tokens.end(), subj.begin(), subj.end());
    c.pos.insert(c.pos.end(), subj.size(), Pos::subj);
    for (std::size_t k = 0; k < cap.tokens.size(); ++k) {
      if (cap.pos[k] != Pos::pred) continue;
      c.tokens.push_back(cap.tokens[k]);
      c.pos.push_back(Pos::pred);
    }
    c.tokens.insert(c.tokens.end(), obj.begin(), obj.end());
    c.pos.insert(c.pos.end(), obj.size(), Pos::obj);
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<Caption> labels(const Scene& scene, LabelVariant variant) {
  return variant == LabelVariant::original ? scene.captions : make_consistent_labels(scene);
}

DecoderGraph scene_graph(const Scene& scene) {
  std::vector<Correlation> links;
  const auto& rel = scene.relations;
  for (std::size_t i = 0; i < rel.size(); ++i) {
    for (std::size_t j = i + 1; j < rel.size(); ++j) {
      const bool shared = rel[i].subject == rel[j].subject || rel[i].subject == rel[j].object ||
                          rel[i].object == rel[j].subject || rel[i].object == rel[j].object;
      if (shared) links.push_back({i, j});
    }
  }
  return build_adjacency(links, rel.size());
}

RelcapConfig relcap_preset(std::string_view name) {
  RelcapConfig c;
  if (name == "desk") return c;
  if (name == "paper") {
    c.embed = 512;
    c.hidden = 512;
    c.scene.feature_dim = 512;
    c.schedule = {1e-3, 1e-6, 0, 2};
    return c;
  }
  throw ConfigError("unknown relcap preset '" + std::string(name) + "'");
}

Corpus build_corpus(const RelcapConfig& config) {
  Corpus c;
  c.train = generate_corpus(config.train_scenes, config.seed * 3 + 0, config.scene);
  c.val = generate_corpus(config.val_scenes, config.seed * 3 + 1, config.scene);
  c.test = generate_corpus(config.test_scenes, config.seed * 3 + 2, config.scene);
  return c;
}

RelcapModel::RelcapModel(const RelcapConfig& config) : config_(config) {
  if (config.embed == 0 || config.hidden == 0) throw ConfigError("relcap: embed and hidden sizes must be positive");
  if (config.pos_weight < 0) throw ConfigError("relcap: POS loss weight must be non-negative");
  const auto& vocab = Vocabulary::toy();
  auto rng = stream_rng(config.seed, 1);
  visual_ = make_linear(params_, "visual", 3 * config.scene.feature_dim, config.embed, rng);
  words_ = make_embedding(params_, "words", vocab.size(), config.embed, rng);
  cell_ = make_lstm(params_, "lstm", recurrent_input_dim(config.mode, config.embed), config.hidden, rng);
  word_head_ = make_linear(params_, "word_head", config.hidden, vocab.size(), rng);
  pos_head_ = make_linear(params_, "pos_head", config.hidden, kPosClasses, rng);
  if (config.mode == DecodeMode::consistent && config.fusion.mode != FusionMode::no_gnn) {
    fusion_ = make_fusion(params_, "fusion", config.embed, rng);
  }
}

namespace {

std::size_t argmax_row(std::span<const double> row) {
  return static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
}

Tensor visual_input(const Scene& scene, std::size_t feature_dim) {
  std::vector<double> v;
  v.reserve(scene.relations.size() * 3 * feature_dim);
  for (const auto& rel : scene.relations) {
    if (rel.feature.size() != 3 * feature_dim) {
      throw DimensionError("relation feature has " + std::to_string(rel.feature.size()) + " values, expected " +
                           std::to_string(3 * feature_dim));
    }
    v.insert(v.end(), rel.feature.begin(), rel.feature.end());
  }
  return Tensor(Shape{scene.relations.size(), 3 * feature_dim}, std::move(v));
}

// Drives one scene's decoders. With `targets`, previous words are teacher
// forced; otherwise each decoder consumes its own chosen word.
class CaptionReadout : public Readout {
 public:
  CaptionReadout(const Linear& visual, const EmbeddingTable& words, const Linear& word_head, const Linear& pos_head,
                 Tensor features, const std::vector<std::vector<TokenId>>* targets, FuseSource source,
                 std::optional<Decoding> decoding, Rng* rng)
      : visual_(visual), words_(words), word_head_(word_head), pos_head_(pos_head), features_(std::move(features)),
        targets_(targets), source_(source), decoding_(decoding), rng_(rng), rows_(features_.rows()),
        chosen_(rows_, Vocabulary::toy().sos()) {}

  Tensor input(std::size_t, std::size_t step) override {
    if (step == 1) return visual_(features_);
    if (step == 2) {
      std::vector<std::size_t> sos(rows_, Vocabulary::toy().sos());
      return embed(sos, words_);
    }
    if (targets_) return embed(target_column(step - 2), words_);
    return embed(chosen_, words_);
  }

  Tensor emit(std::size_t, std::size_t step, const Tensor& hidden) override {
    if (step == 1) return Tensor(Shape{rows_, words_.dim()});
    Tensor logits = word_head_(hidden);
    Tensor pos = pos_head_(hidden);
    word_logits.push_back(logits);
    pos_logits.push_back(pos);
    auto values = logits.values();
    const std::size_t v = words_.vocab_size();
    for (std::size_t i = 0; i < rows_; ++i) {
      auto row = values.subspan(i * v, v);
      if (decoding_ == Decoding::sample) {
        const auto p = softmax_row(row);
        std::discrete_distribution<std::size_t> dist(p.begin(), p.end());
        chosen_[i] = dist(*rng_);
      } else {
        chosen_[i] = argmax_row(row);
      }
    }
    chosen_steps.push_back(chosen_);
    if (targets_ && source_ == FuseSource::ground_truth) return embed(target_column(step - 1), words_);
    return embed(chosen_, words_);
  }

  std::vector<Tensor> word_logits, pos_logits;
  std::vector<std::vector<std::size_t>> chosen_steps;

 private:
  static std::vector<double> softmax_row(std::span<const double> row) {
    const double peak = *std::max_element(row.begin(), row.end());
    std::vector<double> p(row.size());
    for (std::size_t k = 0; k < row.size(); ++k) p[k] = std::exp(row[k] - peak);
    return p;
  }

  // Token at 1-based caption position `k` for every row (EOS past the end).
  std::vector<std::size_t> target_column(std::size_t k) const {
    std::vector<std::size_t> col(rows_);
    for (std::size_t i = 0; i < rows_; ++i) {
      const auto& t = (*targets_)[i];
      col[i] = k <= t.size() ? t[k - 1] : Vocabulary::toy().eos();
    }
    return col;
  }

  const Linear& visual_;
  const EmbeddingTable& words_;
  const Linear& word_head_;
  const Linear& pos_head_;
  Tensor features_;
  const std::vector<std::vector<TokenId>>* targets_;
  FuseSource source_;
  std::optional<Decoding> decoding_;
  Rng* rng_;
  std::size_t rows_;
  std::vector<std::size_t> chosen_;
};

MultiDecoder make_decoder(const RelcapConfig& cfg, const LstmParams& cell, const std::optional<FusionParams>& fusion,
                          const Scene& scene) {
  const auto graph = cfg.mode == DecodeMode::consistent ? scene_graph(scene) : DecoderGraph(scene.relations.size());
  return MultiDecoder({cell}, fusion, graph, {cfg.mode, cfg.fusion, 3});
}

}  // namespace

RelcapModel::Loss RelcapModel::loss(const Scene& scene, std::span<const Caption> targets) const {
  const std::size_t n = scene.relations.size();
  if (n == 0) throw ConfigError("relcap: scene without relations");
  if (targets.size() != n) throw DimensionError("relcap: one target caption per relation required");
  std::vector<std::vector<TokenId>> words(n);
  std::size_t longest = 0;
  for (std::size_t i = 0; i < n; ++i) {
    words[i] = targets[i].tokens;
    words[i].push_back(Vocabulary::toy().eos());
    if (words[i].size() > kMaxCaption) throw ConfigError("relcap: caption longer than the decoding limit");
    longest = std::max(longest, words[i].size());
  }
  CaptionReadout readout(visual_, words_, word_head_, pos_head_, visual_input(scene, config_.scene.feature_dim),
                         &words, config_.fuse_source, std::nullopt, nullptr);
  const auto decoder = make_decoder(config_, cell_, fusion_, scene);
  const std::size_t rows[] = {n};
  decode(decoder, readout, rows, config_.embed, 1 + longest);

  std::vector<int> word_targets, pos_targets;
  for (std::size_t k = 0; k < longest; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      const bool live = k < words[i].size();
      const bool is_word = k < targets[i].tokens.size();
      word_targets.push_back(live ? static_cast<int>(words[i][k]) : kIgnoreIndex);
      pos_targets.push_back(is_word ? static_cast<int>(targets[i].pos.at(k)) : kIgnoreIndex);
    }
  }
  Loss l;
  l.caption = cross_entropy(concat_rows(readout.word_logits), word_targets);
  l.pos = cross_entropy(concat_rows(readout.pos_logits), pos_targets);
  l.total = add(l.caption, scale(l.pos, config_.pos_weight));
  return l;
}

Generated RelcapModel::caption(const Scene& scene, Decoding decoding, Rng& rng) const {
  const std::size_t n = scene.relations.size();
  Generated out;
  if (n == 0) return out;
  CaptionReadout readout(visual_, words_, word_head_, pos_head_, visual_input(scene, config_.scene.feature_dim),
                         nullptr, config_.fuse_source, decoding, &rng);
  const auto decoder = make_decoder(config_, cell_, fusion_, scene);
  const std::size_t rows[] = {n};
  decode(decoder, readout, rows, config_.embed, 1 + kMaxCaption);

  out.captions.resize(n);
  std::vector<bool> done(n, false);
  for (std::size_t k = 0; k < readout.chosen_steps.size(); ++k) {
    auto pos = readout.pos_logits[k].values();
    for (std::size_t i = 0; i < n; ++i) {
      if (done[i]) continue;
      const auto token = readout.chosen_steps[k][i];
      if (token == Vocabulary::toy().eos() || k + 1 == kMaxCaption) {
        done[i] = true;
        if (token == Vocabulary::toy().eos()) continue;
      }
      out.captions[i].tokens.push_back(token);
      out.captions[i].pos.push_back(static_cast<Pos>(argmax_row(pos.subspan(i * kPosClasses, kPosClasses))));
    }
  }
  return out;
}

std::vector<Generated> caption_scene(const RelcapModel& model, const Scene& scene, Decoding decoding,
                                     std::size_t runs, Rng& rng) {
  std::vector<Generated> out;
  for (std::size_t r = 0; r < runs; ++r) out.push_back(model.caption(scene, decoding, rng));
  return out;
}

double mean_loss(const RelcapModel& model, std::span<const Scene> scenes) {
  if (scenes.empty()) return 0.0;
  double total = 0.0;
  for (const auto& s : scenes) total += model.loss(s, labels(s, model.config().labels)).total.item();
  return total / static_cast<double>(scenes.size());
}

TrainProgress train_relcap(RelcapModel& model, const Corpus& corpus, std::optional<TrainProgress> progress,
                           const EpochCallback& on_epoch) {
  const auto& cfg = model.config();
  if (corpus.train.empty()) throw ConfigError("relcap: empty training corpus");
  std::vector<std::vector<Caption>> targets;
  for (const auto& s : corpus.train) targets.push_back(labels(s, cfg.labels));
  TrainProgress p = progress ? std::move(*progress) : start_progress(cfg.schedule);
  while (p.epoch < cfg.epochs) {
    const std::size_t epoch = p.epoch + 1;
    const SgdMomentum sgd(p.lr, cfg.momentum);
    double total = 0.0;
    for (auto i : epoch_order(corpus.train.size(), cfg.seed, epoch)) {
      model.params().zero_grads();
      auto l = model.loss(corpus.train[i], targets[i]);
      const double value = l.total.item();
      require_finite(value, epoch);
      backward(l.total);
      if (cfg.clip_norm > 0) clip_gradients(model.params(), cfg.clip_norm);
      sgd.step(model.params());
      total += value;
    }
    const double val = mean_loss(model, corpus.val.empty() ? std::span<const Scene>(corpus.train) : corpus.val);
    require_finite(val, epoch);
    finish_epoch(p, cfg.schedule, total / static_cast<double>(corpus.train.size()), val);
    if (on_epoch) on_epoch(model, p);
  }
  return p;
}

namespace {

metrics::Tokens words_of(std::span<const TokenId> tokens) {
  const auto& vocab = Vocabulary::toy();
  metrics::Tokens out;
  for (auto t : tokens) out.push_back(vocab.word(t));
  return out;
}

}  // namespace

std::vector<metrics::BoxDescriptions> box_descriptions(const Scene& scene, const Generated& generated,
                                                       std::size_t* dropped) {
  if (generated.captions.size() != scene.relations.size()) {
    throw DimensionError("box_descriptions: one generated caption per relation required");
  }
  std::vector<metrics::BoxDescriptions> boxes(scene.regions.size());
  for (std::size_t i = 0; i < scene.relations.size(); ++i) {
    const auto& rel = scene.relations[i];
    for (auto [region, tag] : {std::pair{rel.subject, Pos::subj}, std::pair{rel.object, Pos::obj}}) {
      auto words = extract(generated.captions[i], tag);
      if (words.empty()) {
        if (dropped) ++*dropped;
        continue;
      }
      boxes[region].descriptions.push_back(words_of(words));
    }
  }
  return boxes;
}

RelcapScores evaluate(const RelcapModel& model, std::span<const Scene> scenes, std::size_t runs, std::uint64_t seed) {
  if (runs < 2) throw ConfigError("relcap evaluation needs at least 2 sampled runs");
  RelcapScores scores;
  std::vector<metrics::BoxDescriptions> boxes;
  std::vector<std::vector<metrics::Tokens>> mentions, generated_words, truth_words;
  for (std::size_t s = 0; s < scenes.size(); ++s) {
    const auto& scene = scenes[s];
    auto rng = stream_rng(seed, s);
    const auto greedy = model.caption(scene, Decoding::greedy, rng);
    auto b = box_descriptions(scene, greedy, &scores.dropped_descriptions);
    boxes.insert(boxes.end(), std::make_move_iterator(b.begin()), std::make_move_iterator(b.end()));

    generated_words.emplace_back();
    for (const auto& c : greedy.captions) generated_words.back().push_back(words_of(c.tokens));
    truth_words.emplace_back();
    for (const auto& c : labels(scene, model.config().labels)) truth_words.back().push_back(words_of(c.tokens));

    const auto sampled = caption_scene(model, scene, Decoding::sample, runs, rng);
    for (std::size_t i = 0; i < scene.relations.size(); ++i) {
      for (auto tag : {Pos::subj, Pos::obj}) {
        std::vector<metrics::Tokens> across;
        for (const auto& run : sampled) {
          auto words = extract(run.captions[i], tag);
          if (!words.empty()) across.push_back(words_of(words));
        }
        if (across.size() >= 2) mentions.push_back(std::move(across));
      }
    }
  }
  const auto c = metrics::consistency_score(boxes);
  scores.consistency = c.value;
  scores.consistency_boxes = c.boxes;
  const auto d = metrics::bbox_diversity(mentions);
  scores.bbox_diversity = d.value;
  scores.diversity_mentions = d.mentions;
  scores.image_recall = metrics::image_level_recall(generated_words, truth_words);
  return scores;
}

}  // namespace cmsd::relcap
