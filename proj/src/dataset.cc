#include "dataset.h"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "errors.h"
#include "rng.h"

namespace morsem {
namespace {

std::string Loc(int line_number) {
  if (line_number <= 0) return "";
  return "line " + std::to_string(line_number) + ": ";
}

bool IsVowel(char c) {
  return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u';
}

// Printable, non-whitespace bytes only (multi-byte UTF-8 continuation and
// lead bytes are >= 0x80 and pass).
void CheckFieldBytes(const std::string& field, const char* what,
                     int line_number) {
  for (char c : field) {
    unsigned char b = static_cast<unsigned char>(c);
    if (b <= 0x20 || b == 0x7f) {
      throw DataError(Loc(line_number) + std::string(what) + " '" + field +
                      "' contains whitespace or a control byte");
    }
  }
}

std::vector<std::string> SplitOn(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  parts.push_back(cur);
  return parts;
}

}  // namespace

DatasetRecord ParseDatasetLine(const std::string& line, int line_number) {
  auto tab = line.find('\t');
  if (tab == std::string::npos) {
    throw DataError(Loc(line_number) +
                    "missing tab separator between surface and analysis");
  }
  DatasetRecord record;
  record.surface = line.substr(0, tab);
  std::string analysis = line.substr(tab + 1);
  if (record.surface.empty()) {
    throw DataError(Loc(line_number) + "empty surface form");
  }
  CheckFieldBytes(record.surface, "surface", line_number);
  if (analysis.empty()) {
    throw DataError(Loc(line_number) + "empty analysis");
  }

  for (const std::string& piece : SplitOn(analysis, '+')) {
    auto colon = piece.rfind(':');
    if (colon == std::string::npos) {
      throw DataError(Loc(line_number) + "malformed morpheme '" + piece +
                      "' (expected segment:label; '+' and ':' may not appear "
                      "inside segments)");
    }
    std::string segment = piece.substr(0, colon);
    std::string label_name = piece.substr(colon + 1);
    if (segment.find(':') != std::string::npos) {
      throw DataError(Loc(line_number) + "':' is not allowed inside segment '" +
                      segment + "'");
    }
    if (segment.empty()) {
      throw DataError(Loc(line_number) + "empty segment in analysis '" +
                      analysis + "'");
    }
    CheckFieldBytes(segment, "segment", line_number);
    auto label = ParseLabel(label_name);
    if (!label) {
      throw DataError(Loc(line_number) + "unknown label '" + label_name +
                      "' (expected stem, prefix, or suffix)");
    }
    record.gold.seg.segments.push_back(segment);
    record.gold.seg.labels.push_back(*label);
  }
  record.gold.ur = ConcatSegments(record.gold.seg);
  return record;
}

std::string FormatDatasetLine(const DatasetRecord& record) {
  return record.surface + "\t" + FormatAnalysis(record.gold.seg);
}

Dataset LoadDataset(const std::string& path, int insertion_limit) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset file '" + path + "'");
  Dataset data;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    DatasetRecord record;
    try {
      record = ParseDatasetLine(line, line_number);
    } catch (const DataError& e) {
      throw DataError(path + ": " + e.what());
    }
    if (insertion_limit >= 0 &&
        static_cast<int>(record.gold.ur.size()) >
            static_cast<int>(record.surface.size()) + insertion_limit) {
      throw DataError(path + ": " + Loc(line_number) + "underlying form '" +
                      record.gold.ur + "' exceeds surface '" + record.surface +
                      "' by more than " + std::to_string(insertion_limit) +
                      " characters");
    }
    data.push_back(std::move(record));
  }
  return data;
}

void SaveDataset(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write dataset file '" + path + "'");
  for (const auto& record : data) out << FormatDatasetLine(record) << "\n";
  if (!out) throw DataError("failed while writing dataset file '" + path + "'");
}

std::string CollectAlphabet(const Dataset& data) {
  std::set<char> chars;
  for (const auto& record : data) {
    for (char c : record.surface) chars.insert(c);
    for (char c : record.gold.ur) chars.insert(c);
  }
  return std::string(chars.begin(), chars.end());
}

Dataset ApplyTwoMorphemeAssumption(const Dataset& data) {
  Dataset out;
  out.reserve(data.size());
  for (const auto& record : data) {
    DatasetRecord coarse = record;
    const LabeledSegmentation& seg = record.gold.seg;
    int n = seg.size();
    if (n > 1) {
      LabeledSegmentation merged;
      if (seg.labels.back() == Label::kSuffix) {
        std::string head;
        for (int i = 0; i < n - 1; ++i) head += seg.segments[i];
        merged.segments = {head, seg.segments.back()};
        merged.labels = {Label::kStem, Label::kSuffix};
      } else if (seg.labels.front() == Label::kPrefix) {
        std::string tail;
        for (int i = 1; i < n; ++i) tail += seg.segments[i];
        merged.segments = {seg.segments.front(), tail};
        merged.labels = {Label::kPrefix, Label::kStem};
      } else {
        merged.segments = {ConcatSegments(seg)};
        merged.labels = {Label::kStem};
      }
      coarse.gold.seg = merged;
      coarse.gold.ur = ConcatSegments(merged);
    }
    out.push_back(std::move(coarse));
  }
  return out;
}

std::string SurfaceForm(const LabeledSegmentation& seg) {
  std::string out;
  int n = seg.size();
  for (int i = 0; i < n; ++i) {
    std::string piece = seg.segments[i];
    if (seg.labels[i] == Label::kStem && !piece.empty() &&
        piece.back() == 'e' && i + 1 < n &&
        seg.labels[i + 1] == Label::kSuffix && !seg.segments[i + 1].empty() &&
        IsVowel(seg.segments[i + 1][0])) {
      piece.pop_back();
    }
    out += piece;
  }
  return out;
}

namespace {

// Insert-time guard for the stem inventory: duplicates are errors, and so is
// any pair (X, X+"e"-final) whose surfaces after the rule coincide.
void InsertStemChecked(const std::string& stem,
                       std::set<std::string>* inventory) {
  if (inventory->count(stem)) {
    throw DataError("duplicate stem '" + stem + "' in inventory");
  }
  if (!stem.empty() && stem.back() == 'e') {
    std::string clipped = stem.substr(0, stem.size() - 1);
    if (inventory->count(clipped)) {
      throw DataError("stems '" + stem + "' and '" + clipped +
                      "' make the orthographic rule ambiguous");
    }
  }
  if (inventory->count(stem + "e")) {
    throw DataError("stems '" + stem + "e' and '" + stem +
                    "' make the orthographic rule ambiguous");
  }
  inventory->insert(stem);
}

struct WordAccumulator {
  Dataset data;
  std::unordered_map<std::string, int> by_surface;
  int dropped = 0;

  void Insert(DatasetRecord record) {
    auto [it, fresh] =
        by_surface.try_emplace(record.surface, static_cast<int>(data.size()));
    (void)it;
    if (!fresh) {
      ++dropped;
      return;
    }
    data.push_back(std::move(record));
  }
};

DatasetRecord MakeRecord(const std::string& prefix, const std::string& stem,
                         const std::vector<std::string>& word_suffixes) {
  DatasetRecord record;
  if (!prefix.empty()) {
    record.gold.seg.segments.push_back(prefix);
    record.gold.seg.labels.push_back(Label::kPrefix);
  }
  record.gold.seg.segments.push_back(stem);
  record.gold.seg.labels.push_back(Label::kStem);
  for (const auto& s : word_suffixes) {
    record.gold.seg.segments.push_back(s);
    record.gold.seg.labels.push_back(Label::kSuffix);
  }
  record.gold.ur = ConcatSegments(record.gold.seg);
  record.surface = SurfaceForm(record.gold.seg);
  return record;
}

}  // namespace

SyntheticCorpus GenerateSyntheticCorpus(const SyntheticConfig& config) {
  if (config.dim < 1) throw UsageError("synthetic corpus dimension must be >= 1");
  if (config.num_stems < 1 && config.stems.empty()) {
    throw UsageError("synthetic corpus needs at least one stem");
  }
  if (config.noise < 0.0) throw UsageError("noise scale must be >= 0");
  if (config.derived_per_stem < 0) {
    throw UsageError("derived_per_stem must be >= 0");
  }
  for (double p : {config.e_final_fraction, config.vowel_suffix_bias,
                   config.prefix_prob, config.second_suffix_prob}) {
    if (p < 0.0 || p > 1.0) {
      throw UsageError("synthetic corpus probabilities must lie in [0, 1]");
    }
  }

  SyntheticCorpus corpus;
  std::set<std::string> inventory;
  std::vector<std::pair<std::string, std::string>> pairs;  // (X, X+"se")

  if (!config.stems.empty()) {
    for (const auto& stem : config.stems) {
      if (stem.empty()) throw DataError("empty stem in inventory");
      InsertStemChecked(stem, &inventory);
      corpus.stems.push_back(stem);
    }
  } else {
    Rng rng(Rng::DeriveSeed(config.seed, 1));
    const std::string consonants = "bdfgklmnprstvz";
    const std::string vowels = "aeiou";
    std::unordered_set<std::string> reserved(config.suffixes.begin(),
                                             config.suffixes.end());
    reserved.insert(config.prefixes.begin(), config.prefixes.end());

    int planted = std::min(config.num_ambiguous_pairs, config.num_stems / 2);
    int base_target = config.num_stems - planted;
    int attempts = 0;
    while (static_cast<int>(corpus.stems.size()) < base_target) {
      if (++attempts > 200000) {
        throw DataError("unable to generate a collision-free stem inventory");
      }
      std::string stem;
      stem += consonants[rng.UniformInt(static_cast<int>(consonants.size()))];
      stem += vowels[rng.UniformInt(static_cast<int>(vowels.size()))];
      stem += consonants[rng.UniformInt(static_cast<int>(consonants.size()))];
      if (rng.Uniform() < 0.35) {
        stem += vowels[rng.UniformInt(static_cast<int>(vowels.size()))];
        stem += consonants[rng.UniformInt(static_cast<int>(consonants.size()))];
      }
      if (rng.Uniform() < config.e_final_fraction) stem += 'e';
      if (reserved.count(stem) || inventory.count(stem)) continue;
      if (!stem.empty() && stem.back() == 'e' &&
          inventory.count(stem.substr(0, stem.size() - 1))) {
        continue;
      }
      if (inventory.count(stem + "e")) continue;
      InsertStemChecked(stem, &inventory);
      corpus.stems.push_back(stem);
    }
    // Plant stem pairs (X, X+"se") so surfaces like X+"ser" admit two
    // analyses once both "er" and "ser" are in the suffix inventory.
    for (const auto& base : std::vector<std::string>(corpus.stems)) {
      if (static_cast<int>(pairs.size()) >= planted) break;
      if (!base.empty() && base.back() == 'e') continue;
      std::string mate = base + "se";
      if (inventory.count(mate) || reserved.count(mate)) continue;
      if (inventory.count(mate.substr(0, mate.size() - 1))) continue;
      InsertStemChecked(mate, &inventory);
      corpus.stems.push_back(mate);
      pairs.emplace_back(base, mate);
    }
  }

  // Latent morpheme vectors, drawn in a fixed order.
  Rng latent_rng(Rng::DeriveSeed(config.seed, 2));
  auto draw_latent = [&](const std::string& key) {
    Vec v(config.dim);
    for (int i = 0; i < config.dim; ++i) v[i] = latent_rng.Gaussian();
    corpus.latent.emplace(key, std::move(v));
  };
  for (const auto& s : corpus.stems) draw_latent("stem|" + s);
  for (const auto& p : config.prefixes) draw_latent("prefix|" + p);
  for (const auto& s : config.suffixes) draw_latent("suffix|" + s);

  WordAccumulator acc;

  // Planted ambiguity: both analyses of the shared surface are inserted; the
  // second is dropped by deduplication, and alternating the order leaves both
  // gold conventions represented across pairs.
  bool can_plant_words =
      std::count(config.suffixes.begin(), config.suffixes.end(), "er") > 0 &&
      std::count(config.suffixes.begin(), config.suffixes.end(), "ser") > 0;
  if (can_plant_words) {
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      DatasetRecord fired = MakeRecord("", pairs[i].second, {"er"});
      DatasetRecord verbatim = MakeRecord("", pairs[i].first, {"ser"});
      if (i % 2 == 0) {
        acc.Insert(std::move(fired));
        acc.Insert(std::move(verbatim));
      } else {
        acc.Insert(std::move(verbatim));
        acc.Insert(std::move(fired));
      }
    }
  }

  if (config.include_bare_stems) {
    for (const auto& stem : corpus.stems) acc.Insert(MakeRecord("", stem, {}));
  }

  Rng word_rng(Rng::DeriveSeed(config.seed, 3));
  std::vector<int> vowel_initial;
  std::vector<int> other_initial;
  for (std::size_t i = 0; i < config.suffixes.size(); ++i) {
    if (!config.suffixes[i].empty() && IsVowel(config.suffixes[i][0])) {
      vowel_initial.push_back(static_cast<int>(i));
    } else {
      other_initial.push_back(static_cast<int>(i));
    }
  }
  for (const auto& stem : corpus.stems) {
    for (int d = 0; d < config.derived_per_stem; ++d) {
      std::string prefix;
      if (!config.prefixes.empty() && word_rng.Uniform() < config.prefix_prob) {
        prefix = config.prefixes[word_rng.UniformInt(
            static_cast<int>(config.prefixes.size()))];
      }
      std::vector<std::string> word_suffixes;
      if (!config.suffixes.empty()) {
        bool want_vowel = word_rng.Uniform() < config.vowel_suffix_bias;
        const std::vector<int>& pool =
            (want_vowel && !vowel_initial.empty())   ? vowel_initial
            : (!want_vowel && !other_initial.empty()) ? other_initial
            : (!vowel_initial.empty())                ? vowel_initial
                                                      : other_initial;
        int first = pool[word_rng.UniformInt(static_cast<int>(pool.size()))];
        word_suffixes.push_back(config.suffixes[first]);
        if (word_rng.Uniform() < config.second_suffix_prob) {
          int second = word_rng.UniformInt(
              static_cast<int>(config.suffixes.size()));
          if (config.suffixes[second] == config.suffixes[first]) {
            second = word_rng.UniformInt(
                static_cast<int>(config.suffixes.size()));
          }
          if (config.suffixes[second] != config.suffixes[first]) {
            word_suffixes.push_back(config.suffixes[second]);
          }
        }
      }
      acc.Insert(MakeRecord(prefix, stem, word_suffixes));
    }
  }

  corpus.data = std::move(acc.data);
  corpus.collisions_dropped = acc.dropped;

  int fired = 0;
  for (const auto& record : corpus.data) {
    if (record.gold.ur != record.surface) ++fired;
  }
  corpus.rule_fire_fraction =
      corpus.data.empty() ? 0.0
                          : static_cast<double>(fired) /
                                static_cast<double>(corpus.data.size());

  // Word embeddings: sum of gold-morpheme latents plus noise.
  Rng noise_rng(Rng::DeriveSeed(config.seed, 4));
  corpus.embeddings = EmbeddingTable(config.dim);
  for (const auto& record : corpus.data) {
    Vec v(config.dim, 0.0);
    const auto& seg = record.gold.seg;
    for (int i = 0; i < seg.size(); ++i) {
      std::string key = std::string(LabelName(seg.labels[i])) + "|" +
                        seg.segments[i];
      auto it = corpus.latent.find(key);
      if (it == corpus.latent.end()) {
        throw DataError("missing latent vector for morpheme '" + key + "'");
      }
      AxpyInto(&v, 1.0, it->second);
    }
    for (int i = 0; i < config.dim; ++i) {
      v[i] += config.noise * noise_rng.Gaussian();
    }
    corpus.embeddings.Set(record.surface, std::move(v));
  }
  return corpus;
}

DatasetSplit SplitDataset(const Dataset& data, double dev_fraction,
                          double test_fraction, std::uint64_t seed) {
  if (dev_fraction < 0.0 || test_fraction < 0.0 ||
      dev_fraction + test_fraction >= 1.0) {
    throw UsageError("split fractions must be nonnegative and sum to < 1");
  }
  int n = static_cast<int>(data.size());
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.Shuffle(&order);

  int dev_n = static_cast<int>(dev_fraction * n);
  int test_n = static_cast<int>(test_fraction * n);
  std::vector<int> dev_idx(order.begin(), order.begin() + dev_n);
  std::vector<int> test_idx(order.begin() + dev_n,
                            order.begin() + dev_n + test_n);
  std::vector<int> train_idx(order.begin() + dev_n + test_n, order.end());
  std::sort(dev_idx.begin(), dev_idx.end());
  std::sort(test_idx.begin(), test_idx.end());
  std::sort(train_idx.begin(), train_idx.end());

  DatasetSplit split;
  for (int i : train_idx) split.train.push_back(data[i]);
  for (int i : dev_idx) split.dev.push_back(data[i]);
  for (int i : test_idx) split.test.push_back(data[i]);
  return split;
}

}  // namespace morsem
