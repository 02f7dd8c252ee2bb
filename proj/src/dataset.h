#ifndef MORSEM_DATASET_H
#define MORSEM_DATASET_H

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "analysis.h"
#include "embeddings.h"
#include "linalg.h"

namespace morsem {

// One corpus row: a surface word together with its gold canonical analysis.
// The analysis' underlying string is always the concatenation of its
// segments; the surface may differ from it by orthographic changes.
struct DatasetRecord {
  std::string surface;
  CanonicalAnalysis gold;

  bool operator==(const DatasetRecord& o) const {
    return surface == o.surface && gold == o.gold;
  }
};

using Dataset = std::vector<DatasetRecord>;

// Parses one TSV line of the form
//   surface<TAB>seg1:label1+seg2:label2+...
// line_number (1-based) is used in error messages only; pass 0 when unknown.
// Throws DataError on: missing tab, empty surface, empty segment, unknown
// label, a ':' inside a segment, a malformed morpheme (which is also how a
// '+' inside a segment manifests), or whitespace/control bytes in either
// field.
DatasetRecord ParseDatasetLine(const std::string& line, int line_number = 0);

// Inverse of ParseDatasetLine (no trailing newline). Parsing a formatted
// record reproduces it byte-for-byte.
std::string FormatDatasetLine(const DatasetRecord& record);

// Loads a TSV dataset. Blank lines are skipped; a trailing '\r' (CRLF file)
// is tolerated. Error messages carry 1-based line numbers. When
// insertion_limit >= 0, every record must satisfy
// |underlying| <= |surface| + insertion_limit.
Dataset LoadDataset(const std::string& path, int insertion_limit = -1);

// Writes one TSV line per record.
void SaveDataset(const Dataset& data, const std::string& path);

// Sorted string of the distinct bytes appearing in surfaces and underlying
// forms; models use this as their character alphabet.
std::string CollectAlphabet(const Dataset& data);

// Coarsens every analysis to at most two segments while preserving the
// underlying string: a trailing suffix keeps its own segment and everything
// before it merges into one stem; otherwise a leading prefix survives and
// the rest merges; analyses without affixes collapse to a single stem.
Dataset ApplyTwoMorphemeAssumption(const Dataset& data);

// Deterministic orthographic rule shared by the synthetic corpus: a
// stem-final 'e' is dropped whenever the next segment is a vowel-initial
// suffix. Returns the surface string for the analysis (equal to the plain
// concatenation when the rule is inapplicable).
std::string SurfaceForm(const LabeledSegmentation& seg);

// ---------------------------------------------------------------------------
// Synthetic corpus generation
// ---------------------------------------------------------------------------

// Words are built as optional-prefix + stem + 0..2 suffixes; surfaces come
// from SurfaceForm; each word's embedding is the sum of latent vectors of
// its gold morphemes plus Gaussian noise of scale `noise`, so additive
// composition is the ground truth by construction.
struct SyntheticConfig {
  int num_stems = 300;
  std::vector<std::string> suffixes = {"er", "ser", "ing", "ness", "ly", "ity"};
  std::vector<std::string> prefixes = {"un", "re"};
  int dim = 10;
  double noise = 0.05;
  std::uint64_t seed = 1;

  // Explicit stem inventory; when non-empty it replaces random generation
  // (and is checked for duplicates and rule-ambiguity collisions).
  std::vector<std::string> stems;

  // Knobs for randomly generated stems and word assembly.
  double e_final_fraction = 0.55;   // stems ending in 'e'
  double vowel_suffix_bias = 0.6;   // first suffix drawn vowel-initial
  int derived_per_stem = 3;         // derived words sampled per stem
  double prefix_prob = 0.25;
  double second_suffix_prob = 0.25;
  bool include_bare_stems = true;

  // Pairs of stems (X, X+"se") planted so that surfaces like X+"ser" admit
  // two canonical analyses (X+se : er with the rule fired, vs X : ser
  // verbatim); only one analysis survives deduplication as the gold.
  int num_ambiguous_pairs = 20;
};

struct SyntheticCorpus {
  Dataset data;                          // surface-deduplicated, in generation order
  EmbeddingTable embeddings;             // surface word -> vector
  std::map<std::string, Vec> latent;     // "<label>|<morpheme>" -> latent vector
  std::vector<std::string> stems;        // final stem inventory
  double rule_fire_fraction = 0.0;       // records whose underlying != surface
  int collisions_dropped = 0;            // records dropped for a duplicate surface
};

// Throws DataError when the stem inventory contains duplicates or a pair
// (X, X minus final 'e') that would make the orthographic rule ambiguous.
SyntheticCorpus GenerateSyntheticCorpus(const SyntheticConfig& config);

// ---------------------------------------------------------------------------
// Deterministic splitting
// ---------------------------------------------------------------------------

struct DatasetSplit {
  Dataset train;
  Dataset dev;
  Dataset test;
};

// Shuffles with the seed, then carves off dev and test fractions (sizes are
// rounded down; the rest is train). Fractions must be nonnegative and sum
// to < 1.
DatasetSplit SplitDataset(const Dataset& data, double dev_fraction,
                          double test_fraction, std::uint64_t seed);

}  // namespace morsem

#endif
