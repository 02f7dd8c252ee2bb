#ifndef MORSEM_TRANSDUCER_H
#define MORSEM_TRANSDUCER_H

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "feature_space.h"
#include "rng.h"

namespace morsem {

// Cache from packed edit-operation contexts to feature-id lists. Entries
// created while the feature index can still grow may contain -1 (unknown
// feature); such entries are revalidated against the current index size.
class ArcFeatureCache {
 public:
  const std::vector<int>* Find(std::uint64_t key, int index_size) const;
  void Put(std::uint64_t key, std::vector<int> ids, bool permanent, int index_size);
  void clear() { map_.clear(); }

 private:
  struct Entry {
    std::vector<int> ids;
    int built_at;  // -1 when permanent
  };
  std::unordered_map<std::uint64_t, Entry> map_;
};

// Weights for the contextual edit model. One parameter set serves two roles:
// as the unnormalized transduction factor of the joint model and, with local
// normalization plus an epsilon-uniform mixture, as the proposal q1(u | w).
struct TransducerParams {
  FeatureIndex feature_index;
  std::vector<double> omega;
  int insertion_limit = 5;       // max total inserted symbols per edit path
  std::string alphabet;          // all symbols the model accepts (sorted)
  std::string output_alphabet;   // symbols insert/substitute may emit (sorted)
  double epsilon = 1e-4;         // proposal smoothing mixture weight

  mutable ArcFeatureCache cache;

  double Weight(int id) const {
    return (id >= 0 && id < static_cast<int>(omega.size())) ? omega[id] : 0.0;
  }
  // Keeps the weight vector in step with the index after interning.
  void SyncWeights() { omega.resize(feature_index.size(), 0.0); }
};

struct TransductionPair {
  std::string w;  // surface string (input side)
  std::string u;  // underlying string (output side)
};

struct TransducerTrainConfig {
  int epochs = 20;
  double learning_rate = 0.5;
  double adagrad_epsilon = 1e-8;
  double l2 = 1e-4;
  int insertion_limit = 5;
  double epsilon = 1e-4;
  std::uint64_t seed = 1;
};

// log of the unnormalized factor value: the log-sum over all edit paths that
// spell (u, w) of exp(path feature score). Throws when |u| > |w| + limit or
// a symbol is outside the model alphabet.
double TransductionLogScore(const std::string& u, const std::string& w,
                            const TransducerParams& params);

// Expected feature counts under the path posterior for (u, w); this is the
// gradient of TransductionLogScore with respect to omega. Interns features.
SparseVec TransductionExpectedFeatures(const std::string& u, const std::string& w,
                                       TransducerParams* params);

// Locally normalized edit model over (state, action) built once per surface
// string; sampling and marginal scoring reuse the same normalized tables.
class Q1Lattice {
 public:
  Q1Lattice(std::string w, const TransducerParams& params);

  // Draws u ~ q1(. | w). The empty string cannot be produced unless the
  // machine is forced into a dead end (insertion limit 0 after deleting all).
  std::string Sample(Rng* rng) const;

  // log q1(u | w): marginal over all action sequences that spell u.
  double LogProb(const std::string& u) const;

  const std::string& w() const { return w_; }

 private:
  int StateId(int j, int n, int c) const;
  int ActionCount() const;

  std::string w_;
  int limit_;
  int sigma_;                       // |output alphabet|
  std::string out_alpha_;
  std::vector<int> char_code_;      // byte -> output alphabet idx or -1
  std::vector<double> probs_;       // [state][action], mixture-normalized
  std::vector<char> has_action_;    // availability mask
};

// Convenience wrapper: builds the lattice for w and scores u.
double Q1LogProb(const std::string& u, const std::string& w,
                 const TransducerParams& params);

std::pair<std::string, double> SampleQ1(const std::string& w,
                                        const TransducerParams& params, Rng* rng);

// Maximum-likelihood training of the proposal on (w, u) pairs. The alphabets
// are collected from the pairs: insert/substitute emissions range over
// symbols seen in underlying strings.
TransducerParams TrainProposalQ1(const std::vector<TransductionPair>& pairs,
                                 const TransducerTrainConfig& config);

}  // namespace morsem

#endif
