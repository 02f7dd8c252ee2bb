#ifndef MORSEM_CHAR_RETROFIT_H
#define MORSEM_CHAR_RETROFIT_H

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "linalg.h"

namespace morsem {

enum class CharRnnKind { kSimple, kGated };

struct CharRetrofitConfig {
  CharRnnKind kind = CharRnnKind::kGated;
  int depth = 2;       // stacked recurrent layers
  int hidden = 100;    // hidden units per layer
  int iterations = 100;
  double learning_rate = 0.001;
  double l2 = 0.01;
  std::uint64_t seed = 1;
};

// Character-level regressor from spelling to a word's embedding: stacked
// recurrent layers (plain tanh or gated) read the characters left to right,
// initial hidden states are zero, and the final top-layer hidden state is
// linearly projected to the target dimension. The model never sees
// segmentations — its interface accepts only strings and vectors.
// Characters outside the alphabet map to a reserved unknown symbol.
class CharRetrofitModel {
 public:
  CharRetrofitModel() = default;
  CharRetrofitModel(const std::string& alphabet, int dim,
                    const CharRetrofitConfig& config);

  // Deterministic forward pass; returns a dim()-sized vector.
  Vec Predict(const std::string& word) const;

  // sum_i 0.5*||Predict(w_i) - v_i||^2 + l2 * sum_theta theta^2.
  double Loss(const std::vector<std::pair<std::string, Vec>>& data) const;

  // Exact full-batch gradient of Loss for every parameter block (same keys
  // and shapes as params()); *loss_out, when given, receives Loss itself.
  std::map<std::string, Vec> LossGradient(
      const std::vector<std::pair<std::string, Vec>>& data,
      double* loss_out = nullptr) const;

  // Named parameter blocks (row-major matrices and bias vectors), exposed
  // for the optimizer, finite-difference checks, and checkpointing.
  std::map<std::string, Vec>& params() { return params_; }
  const std::map<std::string, Vec>& params() const { return params_; }

  int dim() const { return dim_; }
  const std::string& alphabet() const { return alphabet_; }
  const CharRetrofitConfig& config() const { return config_; }

 private:
  struct Trace;
  void Forward(const std::string& word, Trace* trace) const;
  const Vec& Param(const std::string& name) const;

  std::string alphabet_;
  int dim_ = 0;
  int input_dim_ = 0;  // |alphabet| + 1 (reserved unknown at index 0)
  CharRetrofitConfig config_;
  int char_index_[256] = {0};
  std::map<std::string, Vec> params_;
};

struct CharRetrofitResult {
  CharRetrofitModel model;
  // Loss before each update, then the final loss (iterations + 1 entries).
  std::vector<double> loss_trace;
};

// Full-batch adaptive-moment training for config.iterations updates.
CharRetrofitResult TrainCharRetrofit(
    const std::vector<std::pair<std::string, Vec>>& data,
    const std::string& alphabet, int dim, const CharRetrofitConfig& config);

}  // namespace morsem

#endif
