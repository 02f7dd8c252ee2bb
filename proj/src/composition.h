#ifndef MORSEM_COMPOSITION_H
#define MORSEM_COMPOSITION_H

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "analysis.h"
#include "embeddings.h"
#include "linalg.h"

namespace morsem {

// How a word vector is predicted from the vectors of its morphemes.
enum class CompositionKind {
  kStem,     // the stem's vector alone
  kMult,     // elementwise product (absent morphemes read as ones)
  kAdd,      // sum
  kWAdd,     // per-position scalar weights
  kFullAdd,  // per-position square matrices
  kLds,      // linear recurrence h_i = X h_{i-1} + U m_i
  kRnn,      // h_i = tanh(X h_{i-1} + U m_i)
};

const char* CompositionKindName(CompositionKind kind);
std::optional<CompositionKind> ParseCompositionKind(const std::string& name);

struct CompositionModel {
  CompositionKind kind = CompositionKind::kAdd;
  int dim = 0;
  int max_positions = 7;  // positional parameter count for wadd / fulladd

  std::vector<double> alpha;      // wadd, one scalar per position
  std::vector<Mat> position_mats; // fulladd, one matrix per position
  Mat X, U;                       // lds / rnn recurrence and input maps
  Vec h0;                         // lds / rnn initial state (trainable)

  // Positional weights start at identity (alpha 1, matrices I) so the
  // untrained model reduces to plain addition; recurrent maps start near
  // 0.9 I with small uniform noise, the state at zero.
  static CompositionModel Create(CompositionKind kind, int dim, std::uint64_t seed);
};

// Forward pass artifacts the backward pass needs.
struct CompositionTrace {
  Vec output;
  std::vector<Vec> hidden;  // h_0 .. h_N for lds / rnn, else empty
  int stem_index = -1;      // input picked by the stem composition, -1 if none
};

// Morpheme vectors for one labeled segmentation, in order. Stems come from
// the frozen word table; absent morphemes resolve to ones under the
// multiplicative composition and zeros otherwise.
std::vector<Vec> GatherMorphemeVectors(const LabeledSegmentation& seg,
                                       const MorphemeEmbeddings& morphemes,
                                       CompositionKind kind);

CompositionTrace ComposeWithTrace(const CompositionModel& model,
                                  const std::vector<Vec>& inputs,
                                  const std::vector<Label>& labels);

Vec Compose(const CompositionModel& model, const std::vector<Vec>& inputs,
            const std::vector<Label>& labels);

// Gradients of some scalar loss with respect to every composition input and
// parameter, given the loss gradient at the output.
struct CompositionGradients {
  std::vector<Vec> inputs;
  std::vector<double> alpha;
  std::vector<Mat> position_mats;
  Mat X, U;
  Vec h0;
};

CompositionGradients ComposeBackward(const CompositionModel& model,
                                     const std::vector<Vec>& inputs,
                                     const CompositionTrace& trace,
                                     const Vec& d_output);

// log of the vector-fit factor exp(-||v - c||^2 / (2 sigma^2)).
double GaussianLogFactor(const Vec& v, const Vec& composed, double sigma_sq);

struct GoldCompositionExample {
  LabeledSegmentation seg;
  Vec target;
};

struct CompositionTrainConfig {
  int epochs = 200;
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t seed = 1;
  bool train_affixes = true;
};

// Fits composition parameters (and, by default, the affix vectors) to gold
// analyses by squared loss against observed word vectors. Returns the mean
// loss per epoch.
std::vector<double> TrainCompositionGold(CompositionModel* model,
                                         MorphemeEmbeddings* morphemes,
                                         const std::vector<GoldCompositionExample>& data,
                                         const CompositionTrainConfig& config);

}  // namespace morsem

#endif
