#include "composition.h"

#include <algorithm>
#include <cmath>
#include <map>

#include "errors.h"
#include "optim.h"
#include "rng.h"

namespace morsem {

const char* CompositionKindName(CompositionKind kind) {
  switch (kind) {
    case CompositionKind::kStem: return "stem";
    case CompositionKind::kMult: return "mult";
    case CompositionKind::kAdd: return "add";
    case CompositionKind::kWAdd: return "wadd";
    case CompositionKind::kFullAdd: return "fulladd";
    case CompositionKind::kLds: return "lds";
    case CompositionKind::kRnn: return "rnn";
  }
  return "?";
}

std::optional<CompositionKind> ParseCompositionKind(const std::string& name) {
  if (name == "stem") return CompositionKind::kStem;
  if (name == "mult") return CompositionKind::kMult;
  if (name == "add") return CompositionKind::kAdd;
  if (name == "wadd") return CompositionKind::kWAdd;
  if (name == "fulladd") return CompositionKind::kFullAdd;
  if (name == "lds") return CompositionKind::kLds;
  if (name == "rnn") return CompositionKind::kRnn;
  return std::nullopt;
}

CompositionModel CompositionModel::Create(CompositionKind kind, int dim,
                                          std::uint64_t seed) {
  if (dim <= 0) throw DataError("composition dimension must be positive");
  CompositionModel m;
  m.kind = kind;
  m.dim = dim;
  if (kind == CompositionKind::kWAdd) {
    m.alpha.assign(m.max_positions, 1.0);
  } else if (kind == CompositionKind::kFullAdd) {
    m.position_mats.assign(m.max_positions, Mat::Identity(dim));
  } else if (kind == CompositionKind::kLds || kind == CompositionKind::kRnn) {
    Rng rng(seed);
    m.X = Mat::Identity(dim);
    m.U = Mat::Identity(dim);
    for (double& x : m.X.data) x = 0.9 * x + rng.Uniform(-0.01, 0.01);
    for (double& x : m.U.data) x = 0.9 * x + rng.Uniform(-0.01, 0.01);
    m.h0.assign(dim, 0.0);
  }
  return m;
}

std::vector<Vec> GatherMorphemeVectors(const LabeledSegmentation& seg,
                                       const MorphemeEmbeddings& morphemes,
                                       CompositionKind kind) {
  AbsentPolicy policy = (kind == CompositionKind::kMult) ? AbsentPolicy::kOnes
                                                         : AbsentPolicy::kZeros;
  std::vector<Vec> out;
  out.reserve(seg.size());
  for (int i = 0; i < seg.size(); ++i) {
    out.push_back(morphemes.Get(seg.labels[i], seg.segments[i], policy));
  }
  return out;
}

namespace {

void CheckInputs(const CompositionModel& model, const std::vector<Vec>& inputs) {
  if (inputs.empty()) throw DataError("cannot compose an empty analysis");
  for (const Vec& v : inputs) {
    if (static_cast<int>(v.size()) != model.dim) {
      throw DataError("composition input dimension mismatch");
    }
  }
  if ((model.kind == CompositionKind::kWAdd ||
       model.kind == CompositionKind::kFullAdd) &&
      static_cast<int>(inputs.size()) > model.max_positions) {
    throw DataError("analysis has " + std::to_string(inputs.size()) +
                    " morphemes but positional weights stop at " +
                    std::to_string(model.max_positions));
  }
}

}  // namespace

CompositionTrace ComposeWithTrace(const CompositionModel& model,
                                  const std::vector<Vec>& inputs,
                                  const std::vector<Label>& labels) {
  CheckInputs(model, inputs);
  int n = static_cast<int>(inputs.size());
  int d = model.dim;
  CompositionTrace trace;
  switch (model.kind) {
    case CompositionKind::kStem: {
      trace.output.assign(d, 0.0);
      for (int i = 0; i < n; ++i) {
        if (i < static_cast<int>(labels.size()) && labels[i] == Label::kStem) {
          trace.output = inputs[i];
          trace.stem_index = i;
          break;
        }
      }
      break;
    }
    case CompositionKind::kMult: {
      trace.output.assign(d, 1.0);
      for (const Vec& v : inputs) {
        for (int k = 0; k < d; ++k) trace.output[k] *= v[k];
      }
      break;
    }
    case CompositionKind::kAdd: {
      trace.output.assign(d, 0.0);
      for (const Vec& v : inputs) AxpyInto(&trace.output, 1.0, v);
      break;
    }
    case CompositionKind::kWAdd: {
      trace.output.assign(d, 0.0);
      for (int i = 0; i < n; ++i) AxpyInto(&trace.output, model.alpha[i], inputs[i]);
      break;
    }
    case CompositionKind::kFullAdd: {
      trace.output.assign(d, 0.0);
      Vec tmp;
      for (int i = 0; i < n; ++i) {
        MatVecInto(model.position_mats[i], inputs[i], &tmp);
        AxpyInto(&trace.output, 1.0, tmp);
      }
      break;
    }
    case CompositionKind::kLds:
    case CompositionKind::kRnn: {
      trace.hidden.resize(n + 1);
      trace.hidden[0] = model.h0;
      Vec xh, um;
      for (int i = 1; i <= n; ++i) {
        MatVecInto(model.X, trace.hidden[i - 1], &xh);
        MatVecInto(model.U, inputs[i - 1], &um);
        Vec h(d);
        for (int k = 0; k < d; ++k) {
          double a = xh[k] + um[k];
          h[k] = (model.kind == CompositionKind::kRnn) ? std::tanh(a) : a;
        }
        trace.hidden[i] = std::move(h);
      }
      trace.output = trace.hidden[n];
      break;
    }
  }
  return trace;
}

Vec Compose(const CompositionModel& model, const std::vector<Vec>& inputs,
            const std::vector<Label>& labels) {
  return ComposeWithTrace(model, inputs, labels).output;
}

CompositionGradients ComposeBackward(const CompositionModel& model,
                                     const std::vector<Vec>& inputs,
                                     const CompositionTrace& trace,
                                     const Vec& d_output) {
  CheckInputs(model, inputs);
  if (static_cast<int>(d_output.size()) != model.dim) {
    throw DataError("composition output gradient dimension mismatch");
  }
  int n = static_cast<int>(inputs.size());
  int d = model.dim;
  CompositionGradients g;
  g.inputs.assign(n, Vec(d, 0.0));
  switch (model.kind) {
    case CompositionKind::kStem: {
      if (trace.stem_index >= 0) g.inputs[trace.stem_index] = d_output;
      break;
    }
    case CompositionKind::kMult: {
      // Leave-one-out products via prefix and suffix accumulation; exact
      // even when coordinates are zero.
      std::vector<Vec> prefix(n + 1, Vec(d, 1.0));
      std::vector<Vec> suffix(n + 1, Vec(d, 1.0));
      for (int i = 0; i < n; ++i) {
        for (int k = 0; k < d; ++k) prefix[i + 1][k] = prefix[i][k] * inputs[i][k];
      }
      for (int i = n - 1; i >= 0; --i) {
        for (int k = 0; k < d; ++k) suffix[i][k] = suffix[i + 1][k] * inputs[i][k];
      }
      for (int i = 0; i < n; ++i) {
        for (int k = 0; k < d; ++k) {
          g.inputs[i][k] = d_output[k] * prefix[i][k] * suffix[i + 1][k];
        }
      }
      break;
    }
    case CompositionKind::kAdd: {
      for (int i = 0; i < n; ++i) g.inputs[i] = d_output;
      break;
    }
    case CompositionKind::kWAdd: {
      g.alpha.assign(model.max_positions, 0.0);
      for (int i = 0; i < n; ++i) {
        for (int k = 0; k < d; ++k) g.inputs[i][k] = model.alpha[i] * d_output[k];
        g.alpha[i] = Dot(d_output, inputs[i]);
      }
      break;
    }
    case CompositionKind::kFullAdd: {
      g.position_mats.assign(model.max_positions, Mat(d, d));
      for (int i = 0; i < n; ++i) {
        MatTransVecInto(model.position_mats[i], d_output, &g.inputs[i]);
        AddOuterInto(&g.position_mats[i], 1.0, d_output, inputs[i]);
      }
      break;
    }
    case CompositionKind::kLds:
    case CompositionKind::kRnn: {
      g.X = Mat(d, d);
      g.U = Mat(d, d);
      g.h0.assign(d, 0.0);
      Vec delta = d_output;  // dL/dh_i, walked backwards
      Vec tmp;
      for (int i = n; i >= 1; --i) {
        if (model.kind == CompositionKind::kRnn) {
          for (int k = 0; k < d; ++k) {
            double h = trace.hidden[i][k];
            delta[k] *= (1.0 - h * h);  // through tanh
          }
        }
        AddOuterInto(&g.U, 1.0, delta, inputs[i - 1]);
        AddOuterInto(&g.X, 1.0, delta, trace.hidden[i - 1]);
        MatTransVecInto(model.U, delta, &g.inputs[i - 1]);
        MatTransVecInto(model.X, delta, &tmp);
        delta = tmp;
      }
      g.h0 = delta;
      break;
    }
  }
  return g;
}

double GaussianLogFactor(const Vec& v, const Vec& composed, double sigma_sq) {
  if (sigma_sq <= 0.0) throw DataError("sigma^2 must be positive");
  return -SquaredDistance(v, composed) / (2.0 * sigma_sq);
}

std::vector<double> TrainCompositionGold(CompositionModel* model,
                                         MorphemeEmbeddings* morphemes,
                                         const std::vector<GoldCompositionExample>& data,
                                         const CompositionTrainConfig& config) {
  if (data.empty()) throw DataError("no composition training examples");
  for (const auto& ex : data) {
    if (static_cast<int>(ex.target.size()) != model->dim) {
      throw DataError("composition target dimension mismatch");
    }
    if (ex.seg.size() == 0) throw DataError("empty analysis in composition training");
  }
  AdamSlots adam(config.learning_rate, config.beta1, config.beta2,
                 config.adam_epsilon);
  Rng rng(config.seed);
  std::vector<int> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

  std::vector<double> trace_loss;
  trace_loss.reserve(config.epochs);
  Vec d_out;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.Shuffle(&order);
    double total = 0.0;
    for (int di : order) {
      const GoldCompositionExample& ex = data[di];
      std::vector<Vec> inputs = GatherMorphemeVectors(ex.seg, *morphemes, model->kind);
      CompositionTrace fwd = ComposeWithTrace(*model, inputs, ex.seg.labels);
      d_out.assign(model->dim, 0.0);
      double loss = 0.0;
      for (int k = 0; k < model->dim; ++k) {
        double diff = fwd.output[k] - ex.target[k];
        d_out[k] = diff;
        loss += 0.5 * diff * diff;
      }
      total += loss;
      CompositionGradients g = ComposeBackward(*model, inputs, fwd, d_out);

      if (!g.alpha.empty()) adam.Step("alpha", &model->alpha, g.alpha);
      for (std::size_t i = 0; i < g.position_mats.size(); ++i) {
        adam.Step("P" + std::to_string(i), &model->position_mats[i].data,
                  g.position_mats[i].data);
      }
      if (g.X.rows > 0) adam.Step("X", &model->X.data, g.X.data);
      if (g.U.rows > 0) adam.Step("U", &model->U.data, g.U.data);
      if (!g.h0.empty()) adam.Step("h0", &model->h0, g.h0);

      if (config.train_affixes) {
        // Same affix twice in one analysis: accumulate before stepping.
        std::map<std::pair<int, std::string>, Vec> acc;
        for (int i = 0; i < ex.seg.size(); ++i) {
          Label l = ex.seg.labels[i];
          if (l == Label::kStem) continue;
          auto key = std::make_pair(static_cast<int>(l), ex.seg.segments[i]);
          auto it = acc.find(key);
          if (it == acc.end()) {
            acc.emplace(key, g.inputs[i]);
          } else {
            AxpyInto(&it->second, 1.0, g.inputs[i]);
          }
        }
        for (const auto& [key, grad] : acc) {
          Label l = static_cast<Label>(key.first);
          Vec* v = morphemes->MutableAffix(l, key.second);
          adam.Step("m|" + std::to_string(key.first) + "|" + key.second, v, grad);
        }
      }
    }
    trace_loss.push_back(total / static_cast<double>(data.size()));
  }
  return trace_loss;
}

}  // namespace morsem
