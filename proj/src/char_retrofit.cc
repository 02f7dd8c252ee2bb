#include "char_retrofit.h"

#include <cmath>
#include <cstring>

#include "errors.h"
#include "optim.h"
#include "rng.h"

namespace morsem {
namespace {

double Sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// y += M x for a row-major rows-by-cols matrix.
void MatVecInto(const Vec& m, int rows, int cols, const Vec& x, Vec* y) {
  for (int i = 0; i < rows; ++i) {
    double acc = 0.0;
    const double* row = m.data() + static_cast<std::size_t>(i) * cols;
    for (int j = 0; j < cols; ++j) acc += row[j] * x[j];
    (*y)[i] += acc;
  }
}

// y += M^T x (x is rows-sized, y is cols-sized).
void MatTVecInto(const Vec& m, int rows, int cols, const Vec& x, Vec* y) {
  for (int i = 0; i < rows; ++i) {
    const double* row = m.data() + static_cast<std::size_t>(i) * cols;
    double xi = x[i];
    for (int j = 0; j < cols; ++j) (*y)[j] += row[j] * xi;
  }
}

// G += a x^T (outer product into a rows-by-cols gradient block).
void OuterInto(Vec* g, int rows, int cols, const Vec& a, const Vec& x) {
  for (int i = 0; i < rows; ++i) {
    double ai = a[i];
    double* row = g->data() + static_cast<std::size_t>(i) * cols;
    for (int j = 0; j < cols; ++j) row[j] += ai * x[j];
  }
}

std::string LayerKey(int layer, const char* name) {
  return "l" + std::to_string(layer) + "." + name;
}

}  // namespace

// Per-word forward activations kept for backpropagation through time.
struct CharRetrofitModel::Trace {
  std::vector<Vec> inputs;                // one-hot rows, input_dim each
  std::vector<std::vector<Vec>> h;        // [layer][t] hidden states
  std::vector<std::vector<Vec>> z, r, c;  // gated-only gate activations
};

CharRetrofitModel::CharRetrofitModel(const std::string& alphabet, int dim,
                                     const CharRetrofitConfig& config)
    : dim_(dim), config_(config) {
  if (dim < 1) throw UsageError("target dimension must be >= 1");
  if (config.depth < 1) throw UsageError("depth must be >= 1");
  if (config.hidden < 1) throw UsageError("hidden size must be >= 1");
  if (config.iterations < 0) throw UsageError("iterations must be >= 0");
  if (config.learning_rate <= 0.0) throw UsageError("learning rate must be > 0");
  if (config.l2 < 0.0) throw UsageError("regularization must be >= 0");

  std::memset(char_index_, 0, sizeof(char_index_));
  for (char ch : alphabet) {
    unsigned char b = static_cast<unsigned char>(ch);
    if (char_index_[b] == 0) {
      alphabet_ += ch;
      char_index_[b] = static_cast<int>(alphabet_.size());  // 0 is unknown
    }
  }
  input_dim_ = static_cast<int>(alphabet_.size()) + 1;

  Rng rng(config.seed);
  auto add = [&](const std::string& name, int rows, int cols, bool zero) {
    Vec v(static_cast<std::size_t>(rows) * cols, 0.0);
    if (!zero) {
      double scale = 1.0 / std::sqrt(static_cast<double>(cols));
      for (auto& x : v) x = rng.Uniform(-scale, scale);
    }
    params_.emplace(name, std::move(v));
  };
  int h = config.hidden;
  for (int layer = 0; layer < config.depth; ++layer) {
    int in = layer == 0 ? input_dim_ : h;
    if (config.kind == CharRnnKind::kSimple) {
      add(LayerKey(layer, "A"), h, h, false);
      add(LayerKey(layer, "B"), h, in, false);
      add(LayerKey(layer, "b"), h, 1, true);
    } else {
      for (const char* gate : {"z", "r", "h"}) {
        add(LayerKey(layer, (std::string("W") + gate).c_str()), h, in, false);
        add(LayerKey(layer, (std::string("U") + gate).c_str()), h, h, false);
        add(LayerKey(layer, (std::string("b") + gate).c_str()), h, 1, true);
      }
    }
  }
  add("out.P", dim, h, false);
  add("out.b", dim, 1, true);
}

const Vec& CharRetrofitModel::Param(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) {
    throw UsageError("unknown parameter block '" + name + "'");
  }
  return it->second;
}

void CharRetrofitModel::Forward(const std::string& word, Trace* trace) const {
  int T = static_cast<int>(word.size());
  int H = config_.hidden;
  bool gated = config_.kind == CharRnnKind::kGated;

  trace->inputs.assign(T, Vec(input_dim_, 0.0));
  for (int t = 0; t < T; ++t) {
    trace->inputs[t][char_index_[static_cast<unsigned char>(word[t])]] = 1.0;
  }
  trace->h.assign(config_.depth, {});
  if (gated) {
    trace->z.assign(config_.depth, {});
    trace->r.assign(config_.depth, {});
    trace->c.assign(config_.depth, {});
  }

  Vec zero(H, 0.0);
  for (int layer = 0; layer < config_.depth; ++layer) {
    auto& hs = trace->h[layer];
    hs.assign(T, Vec());
    if (gated) {
      trace->z[layer].assign(T, Vec());
      trace->r[layer].assign(T, Vec());
      trace->c[layer].assign(T, Vec());
    }
    for (int t = 0; t < T; ++t) {
      const Vec& x = layer == 0 ? trace->inputs[t] : trace->h[layer - 1][t];
      const Vec& hp = t == 0 ? zero : hs[t - 1];
      int in = static_cast<int>(x.size());
      if (!gated) {
        Vec a = Param(LayerKey(layer, "b"));
        MatVecInto(Param(LayerKey(layer, "A")), H, H, hp, &a);
        MatVecInto(Param(LayerKey(layer, "B")), H, in, x, &a);
        for (auto& v : a) v = std::tanh(v);
        hs[t] = std::move(a);
      } else {
        Vec az = Param(LayerKey(layer, "bz"));
        MatVecInto(Param(LayerKey(layer, "Wz")), H, in, x, &az);
        MatVecInto(Param(LayerKey(layer, "Uz")), H, H, hp, &az);
        Vec ar = Param(LayerKey(layer, "br"));
        MatVecInto(Param(LayerKey(layer, "Wr")), H, in, x, &ar);
        MatVecInto(Param(LayerKey(layer, "Ur")), H, H, hp, &ar);
        Vec z(H), r(H);
        for (int i = 0; i < H; ++i) z[i] = Sigmoid(az[i]);
        for (int i = 0; i < H; ++i) r[i] = Sigmoid(ar[i]);
        Vec rhp(H);
        for (int i = 0; i < H; ++i) rhp[i] = r[i] * hp[i];
        Vec ah = Param(LayerKey(layer, "bh"));
        MatVecInto(Param(LayerKey(layer, "Wh")), H, in, x, &ah);
        MatVecInto(Param(LayerKey(layer, "Uh")), H, H, rhp, &ah);
        Vec c(H);
        for (int i = 0; i < H; ++i) c[i] = std::tanh(ah[i]);
        Vec hcur(H);
        for (int i = 0; i < H; ++i) {
          hcur[i] = (1.0 - z[i]) * hp[i] + z[i] * c[i];
        }
        trace->z[layer][t] = std::move(z);
        trace->r[layer][t] = std::move(r);
        trace->c[layer][t] = std::move(c);
        hs[t] = std::move(hcur);
      }
    }
  }
}

Vec CharRetrofitModel::Predict(const std::string& word) const {
  if (params_.empty()) throw UsageError("model has no parameters");
  Trace trace;
  Forward(word, &trace);
  Vec out = Param("out.b");
  if (!word.empty()) {
    MatVecInto(Param("out.P"), dim_, config_.hidden,
               trace.h[config_.depth - 1].back(), &out);
  }
  return out;
}

double CharRetrofitModel::Loss(
    const std::vector<std::pair<std::string, Vec>>& data) const {
  double loss = 0.0;
  for (const auto& [word, target] : data) {
    if (static_cast<int>(target.size()) != dim_) {
      throw DataError("target vector for '" + word +
                      "' does not match the model dimension");
    }
    Vec pred = Predict(word);
    for (int i = 0; i < dim_; ++i) {
      double diff = pred[i] - target[i];
      loss += 0.5 * diff * diff;
    }
  }
  for (const auto& [name, p] : params_) {
    (void)name;
    for (double v : p) loss += config_.l2 * v * v;
  }
  return loss;
}

std::map<std::string, Vec> CharRetrofitModel::LossGradient(
    const std::vector<std::pair<std::string, Vec>>& data,
    double* loss_out) const {
  int H = config_.hidden;
  bool gated = config_.kind == CharRnnKind::kGated;
  std::map<std::string, Vec> grads;
  for (const auto& [name, p] : params_) grads.emplace(name, Vec(p.size(), 0.0));
  double loss = 0.0;

  Vec zero(H, 0.0);
  Trace trace;
  for (const auto& [word, target] : data) {
    if (static_cast<int>(target.size()) != dim_) {
      throw DataError("target vector for '" + word +
                      "' does not match the model dimension");
    }
    Forward(word, &trace);
    int T = static_cast<int>(word.size());

    Vec pred = Param("out.b");
    if (T > 0) {
      MatVecInto(Param("out.P"), dim_, H, trace.h[config_.depth - 1][T - 1],
                 &pred);
    }
    Vec dpred(dim_);
    for (int i = 0; i < dim_; ++i) {
      double diff = pred[i] - target[i];
      loss += 0.5 * diff * diff;
      dpred[i] = diff;
    }
    AxpyInto(&grads["out.b"], 1.0, dpred);
    if (T == 0) continue;
    OuterInto(&grads["out.P"], dim_, H, dpred, trace.h[config_.depth - 1][T - 1]);

    // d(loss)/d(h) arriving at each step of the layer currently processed;
    // the top layer is seeded at its last step, lower layers receive the
    // input-gradients of the layer above.
    std::vector<Vec> dout(T, Vec(H, 0.0));
    MatTVecInto(Param("out.P"), dim_, H, dpred, &dout[T - 1]);

    for (int layer = config_.depth - 1; layer >= 0; --layer) {
      int in = layer == 0 ? input_dim_ : H;
      std::vector<Vec> dbelow;
      if (layer > 0) dbelow.assign(T, Vec(H, 0.0));
      Vec carry(H, 0.0);
      for (int t = T - 1; t >= 0; --t) {
        Vec dh = dout[t];
        AxpyInto(&dh, 1.0, carry);
        const Vec& x = layer == 0 ? trace.inputs[t] : trace.h[layer - 1][t];
        const Vec& hp = t == 0 ? zero : trace.h[layer][t - 1];
        Vec dhp(H, 0.0);
        Vec dx(in, 0.0);
        if (!gated) {
          const Vec& h = trace.h[layer][t];
          Vec da(H);
          for (int i = 0; i < H; ++i) da[i] = dh[i] * (1.0 - h[i] * h[i]);
          OuterInto(&grads[LayerKey(layer, "A")], H, H, da, hp);
          OuterInto(&grads[LayerKey(layer, "B")], H, in, da, x);
          AxpyInto(&grads[LayerKey(layer, "b")], 1.0, da);
          MatTVecInto(Param(LayerKey(layer, "A")), H, H, da, &dhp);
          MatTVecInto(Param(LayerKey(layer, "B")), H, in, da, &dx);
        } else {
          const Vec& z = trace.z[layer][t];
          const Vec& r = trace.r[layer][t];
          const Vec& c = trace.c[layer][t];
          Vec daz(H), dah(H);
          for (int i = 0; i < H; ++i) {
            double dz = dh[i] * (c[i] - hp[i]);
            daz[i] = dz * z[i] * (1.0 - z[i]);
            double dc = dh[i] * z[i];
            dah[i] = dc * (1.0 - c[i] * c[i]);
            dhp[i] += dh[i] * (1.0 - z[i]);
          }
          Vec rhp(H), dq(H, 0.0);
          for (int i = 0; i < H; ++i) rhp[i] = r[i] * hp[i];
          OuterInto(&grads[LayerKey(layer, "Wh")], H, in, dah, x);
          OuterInto(&grads[LayerKey(layer, "Uh")], H, H, dah, rhp);
          AxpyInto(&grads[LayerKey(layer, "bh")], 1.0, dah);
          MatTVecInto(Param(LayerKey(layer, "Uh")), H, H, dah, &dq);
          MatTVecInto(Param(LayerKey(layer, "Wh")), H, in, dah, &dx);
          Vec dar(H);
          for (int i = 0; i < H; ++i) {
            double dr = dq[i] * hp[i];
            dhp[i] += dq[i] * r[i];
            dar[i] = dr * r[i] * (1.0 - r[i]);
          }
          OuterInto(&grads[LayerKey(layer, "Wz")], H, in, daz, x);
          OuterInto(&grads[LayerKey(layer, "Uz")], H, H, daz, hp);
          AxpyInto(&grads[LayerKey(layer, "bz")], 1.0, daz);
          MatTVecInto(Param(LayerKey(layer, "Uz")), H, H, daz, &dhp);
          MatTVecInto(Param(LayerKey(layer, "Wz")), H, in, daz, &dx);
          OuterInto(&grads[LayerKey(layer, "Wr")], H, in, dar, x);
          OuterInto(&grads[LayerKey(layer, "Ur")], H, H, dar, hp);
          AxpyInto(&grads[LayerKey(layer, "br")], 1.0, dar);
          MatTVecInto(Param(LayerKey(layer, "Ur")), H, H, dar, &dhp);
          MatTVecInto(Param(LayerKey(layer, "Wr")), H, in, dar, &dx);
        }
        carry = std::move(dhp);
        if (layer > 0) dbelow[t] = std::move(dx);
      }
      if (layer > 0) dout = std::move(dbelow);
    }
  }

  for (auto& [name, g] : grads) {
    const Vec& p = Param(name);
    for (std::size_t i = 0; i < g.size(); ++i) {
      double v = p[i];
      loss += config_.l2 * v * v;
      g[i] += 2.0 * config_.l2 * v;
    }
  }
  if (loss_out) *loss_out = loss;
  return grads;
}

CharRetrofitResult TrainCharRetrofit(
    const std::vector<std::pair<std::string, Vec>>& data,
    const std::string& alphabet, int dim, const CharRetrofitConfig& config) {
  if (data.empty()) throw UsageError("no training words for the char model");
  CharRetrofitResult result{CharRetrofitModel(alphabet, dim, config), {}};
  AdamSlots adam(config.learning_rate, 0.9, 0.999, 1e-8);
  for (int it = 0; it < config.iterations; ++it) {
    double loss = 0.0;
    auto grads = result.model.LossGradient(data, &loss);
    result.loss_trace.push_back(loss);
    for (auto& [name, g] : grads) {
      adam.Step(name, &result.model.params()[name], g);
    }
  }
  result.loss_trace.push_back(result.model.Loss(data));
  return result;
}

}  // namespace morsem
