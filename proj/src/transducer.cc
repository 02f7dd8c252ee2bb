#include "transducer.h"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "errors.h"
#include "logmath.h"

namespace morsem {
namespace {

constexpr char kNoChar = '\x01';

enum Kind : int { kCopy = 0, kSub = 1, kIns = 2, kDel = 3, kStop = 4 };
constexpr const char* kKindName[] = {"cpy", "sub", "ins", "del", "stop"};

// Full description of one edit operation in context; everything a feature
// template may look at.
struct ArcCtx {
  int kind;
  char x = kNoChar;    // consumed input symbol
  char y = kNoChar;    // produced output symbol
  char wl1 = kNoChar;  // input chars left of the edit site (wl1 adjacent)
  char wl2 = kNoChar;
  char wr1 = kNoChar;  // input chars right of the edit site (wr1 adjacent)
  char wr2 = kNoChar;
  char ul1 = kNoChar;  // most recent output char before this op
  bool at_begin = false;
  bool at_end = false;
};

std::uint64_t PackCtx(const ArcCtx& c) {
  auto u8 = [](char ch) { return static_cast<std::uint64_t>(static_cast<unsigned char>(ch)); };
  std::uint64_t key = static_cast<std::uint64_t>(c.kind);
  key |= u8(c.x) << 3;
  key |= u8(c.y) << 11;
  key |= u8(c.wl1) << 19;
  key |= u8(c.wl2) << 27;
  key |= u8(c.wr1) << 35;
  key |= u8(c.wr2) << 43;
  key |= u8(c.ul1) << 51;
  key |= static_cast<std::uint64_t>(c.at_begin) << 59;
  key |= static_cast<std::uint64_t>(c.at_end) << 60;
  return key;
}

void AppendEditFeatures(const ArcCtx& c, std::vector<std::string>* out) {
  std::string base = "E|";
  base += kKindName[c.kind];
  base += '|';
  base += c.x;
  base += '|';
  base += c.y;
  out->push_back(base);
  out->push_back("IL1|" + base.substr(2) + '|' + c.wl1);
  {
    std::string f = "IL2|" + base.substr(2) + '|';
    f += c.wl2;
    f += c.wl1;
    out->push_back(std::move(f));
  }
  out->push_back("IR1|" + base.substr(2) + '|' + c.wr1);
  {
    std::string f = "IR2|" + base.substr(2) + '|';
    f += c.wr1;
    f += c.wr2;
    out->push_back(std::move(f));
  }
  out->push_back("OL1|" + base.substr(2) + '|' + c.ul1);
  if (c.at_begin) out->push_back(std::string("BND|B|") + kKindName[c.kind]);
  if (c.at_end) out->push_back(std::string("BND|E|") + kKindName[c.kind]);
}

const std::vector<int>& CtxIds(const ArcCtx& c, const TransducerParams& params,
                               TransducerParams* grow) {
  std::uint64_t key = PackCtx(c);
  int index_size = params.feature_index.size();
  if (const std::vector<int>* hit = params.cache.Find(key, index_size)) {
    if (grow == nullptr) return *hit;
    bool complete = std::all_of(hit->begin(), hit->end(), [](int id) { return id >= 0; });
    if (complete) return *hit;
  }
  std::vector<std::string> tmpls;
  tmpls.reserve(8);
  AppendEditFeatures(c, &tmpls);
  std::vector<int> ids;
  ids.reserve(tmpls.size());
  bool complete = true;
  for (const auto& t : tmpls) {
    int id = grow ? grow->feature_index.Intern(t) : params.feature_index.Lookup(t);
    if (id < 0) complete = false;
    ids.push_back(id);
  }
  if (grow) grow->SyncWeights();
  params.cache.Put(key, std::move(ids), complete, params.feature_index.size());
  return *params.cache.Find(key, params.feature_index.size());
}

double ArcWeight(const std::vector<int>& ids, const TransducerParams& params) {
  double s = 0.0;
  for (int id : ids) s += params.Weight(id);
  return s;
}

// Context of the copy/sub/del arc entering lattice node (i, j, n): it
// consumed w[j-1] and (unless a delete) produced u[i-1].
ArcCtx ConsumeCtx(const std::string& u, const std::string& w, int i, int j, int kind) {
  int wlen = static_cast<int>(w.size());
  ArcCtx c;
  c.kind = kind;
  c.x = w[j - 1];
  c.y = (kind == kDel) ? kNoChar : u[i - 1];
  c.wl1 = j >= 2 ? w[j - 2] : kNoChar;
  c.wl2 = j >= 3 ? w[j - 3] : kNoChar;
  c.wr1 = j < wlen ? w[j] : kNoChar;
  c.wr2 = j + 1 < wlen ? w[j + 1] : kNoChar;
  int produced = (kind == kDel) ? i : i - 1;
  c.ul1 = produced >= 1 ? u[produced - 1] : kNoChar;
  c.at_begin = (j == 1);
  c.at_end = (j == wlen);
  return c;
}

// Context of the insert arc entering node (i, j, n): it produced u[i-1]
// between input positions j-1 and j.
ArcCtx InsertCtx(const std::string& u, const std::string& w, int i, int j) {
  int wlen = static_cast<int>(w.size());
  ArcCtx c;
  c.kind = kIns;
  c.y = u[i - 1];
  c.wl1 = j >= 1 ? w[j - 1] : kNoChar;
  c.wl2 = j >= 2 ? w[j - 2] : kNoChar;
  c.wr1 = j < wlen ? w[j] : kNoChar;
  c.wr2 = j + 1 < wlen ? w[j + 1] : kNoChar;
  c.ul1 = i >= 2 ? u[i - 2] : kNoChar;
  c.at_begin = (j == 0);
  c.at_end = (j == wlen);
  return c;
}

std::vector<int> MakeCharCode(const std::string& alpha) {
  std::vector<int> code(256, -1);
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    code[static_cast<unsigned char>(alpha[i])] = static_cast<int>(i);
  }
  return code;
}

void ValidateSymbols(const std::string& s, const std::vector<int>& code,
                     const std::string& what) {
  for (char ch : s) {
    if (code[static_cast<unsigned char>(ch)] < 0) {
      throw DataError("symbol '" + std::string(1, ch) + "' in " + what +
                      " is outside the transducer alphabet");
    }
  }
}

}  // namespace

const std::vector<int>* ArcFeatureCache::Find(std::uint64_t key, int index_size) const {
  auto it = map_.find(key);
  if (it == map_.end()) return nullptr;
  if (it->second.built_at >= 0 && it->second.built_at != index_size) return nullptr;
  return &it->second.ids;
}

void ArcFeatureCache::Put(std::uint64_t key, std::vector<int> ids, bool permanent,
                          int index_size) {
  map_[key] = Entry{std::move(ids), permanent ? -1 : index_size};
}

// Shared forward pass over the edit lattice of (u, w). Weights come from
// `weight_of`, letting the unnormalized factor and q1 reuse one recurrence.
namespace {

template <typename WeightFn>
std::vector<double> LatticeForward(const std::string& u, const std::string& w,
                                   int limit, const WeightFn& weight_of) {
  int U = static_cast<int>(u.size());
  int W = static_cast<int>(w.size());
  int K = limit;
  auto idx = [&](int i, int j, int n) { return (i * (W + 1) + j) * (K + 1) + n; };
  std::vector<double> alpha((U + 1) * (W + 1) * (K + 1), kLogZero);
  alpha[idx(0, 0, 0)] = 0.0;
  for (int i = 0; i <= U; ++i) {
    for (int j = 0; j <= W; ++j) {
      for (int n = 0; n <= K; ++n) {
        double cur = alpha[idx(i, j, n)];
        if (i > 0 && j > 0) {
          int kind = (u[i - 1] == w[j - 1]) ? kCopy : kSub;
          double prev = alpha[idx(i - 1, j - 1, n)];
          if (prev != kLogZero) {
            double wt = weight_of(i, j, n, kind);
            if (wt != kLogZero) cur = LogAdd(cur, prev + wt);
          }
        }
        if (j > 0) {
          double prev = alpha[idx(i, j - 1, n)];
          if (prev != kLogZero) {
            double wt = weight_of(i, j, n, kDel);
            if (wt != kLogZero) cur = LogAdd(cur, prev + wt);
          }
        }
        if (i > 0 && n > 0) {
          double prev = alpha[idx(i - 1, j, n - 1)];
          if (prev != kLogZero) {
            double wt = weight_of(i, j, n, kIns);
            if (wt != kLogZero) cur = LogAdd(cur, prev + wt);
          }
        }
        alpha[idx(i, j, n)] = cur;
      }
    }
  }
  return alpha;
}

void ValidatePair(const std::string& u, const std::string& w,
                  const TransducerParams& params) {
  if (static_cast<int>(u.size()) > static_cast<int>(w.size()) + params.insertion_limit) {
    throw DataError("underlying string '" + u + "' exceeds surface '" + w +
                    "' by more than the insertion limit");
  }
  ValidateSymbols(u, MakeCharCode(params.output_alphabet), "underlying string");
  ValidateSymbols(w, MakeCharCode(params.alphabet), "surface string");
}

}  // namespace

double TransductionLogScore(const std::string& u, const std::string& w,
                            const TransducerParams& params) {
  ValidatePair(u, w, params);
  int W = static_cast<int>(w.size());
  int K = params.insertion_limit;
  auto weight_of = [&](int i, int j, int n, int kind) {
    (void)n;
    ArcCtx ctx = (kind == kIns) ? InsertCtx(u, w, i, j) : ConsumeCtx(u, w, i, j, kind);
    return ArcWeight(CtxIds(ctx, params, nullptr), params);
  };
  std::vector<double> alpha = LatticeForward(u, w, K, weight_of);
  int U = static_cast<int>(u.size());
  auto idx = [&](int i, int j, int n) { return (i * (W + 1) + j) * (K + 1) + n; };
  double total = kLogZero;
  for (int n = 0; n <= K; ++n) total = LogAdd(total, alpha[idx(U, W, n)]);
  if (total == kLogZero) {
    throw NumericError("edit lattice for ('" + u + "', '" + w + "') has no path");
  }
  return total;
}

SparseVec TransductionExpectedFeatures(const std::string& u, const std::string& w,
                                       TransducerParams* params) {
  ValidatePair(u, w, *params);
  int U = static_cast<int>(u.size());
  int W = static_cast<int>(w.size());
  int K = params->insertion_limit;
  auto idx = [&](int i, int j, int n) { return (i * (W + 1) + j) * (K + 1) + n; };

  auto arc_ids = [&](int i, int j, int kind) -> const std::vector<int>& {
    ArcCtx ctx = (kind == kIns) ? InsertCtx(u, w, i, j) : ConsumeCtx(u, w, i, j, kind);
    return CtxIds(ctx, *params, params);
  };
  auto weight_of = [&](int i, int j, int n, int kind) {
    (void)n;
    return ArcWeight(arc_ids(i, j, kind), *params);
  };
  std::vector<double> alpha = LatticeForward(u, w, K, weight_of);

  double log_z = kLogZero;
  for (int n = 0; n <= K; ++n) log_z = LogAdd(log_z, alpha[idx(U, W, n)]);
  if (log_z == kLogZero) {
    throw NumericError("edit lattice for ('" + u + "', '" + w + "') has no path");
  }

  // Backward pass mirrors the forward arcs.
  std::vector<double> beta((U + 1) * (W + 1) * (K + 1), kLogZero);
  for (int n = 0; n <= K; ++n) beta[idx(U, W, n)] = 0.0;
  for (int i = U; i >= 0; --i) {
    for (int j = W; j >= 0; --j) {
      for (int n = K; n >= 0; --n) {
        double cur = beta[idx(i, j, n)];
        if (i < U && j < W) {
          int kind = (u[i] == w[j]) ? kCopy : kSub;
          double nxt = beta[idx(i + 1, j + 1, n)];
          if (nxt != kLogZero) {
            cur = LogAdd(cur, nxt + weight_of(i + 1, j + 1, n, kind));
          }
        }
        if (j < W) {
          double nxt = beta[idx(i, j + 1, n)];
          if (nxt != kLogZero) cur = LogAdd(cur, nxt + weight_of(i, j + 1, n, kDel));
        }
        if (i < U && n < K) {
          double nxt = beta[idx(i + 1, j, n + 1)];
          if (nxt != kLogZero) cur = LogAdd(cur, nxt + weight_of(i + 1, j, n + 1, kIns));
        }
        beta[idx(i, j, n)] = cur;
      }
    }
  }

  SparseVec expected;
  auto add_arc = [&](int pi, int pj, int pn, int i, int j, int n, int kind) {
    double a = alpha[idx(pi, pj, pn)];
    double b = beta[idx(i, j, n)];
    if (a == kLogZero || b == kLogZero) return;
    const std::vector<int>& ids = arc_ids(i, j, kind);
    double wt = ArcWeight(ids, *params);
    double post = std::exp(a + wt + b - log_z);
    if (post == 0.0) return;
    for (int id : ids) expected.Add(id, post);
  };
  for (int i = 0; i <= U; ++i) {
    for (int j = 0; j <= W; ++j) {
      for (int n = 0; n <= K; ++n) {
        if (i > 0 && j > 0) add_arc(i - 1, j - 1, n, i, j, n, u[i - 1] == w[j - 1] ? kCopy : kSub);
        if (j > 0) add_arc(i, j - 1, n, i, j, n, kDel);
        if (i > 0 && n > 0) add_arc(i - 1, j, n - 1, i, j, n, kIns);
      }
    }
  }
  expected.Canonicalize();
  return expected;
}

// ---------------------------------------------------------------------------
// Locally normalized proposal.

namespace {

// Context of an action taken at sampler state (j, n, last output char).
ArcCtx ActionCtx(const std::string& w, int j, int action_kind, char x, char y, char ul1) {
  int wlen = static_cast<int>(w.size());
  ArcCtx c;
  c.kind = action_kind;
  c.x = x;
  c.y = y;
  c.ul1 = ul1;
  if (action_kind == kCopy || action_kind == kSub || action_kind == kDel) {
    c.wl1 = j >= 1 ? w[j - 1] : kNoChar;
    c.wl2 = j >= 2 ? w[j - 2] : kNoChar;
    c.wr1 = j + 1 < wlen ? w[j + 1] : kNoChar;
    c.wr2 = j + 2 < wlen ? w[j + 2] : kNoChar;
    c.at_begin = (j == 0);
    c.at_end = (j + 1 == wlen);
  } else {  // insert, stop
    c.wl1 = j >= 1 ? w[j - 1] : kNoChar;
    c.wl2 = j >= 2 ? w[j - 2] : kNoChar;
    if (action_kind == kIns) {
      c.wr1 = j < wlen ? w[j] : kNoChar;
      c.wr2 = j + 1 < wlen ? w[j + 1] : kNoChar;
    }
    c.at_begin = (j == 0);
    c.at_end = (j == wlen);
  }
  return c;
}

}  // namespace

// Action layout per state: 0 = delete, 1 = copy, [2, 2+s) = substitute,
// [2+s, 2+2s) = insert, 2+2s = stop, where s = |output alphabet|.
int Q1Lattice::ActionCount() const { return 3 + 2 * sigma_; }

int Q1Lattice::StateId(int j, int n, int c) const {
  return (j * (limit_ + 1) + n) * (sigma_ + 1) + c;
}

Q1Lattice::Q1Lattice(std::string w, const TransducerParams& params)
    : w_(std::move(w)),
      limit_(params.insertion_limit),
      sigma_(static_cast<int>(params.output_alphabet.size())),
      out_alpha_(params.output_alphabet),
      char_code_(MakeCharCode(params.output_alphabet)) {
  ValidateSymbols(w_, MakeCharCode(params.alphabet), "surface string");
  int W = static_cast<int>(w_.size());
  int A = ActionCount();
  int num_states = (W + 1) * (limit_ + 1) * (sigma_ + 1);
  probs_.assign(num_states * A, 0.0);
  has_action_.assign(num_states * A, 0);

  std::vector<double> scores(A);
  std::vector<int> avail(A);
  for (int j = 0; j <= W; ++j) {
    for (int n = 0; n <= limit_; ++n) {
      for (int c = 0; c <= sigma_; ++c) {
        int state = StateId(j, n, c);
        char ul1 = c == 0 ? kNoChar : out_alpha_[c - 1];
        avail.clear();
        if (j < W) {
          avail.push_back(0);  // delete
          int wc = char_code_[static_cast<unsigned char>(w_[j])];
          if (wc >= 0) avail.push_back(1);  // copy
          for (int y = 0; y < sigma_; ++y) {
            if (y != wc) avail.push_back(2 + y);  // substitute
          }
        }
        if (n < limit_) {
          for (int y = 0; y < sigma_; ++y) avail.push_back(2 + sigma_ + y);
        }
        if (j == W && (c != 0 || n >= limit_)) avail.push_back(2 + 2 * sigma_);
        if (avail.empty()) continue;

        double mx = kLogZero;
        for (int a : avail) {
          ArcCtx ctx;
          if (a == 0) {
            ctx = ActionCtx(w_, j, kDel, w_[j], kNoChar, ul1);
          } else if (a == 1) {
            ctx = ActionCtx(w_, j, kCopy, w_[j], w_[j], ul1);
          } else if (a < 2 + sigma_) {
            ctx = ActionCtx(w_, j, kSub, w_[j], out_alpha_[a - 2], ul1);
          } else if (a < 2 + 2 * sigma_) {
            ctx = ActionCtx(w_, j, kIns, kNoChar, out_alpha_[a - 2 - sigma_], ul1);
          } else {
            ctx = ActionCtx(w_, j, kStop, kNoChar, kNoChar, ul1);
          }
          scores[a] = ArcWeight(CtxIds(ctx, params, nullptr), params);
          mx = std::max(mx, scores[a]);
        }
        double z = 0.0;
        for (int a : avail) z += std::exp(scores[a] - mx);
        double eps = params.epsilon;
        double unif = 1.0 / static_cast<double>(avail.size());
        for (int a : avail) {
          double sm = std::exp(scores[a] - mx) / z;
          probs_[state * A + a] = (1.0 - eps) * sm + eps * unif;
          has_action_[state * A + a] = 1;
        }
      }
    }
  }
}

std::string Q1Lattice::Sample(Rng* rng) const {
  int A = ActionCount();
  std::string u;
  int j = 0, n = 0, c = 0;
  while (true) {
    int state = StateId(j, n, c);
    double r = rng->Uniform();
    double acc = 0.0;
    int chosen = -1;
    for (int a = 0; a < A; ++a) {
      if (!has_action_[state * A + a]) continue;
      acc += probs_[state * A + a];
      chosen = a;
      if (r < acc) break;
    }
    if (chosen < 0) throw NumericError("proposal sampler reached a dead state");
    if (chosen == 0) {  // delete
      ++j;
    } else if (chosen == 1) {  // copy
      u += w_[j];
      c = char_code_[static_cast<unsigned char>(w_[j])] + 1;
      ++j;
    } else if (chosen < 2 + sigma_) {  // substitute
      u += out_alpha_[chosen - 2];
      c = chosen - 2 + 1;
      ++j;
    } else if (chosen < 2 + 2 * sigma_) {  // insert
      u += out_alpha_[chosen - 2 - sigma_];
      c = chosen - 2 - sigma_ + 1;
      ++n;
    } else {  // stop
      break;
    }
  }
  return u;
}

double Q1Lattice::LogProb(const std::string& u) const {
  int U = static_cast<int>(u.size());
  int W = static_cast<int>(w_.size());
  int K = limit_;
  if (U > W + K) return kLogZero;
  int A = ActionCount();
  for (char ch : u) {
    if (char_code_[static_cast<unsigned char>(ch)] < 0) return kLogZero;
  }
  auto code1 = [&](char ch) { return char_code_[static_cast<unsigned char>(ch)] + 1; };
  auto logp = [&](int state, int action) {
    if (!has_action_[state * A + action]) return kLogZero;
    double p = probs_[state * A + action];
    return p > 0.0 ? std::log(p) : kLogZero;
  };
  auto weight_of = [&](int i, int j, int n, int kind) {
    if (kind == kIns) {
      int c = i >= 2 ? code1(u[i - 2]) : 0;
      return logp(StateId(j, n - 1, c), 2 + sigma_ + code1(u[i - 1]) - 1);
    }
    if (kind == kDel) {
      int c = i >= 1 ? code1(u[i - 1]) : 0;
      return logp(StateId(j - 1, n, c), 0);
    }
    int c = i >= 2 ? code1(u[i - 2]) : 0;
    int action = (kind == kCopy) ? 1 : 2 + code1(u[i - 1]) - 1;
    return logp(StateId(j - 1, n, c), action);
  };
  std::vector<double> alpha = LatticeForward(u, w_, K, weight_of);
  auto idx = [&](int i, int j, int n) { return (i * (W + 1) + j) * (K + 1) + n; };
  double total = kLogZero;
  int c_final = U >= 1 ? code1(u[U - 1]) : 0;
  for (int n = 0; n <= K; ++n) {
    double a = alpha[idx(U, W, n)];
    if (a == kLogZero) continue;
    double stop = logp(StateId(W, n, c_final), 2 + 2 * sigma_);
    if (stop == kLogZero) continue;
    total = LogAdd(total, a + stop);
  }
  return total;
}

double Q1LogProb(const std::string& u, const std::string& w,
                 const TransducerParams& params) {
  return Q1Lattice(w, params).LogProb(u);
}

std::pair<std::string, double> SampleQ1(const std::string& w,
                                        const TransducerParams& params, Rng* rng) {
  Q1Lattice lattice(w, params);
  std::string u = lattice.Sample(rng);
  return {u, lattice.LogProb(u)};
}

// ---------------------------------------------------------------------------
// Proposal training: maximize sum over pairs of log q1(u | w).

namespace {

// Per-state tables used by the gradient pass. Rebuilt per pair since the
// weights move between pairs.
struct StateTable {
  std::vector<int> avail;
  std::vector<double> softmax;   // aligned with avail
  std::vector<double> mixture;   // aligned with avail
  std::vector<const std::vector<int>*> ids;  // aligned with avail
};

}  // namespace

TransducerParams TrainProposalQ1(const std::vector<TransductionPair>& pairs,
                                 const TransducerTrainConfig& config) {
  TransducerParams params;
  params.insertion_limit = config.insertion_limit;
  params.epsilon = config.epsilon;
  {
    std::string out, all;
    for (const auto& p : pairs) {
      out += p.u;
      all += p.u;
      all += p.w;
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end()), all.end());
    params.output_alphabet = out;
    params.alphabet = all;
  }
  for (const auto& p : pairs) {
    if (static_cast<int>(p.u.size()) >
        static_cast<int>(p.w.size()) + params.insertion_limit) {
      throw DataError("training pair ('" + p.w + "', '" + p.u +
                      "') exceeds the insertion limit");
    }
  }

  int sigma = static_cast<int>(params.output_alphabet.size());
  std::vector<int> code = MakeCharCode(params.output_alphabet);
  auto code1 = [&](char ch) { return code[static_cast<unsigned char>(ch)] + 1; };
  double eps = params.epsilon;

  std::vector<double> grad_sq;  // AdaGrad accumulators, parallel to omega
  Rng rng(config.seed);
  std::vector<int> order(pairs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.Shuffle(&order);
    for (int pi : order) {
      const std::string& u = pairs[pi].u;
      const std::string& w = pairs[pi].w;
      int U = static_cast<int>(u.size());
      int W = static_cast<int>(w.size());
      int K = params.insertion_limit;

      // Distribution tables for every sampler state this pair can visit.
      std::unordered_map<int, StateTable> tables;
      auto table_of = [&](int j, int n, int c) -> const StateTable& {
        int state = (j * (K + 1) + n) * (sigma + 1) + c;
        auto it = tables.find(state);
        if (it != tables.end()) return it->second;
        StateTable t;
        char ul1 = c == 0 ? kNoChar : params.output_alphabet[c - 1];
        if (j < W) {
          t.avail.push_back(0);
          int wc = code[static_cast<unsigned char>(w[j])];
          if (wc >= 0) t.avail.push_back(1);
          for (int y = 0; y < sigma; ++y) {
            if (y != wc) t.avail.push_back(2 + y);
          }
        }
        if (n < K) {
          for (int y = 0; y < sigma; ++y) t.avail.push_back(2 + sigma + y);
        }
        if (j == W && (c != 0 || n >= K)) t.avail.push_back(2 + 2 * sigma);
        std::vector<double> scores;
        scores.reserve(t.avail.size());
        for (int a : t.avail) {
          ArcCtx ctx;
          if (a == 0) {
            ctx = ActionCtx(w, j, kDel, w[j], kNoChar, ul1);
          } else if (a == 1) {
            ctx = ActionCtx(w, j, kCopy, w[j], w[j], ul1);
          } else if (a < 2 + sigma) {
            ctx = ActionCtx(w, j, kSub, w[j], params.output_alphabet[a - 2], ul1);
          } else if (a < 2 + 2 * sigma) {
            ctx = ActionCtx(w, j, kIns, kNoChar, params.output_alphabet[a - 2 - sigma], ul1);
          } else {
            ctx = ActionCtx(w, j, kStop, kNoChar, kNoChar, ul1);
          }
          t.ids.push_back(&CtxIds(ctx, params, &params));
          scores.push_back(ArcWeight(*t.ids.back(), params));
        }
        double mx = *std::max_element(scores.begin(), scores.end());
        double z = 0.0;
        for (double s : scores) z += std::exp(s - mx);
        double unif = 1.0 / static_cast<double>(t.avail.size());
        t.softmax.resize(scores.size());
        t.mixture.resize(scores.size());
        for (std::size_t a = 0; a < scores.size(); ++a) {
          t.softmax[a] = std::exp(scores[a] - mx) / z;
          t.mixture[a] = (1.0 - eps) * t.softmax[a] + eps * unif;
        }
        return tables.emplace(state, std::move(t)).first->second;
      };

      auto action_logp = [&](int j, int n, int c, int action) {
        const StateTable& t = table_of(j, n, c);
        for (std::size_t a = 0; a < t.avail.size(); ++a) {
          if (t.avail[a] == action) return std::log(t.mixture[a]);
        }
        return kLogZero;
      };

      auto weight_of = [&](int i, int j, int n, int kind) {
        if (kind == kIns) {
          int c = i >= 2 ? code1(u[i - 2]) : 0;
          return action_logp(j, n - 1, c, 2 + sigma + code1(u[i - 1]) - 1);
        }
        if (kind == kDel) {
          int c = i >= 1 ? code1(u[i - 1]) : 0;
          return action_logp(j - 1, n, c, 0);
        }
        int c = i >= 2 ? code1(u[i - 2]) : 0;
        int action = (kind == kCopy) ? 1 : 2 + code1(u[i - 1]) - 1;
        return action_logp(j - 1, n, c, action);
      };

      std::vector<double> alpha = LatticeForward(u, w, K, weight_of);
      auto idx = [&](int i, int j, int n) { return (i * (W + 1) + j) * (K + 1) + n; };
      int c_final = U >= 1 ? code1(u[U - 1]) : 0;
      double log_q = kLogZero;
      for (int n = 0; n <= K; ++n) {
        double a = alpha[idx(U, W, n)];
        if (a == kLogZero) continue;
        double stop = action_logp(W, n, c_final, 2 + 2 * sigma);
        if (stop != kLogZero) log_q = LogAdd(log_q, a + stop);
      }
      if (log_q == kLogZero || !std::isfinite(log_q)) {
        throw NumericError("proposal training: pair ('" + w + "', '" + u +
                           "') has no probability mass");
      }

      std::vector<double> beta((U + 1) * (W + 1) * (K + 1), kLogZero);
      for (int n = 0; n <= K; ++n) {
        double stop = action_logp(W, n, c_final, 2 + 2 * sigma);
        if (stop != kLogZero) beta[idx(U, W, n)] = stop;
      }
      for (int i = U; i >= 0; --i) {
        for (int j = W; j >= 0; --j) {
          for (int n = K; n >= 0; --n) {
            double cur = beta[idx(i, j, n)];
            if (i < U && j < W) {
              double nxt = beta[idx(i + 1, j + 1, n)];
              if (nxt != kLogZero) {
                int kind = (u[i] == w[j]) ? kCopy : kSub;
                double wt = weight_of(i + 1, j + 1, n, kind);
                if (wt != kLogZero) cur = LogAdd(cur, nxt + wt);
              }
            }
            if (j < W) {
              double nxt = beta[idx(i, j + 1, n)];
              if (nxt != kLogZero) {
                double wt = weight_of(i, j + 1, n, kDel);
                if (wt != kLogZero) cur = LogAdd(cur, nxt + wt);
              }
            }
            if (i < U && n < K) {
              double nxt = beta[idx(i + 1, j, n + 1)];
              if (nxt != kLogZero) {
                double wt = weight_of(i + 1, j, n + 1, kIns);
                if (wt != kLogZero) cur = LogAdd(cur, nxt + wt);
              }
            }
            beta[idx(i, j, n)] = cur;
          }
        }
      }

      // gamma(arc) * (1-eps) * softmax/mixture * (phi(a) - E_softmax[phi]).
      SparseVec grad;
      auto add_arc_grad = [&](int j, int n, int c, int action, double log_gamma) {
        if (log_gamma == kLogZero) return;
        double gamma = std::exp(log_gamma);
        const StateTable& t = table_of(j, n, c);
        int slot = -1;
        for (std::size_t a = 0; a < t.avail.size(); ++a) {
          if (t.avail[a] == action) { slot = static_cast<int>(a); break; }
        }
        if (slot < 0) return;
        double scale = gamma * (1.0 - eps) * t.softmax[slot] / t.mixture[slot];
        for (int id : *t.ids[slot]) grad.Add(id, scale);
        for (std::size_t a = 0; a < t.avail.size(); ++a) {
          double s = -scale * t.softmax[a];
          for (int id : *t.ids[a]) grad.Add(id, s);
        }
      };

      for (int i = 0; i <= U; ++i) {
        for (int j = 0; j <= W; ++j) {
          for (int n = 0; n <= K; ++n) {
            double b = beta[idx(i, j, n)];
            if (b == kLogZero) continue;
            if (i > 0 && j > 0 && alpha[idx(i - 1, j - 1, n)] != kLogZero) {
              int kind = (u[i - 1] == w[j - 1]) ? kCopy : kSub;
              int c = i >= 2 ? code1(u[i - 2]) : 0;
              int action = (kind == kCopy) ? 1 : 2 + code1(u[i - 1]) - 1;
              double wt = weight_of(i, j, n, kind);
              if (wt != kLogZero) {
                add_arc_grad(j - 1, n, c, action,
                             alpha[idx(i - 1, j - 1, n)] + wt + b - log_q);
              }
            }
            if (j > 0 && alpha[idx(i, j - 1, n)] != kLogZero) {
              int c = i >= 1 ? code1(u[i - 1]) : 0;
              double wt = weight_of(i, j, n, kDel);
              if (wt != kLogZero) {
                add_arc_grad(j - 1, n, c, 0, alpha[idx(i, j - 1, n)] + wt + b - log_q);
              }
            }
            if (i > 0 && n > 0 && alpha[idx(i - 1, j, n - 1)] != kLogZero) {
              int c = i >= 2 ? code1(u[i - 2]) : 0;
              double wt = weight_of(i, j, n, kIns);
              if (wt != kLogZero) {
                add_arc_grad(j, n - 1, c, 2 + sigma + code1(u[i - 1]) - 1,
                             alpha[idx(i - 1, j, n - 1)] + wt + b - log_q);
              }
            }
          }
        }
      }
      // Final stop decisions.
      for (int n = 0; n <= K; ++n) {
        double a = alpha[idx(U, W, n)];
        if (a == kLogZero) continue;
        double stop = action_logp(W, n, c_final, 2 + 2 * sigma);
        if (stop != kLogZero) {
          add_arc_grad(W, n, c_final, 2 + 2 * sigma, a + stop - log_q);
        }
      }

      grad.Canonicalize();
      grad_sq.resize(params.omega.size(), 0.0);
      for (const auto& [id, g0] : grad.entries()) {
        double g = g0 - 2.0 * config.l2 * params.omega[id];
        grad_sq[id] += g * g;
        params.omega[id] +=
            config.learning_rate * g / (std::sqrt(grad_sq[id]) + config.adagrad_epsilon);
      }
    }
  }
  return params;
}

}  // namespace morsem
