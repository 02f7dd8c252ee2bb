#include "segmenter.h"

#include <algorithm>
#include <cmath>

#include "errors.h"
#include "logmath.h"

namespace morsem {
namespace {

constexpr char kNoChar = '\x01';

int EffectiveMaxLen(const std::string& u, const SegmenterParams& p) {
  return std::min<int>(p.max_segment_length, static_cast<int>(u.size()));
}

void CheckU(const std::string& u, const SegmenterParams& p) {
  if (u.empty()) throw DataError("cannot segment an empty underlying string");
  if (p.max_segment_length < 1) throw DataError("max segment length must be >= 1");
  if (p.num_labels < 1 || p.num_labels > kNumLabels) {
    throw DataError("label set size out of range");
  }
}

void AppendSegmentFeatures(const std::string& u, int b, int e, int label,
                           std::vector<std::string>* out) {
  int n = static_cast<int>(u.size());
  std::string ln = LabelName(static_cast<Label>(label));
  out->push_back("S|" + ln + "|" + u.substr(b, e - b));
  char l1 = b >= 1 ? u[b - 1] : kNoChar;
  char l2 = b >= 2 ? u[b - 2] : kNoChar;
  char r1 = e < n ? u[e] : kNoChar;
  char r2 = e + 1 < n ? u[e + 1] : kNoChar;
  out->push_back("SL1|" + ln + '|' + l1);
  {
    std::string f = "SL2|" + ln + '|';
    f += l2;
    f += l1;
    out->push_back(std::move(f));
  }
  out->push_back("SR1|" + ln + '|' + r1);
  {
    std::string f = "SR2|" + ln + '|';
    f += r1;
    f += r2;
    out->push_back(std::move(f));
  }
  int bucket = std::min(e - b, 7);
  out->push_back("LEN|" + ln + '|' + static_cast<char>('0' + bucket));
  if (b == 0) out->push_back("BW|" + ln);
  if (e == n) out->push_back("EW|" + ln);
}

const std::vector<int>& CachedIds(const std::string& key,
                                  const std::vector<std::string>& tmpls,
                                  const SegmenterParams& params,
                                  SegmenterParams* grow) {
  int index_size = params.feature_index.size();
  if (const std::vector<int>* hit = params.cache.Find(key, index_size)) {
    if (grow == nullptr ||
        std::all_of(hit->begin(), hit->end(), [](int id) { return id >= 0; })) {
      return *hit;
    }
  }
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

const std::vector<int>& SegIds(const std::string& u, int b, int e, int label,
                               const SegmenterParams& params, SegmenterParams* grow) {
  int n = static_cast<int>(u.size());
  std::string key;
  key.reserve(e - b + 8);
  key += static_cast<char>('0' + label);
  key += static_cast<char>('0' + (b == 0 ? 1 : 0) + (e == n ? 2 : 0));
  key += b >= 2 ? u[b - 2] : kNoChar;
  key += b >= 1 ? u[b - 1] : kNoChar;
  key += e < n ? u[e] : kNoChar;
  key += e + 1 < n ? u[e + 1] : kNoChar;
  key += '\x1f';
  key.append(u, b, e - b);
  if (const std::vector<int>* hit = params.cache.Find(key, params.feature_index.size())) {
    if (grow == nullptr ||
        std::all_of(hit->begin(), hit->end(), [](int id) { return id >= 0; })) {
      return *hit;
    }
  }
  std::vector<std::string> tmpls;
  tmpls.reserve(9);
  AppendSegmentFeatures(u, b, e, label, &tmpls);
  return CachedIds(key, tmpls, params, grow);
}

// from == num_labels stands for BOS; to == num_labels stands for EOS.
const std::vector<int>& TransIds(int from, int to, const SegmenterParams& params,
                                 SegmenterParams* grow) {
  std::string key = "T";
  key += static_cast<char>('0' + from);
  key += static_cast<char>('0' + to);
  if (const std::vector<int>* hit = params.cache.Find(key, params.feature_index.size())) {
    if (grow == nullptr ||
        std::all_of(hit->begin(), hit->end(), [](int id) { return id >= 0; })) {
      return *hit;
    }
  }
  std::string name = "T|";
  name += (from == kNumLabels || from == params.num_labels)
              ? "BOS"
              : LabelName(static_cast<Label>(from));
  name += '|';
  name += (to == kNumLabels || to == params.num_labels)
              ? "EOS"
              : LabelName(static_cast<Label>(to));
  std::vector<std::string> tmpls{std::move(name)};
  return CachedIds(key, tmpls, params, grow);
}

double IdsWeight(const std::vector<int>& ids, const SegmenterParams& params) {
  double s = 0.0;
  for (int id : ids) s += params.Weight(id);
  return s;
}

void ValidateSegmentation(const LabeledSegmentation& seg, const std::string& u,
                          const SegmenterParams& params) {
  if (seg.size() == 0) throw DataError("empty segmentation");
  if (seg.labels.size() != seg.segments.size()) {
    throw DataError("segment/label count mismatch");
  }
  std::size_t total = 0;
  for (const auto& piece : seg.segments) {
    if (piece.empty()) throw DataError("empty segment");
    if (static_cast<int>(piece.size()) > params.max_segment_length) {
      throw DataError("segment '" + piece + "' exceeds the maximum length");
    }
    total += piece.size();
  }
  for (Label l : seg.labels) {
    if (static_cast<int>(l) >= params.num_labels) {
      throw DataError("label outside the configured label set");
    }
  }
  if (total != u.size() || ConcatSegments(seg) != u) {
    throw DataError("segments do not concatenate to '" + u + "'");
  }
}

}  // namespace

const std::vector<int>* SegFeatureCache::Find(const std::string& key,
                                              int index_size) const {
  auto it = map_.find(key);
  if (it == map_.end()) return nullptr;
  if (it->second.built_at >= 0 && it->second.built_at != index_size) return nullptr;
  return &it->second.ids;
}

void SegFeatureCache::Put(const std::string& key, std::vector<int> ids,
                          bool permanent, int index_size) {
  map_[key] = Entry{std::move(ids), permanent ? -1 : index_size};
}

double SegmentationLogScore(const LabeledSegmentation& seg, const std::string& u,
                            const SegmenterParams& params) {
  CheckU(u, params);
  ValidateSegmentation(seg, u, params);
  double score = 0.0;
  int pos = 0;
  int prev = params.num_labels;  // BOS
  for (int i = 0; i < seg.size(); ++i) {
    int len = static_cast<int>(seg.segments[i].size());
    int label = static_cast<int>(seg.labels[i]);
    score += IdsWeight(SegIds(u, pos, pos + len, label, params, nullptr), params);
    score += IdsWeight(TransIds(prev, label, params, nullptr), params);
    prev = label;
    pos += len;
  }
  score += IdsWeight(TransIds(prev, params.num_labels, params, nullptr), params);
  return score;
}

SparseVec SegmentationFeatures(const LabeledSegmentation& seg, const std::string& u,
                               SegmenterParams* params) {
  CheckU(u, *params);
  ValidateSegmentation(seg, u, *params);
  SparseVec out;
  int pos = 0;
  int prev = params->num_labels;
  for (int i = 0; i < seg.size(); ++i) {
    int len = static_cast<int>(seg.segments[i].size());
    int label = static_cast<int>(seg.labels[i]);
    for (int id : SegIds(u, pos, pos + len, label, *params, params)) out.Add(id, 1.0);
    for (int id : TransIds(prev, label, *params, params)) out.Add(id, 1.0);
    prev = label;
    pos += len;
  }
  for (int id : TransIds(prev, params->num_labels, *params, params)) out.Add(id, 1.0);
  out.Canonicalize();
  return out;
}

namespace {

// Forward masses: alpha[j][l] sums segmentations of u[0..j) ending in label l,
// with BOS transition included and EOS excluded.
std::vector<double> SemiCrfForward(const std::string& u, const SegmenterParams& params,
                                   SegmenterParams* grow) {
  int n = static_cast<int>(u.size());
  int L = params.num_labels;
  int max_len = EffectiveMaxLen(u, params);
  std::vector<double> alpha((n + 1) * L, kLogZero);
  for (int e = 1; e <= n; ++e) {
    for (int l = 0; l < L; ++l) {
      double acc = kLogZero;
      for (int b = std::max(0, e - max_len); b < e; ++b) {
        double sw = IdsWeight(SegIds(u, b, e, l, params, grow), params);
        if (b == 0) {
          acc = LogAdd(acc, IdsWeight(TransIds(L, l, params, grow), params) + sw);
        } else {
          for (int lp = 0; lp < L; ++lp) {
            double a = alpha[b * L + lp];
            if (a == kLogZero) continue;
            acc = LogAdd(acc, a + IdsWeight(TransIds(lp, l, params, grow), params) + sw);
          }
        }
      }
      alpha[e * L + l] = acc;
    }
  }
  return alpha;
}

}  // namespace

double SemiCrfLogPartition(const std::string& u, const SegmenterParams& params) {
  CheckU(u, params);
  int n = static_cast<int>(u.size());
  int L = params.num_labels;
  std::vector<double> alpha = SemiCrfForward(u, params, nullptr);
  double log_z = kLogZero;
  for (int l = 0; l < L; ++l) {
    double a = alpha[n * L + l];
    if (a == kLogZero) continue;
    log_z = LogAdd(log_z, a + IdsWeight(TransIds(l, L, params, nullptr), params));
  }
  if (!std::isfinite(log_z)) {
    throw NumericError("semi-CRF partition for '" + u + "' is not finite");
  }
  return log_z;
}

SparseVec SemiCrfExpectedFeatures(const std::string& u, SegmenterParams* params) {
  CheckU(u, *params);
  int n = static_cast<int>(u.size());
  int L = params->num_labels;
  int max_len = EffectiveMaxLen(u, *params);
  std::vector<double> alpha = SemiCrfForward(u, *params, params);

  // beta[j][l]: completion mass after position j given previous label l,
  // EOS included.
  std::vector<double> beta((n + 1) * L, kLogZero);
  double log_z = kLogZero;
  for (int l = 0; l < L; ++l) {
    beta[n * L + l] = IdsWeight(TransIds(l, L, *params, params), *params);
    double a = alpha[n * L + l];
    if (a != kLogZero) log_z = LogAdd(log_z, a + beta[n * L + l]);
  }
  if (!std::isfinite(log_z)) {
    throw NumericError("semi-CRF partition for '" + u + "' is not finite");
  }
  for (int b = n - 1; b >= 0; --b) {
    for (int lp = 0; lp < L; ++lp) {
      double acc = kLogZero;
      for (int e = b + 1; e <= std::min(n, b + max_len); ++e) {
        for (int l = 0; l < L; ++l) {
          double nxt = beta[e * L + l];
          if (nxt == kLogZero) continue;
          double sw = IdsWeight(SegIds(u, b, e, l, *params, params), *params);
          acc = LogAdd(acc, IdsWeight(TransIds(lp, l, *params, params), *params) + sw + nxt);
        }
      }
      beta[b * L + lp] = acc;
    }
  }

  SparseVec expected;
  auto add_ids = [&](const std::vector<int>& ids, double post) {
    for (int id : ids) expected.Add(id, post);
  };
  for (int b = 0; b < n; ++b) {
    for (int e = b + 1; e <= std::min(n, b + max_len); ++e) {
      for (int l = 0; l < L; ++l) {
        double tail = beta[e * L + l];
        if (tail == kLogZero) continue;
        const std::vector<int>& seg_ids = SegIds(u, b, e, l, *params, params);
        double sw = IdsWeight(seg_ids, *params);
        if (b == 0) {
          const std::vector<int>& t_ids = TransIds(L, l, *params, params);
          double post = std::exp(IdsWeight(t_ids, *params) + sw + tail - log_z);
          if (post > 0.0) {
            add_ids(seg_ids, post);
            add_ids(t_ids, post);
          }
        } else {
          for (int lp = 0; lp < L; ++lp) {
            double a = alpha[b * L + lp];
            if (a == kLogZero) continue;
            const std::vector<int>& t_ids = TransIds(lp, l, *params, params);
            double post = std::exp(a + IdsWeight(t_ids, *params) + sw + tail - log_z);
            if (post > 0.0) {
              add_ids(seg_ids, post);
              add_ids(t_ids, post);
            }
          }
        }
      }
    }
  }
  // EOS occupancy.
  for (int l = 0; l < L; ++l) {
    double a = alpha[n * L + l];
    if (a == kLogZero) continue;
    const std::vector<int>& t_ids = TransIds(l, L, *params, params);
    double post = std::exp(a + IdsWeight(t_ids, *params) - log_z);
    if (post > 0.0) add_ids(t_ids, post);
  }
  expected.Canonicalize();
  return expected;
}

LabeledSegmentation SemiCrfViterbi(const std::string& u, const SegmenterParams& params) {
  CheckU(u, params);
  int n = static_cast<int>(u.size());
  int L = params.num_labels;
  int max_len = EffectiveMaxLen(u, params);

  struct Cell {
    double score = kLogZero;
    int count = 0;
    std::string labels;
    int back_b = -1;
    int back_l = -1;  // L means BOS
  };
  // candidate (score, count, labels) beats incumbent?
  auto better = [](double s, int c, const std::string& lab, const Cell& inc) {
    if (s != inc.score) return s > inc.score;
    if (c != inc.count) return c < inc.count;
    return lab < inc.labels;
  };

  std::vector<Cell> cells((n + 1) * L);
  for (int e = 1; e <= n; ++e) {
    for (int l = 0; l < L; ++l) {
      Cell& cell = cells[e * L + l];
      for (int b = std::max(0, e - max_len); b < e; ++b) {
        double sw = IdsWeight(SegIds(u, b, e, l, params, nullptr), params);
        if (b == 0) {
          double s = IdsWeight(TransIds(L, l, params, nullptr), params) + sw;
          std::string lab(1, static_cast<char>('0' + l));
          if (cell.back_b < 0 || better(s, 1, lab, cell)) {
            cell = Cell{s, 1, std::move(lab), 0, L};
          }
        } else {
          for (int lp = 0; lp < L; ++lp) {
            const Cell& prev = cells[b * L + lp];
            if (prev.back_b < 0) continue;
            double s = prev.score +
                       IdsWeight(TransIds(lp, l, params, nullptr), params) + sw;
            std::string lab = prev.labels + static_cast<char>('0' + l);
            if (cell.back_b < 0 || better(s, prev.count + 1, lab, cell)) {
              cell = Cell{s, prev.count + 1, std::move(lab), b, lp};
            }
          }
        }
      }
    }
  }

  int best_l = -1;
  Cell best;
  for (int l = 0; l < L; ++l) {
    const Cell& c = cells[n * L + l];
    if (c.back_b < 0) continue;
    double s = c.score + IdsWeight(TransIds(l, L, params, nullptr), params);
    if (best_l < 0 || better(s, c.count, c.labels, best)) {
      best = Cell{s, c.count, c.labels, c.back_b, c.back_l};
      best_l = l;
    }
  }
  if (best_l < 0) throw NumericError("no segmentation found for '" + u + "'");

  LabeledSegmentation seg;
  int e = n, l = best_l;
  while (e > 0) {
    const Cell& c = cells[e * L + l];
    seg.segments.push_back(u.substr(c.back_b, e - c.back_b));
    seg.labels.push_back(static_cast<Label>(l));
    e = c.back_b;
    l = c.back_l;
  }
  std::reverse(seg.segments.begin(), seg.segments.end());
  std::reverse(seg.labels.begin(), seg.labels.end());
  return seg;
}

int Q2Lattice::SegIndex(int b, int e, int l) const {
  return (b * (n_ + 1) + e) * labels_ + l;
}

Q2Lattice::Q2Lattice(std::string u, const SegmenterParams& params)
    : u_(std::move(u)),
      n_(static_cast<int>(u_.size())),
      max_len_(EffectiveMaxLen(u_, params)),
      labels_(params.num_labels) {
  CheckU(u_, params);
  int L = labels_;
  seg_score_.assign((n_ + 1) * (n_ + 1) * L, kLogZero);
  for (int b = 0; b < n_; ++b) {
    for (int e = b + 1; e <= std::min(n_, b + max_len_); ++e) {
      for (int l = 0; l < L; ++l) {
        seg_score_[SegIndex(b, e, l)] =
            IdsWeight(SegIds(u_, b, e, l, params, nullptr), params);
      }
    }
  }
  trans_.assign((L + 1) * L, 0.0);
  for (int from = 0; from <= L; ++from) {
    for (int to = 0; to < L; ++to) {
      trans_[from * L + to] = IdsWeight(TransIds(from, to, params, nullptr), params);
    }
  }
  eos_.assign(L, 0.0);
  for (int l = 0; l < L; ++l) {
    eos_[l] = IdsWeight(TransIds(l, L, params, nullptr), params);
  }

  alpha_.assign((n_ + 1) * L, kLogZero);
  for (int e = 1; e <= n_; ++e) {
    for (int l = 0; l < L; ++l) {
      double acc = kLogZero;
      for (int b = std::max(0, e - max_len_); b < e; ++b) {
        double sw = seg_score_[SegIndex(b, e, l)];
        if (b == 0) {
          acc = LogAdd(acc, trans_[L * L + l] + sw);
        } else {
          for (int lp = 0; lp < L; ++lp) {
            double a = alpha_[b * L + lp];
            if (a == kLogZero) continue;
            acc = LogAdd(acc, a + trans_[lp * L + l] + sw);
          }
        }
      }
      alpha_[e * L + l] = acc;
    }
  }
  log_z_ = kLogZero;
  for (int l = 0; l < L; ++l) {
    double a = alpha_[n_ * L + l];
    if (a != kLogZero) log_z_ = LogAdd(log_z_, a + eos_[l]);
  }
  if (!std::isfinite(log_z_)) {
    throw NumericError("semi-CRF partition for '" + u_ + "' is not finite");
  }
}

LabeledSegmentation Q2Lattice::Sample(Rng* rng) const {
  int L = labels_;
  // Final label.
  std::vector<double> probs(L, 0.0);
  for (int l = 0; l < L; ++l) {
    double a = alpha_[n_ * L + l];
    if (a != kLogZero) probs[l] = std::exp(a + eos_[l] - log_z_);
  }
  int l = rng->Categorical(probs);

  std::vector<std::pair<int, Label>> spans;  // (begin, label), end implied
  int e = n_;
  while (e > 0) {
    // Candidates: (b, previous label or BOS).
    std::vector<double> cp;
    std::vector<std::pair<int, int>> cand;
    double norm = alpha_[e * L + l];
    for (int b = std::max(0, e - max_len_); b < e; ++b) {
      double sw = seg_score_[SegIndex(b, e, l)];
      if (sw == kLogZero) continue;
      if (b == 0) {
        cand.emplace_back(0, L);
        cp.push_back(std::exp(trans_[L * L + l] + sw - norm));
      } else {
        for (int lp = 0; lp < L; ++lp) {
          double a = alpha_[b * L + lp];
          if (a == kLogZero) continue;
          cand.emplace_back(b, lp);
          cp.push_back(std::exp(a + trans_[lp * L + l] + sw - norm));
        }
      }
    }
    int pick = rng->Categorical(cp);
    int b = cand[pick].first;
    int lp = cand[pick].second;
    spans.emplace_back(b, static_cast<Label>(l));
    if (b == 0) {
      e = 0;
    } else {
      l = lp;
      e = b;
    }
  }

  LabeledSegmentation seg;
  int end = n_;
  for (const auto& [b, lab] : spans) {
    seg.segments.push_back(u_.substr(b, end - b));
    seg.labels.push_back(lab);
    end = b;
  }
  std::reverse(seg.segments.begin(), seg.segments.end());
  std::reverse(seg.labels.begin(), seg.labels.end());
  return seg;
}

double Q2Lattice::Score(const LabeledSegmentation& seg) const {
  double s = 0.0;
  int pos = 0;
  int prev = labels_;  // BOS row
  for (int i = 0; i < seg.size(); ++i) {
    int len = static_cast<int>(seg.segments[i].size());
    int l = static_cast<int>(seg.labels[i]);
    s += seg_score_[SegIndex(pos, pos + len, l)];
    s += trans_[prev * labels_ + l];
    prev = l;
    pos += len;
  }
  s += eos_[prev];
  return s;
}

double Q2Lattice::LogProb(const LabeledSegmentation& seg) const {
  return Score(seg) - log_z_;
}

std::pair<LabeledSegmentation, double> SampleQ2(const std::string& u,
                                                const SegmenterParams& params,
                                                Rng* rng) {
  Q2Lattice lattice(u, params);
  LabeledSegmentation seg = lattice.Sample(rng);
  return {seg, lattice.LogProb(seg)};
}

SegmenterParams TrainProposalQ2(
    const std::vector<std::pair<std::string, LabeledSegmentation>>& data,
    const SegmenterTrainConfig& config) {
  SegmenterParams params;
  params.max_segment_length = config.max_segment_length;
  for (const auto& [u, seg] : data) {
    CheckU(u, params);
    ValidateSegmentation(seg, u, params);
  }
  std::vector<double> grad_sq;
  Rng rng(config.seed);
  std::vector<int> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.Shuffle(&order);
    for (int di : order) {
      const auto& [u, gold] = data[di];
      SparseVec grad = SegmentationFeatures(gold, u, &params);
      grad.AddScaled(SemiCrfExpectedFeatures(u, &params), -1.0);
      grad.Canonicalize();
      grad_sq.resize(params.eta.size(), 0.0);
      for (const auto& [id, g0] : grad.entries()) {
        double g = g0 - 2.0 * config.l2 * params.eta[id];
        grad_sq[id] += g * g;
        params.eta[id] +=
            config.learning_rate * g / (std::sqrt(grad_sq[id]) + config.adagrad_epsilon);
      }
    }
  }
  return params;
}

}  // namespace morsem
