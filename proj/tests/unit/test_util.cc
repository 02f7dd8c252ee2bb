#include "test_util.h"

namespace morsem::test {

std::vector<std::string> AllStrings(const std::string& alphabet, int max_len) {
  std::vector<std::string> out;
  std::vector<std::string> frontier{""};
  for (int len = 1; len <= max_len; ++len) {
    std::vector<std::string> next;
    for (const auto& s : frontier) {
      for (char ch : alphabet) {
        next.push_back(s + ch);
      }
    }
    out.insert(out.end(), next.begin(), next.end());
    frontier = std::move(next);
  }
  return out;
}

double Coef(const SparseVec& v, int id) {
  for (const auto& [i, x] : v.entries()) {
    if (i == id) return x;
  }
  return 0.0;
}

namespace {

void WalkEdits(const std::string& u, const std::string& w, int limit, int i, int j,
               int n, std::vector<OracleArc>* path,
               std::vector<std::vector<OracleArc>>* out) {
  int U = static_cast<int>(u.size());
  int W = static_cast<int>(w.size());
  if (i == U && j == W) {
    out->push_back(*path);
    return;
  }
  if (i < U && j < W) {
    OracleArc::Kind kind = (u[i] == w[j]) ? OracleArc::kCopy : OracleArc::kSub;
    path->push_back({kind, i + 1, j + 1, n});
    WalkEdits(u, w, limit, i + 1, j + 1, n, path, out);
    path->pop_back();
  }
  if (j < W) {
    path->push_back({OracleArc::kDel, i, j + 1, n});
    WalkEdits(u, w, limit, i, j + 1, n, path, out);
    path->pop_back();
  }
  if (i < U && n < limit) {
    path->push_back({OracleArc::kIns, i + 1, j, n + 1});
    WalkEdits(u, w, limit, i + 1, j, n + 1, path, out);
    path->pop_back();
  }
}

void WalkSegs(const std::string& u, int max_len, int num_labels, std::size_t pos,
              LabeledSegmentation* cur, std::vector<LabeledSegmentation>* out) {
  if (pos == u.size()) {
    out->push_back(*cur);
    return;
  }
  for (int len = 1; len <= max_len && pos + len <= u.size(); ++len) {
    cur->segments.push_back(u.substr(pos, len));
    for (int l = 0; l < num_labels; ++l) {
      cur->labels.push_back(static_cast<Label>(l));
      WalkSegs(u, max_len, num_labels, pos + len, cur, out);
      cur->labels.pop_back();
    }
    cur->segments.pop_back();
  }
}

}  // namespace

std::vector<std::vector<OracleArc>> EnumerateEditPaths(const std::string& u,
                                                       const std::string& w,
                                                       int limit) {
  std::vector<std::vector<OracleArc>> out;
  std::vector<OracleArc> path;
  WalkEdits(u, w, limit, 0, 0, 0, &path, &out);
  return out;
}

std::vector<LabeledSegmentation> EnumerateSegmentations(const std::string& u,
                                                        int max_len,
                                                        int num_labels) {
  std::vector<LabeledSegmentation> out;
  LabeledSegmentation cur;
  WalkSegs(u, max_len, num_labels, 0, &cur, &out);
  return out;
}

}  // namespace morsem::test
