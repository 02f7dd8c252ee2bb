#include "checkpoint.h"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "errors.h"

namespace morsem {
namespace {

constexpr const char* kMagic = "morsem-checkpoint 1";

std::string Fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

void WriteDoubles(std::ostream& out, const Vec& xs) {
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out << ' ';
    out << Fmt(xs[i]);
  }
  out << '\n';
}

void CheckConfigText(const std::string& s, const char* what) {
  if (s.find('\t') != std::string::npos || s.find('\n') != std::string::npos) {
    throw UsageError(std::string("checkpoint config ") + what +
                     " may not contain tabs or newlines: '" + s + "'");
  }
}

class LineReader {
 public:
  explicit LineReader(const std::string& path) : path_(path), in_(path) {
    if (!in_) throw DataError("cannot open checkpoint file '" + path + "'");
  }

  std::string Next() {
    std::string line;
    if (!std::getline(in_, line)) Fail("unexpected end of file");
    ++line_no_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  }

  [[noreturn]] void Fail(const std::string& msg) const {
    throw DataError(path_ + ": line " + std::to_string(line_no_) + ": " + msg);
  }

  // "key value..." where the value is everything after the first space
  // (possibly empty when the line is exactly the key).
  std::string Value(const std::string& key) {
    std::string line = Next();
    if (line == key) return "";
    if (line.rfind(key + " ", 0) != 0) {
      Fail("expected '" + key + "', found '" + line + "'");
    }
    return line.substr(key.size() + 1);
  }

  long Integer(const std::string& key) {
    std::string v = Value(key);
    try {
      std::size_t used = 0;
      long x = std::stol(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return x;
    } catch (const std::exception&) {
      Fail("expected an integer for '" + key + "', found '" + v + "'");
    }
  }

  double Double(const std::string& key) {
    std::string v = Value(key);
    std::istringstream iss(v);
    double x;
    if (!(iss >> x) || !(iss >> std::ws).eof()) {
      Fail("expected a number for '" + key + "', found '" + v + "'");
    }
    return x;
  }

  Vec Doubles(std::size_t count) {
    std::string line = Next();
    std::istringstream iss(line);
    Vec xs;
    xs.reserve(count);
    double x;
    while (iss >> x) xs.push_back(x);
    if (xs.size() != count) {
      Fail("expected " + std::to_string(count) + " numbers, found " +
           std::to_string(xs.size()));
    }
    return xs;
  }

  void Expect(const std::string& literal) {
    std::string line = Next();
    if (line != literal) {
      Fail("expected '" + literal + "', found '" + line + "'");
    }
  }

 private:
  std::string path_;
  std::ifstream in_;
  int line_no_ = 0;
};

// --- feature index ---------------------------------------------------------

void WriteFeatures(std::ostream& out, const FeatureIndex& index) {
  out << "features " << index.size() << '\n';
  for (int id = 0; id < index.size(); ++id) {
    out << id << '\t' << index.name(id) << '\n';
  }
}

FeatureIndex ReadFeatures(LineReader* r) {
  long n = r->Integer("features");
  if (n < 0) r->Fail("negative feature count");
  FeatureIndex index;
  for (long i = 0; i < n; ++i) {
    std::string line = r->Next();
    auto tab = line.find('\t');
    if (tab == std::string::npos) r->Fail("expected 'id<TAB>template'");
    std::string id_text = line.substr(0, tab);
    std::string tmpl = line.substr(tab + 1);
    if (id_text != std::to_string(i)) {
      r->Fail("feature ids must be consecutive from 0; found '" + id_text + "'");
    }
    if (index.Intern(tmpl) != i) r->Fail("duplicate feature template '" + tmpl + "'");
  }
  return index;
}

// --- component blocks ------------------------------------------------------

void WriteTransducer(std::ostream& out, const std::string& block,
                     const TransducerParams& t) {
  out << "block " << block << '\n';
  out << "insertion_limit " << t.insertion_limit << '\n';
  out << "epsilon " << Fmt(t.epsilon) << '\n';
  out << "alphabet " << t.alphabet << '\n';
  out << "output_alphabet " << t.output_alphabet << '\n';
  WriteFeatures(out, t.feature_index);
  out << "weights " << t.omega.size() << '\n';
  WriteDoubles(out, t.omega);
}

TransducerParams ReadTransducer(LineReader* r, const std::string& block) {
  r->Expect("block " + block);
  TransducerParams t;
  t.insertion_limit = static_cast<int>(r->Integer("insertion_limit"));
  t.epsilon = r->Double("epsilon");
  t.alphabet = r->Value("alphabet");
  t.output_alphabet = r->Value("output_alphabet");
  t.feature_index = ReadFeatures(r);
  long m = r->Integer("weights");
  if (m < 0) r->Fail("negative weight count");
  t.omega = r->Doubles(static_cast<std::size_t>(m));
  return t;
}

void WriteSegmenter(std::ostream& out, const std::string& block,
                    const SegmenterParams& s) {
  out << "block " << block << '\n';
  out << "max_segment_length " << s.max_segment_length << '\n';
  out << "num_labels " << s.num_labels << '\n';
  WriteFeatures(out, s.feature_index);
  out << "weights " << s.eta.size() << '\n';
  WriteDoubles(out, s.eta);
}

SegmenterParams ReadSegmenter(LineReader* r, const std::string& block) {
  r->Expect("block " + block);
  SegmenterParams s;
  s.max_segment_length = static_cast<int>(r->Integer("max_segment_length"));
  s.num_labels = static_cast<int>(r->Integer("num_labels"));
  s.feature_index = ReadFeatures(r);
  long m = r->Integer("weights");
  if (m < 0) r->Fail("negative weight count");
  s.eta = r->Doubles(static_cast<std::size_t>(m));
  return s;
}

void WriteMat(std::ostream& out, const std::string& name, const Mat& m) {
  out << "mat " << name << ' ' << m.rows << ' ' << m.cols << '\n';
  WriteDoubles(out, m.data);
}

Mat ReadMat(LineReader* r, const std::string& name) {
  std::string header = r->Next();
  std::istringstream iss(header);
  std::string tag, got;
  int rows = -1, cols = -1;
  if (!(iss >> tag >> got >> rows >> cols) || tag != "mat" || got != name ||
      rows < 0 || cols < 0 || !(iss >> std::ws).eof()) {
    r->Fail("expected 'mat " + name + " <rows> <cols>', found '" + header + "'");
  }
  Mat m(rows, cols);
  m.data = r->Doubles(static_cast<std::size_t>(rows) * cols);
  return m;
}

void WriteComposition(std::ostream& out, const CompositionModel& c) {
  out << "block composition\n";
  out << "kind " << CompositionKindName(c.kind) << '\n';
  out << "dim " << c.dim << '\n';
  out << "max_positions " << c.max_positions << '\n';
  out << "alpha " << c.alpha.size() << '\n';
  WriteDoubles(out, c.alpha);
  out << "position_mats " << c.position_mats.size() << '\n';
  for (std::size_t i = 0; i < c.position_mats.size(); ++i) {
    WriteMat(out, "P" + std::to_string(i), c.position_mats[i]);
  }
  WriteMat(out, "X", c.X);
  WriteMat(out, "U", c.U);
  out << "h0 " << c.h0.size() << '\n';
  WriteDoubles(out, c.h0);
}

CompositionModel ReadComposition(LineReader* r) {
  r->Expect("block composition");
  CompositionModel c;
  std::string kind_name = r->Value("kind");
  auto kind = ParseCompositionKind(kind_name);
  if (!kind) r->Fail("unknown composition kind '" + kind_name + "'");
  c.kind = *kind;
  c.dim = static_cast<int>(r->Integer("dim"));
  c.max_positions = static_cast<int>(r->Integer("max_positions"));
  long na = r->Integer("alpha");
  if (na < 0) r->Fail("negative alpha count");
  c.alpha = r->Doubles(static_cast<std::size_t>(na));
  long nm = r->Integer("position_mats");
  if (nm < 0) r->Fail("negative matrix count");
  for (long i = 0; i < nm; ++i) {
    c.position_mats.push_back(ReadMat(r, "P" + std::to_string(i)));
  }
  c.X = ReadMat(r, "X");
  c.U = ReadMat(r, "U");
  long nh = r->Integer("h0");
  if (nh < 0) r->Fail("negative h0 size");
  c.h0 = r->Doubles(static_cast<std::size_t>(nh));
  return c;
}

void WriteAffixes(std::ostream& out, const char* key,
                  const std::map<std::string, Vec>& affixes) {
  out << key << ' ' << affixes.size() << '\n';
  for (const auto& [name, v] : affixes) {
    out << name << ' ';
    WriteDoubles(out, v);
  }
}

void ReadAffixes(LineReader* r, const std::string& key, int dim,
                 std::map<std::string, Vec>* affixes) {
  long n = r->Integer(key);
  if (n < 0) r->Fail("negative affix count");
  for (long i = 0; i < n; ++i) {
    std::string line = r->Next();
    auto space = line.find(' ');
    if (space == std::string::npos || space == 0) {
      r->Fail("expected '<affix> <values...>'");
    }
    std::string name = line.substr(0, space);
    std::istringstream iss(line.substr(space + 1));
    Vec v;
    double x;
    while (iss >> x) v.push_back(x);
    if (static_cast<int>(v.size()) != dim) {
      r->Fail("affix '" + name + "' has " + std::to_string(v.size()) +
              " values, expected " + std::to_string(dim));
    }
    if (!affixes->emplace(std::move(name), std::move(v)).second) {
      r->Fail("duplicate affix entry");
    }
  }
}

void WriteConfig(std::ostream& out,
                 const std::map<std::string, std::string>& config) {
  out << "config " << config.size() << '\n';
  for (const auto& [key, value] : config) {
    if (key.empty()) throw UsageError("checkpoint config keys must be nonempty");
    CheckConfigText(key, "key");
    CheckConfigText(value, "value");
    out << key << '\t' << value << '\n';
  }
}

std::map<std::string, std::string> ReadConfig(LineReader* r) {
  long n = r->Integer("config");
  if (n < 0) r->Fail("negative config count");
  std::map<std::string, std::string> config;
  for (long i = 0; i < n; ++i) {
    std::string line = r->Next();
    auto tab = line.find('\t');
    if (tab == std::string::npos) r->Fail("expected 'key<TAB>value'");
    config[line.substr(0, tab)] = line.substr(tab + 1);
  }
  return config;
}

}  // namespace

void SaveJointCheckpoint(const JointCheckpoint& ckpt, const std::string& path) {
  std::ostringstream out;
  out << kMagic << '\n';
  WriteConfig(out, ckpt.config);
  out << "block joint\n";
  out << "sigma_sq " << Fmt(ckpt.params.sigma_sq) << '\n';
  out << "l2 " << Fmt(ckpt.params.l2) << '\n';
  out << "morpheme_dim " << ckpt.params.morphemes.dim() << '\n';
  WriteTransducer(out, "transducer", ckpt.params.transducer);
  WriteSegmenter(out, "segmenter", ckpt.params.segmenter);
  WriteComposition(out, ckpt.params.composition);
  out << "block morphemes\n";
  WriteAffixes(out, "prefixes", ckpt.params.morphemes.affixes(Label::kPrefix));
  WriteAffixes(out, "suffixes", ckpt.params.morphemes.affixes(Label::kSuffix));
  WriteTransducer(out, "proposal_q1", ckpt.proposals.q1);
  WriteSegmenter(out, "proposal_q2", ckpt.proposals.q2);
  out << "end\n";

  std::ofstream file(path);
  if (!file) throw DataError("cannot write checkpoint file '" + path + "'");
  file << out.str();
  if (!file) throw DataError("failed while writing checkpoint '" + path + "'");
}

JointCheckpoint LoadJointCheckpoint(const std::string& path) {
  LineReader r(path);
  r.Expect(kMagic);
  JointCheckpoint ckpt;
  ckpt.config = ReadConfig(&r);
  r.Expect("block joint");
  ckpt.params.sigma_sq = r.Double("sigma_sq");
  ckpt.params.l2 = r.Double("l2");
  int morpheme_dim = static_cast<int>(r.Integer("morpheme_dim"));
  ckpt.params.transducer = ReadTransducer(&r, "transducer");
  ckpt.params.segmenter = ReadSegmenter(&r, "segmenter");
  ckpt.params.composition = ReadComposition(&r);
  r.Expect("block morphemes");
  ckpt.params.morphemes = MorphemeEmbeddings(nullptr, morpheme_dim, 1);
  ReadAffixes(&r, "prefixes", morpheme_dim,
              &ckpt.params.morphemes.affixes(Label::kPrefix));
  ReadAffixes(&r, "suffixes", morpheme_dim,
              &ckpt.params.morphemes.affixes(Label::kSuffix));
  ckpt.proposals.q1 = ReadTransducer(&r, "proposal_q1");
  ckpt.proposals.q2 = ReadSegmenter(&r, "proposal_q2");
  r.Expect("end");
  return ckpt;
}

void SaveCharRetrofitCheckpoint(const CharRetrofitModel& model,
                                const std::map<std::string, std::string>& config,
                                const std::string& path) {
  const CharRetrofitConfig& c = model.config();
  std::ostringstream out;
  out << kMagic << '\n';
  WriteConfig(out, config);
  out << "block char_model\n";
  out << "kind " << (c.kind == CharRnnKind::kGated ? "gated" : "simple") << '\n';
  out << "depth " << c.depth << '\n';
  out << "hidden " << c.hidden << '\n';
  out << "iterations " << c.iterations << '\n';
  out << "learning_rate " << Fmt(c.learning_rate) << '\n';
  out << "l2 " << Fmt(c.l2) << '\n';
  out << "seed " << c.seed << '\n';
  out << "alphabet " << model.alphabet() << '\n';
  out << "dim " << model.dim() << '\n';
  out << "params " << model.params().size() << '\n';
  for (const auto& [name, v] : model.params()) {
    out << name << ' ' << v.size() << '\n';
    WriteDoubles(out, v);
  }
  out << "end\n";

  std::ofstream file(path);
  if (!file) throw DataError("cannot write checkpoint file '" + path + "'");
  file << out.str();
  if (!file) throw DataError("failed while writing checkpoint '" + path + "'");
}

CharRetrofitModel LoadCharRetrofitCheckpoint(
    const std::string& path, std::map<std::string, std::string>* config) {
  LineReader r(path);
  r.Expect(kMagic);
  auto cfg_map = ReadConfig(&r);
  if (config) *config = cfg_map;
  r.Expect("block char_model");
  CharRetrofitConfig c;
  std::string kind = r.Value("kind");
  if (kind == "gated") {
    c.kind = CharRnnKind::kGated;
  } else if (kind == "simple") {
    c.kind = CharRnnKind::kSimple;
  } else {
    r.Fail("unknown recurrence kind '" + kind + "'");
  }
  c.depth = static_cast<int>(r.Integer("depth"));
  c.hidden = static_cast<int>(r.Integer("hidden"));
  c.iterations = static_cast<int>(r.Integer("iterations"));
  c.learning_rate = r.Double("learning_rate");
  c.l2 = r.Double("l2");
  c.seed = static_cast<std::uint64_t>(r.Integer("seed"));
  std::string alphabet = r.Value("alphabet");
  int dim = static_cast<int>(r.Integer("dim"));

  CharRetrofitModel model(alphabet, dim, c);
  long n = r.Integer("params");
  if (n != static_cast<long>(model.params().size())) {
    r.Fail("parameter block count does not match the architecture");
  }
  for (long i = 0; i < n; ++i) {
    std::string header = r.Next();
    auto space = header.find(' ');
    if (space == std::string::npos) r.Fail("expected '<name> <size>'");
    std::string name = header.substr(0, space);
    long size = 0;
    try {
      size = std::stol(header.substr(space + 1));
    } catch (const std::exception&) {
      r.Fail("bad parameter size in '" + header + "'");
    }
    auto it = model.params().find(name);
    if (it == model.params().end()) {
      r.Fail("unknown parameter block '" + name + "'");
    }
    if (static_cast<long>(it->second.size()) != size) {
      r.Fail("parameter block '" + name + "' has size " +
             std::to_string(size) + ", expected " +
             std::to_string(it->second.size()));
    }
    it->second = r.Doubles(static_cast<std::size_t>(size));
  }
  r.Expect("end");
  return model;
}

}  // namespace morsem
