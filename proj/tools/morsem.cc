// Command-line front end for the morphological segmentation library:
// corpus generation, proposal/joint training, decoding, vector prediction,
// evaluation, grid search, and cross-validation.
//
// Run options (seed, sampling budgets, regularization, ...) are global: they
// may appear before or after the command name, or as flat "key=value" lines
// in a --config file. Command-specific options (paths, grids, ...) may also
// be placed in the config file under a "[command]" section. Values given on
// the command line always override the file.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "char_retrofit.h"
#include "checkpoint.h"
#include "composition.h"
#include "dataset.h"
#include "embeddings.h"
#include "errors.h"
#include "evaluation.h"
#include "joint.h"
#include "pipeline.h"
#include "rng.h"

namespace {

using namespace morsem;

std::string Num4(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", x);
  return buf;
}

std::string Num17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

void WriteTextFile(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot open '" + path + "' for writing");
  out << content;
  if (!out) throw UsageError("failed while writing '" + path + "'");
}

// Options shared by every command, registered once on the root app.
struct GlobalArgs {
  RunConfig run;
  std::string composition = "add";
  bool two_morpheme = false;
  bool lowercase = false;
  int dim = 10;
};

void AddGlobalOptions(CLI::App* app, GlobalArgs* args) {
  app->set_config("--config", "",
                  "Key-value config file: run options as flat "
                  "\"key=value\" lines (keys are the long flag names), "
                  "command options under a \"[command]\" section; "
                  "command-line flags override the file");
  app->add_option("--seed", args->run.seed, "Master RNG seed")
      ->capture_default_str();
  app->add_option("--train-samples", args->run.train_samples,
                  "Importance samples per training step")
      ->capture_default_str();
  app->add_option("--decode-samples", args->run.decode_samples,
                  "Samples per decoded word")
      ->capture_default_str();
  app->add_option("--insertion-limit", args->run.insertion_limit,
                  "Max characters an underlying form may add to the surface")
      ->capture_default_str();
  app->add_option("--max-segment-length", args->run.max_segment_length,
                  "Longest morpheme the segmenter considers")
      ->capture_default_str();
  app->add_option("--l2", args->run.l2, "L2 penalty on model weights")
      ->capture_default_str();
  app->add_option("--sigma-sq", args->run.sigma_sq,
                  "Variance of the word-vector factor")
      ->capture_default_str();
  app->add_option("--composition", args->composition,
                  "Word-vector composition model")
      ->check(CLI::IsMember(
          {"stem", "mult", "add", "wadd", "fulladd", "lds", "rnn"}))
      ->capture_default_str();
  app->add_option("--epochs", args->run.epochs, "Joint training epochs")
      ->capture_default_str();
  app->add_option("--proposal-epochs", args->run.proposal_epochs,
                  "Proposal training epochs")
      ->capture_default_str();
  app->add_option("--dev-samples", args->run.dev_samples,
                  "Decode samples per word for per-epoch dev accuracy")
      ->capture_default_str();
  app->add_flag("--use-vectors,!--no-vectors", args->run.use_vectors,
                "Score word vectors during training and decoding")
      ->capture_default_str();
  app->add_flag("--oracle-ur", args->run.oracle_ur,
                "Decode with the gold underlying string held fixed");
  app->add_flag("--rank-by-weight", args->run.rank_by_weight,
                "Rank decode candidates by raw importance weight instead of "
                "joint score");
  app->add_option("--folds", args->run.folds, "Cross-validation folds")
      ->capture_default_str();
  app->add_option("--dev-fraction", args->run.dev_fraction,
                  "Fraction carved from train when no dev set is given")
      ->capture_default_str();
  app->add_flag("--two-morpheme", args->two_morpheme,
                "Coarsen every analysis to at most stem plus one affix");
  app->add_flag("--lowercase-embeddings", args->lowercase,
                "Lowercase words while reading vector files");
  app->add_option("--dim", args->dim,
                  "Vector dimension for runs without an --embeddings file "
                  "(and for gen-synthetic)")
      ->capture_default_str();
}

void FinishGlobalOptions(GlobalArgs* args) {
  auto kind = ParseCompositionKind(args->composition);
  if (!kind) throw UsageError("unknown composition '" + args->composition + "'");
  args->run.composition = *kind;
}

Dataset LoadData(const std::string& path, const GlobalArgs& args) {
  Dataset data = LoadDataset(path, args.run.insertion_limit);
  if (args.two_morpheme) data = ApplyTwoMorphemeAssumption(data);
  return data;
}

// Settings echoed into checkpoint files so a run can be reconstructed.
std::map<std::string, std::string> EchoConfig(const std::string& command,
                                              const GlobalArgs& args) {
  const RunConfig& r = args.run;
  return {
      {"command", command},
      {"seed", std::to_string(r.seed)},
      {"train-samples", std::to_string(r.train_samples)},
      {"decode-samples", std::to_string(r.decode_samples)},
      {"insertion-limit", std::to_string(r.insertion_limit)},
      {"max-segment-length", std::to_string(r.max_segment_length)},
      {"l2", Num17(r.l2)},
      {"sigma-sq", Num17(r.sigma_sq)},
      {"composition", CompositionKindName(r.composition)},
      {"epochs", std::to_string(r.epochs)},
      {"proposal-epochs", std::to_string(r.proposal_epochs)},
      {"use-vectors", r.use_vectors ? "true" : "false"},
      {"two-morpheme", args.two_morpheme ? "true" : "false"},
  };
}

// Word vectors plus the dimension the joint model should use. Without a
// vectors file the table is empty (stems read as zeros) and --dim rules.
EmbeddingTable LoadVectorsOrEmpty(const std::string& path,
                                  const GlobalArgs& args) {
  if (path.empty()) return EmbeddingTable(args.dim);
  return LoadWordEmbeddings(path, std::nullopt, args.lowercase);
}

// ---------------------------------------------------------------------------
// gen-synthetic
// ---------------------------------------------------------------------------

struct GenArgs {
  SyntheticConfig cfg;
  std::string out_data;
  std::string out_embeddings;
};

void AddGenSynthetic(CLI::App& app, GlobalArgs* global) {
  auto args = std::make_shared<GenArgs>();
  CLI::App* cmd = app.add_subcommand(
      "gen-synthetic",
      "Generate a synthetic segmentation corpus with matching word vectors");
  cmd->fallthrough();
  cmd->add_option("--out-data", args->out_data, "Dataset TSV to write")
      ->required();
  cmd->add_option("--out-embeddings", args->out_embeddings,
                  "Word-vector file to write")
      ->required();
  cmd->add_option("--num-stems", args->cfg.num_stems, "Random stems to draw")
      ->capture_default_str();
  cmd->add_option("--stems", args->cfg.stems,
                  "Explicit comma-separated stem inventory (replaces random "
                  "stems)")
      ->delimiter(',');
  cmd->add_option("--suffixes", args->cfg.suffixes,
                  "Comma-separated suffix inventory")
      ->delimiter(',')
      ->capture_default_str();
  cmd->add_option("--prefixes", args->cfg.prefixes,
                  "Comma-separated prefix inventory")
      ->delimiter(',')
      ->capture_default_str();
  cmd->add_option("--noise", args->cfg.noise,
                  "Gaussian noise scale added to each word vector")
      ->capture_default_str();
  cmd->add_option("--e-final-fraction", args->cfg.e_final_fraction,
                  "Fraction of random stems ending in 'e'")
      ->capture_default_str();
  cmd->add_option("--vowel-suffix-bias", args->cfg.vowel_suffix_bias,
                  "Probability the first suffix is vowel-initial")
      ->capture_default_str();
  cmd->add_option("--derived-per-stem", args->cfg.derived_per_stem,
                  "Derived words sampled per stem")
      ->capture_default_str();
  cmd->add_option("--prefix-prob", args->cfg.prefix_prob,
                  "Probability a derived word takes a prefix")
      ->capture_default_str();
  cmd->add_option("--second-suffix-prob", args->cfg.second_suffix_prob,
                  "Probability a derived word takes a second suffix")
      ->capture_default_str();
  cmd->add_flag("--bare-stems,!--no-bare-stems", args->cfg.include_bare_stems,
                "Include every stem as a bare word")
      ->capture_default_str();
  cmd->add_option("--ambiguous-pairs", args->cfg.num_ambiguous_pairs,
                  "Stem pairs planted so one surface admits two analyses")
      ->capture_default_str();

  cmd->callback([args, global]() {
    for (const auto& s : args->cfg.suffixes) {
      if (s.empty()) throw UsageError("empty suffix in --suffixes");
    }
    for (const auto& p : args->cfg.prefixes) {
      if (p.empty()) throw UsageError("empty prefix in --prefixes");
    }
    if (args->cfg.suffixes.empty()) {
      throw UsageError("suffix inventory must be non-empty");
    }
    args->cfg.seed = global->run.seed;
    args->cfg.dim = global->dim;
    SyntheticCorpus corpus = GenerateSyntheticCorpus(args->cfg);
    SaveDataset(corpus.data, args->out_data);
    corpus.embeddings.Save(args->out_embeddings);
    std::cout << "records " << corpus.data.size() << "\n"
              << "stems " << corpus.stems.size() << "\n"
              << "rule-fire-fraction " << Num4(corpus.rule_fire_fraction)
              << "\n"
              << "collisions-dropped " << corpus.collisions_dropped << "\n"
              << "alphabet " << CollectAlphabet(corpus.data) << "\n"
              << "wrote " << args->out_data << "\n"
              << "wrote " << args->out_embeddings << "\n";
  });
}

// ---------------------------------------------------------------------------
// train-proposals
// ---------------------------------------------------------------------------

struct TrainProposalsArgs {
  std::string data;
  std::string out;
  std::string embeddings;
};

void AddTrainProposals(CLI::App& app, GlobalArgs* global) {
  auto args = std::make_shared<TrainProposalsArgs>();
  CLI::App* cmd = app.add_subcommand(
      "train-proposals",
      "Fit the underlying-form and segmentation proposal distributions on "
      "gold analyses and save them (joint parameters stay untrained)");
  cmd->fallthrough();
  cmd->add_option("--data", args->data, "Training dataset TSV")->required();
  cmd->add_option("--out", args->out, "Checkpoint file to write")->required();
  cmd->add_option("--embeddings", args->embeddings,
                  "Word vectors (sets the placeholder parameter dimension; "
                  "--dim otherwise)");

  cmd->callback([args, global]() {
    FinishGlobalOptions(global);
    const RunConfig& run = global->run;
    Dataset data = LoadData(args->data, *global);
    EmbeddingTable table = LoadVectorsOrEmpty(args->embeddings, *global);

    JointCheckpoint ckpt;
    ckpt.proposals = TrainProposals(data, run);
    ckpt.params.transducer.insertion_limit = run.insertion_limit;
    ckpt.params.transducer.alphabet = CollectAlphabet(data);
    ckpt.params.transducer.output_alphabet = ckpt.params.transducer.alphabet;
    ckpt.params.segmenter.max_segment_length = run.max_segment_length;
    ckpt.params.composition = CompositionModel::Create(
        run.composition, table.dim(), Rng::DeriveSeed(run.seed, 21));
    ckpt.params.morphemes =
        MorphemeEmbeddings(nullptr, table.dim(), Rng::DeriveSeed(run.seed, 22));
    ckpt.params.sigma_sq = run.sigma_sq;
    ckpt.params.l2 = run.l2;
    ckpt.config = EchoConfig("train-proposals", *global);
    ckpt.config["trained"] = "false";
    SaveJointCheckpoint(ckpt, args->out);
    std::cout << "proposals trained on " << data.size() << " records\n"
              << "wrote " << args->out << " (joint parameters untrained)\n";
  });
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string data;
  std::string dev;
  std::string embeddings;
  std::string init;
  std::string out;
};

void AddTrain(CLI::App& app, GlobalArgs* global) {
  auto args = std::make_shared<TrainArgs>();
  CLI::App* cmd = app.add_subcommand(
      "train", "Train the joint segmentation model and save a checkpoint");
  cmd->fallthrough();
  cmd->add_option("--data", args->data, "Training dataset TSV")->required();
  cmd->add_option("--dev", args->dev,
                  "Dev dataset TSV for best-epoch selection (default: carve "
                  "--dev-fraction from --data)");
  cmd->add_option("--embeddings", args->embeddings,
                  "Word vectors (required unless --no-vectors)");
  cmd->add_option("--init", args->init,
                  "Checkpoint whose proposal distributions are reused "
                  "(skips proposal training)");
  cmd->add_option("--out", args->out, "Checkpoint file to write")->required();

  cmd->callback([args, global]() {
    FinishGlobalOptions(global);
    const RunConfig& run = global->run;
    if (args->embeddings.empty() && run.use_vectors) {
      throw UsageError(
          "training with word vectors needs --embeddings "
          "(or pass --no-vectors)");
    }
    Dataset train_data = LoadData(args->data, *global);
    Dataset dev_data;
    if (!args->dev.empty()) {
      dev_data = LoadData(args->dev, *global);
    } else if (run.dev_fraction > 0.0) {
      DatasetSplit split = SplitDataset(train_data, run.dev_fraction, 0.0,
                                        Rng::DeriveSeed(run.seed, 5));
      train_data = std::move(split.train);
      dev_data = std::move(split.dev);
    }
    EmbeddingTable table = LoadVectorsOrEmpty(args->embeddings, *global);

    PipelineModel model;
    if (args->init.empty()) {
      model = TrainPipeline(train_data, dev_data, table, run);
    } else {
      JointCheckpoint init = LoadJointCheckpoint(args->init);
      model = TrainPipelineWith(init.proposals, train_data, dev_data, table,
                                run);
    }

    JointCheckpoint ckpt;
    ckpt.params = std::move(model.params);
    ckpt.proposals = std::move(model.proposals);
    ckpt.config = EchoConfig("train", *global);
    ckpt.config["best-epoch"] = std::to_string(model.best_epoch);
    SaveJointCheckpoint(ckpt, args->out);

    std::cout << "train records " << train_data.size() << ", dev records "
              << dev_data.size() << "\n";
    if (model.skipped_examples > 0) {
      std::cout << "skipped " << model.skipped_examples
                << " unrepresentable training analyses\n";
    }
    if (!dev_data.empty()) {
      for (std::size_t e = 0; e < model.dev_accuracy.size(); ++e) {
        std::cout << "epoch " << e << " dev-accuracy "
                  << Num4(model.dev_accuracy[e]) << "\n";
      }
      std::cout << "best epoch " << model.best_epoch << "\n";
    }
    std::cout << "wrote " << args->out << "\n";
  });
}

// ---------------------------------------------------------------------------
// segment
// ---------------------------------------------------------------------------

struct SegmentArgs {
  std::string model;
  std::string data;
  std::string embeddings;
  std::string out;
  std::string metrics_out;
};

void AddSegment(CLI::App& app, GlobalArgs* global) {
  auto args = std::make_shared<SegmentArgs>();
  CLI::App* cmd = app.add_subcommand(
      "segment",
      "Decode a dataset with a trained checkpoint and score against gold");
  cmd->fallthrough();
  cmd->add_option("--model", args->model, "Checkpoint from 'train'")
      ->required();
  cmd->add_option("--data", args->data, "Dataset TSV to decode")->required();
  cmd->add_option("--embeddings", args->embeddings,
                  "Word vectors (stems read as zeros and the vector factor "
                  "is disabled without them)");
  cmd->add_option("--out", args->out,
                  "Predictions TSV to write "
                  "(surface<TAB>predicted<TAB>gold)");
  cmd->add_option("--metrics-out", args->metrics_out,
                  "File for the metrics table (always printed to stdout)");

  cmd->callback([args, global]() {
    FinishGlobalOptions(global);
    RunConfig run = global->run;
    Dataset data = LoadData(args->data, *global);
    JointCheckpoint ckpt = LoadJointCheckpoint(args->model);

    EmbeddingTable table(ckpt.params.composition.dim);
    if (args->embeddings.empty()) {
      run.use_vectors = false;
      std::cerr << "note: no --embeddings, decoding without word vectors\n";
    } else {
      table = LoadWordEmbeddings(args->embeddings, std::nullopt,
                                 global->lowercase);
    }
    ckpt.params.morphemes.set_stem_table(&table);

    CorpusPredictions preds =
        DecodeCorpus(data, table, ckpt.params, ckpt.proposals, run);
    std::string metrics = FormatMetricsTable({{"joint", preds.metrics}});
    std::cout << metrics;
    if (!args->metrics_out.empty()) WriteTextFile(args->metrics_out, metrics);
    if (!args->out.empty()) {
      WritePredictionsTsv(data, preds.predicted, args->out);
      std::cout << "wrote " << args->out << "\n";
    }
  });
}

// ---------------------------------------------------------------------------
// predict-vector
// ---------------------------------------------------------------------------

struct PredictVectorArgs {
  std::string method;
  std::string data;
  std::string train_data;
  std::string model;
  std::string embeddings;
  std::string out;
  std::string boxplot_out;
  std::string char_model;
  std::string char_model_out;
  CharRetrofitConfig char_cfg;
};

void AddPredictVector(CLI::App& app, GlobalArgs* global) {
  auto args = std::make_shared<PredictVectorArgs>();
  CLI::App* cmd = app.add_subcommand(
      "predict-vector",
      "Predict word vectors from morphology (or characters) and score them "
      "against a vector table by cosine");
  cmd->fallthrough();
  cmd->add_option("--method", args->method,
                  "joint: posterior mean over sampled analyses; oracle: "
                  "compose the gold analysis; char-rnn / char-gru: "
                  "character-level recurrent baseline")
      ->check(CLI::IsMember({"joint", "oracle", "char-rnn", "char-gru"}))
      ->required();
  cmd->add_option("--data", args->data, "Dataset TSV to evaluate on")
      ->required();
  cmd->add_option("--embeddings", args->embeddings,
                  "Word vectors holding the target for every surface")
      ->required();
  cmd->add_option("--model", args->model,
                  "Checkpoint from 'train' (joint and oracle methods)");
  cmd->add_option("--out", args->out,
                  "Per-word file to write (surface<TAB>cosine)");
  cmd->add_option("--boxplot-out", args->boxplot_out,
                  "Per-affix cosine rows (affix<TAB>cosine; oracle only)");
  cmd->add_option("--train-data", args->train_data,
                  "Training dataset for the character methods "
                  "(default: --data)");
  cmd->add_option("--char-model", args->char_model,
                  "Checkpoint of a trained character model (skips training)");
  cmd->add_option("--char-model-out", args->char_model_out,
                  "Checkpoint file for the trained character model");
  cmd->add_option("--char-depth", args->char_cfg.depth,
                  "Stacked recurrent layers")
      ->capture_default_str();
  cmd->add_option("--char-hidden", args->char_cfg.hidden, "Hidden units")
      ->capture_default_str();
  cmd->add_option("--char-iterations", args->char_cfg.iterations,
                  "Full-gradient training iterations")
      ->capture_default_str();
  cmd->add_option("--char-lr", args->char_cfg.learning_rate, "Learning rate")
      ->capture_default_str();
  cmd->add_option("--char-l2", args->char_cfg.l2, "L2 penalty")
      ->capture_default_str();

  cmd->callback([args, global]() {
    FinishGlobalOptions(global);
    const RunConfig& run = global->run;
    Dataset data = LoadData(args->data, *global);
    EmbeddingTable table =
        LoadWordEmbeddings(args->embeddings, std::nullopt, global->lowercase);

    bool char_method =
        args->method == "char-rnn" || args->method == "char-gru";
    if (!char_method && args->model.empty()) {
      throw UsageError("--method " + args->method + " needs --model");
    }
    if (args->method != "oracle" && !args->boxplot_out.empty()) {
      throw UsageError("--boxplot-out is only meaningful with --method oracle");
    }

    std::vector<Vec> predicted;
    std::vector<Vec> gold;
    predicted.reserve(data.size());
    gold.reserve(data.size());
    int unsupported = 0;

    JointCheckpoint ckpt;
    if (!char_method) {
      ckpt = LoadJointCheckpoint(args->model);
      ckpt.params.morphemes.set_stem_table(&table);
      if (table.dim() != ckpt.params.composition.dim) {
        throw DataError("vector table dimension " +
                        std::to_string(table.dim()) +
                        " does not match the checkpoint dimension " +
                        std::to_string(ckpt.params.composition.dim));
      }
    }

    if (args->method == "joint") {
      for (const auto& record : data) {
        DecodeConfig dc;
        dc.num_samples = run.decode_samples;
        dc.seed = Rng::DeriveSeed(run.seed, HashString(record.surface));
        try {
          predicted.push_back(PredictVector(record.surface, ckpt.params,
                                            ckpt.proposals, dc));
        } catch (const DataError&) {
          predicted.push_back(Vec(table.dim(), 0.0));
          ++unsupported;
        }
        gold.push_back(table.Get(record.surface));
      }
    } else if (args->method == "oracle") {
      for (const auto& record : data) {
        std::vector<Vec> inputs =
            GatherMorphemeVectors(record.gold.seg, ckpt.params.morphemes,
                                  ckpt.params.composition.kind);
        predicted.push_back(Compose(ckpt.params.composition, inputs,
                                    record.gold.seg.labels));
        gold.push_back(table.Get(record.surface));
      }
      if (!args->boxplot_out.empty()) {
        std::vector<AffixCosineRow> rows = GoldCompositionAffixCosines(
            data, table, ckpt.params.composition, ckpt.params.morphemes);
        WriteBoxplotData(rows, args->boxplot_out);
        std::cout << "wrote " << args->boxplot_out << " (" << rows.size()
                  << " affix rows)\n";
      }
    } else {
      args->char_cfg.kind = args->method == "char-gru" ? CharRnnKind::kGated
                                                       : CharRnnKind::kSimple;
      args->char_cfg.seed = run.seed;
      CharRetrofitModel model;
      if (!args->char_model.empty()) {
        model = LoadCharRetrofitCheckpoint(args->char_model);
      } else {
        Dataset train_data = args->train_data.empty()
                                 ? data
                                 : LoadData(args->train_data, *global);
        std::vector<std::pair<std::string, Vec>> pairs;
        for (const auto& record : train_data) {
          if (!table.Contains(record.surface)) {
            ++unsupported;
            continue;
          }
          pairs.emplace_back(record.surface, table.Get(record.surface));
        }
        if (pairs.empty()) {
          throw DataError("no training surface appears in the vector table");
        }
        CharRetrofitResult result = TrainCharRetrofit(
            pairs, CollectAlphabet(train_data), table.dim(), args->char_cfg);
        model = std::move(result.model);
        std::cout << "character training loss "
                  << Num4(result.loss_trace.front()) << " -> "
                  << Num4(result.loss_trace.back()) << " over "
                  << args->char_cfg.iterations << " iterations\n";
        if (!args->char_model_out.empty()) {
          std::map<std::string, std::string> echo =
              EchoConfig("predict-vector", *global);
          echo["method"] = args->method;
          SaveCharRetrofitCheckpoint(model, echo, args->char_model_out);
          std::cout << "wrote " << args->char_model_out << "\n";
        }
      }
      for (const auto& record : data) {
        predicted.push_back(model.Predict(record.surface));
        gold.push_back(table.Get(record.surface));
      }
    }

    CosineSummary summary = MeanCosine(predicted, gold);
    std::cout << "method\tmean_cosine\tn\tundefined\n"
              << args->method << "\t" << Num4(summary.mean) << "\t"
              << summary.count << "\t" << summary.undefined << "\n";
    if (unsupported > 0) {
      std::cerr << "note: " << unsupported
                << " words were outside the model/table support\n";
    }
    if (!args->out.empty()) {
      std::ostringstream rows;
      for (std::size_t i = 0; i < data.size(); ++i) {
        auto cosine = Cosine(predicted[i], gold[i]);
        rows << data[i].surface << "\t"
             << (cosine ? Num4(*cosine) : std::string("NA")) << "\n";
      }
      WriteTextFile(args->out, rows.str());
      std::cout << "wrote " << args->out << "\n";
    }
  });
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

struct EvaluateArgs {
  std::string predictions;
  std::string pred;
  std::string gold;
  std::string out;
};

// Reads "surface<TAB>predicted<TAB>gold" rows as written by 'segment'.
void LoadPredictionRows(const std::string& path, Dataset* pred,
                        Dataset* gold) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open '" + path + "'");
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto first = line.find('\t');
    auto second =
        first == std::string::npos ? first : line.find('\t', first + 1);
    if (second == std::string::npos ||
        line.find('\t', second + 1) != std::string::npos) {
      throw DataError(path + ": line " + std::to_string(line_no) +
                      ": expected exactly three tab-separated fields");
    }
    std::string surface = line.substr(0, first);
    try {
      pred->push_back(ParseDatasetLine(
          surface + "\t" + line.substr(first + 1, second - first - 1),
          line_no));
      gold->push_back(
          ParseDatasetLine(surface + "\t" + line.substr(second + 1), line_no));
    } catch (const DataError& e) {
      throw DataError(path + ": " + e.what());
    }
  }
}

std::vector<CanonicalAnalysis> Analyses(const Dataset& data) {
  std::vector<CanonicalAnalysis> out;
  out.reserve(data.size());
  for (const auto& record : data) out.push_back(record.gold);
  return out;
}

void AddEvaluate(CLI::App& app, GlobalArgs* global) {
  auto args = std::make_shared<EvaluateArgs>();
  CLI::App* cmd = app.add_subcommand(
      "evaluate", "Score predicted analyses against gold analyses");
  cmd->fallthrough();
  auto* predictions = cmd->add_option(
      "--predictions", args->predictions,
      "Predictions TSV from 'segment' (surface<TAB>predicted<TAB>gold)");
  auto* pred = cmd->add_option("--pred", args->pred,
                               "Dataset TSV holding predicted analyses");
  auto* gold = cmd->add_option("--gold", args->gold,
                               "Dataset TSV holding gold analyses");
  predictions->excludes(pred)->excludes(gold);
  pred->needs(gold);
  gold->needs(pred);
  cmd->add_option("--out", args->out,
                  "File for the metrics table (always printed to stdout)");

  cmd->callback([args, global]() {
    Dataset pred_data, gold_data;
    if (!args->predictions.empty()) {
      LoadPredictionRows(args->predictions, &pred_data, &gold_data);
    } else if (!args->pred.empty()) {
      pred_data = LoadDataset(args->pred);
      gold_data = LoadDataset(args->gold);
      if (pred_data.size() != gold_data.size()) {
        throw DataError("prediction and gold files differ in length (" +
                        std::to_string(pred_data.size()) + " vs " +
                        std::to_string(gold_data.size()) + ")");
      }
      for (std::size_t i = 0; i < pred_data.size(); ++i) {
        if (pred_data[i].surface != gold_data[i].surface) {
          throw DataError("surface mismatch at line " + std::to_string(i + 1) +
                          ": '" + pred_data[i].surface + "' vs '" +
                          gold_data[i].surface + "'");
        }
      }
    } else {
      throw UsageError("pass --predictions FILE, or --pred FILE --gold FILE");
    }
    if (global->two_morpheme) {
      pred_data = ApplyTwoMorphemeAssumption(pred_data);
      gold_data = ApplyTwoMorphemeAssumption(gold_data);
    }
    SegmentationMetrics metrics =
        EvaluateSegmentations(Analyses(pred_data), Analyses(gold_data));
    std::string table = FormatMetricsTable({{"eval", metrics}});
    std::cout << table;
    if (!args->out.empty()) WriteTextFile(args->out, table);
  });
}

// ---------------------------------------------------------------------------
// grid-search
// ---------------------------------------------------------------------------

struct GridArgs {
  std::string data;
  std::string dev;
  std::string embeddings;
  std::string out;
  std::vector<double> l2_grid;
  std::vector<double> sigma_sq_grid;
};

void AddGridSearch(CLI::App& app, GlobalArgs* global) {
  auto args = std::make_shared<GridArgs>();
  CLI::App* cmd = app.add_subcommand(
      "grid-search",
      "Train one joint model per (l2, sigma-sq) cell on shared proposals and "
      "rank the cells by dev accuracy");
  cmd->fallthrough();
  cmd->add_option("--data", args->data, "Training dataset TSV")->required();
  cmd->add_option("--dev", args->dev,
                  "Dev dataset TSV (default: carve --dev-fraction from "
                  "--data)");
  cmd->add_option("--embeddings", args->embeddings,
                  "Word vectors (required unless --no-vectors)");
  cmd->add_option("--l2-grid", args->l2_grid, "Comma-separated l2 values")
      ->delimiter(',')
      ->required();
  cmd->add_option("--sigma-sq-grid", args->sigma_sq_grid,
                  "Comma-separated sigma-sq values")
      ->delimiter(',')
      ->required();
  cmd->add_option("--out", args->out,
                  "File for the grid table (always printed to stdout)");

  cmd->callback([args, global]() {
    FinishGlobalOptions(global);
    const RunConfig& run = global->run;
    if (args->embeddings.empty() && run.use_vectors) {
      throw UsageError(
          "grid search with word vectors needs --embeddings "
          "(or pass --no-vectors)");
    }
    Dataset train_data = LoadData(args->data, *global);
    Dataset dev_data;
    if (!args->dev.empty()) {
      dev_data = LoadData(args->dev, *global);
    } else {
      DatasetSplit split = SplitDataset(train_data, run.dev_fraction, 0.0,
                                        Rng::DeriveSeed(run.seed, 5));
      train_data = std::move(split.train);
      dev_data = std::move(split.dev);
    }
    EmbeddingTable table = LoadVectorsOrEmpty(args->embeddings, *global);

    JointProposals proposals = TrainProposals(train_data, run);
    GridResult grid = RunGridSearch(train_data, dev_data, table, proposals,
                                    run, args->l2_grid, args->sigma_sq_grid);
    std::string table_text = FormatGridTable(grid);
    std::cout << table_text;
    if (!args->out.empty()) WriteTextFile(args->out, table_text);
  });
}

// ---------------------------------------------------------------------------
// crossval
// ---------------------------------------------------------------------------

struct CrossvalArgs {
  std::string data;
  std::string embeddings;
  std::string folds_out;
  std::string out;
};

void AddCrossval(CLI::App& app, GlobalArgs* global) {
  auto args = std::make_shared<CrossvalArgs>();
  CLI::App* cmd = app.add_subcommand(
      "crossval",
      "Seeded k-fold cross-validation reporting mean and deviation per "
      "metric");
  cmd->fallthrough();
  cmd->add_option("--data", args->data, "Dataset TSV")->required();
  cmd->add_option("--embeddings", args->embeddings,
                  "Word vectors (required unless --no-vectors)");
  cmd->add_option("--folds-out", args->folds_out,
                  "Audit file of fold assignments "
                  "(index<TAB>surface<TAB>fold)");
  cmd->add_option("--out", args->out,
                  "File for the metric table (always printed to stdout)");

  cmd->callback([args, global]() {
    FinishGlobalOptions(global);
    const RunConfig& run = global->run;
    if (args->embeddings.empty() && run.use_vectors) {
      throw UsageError(
          "cross-validation with word vectors needs --embeddings "
          "(or pass --no-vectors)");
    }
    Dataset data = LoadData(args->data, *global);
    EmbeddingTable table = LoadVectorsOrEmpty(args->embeddings, *global);

    CrossvalResult cv = CrossValidate(data, table, run);
    std::cout << cv.table;
    if (!args->out.empty()) WriteTextFile(args->out, cv.table);
    if (!args->folds_out.empty()) {
      WriteFoldAssignments(data, cv.fold_of, args->folds_out);
      std::cout << "wrote " << args->folds_out << "\n";
    }
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Joint morphological segmentation with distributional word vectors"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every command");
  app.allow_config_extras(CLI::config_extras_mode::error);

  GlobalArgs global;
  AddGlobalOptions(&app, &global);
  AddGenSynthetic(app, &global);
  AddTrainProposals(app, &global);
  AddTrain(app, &global);
  AddSegment(app, &global);
  AddPredictVector(app, &global);
  AddEvaluate(app, &global);
  AddGridSearch(app, &global);
  AddCrossval(app, &global);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
