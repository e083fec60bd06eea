#include "ilac/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "ilac/checkpoint.hpp"
#include "ilac/corpus.hpp"
#include "ilac/entropy.hpp"
#include "ilac/errors.hpp"
#include "ilac/evaluation.hpp"
#include "ilac/json_io.hpp"

namespace ilac {

namespace fs = std::filesystem;
using nlohmann::json;

void to_json(json& j, const RunConfig& c) {
  j = json{{"command", c.command},
           {"gen", c.gen},
           {"model", c.model},
           {"train", c.train},
           {"eval", {{"modes", c.eval_modes}, {"ks", c.eval_ks}, {"baseline", c.baseline}}}};
}

void from_json(const json& j, RunConfig& c) {
  if (j.contains("command")) j.at("command").get_to(c.command);
  if (j.contains("gen")) j.at("gen").get_to(c.gen);
  if (j.contains("model")) j.at("model").get_to(c.model);
  if (j.contains("train")) j.at("train").get_to(c.train);
  if (j.contains("eval")) {
    const auto& e = j.at("eval");
    if (e.contains("modes")) e.at("modes").get_to(c.eval_modes);
    if (e.contains("ks")) e.at("ks").get_to(c.eval_ks);
    if (e.contains("baseline")) e.at("baseline").get_to(c.baseline);
  }
}

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Flag values; an option only overrides the config when it was given.
struct Flags {
  std::string config_file, out_dir, data, checkpoint, resume, train_data, ablation, baseline;
  std::size_t workers = 1;
  // gen
  std::size_t scenes = 0, contexts = 0, obj_classes = 0, pred_classes = 0, objects_min = 0, objects_max = 0,
              relations_min = 0, relations_max = 0, feat_dim = 0;
  double gamma = 0, tau = 0, feature_noise = 0, predicate_peak = 0;
  bool reference = false, compact = false;
  std::uint64_t seed = 0;
  // train / gradcheck
  std::size_t epochs = 0, batch_size = 0, predicates = 0, iters = 0, d = 0, d_phi = 0, objects = 3;
  double lr = 0, clip = 0, h = 1e-5, tol = 1e-4;
  bool previous_context = false, float32 = false, five_point = false;
  // eval
  std::vector<std::string> modes;
  std::vector<std::size_t> ks;
};

json read_config_file(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw InputError("config file " + path + " is not valid JSON: " + e.what());
  }
}

std::optional<std::uint64_t> env_seed() {
  const char* text = std::getenv("ILAC_SEED");
  if (text == nullptr || *text == '\0') return std::nullopt;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(text, &end, 10);
  if (*end != '\0') throw InputError(std::string("ILAC_SEED is not an unsigned integer: '") + text + "'");
  return v;
}

fs::path split_file(const std::string& data, const std::string& split) {
  const fs::path p(data);
  return fs::is_directory(p) ? p / (split + ".jsonl") : p;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot write " + path.string());
  f << text;
}

void echo_config(const RunConfig& cfg, const std::string& out_dir, std::ostream& out) {
  const json j = cfg;
  out << "config " << j.dump() << "\n";
  if (!out_dir.empty()) write_text(fs::path(out_dir) / "config.json", j.dump(2) + "\n");
}

void prepare_out(const std::string& out_dir) {
  if (!out_dir.empty()) fs::create_directories(out_dir);
}

std::string method_name(const ModelConfig& m) {
  if (!m.use_context) return "No-context";
  if (m.n_iters == 1) return "1-iter";
  return "ILAC";
}

int cmd_gen(const CLI::App& app, const Flags& f, const json& file, std::ostream& out) {
  if (f.out_dir.empty()) throw UsageError("gen needs --out DIR");
  RunConfig cfg;
  cfg.command = "gen";
  if (f.reference) cfg.gen = reference_spec(cfg.gen.seed);
  if (file.contains("gen")) file.at("gen").get_to(cfg.gen);
  if (app.count("--scenes")) cfg.gen.scenes = f.scenes;
  if (app.count("--seed")) cfg.gen.seed = f.seed;
  if (app.count("--contexts")) cfg.gen.n_contexts = f.contexts;
  if (app.count("--obj-classes")) cfg.gen.n_obj_classes = f.obj_classes;
  if (app.count("--pred-classes")) cfg.gen.n_pred_classes = f.pred_classes;
  if (app.count("--min-objects")) cfg.gen.objects_min = f.objects_min;
  if (app.count("--max-objects")) cfg.gen.objects_max = f.objects_max;
  if (app.count("--min-relations")) cfg.gen.relations_min = f.relations_min;
  if (app.count("--max-relations")) cfg.gen.relations_max = f.relations_max;
  if (app.count("--gamma")) cfg.gen.context_strength = f.gamma;
  if (app.count("--tau")) cfg.gen.detector_noise = f.tau;
  if (app.count("--feat-dim")) cfg.gen.feat_dim = f.feat_dim;
  if (app.count("--feature-noise")) cfg.gen.feature_noise = f.feature_noise;
  if (app.count("--predicate-peak")) cfg.gen.predicate_peak = f.predicate_peak;
  if (auto s = env_seed()) cfg.gen.seed = *s;
  cfg.gen.validate();
  prepare_out(f.out_dir);
  echo_config(cfg, f.out_dir, out);

  const CorpusSplits splits = generate_corpus(cfg.gen);
  const std::pair<const char*, const std::vector<SceneInstance>*> parts[] = {
      {"train", &splits.train}, {"val", &splits.val}, {"test", &splits.test}};
  for (const auto& [name, scenes] : parts) {
    Corpus c{cfg.gen, name, *scenes};
    const fs::path path = fs::path(f.out_dir) / (std::string(name) + ".jsonl");
    write_corpus(path, c, !f.compact);
    out << "wrote " << path.string() << " (" << scenes->size() << " scenes)\n";
  }
  return kExitOk;
}

void apply_model_flags(const CLI::App& app, const Flags& f, ModelConfig& m) {
  if (app.count("--iters")) m.n_iters = f.iters;
  if (app.count("--d")) m.d_c = m.d_v = m.d_e = f.d;
  if (app.count("--d-phi")) m.d_phi = f.d_phi;
  if (app.count("--previous-context")) m.node_uses_previous_context = true;
  if (app.count("--ablation")) {
    if (f.ablation != "no-context") throw UsageError("unknown ablation '" + f.ablation + "' (expected no-context)");
    m.use_context = false;
  }
}

int cmd_train(const CLI::App& app, const Flags& f, const json& file, std::ostream& out) {
  if (f.data.empty()) throw UsageError("train needs --data (corpus directory or train.jsonl)");
  if (f.out_dir.empty()) throw UsageError("train needs --out DIR");
  const Corpus train_corpus = read_corpus(split_file(f.data, "train"));
  Corpus val_corpus;
  if (fs::is_directory(f.data) && fs::exists(fs::path(f.data) / "val.jsonl")) {
    val_corpus = read_corpus(fs::path(f.data) / "val.jsonl");
  }

  RunConfig cfg;
  cfg.command = "train";
  cfg.gen = train_corpus.spec;
  const GenSpec& g = train_corpus.spec;
  std::optional<Checkpoint> resume;
  if (!f.resume.empty()) {
    resume = load_checkpoint(f.resume);
    if (!resume->adam) throw InputError("checkpoint " + f.resume + " carries no optimizer state");
    cfg.model = resume->config;
    if (resume->meta.contains("train")) resume->meta.at("train").get_to(cfg.train);
  } else {
    cfg.model = ModelConfig::desk(g.n_obj_classes, g.n_pred_classes, g.feat_dim);
  }
  if (file.contains("model")) file.at("model").get_to(cfg.model);
  if (file.contains("train")) file.at("train").get_to(cfg.train);
  apply_model_flags(app, f, cfg.model);
  cfg.model.n_obj_classes = g.n_obj_classes;
  cfg.model.n_pred_classes = g.n_pred_classes;
  cfg.model.feat_dim = g.feat_dim;
  if (resume && !(cfg.model == resume->config)) {
    throw VersionError("model configuration differs from the checkpoint being resumed");
  }
  if (app.count("--epochs")) cfg.train.epochs = f.epochs;
  if (app.count("--lr")) cfg.train.learning_rate = f.lr;
  if (app.count("--batch-size")) cfg.train.batch_size = f.batch_size;
  if (app.count("--predicates")) cfg.train.predicates_per_image = f.predicates;
  if (app.count("--clip")) cfg.train.clip_norm = f.clip;
  if (app.count("--seed")) cfg.train.seed = f.seed;
  if (app.count("--workers")) cfg.train.workers = f.workers;
  if (auto s = env_seed()) cfg.train.seed = *s;
  cfg.model.validate();
  cfg.train.validate();
  prepare_out(f.out_dir);
  echo_config(cfg, f.out_dir, out);

  const FeatureSpace space(g);
  const Dataset train_data = make_dataset(train_corpus.scenes, space, cfg.model);
  const Dataset val_data = make_dataset(val_corpus.scenes, space, cfg.model);
  std::optional<TrainState> state;
  if (resume) state = TrainState{resume->params, *resume->adam, resume->epochs_done};

  std::ofstream log(fs::path(f.out_dir) / "metrics.jsonl", resume ? std::ios::app : std::ios::trunc);
  if (!log) throw InputError("cannot write metrics log under " + f.out_dir);
  auto on_epoch = [&](const EpochMetrics& m) {
    const json line = {{"epoch", m.epoch},
                       {"train_loss", m.train_loss},
                       {"val_obj_acc", m.val_obj_acc},
                       {"val_r50", m.val_r50},
                       {"val_r100", m.val_r100}};
    log << line.dump() << "\n" << std::flush;
    out << "epoch " << line.dump() << "\n" << std::flush;
  };
  const TrainResult result = train(train_data, val_data, cfg.model, cfg.train, std::move(state), on_epoch);

  const FloatWidth width = f.float32 ? FloatWidth::kF32 : FloatWidth::kF64;
  const json meta = {{"train", cfg.train}, {"corpus", g}};
  Checkpoint best{cfg.model, result.best, std::nullopt, result.last.epochs_done, meta};
  best.meta["best_epoch"] = result.best_epoch;
  Checkpoint last{cfg.model, result.last.params, result.last.adam, result.last.epochs_done, meta};
  save_checkpoint(fs::path(f.out_dir) / "model.ckpt", best, width);
  save_checkpoint(fs::path(f.out_dir) / "last.ckpt", last, width);
  out << "best epoch " << result.best_epoch << "; wrote " << (fs::path(f.out_dir) / "model.ckpt").string() << "\n";
  return kExitOk;
}

std::string format_eval_table(const std::string& method, const std::vector<EvalReport>& reports,
                              const std::vector<std::size_t>& ks) {
  std::string header = "Method      ";
  std::string row;
  char cell[64];
  std::snprintf(cell, sizeof cell, "%-12s", method.c_str());
  row = cell;
  for (const auto& r : reports) {
    const std::string mode = r.mode == EvalMode::kPredCls ? "PredCls" : "SGCls";
    for (std::size_t k : ks) {
      std::snprintf(cell, sizeof cell, " %9s", (mode + " R@" + std::to_string(k)).c_str());
      header += cell;
      std::snprintf(cell, sizeof cell, " %9.1f", 100.0 * r.r_at.at(k));
      row += cell;
    }
    if (r.object_accuracy) {
      std::snprintf(cell, sizeof cell, " %9s", "Obj acc");
      header += cell;
      std::snprintf(cell, sizeof cell, " %9.1f", 100.0 * *r.object_accuracy);
      row += cell;
    }
  }
  return header + "\n" + row + "\n";
}

int cmd_eval(const CLI::App& app, const Flags& f, const json& file, std::ostream& out) {
  if (f.data.empty()) throw UsageError("eval needs --data (corpus directory or test.jsonl)");
  RunConfig cfg;
  cfg.command = "eval";
  if (file.contains("eval")) from_json(json{{"eval", file.at("eval")}}, cfg);
  if (app.count("--mode")) cfg.eval_modes = f.modes;
  if (app.count("--k")) cfg.eval_ks = f.ks;
  if (app.count("--baseline")) cfg.baseline = f.baseline;
  if (!cfg.baseline.empty() && cfg.baseline != "freq") throw UsageError("unknown baseline '" + cfg.baseline + "'");
  if (cfg.baseline.empty() && f.checkpoint.empty()) throw UsageError("eval needs --checkpoint or --baseline freq");
  if (cfg.eval_ks.empty() || std::count(cfg.eval_ks.begin(), cfg.eval_ks.end(), std::size_t{0}) > 0) {
    throw InputError("K must be at least 1");
  }
  std::vector<EvalMode> modes;
  for (const auto& m : cfg.eval_modes) modes.push_back(parse_eval_mode(m));

  const Corpus test = read_corpus(split_file(f.data, "test"));
  cfg.gen = test.spec;
  const GenSpec& g = test.spec;

  std::optional<Checkpoint> ckpt;
  if (cfg.baseline.empty()) {
    ckpt = load_checkpoint(f.checkpoint);
    cfg.model = ckpt->config;
    if (file.contains("model")) {
      ModelConfig requested = ckpt->config;
      file.at("model").get_to(requested);
      if (!(requested == ckpt->config)) throw VersionError("config file model section does not match the checkpoint");
    }
    if (ckpt->config.n_obj_classes != g.n_obj_classes || ckpt->config.n_pred_classes != g.n_pred_classes ||
        ckpt->config.feat_dim != g.feat_dim) {
      throw VersionError("checkpoint was trained for " + std::to_string(ckpt->config.n_obj_classes) + " objects / " +
                         std::to_string(ckpt->config.n_pred_classes) + " predicates / feat_dim " +
                         std::to_string(ckpt->config.feat_dim) + ", corpus has " + std::to_string(g.n_obj_classes) +
                         " / " + std::to_string(g.n_pred_classes) + " / " + std::to_string(g.feat_dim));
    }
  } else {
    cfg.model = ModelConfig::desk(g.n_obj_classes, g.n_pred_classes, g.feat_dim);
  }
  prepare_out(f.out_dir);
  echo_config(cfg, f.out_dir, out);

  std::vector<EvalReport> reports;
  std::string method;
  if (ckpt) {
    method = method_name(ckpt->config);
    const Dataset data = make_dataset(test.scenes, FeatureSpace(g), ckpt->config);
    const auto beliefs = model_beliefs(data, ckpt->params, ckpt->config, f.workers);
    for (EvalMode m : modes) reports.push_back(evaluate_beliefs(data.scenes, beliefs, m, cfg.eval_ks));
  } else {
    method = "FREQ";
    std::string train_path = f.train_data;
    if (train_path.empty()) {
      const fs::path dir = fs::is_directory(f.data) ? fs::path(f.data) : fs::path(f.data).parent_path();
      train_path = (dir / "train.jsonl").string();
    }
    const Corpus train_corpus = read_corpus(train_path);
    const auto freq = FreqBaseline::fit(train_corpus.scenes, g.n_obj_classes, g.n_pred_classes);
    std::vector<SceneInstance> scenes;
    for (const auto& s : test.scenes)
      if (s.n_objects() >= 2) scenes.push_back(s);
    for (EvalMode m : modes) {
      std::vector<SceneBeliefs> beliefs;
      for (const auto& s : scenes) beliefs.push_back(freq.beliefs(s, m));
      reports.push_back(evaluate_beliefs(scenes, beliefs, m, cfg.eval_ks));
    }
  }

  out << format_eval_table(method, reports, cfg.eval_ks);
  const json j = reports;
  out << j.dump() << "\n";
  if (!f.out_dir.empty()) write_text(fs::path(f.out_dir) / "eval.json", j.dump(2) + "\n");
  return kExitOk;
}

int cmd_entropy(const CLI::App& app, const Flags& f, const json& file, std::ostream& out) {
  if (f.data.empty()) throw UsageError("entropy needs --data (corpus directory or .jsonl file)");
  std::vector<SceneInstance> scenes;
  GenSpec spec;
  if (fs::is_directory(f.data)) {
    bool any = false;
    for (const char* split : {"train", "val", "test"}) {
      const fs::path p = fs::path(f.data) / (std::string(split) + ".jsonl");
      if (!fs::exists(p)) continue;
      Corpus c = read_corpus(p);
      spec = c.spec;
      any = true;
      scenes.insert(scenes.end(), c.scenes.begin(), c.scenes.end());
    }
    if (!any) throw InputError("no train/val/test .jsonl files in " + f.data);
  } else {
    Corpus c = read_corpus(f.data);
    spec = c.spec;
    scenes = std::move(c.scenes);
  }
  RunConfig cfg;
  cfg.command = "entropy";
  cfg.gen = spec;
  if (file.contains("gen")) file.at("gen").get_to(cfg.gen);
  if (app.count("--obj-classes")) cfg.gen.n_obj_classes = f.obj_classes;
  if (app.count("--pred-classes")) cfg.gen.n_pred_classes = f.pred_classes;
  prepare_out(f.out_dir);
  echo_config(cfg, f.out_dir, out);

  const auto reports = entropy_report(scenes, cfg.gen.n_obj_classes, cfg.gen.n_pred_classes);
  out << format_entropy_table(reports);
  const json j = reports;
  out << j.dump() << "\n";
  if (!f.out_dir.empty()) write_text(fs::path(f.out_dir) / "entropy.json", j.dump(2) + "\n");
  return kExitOk;
}

int cmd_gradcheck(const CLI::App& app, const Flags& f, const json& file, std::ostream& out) {
  RunConfig cfg;
  cfg.command = "gradcheck";
  cfg.gen.n_contexts = 2;
  cfg.gen.n_obj_classes = 6;
  cfg.gen.n_pred_classes = 4;
  cfg.gen.feat_dim = 6;
  cfg.gen.scenes = 4;
  cfg.gen.objects_min = cfg.gen.objects_max = f.objects;
  cfg.gen.relations_min = 1;
  cfg.gen.relations_max = 2;
  if (file.contains("gen")) file.at("gen").get_to(cfg.gen);
  if (app.count("--seed")) cfg.gen.seed = f.seed;
  if (auto s = env_seed()) cfg.gen.seed = *s;
  cfg.model = ModelConfig::desk(cfg.gen.n_obj_classes, cfg.gen.n_pred_classes, cfg.gen.feat_dim);
  cfg.model.d_c = cfg.model.d_v = cfg.model.d_e = cfg.model.d_phi = 8;
  if (file.contains("model")) file.at("model").get_to(cfg.model);
  apply_model_flags(app, f, cfg.model);
  cfg.train.seed = cfg.gen.seed;
  cfg.gen.validate();
  cfg.model.validate();
  prepare_out(f.out_dir);
  echo_config(cfg, f.out_dir, out);

  const CorpusSplits splits = generate_corpus(cfg.gen);
  const SceneInstance& scene = splits.train.at(0);
  const GraphInput input =
      make_graph_input(scene, cfg.model, [&](std::size_t i, std::size_t j) {
        return FeatureSpace(cfg.gen).union_box_feature(scene, i, j);
      });
  const ModelParams params = init_params(cfg.model, cfg.gen.seed);
  std::mt19937_64 rng(cfg.gen.seed);
  const auto relations = sample_relations(scene, cfg.train.predicates_per_image, rng);
  const FdStencil stencil = f.five_point ? FdStencil::kFivePoint : FdStencil::kThreePoint;
  const FiniteDiffReport report =
      model_gradient_check(input, scene, relations, params, cfg.model, f.h, f.tol, stencil);

  char line[160];
  for (const auto& p : report.params) {
    std::snprintf(line, sizeof line, "%-28s max_rel_error %.3e at [%zu] (ad %.6e, fd %.6e)  %s\n", p.name.c_str(),
                  p.max_rel_error, p.worst_index, p.autodiff, p.numeric, p.passed ? "ok" : "FAIL");
    out << line;
  }
  std::snprintf(line, sizeof line, "gradcheck %s: %zu tensors, worst %.3e (tol %.0e, h %.0e)\n",
                report.passed() ? "PASS" : "FAIL", report.params.size(), report.max_rel_error(), report.tolerance,
                report.step);
  out << line;
  if (!f.out_dir.empty()) {
    json j = json::array();
    for (const auto& p : report.params) j.push_back({{"name", p.name}, {"max_rel_error", p.max_rel_error}, {"passed", p.passed}});
    write_text(fs::path(f.out_dir) / "gradcheck.json", j.dump(2) + "\n");
  }
  return report.passed() ? kExitOk : kExitNumerical;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"ILAC scene graph generation: corpora, training, evaluation and analysis", "ilac"};
  app.require_subcommand(1);
  Flags f;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", f.config_file, "JSON run configuration (as echoed by any command)");
    sub->add_option("--out", f.out_dir, "directory for all artifacts");
    sub->add_option("--workers", f.workers, "worker threads")->check(CLI::PositiveNumber);
  };
  auto model_flags = [&](CLI::App* sub) {
    sub->add_option("--iters", f.iters, "message-passing iterations");
    sub->add_option("--ablation", f.ablation, "no-context");
    sub->add_option("--d", f.d, "hidden size of context, node and edge states");
    sub->add_option("--d-phi", f.d_phi, "attention projection size");
    sub->add_flag("--previous-context", f.previous_context, "node update reads the pre-iteration context");
  };

  auto* gen = app.add_subcommand("gen", "generate a synthetic corpus (train/val/test JSONL)");
  common(gen);
  gen->add_flag("--reference", f.reference, "start from the ablation reference corpus");
  gen->add_option("--scenes", f.scenes);
  gen->add_option("--seed", f.seed);
  gen->add_option("--contexts", f.contexts);
  gen->add_option("--obj-classes", f.obj_classes);
  gen->add_option("--pred-classes", f.pred_classes);
  gen->add_option("--min-objects", f.objects_min);
  gen->add_option("--max-objects", f.objects_max);
  gen->add_option("--min-relations", f.relations_min);
  gen->add_option("--max-relations", f.relations_max);
  gen->add_option("--gamma", f.gamma, "context strength in [0, 1]");
  gen->add_option("--tau", f.tau, "detector noise temperature");
  gen->add_option("--feat-dim", f.feat_dim);
  gen->add_option("--feature-noise", f.feature_noise);
  gen->add_option("--predicate-peak", f.predicate_peak);
  gen->add_flag("--compact", f.compact, "omit features and soft labels (rebuilt on load)");

  auto* tr = app.add_subcommand("train", "train a model on a corpus");
  common(tr);
  model_flags(tr);
  tr->add_option("--data", f.data, "corpus directory (train.jsonl, val.jsonl) or a train file");
  tr->add_option("--resume", f.resume, "continue from a last.ckpt");
  tr->add_option("--epochs", f.epochs);
  tr->add_option("--lr", f.lr);
  tr->add_option("--batch-size", f.batch_size);
  tr->add_option("--predicates", f.predicates, "relation slots sampled per image");
  tr->add_option("--clip", f.clip, "global gradient-norm clip (0 = off)");
  tr->add_option("--seed", f.seed);
  tr->add_flag("--float32", f.float32, "store checkpoints in float32");

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint or the FREQ baseline");
  common(ev);
  ev->add_option("--data", f.data, "corpus directory or test file");
  ev->add_option("--checkpoint", f.checkpoint);
  ev->add_option("--mode", f.modes, "predcls,sgcls")->delimiter(',');
  ev->add_option("--k", f.ks, "recall cut-offs, e.g. 50,100")->delimiter(',');
  ev->add_option("--baseline", f.baseline, "freq");
  ev->add_option("--train-data", f.train_data, "training file for --baseline freq");

  auto* en = app.add_subcommand("entropy", "marginal and context-conditional label entropies");
  common(en);
  en->add_option("--data", f.data, "corpus directory or .jsonl file");
  en->add_option("--obj-classes", f.obj_classes);
  en->add_option("--pred-classes", f.pred_classes);

  auto* gc = app.add_subcommand("gradcheck", "finite-difference check of the full model gradient");
  common(gc);
  model_flags(gc);
  gc->add_option("--seed", f.seed);
  gc->add_option("--objects", f.objects)->check(CLI::Range(2, 8));
  gc->add_option("--step", f.h, "central difference step");
  gc->add_option("--tol", f.tol, "relative error tolerance");
  gc->add_flag("--five-point", f.five_point, "fourth-order central stencil instead of the two-sided difference");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    const json file = read_config_file(f.config_file);
    if (gen->parsed()) return cmd_gen(*gen, f, file, out);
    if (tr->parsed()) return cmd_train(*tr, f, file, out);
    if (ev->parsed()) return cmd_eval(*ev, f, file, out);
    if (en->parsed()) return cmd_entropy(*en, f, file, out);
    return cmd_gradcheck(*gc, f, file, out);
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}

}  // namespace ilac
