// Command-line front end: gen, train, score, stratify, verify-theory, report.
//
// Every command writes its outputs plus resolved_config.json into --out and
// prints a one-line JSON summary on stdout. Failures print a JSON object
// {"error", "kind"} on stderr and exit non-zero.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "trust/checkpoint.hpp"
#include "trust/pipeline.hpp"
#include "trust/theory_suite.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace trust;

namespace {

constexpr int kExitError = 1;
constexpr int kExitUsage = 2;
constexpr int kExitCheckFailed = 3;

struct Options {
  std::string config;
  std::uint64_t seed = 42;
  bool seed_given = false;
  std::string out = ".";
  std::string method = "trust";
  std::size_t workers = 1;
  std::string sweep;
  std::string data, model, scores, train, test, ood;
};

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  try {
    return json::parse(report::read_text(path));
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
}

template <typename T>
void take(const json& j, const char* key, T& dst) {
  if (!j.contains(key)) return;
  try {
    dst = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config field '") + key + "': " + e.what());
  }
}

void reject_unknown(const json& j, const std::vector<std::string>& known, const char* what) {
  if (!j.is_object()) throw ConfigError(std::string(what) + " config must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ConfigError(std::string("unknown ") + what + " config field '" + key + "'");
    }
  }
}

fs::path prepare_out(const Options& o) {
  fs::path dir(o.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + o.out + ": " + ec.message());
  return dir;
}

void write_resolved(const fs::path& dir, const std::string& command, json resolved) {
  resolved["command"] = command;
  report::write_text((dir / "resolved_config.json").string(), report::dump(resolved));
}

void print(const json& j) { std::cout << j.dump() << std::endl; }

// ---------------------------------------------------------------- gen

int cmd_gen(const Options& o) {
  const json cfg = load_config(o.config);
  reject_unknown(cfg, {"d", "k", "modes_per_class", "cluster_std", "samples_per_mode", "radius",
                       "seed", "ood_samples"},
                 "gen");
  SyntheticSpec spec = reference::synthetic_spec();
  take(cfg, "d", spec.d);
  take(cfg, "k", spec.k);
  take(cfg, "modes_per_class", spec.modes_per_class);
  take(cfg, "samples_per_mode", spec.samples_per_mode);
  take(cfg, "radius", spec.radius);
  spec.cluster_std = 0.05 * spec.radius;
  take(cfg, "cluster_std", spec.cluster_std);
  take(cfg, "seed", spec.seed);
  if (o.seed_given) spec.seed = o.seed;

  const auto split = gen_microclusters(spec);
  std::size_t ood_samples = split.test.size();
  take(cfg, "ood_samples", ood_samples);
  const auto ood = gen_ood(ood_samples, spec.d, spec.radius, sample_seed(spec.seed, 1), spec.k);

  const auto dir = prepare_out(o);
  save_dataset(split.train, (dir / "train.bin").string());
  save_dataset(split.test, (dir / "test.bin").string());
  save_dataset(ood, (dir / "ood.bin").string());
  json resolved = {{"d", spec.d},
                   {"k", spec.k},
                   {"modes_per_class", spec.modes_per_class},
                   {"cluster_std", spec.cluster_std},
                   {"samples_per_mode", spec.samples_per_mode},
                   {"radius", spec.radius},
                   {"seed", spec.seed},
                   {"ood_samples", ood_samples}};
  write_resolved(dir, "gen", resolved);
  print({{"train", split.train.size()}, {"test", split.test.size()}, {"ood", ood.size()},
         {"d", spec.d}, {"k", spec.k}});
  return 0;
}

// ---------------------------------------------------------------- train

int cmd_train(const Options& o) {
  if (o.data.empty()) throw ConfigError("train needs --data");
  const json cfg = load_config(o.config);
  reject_unknown(cfg, {"hidden_dims", "dropout_rate", "loss_kind", "logitnorm_tau", "epochs",
                       "batch_size", "lr", "shuffle", "target_accuracy"},
                 "train");
  const auto data = load_dataset(o.data);

  const auto ref = reference::mlp_config();
  std::vector<std::size_t> hidden(ref.layer_dims.begin() + 1, ref.layer_dims.end() - 1);
  double dropout = ref.dropout_rate;
  take(cfg, "hidden_dims", hidden);
  take(cfg, "dropout_rate", dropout);
  MlpConfig mc;
  mc.layer_dims.push_back(data.dim());
  mc.layer_dims.insert(mc.layer_dims.end(), hidden.begin(), hidden.end());
  mc.layer_dims.push_back(data.num_classes);
  mc.dropout_rate = dropout;
  mc.seed = o.seed;

  TrainConfig tc = reference::train_config();
  std::string loss = to_string(tc.loss_kind);
  take(cfg, "loss_kind", loss);
  tc.loss_kind = parse_loss_kind(loss);
  take(cfg, "logitnorm_tau", tc.logitnorm_tau);
  take(cfg, "epochs", tc.epochs);
  take(cfg, "batch_size", tc.batch_size);
  take(cfg, "lr", tc.lr);
  take(cfg, "shuffle", tc.shuffle);
  take(cfg, "target_accuracy", tc.target_accuracy);
  tc.seed = sample_seed(o.seed, 1);

  auto result = train(Mlp::init(mc), data, tc);
  const auto dir = prepare_out(o);
  save_checkpoint(result.model, (dir / "model.ckpt").string());
  std::ostringstream hist;
  write_history_csv(hist, result.history);
  report::write_text((dir / "history.csv").string(), hist.str());
  write_resolved(dir, "train",
                 {{"data", o.data},
                  {"seed", o.seed},
                  {"layer_dims", mc.layer_dims},
                  {"dropout_rate", mc.dropout_rate},
                  {"loss_kind", to_string(tc.loss_kind)},
                  {"logitnorm_tau", tc.logitnorm_tau},
                  {"epochs", tc.epochs},
                  {"batch_size", tc.batch_size},
                  {"lr", tc.lr},
                  {"shuffle", tc.shuffle},
                  {"target_accuracy", tc.target_accuracy}});
  print({{"epochs_run", result.history.size()},
         {"train_accuracy", result.history.back().train_accuracy},
         {"train_loss", result.history.back().train_loss}});
  return 0;
}

// ---------------------------------------------------------------- score

ScoringOptions scoring_options(const Options& o, const json& cfg) {
  ScoringOptions opt;
  opt.method = parse_method(o.method);
  opt.workers = o.workers;
  if (opt.method == Method::trust) {
    opt.trust = trust_config_from_json(cfg);
  } else if (opt.method == Method::mc_dropout) {
    reject_unknown(cfg, {"passes", "seed"}, "mc_dropout");
    opt.dropout.seed = o.seed;
    take(cfg, "passes", opt.dropout.passes);
    take(cfg, "seed", opt.dropout.seed);
  } else {
    reject_unknown(cfg, {}, "msp");
  }
  return opt;
}

json method_config_json(const ScoringOptions& opt) {
  switch (opt.method) {
    case Method::trust: return to_json(opt.trust);
    case Method::mc_dropout: return {{"passes", opt.dropout.passes}, {"seed", opt.dropout.seed}};
    case Method::msp: return json::object();
  }
  return json::object();
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string cell;
  while (std::getline(in, cell, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(cell, &used));
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::logic_error&) {
      throw ConfigError("'" + cell + "' is not a number");
    }
  }
  if (out.empty()) throw ConfigError("empty value list");
  return out;
}

json score_summary(const std::vector<report::ScoreRow>& rows) {
  std::vector<std::size_t> iters;
  double sum = 0.0;
  for (const auto& r : rows) {
    iters.push_back(r.iterations);
    sum += r.score;
  }
  std::sort(iters.begin(), iters.end());
  return {{"n", rows.size()},
          {"accuracy", rows.empty() ? 0.0 : accuracy_of(rows)},
          {"mean_score", rows.empty() ? 0.0 : sum / static_cast<double>(rows.size())},
          {"median_iterations", iters.empty() ? 0 : iters[iters.size() / 2]}};
}

int cmd_score(const Options& o) {
  if (o.model.empty() || o.data.empty()) throw ConfigError("score needs --model and --data");
  const auto model = load_checkpoint(o.model);
  const auto data = load_dataset(o.data);
  json cfg = load_config(o.config);
  const auto base = scoring_options(o, cfg);
  const bool with_method = base.method != Method::trust;
  const auto dir = prepare_out(o);

  if (o.sweep.empty()) {
    const auto rows = score_dataset(model, data, base);
    report::write_text((dir / "scores.csv").string(), report::scores_csv(rows, with_method));
    write_resolved(dir, "score",
                   {{"model", o.model}, {"data", o.data}, {"method", o.method},
                    {"config", method_config_json(base)}});
    print(score_summary(rows));
    return 0;
  }

  if (base.method != Method::trust) throw ConfigError("--sweep applies to the trust method only");
  const auto eq = o.sweep.find('=');
  if (eq == std::string::npos) throw ConfigError("--sweep expects key=v1,v2,...");
  const std::string key = o.sweep.substr(0, eq);
  const auto values = parse_list(o.sweep.substr(eq + 1));
  json runs = json::array();
  json summaries = json::array();
  for (std::size_t i = 0; i < values.size(); ++i) {
    json swept = cfg.is_object() ? cfg : json::object();
    if (key == "max_iters" || key == "window" || key == "feature_layer") {
      swept[key] = static_cast<std::size_t>(values[i]);
    } else {
      swept[key] = values[i];
    }
    auto opt = base;
    opt.trust = trust_config_from_json(swept);
    const auto rows = score_dataset(model, data, opt);
    const std::string name = "scores_" + key + "=" + report::fmt(values[i]) + ".csv";
    report::write_text((dir / name).string(), report::scores_csv(rows, false));
    runs.push_back({{"file", name}, {"config", to_json(opt.trust)}});
    auto s = score_summary(rows);
    s[key] = values[i];
    summaries.push_back(s);
  }
  write_resolved(dir, "score",
                 {{"model", o.model}, {"data", o.data}, {"method", o.method}, {"sweep", key},
                  {"runs", runs}});
  print({{"sweep", key}, {"runs", summaries}});
  return 0;
}

// ---------------------------------------------------------------- stratify

int cmd_stratify(const Options& o) {
  if (o.scores.empty()) throw ConfigError("stratify needs --scores");
  const json cfg = load_config(o.config);
  reject_unknown(cfg, {"ause_steps"}, "stratify");
  std::size_t steps = 100;
  take(cfg, "ause_steps", steps);

  const auto rows = report::parse_scores_csv(report::read_text(o.scores));
  const auto preds = report::to_predictions(rows);
  const auto table = report::stratification(preds);
  const auto dir = prepare_out(o);
  report::write_text((dir / "stratification.csv").string(), report::stratification_csv(table));
  report::write_text((dir / "risk_coverage.csv").string(),
                     report::risk_coverage_csv(risk_coverage_curve(preds)));
  report::write_text((dir / "sparsification.csv").string(),
                     report::sparsification_csv(sparsification_curve(preds, steps)));
  json metrics = {{"n", preds.size()},
                  {"accuracy", accuracy_at_top(preds, 1.0)},
                  {"aurc", aurc(preds)},
                  {"ause", ause(preds, steps)},
                  {"ause_steps", steps}};
  report::write_text((dir / "metrics.json").string(), report::dump(metrics));
  write_resolved(dir, "stratify", {{"scores", o.scores}, {"ause_steps", steps}});
  print(metrics);
  return 0;
}

// ---------------------------------------------------------------- verify-theory

int cmd_verify_theory(const Options& o) {
  const json cfg = load_config(o.config);
  reject_unknown(cfg, {"norm_dim", "norm_samples", "norm_eps", "min_cos_points", "min_cos_dims",
                       "min_cos_repetitions", "sorting_trials", "cos_noise_trials",
                       "cos_noise_sigma"},
                 "verify-theory");
  geometry::TheorySuiteConfig tc;
  tc.seed = o.seed;
  take(cfg, "norm_dim", tc.norm_dim);
  take(cfg, "norm_samples", tc.norm_samples);
  take(cfg, "norm_eps", tc.norm_eps);
  take(cfg, "min_cos_points", tc.min_cos_points);
  take(cfg, "min_cos_dims", tc.min_cos_dims);
  take(cfg, "min_cos_repetitions", tc.min_cos_repetitions);
  take(cfg, "sorting_trials", tc.sorting_trials);
  take(cfg, "cos_noise_trials", tc.cos_noise_trials);
  take(cfg, "cos_noise_sigma", tc.cos_noise_sigma);

  const auto checks = geometry::run_theory_suite(tc);
  const auto result = geometry::to_json(checks);
  const auto dir = prepare_out(o);
  report::write_text((dir / "theory.json").string(), report::dump(result));
  write_resolved(dir, "verify-theory",
                 {{"seed", tc.seed},
                  {"norm_dim", tc.norm_dim},
                  {"norm_samples", tc.norm_samples},
                  {"norm_eps", tc.norm_eps},
                  {"min_cos_points", tc.min_cos_points},
                  {"min_cos_dims", tc.min_cos_dims},
                  {"min_cos_repetitions", tc.min_cos_repetitions},
                  {"sorting_trials", tc.sorting_trials},
                  {"cos_noise_trials", tc.cos_noise_trials},
                  {"cos_noise_sigma", tc.cos_noise_sigma}});
  print(result);
  if (!result.at("all_pass").get<bool>()) {
    std::vector<std::string> failed;
    for (const auto& c : checks) {
      if (!c.pass) failed.push_back(c.name);
    }
    std::cerr << json{{"error", "theory checks failed"}, {"kind", "check_failed"}, {"failed", failed}}.dump()
              << std::endl;
    return kExitCheckFailed;
  }
  return 0;
}

// ---------------------------------------------------------------- report

int cmd_report(const Options& o) {
  if (o.model.empty() || o.train.empty() || o.test.empty()) {
    throw ConfigError("report needs --model, --train and --test");
  }
  json cfg = load_config(o.config);
  reject_unknown(cfg, {"trust", "corruption", "levels", "reference_stride", "bins"}, "report");
  ScoringOptions opt;
  opt.workers = o.workers;
  opt.trust = trust_config_from_json(cfg.value("trust", json::object()));
  std::string kind_name = "gaussian";
  std::vector<double> levels = {0.0, 0.1, 0.2, 0.4, 0.8};
  std::size_t stride = 1;
  std::size_t bins = 20;
  take(cfg, "corruption", kind_name);
  take(cfg, "levels", levels);
  take(cfg, "reference_stride", stride);
  take(cfg, "bins", bins);
  const auto kind = parse_corruption_kind(kind_name);

  const auto model = load_checkpoint(o.model);
  const auto reference_set = subsample(load_dataset(o.train), stride);
  const auto test = load_dataset(o.test);
  const auto dir = prepare_out(o);

  const auto ref_rows = score_dataset(model, reference_set, opt);
  const auto ref_scores = scores_of(ref_rows);
  const auto study = shift_study(model, test, ref_scores, kind, levels, o.seed, opt);

  std::ostringstream shift;
  shift << "kind,level,accuracy,accuracy_drop,mmd,mean_score\n";
  std::vector<double> mmds, drops;
  for (const auto& s : study) {
    shift << kind_name << ',' << report::fmt(s.level) << ',' << report::fmt(s.accuracy) << ','
          << report::fmt(s.accuracy_drop) << ',' << report::fmt(s.mmd) << ','
          << report::fmt(s.mean_score) << '\n';
    mmds.push_back(s.mmd);
    drops.push_back(s.accuracy_drop);
    report::write_text((dir / ("hist_" + kind_name + "_" + report::fmt(s.level) + ".csv")).string(),
                       report::histogram_csv(histogram(scores_of(s.rows), bins, -1.0, 1.0)));
  }
  report::write_text((dir / "shift.csv").string(), shift.str());
  report::write_text((dir / "hist_reference.csv").string(),
                     report::histogram_csv(histogram(ref_scores, bins, -1.0, 1.0)));

  json summary = {{"levels", levels}, {"mmd", mmds}, {"accuracy_drop", drops}};
  try {
    summary["spearman_mmd_vs_drop"] = spearman(mmds, drops);
  } catch (const DegenerateInputError&) {
    summary["spearman_mmd_vs_drop"] = nullptr;
  }
  if (!o.ood.empty()) {
    const auto ood_rows = score_dataset(model, load_dataset(o.ood), opt);
    const auto ood_scores = scores_of(ood_rows);
    report::write_text((dir / "hist_ood.csv").string(),
                       report::histogram_csv(histogram(ood_scores, bins, -1.0, 1.0)));
    double sum = 0.0;
    for (double v : ood_scores) sum += v;
    summary["ood_mean_score"] = sum / static_cast<double>(ood_scores.size());
    summary["ood_mmd"] = mmd(ood_scores, ref_scores);
  }
  report::write_text((dir / "report.json").string(), report::dump(summary));
  write_resolved(dir, "report",
                 {{"model", o.model},
                  {"train", o.train},
                  {"test", o.test},
                  {"ood", o.ood},
                  {"seed", o.seed},
                  {"trust", to_json(opt.trust)},
                  {"corruption", kind_name},
                  {"levels", levels},
                  {"reference_stride", stride},
                  {"bins", bins}});
  print(summary);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"TRUST uncertainty scoring toolkit"};
  app.require_subcommand(1);
  Options o;

  auto common = [&o](CLI::App* sub) {
    sub->add_option("--config", o.config, "JSON configuration file");
    sub->add_option("--seed", o.seed, "global seed")->each([&o](const std::string&) { o.seed_given = true; });
    sub->add_option("--out", o.out, "output directory");
  };

  auto* gen = app.add_subcommand("gen", "generate micro-cluster train/test/OOD datasets");
  common(gen);

  auto* tr = app.add_subcommand("train", "train the classifier");
  common(tr);
  tr->add_option("--data", o.data, "training dataset file")->required();

  auto* sc = app.add_subcommand("score", "score a dataset with trust, mc_dropout or msp");
  common(sc);
  sc->add_option("--model", o.model, "checkpoint")->required();
  sc->add_option("--data", o.data, "dataset file")->required();
  sc->add_option("--method", o.method, "trust|mc_dropout|msp")
      ->check(CLI::IsMember({"trust", "mc_dropout", "msp"}));
  sc->add_option("--workers", o.workers, "worker threads")->check(CLI::PositiveNumber);
  sc->add_option("--sweep", o.sweep, "key=v1,v2,... over TrustConfig fields");

  auto* st = app.add_subcommand("stratify", "accuracy at top-k%, AURC and AUSE of a score CSV");
  common(st);
  st->add_option("--scores", o.scores, "score CSV")->required();

  auto* vt = app.add_subcommand("verify-theory", "Monte-Carlo checks of the geometry results");
  common(vt);

  auto* rp = app.add_subcommand("report", "accuracy drop vs MMD under corruption, histograms");
  common(rp);
  rp->add_option("--model", o.model, "checkpoint")->required();
  rp->add_option("--train", o.train, "training dataset (reference scores)")->required();
  rp->add_option("--test", o.test, "test dataset")->required();
  rp->add_option("--ood", o.ood, "optional OOD dataset");
  rp->add_option("--workers", o.workers, "worker threads")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << json{{"error", e.what()}, {"kind", "usage"}}.dump() << std::endl;
    return kExitUsage;
  }

  try {
    if (gen->parsed()) return cmd_gen(o);
    if (tr->parsed()) return cmd_train(o);
    if (sc->parsed()) return cmd_score(o);
    if (st->parsed()) return cmd_stratify(o);
    if (vt->parsed()) return cmd_verify_theory(o);
    if (rp->parsed()) return cmd_report(o);
  } catch (const BatchError& e) {
    std::cerr << json{{"error", e.what()}, {"kind", e.kind()}, {"sample_index", e.sample_index()},
                      {"cause", e.inner_kind()}}.dump()
              << std::endl;
    return kExitError;
  } catch (const Error& e) {
    std::cerr << json{{"error", e.what()}, {"kind", e.kind()}}.dump() << std::endl;
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", e.what()}, {"kind", "internal"}}.dump() << std::endl;
    return kExitError;
  }
  return kExitUsage;
}
