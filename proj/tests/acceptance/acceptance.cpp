// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Criteria 3-7 and 9 share one reference benchmark run.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <sys/wait.h>

#include "support/metric_sweep.hpp"
#include "support/oracles.hpp"
#include "trust/checkpoint.hpp"
#include "trust/pipeline.hpp"
#include "trust/theory_suite.hpp"

namespace fs = std::filesystem;
using namespace trust;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string num(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report_line(int id, const std::string& name, const Outcome& o) {
  std::printf("[%s] %d %s: %s\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str());
  std::fflush(stdout);
  if (!o.pass) ++failures;
}

void run_criterion(int id, const std::string& name, const std::function<Outcome()>& body) {
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  report_line(id, name, o);
}

double vec_rel_error(const Vector& a, const Vector& b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), 1e-300});
}

// ---------------------------------------------------------------- 1

Outcome gradient_correctness() {
  const auto t0 = Clock::now();
  Rng rng(20240601);
  std::uniform_int_distribution<std::size_t> in_dim(3, 8), width(3, 10), depth(1, 2), classes(2, 5);
  std::normal_distribution<double> gauss(0.0, 1.0);
  double worst_input = 0.0, worst_param = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    MlpConfig cfg;
    cfg.layer_dims.push_back(in_dim(rng));
    const std::size_t hidden = depth(rng);
    for (std::size_t h = 0; h < hidden; ++h) cfg.layer_dims.push_back(width(rng));
    cfg.layer_dims.push_back(classes(rng));
    cfg.seed = rng();
    auto model = Mlp::init(cfg);
    for (auto& b : model.biases) {
      for (auto& v : b) v = 0.1 * gauss(rng);
    }
    Vector x(cfg.layer_dims.front());
    for (auto& v : x) v = gauss(rng);
    std::uniform_int_distribution<std::size_t> pick(0, cfg.layer_dims.back() - 1);
    const std::size_t target = pick(rng);
    const double t = trial % 2 == 0 ? 1.0 : 5.0;

    const auto g = backward(model, forward(model, x), target, t);
    Vector flat;
    for (auto b : g.blocks()) flat.insert(flat.end(), b.begin(), b.end());
    worst_input = std::max(worst_input, vec_rel_error(g.input, oracle::input_gradient(model, x, target, t)));
    worst_param = std::max(worst_param, vec_rel_error(flat, oracle::parameter_gradient(model, x, target, t)));
  }
  const double secs = seconds_since(t0);
  const bool ok = worst_input < 1e-5 && worst_param < 1e-5 && secs < 10.0;
  return {ok, "20 tuples, max rel err input " + num(worst_input, 3) + " params " + num(worst_param, 3) +
                  " (< 1e-5), " + num(secs, 3) + " s (< 10 s)"};
}

// ---------------------------------------------------------------- 2

Outcome metric_oracles() {
  const auto t0 = Clock::now();
  const auto r = sweep::run(8, 2, 77);
  const double secs = seconds_since(t0);
  const bool ok = r.cases >= 1000 && r.mismatches == 0 && secs < 30.0;
  std::string detail = std::to_string(r.cases) + " cases (>= 1000), " + std::to_string(r.mismatches) +
                       " mismatches, max abs diff " + num(r.worst, 3) + ", " + num(secs, 3) +
                       " s (< 30 s)";
  if (!r.first_failure.empty()) detail += "; first: " + r.first_failure;
  return {ok, detail};
}

// ---------------------------------------------------------------- reference run

struct Reference {
  SyntheticSplit split;
  Dataset ood;
  Mlp model;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  std::size_t epochs = 0;
  std::vector<report::ScoreRow> trust_rows;
  double seconds_to_stratify = 0.0;
  std::size_t workers = 1;
};

Reference build_reference() {
  Reference ref;
  const auto t0 = Clock::now();
  ref.workers = std::max(1u, std::thread::hardware_concurrency());
  ref.split = gen_microclusters(reference::synthetic_spec());
  auto trained = train(Mlp::init(reference::mlp_config()), ref.split.train, reference::train_config());
  ref.model = std::move(trained.model);
  ref.epochs = trained.history.size();
  ref.train_accuracy = evaluate(ref.model, ref.split.train);
  ref.test_accuracy = evaluate(ref.model, ref.split.test);
  ScoringOptions opt;
  opt.workers = ref.workers;
  ref.trust_rows = score_dataset(ref.model, ref.split.test, opt);
  ref.seconds_to_stratify = seconds_since(t0);
  const auto spec = reference::synthetic_spec();
  ref.ood = gen_ood(400, spec.d, spec.radius, sample_seed(spec.seed, 1), spec.k);
  return ref;
}

struct Monotonicity {
  bool pass = false;
  std::string table;
};

Monotonicity check_monotone(const std::vector<report::ScoreRow>& rows) {
  const auto table = report::stratification(report::to_predictions(rows));
  std::size_t inversions = 0;
  double largest = 0.0;
  Monotonicity m;
  for (std::size_t i = 0; i < table.size(); ++i) {
    m.table += (i ? " " : "") + std::to_string(table[i].first) + "%:" + num(table[i].second, 4);
    if (i == 0) continue;
    const double rise = table[i].second - table[i - 1].second;
    if (rise > 1e-12) {
      ++inversions;
      largest = std::max(largest, rise);
    }
  }
  m.pass = inversions == 0 || (inversions == 1 && largest <= 0.005 + 1e-12);
  const auto unmoved = std::count_if(rows.begin(), rows.end(), [](const auto& r) { return r.score == 1.0; });
  m.table += " | inversions " + std::to_string(inversions);
  if (inversions) m.table += " (largest " + num(100.0 * largest, 3) + " pp)";
  m.table += ", score exactly 1: " + std::to_string(unmoved) + "/" + std::to_string(rows.size());
  return m;
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_var(const std::vector<double>& v) {
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return ss / static_cast<double>(v.size() - 1);
}

// ---------------------------------------------------------------- 10

int run_cli(const fs::path& dir, const std::string& args, const std::string& tag) {
  const std::string cmd = "cd '" + dir.string() + "' && '" TRUST_CLI_PATH "' " + args + " >'" + tag +
                          ".out' 2>'" + tag + ".err'";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::vector<std::string> pipeline(const fs::path& dir) {
  std::vector<std::string> problems;
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto put = [&](const char* name, const std::string& text) {
    report::write_text((dir / name).string(), text);
  };
  put("gen.json", R"({"samples_per_mode": 50, "ood_samples": 40})");
  put("trust.json", R"({"max_iters": 300})");
  put("dropout.json", R"({"passes": 10})");
  put("report.json", R"({"trust": {"max_iters": 100}, "levels": [0, 0.4], "reference_stride": 8})");
  put("theory.json",
      R"({"norm_dim": 2000, "norm_samples": 500, "min_cos_points": 100, "min_cos_repetitions": 3,
          "sorting_trials": 20000, "cos_noise_trials": 20000})");
  const std::vector<std::pair<std::string, std::string>> steps = {
      {"gen", "gen --config gen.json --seed 7 --out data"},
      {"train", "train --data data/train.bin --seed 7 --out model"},
      {"score", "score --config trust.json --model model/model.ckpt --data data/test.bin --out trust"},
      {"msp", "score --method msp --model model/model.ckpt --data data/test.bin --out msp"},
      {"dropout", "score --method mc_dropout --config dropout.json --seed 7 --model model/model.ckpt "
                  "--data data/test.bin --out dropout"},
      {"sweep", "score --config trust.json --sweep lambda=0.001,0.1 --model model/model.ckpt "
                "--data data/test.bin --out sweep"},
      {"stratify", "stratify --scores trust/scores.csv --out strat"},
      {"report", "report --config report.json --seed 7 --model model/model.ckpt --train data/train.bin "
                 "--test data/test.bin --ood data/ood.bin --out report"},
  };
  for (const auto& [tag, args] : steps) {
    const int code = run_cli(dir, args, tag);
    if (code != 0) problems.push_back(tag + " exited " + std::to_string(code));
  }
  // Theory checks may fail at this reduced size; only determinism matters here.
  const int code = run_cli(dir, "verify-theory --config theory.json --seed 7 --out theory", "theory");
  if (code != 0 && code != 3) problems.push_back("verify-theory exited " + std::to_string(code));
  return problems;
}

Outcome determinism() {
  const auto base = fs::temp_directory_path() / "trust_acceptance_determinism";
  auto problems = pipeline(base / "a");
  const auto second = pipeline(base / "b");
  problems.insert(problems.end(), second.begin(), second.end());

  std::vector<std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(base / "a")) {
    if (e.is_regular_file()) files.push_back(fs::relative(e.path(), base / "a").string());
  }
  std::sort(files.begin(), files.end());
  std::size_t compared = 0, differing = 0;
  std::string first_diff;
  for (const auto& f : files) {
    const auto other = base / "b" / f;
    if (!fs::exists(other)) {
      ++differing;
      if (first_diff.empty()) first_diff = f + " missing";
      continue;
    }
    ++compared;
    if (report::read_text((base / "a" / f).string()) != report::read_text(other.string())) {
      ++differing;
      if (first_diff.empty()) first_diff = f;
    }
  }
  std::size_t tabular = 0;
  for (const auto& f : files) {
    const auto ext = fs::path(f).extension();
    tabular += (ext == ".csv" || ext == ".json") ? 1 : 0;
  }
  const bool ok = problems.empty() && differing == 0 && tabular >= 20;
  std::string detail = std::to_string(compared) + " files compared (" + std::to_string(tabular) +
                       " CSV/JSON), " + std::to_string(differing) + " differ";
  if (!first_diff.empty()) detail += " (first: " + first_diff + ")";
  for (const auto& p : problems) detail += "; " + p;
  return {ok, detail};
}

}  // namespace

int main() {
  std::printf("acceptance: reference benchmark d=64 k=4 2 modes/class, MLP [64,128,64,4]\n");
  std::fflush(stdout);

  run_criterion(1, "gradient correctness", gradient_correctness);
  run_criterion(2, "metric oracles", metric_oracles);

  Reference ref;
  bool have_ref = false;
  try {
    ref = build_reference();
    have_ref = true;
    std::printf("reference: %zu train epochs, train acc %s, test acc %s, %zu workers\n", ref.epochs,
                num(ref.train_accuracy).c_str(), num(ref.test_accuracy).c_str(), ref.workers);
  } catch (const std::exception& e) {
    std::printf("reference run failed: %s\n", e.what());
  }
  auto needs_ref = [&](const std::function<Outcome()>& body) {
    return [&, body] { return have_ref ? body() : Outcome{false, "reference run unavailable"}; };
  };

  run_criterion(3, "stratification monotonicity", needs_ref([&] {
    const auto m = check_monotone(ref.trust_rows);
    const bool trained = ref.train_accuracy >= 0.95;
    const bool fast = ref.seconds_to_stratify < 600.0;
    return Outcome{m.pass && trained && fast,
                   m.table + "; train acc " + num(ref.train_accuracy, 4) + " (>= 0.95); " +
                       num(ref.seconds_to_stratify, 4) + " s (< 600 s)"};
  }));

  run_criterion(4, "ranking quality", needs_ref([&] {
    const auto preds = report::to_predictions(ref.trust_rows);
    const double trust_aurc = aurc(preds);
    const double trust_ause = ause(preds);
    Rng rng(4242);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double random_aurc = 0.0, random_ause = 0.0;
    for (int k = 0; k < 20; ++k) {
      auto shuffled = preds;
      for (auto& p : shuffled) p.score = u(rng);
      random_aurc += aurc(shuffled) / 20.0;
      random_ause += ause(shuffled) / 20.0;
    }
    const double n = static_cast<double>(preds.size());
    const double err = 1.0 - accuracy_at_top(preds, 1.0);
    const double sd = std::sqrt(err * (1.0 - err) / n);

    ScoringOptions msp;
    msp.method = Method::msp;
    ScoringOptions dropout;
    dropout.method = Method::mc_dropout;
    dropout.dropout.seed = 42;
    const double msp_aurc = aurc(report::to_predictions(score_dataset(ref.model, ref.split.test, msp)));
    const double mcd_aurc =
        aurc(report::to_predictions(score_dataset(ref.model, ref.split.test, dropout)));

    const bool ok = trust_aurc <= random_aurc - 3.0 * sd && trust_ause < random_ause;
    return Outcome{ok, "AURC " + num(trust_aurc) + " vs random " + num(random_aurc) + " - 3 sd (" +
                           num(3.0 * sd) + "); AUSE " + num(trust_ause) + " vs random " +
                           num(random_ause) + "; MC-dropout AURC " + num(mcd_aurc) + ", MSP AURC " +
                           num(msp_aurc)};
  }));

  run_criterion(5, "convergence before max_iters", needs_ref([&] {
    std::vector<std::size_t> iters;
    std::size_t early = 0;
    for (const auto& r : ref.trust_rows) {
      iters.push_back(r.iterations);
      early += r.iterations < 10000 ? 1 : 0;
    }
    std::sort(iters.begin(), iters.end());
    const double frac = static_cast<double>(early) / static_cast<double>(iters.size());
    return Outcome{frac >= 0.95, num(100.0 * frac, 4) + "% stopped before 10000 (>= 95%); median iterations " +
                                     std::to_string(iters[iters.size() / 2])};
  }));

  run_criterion(6, "OOD separation", needs_ref([&] {
    ScoringOptions opt;
    opt.workers = ref.workers;
    const auto ood = scores_of(score_dataset(ref.model, ref.ood, opt));
    const auto id = scores_of(ref.trust_rows);
    const double gap = mean_of(id) - mean_of(ood);
    const double se = std::sqrt(sample_var(ood) / static_cast<double>(ood.size()) +
                                sample_var(id) / static_cast<double>(id.size()));
    return Outcome{gap >= 3.0 * se && mean_of(ood) < mean_of(id),
                   "mean OOD " + num(mean_of(ood)) + " vs ID " + num(mean_of(id)) + ", gap " + num(gap) +
                       " = " + num(gap / se, 4) + " SE (>= 3)"};
  }));

  run_criterion(7, "shift trend", needs_ref([&] {
    ScoringOptions opt;
    opt.workers = ref.workers;
    const auto reference_scores = scores_of(score_dataset(ref.model, ref.split.train, opt));
    const std::vector<double> levels = {0.0, 0.1, 0.2, 0.4, 0.8};
    const auto study =
        shift_study(ref.model, ref.split.test, reference_scores, CorruptionKind::gaussian, levels, 42, opt);
    std::vector<double> mmds, drops;
    std::string table;
    for (const auto& s : study) {
      mmds.push_back(s.mmd);
      drops.push_back(s.accuracy_drop);
      table += " [" + num(s.level, 2) + ": drop " + num(s.accuracy_drop, 4) + " mmd " + num(s.mmd, 4) + "]";
    }
    double rho = std::nan("");
    try {
      rho = spearman(mmds, drops);
    } catch (const DegenerateInputError&) {
    }
    return Outcome{rho >= 0.9, "spearman " + num(rho, 4) + " (>= 0.9);" + table};
  }));

  run_criterion(8, "theory suite", [] {
    const auto t0 = Clock::now();
    const auto checks = geometry::run_theory_suite({});
    const double secs = seconds_since(t0);
    bool all = true;
    std::string detail;
    for (const auto& c : checks) {
      all = all && c.pass;
      detail += (detail.empty() ? "" : "; ") + c.name + (c.pass ? " ok" : " FAILED") + " (emp " +
                num(c.report.empirical_value) + " th " + num(c.report.theoretical_value) + ")";
    }
    return Outcome{all && secs < 120.0, num(secs, 3) + " s (< 120 s); " + detail};
  });

  run_criterion(9, "ablation robustness", needs_ref([&] {
    ScoringOptions hot, sparse;
    hot.workers = sparse.workers = ref.workers;
    hot.trust.T = 100.0;
    sparse.trust.lambda = 0.1;
    const auto a = check_monotone(score_dataset(ref.model, ref.split.test, hot));
    const auto b = check_monotone(score_dataset(ref.model, ref.split.test, sparse));
    return Outcome{a.pass && b.pass, "T=100: " + a.table + " || lambda=0.1: " + b.table};
  }));

  run_criterion(10, "determinism", determinism);

  std::printf("acceptance: %d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
