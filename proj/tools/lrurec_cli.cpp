// Command-line front end: preprocess, train, evaluate, benchmarks, and the
// eigenvalue report, driven by a flat key=value config file plus flags.
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lrurec/bench.hpp"
#include "lrurec/config.hpp"
#include "lrurec/data.hpp"
#include "lrurec/evaluator.hpp"
#include "lrurec/model.hpp"
#include "lrurec/trainer.hpp"

using namespace lrurec;
namespace fs = std::filesystem;

namespace {

struct FlagBag {
  std::string config_path;
  std::map<std::string, std::string> values;  // flag overrides, key -> value
};

// Registers one --key flag whose value lands in the bag when passed.
void add_key(CLI::App* cmd, FlagBag& bag, const std::string& key,
             const std::string& help) {
  // "--h" would collide with the built-in help flag.
  std::string flag = (key == "h") ? "--hidden" : "--" + key;
  for (auto& c : flag)
    if (c == '_') c = '-';
  cmd->add_option_function<std::string>(
      flag, [&bag, key](const std::string& v) { bag.values[key] = v; }, help);
}

RunConfig build_config(const FlagBag& bag) {
  RunConfig cfg;
  if (!bag.config_path.empty()) cfg.load_file(bag.config_path);
  for (const auto& [k, v] : bag.values) cfg.set(k, v);
  return cfg;
}

fs::path out_dir(const RunConfig& cfg) {
  fs::path dir = cfg.get_str("out", "runs");
  fs::create_directories(dir);
  return dir;
}

std::ofstream open_artifact(const fs::path& path, const RunConfig& cfg) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << "# config_hash=" << cfg.hash_hex() << "\n";
  return f;
}

std::vector<int> int_list(const RunConfig& cfg, const std::string& key,
                          const std::vector<int>& def) {
  std::vector<double> dd;
  for (int v : def) dd.push_back(v);
  std::vector<int> out;
  for (double v : cfg.get_doubles(key, dd)) out.push_back(static_cast<int>(v));
  return out;
}

ModelConfig model_config(const RunConfig& cfg, int item_count) {
  ModelConfig mc;
  mc.item_count = item_count;
  mc.h = static_cast<int>(cfg.get_int("h", 64));
  mc.num_blocks = static_cast<int>(cfg.get_int("blocks", 2));
  mc.dropout = cfg.get_double("dropout", 0.2);
  mc.use_layer_norm = cfg.get_bool("use_layer_norm", true);
  mc.use_residual = cfg.get_bool("use_residual", true);
  mc.use_pffn = cfg.get_bool("use_pffn", true);
  mc.r_min = cfg.get_double("r_min", 0.8);
  mc.r_max = cfg.get_double("r_max", 0.99);
  return mc;
}

TrainConfig train_config(const RunConfig& cfg) {
  TrainConfig tc;
  tc.opt.lr = cfg.get_double("lr", 1e-3);
  tc.opt.weight_decay = cfg.get_double("weight_decay", 0.0);
  tc.batch_size = static_cast<int>(cfg.get_int("batch_size", 128));
  tc.max_epochs = static_cast<int>(cfg.get_int("max_epochs", 500));
  tc.validate_every = static_cast<int>(cfg.get_int("validate_every", 1000));
  tc.patience = static_cast<int>(cfg.get_int("patience", 10));
  tc.negative_samples =
      static_cast<int>(cfg.get_int("negative_samples", 0));
  tc.eval_sampled = static_cast<int>(cfg.get_int("eval_sampled", 0));
  tc.eval_sample_users = cfg.get_int("eval_sample_users", 0);
  tc.last_position_only = cfg.get_bool("last_position_only", false);
  tc.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 42));
  return tc;
}

SplitDataset load_from(const RunConfig& cfg) {
  std::string dir = cfg.get_str("split_dir", "");
  if (dir.empty()) throw ConfigError("split_dir is required");
  return load_split(dir + "/split_manifest.tsv", dir + "/item_idmap.tsv");
}

int run_preprocess(const RunConfig& cfg) {
  std::string input = cfg.get_str("input", "");
  if (input.empty()) throw ConfigError("input is required");
  ParseOptions opt;
  opt.delimiter = cfg.get_str("delimiter", ",");
  opt.user_col = static_cast<int>(cfg.get_int("user_col", 0));
  opt.item_col = static_cast<int>(cfg.get_int("item_col", 1));
  opt.time_col = static_cast<int>(cfg.get_int("time_col", 2));

  std::ifstream in(input);
  if (!in) throw std::runtime_error("cannot open input: " + input);
  auto log = parse_interactions(in, opt);
  auto filtered = filter_min_interactions(
      log, static_cast<int>(cfg.get_int("min_count", 5)));
  SplitDataset ds =
      build_split(filtered, static_cast<int>(cfg.get_int("max_len", 50)));

  fs::path dir = out_dir(cfg);
  save_split(ds, (dir / "split_manifest.tsv").string(),
             (dir / "item_idmap.tsv").string(),
             "config_hash=" + cfg.hash_hex());
  std::cout << "interactions=" << log.size() << " kept=" << filtered.size()
            << " users=" << ds.user_count() << " items=" << ds.item_count()
            << " -> " << dir.string() << "\n";
  return 0;
}

int run_train(const RunConfig& cfg) {
  SplitDataset ds = load_from(cfg);
  TrainView view = make_train_view(ds);
  ModelConfig mc = model_config(cfg, ds.item_count());
  TrainConfig tc = train_config(cfg);

  fs::path dir = out_dir(cfg);
  std::ofstream metrics = open_artifact(dir / "metrics.tsv", cfg);
  metrics << "round\titeration\trecall10\tndcg10\tloss\telapsed_s\n";

  TrainResult result;
  if (cfg.has("weight_decay_grid") || cfg.has("dropout_grid")) {
    auto wds = cfg.get_doubles("weight_decay_grid",
                               {cfg.get_double("weight_decay", 0.0)});
    auto drs = cfg.get_doubles("dropout_grid", {mc.dropout});
    GridResult g = grid_search(mc, tc, wds, drs, view, &metrics);
    std::cout << "grid best: weight_decay=" << g.best_weight_decay
              << " dropout=" << g.best_dropout << "\n";
    result = std::move(g.best);
  } else {
    result = train(mc, tc, view, &metrics);
  }

  save_checkpoint((dir / "checkpoint.bin").string(), result.best,
                  ds.vocab_hash());
  std::ofstream report = open_artifact(dir / "train_report.txt", cfg);
  report << "stop_reason=" << result.report.stop_reason << "\n"
         << "iterations=" << result.report.iterations << "\n"
         << "best_round=" << result.report.best_round << "\n"
         << "best_recall10=" << result.report.best_recall10 << "\n"
         << "total_seconds=" << result.report.total_seconds << "\n";
  std::cout << "best validation recall@10 " << result.report.best_recall10
            << " after " << result.report.iterations << " iterations ("
            << result.report.stop_reason << ")\n";
  return 0;
}

int run_evaluate(const RunConfig& cfg) {
  SplitDataset ds = load_from(cfg);
  std::string ckpt = cfg.get_str("checkpoint", "");
  if (ckpt.empty()) throw ConfigError("checkpoint is required");
  Checkpoint c = load_checkpoint(ckpt);
  if (c.vocab_hash != ds.vocab_hash())
    throw std::runtime_error(
        "checkpoint/split vocabulary mismatch: checkpoint hash " +
        std::to_string(c.vocab_hash) + ", split hash " +
        std::to_string(ds.vocab_hash()));

  std::string phase = cfg.get_str("phase", "test");
  if (phase != "test" && phase != "validation")
    throw ConfigError("phase must be 'validation' or 'test'");
  EvalMode mode;
  mode.sampled = static_cast<int>(cfg.get_int("eval_sampled", 0));
  mode.exclude_seen = cfg.get_bool("exclude_seen", false);
  Rng rng(static_cast<std::uint64_t>(cfg.get_int("seed", 42)));
  MetricResult m = evaluate(
      c.params, ds,
      phase == "test" ? EvalPhase::test : EvalPhase::validation, mode, &rng);

  fs::path dir = out_dir(cfg);
  std::ofstream f = open_artifact(dir / ("eval_" + phase + ".tsv"), cfg);
  f << "k\trecall\tndcg\tusers\tmode\n";
  for (const auto& e : m.entries) {
    f << e.k << '\t' << e.recall << '\t' << e.ndcg << '\t' << m.users << '\t'
      << m.mode << "\n";
    std::cout << phase << " recall@" << e.k << "=" << e.recall << " ndcg@"
              << e.k << "=" << e.ndcg << "\n";
  }
  return 0;
}

int run_bench_scan(const RunConfig& cfg) {
  auto records = bench_scan(int_list(cfg, "l_grid", {8, 32, 128, 512}),
                            static_cast<int>(cfg.get_int("h", 64)),
                            static_cast<int>(cfg.get_int("bench_n", 8)),
                            static_cast<int>(cfg.get_int("reps", 9)));
  fs::path dir = out_dir(cfg);
  std::ofstream f = open_artifact(dir / "bench_scan.tsv", cfg);
  f << "scenario\tn\tl\th\treps\tmedian_s\tp90_s\tpasses\n";
  for (const auto& r : records) {
    f << r.scenario << '\t' << r.n << '\t' << r.l << '\t' << r.h << '\t'
      << r.reps << '\t' << r.median_s << '\t' << r.p90_s << '\t' << r.passes
      << "\n";
    std::cout << "L=" << r.l << " median " << r.median_s << "s, " << r.passes
              << " passes\n";
  }
  return 0;
}

int run_bench_incremental(const RunConfig& cfg) {
  IncrementalBench b = bench_incremental(
      int_list(cfg, "history_grid", {10, 100, 1000}),
      static_cast<int>(cfg.get_int("steps", 2000)),
      static_cast<int>(cfg.get_int("h", 64)),
      static_cast<int>(cfg.get_int("reps", 25)));
  fs::path dir = out_dir(cfg);
  std::ofstream f = open_artifact(dir / "bench_incremental.tsv", cfg);
  f << "scenario\thistory\th\treps\tmedian_s\tp90_s\n";
  for (const auto& r : b.per_history) {
    f << r.scenario << '\t' << r.l << '\t' << r.h << '\t' << r.reps << '\t'
      << r.median_s << '\t' << r.p90_s << "\n";
    std::cout << "history=" << r.l << " per-step median " << r.median_s
              << "s\n";
  }
  std::ofstream cum = open_artifact(dir / "bench_cumulative.tsv", cfg);
  cum << "step\tseconds\n";
  for (const auto& [step, s] : b.cumulative) cum << step << '\t' << s << "\n";
  std::cout << "cumulative linear fit R^2 " << b.r2 << "\n";
  return 0;
}

int run_lambda_report(const RunConfig& cfg) {
  std::string ckpt = cfg.get_str("checkpoint", "");
  if (ckpt.empty()) throw ConfigError("checkpoint is required");
  Checkpoint c = load_checkpoint(ckpt);
  auto rep = lambda_report(c.params);
  fs::path dir = out_dir(cfg);
  std::ofstream f = open_artifact(dir / "lambda_report.tsv", cfg);
  f << "block\tmean_abs_lambda\n";
  for (size_t b = 0; b < rep.size(); ++b) {
    f << b << '\t' << rep[b] << "\n";
    std::cout << "block " << b << " mean |lambda| " << rep[b] << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LRURec: linear recurrent sequential recommender"};
  app.require_subcommand(1);

  struct Sub {
    CLI::App* cmd;
    FlagBag bag;
    int (*fn)(const RunConfig&);
  };
  std::vector<Sub> subs;
  subs.reserve(6);

  auto make = [&](const std::string& name, const std::string& help,
                  int (*fn)(const RunConfig&),
                  const std::vector<std::pair<std::string, std::string>>& keys) {
    subs.push_back({app.add_subcommand(name, help), {}, fn});
    Sub& s = subs.back();
    s.cmd->add_option("--config", s.bag.config_path,
                      "key=value config file; flags override");
    add_key(s.cmd, s.bag, "out", "output directory (default runs)");
    add_key(s.cmd, s.bag, "seed", "rng seed (default 42)");
    for (const auto& [k, h] : keys) add_key(s.cmd, s.bag, k, h);
  };

  make("preprocess", "raw interaction log -> split manifest", run_preprocess,
       {{"input", "interaction log path (required)"},
        {"delimiter", "field delimiter (default ,)"},
        {"user_col", "user column index (default 0)"},
        {"item_col", "item column index (default 1)"},
        {"time_col", "timestamp column index (default 2)"},
        {"min_count", "minimum item/user interactions (default 5)"},
        {"max_len", "training sequence cap (default 50)"}});
  make("train", "split -> checkpoint + metrics", run_train,
       {{"split_dir", "directory with split manifest (required)"},
        {"h", "hidden width (default 64)"},
        {"blocks", "residual block count (default 2)"},
        {"dropout", "dropout rate (default 0.2)"},
        {"use_layer_norm", "enable layer norm (default true)"},
        {"use_residual", "enable residual connections (default true)"},
        {"use_pffn", "enable position-wise FFN (default true)"},
        {"r_min", "eigenvalue ring inner radius (default 0.8)"},
        {"r_max", "eigenvalue ring outer radius (default 0.99)"},
        {"lr", "learning rate (default 0.001)"},
        {"batch_size", "batch size (default 128)"},
        {"max_epochs", "epoch cap (default 500)"},
        {"validate_every", "iterations per validation round (default 1000)"},
        {"patience", "rounds without improvement before stop (default 10)"},
        {"weight_decay", "decoupled weight decay (default 0)"},
        {"negative_samples", "sampled-softmax negatives, 0 = full (default 0)"},
        {"last_position_only", "train on final position only (default false)"},
        {"weight_decay_grid", "comma list to grid-search"},
        {"dropout_grid", "comma list to grid-search"},
        {"eval_sampled", "validation negatives, 0 = full (default 0)"},
        {"eval_sample_users", "validation user subsample, 0 = all (default 0)"},
        {"workers", "worker pool size (default 1)"}});
  make("evaluate", "checkpoint + split -> metric files", run_evaluate,
       {{"split_dir", "directory with split manifest (required)"},
        {"checkpoint", "model checkpoint path (required)"},
        {"phase", "validation or test (default test)"},
        {"eval_sampled", "negatives per user, 0 = full ranking (default 0)"},
        {"exclude_seen", "drop history items from candidates (default false)"}});
  make("bench-scan", "time the parallel scan across lengths", run_bench_scan,
       {{"l_grid", "comma list of sequence lengths (default 8,32,128,512)"},
        {"h", "hidden width (default 64)"},
        {"bench_n", "batch rows (default 8)"},
        {"reps", "timed repetitions (default 9)"}});
  make("bench-incremental", "per-step latency and cumulative-time linearity",
       run_bench_incremental,
       {{"history_grid", "comma list of history lengths (default 10,100,1000)"},
        {"steps", "cumulative step count (default 2000)"},
        {"h", "hidden width (default 64)"},
        {"reps", "timed repetitions (default 25)"}});
  make("lambda-report", "per-block mean eigenvalue magnitude",
       run_lambda_report, {{"checkpoint", "model checkpoint path (required)"}});

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    for (const auto& s : subs)
      if (s.cmd->parsed()) return s.fn(build_config(s.bag));
    std::cerr << "no subcommand selected\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
