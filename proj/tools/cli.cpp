#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>

#include "deh/checkpoint.hpp"
#include "deh/config.hpp"
#include "deh/verify.hpp"
#include "deh/version.hpp"

namespace deh::cli {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Common {
  std::optional<std::size_t> threads;
  bool deterministic = false;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> precision;
  std::string manifest;
};

struct Run {
  std::string command;
  std::string subcommand;
  std::uint64_t hash = 0;
  std::uint64_t seed = 0;
  std::string precision = "f64";
  json extra = json::object();
};

std::string hex64(std::uint64_t v) {
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << v;
  return out.str();
}

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config:
    case ErrorKind::invalid_argument:
    case ErrorKind::dimension_mismatch:
      return kConfigError;
    case ErrorKind::io:
      return kIoError;
    default:
      return kRuntimeError;
  }
}

// Opens `path` for appending; the header goes in only when the file is new or
// empty, so repeated runs extend one table.
std::ofstream open_csv(const fs::path& path, const std::string& header) {
  const bool fresh = !fs::exists(path) || fs::file_size(path) == 0;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::app);
  if (!out) fail(ErrorKind::io, "cannot open '" + path.string() + "' for writing");
  if (fresh) out << header << "\n";
  return out;
}

std::size_t resolve_threads(const Common& common, std::ostream& err) {
  if (common.deterministic) {
    if (common.threads && *common.threads != 1)
      err << "note: --deterministic forces a single thread (ignoring --threads "
          << *common.threads << ")\n";
    return 1;
  }
  if (common.threads) return *common.threads;
  if (const char* env = std::getenv("DEH_NUM_THREADS")) {
    try {
      return static_cast<std::size_t>(std::stoul(env));
    } catch (const std::exception&) {
      fail(ErrorKind::config, std::string("DEH_NUM_THREADS must be an integer, got '") + env + "'");
    }
  }
  return 0;
}

std::pair<std::size_t, std::size_t> parse_range(const std::string& text) {
  auto to_size = [&](const std::string& part) {
    try {
      std::size_t used = 0;
      const auto v = std::stoul(part, &used);
      if (used == part.size()) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
    fail(ErrorKind::config, "--n-range: expected 'a..b' or a single n, got '" + text + "'");
  };
  const auto dots = text.find("..");
  if (dots == std::string::npos) {
    const std::size_t n = to_size(text);
    return {n, n};
  }
  return {to_size(text.substr(0, dots)), to_size(text.substr(dots + 2))};
}

std::vector<std::size_t> parse_sizes(const std::string& text) {
  std::vector<std::size_t> sizes;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      const auto v = std::stoul(item, &used);
      if (used != item.size() || v == 0) throw std::invalid_argument(item);
      sizes.push_back(v);
    } catch (const std::exception&) {
      fail(ErrorKind::config, "--sweep: expected comma-separated positive sizes, got '" + text + "'");
    }
  }
  if (sizes.empty()) fail(ErrorKind::config, "--sweep: no sizes given");
  return sizes;
}

void check_data_fits(const Dataset& data, const ModelSpec& spec, Loss loss) {
  require(data.dim == spec.input_dim, ErrorKind::config,
          "dataset dim " + std::to_string(data.dim) + " does not match model input_dim " +
              std::to_string(spec.input_dim));
  require(data.points == spec.points, ErrorKind::config,
          "dataset has " + std::to_string(data.points) + " points per sample, model expects " +
              std::to_string(spec.points));
  if (loss == Loss::mse)
    require(data.targets == spec.output_dim, ErrorKind::config,
            "dataset has " + std::to_string(data.targets) + " targets, model output_dim is " +
                std::to_string(spec.output_dim));
}

Dataset load_data(const std::string& path) {
  if (!fs::exists(path)) fail(ErrorKind::io, "data file not found: '" + path + "'");
  return read_dataset(fs::path(path));
}

// ---------------------------------------------------------------------------

struct VerifyArgs {
  std::string n_range = "2..8";
  std::size_t trials = 100;
  std::string csv;
  double perturb = 0.0;
};

int cmd_verify(const VerifyArgs& a, const Common& common, Run& run, std::ostream& out,
               std::ostream& err) {
  VerifyOptions options;
  std::tie(options.n_min, options.n_max) = parse_range(a.n_range);
  options.trials = a.trials;
  options.seed = common.seed.value_or(1);
  options.perturb_change_of_basis = a.perturb;
  if (common.precision && *common.precision != "f64")
    err << "note: verification always runs in f64 (ignoring --precision " << *common.precision
        << ")\n";
  run.seed = options.seed;
  std::ostringstream key;
  key << "verify n=" << options.n_min << ".." << options.n_max << " trials=" << options.trials
      << " seed=" << options.seed << " perturb=" << format_double(options.perturb_change_of_basis);
  run.hash = fnv1a64(key.str());

  const VerificationReport report = run_verification(options);
  out << format_report_table(report);
  out << "checks: " << report.checks.size() << "  wall: " << std::fixed << std::setprecision(0)
      << report.wall_ms << " ms\n";
  if (!a.csv.empty()) {
    std::ofstream csv = open_csv(a.csv, "check,property,dims,cases,max_residual,threshold,passed");
    write_report_csv(report, csv, false);
  }
  run.extra["checks"] = report.checks.size();
  run.extra["failures"] = report.failures();
  if (!report.passed()) {
    std::string names;
    for (const auto& f : report.failures()) names += (names.empty() ? "" : ", ") + f;
    err << "verification failed: " << names << "\n";
    return kVerificationFailed;
  }
  return kOk;
}

struct GenArgs {
  std::string task = kRegressionTask;
  std::size_t samples = 0;
  std::string out;
  bool force = false;
};

int cmd_gen_data(const GenArgs& a, const Common& common, Run& run, std::ostream& out) {
  const std::uint64_t seed = common.seed.value_or(1);
  run.seed = seed;
  run.hash = fnv1a64("gen-data task=" + a.task + " samples=" + std::to_string(a.samples) +
                     " seed=" + std::to_string(seed));
  if (fs::exists(a.out) && !a.force)
    fail(ErrorKind::io, "refusing to overwrite existing '" + a.out + "' (use --force)");
  const Dataset data = generate_task(a.task, a.samples, seed);
  write_dataset(data, fs::path(a.out));
  out << "wrote " << data.samples.size() << " samples of task " << data.task << " to " << a.out
      << "\n";
  run.extra["samples"] = data.samples.size();
  return kOk;
}

struct TrainArgs {
  std::string config;
  std::string data;
  std::string out;
  std::optional<std::size_t> train_size;
  std::string sweep;
  std::optional<std::size_t> epochs;
  std::optional<double> lr;
  std::optional<std::size_t> restarts;
  bool force = false;
};

template <class T>
void override_value(ExperimentConfig& config, const std::string& key, const std::optional<T>& flag,
                    const std::string& current, std::ostream& err) {
  if (!flag) return;
  std::ostringstream text;
  text << *flag;
  if (text.str() != current)
    err << "note: --" << key << " " << text.str() << " overrides config value " << current << "\n";
  set_config_value(config, key, text.str());
}

struct TrainOutcome {
  std::size_t params = 0;
  double test_loss = 0.0;
  std::size_t best_epoch = 0;
};

TrainOutcome train_one(const ExperimentConfig& config, const Dataset& data,
                       std::optional<std::size_t> limit, const fs::path& dir, bool force,
                       std::ostream& out) {
  const ModelLayout layout(config.model);
  const auto train_set = data.split(Split::train, limit.value_or(SIZE_MAX));
  const auto val_set = data.split(Split::val);
  const auto test_set = data.split(Split::test);
  if (limit && train_set.size() < *limit)
    fail(ErrorKind::config, "--train-size " + std::to_string(*limit) + " exceeds the " +
                                std::to_string(train_set.size()) + " training samples available");

  fs::create_directories(dir);
  const fs::path ckpt = dir / "checkpoint.bin";
  if (fs::exists(ckpt) && !force)
    fail(ErrorKind::io, "refusing to overwrite '" + ckpt.string() + "' (use --force)");

  out << "trainable parameters: " << layout.param_count() << "\n";
  out << "train/val/test samples: " << train_set.size() << "/" << val_set.size() << "/"
      << test_set.size() << "\n";

  std::ofstream metrics = open_csv(dir / "metrics.csv", "epoch,split,loss,wall_clock_ms,restart");
  const std::size_t every = std::max<std::size_t>(1, config.train.epochs / 10);
  const TrainResult result = fit(layout, train_set, val_set, config.train, [&](const EpochMetrics& m) {
    metrics << m.epoch << "," << to_string(m.split) << "," << format_double(m.loss) << ","
            << std::fixed << std::setprecision(3) << m.wall_ms << std::defaultfloat << ","
            << m.restart << "\n";
    if (m.split == Split::val && (m.epoch % every == 0 || m.epoch == config.train.epochs))
      out << "restart " << m.restart << " epoch " << m.epoch << " val " << m.loss << "\n";
  });
  metrics.flush();

  save_checkpoint(ckpt, config, result.params);
  std::ofstream(dir / "config.txt") << to_config_text(config);

  TrainOutcome outcome{layout.param_count(), 0.0, result.best_epoch};
  if (!test_set.empty())
    outcome.test_loss =
        evaluate(layout, result.params, test_set, config.train.loss, config.train.precision,
                 std::nullopt, config.train.exec)
            .loss;
  out << "best restart " << result.best_restart << " epoch " << result.best_epoch << " val "
      << result.best_val_loss << " test " << outcome.test_loss << "\n";
  return outcome;
}

int cmd_train(const TrainArgs& a, const Common& common, Run& run, std::ostream& out,
              std::ostream& err) {
  ExperimentConfig config;
  config.model = regression_model_spec();
  if (!a.config.empty()) {
    if (!fs::exists(a.config)) fail(ErrorKind::io, "config file not found: '" + a.config + "'");
    config = read_config(a.config);
  }
  override_value(config, "seed", common.seed, std::to_string(config.train.seed), err);
  override_value(config, "precision", common.precision, to_string(config.train.precision), err);
  override_value(config, "epochs", a.epochs, std::to_string(config.train.epochs), err);
  override_value(config, "restarts", a.restarts, std::to_string(config.train.restarts), err);
  if (a.lr) override_value(config, "lr", a.lr, format_double(config.train.learning_rate), err);
  config.train.exec = common.deterministic ? Exec::serial : Exec::parallel;

  run.seed = config.train.seed;
  run.precision = to_string(config.train.precision);
  run.hash = config_hash(config);

  const Dataset data = load_data(a.data);
  check_data_fits(data, config.model, config.train.loss);

  if (a.sweep.empty()) {
    const TrainOutcome o = train_one(config, data, a.train_size, a.out, a.force, out);
    run.extra["train_size"] = data.split(Split::train, a.train_size.value_or(SIZE_MAX)).size();
    run.extra["parameters"] = o.params;
    run.extra["best_epoch"] = o.best_epoch;
    run.extra["test_loss"] = o.test_loss;
    run.extra["manifest_path"] = (fs::path(a.out) / "manifest.json").string();
    return kOk;
  }

  if (a.train_size) err << "note: --sweep replaces --train-size\n";
  json rows = json::array();
  for (const std::size_t size : parse_sizes(a.sweep)) {
    const fs::path dir = fs::path(a.out) / ("n" + std::to_string(size));
    out << "== train size " << size << "\n";
    const TrainOutcome o = train_one(config, data, size, dir, a.force, out);
    json sub = {{"train_size", size}, {"parameters", o.params}, {"best_epoch", o.best_epoch},
                {"test_loss", o.test_loss}, {"config_hash", hex64(run.hash)}};
    std::ofstream(dir / "manifest.json") << sub.dump(2) << "\n";
    rows.push_back(sub);
  }
  run.extra["sweep"] = rows;
  run.extra["manifest_path"] = (fs::path(a.out) / "manifest.json").string();
  return kOk;
}

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  std::string split = "test";
  std::optional<std::uint64_t> transform_seed;
  std::string csv;
  std::string sweep;
  std::string sweep_csv;
};

Split parse_split(const std::string& text) {
  if (text == "train") return Split::train;
  if (text == "val") return Split::val;
  if (text == "test") return Split::test;
  fail(ErrorKind::config, "unknown split '" + text + "' (expected train, val, test)");
}

struct EvalOutcome {
  double loss = 0.0;
  double loss_transformed = 0.0;
  double accuracy = 0.0;
  std::size_t count = 0;
  Precision precision = Precision::f64;
};

EvalOutcome eval_checkpoint(const fs::path& path, const Dataset& data, Split split,
                            std::uint64_t transform_seed, const Common& common) {
  if (!fs::exists(path)) fail(ErrorKind::io, "checkpoint not found: '" + path.string() + "'");
  const Checkpoint ck = load_checkpoint(path);
  const ModelLayout layout(ck.config.model);
  check_data_fits(data, ck.config.model, ck.config.train.loss);
  const auto samples = data.split(split);
  EvalOutcome o;
  o.precision = common.precision ? parse_precision(*common.precision) : ck.config.train.precision;
  const Exec exec = common.deterministic ? Exec::serial : Exec::parallel;
  const EvalMetrics plain =
      evaluate(layout, ck.params, samples, ck.config.train.loss, o.precision, std::nullopt, exec);
  const EvalMetrics moved =
      evaluate(layout, ck.params, samples, ck.config.train.loss, o.precision, transform_seed, exec);
  o.loss = plain.loss;
  o.loss_transformed = moved.loss;
  o.accuracy = plain.accuracy;
  o.count = plain.count;
  return o;
}

int cmd_eval(const EvalArgs& a, const Common& common, Run& run, std::ostream& out,
             std::ostream& err) {
  const std::uint64_t tseed = a.transform_seed.value_or(common.seed.value_or(1));
  if (!a.transform_seed)
    err << "note: no --random-transforms seed given, using " << tseed << "\n";
  const Split split = parse_split(a.split);
  const Dataset data = load_data(a.data);
  run.seed = tseed;
  run.hash = fnv1a64("eval checkpoint=" + a.checkpoint + " data=" + a.data + " split=" + a.split +
                     " sweep=" + a.sweep + " transforms=" + std::to_string(tseed));

  if (!a.checkpoint.empty()) {
    const EvalOutcome o = eval_checkpoint(a.checkpoint, data, split, tseed, common);
    run.precision = to_string(o.precision);
    out << "samples: " << o.count << "\n";
    out << std::setprecision(10) << "loss: " << o.loss << "\n";
    out << "loss (random O(n) transforms, seed " << tseed << "): " << o.loss_transformed << "\n";
    out << "difference: " << std::abs(o.loss - o.loss_transformed) << "\n";
    if (!a.csv.empty()) {
      std::ofstream csv = open_csv(
          a.csv, "checkpoint,split,count,precision,loss,loss_transformed,transform_seed");
      csv << a.checkpoint << "," << a.split << "," << o.count << "," << to_string(o.precision)
          << "," << format_double(o.loss) << "," << format_double(o.loss_transformed) << ","
          << tseed << "\n";
    }
    run.extra["loss"] = o.loss;
    run.extra["loss_transformed"] = o.loss_transformed;
  }

  if (!a.sweep.empty()) {
    if (!fs::is_directory(a.sweep)) fail(ErrorKind::io, "sweep directory not found: '" + a.sweep + "'");
    std::vector<std::pair<std::size_t, fs::path>> runs;
    for (const auto& entry : fs::directory_iterator(a.sweep)) {
      const fs::path manifest = entry.path() / "manifest.json";
      if (!entry.is_directory() || !fs::exists(entry.path() / "checkpoint.bin") ||
          !fs::exists(manifest))
        continue;
      std::ifstream in(manifest);
      const json m = json::parse(in, nullptr, false);
      if (m.is_discarded() || !m.contains("train_size"))
        fail(ErrorKind::io, "sweep manifest lacks train_size: '" + manifest.string() + "'");
      runs.emplace_back(m["train_size"].get<std::size_t>(), entry.path());
    }
    if (runs.empty()) fail(ErrorKind::io, "no trained runs under '" + a.sweep + "'");
    std::sort(runs.begin(), runs.end());
    const fs::path csv_path =
        a.sweep_csv.empty() ? fs::path(a.sweep) / "sweep.csv" : fs::path(a.sweep_csv);
    std::ofstream csv = open_csv(csv_path, "train_size,mse,mse_transformed");
    json rows = json::array();
    for (const auto& [size, dir] : runs) {
      const EvalOutcome o = eval_checkpoint(dir / "checkpoint.bin", data, split, tseed, common);
      csv << size << "," << format_double(o.loss) << "," << format_double(o.loss_transformed)
          << "\n";
      out << "train_size " << size << "  mse " << o.loss << "  transformed " << o.loss_transformed
          << "\n";
      rows.push_back({{"train_size", size}, {"mse", o.loss}, {"mse_transformed", o.loss_transformed}});
    }
    out << "wrote " << runs.size() << " rows to " << csv_path.string() << "\n";
    run.extra["sweep"] = rows;
  }
  if (a.checkpoint.empty() && a.sweep.empty())
    fail(ErrorKind::config, "eval needs --checkpoint or --sweep");
  return kOk;
}

void emit_manifest(const Run& run, const Common& common, int code, double wall_ms,
                   const std::string& started, std::ostream& err) {
  json m = {{"command", run.command},
            {"subcommand", run.subcommand},
            {"config_hash", hex64(run.hash)},
            {"seed", run.seed},
            {"precision", run.precision},
            {"git_describe", git_describe()},
            {"started_utc", started},
            {"wall_clock_ms", wall_ms},
            {"threads", thread_count()},
            {"deterministic", common.deterministic},
            {"exit_code", code}};
  std::string path = common.manifest;
  for (const auto& [k, v] : run.extra.items()) {
    if (k == "manifest_path") {
      if (path.empty()) path = v.get<std::string>();
      continue;
    }
    m[k] = v;
  }
  if (path.empty()) {
    err << "manifest: " << m.dump() << "\n";
    return;
  }
  std::ofstream out(path);
  if (!out) {
    err << "warning: cannot write manifest '" << path << "'\n";
    return;
  }
  out << m.dump(2) << "\n";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Equivariant hypersphere networks: verification, data, training, evaluation", "deh"};
  app.require_subcommand(1);
  app.fallthrough();

  Common common;
  app.add_option("--threads", common.threads, "OpenMP threads (default: DEH_NUM_THREADS or all)");
  app.add_flag("--deterministic", common.deterministic, "single thread, serial kernels");
  app.add_option("--seed", common.seed, "random seed");
  app.add_option("--precision", common.precision, "f32 or f64")
      ->check(CLI::IsMember({"f32", "f64"}));
  app.add_option("--manifest", common.manifest, "run manifest JSON path");

  VerifyArgs va;
  auto* verify = app.add_subcommand("verify", "run the numeric property suite");
  verify->add_option("--n-range", va.n_range, "dimensions, e.g. 2..8")->capture_default_str();
  verify->add_option("--trials", va.trials, "random cases per dimension")->capture_default_str();
  verify->add_option("--csv", va.csv, "append the report to this CSV");
  verify->add_option("--perturb-basis", va.perturb, "add this to M(0,0) (fault injection)");

  GenArgs ga;
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
  gen->add_option("--task", ga.task, "task id")->capture_default_str();
  gen->add_option("--samples", ga.samples, "number of samples")->required();
  gen->add_option("--out", ga.out, "output dataset path")->required();
  gen->add_flag("--force", ga.force, "overwrite an existing file");

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "train a model");
  train->add_option("--config", ta.config, "config file (default: regression model)");
  train->add_option("--data", ta.data, "dataset path")->required();
  train->add_option("--out", ta.out, "output directory")->required();
  train->add_option("--train-size", ta.train_size, "use the first N training samples");
  train->add_option("--sweep", ta.sweep, "comma-separated training sizes, one run each");
  train->add_option("--epochs", ta.epochs, "override epochs");
  train->add_option("--lr", ta.lr, "override learning rate");
  train->add_option("--restarts", ta.restarts, "override restarts");
  train->add_flag("--force", ta.force, "overwrite existing checkpoints");

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "evaluate checkpoints");
  eval->add_option("--checkpoint", ea.checkpoint, "checkpoint path");
  eval->add_option("--data", ea.data, "dataset path")->required();
  eval->add_option("--split", ea.split, "train, val or test")->capture_default_str();
  eval->add_option("--random-transforms", ea.transform_seed, "seed of the per-sample O(n) transforms");
  eval->add_option("--csv", ea.csv, "append results to this CSV");
  eval->add_option("--sweep", ea.sweep, "directory of train --sweep runs");
  eval->add_option("--sweep-csv", ea.sweep_csv, "sweep CSV path (default: <sweep>/sweep.csv)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  Run run;
  run.command = "deh";
  for (const auto& a : args) run.command += " " + a;
  run.subcommand = app.get_subcommands().front()->get_name();
  const std::string started = utc_now();
  const auto t0 = std::chrono::steady_clock::now();

  int code = kOk;
  try {
    set_thread_count(resolve_threads(common, err));
    if (*verify) code = cmd_verify(va, common, run, out, err);
    if (*gen) code = cmd_gen_data(ga, common, run, out);
    if (*train) code = cmd_train(ta, common, run, out, err);
    if (*eval) code = cmd_eval(ea, common, run, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    code = exit_code_for(e.kind());
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    code = kIoError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    code = kRuntimeError;
  }
  const double wall =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  emit_manifest(run, common, code, wall, started, err);
  return code;
}

}  // namespace deh::cli
