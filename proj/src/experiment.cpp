#include "experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace l2t {
namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

void say(const Logger& log, const std::string& line) {
  if (log) log(line);
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

class OutputSet {
 public:
  explicit OutputSet(fs::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw IoError("cannot create output directory '" + dir_.string() + "': " + ec.message());
  }

  const fs::path& dir() const { return dir_; }

  void write(const std::string& name, const std::string& bytes) {
    const fs::path path = dir_ / name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to '" + path.string() + "'");
    files_.push_back({name, "fnv1a64:" + hex64(fnv1a64(bytes)), bytes.size()});
    paths_.push_back(path);
  }

  void write_json(const std::string& name, const ojson& j) { write(name, j.dump(2) + "\n"); }

  // Finishes the stage with run_manifest.json, the only file carrying timestamps.
  std::vector<fs::path> finish(const ExperimentConfig& cfg, const std::string& command, const std::string& started) {
    ojson m;
    m["schema_version"] = kReportSchemaVersion;
    m["artifact_version"] = kArtifactVersion;
    m["command"] = command;
    m["config_hash"] = config_hash(cfg);
    m["output_dir"] = cfg.output_dir;
    m["jobs"] = effective_jobs(cfg);
    m["started_utc"] = started;
    m["finished_utc"] = utc_now();
    ojson files = ojson::array();
    for (const auto& f : files_) files.push_back({{"name", f.name}, {"bytes", f.bytes}, {"checksum", f.checksum}});
    m["files"] = files;
    write_json("run_manifest.json", m);
    return paths_;
  }

 private:
  struct Entry {
    std::string name;
    std::string checksum;
    std::size_t bytes;
  };
  fs::path dir_;
  std::vector<Entry> files_;
  std::vector<fs::path> paths_;
};

// Fields of the config that determine the trained zoo.
std::string zoo_hash(const ExperimentConfig& cfg) {
  ojson j = config_to_json(cfg);
  ojson z;
  z["seed"] = j["seed"];
  z["dataset"] = j["dataset"];
  z["zoo"] = j["zoo"];
  return hex64(fnv1a64(z.dump()));
}

fs::path weights_path(const fs::path& zoo_dir, ArchId arch) { return zoo_dir / (arch_name(arch) + ".weights"); }

struct ZooMetrics {
  std::vector<double> accuracy;
  std::vector<std::vector<double>> disagreement;
};

ZooMetrics measure_zoo(const Zoo& zoo, const SyntheticDataset& heldout) {
  ZooMetrics m;
  const std::size_t n = zoo.size();
  m.disagreement.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) m.accuracy.push_back(accuracy(zoo.members[i], heldout));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      m.disagreement[i][j] = m.disagreement[j][i] = disagreement(zoo.members[i], zoo.members[j], heldout);
    }
  }
  return m;
}

void check_gates(const ExperimentConfig& cfg, const Zoo& zoo, const ZooMetrics& m) {
  for (std::size_t i = 0; i < zoo.size(); ++i) {
    if (m.accuracy[i] < cfg.zoo.accuracy_gate) {
      throw GateFailure("model '" + arch_name(zoo.members[i].arch) + "' reached held-out accuracy " +
                        format_real(m.accuracy[i]) + ", below the gate of " + format_real(cfg.zoo.accuracy_gate));
    }
  }
  for (std::size_t i = 0; i < zoo.size(); ++i) {
    for (std::size_t j = i + 1; j < zoo.size(); ++j) {
      if (m.disagreement[i][j] < cfg.zoo.min_disagreement) {
        throw GateFailure("models '" + arch_name(zoo.members[i].arch) + "' and '" +
                          arch_name(zoo.members[j].arch) + "' disagree on only " + format_real(m.disagreement[i][j]) +
                          " of held-out images (minimum " + format_real(cfg.zoo.min_disagreement) + ")");
      }
    }
  }
}

ojson doubles(std::span<const double> v) { return ojson(std::vector<double>(v.begin(), v.end())); }

ojson summarize_reports(const std::vector<TransferReport>& reports) {
  ojson s;
  if (reports.empty()) return s;
  ojson per_model = ojson::array();
  for (std::size_t j = 0; j < reports[0].models.size(); ++j) {
    std::vector<double> v;
    for (const TransferReport& r : reports) v.push_back(r.asr[j]);
    per_model.push_back({{"model", reports[0].models[j]},
                         {"surrogate", static_cast<bool>(reports[0].is_surrogate[j])},
                         {"mean_asr", mean(v)},
                         {"std_asr", sample_stddev(v)}});
  }
  std::vector<double> avg;
  std::vector<double> transfer;
  for (const TransferReport& r : reports) {
    avg.push_back(r.average_asr);
    transfer.push_back(r.average_transfer_asr);
  }
  s["per_model"] = per_model;
  s["mean_average_asr"] = mean(avg);
  s["std_average_asr"] = sample_stddev(avg);
  s["mean_transfer_asr"] = mean(transfer);
  s["std_transfer_asr"] = sample_stddev(transfer);
  return s;
}

void append_report_rows(std::ostringstream& csv, const std::string& prefix, const TransferReport& r) {
  for (std::size_t j = 0; j < r.models.size(); ++j) {
    csv << prefix << r.seed << ',' << r.models[j] << ',' << (r.is_surrogate[j] ? 1 : 0) << ','
        << format_real(r.asr[j]) << '\n';
  }
  csv << prefix << r.seed << ",average,0," << format_real(r.average_asr) << '\n';
  csv << prefix << r.seed << ",average_transfer,0," << format_real(r.average_transfer_asr) << '\n';
}

std::vector<std::string> split_commas(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

ojson read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read '" + path.string() + "'");
  try {
    return ojson::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

struct Context {
  ExperimentData data;
  Zoo zoo;
  OpCatalog catalog;
};

Context load_context(const ExperimentConfig& cfg, const Logger& log) {
  ExperimentData data = make_data(cfg);
  Zoo zoo = load_zoo(cfg, cfg.output_dir);
  say(log, "loaded zoo of " + std::to_string(zoo.size()) + " models");
  OpCatalog catalog = make_catalog(cfg, data);
  return Context{std::move(data), std::move(zoo), std::move(catalog)};
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t global, std::string_view name, std::uint64_t index) {
  return Rng::substream(global, name, index).next_u64();
}

ExperimentData make_data(const ExperimentConfig& cfg) {
  ExperimentData d;
  d.train = generate_dataset(derive_seed(cfg.seed, "dataset-train"), cfg.dataset.train_per_class,
                             cfg.dataset.num_classes, cfg.dataset.shape);
  d.heldout = generate_dataset(derive_seed(cfg.seed, "dataset-heldout"), cfg.dataset.heldout_per_class,
                               cfg.dataset.num_classes, cfg.dataset.shape);
  d.aux_pool.assign(d.train.images.begin(), d.train.images.begin() + cfg.catalog.aux_pool_size);
  return d;
}

Zoo train_zoo(const ExperimentConfig& cfg, const ExperimentData& data, int jobs,
              const std::function<void(const std::string&)>& log) {
  Zoo zoo;
  zoo.members.resize(cfg.zoo.archs.size());
  parallel_for(cfg.zoo.archs.size(), jobs, [&](std::size_t i) {
    const ArchId arch = cfg.zoo.archs[i];
    zoo.members[i] = train_model(arch, data.train, cfg.zoo.training, derive_seed(cfg.seed, "training", i));
  });
  for (std::size_t i = 0; i < zoo.size(); ++i) {
    if (zoo.members[i].arch == cfg.zoo.surrogate) zoo.surrogate = i;
  }
  const ZooMetrics m = measure_zoo(zoo, data.heldout);
  for (std::size_t i = 0; i < zoo.size(); ++i) {
    say(log, "trained " + arch_name(zoo.members[i].arch) + ": held-out accuracy " + format_real(m.accuracy[i]));
  }
  check_gates(cfg, zoo, m);
  return zoo;
}

Zoo load_zoo(const ExperimentConfig& cfg, const fs::path& dir) {
  const fs::path zoo_dir = dir / "zoo";
  const fs::path manifest_path = zoo_dir / "zoo.json";
  if (!fs::exists(manifest_path)) {
    throw IoError("no trained zoo in '" + zoo_dir.string() + "'; run `l2t train-zoo` with this config first");
  }
  const ojson manifest = read_json_file(manifest_path);
  if (manifest.value("zoo_hash", std::string()) != zoo_hash(cfg)) {
    throw IoError("zoo in '" + zoo_dir.string() +
                  "' was trained with different dataset/zoo settings; rerun `l2t train-zoo`");
  }
  Zoo zoo;
  for (std::size_t i = 0; i < cfg.zoo.archs.size(); ++i) {
    const fs::path path = weights_path(zoo_dir, cfg.zoo.archs[i]);
    if (!fs::exists(path)) throw IoError("missing weight file '" + path.string() + "'; rerun `l2t train-zoo`");
    ModelWeights m = load_weights(path);
    if (m.arch != cfg.zoo.archs[i] || !(m.input_shape == cfg.dataset.shape) ||
        m.num_classes != cfg.dataset.num_classes) {
      throw IoError("weight file '" + path.string() + "' does not match the config; rerun `l2t train-zoo`");
    }
    if (m.arch == cfg.zoo.surrogate) zoo.surrogate = i;
    zoo.members.push_back(std::move(m));
  }
  return zoo;
}

EvalSet make_eval_set(const ExperimentConfig&, const Zoo& zoo, const SyntheticDataset& heldout, std::size_t count) {
  EvalSet eval;
  eval.source_indices = select_evaluation_images(zoo, heldout, count);
  if (eval.source_indices.size() < count) {
    throw GateFailure("only " + std::to_string(eval.source_indices.size()) + " held-out images are classified " +
                      "correctly by every zoo model; " + std::to_string(count) + " are required");
  }
  for (std::size_t i : eval.source_indices) {
    eval.images.push_back(heldout.images[i]);
    eval.labels.push_back(heldout.labels[i]);
  }
  return eval;
}

OpCatalog make_catalog(const ExperimentConfig& cfg, const ExperimentData& data) {
  try {
    return OpCatalog::build(cfg.catalog.categories, cfg.dataset.shape, data.aux_pool);
  } catch (const ConfigError& e) {
    throw ConfigError("catalog: " + std::string(e.what()));
  }
}

std::vector<std::size_t> resolve_pool(const OpCatalog& catalog, std::span<const std::string> pool) {
  std::vector<std::size_t> out;
  for (const std::string& entry : pool) {
    const auto colon = entry.find(':');
    if (colon == std::string::npos) {
      throw ConfigError("oracle.pool entry '" + entry + "' must look like category:param_index");
    }
    const Category cat = parse_category(entry.substr(0, colon));
    int index = -1;
    try {
      std::size_t used = 0;
      index = std::stoi(entry.substr(colon + 1), &used);
      if (used != entry.size() - colon - 1) index = -1;
    } catch (const std::exception&) {
      index = -1;
    }
    if (index < 0 || index >= kOpsPerCategory) {
      throw ConfigError("oracle.pool entry '" + entry + "' has a parameter index outside 0.." +
                        std::to_string(kOpsPerCategory - 1));
    }
    try {
      out.push_back(catalog.find(cat, index));
    } catch (const InvalidArgument&) {
      throw ConfigError("oracle.pool entry '" + entry + "' names a category that is not enabled");
    }
  }
  return out;
}

std::vector<std::uint64_t> attack_seeds(const ExperimentConfig& cfg) {
  std::vector<std::uint64_t> seeds;
  for (int s = 0; s < cfg.evaluation.num_seeds; ++s) seeds.push_back(derive_seed(cfg.seed, "attack", s));
  return seeds;
}

ojson report_to_json(const TransferReport& r) {
  ojson j;
  j["method"] = r.method;
  j["seed"] = r.seed;
  ojson models = ojson::array();
  for (std::size_t k = 0; k < r.models.size(); ++k) {
    models.push_back({{"model", r.models[k]}, {"surrogate", static_cast<bool>(r.is_surrogate[k])}, {"asr", r.asr[k]}});
  }
  j["models"] = models;
  j["average_asr"] = r.average_asr;
  j["average_transfer_asr"] = r.average_transfer_asr;
  j["fooled_counts"] = r.fooled_counts;
  j["fooled_histogram"] = r.fooled_histogram;
  return j;
}

ojson trace_to_json(const AttackResult& result) {
  ojson j;
  if (!result.initial_policy.empty()) j["initial_policy"] = doubles(result.initial_policy);
  ojson iters = ojson::array();
  for (const IterationRecord& rec : result.trace) {
    ojson it;
    it["iteration"] = rec.iteration;
    it["loss"] = rec.loss;
    it["grad_l1"] = rec.grad_l1;
    if (!rec.sampled.empty()) {
      ojson sampled = ojson::array();
      for (const Transformation& t : rec.sampled) sampled.push_back(t.ops);
      it["sampled_ops"] = sampled;
    }
    if (!rec.probabilities.empty()) it["transformation_probabilities"] = doubles(rec.probabilities);
    if (!rec.post_losses.empty()) it["post_update_losses"] = doubles(rec.post_losses);
    if (!rec.policy.empty()) it["policy"] = doubles(rec.policy);
    iters.push_back(std::move(it));
  }
  j["iterations"] = iters;
  return j;
}

std::vector<fs::path> cmd_train_zoo(const ExperimentConfig& cfg, const Logger& log) {
  validate_config(cfg);
  const std::string started = utc_now();
  const ExperimentData data = make_data(cfg);
  say(log, "training " + std::to_string(cfg.zoo.archs.size()) + " models on " + std::to_string(data.train.size()) +
               " images");
  const Zoo zoo = train_zoo(cfg, data, effective_jobs(cfg), log);
  const ZooMetrics m = measure_zoo(zoo, data.heldout);

  OutputSet out(fs::path(cfg.output_dir) / "zoo");
  ojson members = ojson::array();
  for (std::size_t i = 0; i < zoo.size(); ++i) {
    const ModelWeights& w = zoo.members[i];
    const std::string name = arch_name(w.arch) + ".weights";
    out.write(name, serialize_weights(w));
    ojson dis;
    for (std::size_t k = 0; k < zoo.size(); ++k) {
      if (k != i) dis[arch_name(zoo.members[k].arch)] = m.disagreement[i][k];
    }
    members.push_back({{"arch", arch_name(w.arch)},
                       {"file", name},
                       {"surrogate", i == zoo.surrogate},
                       {"training_seed", w.training_seed},
                       {"parameters", parameter_count(w)},
                       {"heldout_accuracy", m.accuracy[i]},
                       {"disagreement", dis}});
  }
  ojson zj;
  zj["schema_version"] = kReportSchemaVersion;
  zj["config_hash"] = config_hash(cfg);
  zj["zoo_hash"] = zoo_hash(cfg);
  zj["train_images"] = data.train.size();
  zj["heldout_images"] = data.heldout.size();
  zj["members"] = members;
  out.write_json("zoo.json", zj);
  // Where and how wide the run went lives in the manifest, not in the result files.
  ojson recorded = config_to_json(cfg);
  recorded.erase("output_dir");
  recorded.erase("jobs");
  out.write_json("config.json", recorded);
  return out.finish(cfg, "train-zoo", started);
}

std::vector<fs::path> cmd_attack(const ExperimentConfig& cfg, Method method, const Logger& log) {
  validate_config(cfg);
  const std::string started = utc_now();
  const Context ctx = load_context(cfg, log);
  const EvalSet eval = make_eval_set(cfg, ctx.zoo, ctx.data.heldout, cfg.evaluation.num_images);
  const int jobs = effective_jobs(cfg);

  std::vector<TransferReport> reports;
  std::vector<AttackResult> first_results;
  const std::vector<std::uint64_t> seeds = attack_seeds(cfg);
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    reports.push_back(evaluate_method(method, ctx.zoo, eval, cfg.attack, ctx.catalog, seeds[s], jobs,
                                      s == 0 ? &first_results : nullptr));
    say(log, method_name(method) + " seed " + std::to_string(s) + ": average transfer ASR " +
                 format_real(reports.back().average_transfer_asr));
  }

  OutputSet out(fs::path(cfg.output_dir) / "attack" / method_name(method));
  const std::string hash = config_hash(cfg);
  ojson rj;
  rj["schema_version"] = kReportSchemaVersion;
  rj["config_hash"] = hash;
  rj["method"] = method_name(method);
  rj["surrogate"] = arch_name(ctx.zoo.surrogate_model().arch);
  rj["num_images"] = eval.size();
  rj["heldout_indices"] = eval.source_indices;
  ojson per_seed = ojson::array();
  for (const TransferReport& r : reports) per_seed.push_back(report_to_json(r));
  rj["per_seed"] = per_seed;
  rj["summary"] = summarize_reports(reports);
  out.write_json("report.json", rj);

  std::ostringstream csv;
  csv << "config_hash,method,seed,model,surrogate,asr\n";
  for (const TransferReport& r : reports) append_report_rows(csv, hash + "," + r.method + ",", r);
  out.write("report.csv", csv.str());

  ojson traces;
  traces["schema_version"] = kReportSchemaVersion;
  traces["config_hash"] = hash;
  traces["seed"] = seeds[0];
  ojson images = ojson::array();
  for (std::size_t i = 0; i < first_results.size(); ++i) {
    ojson t = trace_to_json(first_results[i]);
    t["image"] = i;
    t["label"] = eval.labels[i];
    t["image_seed"] = image_seed(seeds[0], i);
    images.push_back(std::move(t));
  }
  traces["images"] = images;
  out.write_json("traces.json", traces);

  // Adversarial images of the first seed as little-endian float64, image-major.
  std::string payload;
  for (const AttackResult& r : first_results) {
    payload.append(reinterpret_cast<const char*>(r.adversarial.values().data()),
                   r.adversarial.size() * sizeof(double));
  }
  out.write("adversarial.f64", payload);
  ojson header;
  header["schema_version"] = kReportSchemaVersion;
  header["config_hash"] = hash;
  header["dtype"] = "float64-le";
  header["count"] = first_results.size();
  header["shape"] = {cfg.dataset.shape.channels, cfg.dataset.shape.height, cfg.dataset.shape.width};
  header["labels"] = eval.labels;
  header["seed"] = seeds[0];
  header["payload"] = "adversarial.f64";
  out.write_json("adversarial.json", header);
  return out.finish(cfg, "attack " + method_name(method), started);
}

std::vector<fs::path> cmd_ablate(const ExperimentConfig& cfg, AblationAxis axis, std::vector<std::string> grid,
                                 const Logger& log) {
  validate_config(cfg);
  if (grid.size() == 1 && grid[0].find(',') != std::string::npos) grid = split_commas(grid[0]);
  if (grid.empty()) {
    switch (axis) {
      case AblationAxis::kNumOps: grid = cfg.ablation.k_grid; break;
      case AblationAxis::kNumTransforms: grid = cfg.ablation.l_grid; break;
      case AblationAxis::kIterations: grid = cfg.ablation.t_grid; break;
      case AblationAxis::kCategoryRemoval: grid = cfg.ablation.category_grid; break;
    }
  }
  const std::string started = utc_now();
  const Context ctx = load_context(cfg, log);
  const EvalSet eval = make_eval_set(cfg, ctx.zoo, ctx.data.heldout, cfg.evaluation.num_images);

  AblationInputs in;
  in.zoo = &ctx.zoo;
  in.eval = &eval;
  in.categories = cfg.catalog.categories;
  in.aux_pool = ctx.data.aux_pool;
  in.base = cfg.attack;
  in.seeds = attack_seeds(cfg);
  in.jobs = effective_jobs(cfg);
  say(log, "ablating " + axis_name(axis) + " over " + std::to_string(grid.size()) + " grid points");
  const AblationTable table = run_ablation(axis, grid, in);

  OutputSet out(fs::path(cfg.output_dir) / "ablate" / axis_name(axis));
  const std::string hash = config_hash(cfg);
  ojson j;
  j["schema_version"] = kReportSchemaVersion;
  j["config_hash"] = hash;
  j["axis"] = axis_name(axis);
  j["method"] = "l2t";
  j["num_images"] = eval.size();
  ojson points = ojson::array();
  std::ostringstream csv;
  csv << "config_hash,axis,value,seed,average_asr,average_transfer_asr\n";
  for (const AblationPoint& p : table.points) {
    ojson reports = ojson::array();
    for (const TransferReport& r : p.reports) {
      reports.push_back(report_to_json(r));
      csv << hash << ',' << axis_name(axis) << ',' << p.value << ',' << r.seed << ',' << format_real(r.average_asr)
          << ',' << format_real(r.average_transfer_asr) << '\n';
    }
    points.push_back({{"value", p.value},
                      {"mean_transfer_asr", p.mean_transfer_asr},
                      {"std_transfer_asr", p.std_transfer_asr},
                      {"summary", summarize_reports(p.reports)},
                      {"per_seed", reports}});
    say(log, axis_name(axis) + "=" + p.value + ": transfer ASR " + format_real(p.mean_transfer_asr) + " +- " +
                 format_real(p.std_transfer_asr));
  }
  for (const AblationPoint& p : table.points) {
    csv << hash << ',' << axis_name(axis) << ',' << p.value << ",mean,," << format_real(p.mean_transfer_asr) << '\n';
    csv << hash << ',' << axis_name(axis) << ',' << p.value << ",std,," << format_real(p.std_transfer_asr) << '\n';
  }
  j["points"] = points;
  out.write_json("ablation.json", j);
  out.write("ablation.csv", csv.str());
  return out.finish(cfg, "ablate " + axis_name(axis), started);
}

std::vector<fs::path> cmd_oracle(const ExperimentConfig& cfg, const Logger& log) {
  validate_config(cfg);
  const std::string started = utc_now();
  const Context ctx = load_context(cfg, log);
  const std::vector<std::size_t> pool = resolve_pool(ctx.catalog, cfg.oracle.pool);
  const EvalSet eval = make_eval_set(cfg, ctx.zoo, ctx.data.heldout, cfg.oracle.num_images);
  std::vector<const ModelWeights*> targets;
  for (std::size_t i = 0; i < ctx.zoo.size(); ++i) {
    if (i != ctx.zoo.surrogate) targets.push_back(&ctx.zoo.members[i]);
  }
  // Validate the enumeration size before the worker pool starts.
  {
    double rows = 1.0;
    for (int t = 0; t < cfg.oracle.iterations; ++t) rows *= static_cast<double>(pool.size());
    if (rows > static_cast<double>(kMaxOracleTrajectories)) {
      throw ConfigError("oracle.pool^oracle.iterations exceeds " + std::to_string(kMaxOracleTrajectories) +
                        " trajectories");
    }
  }

  std::vector<TrajectoryOracleResult> results(eval.size());
  std::vector<double> reverified(eval.size());
  parallel_for(eval.size(), effective_jobs(cfg), [&](std::size_t i) {
    AttackConfig base = cfg.attack;
    base.seed = derive_seed(cfg.seed, "oracle", i);
    results[i] = brute_force_trajectory(ctx.zoo.surrogate_model(), targets, eval.images[i], eval.labels[i], pool,
                                        cfg.oracle.iterations, ctx.catalog, base);
    reverified[i] = trajectory_objective(ctx.zoo.surrogate_model(), targets, eval.images[i], eval.labels[i],
                                         results[i].best_trajectory(), ctx.catalog, base);
  });

  OutputSet out(fs::path(cfg.output_dir) / "oracle");
  const std::string hash = config_hash(cfg);
  ojson j;
  j["schema_version"] = kReportSchemaVersion;
  j["config_hash"] = hash;
  j["iterations"] = cfg.oracle.iterations;
  ojson pool_j = ojson::array();
  for (std::size_t k = 0; k < pool.size(); ++k) {
    pool_j.push_back({{"name", cfg.oracle.pool[k]}, {"op_index", pool[k]}, {"label", ctx.catalog.op(pool[k]).label()}});
  }
  j["pool"] = pool_j;
  std::ostringstream csv;
  csv << "config_hash,image,trajectory,objective,fooled\n";
  ojson images = ojson::array();
  std::size_t nonconstant = 0;
  std::size_t beats_median = 0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const TrajectoryOracleResult& r = results[i];
    std::vector<double> sorted = r.objective;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    const double median = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    const auto& best = r.best_trajectory();
    const bool constant = std::all_of(best.begin(), best.end(), [&](std::size_t op) { return op == best[0]; });
    if (!constant) ++nonconstant;
    if (r.best_value() > median) ++beats_median;
    ojson table = ojson::array();
    for (std::size_t row = 0; row < r.trajectories.size(); ++row) {
      table.push_back({{"trajectory", r.trajectories[row]}, {"objective", r.objective[row]}, {"fooled", r.fooled[row]}});
      std::string traj;
      for (std::size_t op : r.trajectories[row]) traj += (traj.empty() ? "" : "-") + std::to_string(op);
      csv << hash << ',' << i << ',' << traj << ',' << r.objective[row] << ',' << r.fooled[row] << '\n';
    }
    images.push_back({{"image", i},
                      {"label", eval.labels[i]},
                      {"rows", r.trajectories.size()},
                      {"best_row", r.best},
                      {"best_trajectory", best},
                      {"best_objective", r.best_value()},
                      {"reverified_objective", reverified[i]},
                      {"median_objective", median},
                      {"best_is_constant", constant},
                      {"table", table}});
  }
  j["summary"] = {{"images", results.size()},
                  {"fraction_nonconstant_best", results.empty() ? 0.0 : double(nonconstant) / double(results.size())},
                  {"fraction_best_above_median",
                   results.empty() ? 0.0 : double(beats_median) / double(results.size())}};
  j["images"] = images;
  out.write_json("oracle.json", j);
  out.write("oracle.csv", csv.str());
  say(log, "oracle: best trajectory varies across iterations on " + std::to_string(nonconstant) + " of " +
               std::to_string(results.size()) + " images");
  return out.finish(cfg, "oracle", started);
}

std::vector<fs::path> cmd_report(const ExperimentConfig& cfg, const Logger& log) {
  validate_config(cfg);
  const std::string started = utc_now();
  const fs::path root(cfg.output_dir);
  const std::string hash = config_hash(cfg);
  ojson entries = ojson::array();
  std::ostringstream csv;
  csv << "kind,name,value,mean_transfer_asr,std_transfer_asr,config_hash\n";

  auto sorted_dirs = [](const fs::path& dir) {
    std::vector<fs::path> dirs;
    if (fs::is_directory(dir)) {
      for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_directory()) dirs.push_back(e.path());
      }
    }
    std::sort(dirs.begin(), dirs.end());
    return dirs;
  };

  for (const fs::path& d : sorted_dirs(root / "attack")) {
    if (!fs::exists(d / "report.json")) continue;
    const ojson r = read_json_file(d / "report.json");
    const std::string h = r.value("config_hash", std::string());
    if (h != hash) say(log, "note: " + (d / "report.json").string() + " comes from config " + h);
    const ojson& s = r.at("summary");
    entries.push_back({{"kind", "attack"},
                       {"name", r.at("method")},
                       {"mean_transfer_asr", s.at("mean_transfer_asr")},
                       {"std_transfer_asr", s.at("std_transfer_asr")},
                       {"config_hash", h}});
    csv << "attack," << r.at("method").get<std::string>() << ",," << format_real(s.at("mean_transfer_asr").get<double>())
        << ',' << format_real(s.at("std_transfer_asr").get<double>()) << ',' << h << '\n';
  }
  for (const fs::path& d : sorted_dirs(root / "ablate")) {
    if (!fs::exists(d / "ablation.json")) continue;
    const ojson a = read_json_file(d / "ablation.json");
    const std::string h = a.value("config_hash", std::string());
    if (h != hash) say(log, "note: " + (d / "ablation.json").string() + " comes from config " + h);
    for (const ojson& p : a.at("points")) {
      entries.push_back({{"kind", "ablation"},
                         {"name", a.at("axis")},
                         {"value", p.at("value")},
                         {"mean_transfer_asr", p.at("mean_transfer_asr")},
                         {"std_transfer_asr", p.at("std_transfer_asr")},
                         {"config_hash", h}});
      csv << "ablation," << a.at("axis").get<std::string>() << ',' << p.at("value").get<std::string>() << ','
          << format_real(p.at("mean_transfer_asr").get<double>()) << ','
          << format_real(p.at("std_transfer_asr").get<double>()) << ',' << h << '\n';
    }
  }
  if (fs::exists(root / "oracle" / "oracle.json")) {
    const ojson o = read_json_file(root / "oracle" / "oracle.json");
    entries.push_back({{"kind", "oracle"}, {"summary", o.at("summary")}, {"config_hash", o.value("config_hash", "")}});
  }
  if (entries.empty()) {
    throw IoError("no reports found under '" + root.string() + "'; run `l2t attack` or `l2t ablate` first");
  }
  OutputSet out(root / "report");
  ojson j;
  j["schema_version"] = kReportSchemaVersion;
  j["config_hash"] = hash;
  j["entries"] = entries;
  out.write_json("summary.json", j);
  out.write("summary.csv", csv.str());
  say(log, "summarized " + std::to_string(entries.size()) + " entries");
  return out.finish(cfg, "report", started);
}

}  // namespace l2t
