#pragma once

// Experiment orchestration: runs train -> split -> unlearn -> evaluate
// over method x rate x scenario x seed grids, with a resumable JSON
// ledger, incremental CSV output, and table / augmentation-comparison
// emission.
//
// The base model theta_i is trained once per (dataset, scenario, seed)
// and shared by all methods and rates; retrain runs per rate since D_r
// differs. The augmentation scenario is a single switch applied to
// training, retraining, and unlearning fine-tuning alike.

#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "mulab/augment.hpp"
#include "mulab/checkpoint.hpp"
#include "mulab/dataset.hpp"
#include "mulab/errors.hpp"
#include "mulab/idx.hpp"
#include "mulab/manifest.hpp"
#include "mulab/metrics.hpp"
#include "mulab/model.hpp"
#include "mulab/train.hpp"
#include "mulab/unlearn.hpp"

namespace mulab {

// ---------------------------------------------------------------------------
// Configuration.

struct DatasetSpec {
  std::string source = "synthetic";  // synthetic | manifest | idx
  std::string name = "synthetic";
  // synthetic
  int classes = 3;
  int per_class = 500;
  int image_size = 16;
  double noise = 0.1;
  std::uint64_t gen_seed = 42;
  // manifest
  std::string dir;
  // idx: split -> (images file, labels file)
  std::map<std::string, std::pair<std::string, std::string>> idx_files;
  int idx_num_classes = 0;
};

struct ExperimentConfig {
  DatasetSpec dataset;
  ArchDescriptor arch;
  TrainConfig train;
  UnlearnConfig unlearn;  // per-method template; method field ignored
  std::vector<std::string> methods = {"salun"};
  std::vector<double> rates = {0.1, 0.5};
  std::vector<AugScenario> scenarios = {AugScenario::NoAug, AugScenario::Default,
                                        AugScenario::DefaultRA};
  std::vector<std::uint64_t> seeds = {1};
  std::string out_dir = "mulab_out";
  bool force = false;
  int ra_m = 5;

  void validate() const {
    train.validate();
    unlearn.validate();
    if (rates.empty() || scenarios.empty() || seeds.empty())
      throw ConfigError("rates, scenarios, and seeds must be nonempty");
    for (double r : rates)
      if (r < 0.0 || r > 1.0) throw ConfigError("forget rate outside [0,1]");
    for (const auto& m : methods) unlearn_method_from_name(m);  // validates
  }
};

inline ExperimentConfig parse_experiment_config(const json& j) {
  ExperimentConfig c;
  if (j.contains("dataset")) {
    const json& d = j["dataset"];
    c.dataset.source = d.value("source", c.dataset.source);
    c.dataset.name = d.value("name", c.dataset.source == "manifest"
                                         ? std::filesystem::path(d.value("dir", "ds"))
                                               .filename()
                                               .string()
                                         : c.dataset.name);
    c.dataset.classes = d.value("classes", c.dataset.classes);
    c.dataset.per_class = d.value("per_class", c.dataset.per_class);
    c.dataset.image_size = d.value("image_size", c.dataset.image_size);
    c.dataset.noise = d.value("noise", c.dataset.noise);
    c.dataset.gen_seed = d.value("gen_seed", c.dataset.gen_seed);
    c.dataset.dir = d.value("dir", c.dataset.dir);
    c.dataset.idx_num_classes = d.value("num_classes", c.dataset.idx_num_classes);
    if (d.contains("splits"))
      for (auto& [split, files] : d["splits"].items())
        c.dataset.idx_files[split] = {files.at("images").get<std::string>(),
                                      files.at("labels").get<std::string>()};
  }
  if (j.contains("arch")) {
    const json& a = j["arch"];
    c.arch.kind = arch_from_name(a.value("kind", "resnet_s"));
    c.arch.base_width = a.value("base_width", c.arch.base_width);
    if (a.contains("hidden")) c.arch.hidden = a["hidden"].get<std::vector<int>>();
  }
  if (j.contains("train")) {
    const json& t = j["train"];
    c.train.epochs = t.value("epochs", c.train.epochs);
    c.train.learning_rate = t.value("learning_rate", c.train.learning_rate);
    c.train.batch_size = t.value("batch_size", c.train.batch_size);
    c.train.momentum = t.value("momentum", c.train.momentum);
    c.train.weight_decay = t.value("weight_decay", c.train.weight_decay);
    std::string sched = t.value("schedule", "cosine");
    if (sched == "cosine")
      c.train.schedule = LrSchedule::Cosine;
    else if (sched == "constant")
      c.train.schedule = LrSchedule::Constant;
    else
      throw ConfigError("unknown lr schedule '" + sched + "'");
  }
  if (j.contains("unlearn")) {
    const json& u = j["unlearn"];
    c.unlearn.epochs = u.value("epochs", c.unlearn.epochs);
    c.unlearn.learning_rate = u.value("learning_rate", c.train.learning_rate * 0.1);
    c.unlearn.mask_fraction = u.value("mask_fraction", c.unlearn.mask_fraction);
    c.unlearn.batch_size = u.value("batch_size", c.unlearn.batch_size);
    c.unlearn.update_bn = u.value("update_bn", c.unlearn.update_bn);
  } else {
    c.unlearn.learning_rate = c.train.learning_rate * 0.1;
  }
  if (j.contains("methods")) c.methods = j["methods"].get<std::vector<std::string>>();
  if (j.contains("rates")) c.rates = j["rates"].get<std::vector<double>>();
  if (j.contains("scenarios")) {
    c.scenarios.clear();
    for (const auto& s : j["scenarios"])
      c.scenarios.push_back(scenario_from_name(s.get<std::string>()));
  }
  if (j.contains("seeds")) c.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
  c.out_dir = j.value("out", c.out_dir);
  c.ra_m = j.value("ra_m", c.ra_m);
  c.validate();
  return c;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config: " + path);
  json j;
  try {
    j = json::parse(f);
  } catch (const json::parse_error& e) {
    throw ConfigError("bad config JSON in " + path + ": " + e.what());
  }
  return parse_experiment_config(j);
}

inline AugmentationConfig scenario_config(AugScenario s, int ra_m) {
  AugmentationConfig a;
  a.kind = s;
  a.ra_m = ra_m;
  return a;
}

// ---------------------------------------------------------------------------
// Ledger.

struct CellRecord {
  std::string status = "pending";  // pending | complete | failed
  MetricsReport report;
  std::string error;
  std::string checkpoint;
  std::string timestamp;
};

struct RunLedger {
  std::map<std::string, CellRecord> cells;
  std::map<std::string, std::string> base_models;  // base id -> checkpoint dir

  bool all_complete() const {
    for (const auto& [id, c] : cells)
      if (c.status != "complete") return false;
    return !cells.empty();
  }
};

namespace detail {

inline std::string fmt(double v, const char* spec = "%.4f") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

inline std::string now_iso() {
  std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

}  // namespace detail

inline std::string cell_id(const std::string& dataset_scen, double rate,
                           std::uint64_t seed, const std::string& method) {
  return dataset_scen + "|" + detail::fmt(rate, "%.2f") + "|" + std::to_string(seed) +
         "|" + method;
}

inline json report_to_json(const MetricsReport& r) {
  return json{{"method", r.method},     {"dataset", r.dataset},
              {"rate", r.rate},         {"seed", r.seed},
              {"ua", r.ua},             {"ra", r.ra},
              {"ta", r.ta},             {"mia", r.mia},
              {"ag", r.ag},             {"rte_seconds", r.rte_seconds},
              {"forget_accuracy", r.forget_accuracy},
              {"mia_degenerate", r.mia_degenerate}};
}

inline MetricsReport report_from_json(const json& j) {
  MetricsReport r;
  r.method = j.value("method", "");
  r.dataset = j.value("dataset", "");
  r.rate = j.value("rate", 0.0);
  r.seed = j.value("seed", std::uint64_t(0));
  r.ua = j.value("ua", 0.0);
  r.ra = j.value("ra", 0.0);
  r.ta = j.value("ta", 0.0);
  r.mia = j.value("mia", 0.0);
  r.ag = j.value("ag", 0.0);
  r.rte_seconds = j.value("rte_seconds", 0.0);
  r.forget_accuracy = j.value("forget_accuracy", 0.0);
  r.mia_degenerate = j.value("mia_degenerate", false);
  return r;
}

inline json ledger_to_json(const RunLedger& l) {
  json j;
  j["cells"] = json::object();
  for (const auto& [id, c] : l.cells) {
    json cj{{"status", c.status}, {"timestamp", c.timestamp}};
    if (!c.error.empty()) cj["error"] = c.error;
    if (!c.checkpoint.empty()) cj["checkpoint"] = c.checkpoint;
    if (c.status == "complete") cj["report"] = report_to_json(c.report);
    j["cells"][id] = cj;
  }
  j["base_models"] = l.base_models;
  return j;
}

inline RunLedger ledger_from_json(const json& j) {
  RunLedger l;
  if (j.contains("cells"))
    for (auto& [id, cj] : j["cells"].items()) {
      CellRecord c;
      c.status = cj.value("status", "pending");
      c.error = cj.value("error", "");
      c.checkpoint = cj.value("checkpoint", "");
      c.timestamp = cj.value("timestamp", "");
      if (cj.contains("report")) c.report = report_from_json(cj["report"]);
      l.cells[id] = c;
    }
  if (j.contains("base_models"))
    l.base_models = j["base_models"].get<std::map<std::string, std::string>>();
  return l;
}

// Atomic replacement: write to a temp file, then rename.
inline void save_ledger(const std::string& path, const RunLedger& l) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::trunc);
    f << ledger_to_json(l).dump(2) << "\n";
    if (!f) throw FormatError("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

inline RunLedger load_ledger(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw FormatError("missing ledger: " + path);
  return ledger_from_json(json::parse(f));
}

// CSV, fixed column order; rows sorted by cell id for determinism.
inline void write_results_csv(const std::string& path, const RunLedger& l) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::trunc);
    f << "method,dataset,rate,seed,UA,RA,TA,MIA,AG,RTE_seconds\n";
    for (const auto& [id, c] : l.cells) {
      if (c.status != "complete") continue;
      const MetricsReport& r = c.report;
      f << r.method << "," << r.dataset << "," << detail::fmt(r.rate, "%.2f") << ","
        << r.seed << "," << detail::fmt(r.ua) << "," << detail::fmt(r.ra) << ","
        << detail::fmt(r.ta) << "," << detail::fmt(r.mia) << "," << detail::fmt(r.ag)
        << "," << detail::fmt(r.rte_seconds, "%.3f") << "\n";
    }
    if (!f) throw FormatError("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

// ---------------------------------------------------------------------------
// Dataset loading per spec.

inline DatasetTriple load_dataset(const DatasetSpec& spec) {
  if (spec.source == "synthetic")
    return generate_synthetic(spec.classes, spec.per_class, spec.image_size, spec.noise,
                              spec.gen_seed);
  if (spec.source == "manifest") return load_manifest_triple(spec.dir);
  if (spec.source == "idx") {
    if (spec.idx_num_classes < 2)
      throw ConfigError("idx dataset requires num_classes >= 2");
    DatasetTriple t;
    auto load_split = [&](const std::string& name) -> Dataset {
      auto it = spec.idx_files.find(name);
      if (it == spec.idx_files.end())
        throw ConfigError("idx dataset missing split '" + name + "'");
      Dataset d;
      d.images = idx_to_images(read_idx(it->second.first));
      d.labels = idx_to_labels(read_idx(it->second.second));
      d.num_classes = spec.idx_num_classes;
      d.split = name;
      d.provenance = spec.name;
      d.validate();
      return d;
    };
    t.train = load_split("train");
    t.test = load_split("test");
    t.val = spec.idx_files.count("val") ? load_split("val") : t.test;
    return t;
  }
  throw ConfigError("unknown dataset source '" + spec.source + "'");
}

// ---------------------------------------------------------------------------
// Grid runner.

inline MetricsReport evaluate_cell(Model<float>& model, const Dataset& forget,
                                   const Dataset& retain, const Dataset& test,
                                   const std::string& method,
                                   const std::string& dataset_scen, double rate,
                                   std::uint64_t seed, double rte) {
  MetricsReport r;
  r.method = method;
  r.dataset = dataset_scen;
  r.rate = rate;
  r.seed = seed;
  r.forget_accuracy = evaluate(model, forget);
  r.ua = 100.0 - r.forget_accuracy;
  r.ra = evaluate(model, retain);
  r.ta = evaluate(model, test);
  MiaResult mia = mia_score(model, forget, retain, test);
  r.mia = mia.score;
  r.mia_degenerate = mia.degenerate;
  r.rte_seconds = rte;
  return r;
}

inline RunLedger run_experiment(const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  cfg.validate();
  DatasetTriple data = load_dataset(cfg.dataset);
  data.train.validate();
  data.test.validate();

  ArchDescriptor arch = cfg.arch;
  arch.in_channels = data.train.channels();
  arch.image_size = data.train.height();
  arch.num_classes = data.train.num_classes;

  fs::create_directories(cfg.out_dir);
  const std::string ledger_path = (fs::path(cfg.out_dir) / "ledger.json").string();
  const std::string csv_path = (fs::path(cfg.out_dir) / "results.csv").string();
  RunLedger ledger;
  if (!cfg.force && fs::exists(ledger_path)) ledger = load_ledger(ledger_path);

  std::vector<std::string> methods{"retrain"};
  for (const auto& m : cfg.methods)
    if (m != "retrain") methods.push_back(m);

  for (AugScenario scen : cfg.scenarios) {
    const std::string dscen = cfg.dataset.name + "@" + scenario_name(scen);
    const AugmentationConfig aug = scenario_config(scen, cfg.ra_m);
    for (std::uint64_t seed : cfg.seeds) {
      // Base model theta_i, cached per (dataset, scenario, seed).
      const std::string base_id = dscen + "|" + std::to_string(seed);
      const std::string base_dir =
          (fs::path(cfg.out_dir) / "ckpt" /
           ("base_" + std::string(scenario_name(scen)) + "_" + std::to_string(seed)))
              .string();
      std::unique_ptr<Model<float>> theta_i;
      if (!cfg.force && ledger.base_models.count(base_id) &&
          fs::exists(fs::path(base_dir) / "manifest.json")) {
        theta_i = load_checkpoint(base_dir).model;
      } else {
        theta_i = build_model<float>(arch, Rng::derive(seed, "init-base"));
        TrainConfig tc = cfg.train;
        tc.seed = Rng::derive(seed, "train-base");
        tc.augmentation = aug;
        train(*theta_i, data.train, tc);
        save_checkpoint(base_dir, *theta_i, seed);
        ledger.base_models[base_id] = base_dir;
        save_ledger(ledger_path, ledger);
      }

      for (double rate : cfg.rates) {
        ForgetPartition part =
            split_forget(data.train, rate, Rng::derive(seed, "forget"));
        Dataset forget = subset(data.train, part.forget);
        Dataset retain = subset(data.train, part.retain);
        const std::string rate_tag = detail::fmt(rate, "%.2f");

        MetricsReport retrain_report;
        bool have_retrain = false;

        for (const std::string& method : methods) {
          const std::string id = cell_id(dscen, rate, seed, method);
          auto it = ledger.cells.find(id);
          if (!cfg.force && it != ledger.cells.end() && it->second.status == "complete") {
            if (method == "retrain") {
              retrain_report = it->second.report;
              have_retrain = true;
            }
            continue;
          }
          CellRecord rec;
          rec.timestamp = detail::now_iso();
          try {
            std::unique_ptr<Model<float>> theta_u;
            double rte = 0.0;
            UnlearnConfig ucfg = cfg.unlearn;
            ucfg.method = unlearn_method_from_name(method);
            ucfg.seed = Rng::derive(seed, "unlearn-" + method + "-" + rate_tag);

            if (method == "retrain") {
              TrainConfig tc = cfg.train;
              tc.seed = Rng::derive(seed, "train-retrain-" + rate_tag);
              tc.augmentation = aug;
              UnlearnResult rr = retrain(
                  retain, arch, tc, Rng::derive(seed, "init-retrain-" + rate_tag));
              theta_u = std::move(rr.model);
              rte = rr.seconds;
            } else if (method == "salun") {
              SaliencyMask mask = compute_saliency_mask(
                  *theta_i, forget, ucfg.mask_fraction, ucfg.batch_size);
              UnlearnResult ur = salun_unlearn(*theta_i, forget, retain, mask, ucfg, aug);
              theta_u = std::move(ur.model);
              rte = ur.seconds;
            } else if (method == "random_label") {
              UnlearnResult ur = random_label_unlearn(*theta_i, forget, retain, ucfg, aug);
              theta_u = std::move(ur.model);
              rte = ur.seconds;
            } else {  // gradient_ascent
              UnlearnResult ur = gradient_ascent_unlearn(*theta_i, forget, ucfg, aug);
              theta_u = std::move(ur.model);
              rte = ur.seconds;
            }

            rec.report = evaluate_cell(*theta_u, forget, retain, data.test, method,
                                       dscen, rate, seed, rte);
            if (method == "retrain") {
              rec.report.ag = 0.0;
              retrain_report = rec.report;
              have_retrain = true;
            } else {
              if (!have_retrain)
                throw ContractError("retrain cell missing for " + dscen + " rate " +
                                    rate_tag);
              rec.report.ag = avg_gap(rec.report, retrain_report);
            }

            const std::string cdir =
                (fs::path(cfg.out_dir) / "ckpt" /
                 (method + "_" + std::string(scenario_name(scen)) + "_" +
                  std::to_string(seed) + "_" + rate_tag))
                    .string();
            json cfg_json{{"method", method},
                          {"epochs", method == "retrain" ? cfg.train.epochs : ucfg.epochs},
                          {"learning_rate",
                           method == "retrain" ? cfg.train.learning_rate
                                               : ucfg.learning_rate},
                          {"mask_fraction", ucfg.mask_fraction},
                          {"rate", rate},
                          {"scenario", scenario_name(scen)},
                          {"seed", seed}};
            save_checkpoint(cdir, *theta_u, seed, cfg_json);
            rec.checkpoint = cdir;
            rec.status = "complete";
          } catch (const std::exception& e) {
            rec.status = "failed";
            rec.error = e.what();
          }
          ledger.cells[id] = rec;
          save_ledger(ledger_path, ledger);
          write_results_csv(csv_path, ledger);
        }
      }
    }
  }
  return ledger;
}

// ---------------------------------------------------------------------------
// Table emission: per forget rate, rows = dataset x method, each metric
// printed as "value (diff vs retrain)", 2 decimal places.

inline std::vector<std::string> emit_tables(const RunLedger& ledger,
                                            const std::string& out_dir) {
  namespace fs = std::filesystem;
  if (ledger.cells.empty()) throw ContractError("emit_tables: empty ledger");
  fs::create_directories(out_dir);

  // rate -> (dataset, seed) -> method -> report
  std::map<std::string, std::map<std::pair<std::string, std::uint64_t>,
                                 std::map<std::string, MetricsReport>>>
      grid;
  for (const auto& [id, c] : ledger.cells) {
    if (c.status != "complete") continue;
    grid[detail::fmt(c.report.rate, "%.2f")][{c.report.dataset, c.report.seed}]
        [c.report.method] = c.report;
  }
  if (grid.empty()) throw ContractError("emit_tables: no complete cells");

  std::vector<std::string> written;
  for (const auto& [rate_tag, rows] : grid) {
    std::string path =
        (fs::path(out_dir) / ("table_rate_" + rate_tag + ".txt")).string();
    std::ofstream f(path, std::ios::trunc);
    char line[256];
    std::snprintf(line, sizeof(line), "%-28s %-16s %6s %-18s %-18s %-18s %-18s %8s %10s\n",
                  "dataset", "method", "seed", "UA (diff)", "RA (diff)", "TA (diff)",
                  "MIA (diff)", "AG", "RTE(s)");
    f << "Forget rate " << rate_tag << "\n" << line;
    for (const auto& [key, methods] : rows) {
      auto rit = methods.find("retrain");
      if (rit == methods.end())
        throw ContractError("emit_tables: missing retrain cell for dataset '" +
                            key.first + "' seed " + std::to_string(key.second) +
                            " at rate " + rate_tag);
      const MetricsReport& base = rit->second;
      for (const auto& [method, r] : methods) {
        auto cellfmt = [&](double v, double ref) {
          return detail::fmt(v, "%.2f") + " (" + detail::fmt(std::abs(v - ref), "%.2f") +
                 ")";
        };
        std::snprintf(line, sizeof(line),
                      "%-28s %-16s %6llu %-18s %-18s %-18s %-18s %8s %10s\n",
                      key.first.c_str(), method.c_str(),
                      static_cast<unsigned long long>(key.second),
                      cellfmt(r.ua, base.ua).c_str(), cellfmt(r.ra, base.ra).c_str(),
                      cellfmt(r.ta, base.ta).c_str(), cellfmt(r.mia, base.mia).c_str(),
                      detail::fmt(r.ag, "%.2f").c_str(),
                      detail::fmt(r.rte_seconds, "%.1f").c_str());
        f << line;
      }
    }
    if (!f) throw FormatError("write failed: " + path);
    written.push_back(path);
  }
  return written;
}

// ---------------------------------------------------------------------------
// Figure-style augmentation comparison: SalUn AG per scenario for each
// (dataset, rate), as plottable CSV plus rank lines naming the lowest-AG
// scenario (ties reported explicitly).

inline std::vector<std::string> emit_aug_comparison(const RunLedger& ledger,
                                                    const std::string& out_dir) {
  namespace fs = std::filesystem;
  // (base dataset, rate tag, seed) -> scenario -> AG
  std::map<std::tuple<std::string, std::string, std::uint64_t>,
           std::map<std::string, double>>
      ag;
  std::set<std::string> scenarios_seen;
  for (const auto& [id, c] : ledger.cells) {
    if (c.status != "complete" || c.report.method != "salun") continue;
    std::string ds = c.report.dataset;
    std::string base = ds, scen = "";
    auto at = ds.find('@');
    if (at != std::string::npos) {
      base = ds.substr(0, at);
      scen = ds.substr(at + 1);
    }
    ag[{base, detail::fmt(c.report.rate, "%.2f"), c.report.seed}][scen] = c.report.ag;
    scenarios_seen.insert(scen);
  }
  if (scenarios_seen.size() < 2)
    throw ContractError("emit_aug_comparison: need complete SalUn cells for >= 2 "
                        "scenarios, have " +
                        std::to_string(scenarios_seen.size()));

  fs::create_directories(out_dir);
  std::string csv_path = (fs::path(out_dir) / "aug_comparison.csv").string();
  std::string rank_path = (fs::path(out_dir) / "aug_comparison_rank.txt").string();
  std::ofstream csv(csv_path, std::ios::trunc);
  std::ofstream rank(rank_path, std::ios::trunc);
  csv << "dataset,rate,seed,scenario,AG\n";
  for (const auto& [key, per_scen] : ag) {
    const auto& [base, rate_tag, seed] = key;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& [scen, v] : per_scen) {
      csv << base << "," << rate_tag << "," << seed << "," << scen << ","
          << detail::fmt(v) << "\n";
      best = std::min(best, v);
    }
    std::vector<std::string> winners;
    for (const auto& [scen, v] : per_scen)
      if (v == best) winners.push_back(scen);
    rank << base << " rate=" << rate_tag << " seed=" << seed << " ";
    if (winners.size() == 1)
      rank << "best=" << winners[0];
    else {
      rank << "tie=";
      for (std::size_t i = 0; i < winners.size(); ++i)
        rank << (i ? "," : "") << winners[i];
    }
    rank << " AG=" << detail::fmt(best, "%.2f") << "\n";
  }
  if (!csv || !rank) throw FormatError("write failed: augmentation comparison");
  return {csv_path, rank_path};
}

}  // namespace mulab
