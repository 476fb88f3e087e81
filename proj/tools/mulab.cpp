// mulab command line: run experiment grids, emit reports, convert and
// generate datasets, and self-check the numerics.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "mulab/gradcheck.hpp"
#include "mulab/harness.hpp"

using namespace mulab;
namespace fs = std::filesystem;

namespace {

int cmd_run(const std::string& config_path, const std::string& out_override,
            bool have_seed, std::uint64_t seed, bool force) {
  ExperimentConfig cfg = load_experiment_config(config_path);
  if (!out_override.empty()) cfg.out_dir = out_override;
  if (have_seed) cfg.seeds = {seed};
  cfg.force = force;

  RunLedger ledger = run_experiment(cfg);
  int complete = 0, failed = 0;
  for (const auto& [id, c] : ledger.cells) {
    if (c.status == "complete") ++complete;
    else {
      ++failed;
      std::fprintf(stderr, "failed: %s: %s\n", id.c_str(), c.error.c_str());
    }
  }
  std::printf("%d/%zu cells complete; results in %s\n", complete,
              ledger.cells.size(), cfg.out_dir.c_str());
  if (!ledger.all_complete()) return 1;
  for (const std::string& p : emit_tables(ledger, cfg.out_dir))
    std::printf("wrote %s\n", p.c_str());
  return 0;
}

int cmd_report(const std::string& dir) {
  RunLedger ledger = load_ledger((fs::path(dir) / "ledger.json").string());
  for (const std::string& p : emit_tables(ledger, dir))
    std::printf("wrote %s\n", p.c_str());
  try {
    for (const std::string& p : emit_aug_comparison(ledger, dir))
      std::printf("wrote %s\n", p.c_str());
  } catch (const ContractError& e) {
    std::printf("augmentation comparison skipped: %s\n", e.what());
  }
  return 0;
}

int cmd_convert(const std::string& out, const std::string& name, int classes,
                const std::map<std::string, std::pair<std::string, std::string>>& files) {
  std::map<std::string, Dataset> splits;
  for (const auto& [split, pair] : files) {
    Dataset d;
    d.images = idx_to_images(read_idx(pair.first));
    d.labels = idx_to_labels(read_idx(pair.second));
    d.num_classes = classes;
    d.split = split;
    d.provenance = name;
    d.validate();
    splits.emplace(split, std::move(d));
  }
  write_manifest_dataset(out, name, splits);
  std::printf("wrote manifest dataset '%s' (%zu splits) to %s\n", name.c_str(),
              splits.size(), out.c_str());
  return 0;
}

int cmd_synth(const std::string& out, const std::string& name, int classes,
              int per_class, int image_size, double noise, std::uint64_t seed) {
  DatasetTriple t = generate_synthetic(classes, per_class, image_size, noise, seed);
  write_manifest_dataset(out, name,
                         {{"train", t.train}, {"val", t.val}, {"test", t.test}});
  std::printf("wrote synthetic dataset to %s (train %d / val %d / test %d)\n",
              out.c_str(), t.train.n(), t.val.n(), t.test.n());
  return 0;
}

int cmd_check() {
  int failures = 0;
  auto line = [&](bool ok, const char* what, const std::string& detail) {
    std::printf("%s - %s%s%s\n", ok ? "PASS" : "FAIL", what,
                detail.empty() ? "" : ": ", detail.c_str());
    if (!ok) ++failures;
  };

  // Gradient check: small ResNetS in double precision.
  {
    ArchDescriptor d;
    d.kind = Arch::ResNetS;
    d.base_width = 8;
    auto model = build_model<double>(d, 3);
    Rng rng(4);
    Tensor<double> x({2, 1, 16, 16});
    for (std::int64_t i = 0; i < x.size(); ++i) x[i] = rng.uniform();
    std::vector<int> labels{0, 2};
    std::vector<Tensor<double>> params;
    for (auto& p : model->parameters()) params.push_back(p.tensor);
    auto f = [&](Tape<double>* tape) {
      return softmax_cross_entropy(
          tape, model->forward(tape, x, true, /*update_bn=*/false), labels);
    };
    // eps small enough that relu kinks stay outside the central-difference
    // interval; double precision keeps the cancellation noise negligible.
    GradCheckResult<double> r = finite_difference_check<double>(f, params, 1e-7, 16);
    line(r.max_rel_error < 1e-3, "gradients vs finite differences",
         "max rel error " + std::to_string(r.max_rel_error));
  }

  // Partition invariants over a few seeds.
  {
    bool ok = true;
    for (std::uint64_t seed = 0; seed < 20 && ok; ++seed)
      for (double rate : {0.0, 0.1, 0.5, 1.0}) {
        ForgetPartition p = split_forget(997, rate, seed);
        ok = ok &&
             static_cast<int>(p.forget.size()) == static_cast<int>(std::floor(rate * 997)) &&
             p.forget.size() + p.retain.size() == 997;
      }
    line(ok, "forget/retain partition invariants", "");
  }

  // Serialization round trip.
  {
    fs::path dir = fs::temp_directory_path() / "mulab_check";
    fs::create_directories(dir);
    std::vector<std::uint8_t> payload{1, 2, 3, 4, 5, 6};
    write_idx((dir / "t.idx").string(), {2, 3}, payload);
    IdxContent c = read_idx((dir / "t.idx").string());
    line(c.bytes == payload && c.dims == std::vector<int>({2, 3}),
         "IDX write/read round trip", "");
  }

  return failures ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"machine unlearning laboratory"};
  app.require_subcommand(1);

  std::string config_path, out_dir, name = "dataset";
  std::uint64_t seed = 1;
  bool force = false, deterministic = false;
  int classes = 3, per_class = 500, image_size = 16;
  double noise = 0.1;
  std::map<std::string, std::pair<std::string, std::string>> idx_files;
  std::vector<std::string> split_args;

  CLI::App* run = app.add_subcommand("run", "execute an experiment grid");
  run->add_option("--config", config_path, "experiment config (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "output directory (overrides config)");
  CLI::Option* run_seed = run->add_option("--seed", seed, "single seed override");
  run->add_flag("--force", force, "recompute completed cells");
  run->add_flag("--deterministic", deterministic,
                "fixed reduction order (execution is already sequential)");

  CLI::App* report = app.add_subcommand("report", "emit tables from a run directory");
  report->add_option("--out", out_dir, "run directory containing ledger.json")
      ->required()
      ->check(CLI::ExistingDirectory);

  CLI::App* convert = app.add_subcommand("convert", "IDX files -> manifest dataset");
  convert->add_option("--out", out_dir, "manifest output directory")->required();
  convert->add_option("--name", name, "dataset name");
  convert->add_option("--classes", classes, "number of classes")->required();
  convert
      ->add_option("--split", split_args,
                   "SPLIT IMAGES_IDX LABELS_IDX (repeatable)")
      ->expected(-3)
      ->required();

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic corpus");
  synth->add_option("--out", out_dir, "manifest output directory")->required();
  synth->add_option("--name", name, "dataset name");
  synth->add_option("--classes", classes, "number of classes");
  synth->add_option("--per-class", per_class, "training samples per class");
  synth->add_option("--image-size", image_size, "square image side");
  synth->add_option("--noise", noise, "pixel noise amplitude");
  synth->add_option("--seed", seed, "generator seed");

  app.add_subcommand("check", "run gradient and invariant self-tests");

  CLI11_PARSE(app, argc, argv);
  (void)deterministic;

  try {
    if (app.got_subcommand("run"))
      return cmd_run(config_path, out_dir, run_seed->count() > 0, seed, force);
    if (app.got_subcommand("report")) return cmd_report(out_dir);
    if (app.got_subcommand("convert")) {
      if (split_args.size() % 3 != 0)
        throw ConfigError("--split takes triples: SPLIT IMAGES_IDX LABELS_IDX");
      for (std::size_t i = 0; i < split_args.size(); i += 3)
        idx_files[split_args[i]] = {split_args[i + 1], split_args[i + 2]};
      return cmd_convert(out_dir, name, classes, idx_files);
    }
    if (app.got_subcommand("synth"))
      return cmd_synth(out_dir, name, classes, per_class, image_size, noise, seed);
    return cmd_check();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
