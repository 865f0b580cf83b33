// Command-line front end: run, sweep, build-model, validate, recipe.
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "latentbandit/datasets.hpp"
#include "latentbandit/harness.hpp"
#include "latentbandit/model_io.hpp"

namespace lb = latentbandit;
namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kRuntimeError = 3;

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> runs;
  std::optional<int> horizon;
  std::optional<int> threads;
  std::string out_dir;
};

lb::ExperimentConfig load(const std::string& source, const Overrides& o) {
  lb::ExperimentConfig c = fs::exists(source) ? lb::load_experiment(source) : lb::recipe(source);
  if (o.seed) c.seed = *o.seed;
  if (o.runs) c.num_runs = *o.runs;
  if (o.horizon) c.horizon = *o.horizon;
  if (o.threads) c.threads = *o.threads;
  if (!o.out_dir.empty()) c.output.dir = o.out_dir;
  lb::validate(c);
  return c;
}

void add_overrides(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--seed", o.seed, "base seed (run r uses seed + r)");
  cmd->add_option("--runs", o.runs, "number of runs");
  cmd->add_option("--horizon", o.horizon, "steps per run");
  cmd->add_option("--threads", o.threads, "worker threads, 0 for all cores");
  cmd->add_option("--out-dir", o.out_dir, "output directory");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Latent bandit simulations and benchmarks"};
  app.require_subcommand(1);

  Overrides run_o, sweep_o, validate_o;
  std::string run_cfg, sweep_cfg, validate_cfg, dataset_cfg, model_out, recipe_name, recipe_out;

  auto* run = app.add_subcommand("run", "run an experiment config or named recipe");
  run->add_option("config", run_cfg, "config file or recipe name")->required();
  add_overrides(run, run_o);

  auto* sw = app.add_subcommand("sweep", "run every grid point of a config's sweep axes");
  sw->add_option("config", sweep_cfg, "config file or recipe name")->required();
  add_overrides(sw, sweep_o);

  auto* build = app.add_subcommand("build-model", "build a reward model from a dataset config");
  build->add_option("dataset-config", dataset_cfg, "dataset config file")->required();
  build->add_option("-o,--out", model_out, "model JSON path (a .provenance.json sidecar is written next to it)")
      ->required();

  auto* val = app.add_subcommand("validate", "check a config without running it");
  val->add_option("config", validate_cfg, "config file or recipe name")->required();
  add_overrides(val, validate_o);

  auto* rec = app.add_subcommand("recipe", "print a named recipe as JSON (no name lists them)");
  rec->add_option("name", recipe_name, "recipe name");
  rec->add_option("-o,--out", recipe_out, "write to file instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*run) {
      const auto config = load(run_cfg, run_o);
      const auto result = lb::run_experiment(config);
      const auto dir = lb::emit_outputs(config, result);
      std::cout << "wrote " << dir << "\n";
      for (std::size_t p = 0; p < result.policies.size(); ++p) {
        const auto band = lb::bayes_regret(result, p, config.output.bootstrap);
        std::cout << "  " << result.policies[p] << ": final mean regret " << band.mean.back() << " ["
                  << band.low.back() << ", " << band.high.back() << "]\n";
      }
    } else if (*sw) {
      const auto config = load(sweep_cfg, sweep_o);
      const auto rows = lb::sweep(config);
      const fs::path dir = lb::output_dir(config);
      fs::create_directories(dir);
      std::ofstream(dir / "sweep.csv") << lb::sweep_csv(config, rows);
      std::cout << "wrote " << (dir / "sweep.csv").string() << " (" << rows.size() << " rows)\n";
    } else if (*build) {
      nlohmann::json cfg;
      try {
        cfg = lb::load_json(dataset_cfg);
      } catch (const std::exception& e) {
        throw lb::ConfigError(e.what());
      }
      const auto built = lb::build_dataset(cfg);
      lb::RewardBuildReport report;
      const auto model = lb::dataset_reward_model(built, cfg.value("super_user_seed", std::uint64_t{0}), &report);
      lb::save_json(model_out, lb::model_document(model, std::nullopt));
      auto provenance = built.provenance;
      provenance["super_user_seed"] = cfg.value("super_user_seed", std::uint64_t{0});
      provenance["clamped_stds"] = report.clamped;
      const fs::path sidecar = fs::path(model_out).replace_extension(".provenance.json");
      lb::save_json(sidecar.string(), provenance);
      std::cout << "wrote " << model_out << " and " << sidecar.string() << "\n";
    } else if (*val) {
      const auto config = load(validate_cfg, validate_o);
      const lb::ResolvedEnvironment env(config);
      std::cout << "ok: " << config.name << " (" << config.policies.size() << " policies, " << env.num_arms()
                << " arms, " << env.kernel()->num_states() << " states)\n";
    } else if (*rec) {
      if (recipe_name.empty()) {
        for (const auto& n : lb::recipe_names()) std::cout << n << "\n";
        return kOk;
      }
      const auto text = lb::to_json(lb::recipe(recipe_name)).dump(2) + "\n";
      if (recipe_out.empty()) {
        std::cout << text;
      } else {
        std::ofstream(recipe_out) << text;
      }
    }
  } catch (const lb::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const lb::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kOk;
}
