#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "zerogen/pipeline.hpp"
#include "zerogen/toy_world.hpp"

namespace fs = std::filesystem;
using namespace zerogen;

namespace {

enum ExitCode { kOk = 0, kConfigError = 2, kDataError = 3, kInternalError = 4 };

RunConfig load(const std::string& config, CLI::App* sub) {
  return load_run_config(config, sub->remaining());
}

std::vector<std::size_t> parse_sizes(const std::string& s) {
  std::vector<std::size_t> out;
  for (const auto& item : detail::split_list(s)) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw ConfigError("sweep.sizes", "not an integer: '" + item + "'");
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Zero-shot learning by dataset generation: synthesize, train, evaluate."};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  std::string config;
  std::string dataset, gold, gold_train, sizes, out_dir = "data/toy_world";
  std::vector<std::string> named_datasets;
  std::uint64_t toy_seed = 7;

  auto* gen = app.add_subcommand("generate", "synthesize a labelled dataset with the language model");
  auto* tev = app.add_subcommand("train-eval", "train a TAM on a synthetic dataset and score it on gold data");
  auto* prm = app.add_subcommand("prompting", "zero-shot prompting baseline on gold data");
  auto* qual = app.add_subcommand("quality", "Self-BLEU and correctness of synthetic datasets");
  auto* swp = app.add_subcommand("sweep", "accuracy against synthetic dataset size");
  auto* toy = app.add_subcommand("toy-world", "write the bundled toy world (corpus, gold data, catalog, config)");

  for (auto* sub : {gen, tev, prm, qual, swp}) {
    sub->add_option("-c,--config", config, "run configuration file")->required();
    sub->allow_extras();
    sub->footer("Any config field can be overridden as --section.key=value.");
  }
  tev->add_option("--dataset", dataset, "synthetic dataset (JSONL)")->required();
  tev->add_option("--gold", gold, "gold test set (JSONL)")->required();
  prm->add_option("--gold", gold, "gold test set (JSONL)")->required();
  qual->add_option("--dataset", named_datasets, "NAME=PATH, one per dataset")->required();
  qual->add_option("--gold-train", gold_train, "gold training set for the validator (JSONL)")->required();
  swp->add_option("--sizes", sizes, "comma-separated ascending dataset sizes")->required();
  swp->add_option("--gold", gold, "gold test set (JSONL)")->required();
  toy->add_option("-o,--out", out_dir, "output directory");
  toy->add_option("--seed", toy_seed, "world seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  try {
    if (*gen) {
      auto cfg = load(config, gen);
      auto r = run_generate(cfg);
      const auto& m = r.dataset.manifest;
      std::printf("generated %llu/%llu examples in %llu attempts -> %s\n",
                  static_cast<unsigned long long>(m.achieved), static_cast<unsigned long long>(m.requested),
                  static_cast<unsigned long long>(m.attempts), (cfg.output_dir / "dataset.jsonl").c_str());
    } else if (*tev) {
      auto cfg = load(config, tev);
      auto r = run_train_eval(cfg, dataset, gold);
      std::cout << eval_report_table(r.report);
    } else if (*prm) {
      auto cfg = load(config, prm);
      auto r = run_prompting_baseline(cfg, gold);
      std::cout << eval_report_table(r.report);
    } else if (*qual) {
      auto cfg = load(config, qual);
      std::vector<std::pair<std::string, fs::path>> ds;
      for (const auto& item : named_datasets) {
        const auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0) throw ConfigError("datasets", "expected NAME=PATH, got '" + item + "'");
        ds.emplace_back(item.substr(0, eq), item.substr(eq + 1));
      }
      auto r = run_quality(cfg, ds, gold_train);
      std::cout << quality_report_table(r.report);
    } else if (*swp) {
      auto cfg = load(config, swp);
      auto r = run_scaling_sweep(cfg, parse_sizes(sizes), gold);
      for (const auto& p : r.points) {
        std::printf("%8zu  %s +- %s\n", p.size, format_fixed(p.mean, 4).c_str(), format_fixed(p.stddev, 4).c_str());
      }
    } else if (*toy) {
      write_toy_world(make_toy_world(toy_seed), out_dir);
      std::printf("toy world written to %s\n", out_dir.c_str());
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "zerogen: %s\n", e.what());
    return kConfigError;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kDataError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return kInternalError;
  }
  return kOk;
}
