#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "dynembed/config.hpp"
#include "dynembed/errors.hpp"
#include "dynembed/harness.hpp"
#include "dynembed/plot.hpp"
#include "dynembed/sbm.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dynembed;
using namespace dynembed::harness;

namespace {

// Options shared by every experiment subcommand. Flags that were given
// override the matching config keys.
struct CommonOptions {
  std::string config_path;
  std::string out_dir = "out";
  std::vector<std::string> sets;
  std::optional<std::string> method, dataset_file, theta;
  std::optional<int> embed_dim, lookback, epochs, batch_size, boundary, sample_nodes;
  std::optional<std::uint64_t> seed;
  std::optional<double> lr, beta;
  bool retrain_per_step = false;
  bool new_links_only = false;

  void add_to(CLI::App* app) {
    app->add_option("--config", config_path, "JSON experiment config")->check(CLI::ExistingFile);
    app->add_option("--out", out_dir, "Output directory")->capture_default_str();
    app->add_option("--set", sets, "Override a config key, e.g. --set train.epochs=50 (value parsed as JSON)");
    app->add_option("--method", method, "ae, rnn, aernn, optimal-svd, inc-svd or rerun-svd");
    app->add_option("--dataset", dataset_file, "Snapshot file to use instead of the configured dataset");
    app->add_option("--embed-dim", embed_dim);
    app->add_option("--lookback", lookback);
    app->add_option("--epochs", epochs);
    app->add_option("--batch-size", batch_size);
    app->add_option("--lr", lr);
    app->add_option("--beta", beta);
    app->add_option("--theta", theta, "rerun threshold, a number or inf");
    app->add_option("--boundary", boundary, "first evaluated step (0 = T/2)");
    app->add_option("--sample-nodes", sample_nodes);
    app->add_option("--seed", seed);
    app->add_flag("--retrain-per-step", retrain_per_step, "Retrain the model before every target step");
    app->add_flag("--new-links-only", new_links_only, "Score only links absent from the previous snapshot");
  }

  json merged() const {
    json j = json::object();
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      try {
        j = json::parse(in);
      } catch (const json::parse_error& e) {
        throw ArgumentError("config: " + config_path + ": " + e.what());
      }
    }
    auto put = [&](const char* key, const auto& value) {
      if (value) set_json_path(j, key, *value);
    };
    put("method", method);
    put("embed_dim", embed_dim);
    put("lookback", lookback);
    put("train.epochs", epochs);
    put("train.batch_size", batch_size);
    put("train.lr", lr);
    put("train.beta", beta);
    put("boundary", boundary);
    put("sample_nodes", sample_nodes);
    put("seed", seed);
    if (theta) {
      set_json_path(j, "theta", *theta == "inf" ? json("inf") : json(std::stod(*theta)));
    }
    if (dataset_file) j["dataset"] = {{"type", "file"}, {"path", *dataset_file}};
    if (retrain_per_step) j["retrain_per_step"] = true;
    if (new_links_only) j["new_links_only"] = true;
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ArgumentError("--set expects key=value, got '" + s + "'");
      json value;
      try {
        value = json::parse(s.substr(eq + 1));
      } catch (const json::parse_error&) {
        value = s.substr(eq + 1);
      }
      set_json_path(j, s.substr(0, eq), value);
    }
    return j;
  }

  ExperimentConfig config() const { return config_from_json(merged()); }

  std::vector<ManifestInput> extra_inputs() const {
    if (config_path.empty()) return {};
    return {{fs::path(config_path).filename().string(), plot::read_file(config_path)}};
  }
};

void print_summary(const RunResult& r, const fs::path& out) {
  std::printf("%s d=%d lb=%d seed=%llu boundary=%d\n", r.report.method.c_str(), r.report.embed_dim,
              r.report.lookback, static_cast<unsigned long long>(r.report.seed), r.boundary);
  for (const auto& s : r.report.steps) std::printf("  target %d  MAP %.4f\n", s.target, s.map);
  std::printf("mean MAP %.4f\nleakage audit %s\nwrote %s\n", r.report.mean_map, r.audit.clean() ? "clean" : "FAILED",
              out.string().c_str());
}

void print_sweep(const SweepResult& s, const fs::path& out) {
  std::printf("%s sweep (%s)\n", s.axis.c_str(), s.method.c_str());
  for (const auto& row : s.rows) std::printf("  %d  mean MAP %.4f\n", row.value, row.mean_map);
  std::printf("wrote %s\n", out.string().c_str());
}

}  // namespace

int main(int argc, char** argv) {
#if defined(__GLIBC__)
  // Training allocates and frees many short-lived buffers; keeping them out
  // of mmap and off the trim path saves a large share of system time.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
  CLI::App app{"Dynamic graph embedding experiments"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("generate-sbm", "Write a dynamic SBM sequence and its labels");
  std::string scenario = "diminish", gen_out = "sbm";
  std::uint64_t gen_seed = 0;
  std::optional<int> gen_steps;
  std::optional<std::string> gen_config;
  gen->add_option("--scenario", scenario, "diminish or shift")->check(CLI::IsMember({"diminish", "shift"}));
  gen->add_option("--seed", gen_seed);
  gen->add_option("--steps", gen_steps);
  gen->add_option("--config", gen_config, "Take the SBM settings from a config's dataset section")
      ->check(CLI::ExistingFile);
  gen->add_option("--out", gen_out, "Output directory")->capture_default_str();

  CommonOptions run_opts, lb_opts, hist_opts, export_opts;
  auto* run = app.add_subcommand("run", "Train or fit one method and evaluate it");
  run_opts.add_to(run);

  auto* sweep_lb = app.add_subcommand("sweep-lookback", "Mean MAP for each lookback");
  lb_opts.add_to(sweep_lb);
  std::vector<int> lbs;
  sweep_lb->add_option("--lookbacks", lbs, "Lookback values (default: the config's list)");

  auto* sweep_hist = app.add_subcommand("sweep-history", "Mean MAP for growing training prefixes");
  hist_opts.add_to(sweep_hist);

  auto* exp = app.add_subcommand("export-embeddings", "Write node embeddings of a trained model as CSV");
  export_opts.add_to(exp);
  std::string checkpoint, exp_output = "embeddings.csv";
  int exp_t = -1;
  exp->add_option("--checkpoint", checkpoint, "model.ckpt written by run")->required();
  exp->add_option("--t", exp_t, "Step whose embedding is exported")->required();
  exp->add_option("--output", exp_output)->capture_default_str();

  auto* plt = app.add_subcommand("plot", "Render SVG charts from report or sweep CSVs");
  std::vector<std::string> reports, sweeps;
  std::string plot_output;
  plt->add_option("--report", reports, "report.csv files (bars per method and embedding size)")
      ->check(CLI::ExistingFile);
  plt->add_option("--sweep", sweeps, "sweep.csv files (one line per method)")->check(CLI::ExistingFile);
  plt->add_option("--output", plot_output, "SVG file to write")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      DatasetConfig d;
      if (gen_config) {
        d = load_config(*gen_config).dataset;
        if (d.type != DatasetConfig::Type::kSbm) throw ArgumentError("dataset.type: generate-sbm needs an sbm dataset");
      } else {
        d.sbm = scenario == "shift" ? sbm::shift_config(gen_seed) : sbm::diminish_config(gen_seed);
      }
      if (gen_steps) d.sbm.steps = *gen_steps;
      d.sbm.validate();
      const auto g = sbm::generate_dynamic(d.sbm);
      fs::create_directories(gen_out);
      graph::save_snapshots(g.graph, fs::path(gen_out) / "snapshots.txt");
      sbm::save_labels(g, fs::path(gen_out) / "labels.txt");
      std::printf("wrote %d nodes x %d steps to %s%s\n", g.graph.num_nodes(), g.graph.num_steps(), gen_out.c_str(),
                  g.truncated ? " (migration stopped early: source community exhausted)" : "");
    } else if (*run) {
      const ExperimentConfig cfg = run_opts.config();
      const Dataset data = load_dataset(cfg);
      const RunResult r = run_experiment(cfg, data.graph);
      write_run_outputs(cfg, data, r, run_opts.out_dir, run_opts.extra_inputs());
      print_summary(r, run_opts.out_dir);
      if (!r.audit.clean()) return 3;
    } else if (*sweep_lb) {
      const ExperimentConfig cfg = lb_opts.config();
      const Dataset data = load_dataset(cfg);
      const SweepResult s = sweep_lookback(cfg, data.graph, lbs.empty() ? cfg.lookbacks : lbs);
      write_sweep_outputs(cfg, data, s, lb_opts.out_dir, lb_opts.extra_inputs());
      print_sweep(s, lb_opts.out_dir);
    } else if (*sweep_hist) {
      const ExperimentConfig cfg = hist_opts.config();
      const Dataset data = load_dataset(cfg);
      const SweepResult s = sweep_history(cfg, data.graph);
      write_sweep_outputs(cfg, data, s, hist_opts.out_dir, hist_opts.extra_inputs());
      print_sweep(s, hist_opts.out_dir);
    } else if (*exp) {
      export_embeddings(checkpoint, export_opts.config(), exp_t, exp_output);
      std::printf("wrote %s\n", exp_output.c_str());
    } else if (*plt) {
      if (reports.empty() == sweeps.empty()) throw ArgumentError("plot: pass either --report or --sweep files");
      std::vector<std::string> texts;
      for (const auto& p : reports.empty() ? sweeps : reports) texts.push_back(plot::read_file(p));
      const std::string svg = reports.empty() ? plot::sweep_chart(texts) : plot::report_chart(texts);
      plot::write_file(plot_output, svg);
      std::printf("wrote %s\n", plot_output.c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
