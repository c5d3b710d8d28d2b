#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "ramen/ramen.hpp"

using namespace ramen;

namespace {

CorpusConfig load_corpus(const std::string &path) {
  return path.empty() ? builtin_corpus() : load_corpus_config(path);
}

const DatasetSpec &find_dataset(const CorpusConfig &corpus, const std::string &name) {
  if (name.empty()) return corpus.datasets.front();
  for (const auto &d : corpus.datasets)
    if (d.name == name) return d;
  throw ConfigError("corpus has no dataset named " + name);
}

std::vector<double> parse_list(const std::string &text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(std::stod(item));
  return out;
}

void ensure_writable(const std::string &path, bool truncate) {
  if (path.empty()) return;
  std::ofstream probe(path, truncate ? std::ios::trunc : std::ios::app);
  if (!probe) throw ConfigError("cannot write " + path);
}

template <typename F> int guarded(F &&f) {
  try {
    return f();
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Resolution-adjustable multimodal encoder: pretraining and tooling"};
  app.require_subcommand(1);

  // pretrain
  RunConfig run;
  bool overfit_mode = false;
  std::size_t overfit_steps = 500, overfit_warmup = 50;
  auto *pretrain = app.add_subcommand("pretrain", "Masked-autoencoding pretraining");
  pretrain->add_option("--config", run.corpus_path, "Corpus config (JSON); built-in corpus if omitted");
  pretrain->add_option("--preset", run.preset, "Encoder preset")->check(CLI::IsMember({"desk", "paper"}));
  pretrain->add_option("--seed", run.seed, "Run seed");
  pretrain->add_option("--epochs", run.epochs, "Epochs");
  pretrain->add_option("--steps", run.steps_per_epoch, "Steps per epoch");
  pretrain->add_option("--lr", run.base_lr, "Base learning rate");
  pretrain->add_option("--warmup-epochs", run.warmup_epochs, "Linear warmup epochs");
  pretrain->add_option("--checkpoint", run.checkpoint_path, "Checkpoint output path");
  pretrain->add_option("--checkpoint-every", run.checkpoint_every, "Checkpoint period in steps");
  pretrain->add_option("--metrics", run.metrics_path, "Metrics output (one JSON record per line)");
  pretrain->add_flag("--overfit", overfit_mode, "Overfit one fixed two-dataset batch");
  pretrain->add_option("--overfit-steps", overfit_steps, "Steps in overfit mode");
  pretrain->add_option("--overfit-warmup", overfit_warmup, "Warmup steps in overfit mode");

  // encode
  std::string enc_checkpoint, enc_config, enc_dataset, enc_out, enc_modalities;
  std::uint64_t enc_seed = 0;
  double enc_gsd = 10.0;
  auto *encode = app.add_subcommand("encode", "Unmasked forward pass to per-modality feature maps");
  encode->add_option("--checkpoint", enc_checkpoint, "Model checkpoint")->required();
  encode->add_option("--config", enc_config, "Corpus config describing the sample");
  encode->add_option("--dataset", enc_dataset, "Dataset to draw the sample from");
  encode->add_option("--modalities", enc_modalities, "Comma-separated modality names (default all)");
  encode->add_option("--seed", enc_seed, "Sample seed");
  encode->add_option("--gsd-target", enc_gsd, "Target GSD in meters")->check(CLI::PositiveNumber);
  encode->add_option("--out", enc_out, "Feature-map output path")->required();

  // gradcheck
  std::string gc_preset = "desk";
  GradcheckOptions gc;
  auto *gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient checks (64-bit)");
  gradcheck->add_option("--preset", gc_preset, "Model preset")->check(CLI::IsMember({"desk", "paper"}));
  gradcheck->add_option("--seed", gc.seed, "Seed");
  gradcheck->add_option("--corrupt-gradient", gc.gradient_scale,
                        "Multiply analytic gradients (negative control)");

  // flops
  std::string fl_preset = "desk", fl_config, fl_dataset, fl_targets, fl_out;
  auto *flops = app.add_subcommand("flops", "Closed-form encoder cost table");
  flops->add_option("--preset", fl_preset, "Model preset")->check(CLI::IsMember({"desk", "paper"}));
  flops->add_option("--config", fl_config, "Corpus config");
  flops->add_option("--dataset", fl_dataset, "Dataset whose modalities form the tile");
  flops->add_option("--gsd-target", fl_targets, "Comma-separated target GSDs (default: dataset grid)");
  flops->add_option("--out", fl_out, "CSV output (stdout if omitted)");

  // expert-sweep
  std::string es_checkpoint, es_preset = "desk", es_out;
  double es_lo = 1e-2, es_hi = 10.0;
  std::size_t es_points = 61;
  std::uint64_t es_seed = 0;
  auto *sweep = app.add_subcommand("expert-sweep", "Expert mixture weights over interpolation ratios");
  sweep->add_option("--checkpoint", es_checkpoint, "Checkpoint (fresh model if omitted)");
  sweep->add_option("--preset", es_preset, "Preset for a fresh model")->check(CLI::IsMember({"desk", "paper"}));
  sweep->add_option("--seed", es_seed, "Seed for a fresh model");
  sweep->add_option("--ratio-min", es_lo, "Smallest ratio GSD_m / GSD_target");
  sweep->add_option("--ratio-max", es_hi, "Largest ratio");
  sweep->add_option("--points", es_points, "Grid points");
  sweep->add_option("--out", es_out, "CSV output (stdout if omitted)");

  // corpus-config
  std::string cc_in, cc_out;
  std::size_t cc_samples = 1000;
  std::uint64_t cc_seed = 20240101;
  auto *corpus_cmd = app.add_subcommand("corpus-config", "Write a corpus config with frozen normalization");
  corpus_cmd->add_option("--config", cc_in, "Input dataset declarations (built-in if omitted)");
  corpus_cmd->add_option("--samples", cc_samples, "Samples per dataset for the statistics");
  corpus_cmd->add_option("--seed", cc_seed, "Seed");
  corpus_cmd->add_option("--out", cc_out, "Output path")->required();

  CLI11_PARSE(app, argc, argv);

  if (*pretrain) {
    return guarded([&] {
      run.validate();
      const CorpusConfig corpus = load_corpus(run.corpus_path);
      ensure_writable(run.checkpoint_path, false);
      ensure_writable(run.metrics_path, true);
      MetricsWriter metrics;
      if (!run.metrics_path.empty()) metrics = MetricsWriter(run.metrics_path);
      Ramen<float> model(ModelConfig::from_preset(run.preset), run.seed);
      auto report = [&](const StepRecord &r) {
        metrics.write(r);
        std::cout << r.to_json().dump() << '\n';
      };
      TrainSummary summary;
      if (overfit_mode) {
        summary = overfit(model, corpus, two_dataset_batch(corpus, run.seed), overfit_steps,
                          overfit_warmup, run.base_lr, report);
        if (!run.checkpoint_path.empty()) save_checkpoint(model, run.checkpoint_path);
      } else {
        summary = ramen::pretrain(model, corpus, run, report);
      }
      std::cerr << "initial loss " << summary.initial_loss() << ", final loss "
                << summary.final_loss() << '\n';
      return 0;
    });
  }

  if (*encode) {
    return guarded([&] {
      const Ramen<float> model = load_model<float>(enc_checkpoint);
      const CorpusConfig corpus = load_corpus(enc_config);
      const DatasetSpec &spec = find_dataset(corpus, enc_dataset);
      std::vector<std::size_t> subset;
      if (enc_modalities.empty()) {
        for (std::size_t m = 0; m < spec.modalities.size(); ++m) subset.push_back(m);
      } else {
        std::stringstream ss(enc_modalities);
        std::string name;
        while (std::getline(ss, name, ',')) {
          std::size_t m = 0;
          while (m < spec.modalities.size() && spec.modalities[m].name != name) ++m;
          if (m == spec.modalities.size()) throw ConfigError("dataset " + spec.name + " has no modality " + name);
          subset.push_back(m);
        }
      }
      const auto sample = standardize(generate_sample(spec, enc_seed), spec, corpus.normalization);
      NoGradGuard guard;
      const auto grids = model.encode_features(to_model_inputs<float>(spec, sample, subset), enc_gsd);
      save_feature_maps(grids, enc_out,
                        {{"dataset", spec.name}, {"seed", enc_seed}, {"gsd_target", enc_gsd}});
      for (const auto &g : grids)
        std::cout << g.name << ' ' << g.features.dim(0) << 'x' << g.features.dim(1) << 'x'
                  << g.features.dim(2) << '\n';
      return 0;
    });
  }

  if (*gradcheck) {
    return guarded([&] {
      const auto report = run_gradcheck_suite(ModelConfig::from_preset(gc_preset), gc);
      report.print(std::cout);
      std::cout << (report.passed() ? "all checks passed" : "gradient check FAILED") << '\n';
      return report.passed() ? 0 : 1;
    });
  }

  if (*flops) {
    return guarded([&] {
      const CorpusConfig corpus = load_corpus(fl_config);
      const DatasetSpec &spec = find_dataset(corpus, fl_dataset);
      std::vector<TileModality> tile;
      for (const auto &m : spec.modalities)
        tile.push_back({m.tile_size, m.tile_size, m.gsd_native, m.channels.size()});
      const auto targets = fl_targets.empty() ? spec.gsd_grid() : parse_list(fl_targets);
      const auto rows = cost_table(ModelConfig::from_preset(fl_preset), tile, targets);
      if (fl_out.empty()) {
        write_cost_csv(std::cout, rows);
      } else {
        std::ofstream os(fl_out);
        if (!os) throw ConfigError("cannot write " + fl_out);
        write_cost_csv(os, rows);
      }
      return 0;
    });
  }

  if (*sweep) {
    return guarded([&] {
      const Ramen<float> model = es_checkpoint.empty()
                                     ? Ramen<float>(ModelConfig::from_preset(es_preset), es_seed)
                                     : load_model<float>(es_checkpoint);
      const auto rows = expert_sweep(model.resampler(), log_spaced_ratios(es_lo, es_hi, es_points));
      if (es_out.empty()) {
        write_expert_sweep_csv(std::cout, rows);
      } else {
        std::ofstream os(es_out);
        if (!os) throw ConfigError("cannot write " + es_out);
        write_expert_sweep_csv(os, rows);
      }
      return 0;
    });
  }

  if (*corpus_cmd) {
    return guarded([&] {
      CorpusConfig cfg;
      cfg.datasets = cc_in.empty() ? builtin_datasets() : load_corpus_config(cc_in).datasets;
      cfg.validate();
      cfg.normalization = compute_normalization(cfg.datasets, cc_samples, cc_seed);
      save_corpus_config(cfg, cc_out);
      std::cout << "wrote " << cc_out << '\n';
      return 0;
    });
  }
  return 0;
}
