#pragma once

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "ramen/checkpoint.hpp"
#include "ramen/corpus.hpp"
#include "ramen/model.hpp"
#include "ramen/numerics/optim.hpp"

namespace ramen {

/// Standardized rasters of the chosen modalities as model inputs.
template <typename S>
std::vector<ModalityInput<S>> to_model_inputs(const DatasetSpec &spec,
                                              const MultimodalSample &sample,
                                              const std::vector<std::size_t> &subset) {
  std::vector<ModalityInput<S>> out;
  for (std::size_t m : subset) {
    const ModalitySpec &ms = spec.modalities.at(m);
    const RasterStack &r = sample.modalities.at(m);
    std::vector<S> values(r.values.begin(), r.values.end());
    out.push_back({ms.name, ms.channels, ms.gsd_native,
                   Tensor<S>({r.t, r.c, r.h, r.w}, std::move(values)), r.days});
  }
  return out;
}

template <typename S>
std::vector<ModalityInput<S>> to_model_inputs(const DatasetSpec &spec,
                                              const MultimodalSample &sample) {
  std::vector<std::size_t> all(spec.modalities.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return to_model_inputs<S>(spec, sample, all);
}

struct RunConfig {
  std::string corpus_path;  // empty: built-in corpus
  std::string preset = "desk";
  std::size_t epochs = 1;
  std::size_t steps_per_epoch = 100;
  double base_lr = 1.5e-4;
  std::size_t warmup_epochs = 0;
  std::uint64_t seed = 0;
  std::string checkpoint_path; // empty: no checkpoints
  std::string metrics_path;    // empty: no metrics file
  std::size_t checkpoint_every = 0; // steps; 0: only at the end

  std::size_t total_steps() const { return epochs * steps_per_epoch; }
  std::size_t warmup_steps() const { return warmup_epochs * steps_per_epoch; }

  void validate() const {
    if (epochs == 0 || steps_per_epoch == 0) throw ArgumentError("run config: counts must be positive");
    if (warmup_epochs >= epochs && warmup_epochs != 0)
      throw ArgumentError("run config: warmup epochs must be fewer than epochs");
    if (!(base_lr > 0.0)) throw ArgumentError("run config: learning rate must be positive");
  }
};

struct StepRecord {
  std::size_t step = 0;
  std::size_t epoch = 0;
  std::string dataset;
  std::vector<std::string> modalities;
  double gsd_target = 0.0;
  std::size_t tokens = 0;
  double loss = 0.0;
  double lr = 0.0;
  bool empty_mask = false;

  nlohmann::json to_json() const {
    return {{"step", step},       {"epoch", epoch},           {"dataset", dataset},
            {"modalities", modalities}, {"gsd_target", gsd_target}, {"tokens", tokens},
            {"loss", loss},       {"lr", lr},                 {"empty_mask", empty_mask}};
  }
};

/// One training example: a dataset, a modality subset, a target GSD, samples
/// and one mask seed per sample.
struct Batch {
  std::size_t dataset = 0;
  std::vector<std::size_t> modalities;
  double gsd_target = 1.0;
  std::vector<std::uint64_t> sample_seeds;
  std::vector<std::uint64_t> mask_seeds;
};

inline Batch draw_batch(const std::vector<DatasetSpec> &datasets, std::uint64_t seed,
                        std::size_t step) {
  const std::uint64_t s = mix_seed(seed, step);
  const Iteration it = sample_iteration(datasets, s);
  Batch b{it.dataset, it.modalities, it.gsd_target, {}, {}};
  for (std::size_t i = 0; i < datasets[it.dataset].batch_size; ++i) {
    b.sample_seeds.push_back(mix_seed(s, 2 * i + 1));
    b.mask_seeds.push_back(mix_seed(s, 2 * i + 2));
  }
  return b;
}

template <typename S> struct BatchLoss {
  Tensor<S> loss;
  std::size_t tokens = 0;
  bool empty_mask = true;
};

/// Mean of per-sample masked losses over a batch.
template <typename S>
BatchLoss<S> batch_loss(const Ramen<S> &model, const CorpusConfig &corpus, const Batch &batch) {
  const DatasetSpec &spec = corpus.datasets.at(batch.dataset);
  BatchLoss<S> out;
  std::optional<Tensor<S>> total;
  for (std::size_t i = 0; i < batch.sample_seeds.size(); ++i) {
    const auto sample =
        standardize(generate_sample(spec, batch.sample_seeds[i]), spec, corpus.normalization);
    const auto inputs = to_model_inputs<S>(spec, sample, batch.modalities);
    auto r = model.forward(inputs, batch.gsd_target, batch.mask_seeds[i]);
    out.tokens = r.tokens;
    out.empty_mask = out.empty_mask && r.empty_mask;
    total = total ? add(*total, r.loss) : r.loss;
  }
  out.loss = scale(*total, S(1) / static_cast<S>(batch.sample_seeds.size()));
  return out;
}

struct TrainSummary {
  std::vector<StepRecord> records;
  double initial_loss() const { return records.empty() ? 0.0 : records.front().loss; }
  double final_loss() const { return records.empty() ? 0.0 : records.back().loss; }
};

/// Masked-autoencoding pretraining with linear warmup and cosine decay.
///
/// `next_batch(step)` supplies the batch of each step. Every step is reported
/// to `on_step`; checkpoints go to cfg.checkpoint_path.
template <typename S>
TrainSummary train(Ramen<S> &model, const CorpusConfig &corpus, const RunConfig &cfg,
                   const std::function<Batch(std::size_t)> &next_batch,
                   const std::function<void(const StepRecord &)> &on_step = {}) {
  cfg.validate();
  AdamW<S> opt(model.parameters());
  TrainSummary summary;
  const std::size_t total = cfg.total_steps();
  for (std::size_t step = 0; step < total; ++step) {
    const Batch batch = next_batch(step);
    const double lr = warmup_cosine_lr(step, total, cfg.warmup_steps(), cfg.base_lr);
    opt.zero_grad();
    BatchLoss<S> bl = batch_loss(model, corpus, batch);
    if (!bl.empty_mask) {
      backward(bl.loss);
      opt.step(lr);
    }
    StepRecord rec;
    rec.step = step;
    rec.epoch = step / cfg.steps_per_epoch;
    const DatasetSpec &spec = corpus.datasets.at(batch.dataset);
    rec.dataset = spec.name;
    for (std::size_t m : batch.modalities) rec.modalities.push_back(spec.modalities[m].name);
    rec.gsd_target = batch.gsd_target;
    rec.tokens = bl.tokens;
    rec.loss = static_cast<double>(bl.loss.item());
    rec.lr = lr;
    rec.empty_mask = bl.empty_mask;
    if (on_step) on_step(rec);
    summary.records.push_back(std::move(rec));
    const bool last = step + 1 == total;
    if (!cfg.checkpoint_path.empty() &&
        (last || (cfg.checkpoint_every && (step + 1) % cfg.checkpoint_every == 0)))
      save_checkpoint(model, cfg.checkpoint_path, {{"step", step + 1}, {"seed", cfg.seed}});
  }
  return summary;
}

/// Appends one JSON object per line.
class MetricsWriter {
public:
  MetricsWriter() = default;
  explicit MetricsWriter(const std::string &path) : out_(path, std::ios::app) {
    if (!out_) throw ConfigError("cannot open metrics file: " + path);
  }
  void write(const StepRecord &r) {
    if (!out_.is_open()) return;
    out_ << r.to_json().dump() << '\n';
    out_.flush();
  }

private:
  std::ofstream out_;
};

/// Pretraining over the corpus with the random multimodal sampling strategy.
template <typename S>
TrainSummary pretrain(Ramen<S> &model, const CorpusConfig &corpus, const RunConfig &cfg,
                      const std::function<void(const StepRecord &)> &on_step = {}) {
  corpus.validate();
  return train<S>(
      model, corpus, cfg,
      [&](std::size_t step) { return draw_batch(corpus.datasets, cfg.seed, step); }, on_step);
}

/// Fixed batch built from two datasets: every step sees the same samples,
/// the same target GSDs and the same masks.
struct FixedBatch {
  std::vector<Batch> parts;
};

inline FixedBatch two_dataset_batch(const CorpusConfig &corpus, std::uint64_t seed,
                                    std::size_t first = 0, std::size_t second = 2) {
  FixedBatch fb;
  for (std::size_t d : {first, second}) {
    const DatasetSpec &spec = corpus.datasets.at(d);
    Batch b;
    b.dataset = d;
    for (std::size_t m = 0; m < spec.modalities.size(); ++m) b.modalities.push_back(m);
    const auto grid = spec.gsd_grid();
    b.gsd_target = grid[grid.size() / 2];
    b.sample_seeds = {mix_seed(seed, 100 + d)};
    b.mask_seeds = {mix_seed(seed, 200 + d)};
    fb.parts.push_back(std::move(b));
  }
  return fb;
}

/// Overfits the fixed batch; the loss of a step is the mean over its parts.
template <typename S>
TrainSummary overfit(Ramen<S> &model, const CorpusConfig &corpus, const FixedBatch &fixed,
                     std::size_t steps, std::size_t warmup, double lr_base,
                     const std::function<void(const StepRecord &)> &on_step = {}) {
  AdamW<S> opt(model.parameters());
  TrainSummary summary;
  for (std::size_t step = 0; step < steps; ++step) {
    const double lr = warmup_cosine_lr(step, steps, warmup, lr_base);
    opt.zero_grad();
    std::optional<Tensor<S>> total;
    std::size_t tokens = 0;
    for (const auto &part : fixed.parts) {
      auto bl = batch_loss(model, corpus, part);
      tokens += bl.tokens;
      total = total ? add(*total, bl.loss) : bl.loss;
    }
    Tensor<S> loss = scale(*total, S(1) / static_cast<S>(fixed.parts.size()));
    backward(loss);
    opt.step(lr);
    StepRecord rec;
    rec.step = step;
    rec.dataset = "fixed";
    rec.tokens = tokens;
    rec.loss = static_cast<double>(loss.item());
    rec.lr = lr;
    if (on_step) on_step(rec);
    summary.records.push_back(std::move(rec));
  }
  return summary;
}

/// Trailing moving average with window `w` (shorter at the start).
inline std::vector<double> moving_average(const std::vector<double> &x, std::size_t w) {
  std::vector<double> out(x.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    acc += x[i];
    if (i >= w) acc -= x[i - w];
    out[i] = acc / static_cast<double>(std::min(i + 1, w));
  }
  return out;
}

} // namespace ramen
