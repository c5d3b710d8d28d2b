#pragma once

#include <cstddef>
#include <ostream>
#include <vector>

#include "ramen/model.hpp"
#include "ramen/resampler.hpp"

namespace ramen {

/// Operation counts (2 ops per multiply-accumulate) of one encoder pass.
/// LayerNorm, softmax, GELU, bias and residual adds are not counted, nor is
/// the CLS token.
struct CostRow {
  double gsd_target = 0.0;
  std::size_t tokens = 0;
  double embed_ops = 0.0;          // channel projection + resampler kernel, linear in N
  double attn_quadratic_ops = 0.0; // QK^T and AV: 4 N^2 D per block
  double attn_linear_ops = 0.0;    // qkv and output projections: 8 N D^2 per block
  double mlp_ops = 0.0;            // 4 mlp_ratio N D^2 per block
  double total = 0.0;
};

/// Native raster extent of one modality of a tile.
struct TileModality {
  std::size_t height = 0, width = 0;
  double gsd = 1.0;
  std::size_t channels = 1;
};

inline std::size_t token_count(const std::vector<TileModality> &tile, double gsd_target) {
  std::size_t n = 0;
  for (const auto &m : tile) {
    const auto [h, w] = target_dims(m.height, m.width, m.gsd, gsd_target);
    n += h * w;
  }
  return n;
}

/// Encoder cost for N tokens whose embeddings see `channels` input channels
/// on average.
inline CostRow encoder_cost(const ModelConfig &cfg, std::size_t tokens, double channels = 1.0,
                            double gsd_target = 0.0) {
  if (tokens == 0) throw ArgumentError("cost model: token count must be positive");
  const double n = static_cast<double>(tokens), d = static_cast<double>(cfg.dim);
  const double depth = static_cast<double>(cfg.depth);
  CostRow row;
  row.gsd_target = gsd_target;
  row.tokens = tokens;
  row.embed_ops = 2.0 * n * d * (channels + d);
  row.attn_quadratic_ops = depth * 4.0 * n * n * d;
  row.attn_linear_ops = depth * 8.0 * n * d * d;
  row.mlp_ops = depth * 4.0 * static_cast<double>(cfg.mlp_ratio) * n * d * d;
  row.total = row.embed_ops + row.attn_quadratic_ops + row.attn_linear_ops + row.mlp_ops;
  return row;
}

inline std::vector<CostRow> cost_table(const ModelConfig &cfg, const std::vector<TileModality> &tile,
                                       const std::vector<double> &gsd_targets) {
  if (tile.empty()) throw ArgumentError("cost model: empty modality set");
  std::vector<CostRow> rows;
  for (double g : gsd_targets) {
    const std::size_t n = token_count(tile, g);
    double weighted = 0.0;
    for (const auto &m : tile) {
      const auto [h, w] = target_dims(m.height, m.width, m.gsd, g);
      weighted += static_cast<double>(h * w * m.channels);
    }
    rows.push_back(encoder_cost(cfg, n, weighted / static_cast<double>(n), g));
  }
  return rows;
}

inline void write_cost_csv(std::ostream &os, const std::vector<CostRow> &rows) {
  os << "gsd_target,tokens,embed_ops,attn_quadratic_ops,attn_linear_ops,mlp_ops,total_ops\n";
  os.precision(17);
  for (const auto &r : rows)
    os << r.gsd_target << ',' << r.tokens << ',' << r.embed_ops << ',' << r.attn_quadratic_ops
       << ',' << r.attn_linear_ops << ',' << r.mlp_ops << ',' << r.total << '\n';
}

} // namespace ramen
