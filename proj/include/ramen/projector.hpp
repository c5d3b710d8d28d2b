#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "ramen/encodings.hpp"
#include "ramen/numerics/nn.hpp"
#include "ramen/numerics/ops.hpp"

namespace ramen {

/// Channel-to-latent map M [C x D] together with the channels it was built for.
template <typename S> struct ProjectionMatrix {
  Tensor<S> matrix;
  std::vector<ChannelDescriptor> channels;

  std::size_t num_channels() const { return matrix.dim(0); }
  std::size_t dim() const { return matrix.dim(1); }
};

/// x [T x C x H x W] -> [T x D x H x W]; out(t,d,h,w) = sum_c x(t,c,h,w) M(c,d).
template <typename S> Tensor<S> project(const Tensor<S> &x, const Tensor<S> &m) {
  if (x.rank() != 4 || m.rank() != 2 || x.dim(1) != m.dim(0))
    throw DimensionError("project: input " + to_string(x.shape()) +
                         " does not match projection matrix " + to_string(m.shape()));
  const std::size_t t = x.dim(0), h = x.dim(2), w = x.dim(3), d = m.dim(1);
  Tensor<S> pixels = reshape(permute(x, {0, 2, 3, 1}), {t * h * w, x.dim(1)});
  return permute(reshape(matmul(pixels, m), {t, h, w, d}), {0, 3, 1, 2});
}

template <typename S> Tensor<S> project(const Tensor<S> &x, const ProjectionMatrix<S> &m) {
  return project(x, m.matrix);
}

/// y [T x D x H x W] -> [T x C x H x W] through M transposed.
template <typename S>
Tensor<S> reconstruct_channels(const Tensor<S> &y, const Tensor<S> &m) {
  if (y.rank() != 4 || m.rank() != 2 || y.dim(1) != m.dim(1))
    throw DimensionError("reconstruct_channels: latent " + to_string(y.shape()) +
                         " does not match projection matrix " + to_string(m.shape()));
  const std::size_t t = y.dim(0), h = y.dim(2), w = y.dim(3), c = m.dim(0);
  Tensor<S> pixels = reshape(permute(y, {0, 2, 3, 1}), {t * h * w, y.dim(1)});
  return permute(reshape(matmul(pixels, transpose(m)), {t, h, w, c}), {0, 3, 1, 2});
}

template <typename S>
Tensor<S> reconstruct_channels(const Tensor<S> &y, const ProjectionMatrix<S> &m) {
  return reconstruct_channels(y, m.matrix);
}

/// Hypernetwork for one modality type: maps each channel's D-dim encoding to
/// one row of the projection matrix.
template <typename S> class ChannelProjector {
public:
  ChannelProjector() = default;
  ChannelProjector(ChannelKind kind, std::size_t dim, std::size_t hidden, Rng &rng)
      : kind_(kind), mlp_(dim, hidden, dim, rng) {}

  ChannelKind kind() const { return kind_; }

  /// encodings [C x D] -> M [C x D]
  Tensor<S> operator()(const Tensor<S> &encodings) const { return mlp_(encodings); }

  void collect(ParameterSet<S> &set, const std::string &prefix) const {
    mlp_.collect(set, prefix + ".mlp");
  }

private:
  ChannelKind kind_ = ChannelKind::optical;
  Mlp<S> mlp_;
};

/// The three projector instances (optical, radar, elevation) and the shared
/// categorical embedding registry.
template <typename S> class ProjectorBank {
public:
  ProjectorBank() = default;
  ProjectorBank(const EncodingConfig &enc, std::size_t hidden, Rng &rng)
      : enc_(enc), embedding_(enc.dim, rng),
        projectors_{ChannelProjector<S>(ChannelKind::optical, enc.dim, hidden, rng),
                    ChannelProjector<S>(ChannelKind::radar, enc.dim, hidden, rng),
                    ChannelProjector<S>(ChannelKind::elevation, enc.dim, hidden, rng)} {}

  const CategoricalEmbedding<S> &embedding() const { return embedding_; }
  const ChannelProjector<S> &projector(ChannelKind kind) const {
    return projectors_[static_cast<std::size_t>(kind)];
  }

  /// Per-channel encodings [C x D]: wavelength sinusoids or learned rows.
  Tensor<S> channel_encodings(const std::vector<ChannelDescriptor> &channels) const {
    const ChannelKind kind = homogeneous_kind(channels);
    if (kind == ChannelKind::optical) {
      std::vector<std::vector<double>> rows;
      for (const auto &c : channels) rows.push_back(wavelength_pe(c.wavelength_nm(), enc_.dim, enc_.base));
      return encoding_rows<S>(rows, enc_.dim);
    }
    std::vector<ChannelCategory> ids;
    for (const auto &c : channels) ids.push_back(c.category());
    return embedding_.rows(ids);
  }

  ProjectionMatrix<S> build_matrix(const std::vector<ChannelDescriptor> &channels) const {
    const ChannelKind kind = homogeneous_kind(channels);
    return {projector(kind)(channel_encodings(channels)), channels};
  }

  void collect(ParameterSet<S> &set, const std::string &prefix) const {
    embedding_.collect(set, prefix + ".channel_embedding");
    for (const auto &p : projectors_)
      p.collect(set, prefix + "." + std::string(to_string(p.kind())));
  }

  static ChannelKind homogeneous_kind(const std::vector<ChannelDescriptor> &channels) {
    if (channels.empty()) throw ArgumentError("projection needs at least one channel");
    const ChannelKind kind = channels.front().kind();
    for (const auto &c : channels)
      if (c.kind() != kind)
        throw ArgumentError("mixed channel kinds in one modality: " +
                            std::string(to_string(kind)) + " and " +
                            std::string(to_string(c.kind())));
    return kind;
  }

private:
  EncodingConfig enc_;
  CategoricalEmbedding<S> embedding_;
  std::array<ChannelProjector<S>, 3> projectors_;
};

} // namespace ramen
