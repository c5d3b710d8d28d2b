#pragma once

#include <algorithm>
#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "ramen/numerics/nn.hpp"

namespace testing_support {

inline ramen::Tensor<double> random_tensor(ramen::Shape s, ramen::Rng &rng, bool grad = false,
                                           double stddev = 1.0) {
  std::vector<double> v(ramen::numel(s));
  for (auto &x : v) x = rng.normal(0.0, stddev);
  return ramen::Tensor<double>(std::move(s), std::move(v), grad);
}

/// Overwrites a leaf in place with normal noise.
template <typename S> void randomize(ramen::Tensor<S> t, ramen::Rng &rng, double stddev) {
  for (auto &v : t.mutable_data()) v = static_cast<S>(rng.normal(0.0, stddev));
}

/// Bilinear sample of a row-major h x w image at source coordinates (sy, sx),
/// clamped to the pixel-center hull.
inline double ref_bilinear(const double *img, std::size_t h, std::size_t w, double sy, double sx) {
  sy = std::clamp(sy, 0.0, static_cast<double>(h - 1));
  sx = std::clamp(sx, 0.0, static_cast<double>(w - 1));
  const auto y0 = static_cast<std::size_t>(sy), x0 = static_cast<std::size_t>(sx);
  const std::size_t y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
  const double fy = sy - static_cast<double>(y0), fx = sx - static_cast<double>(x0);
  auto at = [&](std::size_t y, std::size_t x) { return img[y * w + x]; };
  return (1 - fy) * ((1 - fx) * at(y0, x0) + fx * at(y0, x1)) +
         fy * ((1 - fx) * at(y1, x0) + fx * at(y1, x1));
}

/// Resizes every trailing h x w plane of `in` with half-pixel centers.
inline std::vector<double> ref_resize(const std::vector<double> &in, std::size_t planes,
                                      std::size_t h, std::size_t w, std::size_t oh,
                                      std::size_t ow) {
  std::vector<double> out(planes * oh * ow);
  for (std::size_t p = 0; p < planes; ++p)
    for (std::size_t i = 0; i < oh; ++i)
      for (std::size_t j = 0; j < ow; ++j) {
        const double sy = (static_cast<double>(i) + 0.5) * static_cast<double>(h) / oh - 0.5;
        const double sx = (static_cast<double>(j) + 0.5) * static_cast<double>(w) / ow - 0.5;
        out[(p * oh + i) * ow + j] = ref_bilinear(in.data() + p * h * w, h, w, sy, sx);
      }
  return out;
}

struct CommandResult {
  int status = -1;
  std::string output;
};

/// Runs a shell command, capturing stdout and stderr.
inline CommandResult run(const std::string &command) {
  CommandResult r;
  FILE *pipe = popen((command + " 2>&1").c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.output.append(buf.data(), n);
  const int raw = pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

inline std::filesystem::path scratch_dir(const std::string &name) {
  auto dir = std::filesystem::temp_directory_path() / ("ramen_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

} // namespace testing_support
