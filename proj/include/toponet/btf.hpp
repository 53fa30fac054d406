#pragma once

// Forward-only reference of boundary-aware RGB-D feature fusion:
//
//   attention  A = sigmoid(gap(relu(norm(conv(concat[D, R])))))   per channel
//   primary    F^ = R*A + D*A
//   boundary   M = F^ - avg_pool_3x3(F^)
//   output     F = F^ + conv(norm(relu(concat[M, F_prev])))
//
// The operator order inside each expression is kept exactly as written
// above; note the aggregation branch applies relu before norm before conv.
// Normalisation is inference-mode batch norm with caller-supplied statistics.

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "toponet/error.hpp"
#include "toponet/grid.hpp"

namespace toponet {

/// 3x3 convolution, stride 1, zero padding; kernel laid out [out][in][3][3].
struct Conv3x3 {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::vector<double> kernel;
  std::vector<double> bias;

  static Conv3x3 zeros(std::size_t in, std::size_t out) {
    return {in, out, std::vector<double>(out * in * 9, 0.0), std::vector<double>(out, 0.0)};
  }

  double& weight(std::size_t o, std::size_t i, int dr, int dc) {
    return kernel[((o * in_channels + i) * 3 + static_cast<std::size_t>(dr + 1)) * 3 + static_cast<std::size_t>(dc + 1)];
  }
  double weight(std::size_t o, std::size_t i, int dr, int dc) const {
    return kernel[((o * in_channels + i) * 3 + static_cast<std::size_t>(dr + 1)) * 3 + static_cast<std::size_t>(dc + 1)];
  }

  void validate(const char* name) const {
    if (kernel.size() != out_channels * in_channels * 9 || bias.size() != out_channels) {
      throw ShapeError(std::string(name) + ": kernel/bias size inconsistent with " +
                       std::to_string(in_channels) + "->" + std::to_string(out_channels) + " channels");
    }
  }

  FeatureMap apply(const FeatureMap& x) const {
    validate("conv");
    if (x.channels() != in_channels) {
      throw ShapeError("conv expects " + std::to_string(in_channels) + " input channels, got " +
                       std::to_string(x.channels()));
    }
    const auto h = static_cast<std::ptrdiff_t>(x.height()), w = static_cast<std::ptrdiff_t>(x.width());
    std::vector<double> out(out_channels * x.plane_size());
    for (std::size_t o = 0; o < out_channels; ++o) {
      for (std::ptrdiff_t r = 0; r < h; ++r) {
        for (std::ptrdiff_t c = 0; c < w; ++c) {
          double acc = bias[o];
          for (std::size_t i = 0; i < in_channels; ++i) {
            for (int dr = -1; dr <= 1; ++dr) {
              const auto rr = r + dr;
              if (rr < 0 || rr >= h) continue;
              for (int dc = -1; dc <= 1; ++dc) {
                const auto cc = c + dc;
                if (cc < 0 || cc >= w) continue;
                acc += weight(o, i, dr, dc) *
                       x(i, static_cast<std::size_t>(rr), static_cast<std::size_t>(cc));
              }
            }
          }
          out[(o * x.height() + static_cast<std::size_t>(r)) * x.width() + static_cast<std::size_t>(c)] = acc;
        }
      }
    }
    return {out_channels, x.height(), x.width(), std::move(out)};
  }
};

/// y = gamma * (x - mean) / sqrt(var + eps) + beta, per channel.
struct AffineNorm {
  std::vector<double> gamma;
  std::vector<double> beta;
  std::vector<double> mean;
  std::vector<double> var;
  double eps = 1e-5;

  static AffineNorm identity(std::size_t channels) {
    return {std::vector<double>(channels, 1.0), std::vector<double>(channels, 0.0),
            std::vector<double>(channels, 0.0), std::vector<double>(channels, 1.0), 0.0};
  }

  std::size_t channels() const noexcept { return gamma.size(); }

  void validate(const char* name) const {
    const std::size_t n = gamma.size();
    if (beta.size() != n || mean.size() != n || var.size() != n) {
      throw ShapeError(std::string(name) + ": normalisation parameter sizes differ");
    }
    for (double v : var) {
      if (!(v > 0.0)) throw RangeError(std::string(name) + ": variance must be > 0");
    }
    if (!(eps >= 0.0)) throw RangeError(std::string(name) + ": eps must be >= 0");
  }

  FeatureMap apply(const FeatureMap& x) const {
    validate("norm");
    if (x.channels() != channels()) throw ShapeError("norm channel count mismatch");
    std::vector<double> out(x.values());
    const std::size_t n = x.plane_size();
    for (std::size_t c = 0; c < channels(); ++c) {
      const double scale = gamma[c] / std::sqrt(var[c] + eps);
      for (std::size_t i = 0; i < n; ++i) out[c * n + i] = scale * (out[c * n + i] - mean[c]) + beta[c];
    }
    return {x.channels(), x.height(), x.width(), std::move(out)};
  }
};

struct BtfWeights {
  std::size_t channels = 0;
  Conv3x3 fusion_conv;         // 2C -> C
  AffineNorm fusion_norm;      // C
  AffineNorm aggregation_norm; // 2C
  Conv3x3 aggregation_conv;    // 2C -> C

  /// Zero convolutions and identity normalisation.
  static BtfWeights neutral(std::size_t channels) {
    return {channels, Conv3x3::zeros(2 * channels, channels), AffineNorm::identity(channels),
            AffineNorm::identity(2 * channels), Conv3x3::zeros(2 * channels, channels)};
  }

  void validate() const {
    fusion_conv.validate("fusion_conv");
    aggregation_conv.validate("aggregation_conv");
    fusion_norm.validate("fusion_norm");
    aggregation_norm.validate("aggregation_norm");
    const std::size_t c = channels;
    if (fusion_conv.in_channels != 2 * c || fusion_conv.out_channels != c ||
        aggregation_conv.in_channels != 2 * c || aggregation_conv.out_channels != c ||
        fusion_norm.channels() != c || aggregation_norm.channels() != 2 * c) {
      throw ShapeError("BTF weights inconsistent with " + std::to_string(c) + " channels");
    }
  }
};

inline FeatureMap concat_channels(const FeatureMap& a, const FeatureMap& b) {
  if (a.height() != b.height() || a.width() != b.width()) throw ShapeError("concat: spatial shapes differ");
  std::vector<double> out(a.values());
  out.insert(out.end(), b.values().begin(), b.values().end());
  return {a.channels() + b.channels(), a.height(), a.width(), std::move(out)};
}

inline FeatureMap relu(const FeatureMap& x) {
  std::vector<double> out(x.values());
  for (double& v : out) v = v > 0.0 ? v : 0.0;
  return {x.channels(), x.height(), x.width(), std::move(out)};
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// sigmoid(global average pool(relu(x))), one value per channel.
inline std::vector<double> attention_from_activations(const FeatureMap& x) {
  std::vector<double> a(x.channels());
  const std::size_t n = x.plane_size();
  for (std::size_t c = 0; c < x.channels(); ++c) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = x.values()[c * n + i];
      sum += v > 0.0 ? v : 0.0;
    }
    a[c] = sigmoid(sum / static_cast<double>(n));
  }
  return a;
}

inline void require_pair(const FeatureMap& rgb, const FeatureMap& depth, const char* what) {
  if (!rgb.same_shape(depth)) throw ShapeError(std::string(what) + ": RGB and depth features differ in shape");
}

inline std::vector<double> fused_attention(const FeatureMap& rgb, const FeatureMap& depth, const BtfWeights& w) {
  require_pair(rgb, depth, "fused_attention");
  w.validate();
  if (rgb.channels() != w.channels) throw ShapeError("fused_attention: weights expect " + std::to_string(w.channels) + " channels");
  // depth first in the concatenation
  const FeatureMap merged = w.fusion_norm.apply(w.fusion_conv.apply(concat_channels(depth, rgb)));
  return attention_from_activations(merged);
}

inline FeatureMap primary_fusion(const FeatureMap& rgb, const FeatureMap& depth, const std::vector<double>& attention) {
  require_pair(rgb, depth, "primary_fusion");
  if (attention.size() != rgb.channels()) throw ShapeError("primary_fusion: attention size != channel count");
  std::vector<double> out(rgb.values().size());
  const std::size_t n = rgb.plane_size();
  for (std::size_t c = 0; c < rgb.channels(); ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t k = c * n + i;
      out[k] = rgb.values()[k] * attention[c] + depth.values()[k] * attention[c];
    }
  }
  return {rgb.channels(), rgb.height(), rgb.width(), std::move(out)};
}

inline FeatureMap boundary_map(const FeatureMap& fused) {
  if (fused.channels() == 0 || fused.plane_size() == 0) throw ShapeError("boundary_map: empty feature map");
  std::vector<double> out;
  out.reserve(fused.values().size());
  for (std::size_t c = 0; c < fused.channels(); ++c) {
    const RealGrid ch = fused.channel(c);
    const RealGrid pooled = avg_pool_3x3(ch);
    for (std::size_t i = 0; i < ch.size(); ++i) out.push_back(ch[i] - pooled[i]);
  }
  return {fused.channels(), fused.height(), fused.width(), std::move(out)};
}

/// One fusion stage. Without `previous` (first stage) the aggregation
/// branch is disabled and the output is the primary fused feature.
inline FeatureMap btf_forward(const FeatureMap& rgb, const FeatureMap& depth,
                              const std::optional<FeatureMap>& previous, const BtfWeights& w) {
  const auto attention = fused_attention(rgb, depth, w);
  const FeatureMap fused = primary_fusion(rgb, depth, attention);
  if (!previous) return fused;
  if (!previous->same_shape(fused)) throw ShapeError("btf_forward: previous stage output has a different shape");
  const FeatureMap agg =
      w.aggregation_conv.apply(w.aggregation_norm.apply(relu(concat_channels(boundary_map(fused), *previous))));
  std::vector<double> out(fused.values());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += agg.values()[i];
  return {fused.channels(), fused.height(), fused.width(), std::move(out)};
}

}  // namespace toponet
