#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "kinvid/media_io.hpp"

namespace kinvid {

/// Dense H x W x C activation, stored channel-major: data[(c * H + y) * W + x].
template <typename Scalar>
struct Tensor {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  int height = 0;
  int width = 0;
  int channels = 0;
  Vector data;

  Tensor() = default;
  Tensor(int height, int width, int channels)
      : height(height), width(width), channels(channels),
        data(Vector::Zero(static_cast<Eigen::Index>(height) * width * channels)) {}

  Scalar& operator()(int y, int x, int c) { return data[(static_cast<Eigen::Index>(c) * height + y) * width + x]; }
  Scalar operator()(int y, int x, int c) const {
    return data[(static_cast<Eigen::Index>(c) * height + y) * width + x];
  }

  /// Channel c as an H x W row-major map.
  auto plane(int c) const {
    return Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        data.data() + static_cast<Eigen::Index>(c) * height * width, height, width);
  }

  template <typename Other>
  Tensor<Other> cast() const {
    Tensor<Other> out;
    out.height = height;
    out.width = width;
    out.channels = channels;
    out.data = data.template cast<Other>();
    return out;
  }
};

using ActivationTensor = Tensor<float>;

enum class LayerType : std::uint8_t { input = 0, conv = 1, relu = 2, mpool = 3, softmx = 4 };

std::string to_string(LayerType t);

/// One row of the layer table. For the input layer, `support` is the input side length and
/// `num_filts` the input channel count.
struct LayerSpec {
  int index = 0;
  LayerType type = LayerType::input;
  std::string name;
  std::uint32_t support = 0;
  std::uint32_t filt_dim = 0;
  std::uint32_t num_filts = 0;
  std::uint32_t stride = 1;
  std::uint32_t pad = 0;

  bool operator==(const LayerSpec&) const = default;
};

/// Weights for one conv layer: num_filts x (filt_dim * support * support), columns ordered [in][ky][kx].
struct ConvParams {
  Eigen::MatrixXf weights;
  Eigen::VectorXf bias;
};

struct NetworkWeights {
  std::array<float, 3> mean{0.f, 0.f, 0.f};
  std::vector<LayerSpec> layers;
  std::vector<ConvParams> params;  // parallel to layers; empty for non-conv layers

  const LayerSpec& input() const { return layers.front(); }
  int find(const std::string& name) const;
};

struct Shape {
  int height = 0;
  int width = 0;
  int channels = 0;
  bool operator==(const Shape&) const = default;
};

/// The 38-row VGG-face table (224 x 224 x 3 input through "prob").
const std::vector<LayerSpec>& vgg_face_layout();

/// Output shape of every layer. Throws on chain-incompatible or incomplete-pooling layouts.
std::vector<Shape> propagate_shapes(const std::vector<LayerSpec>& layers);

/// Chain check, plus a row-by-row check against the VGG-face table when the layer names match it.
void validate_layout(const std::vector<LayerSpec>& layers);

/// "VGGW1" little-endian file: header records only, conv payloads skipped.
NetworkWeights read_layout(const std::filesystem::path& path);
NetworkWeights load_weights(const std::filesystem::path& path);
void save_weights(const NetworkWeights& weights, const std::filesystem::path& path);

template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& in, const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& weights,
                      const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& bias, int support, int stride, int pad) {
  const int out_h = (in.height + 2 * pad - support) / stride + 1;
  const int out_w = (in.width + 2 * pad - support) / stride + 1;
  const int taps = in.channels * support * support;
  // im2col: one column per output location, rows ordered [in][ky][kx].
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> cols(taps, static_cast<Eigen::Index>(out_h) * out_w);
  for (int c = 0; c < in.channels; ++c)
    for (int ky = 0; ky < support; ++ky)
      for (int kx = 0; kx < support; ++kx) {
        const Eigen::Index row = (static_cast<Eigen::Index>(c) * support + ky) * support + kx;
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride - pad + ky;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * stride - pad + kx;
            const bool inside = iy >= 0 && iy < in.height && ix >= 0 && ix < in.width;
            cols(row, static_cast<Eigen::Index>(oy) * out_w + ox) = inside ? in(iy, ix, c) : Scalar(0);
          }
        }
      }
  Tensor<Scalar> out(out_h, out_w, static_cast<int>(weights.rows()));
  Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> result(
      out.data.data(), weights.rows(), static_cast<Eigen::Index>(out_h) * out_w);
  result.noalias() = weights * cols;
  result.colwise() += bias;
  return out;
}

template <typename Scalar>
Tensor<Scalar> relu(Tensor<Scalar> t) {
  t.data = t.data.cwiseMax(Scalar(0));
  return t;
}

template <typename Scalar>
Tensor<Scalar> max_pool(const Tensor<Scalar>& in, int support, int stride) {
  if (in.height < support || in.width < support || (in.height - support) % stride || (in.width - support) % stride)
    throw ValidationError("incomplete pooling window on a " + std::to_string(in.height) + "x" +
                          std::to_string(in.width) + " input");
  const int out_h = (in.height - support) / stride + 1;
  const int out_w = (in.width - support) / stride + 1;
  Tensor<Scalar> out(out_h, out_w, in.channels);
  for (int c = 0; c < in.channels; ++c)
    for (int y = 0; y < out_h; ++y)
      for (int x = 0; x < out_w; ++x)
        out(y, x, c) = in.plane(c).block(y * stride, x * stride, support, support).maxCoeff();
  return out;
}

/// Softmax across channels at every spatial location.
template <typename Scalar>
Tensor<Scalar> softmax(Tensor<Scalar> t) {
  for (int y = 0; y < t.height; ++y)
    for (int x = 0; x < t.width; ++x) {
      Scalar peak = t(y, x, 0);
      for (int c = 1; c < t.channels; ++c) peak = std::max(peak, t(y, x, c));
      Scalar total = 0;
      for (int c = 0; c < t.channels; ++c) total += (t(y, x, c) = std::exp(t(y, x, c) - peak));
      for (int c = 0; c < t.channels; ++c) t(y, x, c) /= total;
    }
  return t;
}

/// Called with each layer's spec and output during forward().
using LayerObserver = std::function<void(const LayerSpec&, const ActivationTensor&)>;

/// Runs layers in order and returns the output of `stop_at` (empty: the last layer).
ActivationTensor forward(const ActivationTensor& input, const NetworkWeights& weights, const std::string& stop_at,
                         const LayerObserver& observer = {});

/// Per-channel mean subtraction; the frame must match the network's input size and be RGB.
ActivationTensor preprocess(const Frame& frame, const NetworkWeights& weights);

/// Mean of forward(preprocess(frame), stop_at) over frames 0, stride, 2*stride, ... summed in order.
Eigen::VectorXd extract_fc7_video(const FaceVideo& video, const NetworkWeights& weights,
                                  const std::string& stop_at = "fc7", int frame_stride = 1);

struct LayerChecksum {
  std::string name;
  double mean = 0;
  double max = 0;
  double l2 = 0;
};

/// Mean, max and L2 norm of every layer's output for one input.
std::vector<LayerChecksum> layer_checksums(const ActivationTensor& input, const NetworkWeights& weights);

/// JSON {"layers": [{"name", "mean", "max", "l2"}, ...]}.
void write_checksums(const std::vector<LayerChecksum>& sums, const std::filesystem::path& path);
std::vector<LayerChecksum> read_checksums(const std::filesystem::path& path);

/// Human-readable mismatch descriptions; empty when every value agrees within `relative_tolerance`.
std::vector<std::string> compare_checksums(const std::vector<LayerChecksum>& reference,
                                           const std::vector<LayerChecksum>& actual,
                                           double relative_tolerance = 1e-4);

}  // namespace kinvid
