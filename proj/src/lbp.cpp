#include <bit>
#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>

#include "kinvid/texture_coders.hpp"

namespace kinvid {

Histogram histogram(const CodeImage& image) {
  Histogram counts = Histogram::Zero(image.code_range);
  accumulate(image, counts);
  return counts;
}

void accumulate(const CodeImage& image, Histogram& counts) {
  if (counts.size() != static_cast<Eigen::Index>(image.code_range))
    throw std::invalid_argument("histogram length does not match code range");
  const auto v = image.valid();
  for (Eigen::Index y = 0; y < v.rows(); ++y)
    for (Eigen::Index x = 0; x < v.cols(); ++x) ++counts[v(y, x)];
}

int LbpParams::margin() const { return static_cast<int>(std::ceil(radius - 1e-9)); }

std::uint32_t LbpParams::code_range() const {
  if (mapping == LbpMapping::uniform) return static_cast<std::uint32_t>(neighbors * (neighbors - 1) + 3);
  return std::uint32_t{1} << neighbors;
}

int circular_transitions(std::uint32_t code, int bits) {
  const std::uint32_t mask = bits >= 32 ? ~0u : ((1u << bits) - 1);
  code &= mask;
  const std::uint32_t rotated = ((code >> 1) | (code << (bits - 1))) & mask;
  return std::popcount(code ^ rotated);
}

UniformMapping::UniformMapping(int neighbors) : neighbors_(neighbors) {
  if (neighbors < 4 || neighbors > 31) throw ValidationError("uniform mapping needs 4 <= P <= 31");
  mask_ = (1u << neighbors) - 1;
}

std::uint32_t UniformMapping::operator()(std::uint32_t code) const {
  code &= mask_;
  const auto p = static_cast<std::uint32_t>(neighbors_);
  if (code == 0) return 0;
  if (code == mask_) return p * (p - 1) + 1;
  if (circular_transitions(code, neighbors_) > 2) return non_uniform_bin();
  const auto ones = static_cast<std::uint32_t>(std::popcount(code));
  // Start of the run: a set bit whose circular predecessor is clear.
  std::uint32_t start = 0;
  for (std::uint32_t bit = 0; bit < p; ++bit) {
    const std::uint32_t prev = (bit + p - 1) % p;
    if ((code >> bit & 1u) && !(code >> prev & 1u)) {
      start = bit;
      break;
    }
  }
  return 1 + (ones - 1) * p + start;
}

std::vector<std::uint32_t> UniformMapping::table() const {
  if (neighbors_ > 20) throw std::invalid_argument("uniform mapping table too large; map codes on the fly");
  std::vector<std::uint32_t> out(std::size_t{1} << neighbors_);
  for (std::uint32_t c = 0; c < out.size(); ++c) out[c] = (*this)(c);
  return out;
}

std::vector<Eigen::Vector2d> lbp_offsets(int neighbors, double radius) {
  std::vector<Eigen::Vector2d> out;
  out.reserve(neighbors);
  auto snap = [](double v) {
    const double r = std::round(v);
    return std::abs(v - r) < 1e-6 ? r : v;
  };
  for (int p = 0; p < neighbors; ++p) {
    const double angle = 2.0 * std::numbers::pi * p / neighbors;
    out.emplace_back(snap(radius * std::cos(angle)), snap(-radius * std::sin(angle)));
  }
  return out;
}

namespace {

struct Tap {
  int dx0, dy0, dx1, dy1;
  double w00, w01, w10, w11;
};

}  // namespace

CodeImage lbp_code(const Eigen::Ref<const GrayImage>& image, const LbpParams& params) {
  if (params.neighbors < 4 || params.neighbors > 31) throw ValidationError("LBP needs 4 <= P <= 31");
  if (params.radius < 1.0) throw ValidationError("LBP radius must be at least 1");
  if (params.mapping == LbpMapping::full && params.neighbors > 24)
    throw ValidationError("full LBP mapping is limited to P <= 24");
  const int margin = params.margin();
  const auto h = static_cast<int>(image.rows());
  const auto w = static_cast<int>(image.cols());
  if (std::min(h, w) <= 2 * margin)
    throw ValidationError("image " + std::to_string(h) + "x" + std::to_string(w) + " too small for LBP radius " +
                          std::to_string(params.radius));

  std::vector<Tap> taps;
  for (const auto& off : lbp_offsets(params.neighbors, params.radius)) {
    const double fx0 = std::floor(off.x());
    const double fy0 = std::floor(off.y());
    const double tx = off.x() - fx0;
    const double ty = off.y() - fy0;
    Tap t;
    t.dx0 = static_cast<int>(fx0);
    t.dy0 = static_cast<int>(fy0);
    t.dx1 = tx > 0.0 ? t.dx0 + 1 : t.dx0;
    t.dy1 = ty > 0.0 ? t.dy0 + 1 : t.dy0;
    t.w00 = (1.0 - tx) * (1.0 - ty);
    t.w01 = tx * (1.0 - ty);
    t.w10 = (1.0 - tx) * ty;
    t.w11 = tx * ty;
    taps.push_back(t);
  }

  CodeImage out;
  out.codes = CodeMatrix::Zero(h, w);
  out.code_range = params.code_range();
  out.margin = margin;
  std::optional<UniformMapping> uniform;
  if (params.mapping == LbpMapping::uniform) uniform.emplace(params.neighbors);

  for (int y = margin; y < h - margin; ++y) {
    for (int x = margin; x < w - margin; ++x) {
      const int center = image(y, x);
      std::uint32_t code = 0;
      for (std::size_t p = 0; p < taps.size(); ++p) {
        const Tap& t = taps[p];
        // Interpolate differences to the center so that equal intensities compare exactly.
        const double d00 = image(y + t.dy0, x + t.dx0) - center;
        const double d01 = image(y + t.dy0, x + t.dx1) - center;
        const double d10 = image(y + t.dy1, x + t.dx0) - center;
        const double d11 = image(y + t.dy1, x + t.dx1) - center;
        const double value = t.w00 * d00 + t.w01 * d01 + t.w10 * d10 + t.w11 * d11;
        // Integer differences can cancel exactly against irrational weights; rounding must not flip the tie.
        if (value >= -1e-9) code |= 1u << p;
      }
      out.codes(y, x) = uniform ? (*uniform)(code) : code;
    }
  }
  return out;
}

}  // namespace kinvid
