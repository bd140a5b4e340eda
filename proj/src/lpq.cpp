#include <cmath>
#include <numbers>

#include "kinvid/texture_coders.hpp"

namespace kinvid {

CodeImage lpq_code(const Eigen::Ref<const GrayImage>& image, const LpqParams& params) {
  const int win = params.window;
  if (win < 3 || win % 2 == 0) throw ValidationError("LPQ window must be odd and >= 3");
  const auto h = static_cast<int>(image.rows());
  const auto w = static_cast<int>(image.cols());
  if (std::min(h, w) <= win)
    throw ValidationError("image " + std::to_string(h) + "x" + std::to_string(w) + " too small for LPQ window " +
                          std::to_string(win));
  const int r = params.margin();

  // Basis for the lowest non-zero frequency 1/W: w(x) = cos(2 pi x / W) - i sin(2 pi x / W).
  Eigen::VectorXd c(win), s(win);
  for (int k = 0; k < win; ++k) {
    const double angle = 2.0 * std::numbers::pi * (k - r) / win;
    c[k] = std::cos(angle);
    s[k] = std::sin(angle);
  }

  // Horizontal pass: plain, cosine and sine sums of each row over the window.
  const Eigen::MatrixXd f = image.cast<double>();
  const int inner_w = w - 2 * r;
  Eigen::MatrixXd row_sum(h, inner_w), row_cos(h, inner_w), row_sin(h, inner_w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < inner_w; ++x) {
      const auto seg = f.row(y).segment(x, win).transpose();
      row_sum(y, x) = seg.sum();
      row_cos(y, x) = seg.dot(c);
      row_sin(y, x) = seg.dot(s);
    }
  }

  CodeImage out;
  out.codes = CodeMatrix::Zero(h, w);
  out.code_range = 256;
  out.margin = r;
  auto bit = [](double v) -> std::uint32_t { return (v >= 0.0 || std::abs(v) <= kLpqZeroTolerance) ? 1u : 0u; };

  for (int y = r; y < h - r; ++y) {
    for (int x = 0; x < inner_w; ++x) {
      const auto rs = row_sum.col(x).segment(y - r, win);
      const auto rc = row_cos.col(x).segment(y - r, win);
      const auto rn = row_sin.col(x).segment(y - r, win);
      // u1 = (a, 0), u2 = (0, a), u3 = (a, a), u4 = (a, -a)
      const double re1 = rc.sum();
      const double im1 = -rn.sum();
      const double re2 = rs.dot(c);
      const double im2 = -rs.dot(s);
      const double re3 = rc.dot(c) - rn.dot(s);
      const double im3 = -(rc.dot(s) + rn.dot(c));
      const double re4 = rc.dot(c) + rn.dot(s);
      const double im4 = rc.dot(s) - rn.dot(c);
      out.codes(y, x + r) = bit(re1) | bit(re2) << 1 | bit(re3) << 2 | bit(re4) << 3 | bit(im1) << 4 |
                            bit(im2) << 5 | bit(im3) << 6 | bit(im4) << 7;
    }
  }
  return out;
}

}  // namespace kinvid
