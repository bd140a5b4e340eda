#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Core>

#include "kinvid/media_io.hpp"

namespace kinvid {

using CodeMatrix = Eigen::Matrix<std::uint32_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Histogram = Eigen::Matrix<std::uint64_t, Eigen::Dynamic, 1>;

/// Per-pixel code image. Codes inside the margin are left at 0 and never histogrammed.
struct CodeImage {
  CodeMatrix codes;
  std::uint32_t code_range = 0;
  int margin = 0;

  int height() const { return static_cast<int>(codes.rows()); }
  int width() const { return static_cast<int>(codes.cols()); }
  auto valid() const {
    return codes.block(margin, margin, codes.rows() - 2 * margin, codes.cols() - 2 * margin);
  }
};

/// Code counts over the valid region; length == code_range.
Histogram histogram(const CodeImage& image);
void accumulate(const CodeImage& image, Histogram& counts);

enum class LbpMapping { full, uniform };

struct LbpParams {
  int neighbors = 8;
  double radius = 1.0;
  LbpMapping mapping = LbpMapping::uniform;

  int margin() const;
  std::uint32_t code_range() const;
};

struct LpqParams {
  int window = 3;

  int margin() const { return (window - 1) / 2; }
};

/// f zero-mean W x W correlation kernels, stored filter-major.
struct FilterBank {
  int size = 0;
  std::vector<Eigen::MatrixXd> filters;

  int bits() const { return static_cast<int>(filters.size()); }
  int margin() const { return (size - 1) / 2; }
  void validate() const;
  bool zero_mean(double tolerance = 1e-9) const;
  bool operator==(const FilterBank& other) const;
};

/// Maps P-bit LBP codes to P(P-1)+3 bins: 0 for all-zeros, 1 + (k-1)P + r for a circular run of
/// k ones starting at bit r, P(P-1)+1 for all-ones, and P(P-1)+2 for every non-uniform code.
class UniformMapping {
 public:
  explicit UniformMapping(int neighbors);

  int neighbors() const { return neighbors_; }
  std::uint32_t bins() const { return static_cast<std::uint32_t>(neighbors_ * (neighbors_ - 1) + 3); }
  std::uint32_t non_uniform_bin() const { return bins() - 1; }
  std::uint32_t operator()(std::uint32_t code) const;

  /// Full lookup table of 2^P entries; only sensible for small P.
  std::vector<std::uint32_t> table() const;

 private:
  int neighbors_;
  std::uint32_t mask_;
};

int circular_transitions(std::uint32_t code, int bits);

/// Circular neighbor offsets (dx, dy) for an LBP operator, with round-off snapped to the grid.
std::vector<Eigen::Vector2d> lbp_offsets(int neighbors, double radius);

CodeImage lbp_code(const Eigen::Ref<const GrayImage>& image, const LbpParams& params);
CodeImage lpq_code(const Eigen::Ref<const GrayImage>& image, const LpqParams& params);
CodeImage bsif_code(const Eigen::Ref<const GrayImage>& image, const FilterBank& bank);

/// Magnitudes at or below these count as exactly zero: LPQ maps them to bit 1 (>= 0),
/// BSIF to bit 0 (> 0). Keeps codes stable under floating-point summation order.
inline constexpr double kLpqZeroTolerance = 1e-8;
inline constexpr double kBsifZeroTolerance = 1e-9;

/// "BSIF <f> <W>" followed by f*W*W decimals, filter-major, row-major within a filter.
FilterBank load_filter_bank(const std::filesystem::path& path);
void save_filter_bank(const FilterBank& bank, const std::filesystem::path& path);

}  // namespace kinvid
