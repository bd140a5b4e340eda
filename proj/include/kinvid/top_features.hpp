#pragma once

#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "kinvid/media_io.hpp"
#include "kinvid/texture_coders.hpp"

namespace kinvid {

enum class Descriptor { lbp, lpq, bsif };

std::string to_string(Descriptor d);

/// One coder at one scale: LBP (P, R), LPQ (W) or BSIF (bank).
class TextureCoder {
 public:
  static TextureCoder lbp(int neighbors, double radius, LbpMapping mapping = LbpMapping::uniform);
  static TextureCoder lpq(int window);
  static TextureCoder bsif(std::shared_ptr<const FilterBank> bank);

  Descriptor kind() const { return kind_; }
  int margin() const;
  /// Smallest admissible min(height, width) of an input image.
  int min_size() const;
  std::uint32_t bins() const;
  /// "P:R" for LBP, "W" for LPQ, "f:W" for BSIF.
  std::string scale_label() const;

  CodeImage code(const Eigen::Ref<const GrayImage>& image) const;

  const LbpParams& lbp_params() const { return lbp_; }
  const LpqParams& lpq_params() const { return lpq_; }
  const FilterBank& bank() const { return *bank_; }

 private:
  Descriptor kind_ = Descriptor::lbp;
  LbpParams lbp_;
  LpqParams lpq_;
  std::shared_ptr<const FilterBank> bank_;
};

/// Paper-default scale sets.
std::vector<TextureCoder> default_lbp_scales();
std::vector<TextureCoder> default_lpq_scales();
/// Parses "8:1,16:2,24:3" (LBP) or "3,5,7" (LPQ window sizes).
std::vector<TextureCoder> parse_scales(Descriptor d, const std::string& text);

struct PlaneSlices {
  std::vector<GrayImage> xy;  // T images, H x W
  std::vector<GrayImage> xt;  // H images, T x W
  std::vector<GrayImage> yt;  // W images, T x H
};

PlaneSlices slice_planes(const FaceVideo& video);

struct PlaneHistogram {
  Eigen::VectorXd values;  // L1-normalized
  Histogram counts;
  int used_slices = 0;
  int skipped_slices = 0;
};

/// Pools code counts over every slice large enough for the coder, then normalizes once.
PlaneHistogram plane_histogram(const std::vector<GrayImage>& slices, const TextureCoder& coder);

struct TopHistogram {
  Descriptor descriptor = Descriptor::lbp;
  std::string scale;
  Eigen::VectorXd xy, xt, yt;

  Eigen::VectorXd concatenated() const;
};

TopHistogram top_histogram(const PlaneSlices& planes, const TextureCoder& coder);

struct MultiScaleFeature {
  std::string descriptor;
  std::vector<std::string> scales;
  Eigen::VectorXd values;
};

MultiScaleFeature extract_top_multiscale(const FaceVideo& video, const std::vector<TextureCoder>& scales);

/// Still-image variant: the XY histogram of a single frame at every scale.
MultiScaleFeature extract_spatial_multiscale(const Eigen::Ref<const GrayImage>& image,
                                             const std::vector<TextureCoder>& scales);

/// Length of extract_top_multiscale's output, from parameters alone.
Eigen::Index top_feature_length(const std::vector<TextureCoder>& scales);

}  // namespace kinvid
