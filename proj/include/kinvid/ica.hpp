#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "kinvid/texture_coders.hpp"

namespace kinvid {

/// PCA whitening of column-sample data (d x N). whitened = transform * (data - mean).
struct PcaWhitening {
  Eigen::VectorXd mean;
  Eigen::MatrixXd transform;    // k x d
  Eigen::VectorXd eigenvalues;  // k, descending

  Eigen::MatrixXd apply(const Eigen::MatrixXd& data) const { return transform * (data.colwise() - mean); }
};

PcaWhitening pca_whiten(const Eigen::MatrixXd& data, int components);

struct IcaOptions {
  int max_iterations = 2000;
  double tolerance = 1e-7;
};

struct IcaResult {
  Eigen::MatrixXd unmixing;  // k x k, orthonormal rows
  int iterations = 0;
};

/// Symmetric fixed-point ICA with the cubic contrast on whitened data (k x N).
IcaResult fast_ica_symmetric(const Eigen::MatrixXd& whitened, std::uint64_t seed, const IcaOptions& options = {});

/// Patches as columns of a (W*W) x N matrix, row-major within a patch.
Eigen::MatrixXd patches_to_columns(const std::vector<Eigen::MatrixXd>& patches);

/// DC removal, PCA whitening to `bits` dimensions, symmetric ICA, then each filter made
/// zero-mean and unit-norm with its largest-magnitude coefficient positive.
FilterBank learn_bsif_filters(const std::vector<Eigen::MatrixXd>& patches, int bits, std::uint64_t seed,
                              const IcaOptions& options = {});

/// Uniformly sampled W x W patches from gray images (each image must exceed W in both axes).
std::vector<Eigen::MatrixXd> sample_patches(const std::vector<GrayImage>& images, int size, int count,
                                            std::uint64_t seed);

}  // namespace kinvid
