#include "kinvid/ica.hpp"

#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

#include "kinvid/rng.hpp"

namespace kinvid {

PcaWhitening pca_whiten(const Eigen::MatrixXd& data, int components) {
  const auto d = data.rows();
  const auto n = data.cols();
  if (components < 1 || components > d) throw ValidationError("PCA component count out of range");
  if (n < 2) throw ValidationError("PCA needs at least two samples");
  PcaWhitening out;
  out.mean = data.rowwise().mean();
  const Eigen::MatrixXd centered = data.colwise() - out.mean;
  const Eigen::MatrixXd cov = centered * centered.transpose() / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw std::runtime_error("covariance eigendecomposition failed");
  // Eigen sorts ascending; keep the largest `components`.
  out.eigenvalues = eig.eigenvalues().tail(components).reverse();
  const Eigen::MatrixXd vectors = eig.eigenvectors().rightCols(components).rowwise().reverse();
  const double floor = 1e-12 * std::max(1.0, eig.eigenvalues().maxCoeff());
  if (out.eigenvalues.minCoeff() <= floor)
    throw ValidationError("patch covariance has rank below " + std::to_string(components));
  out.transform = out.eigenvalues.cwiseSqrt().cwiseInverse().asDiagonal() * vectors.transpose();
  return out;
}

namespace {

Eigen::MatrixXd symmetric_decorrelation(const Eigen::MatrixXd& w) {
  // (W W^T)^{-1/2} W
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(w * w.transpose());
  const Eigen::VectorXd inv_sqrt = eig.eigenvalues().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
  return eig.eigenvectors() * inv_sqrt.asDiagonal() * eig.eigenvectors().transpose() * w;
}

}  // namespace

IcaResult fast_ica_symmetric(const Eigen::MatrixXd& whitened, std::uint64_t seed, const IcaOptions& options) {
  const auto k = whitened.rows();
  const auto n = static_cast<double>(whitened.cols());
  Rng rng(seed);
  Eigen::MatrixXd w(k, k);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j) w(i, j) = rng.normal();
  w = symmetric_decorrelation(w);

  for (int iter = 1; iter <= options.max_iterations; ++iter) {
    const Eigen::MatrixXd projections = w * whitened;  // k x N
    // w+ = E{z (w.z)^3} - 3 w
    const Eigen::MatrixXd cubed = projections.array().cube().matrix();
    Eigen::MatrixXd next = cubed * whitened.transpose() / n - 3.0 * w;
    next = symmetric_decorrelation(next);
    const double change = ((next * w.transpose()).diagonal().cwiseAbs().array() - 1.0).abs().maxCoeff();
    w = next;
    if (change < options.tolerance) return {w, iter};
  }
  throw std::runtime_error("ICA did not converge after " + std::to_string(options.max_iterations) + " iterations");
}

Eigen::MatrixXd patches_to_columns(const std::vector<Eigen::MatrixXd>& patches) {
  if (patches.empty()) return {};
  const auto size = patches.front().rows();
  Eigen::MatrixXd out(size * size, static_cast<Eigen::Index>(patches.size()));
  for (std::size_t i = 0; i < patches.size(); ++i) {
    const auto& p = patches[i];
    if (p.rows() != size || p.cols() != size) throw ValidationError("patches must share one square size");
    for (Eigen::Index v = 0; v < size; ++v)
      for (Eigen::Index u = 0; u < size; ++u) out(v * size + u, static_cast<Eigen::Index>(i)) = p(v, u);
  }
  return out;
}

FilterBank learn_bsif_filters(const std::vector<Eigen::MatrixXd>& patches, int bits, std::uint64_t seed,
                              const IcaOptions& options) {
  if (patches.empty()) throw ValidationError("no training patches");
  const auto size = static_cast<int>(patches.front().rows());
  const int dim = size * size;
  if (size < 1 || size % 2 == 0) throw ValidationError("filter size must be odd");
  if (bits < 1 || bits > 24 || bits > dim - 1)
    throw ValidationError("filter count must be in [1, min(24, W*W-1)]");
  const std::size_t needed = 50 * static_cast<std::size_t>(dim);
  if (patches.size() < needed)
    throw ValidationError("insufficient patches: need " + std::to_string(needed) + ", got " +
                          std::to_string(patches.size()));

  Eigen::MatrixXd data = patches_to_columns(patches);
  data.rowwise() -= data.colwise().mean();
  const PcaWhitening pca = pca_whiten(data, bits);
  const IcaResult ica = fast_ica_symmetric(pca.apply(data), seed, options);
  const Eigen::MatrixXd filters = ica.unmixing * pca.transform;  // bits x dim

  FilterBank bank;
  bank.size = size;
  for (int i = 0; i < bits; ++i) {
    Eigen::RowVectorXd row = filters.row(i);
    row.array() -= row.mean();
    row /= row.norm();
    Eigen::Index arg;
    row.cwiseAbs().maxCoeff(&arg);
    if (row[arg] < 0) row = -row;
    Eigen::MatrixXd f(size, size);
    for (int v = 0; v < size; ++v)
      for (int u = 0; u < size; ++u) f(v, u) = row[v * size + u];
    bank.filters.push_back(std::move(f));
  }
  return bank;
}

std::vector<Eigen::MatrixXd> sample_patches(const std::vector<GrayImage>& images, int size, int count,
                                            std::uint64_t seed) {
  std::vector<const GrayImage*> usable;
  for (const auto& img : images)
    if (img.rows() >= size && img.cols() >= size) usable.push_back(&img);
  if (usable.empty()) throw ValidationError("no image is large enough for " + std::to_string(size) + "px patches");
  Rng rng(seed);
  std::vector<Eigen::MatrixXd> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    const GrayImage& img = *usable[rng.index(usable.size())];
    const auto y = static_cast<Eigen::Index>(rng.index(img.rows() - size + 1));
    const auto x = static_cast<Eigen::Index>(rng.index(img.cols() - size + 1));
    out.push_back(img.block(y, x, size, size).cast<double>());
  }
  return out;
}

}  // namespace kinvid
