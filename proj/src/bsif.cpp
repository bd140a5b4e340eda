#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "kinvid/texture_coders.hpp"

namespace kinvid {

void FilterBank::validate() const {
  if (size < 1 || size % 2 == 0) throw ValidationError("filter size must be odd and positive");
  if (filters.empty() || filters.size() > 24) throw ValidationError("filter count must be in [1, 24]");
  for (const auto& f : filters)
    if (f.rows() != size || f.cols() != size) throw ValidationError("filter shape does not match bank size");
}

bool FilterBank::zero_mean(double tolerance) const {
  for (const auto& f : filters)
    if (std::abs(f.mean()) >= tolerance) return false;
  return true;
}

bool FilterBank::operator==(const FilterBank& other) const {
  if (size != other.size || filters.size() != other.filters.size()) return false;
  for (std::size_t i = 0; i < filters.size(); ++i)
    if (filters[i] != other.filters[i]) return false;
  return true;
}

CodeImage bsif_code(const Eigen::Ref<const GrayImage>& image, const FilterBank& bank) {
  bank.validate();
  const int win = bank.size;
  const auto h = static_cast<int>(image.rows());
  const auto w = static_cast<int>(image.cols());
  if (std::min(h, w) <= win)
    throw ValidationError("image " + std::to_string(h) + "x" + std::to_string(w) + " too small for BSIF filter " +
                          std::to_string(win));
  const int r = bank.margin();
  const int inner_h = h - 2 * r;
  const int inner_w = w - 2 * r;
  const int taps = win * win;

  // Each valid pixel's window as one row, so all responses come out of a single product.
  Eigen::MatrixXd patches(static_cast<Eigen::Index>(inner_h) * inner_w, taps);
  for (int y = 0; y < inner_h; ++y)
    for (int x = 0; x < inner_w; ++x) {
      auto row = patches.row(static_cast<Eigen::Index>(y) * inner_w + x);
      for (int v = 0; v < win; ++v)
        for (int u = 0; u < win; ++u) row[v * win + u] = image(y + v, x + u);
    }
  Eigen::MatrixXd kernels(taps, bank.bits());
  for (int i = 0; i < bank.bits(); ++i)
    for (int v = 0; v < win; ++v)
      for (int u = 0; u < win; ++u) kernels(v * win + u, i) = bank.filters[i](v, u);
  const Eigen::MatrixXd responses = patches * kernels;

  CodeImage out;
  out.codes = CodeMatrix::Zero(h, w);
  out.code_range = std::uint32_t{1} << bank.bits();
  out.margin = r;
  for (int y = 0; y < inner_h; ++y)
    for (int x = 0; x < inner_w; ++x) {
      const auto resp = responses.row(static_cast<Eigen::Index>(y) * inner_w + x);
      std::uint32_t code = 0;
      for (int i = 0; i < bank.bits(); ++i)
        if (resp[i] > kBsifZeroTolerance) code |= 1u << i;
      out.codes(y + r, x + r) = code;
    }
  return out;
}

FilterBank load_filter_bank(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open filter bank " + path.string());
  std::string magic;
  int bits = 0, size = 0;
  if (!(in >> magic >> bits >> size) || magic != "BSIF" || bits < 1 || size < 1)
    throw ValidationError(path.string() + ": malformed header, expected \"BSIF <f> <W>\"");
  std::vector<double> values;
  std::string tok;
  while (in >> tok) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ValidationError(path.string() + ": not a number '" + tok + "'");
    }
  }
  const std::size_t expected = static_cast<std::size_t>(bits) * size * size;
  if (values.size() != expected)
    throw ValidationError(path.string() + ": expected " + std::to_string(expected) + " values, found " +
                          std::to_string(values.size()));
  FilterBank bank;
  bank.size = size;
  for (int i = 0; i < bits; ++i) {
    Eigen::MatrixXd f(size, size);
    for (int v = 0; v < size; ++v)
      for (int u = 0; u < size; ++u) f(v, u) = values[(static_cast<std::size_t>(i) * size + v) * size + u];
    bank.filters.push_back(std::move(f));
  }
  bank.validate();
  return bank;
}

void save_filter_bank(const FilterBank& bank, const std::filesystem::path& path) {
  bank.validate();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "BSIF " << bank.bits() << ' ' << bank.size << '\n' << std::setprecision(17);
  for (const auto& f : bank.filters) {
    for (int v = 0; v < bank.size; ++v) {
      for (int u = 0; u < bank.size; ++u) out << (u ? " " : "") << f(v, u);
      out << '\n';
    }
  }
}

}  // namespace kinvid
