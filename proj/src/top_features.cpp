#include "kinvid/top_features.hpp"

#include <sstream>

namespace kinvid {

std::string to_string(Descriptor d) {
  switch (d) {
    case Descriptor::lbp:
      return "lbp";
    case Descriptor::lpq:
      return "lpq";
    case Descriptor::bsif:
      return "bsif";
  }
  return "?";
}

TextureCoder TextureCoder::lbp(int neighbors, double radius, LbpMapping mapping) {
  TextureCoder c;
  c.kind_ = Descriptor::lbp;
  c.lbp_ = {neighbors, radius, mapping};
  if (neighbors < 4 || radius < 1.0) throw ValidationError("LBP scale needs P >= 4 and R >= 1");
  if (mapping == LbpMapping::full && neighbors > 24) throw ValidationError("full LBP mapping is limited to P <= 24");
  return c;
}

TextureCoder TextureCoder::lpq(int window) {
  if (window < 3 || window % 2 == 0) throw ValidationError("LPQ window must be odd and >= 3");
  TextureCoder c;
  c.kind_ = Descriptor::lpq;
  c.lpq_ = {window};
  return c;
}

TextureCoder TextureCoder::bsif(std::shared_ptr<const FilterBank> bank) {
  if (!bank) throw ValidationError("missing BSIF filter bank");
  bank->validate();
  TextureCoder c;
  c.kind_ = Descriptor::bsif;
  c.bank_ = std::move(bank);
  return c;
}

int TextureCoder::margin() const {
  switch (kind_) {
    case Descriptor::lbp:
      return lbp_.margin();
    case Descriptor::lpq:
      return lpq_.margin();
    case Descriptor::bsif:
      return bank_->margin();
  }
  return 0;
}

int TextureCoder::min_size() const {
  switch (kind_) {
    case Descriptor::lbp:
      return 2 * lbp_.margin() + 1;
    case Descriptor::lpq:
      return lpq_.window + 1;
    case Descriptor::bsif:
      return bank_->size + 1;
  }
  return 0;
}

std::uint32_t TextureCoder::bins() const {
  switch (kind_) {
    case Descriptor::lbp:
      return lbp_.code_range();
    case Descriptor::lpq:
      return 256;
    case Descriptor::bsif:
      return std::uint32_t{1} << bank_->bits();
  }
  return 0;
}

std::string TextureCoder::scale_label() const {
  std::ostringstream s;
  switch (kind_) {
    case Descriptor::lbp:
      s << lbp_.neighbors << ':' << lbp_.radius;
      if (lbp_.mapping == LbpMapping::full) s << ":full";
      break;
    case Descriptor::lpq:
      s << lpq_.window;
      break;
    case Descriptor::bsif:
      s << bank_->bits() << ':' << bank_->size;
      break;
  }
  return s.str();
}

CodeImage TextureCoder::code(const Eigen::Ref<const GrayImage>& image) const {
  switch (kind_) {
    case Descriptor::lbp:
      return lbp_code(image, lbp_);
    case Descriptor::lpq:
      return lpq_code(image, lpq_);
    case Descriptor::bsif:
      return bsif_code(image, *bank_);
  }
  throw std::logic_error("unknown descriptor");
}

std::vector<TextureCoder> default_lbp_scales() {
  return {TextureCoder::lbp(8, 1), TextureCoder::lbp(16, 2), TextureCoder::lbp(24, 3)};
}

std::vector<TextureCoder> default_lpq_scales() {
  std::vector<TextureCoder> out;
  for (int w = 3; w <= 17; w += 2) out.push_back(TextureCoder::lpq(w));
  return out;
}

std::vector<TextureCoder> parse_scales(Descriptor d, const std::string& text) {
  std::vector<TextureCoder> out;
  std::istringstream items(text);
  std::string item;
  while (std::getline(items, item, ',')) {
    if (item.empty()) continue;
    try {
      if (d == Descriptor::lbp) {
        std::istringstream parts(item);
        std::string p, r, mapping;
        std::getline(parts, p, ':');
        std::getline(parts, r, ':');
        std::getline(parts, mapping, ':');
        if (p.empty() || r.empty()) throw ValidationError("");
        LbpMapping m = LbpMapping::uniform;
        if (mapping == "full")
          m = LbpMapping::full;
        else if (!mapping.empty() && mapping != "u2")
          throw ValidationError("");
        out.push_back(TextureCoder::lbp(std::stoi(p), std::stod(r), m));
      } else if (d == Descriptor::lpq) {
        out.push_back(TextureCoder::lpq(std::stoi(item)));
      } else {
        throw ValidationError("BSIF scales come from filter bank files");
      }
    } catch (const ValidationError& e) {
      throw ValidationError("bad scale '" + item + "'" + (std::string(e.what()).empty() ? "" : ": " + std::string(e.what())));
    } catch (const std::logic_error&) {
      throw ValidationError("bad scale '" + item + "'");
    }
  }
  if (out.empty()) throw ValidationError("no scales given");
  return out;
}

PlaneSlices slice_planes(const FaceVideo& video) {
  const int t_n = video.frames(), h = video.height(), w = video.width();
  PlaneSlices out;
  out.xy.reserve(t_n);
  for (int t = 0; t < t_n; ++t) out.xy.emplace_back(video.frame(t));
  out.xt.assign(h, GrayImage(t_n, w));
  out.yt.assign(w, GrayImage(t_n, h));
  for (int t = 0; t < t_n; ++t)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const std::uint8_t v = video.at(t, y, x);
        out.xt[y](t, x) = v;
        out.yt[x](t, y) = v;
      }
  return out;
}

PlaneHistogram plane_histogram(const std::vector<GrayImage>& slices, const TextureCoder& coder) {
  PlaneHistogram out;
  out.counts = Histogram::Zero(coder.bins());
  for (const auto& slice : slices) {
    if (std::min(slice.rows(), slice.cols()) < coder.min_size()) {
      ++out.skipped_slices;
      continue;
    }
    accumulate(coder.code(slice), out.counts);
    ++out.used_slices;
  }
  if (out.used_slices == 0)
    throw ValidationError("every slice is smaller than the " + std::to_string(coder.min_size()) + "x" +
                          std::to_string(coder.min_size()) + " minimum for " + to_string(coder.kind()) + " scale " +
                          coder.scale_label());
  const double total = static_cast<double>(out.counts.sum());
  out.values = out.counts.cast<double>() / total;
  return out;
}

Eigen::VectorXd TopHistogram::concatenated() const {
  Eigen::VectorXd out(xy.size() + xt.size() + yt.size());
  out << xy, xt, yt;
  return out;
}

TopHistogram top_histogram(const PlaneSlices& planes, const TextureCoder& coder) {
  TopHistogram out;
  out.descriptor = coder.kind();
  out.scale = coder.scale_label();
  auto plane = [&](const std::vector<GrayImage>& slices, const char* name) {
    try {
      return plane_histogram(slices, coder).values;
    } catch (const ValidationError& e) {
      throw ValidationError(std::string(name) + " plane: " + e.what());
    }
  };
  out.xy = plane(planes.xy, "XY");
  out.xt = plane(planes.xt, "XT");
  out.yt = plane(planes.yt, "YT");
  return out;
}

MultiScaleFeature extract_top_multiscale(const FaceVideo& video, const std::vector<TextureCoder>& scales) {
  if (scales.empty()) throw ValidationError("no scales given");
  const PlaneSlices planes = slice_planes(video);
  MultiScaleFeature out;
  out.descriptor = to_string(scales.front().kind()) + "top";
  out.values.resize(top_feature_length(scales));
  Eigen::Index offset = 0;
  for (const auto& coder : scales) {
    if (coder.kind() != scales.front().kind()) throw ValidationError("scales mix descriptor types");
    const Eigen::VectorXd block = top_histogram(planes, coder).concatenated();
    out.values.segment(offset, block.size()) = block;
    offset += block.size();
    out.scales.push_back(coder.scale_label());
  }
  return out;
}

MultiScaleFeature extract_spatial_multiscale(const Eigen::Ref<const GrayImage>& image,
                                             const std::vector<TextureCoder>& scales) {
  if (scales.empty()) throw ValidationError("no scales given");
  MultiScaleFeature out;
  out.descriptor = to_string(scales.front().kind());
  Eigen::Index length = 0;
  for (const auto& c : scales) length += c.bins();
  out.values.resize(length);
  Eigen::Index offset = 0;
  const std::vector<GrayImage> single{GrayImage(image)};
  for (const auto& coder : scales) {
    const Eigen::VectorXd h = plane_histogram(single, coder).values;
    out.values.segment(offset, h.size()) = h;
    offset += h.size();
    out.scales.push_back(coder.scale_label());
  }
  return out;
}

Eigen::Index top_feature_length(const std::vector<TextureCoder>& scales) {
  Eigen::Index n = 0;
  for (const auto& c : scales) n += 3 * static_cast<Eigen::Index>(c.bins());
  return n;
}

}  // namespace kinvid
