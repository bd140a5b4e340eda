#include "kinvid/deep_net.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace kinvid {

namespace fs = std::filesystem;

std::string to_string(LayerType t) {
  switch (t) {
    case LayerType::input:
      return "input";
    case LayerType::conv:
      return "conv";
    case LayerType::relu:
      return "relu";
    case LayerType::mpool:
      return "mpool";
    case LayerType::softmx:
      return "softmx";
  }
  return "?";
}

int NetworkWeights::find(const std::string& name) const {
  for (std::size_t i = 0; i < layers.size(); ++i)
    if (layers[i].name == name) return static_cast<int>(i);
  return -1;
}

const std::vector<LayerSpec>& vgg_face_layout() {
  static const std::vector<LayerSpec> table = [] {
    std::vector<LayerSpec> t;
    auto add = [&](LayerType type, std::string name, std::uint32_t support, std::uint32_t filt_dim,
                   std::uint32_t num_filts, std::uint32_t stride, std::uint32_t pad) {
      t.push_back({static_cast<int>(t.size()), type, std::move(name), support, filt_dim, num_filts, stride, pad});
    };
    add(LayerType::input, "input", 224, 0, 3, 1, 0);
    // blocks of (conv count, in channels, out channels)
    const int blocks[5][3] = {{2, 3, 64}, {2, 64, 128}, {3, 128, 256}, {3, 256, 512}, {3, 512, 512}};
    for (int b = 0; b < 5; ++b) {
      std::uint32_t in = blocks[b][1];
      const auto out = static_cast<std::uint32_t>(blocks[b][2]);
      for (int k = 1; k <= blocks[b][0]; ++k) {
        const std::string suffix = std::to_string(b + 1) + "_" + std::to_string(k);
        add(LayerType::conv, "conv" + suffix, 3, in, out, 1, 1);
        add(LayerType::relu, "relu" + suffix, 1, 0, 0, 1, 0);
        in = out;
      }
      add(LayerType::mpool, "pool" + std::to_string(b + 1), 2, 0, 0, 2, 0);
    }
    add(LayerType::conv, "fc6", 7, 512, 4096, 1, 0);
    add(LayerType::relu, "relu6", 1, 0, 0, 1, 0);
    add(LayerType::conv, "fc7", 1, 4096, 4096, 1, 0);
    add(LayerType::relu, "relu7", 1, 0, 0, 1, 0);
    add(LayerType::conv, "fc8", 1, 4096, 2622, 1, 0);
    add(LayerType::softmx, "prob", 1, 0, 0, 1, 0);
    return t;
  }();
  return table;
}

std::vector<Shape> propagate_shapes(const std::vector<LayerSpec>& layers) {
  if (layers.empty() || layers.front().type != LayerType::input)
    throw ValidationError("network must start with an input layer");
  std::vector<Shape> shapes;
  const LayerSpec& in = layers.front();
  if (in.support < 1 || in.num_filts < 1) throw ValidationError("input layer needs a side length and channel count");
  Shape s{static_cast<int>(in.support), static_cast<int>(in.support), static_cast<int>(in.num_filts)};
  shapes.push_back(s);
  for (std::size_t i = 1; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    const std::string where = "layer " + std::to_string(i) + " (" + l.name + ")";
    switch (l.type) {
      case LayerType::input:
        throw ValidationError(where + ": input layer after the first position");
      case LayerType::conv: {
        if (static_cast<int>(l.filt_dim) != s.channels)
          throw ValidationError(where + ": filt dim " + std::to_string(l.filt_dim) + " but incoming channels " +
                                std::to_string(s.channels));
        if (l.support < 1 || l.stride < 1 || l.num_filts < 1) throw ValidationError(where + ": bad conv geometry");
        const int h = (s.height + 2 * static_cast<int>(l.pad) - static_cast<int>(l.support));
        const int w = (s.width + 2 * static_cast<int>(l.pad) - static_cast<int>(l.support));
        if (h < 0 || w < 0) throw ValidationError(where + ": kernel larger than padded input");
        s = {h / static_cast<int>(l.stride) + 1, w / static_cast<int>(l.stride) + 1, static_cast<int>(l.num_filts)};
        break;
      }
      case LayerType::mpool: {
        const int k = static_cast<int>(l.support), st = static_cast<int>(l.stride);
        if (k < 1 || st < 1 || s.height < k || s.width < k || (s.height - k) % st || (s.width - k) % st)
          throw ValidationError(where + ": incomplete pooling window on " + std::to_string(s.height) + "x" +
                                std::to_string(s.width));
        s = {(s.height - k) / st + 1, (s.width - k) / st + 1, s.channels};
        break;
      }
      case LayerType::relu:
      case LayerType::softmx:
        break;
      default:
        throw ValidationError(where + ": unknown layer type");
    }
    shapes.push_back(s);
  }
  return shapes;
}

namespace {

std::string describe(const LayerSpec& l) {
  std::ostringstream s;
  s << to_string(l.type) << " support=" << l.support << " filt_dim=" << l.filt_dim << " num_filts=" << l.num_filts
    << " stride=" << l.stride << " pad=" << l.pad;
  return s.str();
}

bool names_match_vgg_face(const std::vector<LayerSpec>& layers) {
  const auto& ref = vgg_face_layout();
  if (layers.size() != ref.size()) return false;
  for (std::size_t i = 1; i < ref.size(); ++i)
    if (layers[i].name != ref[i].name) return false;
  return true;
}

}  // namespace

void validate_layout(const std::vector<LayerSpec>& layers) {
  if (names_match_vgg_face(layers)) {
    const auto& ref = vgg_face_layout();
    for (std::size_t i = 0; i < ref.size(); ++i) {
      LayerSpec found = layers[i];
      LayerSpec expected = ref[i];
      found.name = expected.name = ref[i].name;
      found.index = expected.index = static_cast<int>(i);
      if (!(found == expected))
        throw ValidationError("shape mismatch at " + layers[i].name + ": expected " + describe(expected) +
                              ", found " + describe(found));
    }
  }
  propagate_shapes(layers);
}

namespace {

class Reader {
 public:
  explicit Reader(const fs::path& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw ValidationError("cannot open weight file " + path.string());
    in_.seekg(0, std::ios::end);
    size_ = static_cast<std::uint64_t>(in_.tellg());
    in_.seekg(0);
  }

  void bytes(void* dst, std::size_t n) {
    in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) throw ValidationError(path_.string() + ": truncated weight file");
  }

  template <typename T>
  T scalar() {
    unsigned char raw[sizeof(T)];
    bytes(raw, sizeof(T));
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(raw[i]) << (8 * i);
    if constexpr (std::is_same_v<T, float>) {
      return std::bit_cast<float>(static_cast<std::uint32_t>(v));
    } else {
      return static_cast<T>(v);
    }
  }

  void floats(float* dst, std::size_t n) {
    bytes(dst, n * sizeof(float));
    if constexpr (std::endian::native == std::endian::big) {
      for (std::size_t i = 0; i < n; ++i)
        dst[i] = std::bit_cast<float>(__builtin_bswap32(std::bit_cast<std::uint32_t>(dst[i])));
    }
  }

  void skip(std::uint64_t n) {
    const auto pos = static_cast<std::uint64_t>(in_.tellg());
    if (pos + n > size_) throw ValidationError(path_.string() + ": truncated weight file");
    in_.seekg(static_cast<std::streamoff>(pos + n));
  }

  bool at_end() { return static_cast<std::uint64_t>(in_.tellg()) == size_; }

 private:
  fs::path path_;
  std::ifstream in_;
  std::uint64_t size_ = 0;
};

NetworkWeights read_weights(const fs::path& path, bool with_payload) {
  Reader r(path);
  char magic[5];
  r.bytes(magic, 5);
  if (std::memcmp(magic, "VGGW1", 5) != 0) throw ValidationError(path.string() + ": bad magic, expected VGGW1");
  NetworkWeights net;
  for (auto& m : net.mean) m = r.scalar<float>();
  const auto count = r.scalar<std::uint32_t>();
  if (count == 0 || count > 100000) throw ValidationError(path.string() + ": implausible layer count");
  // Record pass first, so shape errors surface before any payload is read.
  std::vector<std::uint64_t> payload_at;
  for (std::uint32_t i = 0; i < count; ++i) {
    LayerSpec l;
    l.index = static_cast<int>(i);
    const auto name_len = r.scalar<std::uint16_t>();
    l.name.resize(name_len);
    r.bytes(l.name.data(), name_len);
    const auto tag = r.scalar<std::uint8_t>();
    if (tag > 4) throw ValidationError(path.string() + ": layer " + l.name + " has unknown type tag");
    l.type = static_cast<LayerType>(tag);
    l.support = r.scalar<std::uint32_t>();
    l.filt_dim = r.scalar<std::uint32_t>();
    l.num_filts = r.scalar<std::uint32_t>();
    l.stride = r.scalar<std::uint32_t>();
    l.pad = r.scalar<std::uint32_t>();
    net.layers.push_back(l);
    if (l.type == LayerType::conv) {
      const std::uint64_t n =
          static_cast<std::uint64_t>(l.num_filts) * l.filt_dim * l.support * l.support + l.num_filts;
      r.skip(n * sizeof(float));
    }
  }
  if (!r.at_end()) throw ValidationError(path.string() + ": trailing bytes after the last layer");
  validate_layout(net.layers);
  net.params.resize(count);
  if (!with_payload) return net;

  Reader data(path);
  data.skip(5 + 12 + 4);
  for (std::uint32_t i = 0; i < count; ++i) {
    const LayerSpec& l = net.layers[i];
    data.skip(2 + l.name.size() + 1 + 5 * 4);
    if (l.type != LayerType::conv) continue;
    ConvParams& p = net.params[i];
    const auto cols = static_cast<Eigen::Index>(l.filt_dim) * l.support * l.support;
    // File order is [out][in][ky][kx]: row-major rows of the (out x cols) matrix.
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> w(l.num_filts, cols);
    data.floats(w.data(), static_cast<std::size_t>(w.size()));
    p.weights = w;
    p.bias.resize(l.num_filts);
    data.floats(p.bias.data(), l.num_filts);
  }
  return net;
}

class Writer {
 public:
  explicit Writer(const fs::path& path) : out_(path, std::ios::binary) {
    if (!out_) throw std::runtime_error("cannot write " + path.string());
  }
  template <typename T>
  void scalar(T v) {
    std::uint64_t bits;
    if constexpr (std::is_same_v<T, float>)
      bits = std::bit_cast<std::uint32_t>(v);
    else
      bits = static_cast<std::uint64_t>(v);
    for (std::size_t i = 0; i < sizeof(T); ++i) out_.put(static_cast<char>((bits >> (8 * i)) & 0xff));
  }
  void bytes(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
  bool ok() const { return static_cast<bool>(out_); }

 private:
  std::ofstream out_;
};

}  // namespace

NetworkWeights read_layout(const fs::path& path) { return read_weights(path, false); }
NetworkWeights load_weights(const fs::path& path) { return read_weights(path, true); }

void save_weights(const NetworkWeights& net, const fs::path& path) {
  validate_layout(net.layers);
  Writer w(path);
  w.bytes("VGGW1", 5);
  for (float m : net.mean) w.scalar(m);
  w.scalar(static_cast<std::uint32_t>(net.layers.size()));
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const LayerSpec& l = net.layers[i];
    w.scalar(static_cast<std::uint16_t>(l.name.size()));
    w.bytes(l.name.data(), l.name.size());
    w.scalar(static_cast<std::uint8_t>(l.type));
    for (auto v : {l.support, l.filt_dim, l.num_filts, l.stride, l.pad}) w.scalar(v);
    if (l.type != LayerType::conv) continue;
    const ConvParams& p = net.params.at(i);
    const auto cols = static_cast<Eigen::Index>(l.filt_dim) * l.support * l.support;
    if (p.weights.rows() != l.num_filts || p.weights.cols() != cols || p.bias.size() != l.num_filts)
      throw ValidationError("weights for " + l.name + " do not match its layer record");
    for (Eigen::Index o = 0; o < p.weights.rows(); ++o)
      for (Eigen::Index c = 0; c < cols; ++c) w.scalar(p.weights(o, c));
    for (Eigen::Index o = 0; o < p.bias.size(); ++o) w.scalar(p.bias[o]);
  }
  if (!w.ok()) throw std::runtime_error("failed writing " + path.string());
}

ActivationTensor forward(const ActivationTensor& input, const NetworkWeights& weights, const std::string& stop_at,
                         const LayerObserver& observer) {
  int last = static_cast<int>(weights.layers.size()) - 1;
  if (!stop_at.empty()) {
    last = weights.find(stop_at);
    if (last < 0) throw ValidationError("unknown layer '" + stop_at + "'");
  }
  const LayerSpec& in = weights.input();
  if (input.height != static_cast<int>(in.support) || input.width != static_cast<int>(in.support) ||
      input.channels != static_cast<int>(in.num_filts))
    throw ValidationError("input tensor does not match the network input shape");
  ActivationTensor x = input;
  if (observer) observer(in, x);
  for (int i = 1; i <= last; ++i) {
    const LayerSpec& l = weights.layers[i];
    switch (l.type) {
      case LayerType::conv: {
        const ConvParams& p = weights.params.at(i);
        if (p.weights.size() == 0) throw ValidationError("layer " + l.name + " has no weights loaded");
        x = conv2d<float>(x, p.weights, p.bias, static_cast<int>(l.support), static_cast<int>(l.stride),
                          static_cast<int>(l.pad));
        break;
      }
      case LayerType::relu:
        x = relu(std::move(x));
        break;
      case LayerType::mpool:
        x = max_pool(x, static_cast<int>(l.support), static_cast<int>(l.stride));
        break;
      case LayerType::softmx:
        x = softmax(std::move(x));
        break;
      case LayerType::input:
        throw ValidationError("unexpected input layer at position " + std::to_string(i));
    }
    if (observer) observer(l, x);
  }
  return x;
}

ActivationTensor preprocess(const Frame& frame, const NetworkWeights& weights) {
  const auto side = static_cast<int>(weights.input().support);
  if (frame.width != side || frame.height != side || frame.channels != 3)
    throw ValidationError("network expects a " + std::to_string(side) + "x" + std::to_string(side) +
                          "x3 frame, got " + std::to_string(frame.width) + "x" + std::to_string(frame.height) + "x" +
                          std::to_string(frame.channels));
  ActivationTensor out(side, side, 3);
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x)
      for (int c = 0; c < 3; ++c) out(y, x, c) = static_cast<float>(frame.at(y, x, c)) - weights.mean[c];
  return out;
}

Eigen::VectorXd extract_fc7_video(const FaceVideo& video, const NetworkWeights& weights, const std::string& stop_at,
                                  int frame_stride) {
  if (frame_stride < 1) throw ValidationError("frame stride must be >= 1");
  if (!video.has_rgb()) throw ValidationError("deep features need RGB frames");
  Eigen::VectorXd sum;
  int used = 0;
  for (int t = 0; t < video.frames(); t += frame_stride) {
    const ActivationTensor out = forward(preprocess(video.frame_at(t), weights), weights, stop_at);
    if (used == 0)
      sum = out.data.cast<double>();
    else
      sum += out.data.cast<double>();
    ++used;
  }
  if (used == 0) throw ValidationError("empty video");
  return sum / static_cast<double>(used);
}

std::vector<LayerChecksum> layer_checksums(const ActivationTensor& input, const NetworkWeights& weights) {
  std::vector<LayerChecksum> out;
  forward(input, weights, "", [&](const LayerSpec& l, const ActivationTensor& t) {
    const Eigen::VectorXd v = t.data.cast<double>();
    out.push_back({l.name, v.mean(), v.maxCoeff(), v.norm()});
  });
  return out;
}

void write_checksums(const std::vector<LayerChecksum>& sums, const fs::path& path) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& s : sums) layers.push_back({{"name", s.name}, {"mean", s.mean}, {"max", s.max}, {"l2", s.l2}});
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << nlohmann::json{{"layers", layers}}.dump(2) << '\n';
}

std::vector<LayerChecksum> read_checksums(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open checksum file " + path.string());
  try {
    const auto doc = nlohmann::json::parse(in);
    std::vector<LayerChecksum> out;
    for (const auto& l : doc.at("layers"))
      out.push_back({l.at("name").get<std::string>(), l.at("mean").get<double>(), l.at("max").get<double>(),
                     l.at("l2").get<double>()});
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

std::vector<std::string> compare_checksums(const std::vector<LayerChecksum>& reference,
                                           const std::vector<LayerChecksum>& actual, double relative_tolerance) {
  std::vector<std::string> problems;
  for (const auto& ref : reference) {
    auto it = std::find_if(actual.begin(), actual.end(), [&](const LayerChecksum& a) { return a.name == ref.name; });
    if (it == actual.end()) {
      problems.push_back(ref.name + ": missing");
      continue;
    }
    auto check = [&](const char* what, double want, double got) {
      const double scale = std::max({std::abs(want), std::abs(got), 1e-12});
      if (std::abs(want - got) > relative_tolerance * scale) {
        std::ostringstream s;
        s << ref.name << ": " << what << " expected " << want << ", got " << got;
        problems.push_back(s.str());
      }
    };
    check("mean", ref.mean, it->mean);
    check("max", ref.max, it->max);
    check("l2", ref.l2, it->l2);
  }
  return problems;
}

}  // namespace kinvid
