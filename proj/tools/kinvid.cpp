// kinvid: command-line front end for the kinship-from-video pipeline.

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "kinvid/deep_net.hpp"
#include "kinvid/eval_protocol.hpp"
#include "kinvid/face_align.hpp"
#include "kinvid/feature_io.hpp"
#include "kinvid/ica.hpp"
#include "kinvid/kin_classifier.hpp"
#include "kinvid/media_io.hpp"
#include "kinvid/synth.hpp"
#include "kinvid/texture_coders.hpp"
#include "kinvid/top_features.hpp"

namespace fs = std::filesystem;
using namespace kinvid;

namespace {

std::uint64_t default_seed() {
  if (const char* env = std::getenv("KINVID_SEED")) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(env, &used);
      if (used == std::string(env).size()) return v;
    } catch (const std::exception&) {
    }
    throw ValidationError(std::string("KINVID_SEED is not an unsigned integer: '") + env + "'");
  }
  return 0;
}

// Runs fn(i) for i in [0, n) on up to `jobs` threads; the first exception wins.
template <typename Fn>
void parallel_for(int n, int jobs, Fn fn) {
  jobs = std::max(1, std::min(jobs, n));
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex mu;
  auto worker = [&] {
    for (int i; (i = next++) < n;) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!error) error = std::current_exception();
        next = n;
      }
    }
  };
  std::vector<std::thread> pool;
  for (int j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

FaceVideo load_aligned(const VideoManifest& m, const std::optional<AlignmentTemplate>& tmpl) {
  FaceVideo video = load_video(m.frames_dir);
  if (!tmpl) return video;
  if (m.landmarks.empty()) throw ValidationError("video " + m.video_id + " has no landmark file");
  return align_crop(video, read_landmarks(m.landmarks), *tmpl);
}

void check_manifest_paths(const std::vector<VideoManifest>& entries, bool need_landmarks) {
  for (const auto& m : entries) {
    if (!fs::is_directory(m.frames_dir))
      throw ValidationError("video " + m.video_id + ": frame directory " + m.frames_dir.string() + " not found");
    if (need_landmarks && (m.landmarks.empty() || !fs::is_regular_file(m.landmarks)))
      throw ValidationError("video " + m.video_id + ": landmark file " + m.landmarks.string() + " not found");
  }
}

std::vector<ScoreRow> to_rows(const EvaluationReport& report, std::size_t method) {
  std::vector<ScoreRow> rows;
  for (std::size_t i = 0; i < report.pair_ids.size(); ++i)
    rows.push_back({report.pair_ids[i], report.labels[i], report.rows[method].whole_set_scores[i]});
  return rows;
}

struct Args {
  fs::path manifest, out, pairs, positives, features, weights, filters, image, compare, images, model_out, scores_out;
  std::string descriptor, scales, layer = "fc7", align_template = "texture", extract_template = "none", signal = "both";
  std::vector<std::string> descriptors;
  std::vector<fs::path> score_files;
  std::uint64_t seed = 0;
  double C = 1.0, alpha = 1.0, noise = 2.0;
  int jobs = 1, frame_stride = 1, align_size = 0, filter_size = 7, synth_size = 64, bits = 8, patches = 50000, families = 25, videos_per_subject = 2,
      frames = 16;
  bool first_frame = false, subject_disjoint = false, standardize = false;
};

std::optional<AlignmentTemplate> parse_template(const std::string& name) {
  if (name == "none") return std::nullopt;
  if (name == "texture") return AlignmentTemplate::texture();
  if (name == "deep") return AlignmentTemplate::deep();
  throw ValidationError("unknown template '" + name + "' (expected texture, deep or none)");
}

void cmd_align(const Args& a) {
  const auto entries = read_manifest(a.manifest);
  check_manifest_paths(entries, true);
  const auto named = parse_template(a.align_template);
  if (!named) throw ValidationError("align needs a template (texture or deep)");
  const AlignmentTemplate tmpl = a.align_size > 0 ? AlignmentTemplate::standard(a.align_size) : *named;
  std::vector<VideoManifest> out(entries.size());
  parallel_for(static_cast<int>(entries.size()), a.jobs, [&](int i) {
    const auto& m = entries[static_cast<std::size_t>(i)];
    const FaceVideo aligned = load_aligned(m, tmpl);
    VideoManifest o = m;
    o.frames_dir = a.out / m.video_id;
    o.landmarks.clear();
    save_video(aligned, o.frames_dir);
    out[static_cast<std::size_t>(i)] = o;
  });
  write_manifest(out, a.out / "manifest.json");
  std::cerr << "aligned " << entries.size() << " videos into " << a.out << '\n';
}

void cmd_extract(const Args& a) {
  const auto entries = read_manifest(a.manifest);
  const auto tmpl = parse_template(a.extract_template);
  check_manifest_paths(entries, tmpl.has_value());
  fs::create_directories(a.out);

  if (a.descriptor == "deep") {
    if (a.weights.empty()) throw ValidationError("--descriptor deep needs --weights");
    const NetworkWeights net = load_weights(a.weights);
    const std::optional<AlignmentTemplate> deep_tmpl =
        tmpl ? std::optional(AlignmentTemplate::standard(static_cast<int>(net.input().support))) : std::nullopt;
    parallel_for(static_cast<int>(entries.size()), a.jobs, [&](int i) {
      const auto& m = entries[static_cast<std::size_t>(i)];
      FeatureVector f;
      f.video_id = m.video_id;
      f.descriptor = "deep";
      f.scales = {a.layer};
      f.values = extract_fc7_video(load_aligned(m, deep_tmpl), net, a.layer, a.frame_stride);
      write_feature(f, feature_path(a.out, m.video_id, f.descriptor));
    });
    std::cerr << "extracted deep features for " << entries.size() << " videos\n";
    return;
  }

  Descriptor desc;
  if (a.descriptor == "lbptop")
    desc = Descriptor::lbp;
  else if (a.descriptor == "lpqtop")
    desc = Descriptor::lpq;
  else if (a.descriptor == "bsiftop")
    desc = Descriptor::bsif;
  else
    throw ValidationError("unknown descriptor '" + a.descriptor + "' (expected lbptop, lpqtop, bsiftop or deep)");

  std::vector<TextureCoder> coders;
  if (desc == Descriptor::bsif) {
    if (a.filters.empty()) throw ValidationError("--descriptor bsiftop needs --filters");
    coders.push_back(TextureCoder::bsif(std::make_shared<const FilterBank>(load_filter_bank(a.filters))));
  } else if (!a.scales.empty()) {
    coders = parse_scales(desc, a.scales);
  } else {
    coders = desc == Descriptor::lbp ? default_lbp_scales() : default_lpq_scales();
  }

  parallel_for(static_cast<int>(entries.size()), a.jobs, [&](int i) {
    const auto& m = entries[static_cast<std::size_t>(i)];
    const FaceVideo video = load_aligned(m, tmpl);
    const MultiScaleFeature ms =
        a.first_frame ? extract_spatial_multiscale(video.frame(0), coders) : extract_top_multiscale(video, coders);
    FeatureVector f{m.video_id, ms.descriptor, ms.scales, ms.values};
    write_feature(f, feature_path(a.out, m.video_id, f.descriptor));
  });
  std::cerr << "extracted " << (a.first_frame ? "first-frame " : "") << a.descriptor << " features for "
            << entries.size() << " videos\n";
}

void cmd_learn_filters(const Args& a) {
  std::vector<GrayImage> images;
  for (const auto& entry : fs::directory_iterator(a.images)) {
    const auto ext = entry.path().extension();
    if (ext != ".pgm" && ext != ".ppm") continue;
    const Frame g = to_gray(read_pnm(entry.path()));
    images.emplace_back(Eigen::Map<const GrayImage>(g.data.data(), g.height, g.width));
  }
  if (images.empty()) throw ValidationError("no .pgm or .ppm images in " + a.images.string());
  const int size = a.filter_size;
  const auto patches = sample_patches(images, size, a.patches, a.seed);
  const FilterBank bank = learn_bsif_filters(patches, a.bits, a.seed);
  save_filter_bank(bank, a.out);
  std::cerr << "learned " << a.bits << " filters of size " << size << " from " << patches.size() << " patches\n";
}

void cmd_pairs(const Args& a) {
  const KinPairList positives = read_pairs(a.positives);
  write_pairs(generate_negatives(positives, a.seed), a.out);
}

MethodFeatures load_method(const KinPairList& pairs, const fs::path& dir, const std::string& descriptor) {
  MethodFeatures m{descriptor, {}};
  std::vector<std::string> missing;
  for (const KinPair& p : pairs)
    for (const std::string& v : {p.video_a, p.video_b}) {
      if (m.by_video.count(v)) continue;
      const fs::path path = feature_path(dir, v, descriptor);
      if (!fs::is_regular_file(path)) {
        if (std::find(missing.begin(), missing.end(), v) == missing.end()) missing.push_back(v);
        continue;
      }
      m.by_video[v] = read_feature(path).values;
    }
  if (!missing.empty()) {
    std::string list;
    for (const auto& v : missing) list += (list.empty() ? "" : ", ") + v;
    throw ValidationError("missing " + descriptor + " feature files in " + dir.string() + " for " +
                          std::to_string(missing.size()) + " video(s): " + list);
  }
  return m;
}

void cmd_train(const Args& a) {
  const KinPairList pairs = read_pairs(a.pairs);
  const MethodFeatures m = load_method(pairs, a.features, a.descriptor);
  const Eigen::Index dim = m.by_video.begin()->second.size();
  Eigen::MatrixXd samples(static_cast<Eigen::Index>(pairs.size()), dim);
  Eigen::VectorXd labels(samples.rows());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& x = m.by_video.at(pairs[i].video_a);
    const auto& y = m.by_video.at(pairs[i].video_b);
    if (x.size() != dim || y.size() != dim) throw ValidationError("feature lengths differ at pair " + pairs[i].pair_id);
    samples.row(static_cast<Eigen::Index>(i)) = pair_combine(x, y).transpose();
    labels[static_cast<Eigen::Index>(i)] = pairs[i].label;
  }
  SvmOptions opts;
  opts.C = a.C;
  SvmModel model = svm_train(samples, labels, opts);
  model.descriptor = a.descriptor;
  write_model(model, a.out);
  if (!a.scores_out.empty()) {
    std::vector<ScoreRow> rows;
    for (std::size_t i = 0; i < pairs.size(); ++i)
      rows.push_back({pairs[i].pair_id, pairs[i].label, svm_decision(model, samples.row(static_cast<Eigen::Index>(i)).transpose())});
    write_scores(rows, a.scores_out);
  }
  std::cerr << "trained on " << pairs.size() << " pairs, " << model.iterations << " iterations"
            << (model.converged ? "" : " (not converged)") << '\n';
}

void cmd_evaluate(const Args& a) {
  const KinPairList pairs = read_pairs(a.pairs);
  std::vector<MethodFeatures> methods;
  for (const auto& d : a.descriptors) methods.push_back(load_method(pairs, a.features, d));
  LooOptions opts;
  opts.svm.C = a.C;
  opts.subject_disjoint = a.subject_disjoint;
  opts.jobs = a.jobs;
  const EvaluationReport report = evaluate_all(methods, pairs, opts, a.seed, a.standardize);
  fs::create_directories(a.out);
  write_report(report, a.out / "report.json");
  const std::string table = render_table(report);
  {
    std::ofstream t(a.out / "table.txt");
    t << table;
    if (!t) throw std::runtime_error("cannot write " + (a.out / "table.txt").string());
  }
  for (std::size_t m = 0; m < report.rows.size(); ++m) {
    const auto& row = report.rows[m];
    write_scores(to_rows(report, m), a.out / ("scores_" + row.method + ".csv"));
    if (!row.roc.points.empty()) write_roc(row.roc, a.out / ("roc_" + row.method + ".csv"));
  }
  std::cerr << table;
}

void cmd_fuse(const Args& a) {
  if (a.score_files.size() < 1) throw ValidationError("fuse needs at least one --scores file");
  std::vector<std::vector<ScoreRow>> lists;
  for (const auto& f : a.score_files) lists.push_back(read_scores(f));
  std::vector<Eigen::VectorXd> values;
  for (std::size_t k = 0; k < lists.size(); ++k) {
    if (lists[k].size() != lists[0].size())
      throw ValidationError(a.score_files[k].string() + " has " + std::to_string(lists[k].size()) + " rows, expected " +
                            std::to_string(lists[0].size()));
    Eigen::VectorXd v(static_cast<Eigen::Index>(lists[k].size()));
    for (std::size_t i = 0; i < lists[k].size(); ++i) {
      if (lists[k][i].pair_id != lists[0][i].pair_id || lists[k][i].label != lists[0][i].label)
        throw ValidationError(a.score_files[k].string() + ": row " + std::to_string(i + 1) + " is " +
                              lists[k][i].pair_id + ", expected " + lists[0][i].pair_id);
      v[static_cast<Eigen::Index>(i)] = lists[k][i].score;
    }
    values.push_back(v);
  }
  const Eigen::VectorXd fused = fuse_scores(values, a.standardize);
  std::vector<ScoreRow> rows = lists[0];
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i].score = fused[static_cast<Eigen::Index>(i)];
  write_scores(rows, a.out);
}

void cmd_roc(const Args& a) {
  const auto rows = read_scores(a.score_files.at(0));
  Eigen::VectorXd scores(static_cast<Eigen::Index>(rows.size())), labels(scores.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    scores[static_cast<Eigen::Index>(i)] = rows[i].score;
    labels[static_cast<Eigen::Index>(i)] = rows[i].label;
  }
  const RocCurve roc = roc_auc(scores, labels);
  write_roc(roc, a.out);
  std::cerr << "AUC " << format_double(roc.auc) << '\n';
}

void cmd_synth(const Args& a) {
  SynthConfig cfg;
  cfg.families = a.families;
  cfg.videos_per_subject = a.videos_per_subject;
  cfg.frames = a.frames;
  cfg.size = a.synth_size;
  cfg.alpha = a.alpha;
  cfg.seed = a.seed;
  cfg.signal = parse_synth_signal(a.signal);
  cfg.noise = a.noise;
  const SynthDataset data = synth_generate(cfg);
  write_synth_dataset(data, a.out);
  std::cerr << "wrote " << data.videos.size() << " videos and " << data.positives.size() << " positive pairs to "
            << a.out << '\n';
}

void cmd_checksums(const Args& a) {
  const NetworkWeights net = load_weights(a.weights);
  const auto sums = layer_checksums(preprocess(read_pnm(a.image), net), net);
  write_checksums(sums, a.out);
  if (!a.compare.empty()) {
    const auto problems = compare_checksums(read_checksums(a.compare), sums);
    for (const auto& p : problems) std::cerr << p << '\n';
    if (!problems.empty())
      throw ValidationError(std::to_string(problems.size()) + " checksum mismatch(es) against " + a.compare.string());
    std::cerr << "all " << sums.size() << " layers match " << a.compare << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kinship verification from face videos"};
  app.require_subcommand(1);
  Args a;
  try {
    a.seed = default_seed();
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }

  auto* align = app.add_subcommand("align", "Warp every video of a manifest onto the eye template");
  align->add_option("--manifest", a.manifest, "Input manifest")->required()->check(CLI::ExistingFile);
  align->add_option("--out", a.out, "Output directory")->required();
  align->add_option("--template", a.align_template, "texture (64) or deep (224)");
  align->add_option("--size", a.align_size, "Override the template side length");
  align->add_option("--jobs", a.jobs, "Worker threads")->check(CLI::PositiveNumber);

  auto* extract = app.add_subcommand("extract", "Write one feature file per video");
  extract->add_option("--manifest", a.manifest, "Manifest")->required()->check(CLI::ExistingFile);
  extract->add_option("--descriptor", a.descriptor, "lbptop, lpqtop, bsiftop or deep")
      ->required()
      ->check(CLI::IsMember({"lbptop", "lpqtop", "bsiftop", "deep"}));
  extract->add_option("--out", a.out, "Feature directory")->required();
  extract->add_option("--scales", a.scales, "e.g. 8:1,16:2,24:3 or 3,5,7");
  extract->add_option("--filters", a.filters, "BSIF filter bank")->check(CLI::ExistingFile);
  extract->add_option("--weights", a.weights, "VGGW1 network file")->check(CLI::ExistingFile);
  extract->add_option("--layer", a.layer, "Layer whose output is averaged (deep)");
  extract->add_option("--frame-stride", a.frame_stride, "Use every n-th frame (deep)")->check(CLI::PositiveNumber);
  extract->add_option("--template", a.extract_template, "Align first with the texture or deep template, or none");
  extract->add_flag("--first-frame", a.first_frame, "Spatial descriptor on frame 0 only");
  extract->add_option("--jobs", a.jobs, "Worker threads")->check(CLI::PositiveNumber);

  auto* learn = app.add_subcommand("learn-filters", "Learn a BSIF filter bank by ICA on image patches");
  learn->add_option("--images", a.images, "Directory of .pgm/.ppm images")->required()->check(CLI::ExistingDirectory);
  learn->add_option("--size", a.filter_size, "Filter side length (odd)");
  learn->add_option("--bits", a.bits, "Number of filters");
  learn->add_option("--patches", a.patches, "Patch count");
  learn->add_option("--seed", a.seed, "Seed (default: KINVID_SEED)");
  learn->add_option("--out", a.out, "Filter bank file")->required();

  auto* pairs = app.add_subcommand("pairs", "Append one negative pair per positive");
  pairs->add_option("--positives", a.positives, "Positive pairs CSV")->required()->check(CLI::ExistingFile);
  pairs->add_option("--seed", a.seed, "Seed (default: KINVID_SEED)");
  pairs->add_option("--out", a.out, "Output pairs CSV")->required();

  auto* train = app.add_subcommand("train", "Train a linear SVM on every pair");
  train->add_option("--pairs", a.pairs, "Pairs CSV")->required()->check(CLI::ExistingFile);
  train->add_option("--features", a.features, "Feature directory")->required()->check(CLI::ExistingDirectory);
  train->add_option("--descriptor", a.descriptor, "Descriptor tag")->required();
  train->add_option("--C", a.C, "SVM cost")->check(CLI::PositiveNumber);
  train->add_option("--out", a.out, "Model JSON")->required();
  train->add_option("--scores", a.scores_out, "Also write training-set decision values");

  auto* evaluate = app.add_subcommand("evaluate", "Leave-one-out evaluation per relation and pooled");
  evaluate->add_option("--pairs", a.pairs, "Pairs CSV")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--features", a.features, "Feature directory")->required()->check(CLI::ExistingDirectory);
  evaluate->add_option("--descriptor", a.descriptors, "Descriptor tag (repeat to fuse)")->required();
  evaluate->add_option("--C", a.C, "SVM cost")->check(CLI::PositiveNumber);
  evaluate->add_option("--seed", a.seed, "Seed recorded in the report (default: KINVID_SEED)");
  evaluate->add_option("--out", a.out, "Report directory")->required();
  evaluate->add_flag("--subject-disjoint", a.subject_disjoint, "Drop training pairs sharing a subject with the test pair");
  evaluate->add_flag("--standardize", a.standardize, "z-score each method before fusion");
  evaluate->add_option("--jobs", a.jobs, "Worker threads")->check(CLI::PositiveNumber);

  auto* fuse = app.add_subcommand("fuse", "Sum aligned score files");
  fuse->add_option("--scores", a.score_files, "Score CSV (repeat)")->required()->check(CLI::ExistingFile);
  fuse->add_option("--out", a.out, "Fused score CSV")->required();
  fuse->add_flag("--standardize", a.standardize, "z-score each list first");

  auto* roc = app.add_subcommand("roc", "ROC points from a score file");
  roc->add_option("--scores", a.score_files, "Score CSV")->required()->expected(1)->check(CLI::ExistingFile);
  roc->add_option("--out", a.out, "ROC CSV")->required();

  auto* synth = app.add_subcommand("synth", "Generate a synthetic family video dataset");
  synth->add_option("--out", a.out, "Output directory")->required();
  synth->add_option("--families", a.families, "Family count");
  synth->add_option("--videos-per-subject", a.videos_per_subject, "Videos per subject");
  synth->add_option("--frames", a.frames, "Frames per video");
  synth->add_option("--size", a.synth_size, "Aligned face side length");
  synth->add_option("--alpha", a.alpha, "Kin similarity strength in [0, 1]");
  synth->add_option("--signal", a.signal, "both or dynamics");
  synth->add_option("--noise", a.noise, "Pixel noise sigma");
  synth->add_option("--seed", a.seed, "Seed (default: KINVID_SEED)");

  auto* checksums = app.add_subcommand("checksums", "Per-layer activation checksums for a probe image");
  checksums->add_option("--weights", a.weights, "VGGW1 network file")->required()->check(CLI::ExistingFile);
  checksums->add_option("--image", a.image, "RGB probe image (.ppm) at the input size")->required()->check(CLI::ExistingFile);
  checksums->add_option("--out", a.out, "Checksum JSON")->required();
  checksums->add_option("--compare", a.compare, "Reference checksum JSON")->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e, std::cerr, std::cerr);
    std::cerr << app.help();
    return 1;
  }

  try {
    if (*align) cmd_align(a);
    else if (*extract) cmd_extract(a);
    else if (*learn) cmd_learn_filters(a);
    else if (*pairs) cmd_pairs(a);
    else if (*train) cmd_train(a);
    else if (*evaluate) cmd_evaluate(a);
    else if (*fuse) cmd_fuse(a);
    else if (*roc) cmd_roc(a);
    else if (*synth) cmd_synth(a);
    else if (*checksums) cmd_checksums(a);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
