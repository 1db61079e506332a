#include "rgdno/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rgdno/errors.hpp"
#include "rgdno/rng.hpp"

namespace rgdno {

using nlohmann::json;

CorpusRecipe CorpusRecipe::standard() {
  CorpusRecipe r;
  r.styles = {
      {GaitStyle::kForward, 0.26, false, 0.8, 1.3, 1.55, 2.7, 0.0, 0.0},
      {GaitStyle::kForward, 0.10, true, 0.6, 1.0, 1.6, 2.2, 0.0, 0.0},
      {GaitStyle::kSide, 0.16, false, 0.5, 0.9, 1.6, 2.3, 0.0, 0.0},
      {GaitStyle::kCrouch, 0.16, false, 0.5, 0.9, 1.5, 2.2, 0.45, 0.95},
      {GaitStyle::kCrawl, 0.14, false, 0.35, 0.6, 1.2, 1.8, 0.35, 0.55},
      {GaitStyle::kDuckUnder, 0.18, false, 0.8, 1.2, 1.6, 2.3, 0.4, 0.6},
  };
  return r;
}

void CorpusRecipe::validate() const {
  if (count <= 0) throw ValidationError("corpus recipe: count must be > 0");
  if (styles.empty()) throw ValidationError("corpus recipe: no styles listed");
  double total = 0.0;
  for (const auto& s : styles) {
    if (s.weight < 0.0) throw ValidationError("corpus recipe: negative weight");
    total += s.weight;
  }
  if (total <= 0.0) throw ValidationError("corpus recipe: zero total weight");
}

const std::vector<std::string>& tag_vocabulary() {
  static const std::vector<std::string> vocab = {
      "walk_forward", "backwards", "side_step", "crouch",
      "crawl",        "duck_under", "raise_hand", "clap"};
  return vocab;
}

int Corpus::count_tag(const std::string& tag) const {
  int n = 0;
  for (const auto& s : samples) {
    if (s.has_tag(tag)) ++n;
  }
  return n;
}

namespace {

void compute_norm_stats(Corpus& corpus) {
  corpus.norm_mean.assign(kFeatureDim, 0.0);
  corpus.norm_std.assign(kFeatureDim, 0.0);
  std::int64_t frames = 0;
  for (const auto& s : corpus.samples) frames += s.motion.length();
  if (frames == 0) throw ValidationError("corpus: no frames");
  for (const auto& s : corpus.samples) {
    const double* f = s.motion.frames.data();
    const int T = s.motion.length();
    for (int t = 0; t < T; ++t) {
      for (int c = 0; c < kFeatureDim; ++c) {
        corpus.norm_mean[static_cast<std::size_t>(c)] +=
            f[static_cast<std::size_t>(t) * kFeatureDim + c];
      }
    }
  }
  for (auto& m : corpus.norm_mean) m /= static_cast<double>(frames);
  for (const auto& s : corpus.samples) {
    const double* f = s.motion.frames.data();
    const int T = s.motion.length();
    for (int t = 0; t < T; ++t) {
      for (int c = 0; c < kFeatureDim; ++c) {
        const double d = f[static_cast<std::size_t>(t) * kFeatureDim + c] -
                         corpus.norm_mean[static_cast<std::size_t>(c)];
        corpus.norm_std[static_cast<std::size_t>(c)] += d * d;
      }
    }
  }
  for (auto& v : corpus.norm_std) {
    v = std::sqrt(v / static_cast<double>(frames));
    if (v < 1e-8) v = 1e-8;  // constant features stay finite
  }
}

}  // namespace

Corpus build_corpus(const CorpusRecipe& recipe, std::uint64_t seed) {
  recipe.validate();
  Rng rng(seed);
  Corpus corpus;
  corpus.duration = recipe.duration;
  corpus.samples.reserve(static_cast<std::size_t>(recipe.count));

  double total_weight = 0.0;
  for (const auto& s : recipe.styles) total_weight += s.weight;

  for (int i = 0; i < recipe.count; ++i) {
    Rng sample_rng = rng.fork(static_cast<std::uint64_t>(i));
    double pick = sample_rng.uniform(0.0, total_weight);
    const CorpusRecipe::StyleEntry* entry = &recipe.styles.back();
    for (const auto& s : recipe.styles) {
      if (pick < s.weight) {
        entry = &s;
        break;
      }
      pick -= s.weight;
    }

    GaitParams p;
    p.style = entry->style;
    p.reversed = entry->reversed;
    p.duration = recipe.duration;
    p.step_frequency = sample_rng.uniform(entry->freq_lo, entry->freq_hi);
    p.speed = sample_rng.uniform(entry->speed_lo, entry->speed_hi);
    p.stride = p.speed / p.step_frequency *
               sample_rng.uniform(0.92, 1.08);
    if (entry->crouch_hi > 0.0) {
      p.crouch_height = sample_rng.uniform(entry->crouch_lo, entry->crouch_hi);
    }
    if (p.style == GaitStyle::kDuckUnder) {
      p.duck_z0 = sample_rng.uniform(0.7, 1.5);
      p.duck_z1 = p.duck_z0 + sample_rng.uniform(0.5, 0.9);
    }
    const bool can_clap = p.style != GaitStyle::kCrawl;
    if (can_clap && sample_rng.uniform() < recipe.clap_prob) {
      p.overlays.clap_count = static_cast<int>(
          sample_rng.uniform_index(
              static_cast<std::uint64_t>(recipe.clap_hi - recipe.clap_lo + 1)) +
          static_cast<std::uint64_t>(recipe.clap_lo));
    } else if (can_clap && sample_rng.uniform() < recipe.raise_hand_prob) {
      p.overlays.raise_hand_frame = static_cast<int>(
          sample_rng.uniform_index(static_cast<std::uint64_t>(
              std::max(1, recipe.duration - 24))) + 4);
      p.overlays.raise_hand_len = 16;
    }

    auto sample = generate_gait(p, sample_rng.next_u64());
    std::ostringstream id;
    id << gait_style_name(p.style) << "-" << i;
    sample.id = id.str();
    corpus.samples.push_back(std::move(sample));
  }

  compute_norm_stats(corpus);
  return corpus;
}

void save_corpus(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("corpus: cannot open " + path + " for writing");
  json header;
  header["format"] = "rgdno-corpus-v1";
  header["count"] = corpus.samples.size();
  header["duration"] = corpus.duration;
  header["norm_mean"] = corpus.norm_mean;
  header["norm_std"] = corpus.norm_std;
  out << header.dump() << '\n';
  for (const auto& s : corpus.samples) {
    json rec;
    rec["id"] = s.id;
    rec["text"] = s.text;
    rec["tags"] = s.tags;
    rec["frame_rate"] = s.motion.frame_rate;
    rec["T"] = s.motion.length();
    rec["frames"] = s.motion.frames.values();
    out << rec.dump() << '\n';
  }
  if (!out) throw RuntimeFailure("corpus: write failed for " + path);
}

Corpus load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("corpus: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("corpus: empty file " + path);
  json header = json::parse(line, nullptr, false);
  if (header.is_discarded() || header.value("format", "") != "rgdno-corpus-v1") {
    throw ValidationError("corpus: bad header in " + path);
  }
  Corpus corpus;
  corpus.duration = header.at("duration").get<int>();
  corpus.norm_mean = header.at("norm_mean").get<std::vector<double>>();
  corpus.norm_std = header.at("norm_std").get<std::vector<double>>();
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json rec = json::parse(line, nullptr, false);
    if (rec.is_discarded()) {
      throw ValidationError("corpus: malformed record at line " +
                            std::to_string(line_no) + " of " + path);
    }
    AnnotatedSample s;
    s.id = rec.at("id").get<std::string>();
    s.text = rec.at("text").get<std::string>();
    s.tags = rec.at("tags").get<std::vector<std::string>>();
    const int T = rec.at("T").get<int>();
    auto flat = rec.at("frames").get<std::vector<double>>();
    if (static_cast<int>(flat.size()) != T * kFeatureDim) {
      throw ValidationError("corpus: frame data length mismatch at line " +
                            std::to_string(line_no));
    }
    s.motion.frames = Tensor::from({T, kFeatureDim}, std::move(flat));
    s.motion.frame_rate = rec.at("frame_rate").get<double>();
    corpus.samples.push_back(std::move(s));
  }
  if (corpus.samples.empty()) throw ValidationError("corpus: no samples in " + path);
  return corpus;
}

Tensor normalize_frames(const Tensor& frames, const std::vector<double>& mean,
                        const std::vector<double>& stddev) {
  auto mean_t = Tensor::from({kFeatureDim}, std::vector<double>(mean));
  auto std_t = Tensor::from({kFeatureDim}, std::vector<double>(stddev));
  return div(sub(frames, mean_t), std_t);
}

Tensor denormalize_frames(const Tensor& frames,
                          const std::vector<double>& mean,
                          const std::vector<double>& stddev) {
  auto mean_t = Tensor::from({kFeatureDim}, std::vector<double>(mean));
  auto std_t = Tensor::from({kFeatureDim}, std::vector<double>(stddev));
  return add(mul(frames, std_t), mean_t);
}

}  // namespace rgdno
