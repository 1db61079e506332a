#include "rgdno/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rgdno/errors.hpp"
#include "rgdno/optimizer.hpp"
#include "rgdno/parallel.hpp"
#include "rgdno/rng.hpp"

namespace rgdno {

namespace {

constexpr int kHorizontalPairs[][2] = {
    {col::kRootX, col::kRootZ},
    {col::kLFoot, col::kLFoot + 2},
    {col::kRFoot, col::kRFoot + 2},
    {col::kLHand, col::kLHand + 2},
    {col::kRHand, col::kRHand + 2},
};

double wrap_angle(double a) {
  while (a >= M_PI) a -= 2.0 * M_PI;
  while (a < -M_PI) a += 2.0 * M_PI;
  return a;
}

// Differentiable transform of constant frames by a {3} parameter tensor
// (yaw, tx, tz).
Tensor transform_frames(const Tensor& frames, const Tensor& params) {
  auto yaw = slice(params, 0, 0, 1);
  auto tx = slice(params, 0, 1, 1);
  auto tz = slice(params, 0, 2, 1);
  auto c = rgdno::cos(yaw);
  auto s = rgdno::sin(yaw);

  std::vector<Tensor> cols;
  cols.reserve(kFeatureDim);
  for (int j = 0; j < kFeatureDim; ++j) cols.push_back(slice(frames, 1, j, 1));
  for (const auto& pair : kHorizontalPairs) {
    auto x = cols[static_cast<std::size_t>(pair[0])];
    auto z = cols[static_cast<std::size_t>(pair[1])];
    cols[static_cast<std::size_t>(pair[0])] = x * c - z * s + tx;
    cols[static_cast<std::size_t>(pair[1])] = x * s + z * c + tz;
  }
  return concat(cols, 1);
}

}  // namespace

Motion apply_transform(const Motion& m, const HorizontalTransform& h) {
  NoGradGuard guard;
  auto params = Tensor::from({3}, {h.yaw, h.tx, h.tz});
  Motion out;
  out.frames = transform_frames(m.frames, params);
  out.frame_rate = m.frame_rate;
  return out;
}

std::vector<int> semantic_filter(const Corpus& corpus,
                                 const std::vector<std::string>& prompt_tags,
                                 const ConstraintSet& task) {
  auto has = [](const std::vector<std::string>& tags, const char* t) {
    return std::find(tags.begin(), tags.end(), t) != tags.end();
  };

  const bool wants_forward = has(prompt_tags, "walk_forward");
  const bool wants_backward = has(prompt_tags, "backwards");

  bool needs_clap = false, needs_locomotion = false;
  for (const auto& c : task.items) {
    if (c.kind == ConstraintKind::kClapCount) needs_clap = true;
    if (c.kind == ConstraintKind::kStepCount) needs_locomotion = true;
  }
  static const char* kLocomotion[] = {"walk_forward", "backwards", "side_step",
                                      "crouch",       "crawl",     "duck_under"};

  std::vector<int> keep;
  for (int i = 0; i < corpus.size(); ++i) {
    const auto& tags = corpus.samples[static_cast<std::size_t>(i)].tags;
    if (wants_forward && has(tags, "backwards")) continue;
    if (wants_backward && has(tags, "walk_forward")) continue;
    if (needs_clap && !has(tags, "clap")) continue;
    if (needs_locomotion) {
      bool moves = false;
      for (const char* t : kLocomotion) moves = moves || has(tags, t);
      if (!moves) continue;
    }
    keep.push_back(i);
  }
  return keep;
}

Motion resize(const Motion& m, int target_length) {
  m.validate();
  if (target_length < 2) {
    throw ValidationError("resize: target length must be at least 2");
  }
  const int src = m.length();
  if (src == target_length) {
    Motion out;
    out.frames = m.frames.clone();
    out.frame_rate = m.frame_rate;
    return out;
  }
  Motion out;
  out.frames = Tensor::zeros({target_length, kFeatureDim});
  out.frame_rate = m.frame_rate;
  const double* in = m.frames.data();
  double* dst = out.frames.data();
  for (int j = 0; j < target_length; ++j) {
    const double u =
        static_cast<double>(j) * (src - 1) / (target_length - 1);
    int i0 = static_cast<int>(u);
    if (i0 >= src - 1) i0 = src - 2;
    const double w = u - i0;
    for (int c = 0; c < kFeatureDim; ++c) {
      const double a = in[static_cast<std::size_t>(i0) * kFeatureDim + c];
      const double b = in[static_cast<std::size_t>(i0 + 1) * kFeatureDim + c];
      dst[static_cast<std::size_t>(j) * kFeatureDim + c] =
          (1.0 - w) * a + w * b;
    }
  }
  return out;
}

ConstraintSet retrieval_weighted(const ConstraintSet& retrieval_set,
                                 const std::string& difficult_id,
                                 double scale) {
  ConstraintSet out = retrieval_set;
  for (auto& c : out.items) {
    if (c.id != difficult_id) c.weight *= scale;
  }
  return out;
}

std::pair<HorizontalTransform, double> fit_transform(
    const Motion& m, const ConstraintSet& retrieval_set,
    const RetrievalSettings& settings) {
  if (retrieval_set.empty()) {
    throw ValidationError("fit_transform: empty retrieval set");
  }
  const Tensor frames = m.frames.detach();

  auto objective = [&](const Tensor& params) {
    return constraint_loss(retrieval_set, transform_frames(frames, params));
  };

  HorizontalTransform best;
  double best_error = 0.0;
  bool have_best = false;

  OptimizerConfig cfg;
  cfg.learning_rate = settings.refine_lr;
  cfg.steps = settings.refine_steps;
  cfg.warmup_fraction = 0.0;

  const int n_angles = std::max(1, settings.coarse_angles);
  for (int k = 0; k < n_angles; ++k) {
    const double angle = -M_PI + 2.0 * M_PI * k / n_angles;
    auto init = Tensor::from({3}, {angle, 0.0, 0.0});
    auto opt = optimize_noise(init, objective, cfg);
    if (!std::isfinite(opt.best_loss)) {
      throw RuntimeFailure("fit_transform: non-finite error at angle " +
                           std::to_string(angle));
    }
    if (!have_best || opt.best_loss < best_error) {
      best_error = opt.best_loss;
      best.yaw = wrap_angle(opt.best.at(0));
      best.tx = opt.best.at(1);
      best.tz = opt.best.at(2);
      have_best = true;
    }
  }

  // The identity transform is part of the search space; never do worse.
  {
    NoGradGuard guard;
    auto identity = Tensor::from({3}, {0.0, 0.0, 0.0});
    const double id_error = objective(identity).item();
    if (id_error < best_error) {
      best_error = id_error;
      best = HorizontalTransform{};
    }
  }
  return {best, best_error};
}

RetrievalReport retrieve(const Corpus& corpus,
                         const ConstraintSet& retrieval_set,
                         const std::string& difficult_id,
                         const std::vector<std::string>& prompt_tags,
                         int target_length,
                         const RetrievalSettings& settings,
                         std::uint64_t selection_seed) {
  RetrievalReport report;
  report.corpus_size = corpus.size();
  if (corpus.size() == 0) {
    throw ValidationError("retrieve: corpus is empty");
  }

  auto candidates = semantic_filter(corpus, prompt_tags, retrieval_set);
  report.candidates_after_filter = static_cast<int>(candidates.size());
  if (candidates.empty()) {
    throw ValidationError(
        "retrieve: no candidates survive the semantic filter; relax the "
        "prompt tags or the filter");
  }

  const auto weighted = retrieval_weighted(
      retrieval_set, difficult_id, settings.secondary_weight_scale);

  std::vector<RetrievalHit> fits(candidates.size());
  parallel_for(candidates.size(), [&](std::size_t i) {
    const int idx = candidates[i];
    const auto& sample = corpus.samples[static_cast<std::size_t>(idx)];
    auto resized = resize(sample.motion, target_length);
    auto [transform, error] = fit_transform(resized, weighted, settings);
    fits[i] = RetrievalHit{idx, sample.id, transform, error, -1};
  });

  std::sort(fits.begin(), fits.end(),
            [](const RetrievalHit& a, const RetrievalHit& b) {
              if (a.error != b.error) return a.error < b.error;
              return a.corpus_index < b.corpus_index;
            });

  const double threshold = settings.error_threshold
                               ? *settings.error_threshold
                               : 10.0 * fits.front().error + 1e-12;
  for (auto& hit : fits) {
    if (hit.error >= threshold) break;
    if (static_cast<int>(report.hits.size()) >= settings.top_k) break;
    hit.rank = static_cast<int>(report.hits.size());
    report.hits.push_back(hit);
  }
  report.confident = !report.hits.empty();

  if (!report.hits.empty() && settings.selection == "random" &&
      report.hits.size() > 1) {
    Rng rng(selection_seed);
    report.selected =
        static_cast<int>(rng.uniform_index(report.hits.size()));
  }
  return report;
}

}  // namespace rgdno
