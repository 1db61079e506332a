#include "rgdno/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rgdno/archive.hpp"
#include "rgdno/errors.hpp"
#include "rgdno/optimizer.hpp"
#include "rgdno/rng.hpp"

namespace rgdno {

NoiseSchedule NoiseSchedule::linear(int steps, double beta_start,
                                    double beta_end) {
  if (steps < 2) throw ValidationError("schedule: needs at least 2 steps");
  NoiseSchedule s;
  s.train_steps = steps;
  s.beta_start = beta_start;
  s.beta_end = beta_end;
  s.alpha_bar.resize(static_cast<std::size_t>(steps));
  double prod = 1.0;
  for (int t = 0; t < steps; ++t) {
    const double beta =
        beta_start + (beta_end - beta_start) * t / (steps - 1);
    prod *= 1.0 - beta;
    s.alpha_bar[static_cast<std::size_t>(t)] = prod;
  }
  return s;
}

std::vector<int> NoiseSchedule::respaced(int n) const {
  if (n < 1 || n > train_steps) {
    throw ValidationError("schedule: bad sampler step count " +
                          std::to_string(n));
  }
  const int stride = train_steps / n;
  std::vector<int> levels(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    levels[static_cast<std::size_t>(i)] = train_steps - 1 - i * stride;
  }
  return levels;
}

void Checkpoint::validate_noise_shape(const Tensor& z) const {
  if (!z.defined() || z.rank() != 2 || z.dim(0) != length ||
      z.dim(1) != features) {
    throw ValidationError(
        "checkpoint: noise shape mismatch, expected {" +
        std::to_string(length) + "," + std::to_string(features) + "}");
  }
}

std::vector<double> Checkpoint::condition_vector(const Condition& c) const {
  std::vector<double> v(vocab.size(), 0.0);
  if (c.tags.empty()) return v;
  int hits = 0;
  for (const auto& tag : c.tags) {
    auto it = std::find(vocab.begin(), vocab.end(), tag);
    if (it == vocab.end()) {
      throw ValidationError("condition: tag '" + tag +
                            "' is not in the checkpoint vocabulary");
    }
    v[static_cast<std::size_t>(it - vocab.begin())] = 1.0;
    ++hits;
  }
  for (auto& x : v) x /= hits;
  return v;
}

namespace {

std::vector<double> time_embedding(int t, int dim) {
  std::vector<double> e(static_cast<std::size_t>(dim));
  const int half = dim / 2;
  for (int i = 0; i < half; ++i) {
    const double freq =
        std::exp(-std::log(10000.0) * i / std::max(1, half - 1));
    e[static_cast<std::size_t>(i)] = std::sin(t * freq);
    e[static_cast<std::size_t>(half + i)] = std::cos(t * freq);
  }
  return e;
}

// Raw MLP pass on a prepared {in} or {B,in} input.
Tensor mlp_forward(const DenoiserWeights& w, const Tensor& input) {
  auto h1 = linear(input, w.w1, w.b1, Activation::kTanh);
  auto h2 = linear(h1, w.w2, w.b2, Activation::kTanh);
  auto h3 = linear(h2, w.w3, w.b3, Activation::kTanh);
  return linear(h3, w.w4, w.b4);
}

Tensor eps_single(const Checkpoint& ck, const Tensor& z_t, int t,
                  const std::vector<double>& cond_vec, bool conditional) {
  auto flat = reshape(z_t, {ck.flat_dim()});
  auto temb =
      Tensor::from({ck.time_embed_dim}, time_embedding(t, ck.time_embed_dim));
  Tensor cemb;
  if (conditional) {
    auto hot = Tensor::from({static_cast<int>(cond_vec.size())},
                            std::vector<double>(cond_vec));
    cemb = matmul(hot, ck.weights.cond_embed);
  } else {
    cemb = Tensor::zeros({ck.cond_embed_dim});
  }
  auto input = concat({flat, temb, cemb}, 0);
  return reshape(mlp_forward(ck.weights, input), {ck.length, ck.features});
}

}  // namespace

Tensor denoiser_eps(const Checkpoint& ck, const Tensor& z_t, int t,
                    const Condition& cond) {
  ck.validate_noise_shape(z_t);
  const bool has_tags = !cond.tags.empty();
  if (!has_tags || cond.guidance_scale == 0.0) {
    return eps_single(ck, z_t, t, {}, false);
  }
  const auto cvec = ck.condition_vector(cond);
  if (cond.guidance_scale == 1.0) {
    return eps_single(ck, z_t, t, cvec, true);
  }
  auto eps_c = eps_single(ck, z_t, t, cvec, true);
  auto eps_u = eps_single(ck, z_t, t, {}, false);
  return eps_u + (eps_c - eps_u) * cond.guidance_scale;
}

Tensor ddim_step(const Tensor& z_t, const Tensor& eps, double alpha_t,
                 double alpha_prev) {
  const double scale = std::sqrt(alpha_prev / alpha_t);
  return (z_t - eps * std::sqrt(1.0 - alpha_t)) * scale +
         eps * std::sqrt(1.0 - alpha_prev);
}

Tensor ddim_sample_normalized(const Checkpoint& ck, const Tensor& z,
                              const Condition& cond) {
  ck.validate_noise_shape(z);
  const auto levels = ck.schedule.respaced(ck.ddim_steps);
  Tensor x = z;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const int t = levels[i];
    const double a_t = ck.schedule.alpha_bar[static_cast<std::size_t>(t)];
    const double a_prev =
        i + 1 < levels.size()
            ? ck.schedule.alpha_bar[static_cast<std::size_t>(levels[i + 1])]
            : 1.0;
    auto eps = denoiser_eps(ck, x, t, cond);
    x = ddim_step(x, eps, a_t, a_prev);
  }
  return x;
}

Motion ddim_sample(const Checkpoint& ck, const Tensor& z,
                   const Condition& cond) {
  NoGradGuard guard;
  auto normalized = ddim_sample_normalized(ck, z, cond);
  Motion m;
  m.frames = denormalize_frames(normalized, ck.norm_mean, ck.norm_std);
  m.frame_rate = kFrameRate;
  return m;
}

Tensor ddim_invert_warm_start(const Checkpoint& ck, const Tensor& x_normalized,
                              const Condition& cond) {
  ck.validate_noise_shape(x_normalized);
  NoGradGuard guard;
  auto levels = ck.schedule.respaced(ck.ddim_steps);
  std::reverse(levels.begin(), levels.end());  // ascending
  Tensor z = x_normalized;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const int hi = levels[i];
    const int lo = i == 0 ? -1 : levels[i - 1];
    const double a_lo =
        lo >= 0 ? ck.schedule.alpha_bar[static_cast<std::size_t>(lo)] : 1.0;
    const double a_hi = ck.schedule.alpha_bar[static_cast<std::size_t>(hi)];
    // First-order inversion: evaluate the denoiser at the current (less
    // noisy) latent and solve the sampler update for the higher level.
    auto eps = denoiser_eps(ck, z, std::max(lo, 0), cond);
    z = (z - eps * std::sqrt(1.0 - a_lo)) * std::sqrt(a_hi / a_lo) +
        eps * std::sqrt(1.0 - a_hi);
  }
  return z;
}

InversionResult invert(const Checkpoint& ck, const Tensor& x_normalized,
                       const Condition& cond, int steps, double lr) {
  InversionResult result;
  auto warm = ddim_invert_warm_start(ck, x_normalized, cond);
  const Tensor target = x_normalized.detach();
  auto objective = [&](const Tensor& z) {
    return mean(square(ddim_sample_normalized(ck, z, cond) - target));
  };
  OptimizerConfig cfg;
  cfg.learning_rate = lr;
  cfg.steps = steps;
  auto opt = optimize_noise(warm, objective, cfg);
  result.noise = opt.best;
  result.loss_curve = std::move(opt.loss_curve);
  result.rmse = std::sqrt(opt.best_loss);
  result.low_confidence = result.rmse > 0.2;
  return result;
}

Checkpoint train(const Corpus& corpus, const TrainConfig& cfg) {
  if (corpus.samples.empty()) {
    throw ValidationError("train: corpus is empty");
  }
  if (cfg.steps <= 0 || cfg.batch <= 0) {
    throw ValidationError("train: steps and batch must be > 0");
  }

  Checkpoint ck;
  ck.length = corpus.duration;
  ck.width = cfg.width;
  ck.ddim_steps = cfg.ddim_steps;
  ck.schedule = NoiseSchedule::linear();
  ck.norm_mean = corpus.norm_mean;
  ck.norm_std = corpus.norm_std;
  ck.vocab = tag_vocabulary();

  Rng rng(cfg.seed);
  const int flat = ck.flat_dim();
  const int in_dim = flat + ck.time_embed_dim + ck.cond_embed_dim;
  const int vocab_n = static_cast<int>(ck.vocab.size());

  auto init = [&](int rows, int cols) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(rows));
    std::vector<double> w(static_cast<std::size_t>(rows) * cols);
    for (auto& v : w) v = rng.normal() * scale;
    return Tensor::from({rows, cols}, std::move(w)).set_requires_grad(true);
  };
  auto& w = ck.weights;
  w.w1 = init(in_dim, cfg.width);
  w.b1 = Tensor::zeros({cfg.width}).set_requires_grad(true);
  w.w2 = init(cfg.width, cfg.width);
  w.b2 = Tensor::zeros({cfg.width}).set_requires_grad(true);
  w.w3 = init(cfg.width, cfg.width);
  w.b3 = Tensor::zeros({cfg.width}).set_requires_grad(true);
  w.w4 = init(cfg.width, flat);
  w.b4 = Tensor::zeros({flat}).set_requires_grad(true);
  {
    std::vector<double> e(static_cast<std::size_t>(vocab_n) * ck.cond_embed_dim);
    for (auto& v : e) v = rng.normal() * 0.05;
    w.cond_embed =
        Tensor::from({vocab_n, ck.cond_embed_dim}, std::move(e))
            .set_requires_grad(true);
  }

  // Pre-normalize all samples once.
  std::vector<std::vector<double>> data;
  std::vector<std::vector<double>> conds;
  data.reserve(corpus.samples.size());
  for (const auto& s : corpus.samples) {
    if (s.motion.length() != ck.length) {
      throw ValidationError("train: sample " + s.id +
                            " length differs from corpus duration");
    }
    auto normed =
        normalize_frames(s.motion.frames, ck.norm_mean, ck.norm_std);
    data.push_back(normed.values());
    Condition c;
    c.tags = s.tags;
    conds.push_back(ck.condition_vector(c));
  }

  std::vector<Tensor*> params = {&w.w1, &w.b1, &w.w2, &w.b2, &w.w3,
                                 &w.b3, &w.w4, &w.b4, &w.cond_embed};
  struct Moments {
    std::vector<double> m, v;
  };
  std::vector<Moments> moments(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    moments[i].m.assign(static_cast<std::size_t>(params[i]->numel()), 0.0);
    moments[i].v.assign(static_cast<std::size_t>(params[i]->numel()), 0.0);
  }

  const int steps_per_epoch = std::max(
      1, static_cast<int>((corpus.samples.size() + cfg.batch - 1) / cfg.batch));
  double epoch_acc = 0.0;
  int epoch_count = 0;
  int epoch_index = 0;

  for (int step = 0; step < cfg.steps; ++step) {
    const int B = cfg.batch;
    std::vector<double> zbatch(static_cast<std::size_t>(B) * flat);
    std::vector<double> tbatch(static_cast<std::size_t>(B) * ck.time_embed_dim);
    std::vector<double> hotbatch(static_cast<std::size_t>(B) * vocab_n, 0.0);
    std::vector<double> epsbatch(static_cast<std::size_t>(B) * flat);

    for (int r = 0; r < B; ++r) {
      const std::size_t idx = rng.uniform_index(corpus.samples.size());
      const int t = static_cast<int>(
          rng.uniform_index(static_cast<std::uint64_t>(ck.schedule.train_steps)));
      const double a = ck.schedule.alpha_bar[static_cast<std::size_t>(t)];
      const double sa = std::sqrt(a);
      const double sb = std::sqrt(1.0 - a);
      const auto& x0 = data[idx];
      for (int j = 0; j < flat; ++j) {
        const double noise = rng.normal();
        epsbatch[static_cast<std::size_t>(r) * flat + j] = noise;
        zbatch[static_cast<std::size_t>(r) * flat + j] = sa * x0[static_cast<std::size_t>(j)] + sb * noise;
      }
      const auto temb = time_embedding(t, ck.time_embed_dim);
      std::copy(temb.begin(), temb.end(),
                tbatch.begin() + static_cast<std::ptrdiff_t>(r) * ck.time_embed_dim);
      if (rng.uniform() >= cfg.cond_dropout) {  // 10% unconditional
        const auto& cvec = conds[idx];
        std::copy(cvec.begin(), cvec.end(),
                  hotbatch.begin() + static_cast<std::ptrdiff_t>(r) * vocab_n);
      }
    }

    auto zb = Tensor::from({B, flat}, std::move(zbatch));
    auto tb = Tensor::from({B, ck.time_embed_dim}, std::move(tbatch));
    auto hot = Tensor::from({B, vocab_n}, std::move(hotbatch));
    auto target = Tensor::from({B, flat}, std::move(epsbatch));

    auto cemb = matmul(hot, w.cond_embed);
    auto input = concat({zb, tb, cemb}, 1);
    auto pred = mlp_forward(w, input);
    auto loss = mean(square(pred - target));
    const double value = loss.item();
    if (!std::isfinite(value)) {
      throw RuntimeFailure("train: loss became non-finite at step " +
                           std::to_string(step));
    }
    backward(loss);

    const double c1 = 1.0 - std::pow(0.9, step + 1);
    const double c2 = 1.0 - std::pow(0.999, step + 1);
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
      Tensor& p = *params[pi];
      auto gt = p.grad();
      const auto& g = gt.values();
      double* pd = p.data();
      auto& mo = moments[pi];
      for (std::size_t i = 0; i < g.size(); ++i) {
        mo.m[i] = 0.9 * mo.m[i] + 0.1 * g[i];
        mo.v[i] = 0.999 * mo.v[i] + 0.001 * g[i] * g[i];
        pd[i] -= cfg.learning_rate * (mo.m[i] / c1) /
                 (std::sqrt(mo.v[i] / c2) + 1e-8);
      }
    }

    epoch_acc += value;
    ++epoch_count;
    if (epoch_count == steps_per_epoch || step + 1 == cfg.steps) {
      const double mean_loss = epoch_acc / epoch_count;
      if (cfg.epoch_losses_out) cfg.epoch_losses_out->push_back(mean_loss);
      if (cfg.logger) cfg.logger(epoch_index, mean_loss);
      epoch_acc = 0.0;
      epoch_count = 0;
      ++epoch_index;
    }
  }

  // Freeze: sampling and noise optimization never touch weight gradients.
  for (Tensor* p : params) p->set_requires_grad(false);
  return ck;
}

void Checkpoint::save(const std::string& path) const {
  Archive a;
  a.put_ints("format", {1});
  a.put_ints("dims", {length, features, width, time_embed_dim, cond_embed_dim,
                      ddim_steps});
  a.put_ints("schedule_steps", {schedule.train_steps});
  a.put_doubles("schedule_beta", {schedule.beta_start, schedule.beta_end});
  a.put_doubles("norm_mean", norm_mean);
  a.put_doubles("norm_std", norm_std);
  a.put_strings("vocab", vocab);
  a.put_tensor("w1", weights.w1);
  a.put_tensor("b1", weights.b1);
  a.put_tensor("w2", weights.w2);
  a.put_tensor("b2", weights.b2);
  a.put_tensor("w3", weights.w3);
  a.put_tensor("b3", weights.b3);
  a.put_tensor("w4", weights.w4);
  a.put_tensor("b4", weights.b4);
  a.put_tensor("cond_embed", weights.cond_embed);
  a.write(path);
}

Checkpoint Checkpoint::load(const std::string& path) {
  Archive a = Archive::read(path);
  if (a.int_value("format") != 1) {
    throw ValidationError("checkpoint: unsupported format version in " + path);
  }
  Checkpoint ck;
  const auto& dims = a.ints("dims");
  if (dims.size() != 6) throw ValidationError("checkpoint: bad dims entry");
  ck.length = static_cast<int>(dims[0]);
  ck.features = static_cast<int>(dims[1]);
  ck.width = static_cast<int>(dims[2]);
  ck.time_embed_dim = static_cast<int>(dims[3]);
  ck.cond_embed_dim = static_cast<int>(dims[4]);
  ck.ddim_steps = static_cast<int>(dims[5]);
  const auto& beta = a.doubles("schedule_beta");
  ck.schedule = NoiseSchedule::linear(
      static_cast<int>(a.int_value("schedule_steps")), beta[0], beta[1]);
  ck.norm_mean = a.doubles("norm_mean");
  ck.norm_std = a.doubles("norm_std");
  ck.vocab = a.strings("vocab");
  ck.weights.w1 = a.tensor("w1");
  ck.weights.b1 = a.tensor("b1");
  ck.weights.w2 = a.tensor("w2");
  ck.weights.b2 = a.tensor("b2");
  ck.weights.w3 = a.tensor("w3");
  ck.weights.b3 = a.tensor("b3");
  ck.weights.w4 = a.tensor("w4");
  ck.weights.b4 = a.tensor("b4");
  ck.weights.cond_embed = a.tensor("cond_embed");
  return ck;
}

}  // namespace rgdno
