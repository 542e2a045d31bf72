#include "ciisod/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <thread>

#include "ciisod/checkpoint.hpp"
#include "ciisod/error.hpp"
#include "ciisod/loss.hpp"

namespace ciisod {

double lr_at(int step, int total_steps, int warmup_steps, double lr_max) {
  if (total_steps <= 0 || warmup_steps < 0 || warmup_steps >= total_steps) {
    throw ConfigError("lr schedule needs 0 <= warmup < total steps");
  }
  if (step < warmup_steps) return lr_max * step / warmup_steps;
  const double progress =
      static_cast<double>(step - warmup_steps) / static_cast<double>(total_steps - warmup_steps);
  return lr_max * 0.5 * (1.0 + std::cos(std::numbers::pi * std::min(progress, 1.0)));
}

namespace {

bool is_bn_affine(const std::string& name) {
  auto ends_with = [&](const std::string& s) {
    return name.size() >= s.size() && name.compare(name.size() - s.size(), s.size(), s) == 0;
  };
  return ends_with(".bn.gamma") || ends_with(".bn.beta");
}

}  // namespace

template <class T>
Sgd<T>::Sgd(StateList<T> params, double momentum, double weight_decay, bool exempt_bn)
    : params_(std::move(params)), momentum_(momentum), weight_decay_(weight_decay) {
  for (const auto& p : params_) {
    velocity_.emplace_back(p.count(), T(0));
    decay_.push_back(!(exempt_bn && is_bn_affine(p.name)));
  }
}

template <class T>
void Sgd<T>::step(double lr_backbone, double lr_rest) {
  for (const auto& p : params_) {
    for (T g : p.tensor.grad()) {
      if (!std::isfinite(static_cast<double>(g))) {
        throw NumericalError("non-finite gradient in " + p.name);
      }
    }
  }
  const T m = static_cast<T>(momentum_);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    const T lr = static_cast<T>(p.component == "backbone" ? lr_backbone : lr_rest);
    const T wd = decay_[i] ? static_cast<T>(weight_decay_) : T(0);
    auto grad = p.tensor.grad();
    auto& v = velocity_[i];
    T* w = p.values;
    for (std::size_t k = 0; k < v.size(); ++k) {
      v[k] = m * v[k] + grad[k] + wd * w[k];
      w[k] -= lr * v[k];
    }
  }
}

Sample fit_sample(const Sample& sample, int size) {
  if (sample.image.height == size && sample.image.width == size) return sample;
  Sample out;
  out.id = sample.id;
  out.image = resize_image(sample.image, size, size);
  out.mask = resize_mask_nearest(sample.mask, size, size);
  return out;
}

template <class T>
GrayMap predict_map(SaliencyModel<T>& model, const RgbImage& image) {
  const auto& bb = model.config().backbone;
  const RgbImage input = (image.height == bb.input_h && image.width == bb.input_w)
                             ? image
                             : resize_image(image, bb.input_h, bb.input_w);
  NoGradGuard guard;
  const Tensor<T> pred = model.forward(image_tensor<T>(input), Mode::Eval);
  GrayMap map = map_from_tensor(pred);
  if (map.height != image.height || map.width != image.width) {
    map = resize_map(map, image.height, image.width);
  }
  return map;
}

template <class T>
std::vector<GrayMap> predict_all(SaliencyModel<T>& model, const std::vector<Sample>& samples,
                                 int threads) {
  std::vector<GrayMap> maps(samples.size());
  const int workers = std::max(1, std::min<int>(threads, static_cast<int>(samples.size())));
  if (workers == 1) {
    for (std::size_t i = 0; i < samples.size(); ++i) maps[i] = predict_map(model, samples[i].image);
    return maps;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (int t = 0; t < workers; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < samples.size(); i += workers) {
          maps[i] = predict_map(model, samples[i].image);
        }
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return maps;
}

template <class T>
MetricsReport evaluate_model(SaliencyModel<T>& model, const std::vector<Sample>& samples,
                             int threads, PrAggregation aggregation) {
  const std::vector<GrayMap> maps = predict_all(model, samples, threads);
  MetricsAccumulator acc(aggregation);
  for (std::size_t i = 0; i < samples.size(); ++i) acc.add(maps[i], samples[i].mask);
  return acc.finish();
}

template <class T>
TrainResult train(SaliencyModel<T>& model, const TrainConfig& cfg,
                  const std::vector<Sample>& train_set, const std::vector<Sample>& val_set,
                  const TrainOptions& options) {
  cfg.validate();
  if (train_set.empty()) throw ContractError("train: empty training set");
  const auto started = std::chrono::steady_clock::now();

  std::vector<Sample> data;
  data.reserve(train_set.size());
  for (const auto& s : train_set) data.push_back(fit_sample(s, cfg.input_size));

  const int n = static_cast<int>(data.size());
  const int steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  const int total_steps = steps_per_epoch * cfg.epochs;
  const int warmup_steps = steps_per_epoch * cfg.warmup_epochs;

  Sgd<T> sgd(model.parameters(), cfg.momentum, cfg.weight_decay, cfg.exempt_bn_weight_decay);
  Rng shuffle_rng(cfg.seed, "shuffle");
  Rng augment_rng(cfg.seed, "augment");

  std::ofstream log;
  if (!options.out_dir.empty()) {
    std::filesystem::create_directories(options.out_dir);
    log.open(options.out_dir / "train_log.csv");
    if (!log) throw IoError("cannot write " + (options.out_dir / "train_log.csv").string());
    log << "epoch,step,lr_backbone,lr_rest,loss\n" << std::setprecision(8);
  }

  TrainResult result;
  std::vector<int> order(n);
  int step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (int i = 0; i < n; ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), shuffle_rng.engine());
    double epoch_loss = 0;
    for (int b = 0; b < steps_per_epoch; ++b, ++step) {
      std::vector<Sample> batch_samples;
      for (int k = b * cfg.batch_size; k < std::min(n, (b + 1) * cfg.batch_size); ++k) {
        batch_samples.push_back(augment(data[order[k]], augment_rng, cfg.augment));
      }
      const Batch<T> batch = make_batch<T>(batch_samples);
      const double lr_bb = lr_at(step, total_steps, warmup_steps, cfg.lr_backbone_max);
      const double lr_rest = lr_at(step, total_steps, warmup_steps, cfg.lr_rest_max);

      model.zero_grad();
      const Tensor<T> pred = model.forward(batch.images, Mode::Train);
      const Tensor<T> loss = total_loss(pred, batch.masks);
      const double value = static_cast<double>(loss.item());
      if (!std::isfinite(value)) {
        throw NumericalError("non-finite loss at epoch " + std::to_string(epoch) + " step " +
                             std::to_string(step));
      }
      loss.backward();
      sgd.step(lr_bb, lr_rest);

      if (step == 0) result.initial_loss = value;
      epoch_loss += value;
      if (log.is_open()) {
        log << epoch << "," << step << "," << lr_bb << "," << lr_rest << "," << value << "\n";
      }
      if (options.on_step) options.on_step(epoch, step, value);
    }
    epoch_loss /= steps_per_epoch;
    result.epoch_losses.push_back(epoch_loss);

    if (!val_set.empty()) {
      const MetricsReport report =
          evaluate_model(model, val_set, options.eval_threads, cfg.pr_aggregation);
      result.val_fbeta.push_back(report.f_beta_max);
      result.final_val = report;
      if (result.best_epoch < 0 || report.f_beta_max > result.best_val_fbeta) {
        result.best_epoch = epoch;
        result.best_val_fbeta = report.f_beta_max;
        if (!options.out_dir.empty()) save_checkpoint(model, options.out_dir / "best.ckpt");
      }
    }
    if (options.verbose) {
      std::cerr << "epoch " << epoch + 1 << "/" << cfg.epochs << " loss " << epoch_loss;
      if (!val_set.empty()) std::cerr << " val F-beta max " << result.val_fbeta.back();
      std::cerr << "\n";
    }
  }
  result.final_loss = result.epoch_losses.back();
  result.steps = step;
  if (!options.out_dir.empty()) {
    save_checkpoint(model, options.out_dir / "final.ckpt");
    if (val_set.empty()) save_checkpoint(model, options.out_dir / "best.ckpt");
  }
  result.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

template class Sgd<float>;
template class Sgd<double>;
template GrayMap predict_map(SaliencyModel<float>&, const RgbImage&);
template GrayMap predict_map(SaliencyModel<double>&, const RgbImage&);
template std::vector<GrayMap> predict_all(SaliencyModel<float>&, const std::vector<Sample>&, int);
template std::vector<GrayMap> predict_all(SaliencyModel<double>&, const std::vector<Sample>&, int);
template MetricsReport evaluate_model(SaliencyModel<float>&, const std::vector<Sample>&, int,
                                      PrAggregation);
template MetricsReport evaluate_model(SaliencyModel<double>&, const std::vector<Sample>&, int,
                                      PrAggregation);
template TrainResult train(SaliencyModel<float>&, const TrainConfig&, const std::vector<Sample>&,
                           const std::vector<Sample>&, const TrainOptions&);
template TrainResult train(SaliencyModel<double>&, const TrainConfig&, const std::vector<Sample>&,
                           const std::vector<Sample>&, const TrainOptions&);

}  // namespace ciisod
