#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "ciisod/config.hpp"
#include "ciisod/dataset.hpp"
#include "ciisod/metrics.hpp"
#include "ciisod/model.hpp"

namespace ciisod {

/// Linear warm-up from 0 over `warmup_steps`, then cosine decay to 0 over the
/// remaining steps.
double lr_at(int step, int total_steps, int warmup_steps, double lr_max);

/// SGD with momentum and L2 weight decay, two learning-rate groups: entries
/// whose component is "backbone" and everything else.
///   v = momentum * v + g + wd * p;  p -= lr * v
template <class T>
class Sgd {
 public:
  Sgd(StateList<T> params, double momentum, double weight_decay, bool exempt_bn = false);

  /// Throws NumericalError naming the first parameter with a non-finite
  /// gradient; in that case nothing is updated.
  void step(double lr_backbone, double lr_rest);

  const StateList<T>& params() const { return params_; }

 private:
  StateList<T> params_;
  std::vector<std::vector<T>> velocity_;
  std::vector<bool> decay_;
  double momentum_;
  double weight_decay_;
};

/// Resizes to the model input, runs eval mode and resizes the saliency map
/// back to the image size.
template <class T>
GrayMap predict_map(SaliencyModel<T>& model, const RgbImage& image);

/// Predictions for every sample; work is split over `threads` but the
/// returned order (and hence the metrics) does not depend on it.
template <class T>
std::vector<GrayMap> predict_all(SaliencyModel<T>& model, const std::vector<Sample>& samples,
                                 int threads = 1);

template <class T>
MetricsReport evaluate_model(SaliencyModel<T>& model, const std::vector<Sample>& samples,
                             int threads = 1,
                             PrAggregation aggregation = PrAggregation::PerImage);

struct TrainOptions {
  std::filesystem::path out_dir;  // log and checkpoints; nothing written when empty
  int eval_threads = 1;
  bool verbose = false;
  // Called after every optimizer step with (epoch, step, loss).
  std::function<void(int, int, double)> on_step;
};

struct TrainResult {
  double initial_loss = 0;          // loss of the very first batch
  double final_loss = 0;            // mean batch loss of the last epoch
  std::vector<double> epoch_losses;
  std::vector<double> val_fbeta;    // per epoch; empty without a validation set
  int best_epoch = -1;
  double best_val_fbeta = 0;
  MetricsReport final_val;
  int steps = 0;
  double seconds = 0;
};

/// Trains `model` in place. Writes `train_log.csv` (epoch,step,lr_backbone,
/// lr_rest,loss), `best.ckpt` and `final.ckpt` under options.out_dir.
template <class T>
TrainResult train(SaliencyModel<T>& model, const TrainConfig& cfg,
                  const std::vector<Sample>& train_set, const std::vector<Sample>& val_set,
                  const TrainOptions& options = {});

/// Brings a sample to size x size (bilinear image, nearest mask).
Sample fit_sample(const Sample& sample, int size);

}  // namespace ciisod
