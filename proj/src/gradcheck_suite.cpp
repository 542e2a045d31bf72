#include "ciisod/gradcheck_suite.hpp"

#include <algorithm>
#include <numeric>

#include "ciisod/decoder.hpp"
#include "ciisod/error.hpp"
#include "ciisod/interactors.hpp"
#include "ciisod/loss.hpp"
#include "ciisod/model.hpp"
#include "ciisod/ops.hpp"

namespace ciisod {

namespace {

using TensorD = Tensor<double>;
using Params = std::vector<Parameter<double>>;

// Single ops: inputs are a shuffled grid so that no two values (and no value
// and zero) are within the FD step of each other, so one step suffices.
const std::vector<double> kOpEps{1e-4};
// Composite graphs: pre-activations are not controlled, so several steps are
// tried and probes sitting on a ReLU / max switch are skipped.
const std::vector<double> kGraphEps{1e-4, 1e-5, 1e-6, 1e-7};
constexpr double kTolerance = 1e-4;
constexpr std::size_t kGraphProbes = 12;

TensorD distinct_input(Shape shape, Rng& rng, double lo = -2.0, double hi = 2.0) {
  const std::size_t n = shape.numel();
  std::vector<double> v(n);
  for (std::size_t k = 0; k < n; ++k) {
    v[k] = lo + (hi - lo) * (static_cast<double>(k) + 0.25) / static_cast<double>(n);
  }
  std::shuffle(v.begin(), v.end(), rng.engine());
  return TensorD(shape, std::move(v), true);
}

TensorD random_tensor(Shape shape, Rng& rng, double lo, double hi, bool requires_grad) {
  std::vector<double> v(shape.numel());
  for (double& x : v) x = rng.uniform(lo, hi);
  return TensorD(shape, std::move(v), requires_grad);
}

// Scalar probe: random weighted sum of the output.
struct Probe {
  TensorD weights;
  TensorD operator()(const TensorD& y) {
    if (!weights.defined() || !(weights.shape() == y.shape())) {
      throw ContractError("probe shape changed between evaluations");
    }
    return weighted_sum(y, weights);
  }
};

Probe make_probe(Shape shape, Rng& rng) { return Probe{random_tensor(shape, rng, -1, 1, false)}; }

Params params_of(StateList<double>& state) {
  Params out;
  for (auto& e : state) {
    if (e.learnable) out.push_back({e.tensor, e.name, e.shared_group});
  }
  return out;
}

struct Runner {
  std::string module;
  std::uint64_t seed;
  std::vector<GradcheckCase>& out;

  void check(const std::string& name, const std::function<TensorD()>& loss, const Params& inputs,
             const std::vector<double>& steps, std::size_t total_entries = 0) {
    GradcheckOptions opt;
    opt.steps = steps;
    opt.tolerance = kTolerance;
    if (steps.size() > 1) opt.max_entries = kGraphProbes;
    opt.total_entries = total_entries;
    opt.seed = seed;
    out.push_back({module, name, seed, gradcheck(loss, inputs, opt)});
  }
};

void ops_cases(Runner& run, Rng& rng) {
  const Shape s{2, 3, 4, 5};
  TensorD a = distinct_input(s, rng), b = distinct_input(s, rng);
  TensorD g = distinct_input(Shape{2, 3, 1, 1}, rng);
  Probe probe = make_probe(s, rng);
  run.check("add", [&] { return probe(add(a, b)); }, {{a, "a"}, {b, "b"}}, kOpEps);
  run.check("add_broadcast", [&] { return probe(add(a, g)); }, {{a, "a"}, {g, "g"}}, kOpEps);
  run.check("mul", [&] { return probe(mul(a, b)); }, {{a, "a"}, {b, "b"}}, kOpEps);
  run.check("mul_broadcast", [&] { return probe(mul(a, g)); }, {{a, "a"}, {g, "g"}}, kOpEps);
  run.check("relu", [&] { return probe(relu(a)); }, {{a, "x"}}, kOpEps);
  run.check("sigmoid", [&] { return probe(sigmoid(a)); }, {{a, "x"}}, kOpEps);
  TensorD p = TensorD::scalar(0.7, true), q = TensorD::scalar(-1.3, true);
  run.check("add_scalars", [&] { return add_scalars(p, q); }, {{p, "p"}, {q, "q"}}, kOpEps);
}

void conv_cases(Runner& run, Rng& rng) {
  for (int k : {1, 3, 7}) {
    for (int stride : {1, 2}) {
      const int pad = k / 2;
      const Shape xs{2, 3, 9, 8};
      TensorD x = distinct_input(xs, rng);
      TensorD w = random_tensor(Shape{4, 3, k, k}, rng, -0.5, 0.5, true);
      TensorD bias = random_tensor(Shape{1, 4, 1, 1}, rng, -0.5, 0.5, true);
      const Shape ys{2, 4, window_output_size(9, k, stride, pad),
                     window_output_size(8, k, stride, pad)};
      Probe probe = make_probe(ys, rng);
      run.check("conv_k" + std::to_string(k) + "_s" + std::to_string(stride),
                [&] { return probe(conv2d(x, w, bias, stride, pad)); },
                {{x, "x"}, {w, "weight"}, {bias, "bias"}}, kOpEps);
    }
  }
}

void batchnorm_cases(Runner& run, Rng& rng) {
  const Shape s{3, 4, 3, 5};
  for (Mode mode : {Mode::Train, Mode::Eval}) {
    TensorD x = distinct_input(s, rng);
    TensorD gamma = random_tensor(Shape{1, 4, 1, 1}, rng, 0.5, 1.5, true);
    TensorD beta = random_tensor(Shape{1, 4, 1, 1}, rng, -0.5, 0.5, true);
    BatchNormState<double> state(4);
    for (int c = 0; c < 4; ++c) {
      state.running_mean[c] = rng.uniform(-0.5, 0.5);
      state.running_var[c] = rng.uniform(0.5, 2.0);
    }
    state.batches_tracked = 1;
    Probe probe = make_probe(s, rng);
    run.check(mode == Mode::Train ? "batchnorm_train" : "batchnorm_eval",
              [&] { return probe(batchnorm2d(x, gamma, beta, state, mode)); },
              {{x, "x"}, {gamma, "gamma"}, {beta, "beta"}}, kOpEps);
  }
}

void pool_cases(Runner& run, Rng& rng) {
  const Shape s{2, 3, 8, 7};
  TensorD x = distinct_input(s, rng);
  for (int k : {2, 3}) {
    const int pad = k == 3 ? 1 : 0;
    Probe probe = make_probe(Shape{2, 3, window_output_size(8, k, 2, pad),
                                   window_output_size(7, k, 2, pad)}, rng);
    run.check("maxpool_k" + std::to_string(k), [&] { return probe(maxpool2d(x, k, 2)); },
              {{x, "x"}}, kOpEps);
  }
  Probe gmp = make_probe(Shape{2, 3, 1, 1}, rng);
  run.check("global_max_pool", [&] { return gmp(global_max_pool(x)); }, {{x, "x"}}, kOpEps);
  for (int bins : {1, 2, 3, 6}) {
    Probe probe = make_probe(Shape{2, 3, bins, bins}, rng);
    run.check("adaptive_avg_pool_" + std::to_string(bins),
              [&, bins] { return probe(adaptive_avg_pool(x, bins)); }, {{x, "x"}}, kOpEps);
  }
  TensorD small = distinct_input(Shape{1, 2, 4, 4}, rng);
  Probe wide = make_probe(Shape{1, 2, 6, 6}, rng);
  run.check("adaptive_avg_pool_6_on_4", [&] { return wide(adaptive_avg_pool(small, 6)); },
            {{small, "x"}}, kOpEps);
}

void resize_cases(Runner& run, Rng& rng) {
  TensorD x = distinct_input(Shape{2, 2, 5, 6}, rng);
  const std::vector<std::pair<int, int>> targets{{10, 12}, {3, 4}, {7, 5}, {1, 1}};
  for (auto [h, w] : targets) {
    Probe probe = make_probe(Shape{2, 2, h, w}, rng);
    run.check("bilinear_" + std::to_string(h) + "x" + std::to_string(w),
              [&, h, w] { return probe(bilinear_resize(x, h, w)); }, {{x, "x"}}, kOpEps);
  }
}

void concat_cases(Runner& run, Rng& rng) {
  TensorD a = distinct_input(Shape{2, 2, 3, 3}, rng);
  TensorD b = distinct_input(Shape{2, 3, 3, 3}, rng);
  TensorD c = distinct_input(Shape{2, 1, 3, 3}, rng);
  Probe probe = make_probe(Shape{2, 6, 3, 3}, rng);
  run.check("concat", [&] { return probe(concat_channels(std::vector<TensorD>{a, b, c})); },
            {{a, "a"}, {b, "b"}, {c, "c"}}, kOpEps);
}

void loss_cases(Runner& run, Rng& rng) {
  const Shape s{3, 1, 6, 5};
  TensorD pred = random_tensor(s, rng, 0.05, 0.95, true);
  TensorD soft = random_tensor(s, rng, 0.0, 1.0, true);
  std::vector<double> bin(s.numel());
  for (double& v : bin) v = rng.bernoulli(0.4) ? 1.0 : 0.0;
  TensorD hard(s, bin, false);
  run.check("bce", [&] { return bce_loss(pred, hard); }, {{pred, "pred"}}, kOpEps);
  run.check("bce_soft_target", [&] { return bce_loss(pred, soft); },
            {{pred, "pred"}, {soft, "target"}}, kOpEps);
  run.check("iou", [&] { return iou_loss(pred, hard); }, {{pred, "pred"}}, kOpEps);
  run.check("iou_soft_target", [&] { return iou_loss(pred, soft); },
            {{pred, "pred"}, {soft, "target"}}, kOpEps);
  run.check("bce_plus_iou", [&] { return total_loss(pred, hard); }, {{pred, "pred"}}, kOpEps);
}

void rgc_cases(Runner& run, Rng& rng) {
  const int c = 4;
  Initializer init(rng.engine()());
  RGCParams<double> params(init, c, true);
  StateList<double> state;
  params.collect(state, "rgc");
  TensorD x = distinct_input(Shape{2, c, 6, 6}, rng);
  TensorD succ = distinct_input(Shape{2, c, 3, 3}, rng);
  Probe probe = make_probe(x.shape(), rng);
  Params inputs = params_of(state);
  inputs.push_back({x, "stage"});
  Params dagger = inputs;
  dagger.push_back({succ, "successor"});
  run.check("rgc", [&] { return probe(rgc_forward(x, x, params, Mode::Train)); }, inputs,
            kGraphEps);
  run.check("rgc_dagger", [&] { return probe(rgc_forward(x, succ, params, Mode::Train)); },
            dagger, kGraphEps);
  params.fuse.layers.back().relu = false;
  run.check("rgc_linear_fuse_eval", [&] { return probe(rgc_forward(x, succ, params, Mode::Eval)); },
            dagger, kGraphEps);
}

void ppm_cases(Runner& run, Rng& rng) {
  const int c = 8;
  Initializer init(rng.engine()());
  // Batch of 4: the 1x1-bin branch normalizes over n values per channel.
  PPMParams<double> params(init, c);
  StateList<double> state;
  params.collect(state, "ppm");
  TensorD x = distinct_input(Shape{4, c, 6, 6}, rng);
  TensorD succ = distinct_input(Shape{4, c, 3, 3}, rng);
  Probe probe = make_probe(x.shape(), rng);
  Params inputs = params_of(state);
  inputs.push_back({x, "stage"});
  Params dagger = inputs;
  dagger.push_back({succ, "successor"});
  run.check("ppm", [&] { return probe(ppm_forward(x, x, params, Mode::Train)); }, inputs,
            kGraphEps);
  run.check("ppm_dagger", [&] { return probe(ppm_forward(x, succ, params, Mode::Train)); },
            dagger, kGraphEps);
}

void plain_cases(Runner& run, Rng& rng) {
  Initializer init(rng.engine()());
  for (int k : {1, 3}) {
    ConvStack<double> stack(init, 4, k, 2);
    StateList<double> state;
    stack.collect(state, "plain");
    TensorD x = distinct_input(Shape{2, 4, 5, 5}, rng);
    Probe probe = make_probe(x.shape(), rng);
    Params inputs = params_of(state);
    inputs.push_back({x, "x"});
    run.check("plain_k" + std::to_string(k),
              [&] { return probe(plain_conv_forward(x, stack, Mode::Train)); }, inputs, kGraphEps);
  }
}

void decoder_cases(Runner& run, Rng& rng) {
  for (MergeMode merge : {MergeMode::Add, MergeMode::Concat}) {
    const int c = 4;
    DecoderConfig cfg{merge};
    Decoder<double> decoder(c, 3, cfg, rng.engine()());
    StateList<double> state;
    decoder.collect(state);
    std::vector<TensorD> lateral{distinct_input(Shape{2, c, 8, 8}, rng),
                                 distinct_input(Shape{2, c, 4, 4}, rng),
                                 distinct_input(Shape{2, c, 2, 2}, rng)};
    Params inputs = params_of(state);
    for (std::size_t i = 0; i < lateral.size(); ++i) {
      inputs.push_back({lateral[i], "C" + std::to_string(i + 1)});
    }
    Probe probe = make_probe(Shape{2, 1, 16, 16}, rng);
    run.check("decoder_" + to_string(merge),
              [&] { return probe(decoder.forward(lateral, 16, 16, Mode::Train)); }, inputs,
              kGraphEps);
  }
}

void model_cases(Runner& run, Rng& rng) {
  SaliencyModel<double> model(ModelConfig::desk(64), rng.engine()());
  StateList<double> state = model.state();
  TensorD x = random_tensor(Shape{1, 3, 64, 64}, rng, 0, 1, true);
  std::vector<double> bin(64 * 64);
  for (double& v : bin) v = rng.bernoulli(0.3) ? 1.0 : 0.0;
  TensorD target(Shape{1, 1, 64, 64}, bin, false);
  Params inputs = params_of(state);
  inputs.push_back({x, "image"});
  run.check("model_desk_loss", [&] { return total_loss(model.forward(x, Mode::Train), target); },
            inputs, kGraphEps, 40);
}

using CaseFn = void (*)(Runner&, Rng&);

const std::vector<std::pair<std::string, CaseFn>>& registry() {
  static const std::vector<std::pair<std::string, CaseFn>> r{
      {"ops", ops_cases},         {"conv", conv_cases},       {"batchnorm", batchnorm_cases},
      {"pool", pool_cases},       {"resize", resize_cases},   {"concat", concat_cases},
      {"loss", loss_cases},       {"rgc", rgc_cases},         {"ppm", ppm_cases},
      {"plain", plain_cases},     {"decoder", decoder_cases}, {"model", model_cases}};
  return r;
}

}  // namespace

std::vector<std::string> gradcheck_modules() {
  std::vector<std::string> names;
  for (const auto& [name, fn] : registry()) names.push_back(name);
  return names;
}

std::vector<GradcheckCase> run_gradcheck_suite(const std::string& module, int seeds,
                                               std::uint64_t base_seed) {
  if (seeds < 1) throw ConfigError("gradcheck needs at least one seed");
  bool found = module.empty();
  std::vector<GradcheckCase> out;
  for (const auto& [name, fn] : registry()) {
    if (!module.empty() && name != module) continue;
    found = true;
    for (int s = 0; s < seeds; ++s) {
      const std::uint64_t seed = base_seed + static_cast<std::uint64_t>(s);
      Rng rng(seed, name);
      Runner run{name, seed, out};
      fn(run, rng);
    }
  }
  if (!found) throw ConfigError("unknown gradcheck module '" + module + "'");
  return out;
}

}  // namespace ciisod
