#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ciisod/ablation.hpp"
#include "ciisod/accounting.hpp"
#include "ciisod/checkpoint.hpp"
#include "ciisod/config.hpp"
#include "ciisod/dataset.hpp"
#include "ciisod/error.hpp"
#include "ciisod/gradcheck_suite.hpp"
#include "ciisod/interactors.hpp"
#include "ciisod/interp.hpp"
#include "ciisod/trainer.hpp"

namespace fs = std::filesystem;
using namespace ciisod;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

void require_file(const fs::path& p, const char* what) {
  if (!fs::exists(p)) throw IoError(std::string(what) + " not found: " + p.string());
}

// Model configuration for the accounting commands: a train config file, or a preset.
ModelConfig accounting_model(const std::string& config, const std::string& preset,
                             const std::string& interactor, int size) {
  ModelConfig m;
  if (!config.empty()) {
    require_file(config, "config");
    const nlohmann::json j = read_json_file(config);
    m = train_config_from_json(j).model;
    if (j.contains("backbone") && j["backbone"].is_string() &&
        j["backbone"].get<std::string>() == "resnet50") {
      m.backbone = BackboneConfig::resnet50(m.backbone.input_h);
    }
  } else if (preset == "full") {
    m = ModelConfig::full(size);
  } else if (preset == "desk") {
    m = ModelConfig::desk(size);
  } else if (preset == "resnet50") {
    m = ModelConfig::full(size);
    m.backbone = BackboneConfig::resnet50(size);
  } else {
    throw ConfigError("unknown preset '" + preset + "'");
  }
  if (!interactor.empty()) m.interactor.kind = interactor_kind_from_string(interactor);
  return m;
}

std::vector<Sample> load_split(const std::string& dir) {
  require_file(fs::path(dir) / kManifestName, "manifest");
  return load_dataset(dir);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Salient object detection with shared lateral interactors"};
  app.require_subcommand(1);
  std::uint64_t seed = 1;
  bool seed_given = false;

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Render a synthetic saliency dataset");
  std::string gen_out;
  int gen_count = 256, gen_size = 64;
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--count", gen_count, "Number of samples")->check(CLI::PositiveNumber);
  gen->add_option("--size", gen_size, "Image side (multiple of 32)");
  gen->add_option("--seed", seed, "Random seed");

  // train
  auto* tr = app.add_subcommand("train", "Train a model");
  std::string tr_config, tr_data, tr_val, tr_out;
  int tr_threads = 1;
  bool tr_quiet = false;
  tr->add_option("--config", tr_config, "Train config JSON")->required();
  tr->add_option("--data", tr_data, "Training dataset directory")->required();
  tr->add_option("--val", tr_val, "Validation dataset directory");
  tr->add_option("--out", tr_out, "Final checkpoint path")->required();
  tr->add_option("--threads", tr_threads, "Validation threads")->check(CLI::PositiveNumber);
  tr->add_flag("--quiet", tr_quiet, "No per-epoch progress");
  auto* tr_seed = tr->add_option("--seed", seed, "Overrides the config seed");

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
  std::string ev_ckpt, ev_data, ev_report, ev_pr;
  int ev_threads = 1;
  bool ev_pooled = false;
  ev->add_option("--ckpt", ev_ckpt, "Checkpoint")->required();
  ev->add_option("--data", ev_data, "Dataset directory")->required();
  ev->add_option("--report", ev_report, "Metrics JSON output");
  ev->add_option("--pr", ev_pr, "PR curve CSV output");
  ev->add_option("--threads", ev_threads, "Worker threads")->check(CLI::PositiveNumber);
  ev->add_flag("--pooled", ev_pooled, "Pool TP/FP/FN over the dataset instead of per image");
  ev->add_option("--seed", seed, "Unused; accepted for uniformity");

  // predict
  auto* pr = app.add_subcommand("predict", "Saliency map for one image");
  std::string pr_ckpt, pr_image, pr_out;
  pr->add_option("--ckpt", pr_ckpt, "Checkpoint")->required();
  pr->add_option("--image", pr_image, "Input PPM")->required();
  pr->add_option("--out", pr_out, "Output PGM")->required();

  // ablate
  auto* ab = app.add_subcommand("ablate", "Train and evaluate every ablation row");
  std::string ab_data, ab_val, ab_rows, ab_out = "ablation.csv";
  int ab_epochs = 0, ab_threads = 1;
  ab->add_option("--data", ab_data, "Training dataset directory")->required();
  ab->add_option("--val", ab_val, "Validation dataset directory (default: --data)");
  ab->add_option("--rows", ab_rows, "Rows JSON")->required();
  ab->add_option("--out", ab_out, "Comparison CSV");
  ab->add_option("--epochs", ab_epochs, "Override the epoch budget of every row");
  ab->add_option("--threads", ab_threads, "Evaluation threads")->check(CLI::PositiveNumber);
  auto* ab_seed = ab->add_option("--seed", seed, "Overrides the base seed");

  // count-params / flops
  std::string acc_config, acc_preset = "full", acc_interactor;
  int acc_size = 224;
  auto* cp = app.add_subcommand("count-params", "Parameter accounting");
  cp->add_option("--config", acc_config, "Train config JSON");
  cp->add_option("--preset", acc_preset, "full | desk | resnet50 when no config is given");
  cp->add_option("--interactor", acc_interactor, "Override the interactor kind");
  auto* fl = app.add_subcommand("flops", "Multiply-accumulate accounting");
  fl->add_option("--config", acc_config, "Train config JSON");
  fl->add_option("--preset", acc_preset, "full | desk | resnet50 when no config is given");
  fl->add_option("--interactor", acc_interactor, "Override the interactor kind");
  fl->add_option("--size", acc_size, "Square input side")->check(CLI::PositiveNumber);

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  std::string gc_module;
  int gc_seeds = 20;
  gc->add_option("--module", gc_module, "One module (default: all)");
  gc->add_option("--seeds", gc_seeds, "Random draws per module")->check(CLI::PositiveNumber);
  gc->add_option("--seed", seed, "First seed");

  // interp-demo
  auto* id = app.add_subcommand("interp-demo", "Bilinear round-trip experiment");
  std::string id_image, id_out;
  int id_rate = 2;
  id->add_option("--image", id_image, "Input PPM")->required();
  id->add_option("--rate", id_rate, "Resampling rate")->check(CLI::Range(2, 64));
  id->add_option("--out-dir", id_out, "Output directory")->required();

  // dump-features
  auto* df = app.add_subcommand("dump-features", "Write per-stage lateral feature maps");
  std::string df_ckpt, df_image, df_out, df_stage = "after";
  df->add_option("--ckpt", df_ckpt, "Checkpoint")->required();
  df->add_option("--image", df_image, "Input PPM")->required();
  df->add_option("--out-dir", df_out, "Output directory")->required();
  df->add_option("--stage", df_stage, "before | after the interactor")
      ->check(CLI::IsMember({"before", "after"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }
  seed_given = tr_seed->count() > 0 || ab_seed->count() > 0;

  try {
    if (gen->parsed()) {
      const auto entries = gen_synthetic(gen_count, gen_size, seed, gen_out);
      std::cout << "wrote " << entries.size() << " samples to " << gen_out << "\n";
    } else if (tr->parsed()) {
      require_file(tr_config, "config");
      TrainConfig cfg = load_train_config(tr_config);
      if (seed_given) cfg.seed = seed;
      const auto train_set = load_split(tr_data);
      const auto val_set = tr_val.empty() ? std::vector<Sample>{} : load_split(tr_val);
      SaliencyModel<float> model(cfg.model, cfg.seed);
      TrainOptions options;
      const fs::path out(tr_out);
      options.out_dir = out.has_parent_path() ? out.parent_path() / (out.stem().string() + "_run")
                                              : fs::path(out.stem().string() + "_run");
      options.eval_threads = tr_threads;
      options.verbose = !tr_quiet;
      const TrainResult r = train(model, cfg, train_set, val_set, options);
      save_checkpoint(model, out);
      std::cout << std::setprecision(6) << "initial loss " << r.initial_loss << "\nfinal loss "
                << r.final_loss << "\n";
      if (!val_set.empty()) {
        std::cout << "final val F-beta max " << r.final_val.f_beta_max << " (best "
                  << r.best_val_fbeta << " at epoch " << r.best_epoch + 1 << ")\n";
      }
      std::cout << "checkpoint " << out.string() << ", log and best checkpoint in "
                << options.out_dir.string() << "\n";
    } else if (ev->parsed()) {
      require_file(ev_ckpt, "checkpoint");
      SaliencyModel<float> model = load_model<float>(ev_ckpt);
      const auto data = load_split(ev_data);
      const MetricsReport r = evaluate_model(
          model, data, ev_threads, ev_pooled ? PrAggregation::Pooled : PrAggregation::PerImage);
      if (!ev_report.empty()) write_report_json(r, ev_report);
      if (!ev_pr.empty()) write_pr_csv(r, ev_pr);
      std::cout << std::setprecision(6) << "images " << r.image_count << " (degenerate "
                << r.degenerate_count << ")\nF-beta max " << r.f_beta_max << "\nF-beta mean "
                << r.f_beta_mean << "\nMAE " << r.mae << "\nS-alpha " << r.s_alpha << "\n";
    } else if (pr->parsed()) {
      require_file(pr_ckpt, "checkpoint");
      require_file(pr_image, "image");
      SaliencyModel<float> model = load_model<float>(pr_ckpt);
      write_pgm(predict_map(model, read_ppm(pr_image)), pr_out);
    } else if (ab->parsed()) {
      require_file(ab_rows, "rows file");
      AblationPlan plan = load_ablation_plan(ab_rows);
      if (seed_given) plan.base.seed = seed;
      if (ab_epochs > 0) {
        plan.base.epochs = ab_epochs;
        plan.base.warmup_epochs = std::min(plan.base.warmup_epochs, ab_epochs - 1);
      }
      const auto train_set = load_split(ab_data);
      const auto val_set = load_split(ab_val.empty() ? ab_data : ab_val);
      const auto results = run_ablation(plan, train_set, val_set, ab_threads, true);
      write_ablation_csv(results, ab_out);
      std::cout << "wrote " << ab_out << "\n";
      for (const auto& line : ablation_claims(results)) std::cout << line << "\n";
    } else if (cp->parsed()) {
      const ModelConfig m = accounting_model(acc_config, acc_preset, acc_interactor, acc_size);
      std::cout << format_params(count_params(m));
      std::cout << "interactor body (one instance) " << interactor_body_params(m.interactor)
                << "\n";
    } else if (fl->parsed()) {
      ModelConfig m = accounting_model(acc_config, acc_preset, acc_interactor, acc_size);
      std::cout << "input " << acc_size << "x" << acc_size << "\n"
                << format_flops(estimate_flops(m, acc_size, acc_size));
    } else if (gc->parsed()) {
      const auto cases = run_gradcheck_suite(gc_module, gc_seeds, seed);
      std::map<std::string, std::pair<int, double>> summary;  // name -> failures, worst error
      std::vector<std::string> order;
      for (const auto& c : cases) {
        const std::string key = c.module + "/" + c.name;
        if (!summary.count(key)) order.push_back(key);
        auto& s = summary[key];
        s.first += c.report.passed ? 0 : 1;
        s.second = std::max(s.second, c.report.max_error());
        if (!c.report.passed) {
          std::cerr << key << " seed " << c.seed << ": " << c.report.diagnostic << "\n";
        }
      }
      int failed = 0;
      for (const auto& key : order) {
        const auto& [fails, worst] = summary[key];
        std::cout << (fails ? "FAIL " : "PASS ") << std::left << std::setw(36) << key
                  << " max rel error " << std::scientific << std::setprecision(2) << worst
                  << std::defaultfloat << "\n";
        failed += fails ? 1 : 0;
      }
      if (failed) return kNumerical;
    } else if (id->parsed()) {
      require_file(id_image, "image");
      const InterpDemo d = interp_demo(to_gray(read_ppm(id_image)), id_rate);
      write_interp_demo(d, id_out);
      std::cout << std::setprecision(9) << "rate " << id_rate << "\nl2_up_down " << d.norm_up_down
                << "\nl2_down_up " << d.norm_down_up << "\n";
    } else if (df->parsed()) {
      require_file(df_ckpt, "checkpoint");
      require_file(df_image, "image");
      SaliencyModel<float> model = load_model<float>(df_ckpt);
      const auto& bb = model.config().backbone;
      RgbImage image = read_ppm(df_image);
      if (image.height != bb.input_h || image.width != bb.input_w) {
        image = resize_image(image, bb.input_h, bb.input_w);
      }
      NoGradGuard guard;
      const FeaturePyramid<float> pyramid =
          model.backbone().forward(image_tensor<float>(image), Mode::Eval);
      const auto projected = model.cii().project_stages(pyramid, Mode::Eval);
      const auto maps =
          df_stage == "before" ? projected : model.cii().apply_projected(projected, Mode::Eval);
      for (const auto& p : dump_features(maps, df_out, df_stage)) std::cout << p.string() << "\n";
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kNumerical;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  }
  return kOk;
}
