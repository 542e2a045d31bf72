#include "ciisod/ablation.hpp"

#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "ciisod/error.hpp"
#include "ciisod/trainer.hpp"

namespace ciisod {

AblationPlan ablation_plan_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("rows") || !j["rows"].is_array()) {
    throw ConfigError("ablation rows file needs a 'rows' array");
  }
  for (const auto& [key, value] : j.items()) {
    if (key != "base" && key != "rows") throw ConfigError("ablation: unknown field '" + key + "'");
  }
  AblationPlan plan;
  plan.base = j.contains("base") ? train_config_from_json(j["base"]) : TrainConfig::desk();
  for (const auto& r : j["rows"]) {
    if (!r.is_object() || !r.contains("interactor")) {
      throw ConfigError("ablation: every row needs an 'interactor'");
    }
    AblationRow row;
    row.table = r.value("table", std::string("-"));
    row.interactor = interactor_config_from_json(r["interactor"], plan.base.model.interactor);
    row.interactor.validate();
    row.name = r.value("name", to_string(row.interactor.kind));
    plan.rows.push_back(row);
  }
  if (plan.rows.empty()) throw ConfigError("ablation: no rows");
  return plan;
}

AblationPlan load_ablation_plan(const std::filesystem::path& path) {
  return ablation_plan_from_json(read_json_file(path));
}

std::vector<AblationResult> run_ablation(const AblationPlan& plan,
                                         const std::vector<Sample>& train_set,
                                         const std::vector<Sample>& val_set, int eval_threads,
                                         bool verbose) {
  if (val_set.empty()) throw ContractError("ablation needs a validation set");
  std::vector<AblationResult> results;
  for (const auto& row : plan.rows) {
    TrainConfig cfg = plan.base;
    cfg.model.interactor = row.interactor;
    SaliencyModel<float> model(cfg.model, cfg.seed);
    TrainOptions options;
    options.eval_threads = eval_threads;
    if (verbose) std::cerr << "[table " << row.table << "] " << row.name << "\n";
    const TrainResult tr = train(model, cfg, train_set, {}, options);
    AblationResult r;
    r.row = row;
    r.report = evaluate_model(model, val_set, eval_threads, cfg.pr_aggregation);
    r.params = count_params(model);
    r.final_loss = tr.final_loss;
    r.seconds = tr.seconds;
    if (verbose) {
      std::cerr << "  F-beta " << r.report.f_beta_max << "  MAE " << r.report.mae << "  S-alpha "
                << r.report.s_alpha << "  (" << r.seconds << " s)\n";
    }
    results.push_back(r);
  }
  return results;
}

void write_ablation_csv(const std::vector<AblationResult>& results,
                        const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "table,row,kind,kernel,depth,shared,body_params,f_beta_max,mae,s_alpha,final_loss\n"
      << std::setprecision(6);
  for (const auto& r : results) {
    const auto& ic = r.row.interactor;
    out << r.row.table << ",\"" << r.row.name << "\"," << to_string(ic.kind) << "," << ic.kernel
        << "," << ic.depth << "," << (ic.shared ? 1 : 0) << "," << r.params.body << ","
        << r.report.f_beta_max << "," << r.report.mae << "," << r.report.s_alpha << ","
        << r.final_loss << "\n";
  }
}

namespace {

const AblationResult* find_row(const std::vector<AblationResult>& results, InteractorKind kind,
                               int kernel, int depth, bool shared) {
  for (const auto& r : results) {
    const auto& ic = r.row.interactor;
    if (ic.kind != kind || ic.shared != shared) continue;
    if (kind == InteractorKind::PlainConv && (ic.kernel != kernel || ic.depth != depth)) continue;
    return &r;
  }
  return nullptr;
}

std::string compare(const char* claim, const AblationResult* a, const AblationResult* b) {
  std::ostringstream os;
  os << claim << ": ";
  if (!a || !b) return os.str() + "not evaluated (rows missing)";
  const double fa = a->report.f_beta_max, fb = b->report.f_beta_max;
  os << std::fixed << std::setprecision(4) << (fa >= fb ? "holds" : "does not hold") << " (F-beta "
     << fa << " vs " << fb << ", MAE " << a->report.mae << " vs " << b->report.mae << ")";
  return os.str();
}

}  // namespace

std::vector<std::string> ablation_claims(const std::vector<AblationResult>& results) {
  return {
      compare("shared >= unshared (3x3, depth 2)",
              find_row(results, InteractorKind::PlainConv, 3, 2, true),
              find_row(results, InteractorKind::PlainConv, 3, 2, false)),
      compare("RGC-dagger >= RGC", find_row(results, InteractorKind::RGCDagger, 0, 0, true),
              find_row(results, InteractorKind::RGC, 0, 0, true)),
  };
}

}  // namespace ciisod
