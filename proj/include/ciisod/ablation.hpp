#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "ciisod/accounting.hpp"
#include "ciisod/config.hpp"
#include "ciisod/dataset.hpp"
#include "ciisod/metrics.hpp"

namespace ciisod {

struct AblationRow {
  std::string table;  // "1" (CII strategy) or "2" (interactor kind)
  std::string name;
  InteractorConfig interactor;
};

/// `{"base": <train config>, "rows": [{"table", "name", "interactor"}]}`.
/// Row interactors start from the base interactor, so only the differing
/// fields need to be listed.
struct AblationPlan {
  TrainConfig base;
  std::vector<AblationRow> rows;
};

AblationPlan ablation_plan_from_json(const nlohmann::json& j);
AblationPlan load_ablation_plan(const std::filesystem::path& path);

struct AblationResult {
  AblationRow row;
  MetricsReport report;
  ParamCount params;
  double final_loss = 0;
  double seconds = 0;
};

/// One train + eval per row, every row from the same seed.
std::vector<AblationResult> run_ablation(const AblationPlan& plan,
                                         const std::vector<Sample>& train_set,
                                         const std::vector<Sample>& val_set,
                                         int eval_threads = 1, bool verbose = false);

/// Header: table,row,kind,kernel,depth,shared,body_params,f_beta_max,mae,s_alpha,final_loss
void write_ablation_csv(const std::vector<AblationResult>& results,
                        const std::filesystem::path& path);

/// Directional comparisons (shared vs unshared 3x3 depth-2 stacks, RGC-dagger
/// vs RGC), one line each; rows that are missing are reported as such.
std::vector<std::string> ablation_claims(const std::vector<AblationResult>& results);

}  // namespace ciisod
