#ifndef CFGSENTRY_ADVERSARIAL_H_
#define CFGSENTRY_ADVERSARIAL_H_

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cfgsentry/graph.h"
#include "cfgsentry/learn.h"

namespace cfgsentry {

// Joins two CFGs under a fresh entry and a fresh exit: ids are renumbered
// with org's nodes first (in its node order), then sel's, then new_entry and
// new_exit, both labelled 0. new_entry jumps to both entries and every exit
// of either graph jumps to new_exit. Existing labels are kept, so `org`
// remains a labelled subgraph of the result.
Cfg gea_merge(const Cfg &org, const Cfg &sel);

// Class predicted for a graph.
using Predictor = std::function<int(const Cfg &)>;

// Extracts the 23 features and runs the model.
Predictor feature_predictor(const Model &model);

enum class GeaStrategy { kMinimum, kMedian, kMaximum };

std::string_view strategy_name(GeaStrategy s);
GeaStrategy parse_strategy(std::string_view name);

// Pool sample picked by node count, sorting by (node_count, id): the first,
// the lower median or the last of the maximum-size samples with the smallest
// id. Throws std::invalid_argument on an empty pool.
const LabeledSample &select_pool_sample(std::span<const LabeledSample> pool,
                                        GeaStrategy strategy);

struct AttackRecord {
  std::string id;
  int original_prediction = 0;
  int adversarial_prediction = 0;
  // Nodes of the injected graph (GEA: the pool sample; SGEA: the pattern of
  // the successful attempt, 0 on failure).
  int injected_nodes = 0;
  int attempts = 0;
  // Already predicted as the target; not attacked and not counted in rates.
  bool pre_satisfied = false;
  // Prediction differs from the original prediction.
  bool misclassified = false;
  // Prediction equals the target class.
  bool targeted = false;
  double crafting_seconds = 0;
  // The merged graph (SGEA: only on success).
  std::optional<Cfg> adversarial;
};

struct AttackReport {
  std::string mode;      // "gea" or "sgea"
  std::string strategy;  // GEA strategy, or "ascending" for SGEA
  std::string model;     // e.g. "detector" or "classifier"
  std::string architecture;
  int target = 0;
  std::string target_name;
  // GEA: the injected pool sample and its node count.
  std::string selected_id;
  int selected_nodes = 0;
  std::vector<AttackRecord> records;

  int attacked() const;
  double misclassification_rate() const;
  double targeted_rate() const;
  // Mean injected node count over misclassified records (0 if none).
  double mean_injected_size() const;
};

// Merges the selected pool sample into every victim. Victims should be
// correctly classified samples of the opposite class.
AttackReport gea_attack(const Predictor &predict, std::span<const LabeledSample> victims,
                        std::span<const LabeledSample> pool, GeaStrategy strategy,
                        int target);

struct SgeaResult {
  bool success = false;
  Cfg graph;  // the adversarial graph, or the untouched victim on failure
  int attempts = 0;
  int injected_nodes = 0;
  int prediction = 0;
};

// Tries candidates in order, merging each into the victim, and stops at the
// first merged graph predicted as `target` (or, when `targeted` is false, as
// anything other than the victim's prediction). One model query per
// attempt, plus one for the victim unless `victim_prediction` is given.
// Throws std::invalid_argument unless the candidates are sorted by node count.
SgeaResult sgea_attack(const Predictor &predict, const Cfg &victim,
                       std::span<const Cfg> candidates, int target, bool targeted = true,
                       std::optional<int> victim_prediction = std::nullopt);

// SGEA over many victims; candidates larger than `max_injection_size` nodes
// are skipped.
AttackReport sgea_attack_all(const Predictor &predict, std::span<const LabeledSample> victims,
                             std::span<const Cfg> candidates, int target,
                             int max_injection_size, bool targeted = true);

// JSON report with per-sample records and aggregates. Crafting times are
// wall-clock and only written when requested.
std::string attack_report_json(const AttackReport &report, bool include_timing);

// One row per report: model, architecture, mode, strategy, selected pool
// size, mean injected size, attacked victims, MR, targeted MR and
// (optionally) mean crafting time.
std::string attack_table_csv(std::span<const AttackReport> reports, bool include_timing);

}  // namespace cfgsentry

#endif  // CFGSENTRY_ADVERSARIAL_H_
