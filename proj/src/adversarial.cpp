#include "cfgsentry/adversarial.h"

#include <algorithm>
#include <chrono>
#include <sstream>
#include <stdexcept>

#include "cfgsentry/features.h"
#include "cfgsentry/util.h"
#include "json.hpp"

namespace cfgsentry {
namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

double ratio(int num, int den) { return den == 0 ? 0.0 : static_cast<double>(num) / den; }

}  // namespace

Cfg gea_merge(const Cfg &org, const Cfg &sel) {
  const int a = org.num_nodes();
  const int b = sel.num_nodes();
  Digraph g;
  for (int v = 0; v < a; ++v) g.add_node(org.label(v));
  for (int v = 0; v < b; ++v) g.add_node(sel.label(v));
  const int entry = g.add_node(0);
  const int exit = g.add_node(0);
  for (auto [u, v] : org.graph().edges()) g.add_edge(u, v);
  for (auto [u, v] : sel.graph().edges()) g.add_edge(a + u, a + v);
  g.add_edge(entry, org.entry_index());
  g.add_edge(entry, a + sel.entry_index());
  for (int x : org.exit_indices()) g.add_edge(x, exit);
  for (int x : sel.exit_indices()) g.add_edge(a + x, exit);
  return Cfg::from_digraph(std::move(g), entry, {exit});
}

Predictor feature_predictor(const Model &model) {
  return [&model](const Cfg &g) {
    FeatureVector f = extract_features(g);
    return predict(model, f);
  };
}

std::string_view strategy_name(GeaStrategy s) {
  switch (s) {
    case GeaStrategy::kMinimum: return "minimum";
    case GeaStrategy::kMedian: return "median";
    case GeaStrategy::kMaximum: return "maximum";
  }
  return "minimum";
}

GeaStrategy parse_strategy(std::string_view name) {
  if (name == "minimum") return GeaStrategy::kMinimum;
  if (name == "median") return GeaStrategy::kMedian;
  if (name == "maximum") return GeaStrategy::kMaximum;
  throw std::invalid_argument("unknown GEA strategy '" + std::string(name) + "'");
}

const LabeledSample &select_pool_sample(std::span<const LabeledSample> pool,
                                        GeaStrategy strategy) {
  if (pool.empty()) throw std::invalid_argument("GEA pool is empty");
  std::vector<const LabeledSample *> sorted;
  for (const auto &s : pool) sorted.push_back(&s);
  std::sort(sorted.begin(), sorted.end(), [](const LabeledSample *x, const LabeledSample *y) {
    if (x->cfg.num_nodes() != y->cfg.num_nodes()) return x->cfg.num_nodes() < y->cfg.num_nodes();
    return x->id < y->id;
  });
  switch (strategy) {
    case GeaStrategy::kMinimum:
      return *sorted.front();
    case GeaStrategy::kMedian:
      return *sorted[(sorted.size() - 1) / 2];
    case GeaStrategy::kMaximum: {
      const int largest = sorted.back()->cfg.num_nodes();
      auto first = std::find_if(sorted.begin(), sorted.end(), [&](const LabeledSample *s) {
        return s->cfg.num_nodes() == largest;
      });
      return **first;
    }
  }
  return *sorted.front();
}

int AttackReport::attacked() const {
  int n = 0;
  for (const auto &r : records) n += !r.pre_satisfied;
  return n;
}

double AttackReport::misclassification_rate() const {
  int hits = 0;
  for (const auto &r : records) hits += !r.pre_satisfied && r.misclassified;
  return ratio(hits, attacked());
}

double AttackReport::targeted_rate() const {
  int hits = 0;
  for (const auto &r : records) hits += !r.pre_satisfied && r.targeted;
  return ratio(hits, attacked());
}

double AttackReport::mean_injected_size() const {
  int n = 0;
  double sum = 0;
  for (const auto &r : records)
    if (!r.pre_satisfied && r.misclassified) {
      ++n;
      sum += r.injected_nodes;
    }
  return n == 0 ? 0.0 : sum / n;
}

AttackReport gea_attack(const Predictor &predict, std::span<const LabeledSample> victims,
                        std::span<const LabeledSample> pool, GeaStrategy strategy,
                        int target) {
  const LabeledSample &sel = select_pool_sample(pool, strategy);
  AttackReport report;
  report.mode = "gea";
  report.strategy = std::string(strategy_name(strategy));
  report.target = target;
  report.selected_id = sel.id;
  report.selected_nodes = sel.cfg.num_nodes();
  for (const auto &victim : victims) {
    auto start = std::chrono::steady_clock::now();
    AttackRecord r;
    r.id = victim.id;
    r.original_prediction = predict(victim.cfg);
    r.adversarial_prediction = r.original_prediction;
    if (r.original_prediction == target) {
      r.pre_satisfied = true;
      r.targeted = true;
    } else {
      Cfg merged = gea_merge(victim.cfg, sel.cfg);
      r.adversarial_prediction = predict(merged);
      r.injected_nodes = sel.cfg.num_nodes();
      r.attempts = 1;
      r.misclassified = r.adversarial_prediction != r.original_prediction;
      r.targeted = r.adversarial_prediction == target;
      r.adversarial = std::move(merged);
    }
    r.crafting_seconds = seconds_since(start);
    report.records.push_back(std::move(r));
  }
  return report;
}

SgeaResult sgea_attack(const Predictor &predict, const Cfg &victim,
                       std::span<const Cfg> candidates, int target, bool targeted,
                       std::optional<int> victim_prediction) {
  for (size_t i = 1; i < candidates.size(); ++i)
    if (candidates[i].num_nodes() < candidates[i - 1].num_nodes())
      throw std::invalid_argument("SGEA candidates must be sorted by node count");
  SgeaResult result{false, victim, 0, 0,
                    victim_prediction ? *victim_prediction : predict(victim)};
  const int original = result.prediction;
  for (const Cfg &candidate : candidates) {
    Cfg merged = gea_merge(victim, candidate);
    const int p = predict(merged);
    ++result.attempts;
    if (targeted ? p == target : p != original) {
      result.success = true;
      result.graph = std::move(merged);
      result.injected_nodes = candidate.num_nodes();
      result.prediction = p;
      return result;
    }
  }
  return result;
}

AttackReport sgea_attack_all(const Predictor &predict, std::span<const LabeledSample> victims,
                             std::span<const Cfg> candidates, int target,
                             int max_injection_size, bool targeted) {
  std::vector<Cfg> allowed;
  for (const Cfg &c : candidates)
    if (c.num_nodes() <= max_injection_size) allowed.push_back(c);
  AttackReport report;
  report.mode = "sgea";
  report.strategy = "ascending";
  report.target = target;
  for (const auto &victim : victims) {
    auto start = std::chrono::steady_clock::now();
    AttackRecord r;
    r.id = victim.id;
    r.original_prediction = predict(victim.cfg);
    r.adversarial_prediction = r.original_prediction;
    if (r.original_prediction == target) {
      r.pre_satisfied = true;
      r.targeted = true;
    } else {
      SgeaResult s = sgea_attack(predict, victim.cfg, allowed, target, targeted,
                                     r.original_prediction);
      r.attempts = s.attempts;
      r.adversarial_prediction = s.prediction;
      r.misclassified = s.prediction != r.original_prediction;
      r.targeted = s.prediction == target;
      if (s.success) {
        r.injected_nodes = s.injected_nodes;
        r.adversarial = std::move(s.graph);
      }
    }
    r.crafting_seconds = seconds_since(start);
    report.records.push_back(std::move(r));
  }
  return report;
}

std::string attack_report_json(const AttackReport &report, bool include_timing) {
  using json = nlohmann::json;
  json records = json::array();
  for (const auto &r : report.records) {
    json item = {{"id", r.id},
                 {"original_prediction", r.original_prediction},
                 {"adversarial_prediction", r.adversarial_prediction},
                 {"injected_nodes", r.injected_nodes},
                 {"attempts", r.attempts},
                 {"pre_satisfied", r.pre_satisfied},
                 {"misclassified", r.misclassified},
                 {"targeted", r.targeted}};
    if (include_timing) item["crafting_seconds"] = r.crafting_seconds;
    records.push_back(std::move(item));
  }
  json doc = {{"mode", report.mode},
              {"strategy", report.strategy},
              {"model", report.model},
              {"architecture", report.architecture},
              {"target", report.target},
              {"target_name", report.target_name},
              {"attacked", report.attacked()},
              {"misclassification_rate", report.misclassification_rate()},
              {"targeted_rate", report.targeted_rate()},
              {"mean_injected_size", report.mean_injected_size()},
              {"records", std::move(records)}};
  if (!report.selected_id.empty()) {
    doc["selected_id"] = report.selected_id;
    doc["selected_nodes"] = report.selected_nodes;
  }
  return doc.dump(1) + "\n";
}

std::string attack_table_csv(std::span<const AttackReport> reports, bool include_timing) {
  std::ostringstream out;
  out << "model,architecture,mode,strategy,selected_size,mean_injected_size,attacked,mr,targeted_mr";
  if (include_timing) out << ",mean_ct_seconds";
  out << "\n";
  for (const auto &r : reports) {
    out << r.model << ',' << r.architecture << ',' << r.mode << ',' << r.strategy << ','
        << r.selected_nodes << ',' << format_double(r.mean_injected_size()) << ',' << r.attacked() << ','
        << format_double(r.misclassification_rate()) << ','
        << format_double(r.targeted_rate());
    if (include_timing) {
      double total = 0;
      for (const auto &rec : r.records) total += rec.crafting_seconds;
      out << ',' << format_double(r.records.empty() ? 0.0 : total / r.records.size());
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace cfgsentry
