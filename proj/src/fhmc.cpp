#include "cfgsentry/fhmc.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <sstream>

#include "cfgsentry/features.h"
#include "cfgsentry/isomorphism.h"
#include "json.hpp"

namespace cfgsentry {
namespace {

using json = nlohmann::json;

struct Scored {
  RankedPattern p;
  std::vector<std::uint8_t> in_family;
};

// Min-max normalization; a constant factor contributes nothing.
std::vector<double> normalized(const std::vector<double> &v) {
  if (v.empty()) return {};
  auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  std::vector<double> out(v.size(), 0.0);
  if (*hi > *lo)
    for (size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - *lo) / (*hi - *lo);
  return out;
}

std::vector<double> to_double(std::span<const std::uint8_t> bits) {
  return std::vector<double>(bits.begin(), bits.end());
}

int argmax(const std::vector<double> &p) {
  return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

}  // namespace

std::vector<double> coverage(const std::vector<std::vector<std::uint8_t>> &containment) {
  const size_t samples = containment.empty() ? 0 : containment.front().size();
  std::vector<int> occurrence(samples, 0);
  for (const auto &row : containment) {
    if (row.size() != samples) throw std::invalid_argument("ragged containment matrix");
    for (size_t s = 0; s < samples; ++s) occurrence[s] += row[s] != 0;
  }
  std::vector<double> out;
  for (const auto &row : containment) {
    double sum = 0;
    bool any = false;
    for (size_t s = 0; s < samples; ++s)
      if (row[s]) {
        sum += 1.0 / occurrence[s];
        any = true;
      }
    if (!any) throw std::invalid_argument("pattern occurs in no family sample");
    out.push_back(sum);
  }
  return out;
}

RankedPatternSet rank_patterns(std::span<const FamilyCandidates> candidates,
                               std::span<const LabeledSample> train, const RankConfig &config) {
  if (config.top_k < 1) throw std::invalid_argument("top_k must be positive");
  RankedPatternSet set;
  std::vector<const LabeledSample *> benign;
  for (const auto &s : train)
    if (s.cls == SampleClass::kBenign) benign.push_back(&s);

  for (const FamilyCandidates &fc : candidates) {
    if (!is_malware(fc.family)) throw std::invalid_argument("candidates must belong to a family");
    set.families.push_back(fc.family);
    std::vector<const LabeledSample *> members;
    for (const auto &s : train)
      if (s.cls == fc.family) members.push_back(&s);
    const int floor_count =
        static_cast<int>(std::ceil(config.min_family_fraction * static_cast<double>(members.size())));

    std::vector<Scored> kept;
    for (const Pattern &cand : fc.patterns) {
      Scored s;
      s.p.family = fc.family;
      s.p.code = cand.code;
      s.p.graph = cand.graph;
      s.p.node_count = cand.graph.size();
      for (const LabeledSample *m : members) {
        const bool hit = is_subgraph(cand.graph, m->cfg.graph());
        s.in_family.push_back(hit);
        s.p.family_frequency += hit;
      }
      if (s.p.family_frequency == 0 || s.p.family_frequency < floor_count) continue;
      for (const LabeledSample *b : benign) {
        s.p.benign_occurrences += is_subgraph(cand.graph, b->cfg.graph());
        if (s.p.benign_occurrences > config.max_benign) break;
      }
      if (s.p.benign_occurrences > config.max_benign) continue;
      kept.push_back(std::move(s));
    }

    if (!kept.empty()) {
      std::vector<std::vector<std::uint8_t>> containment;
      for (const Scored &s : kept) containment.push_back(s.in_family);
      const auto cov = coverage(containment);
      std::vector<double> size, freq, rarity;
      for (size_t i = 0; i < kept.size(); ++i) {
        kept[i].p.coverage = cov[i];
        size.push_back(kept[i].p.node_count);
        freq.push_back(kept[i].p.family_frequency);
        rarity.push_back(-kept[i].p.benign_occurrences);
      }
      const auto zs = normalized(size), zf = normalized(freq), zc = normalized(cov),
                 zr = normalized(rarity);
      const auto &w = config.weights;
      for (size_t i = 0; i < kept.size(); ++i)
        kept[i].p.rank_score = w[0] * zs[i] + w[1] * zf[i] + w[2] * zc[i] + w[3] * zr[i];
      std::sort(kept.begin(), kept.end(), [](const Scored &a, const Scored &b) {
        if (a.p.rank_score != b.p.rank_score) return a.p.rank_score > b.p.rank_score;
        return compare_codes(a.p.code, b.p.code) < 0;
      });
    }
    if (static_cast<int>(kept.size()) < config.top_k)
      set.warnings.push_back(std::string(class_name(fc.family)) + ": only " +
                             std::to_string(kept.size()) + " of " +
                             std::to_string(config.top_k) + " patterns survive the filters");
    const size_t take = std::min(kept.size(), static_cast<size_t>(config.top_k));
    for (size_t i = 0; i < take; ++i) set.patterns.push_back(std::move(kept[i].p));
  }
  return set;
}

std::vector<std::uint8_t> encode(const Cfg &sample, const RankedPatternSet &patterns,
                                 double timeout_seconds) {
  const auto start = std::chrono::steady_clock::now();
  std::vector<std::uint8_t> bits;
  bits.reserve(patterns.patterns.size());
  for (const RankedPattern &p : patterns.patterns) {
    bits.push_back(is_subgraph(p.graph, sample.graph()));
    if (timeout_seconds > 0 &&
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() >
            timeout_seconds)
      throw EncodingTimeout("pattern encoding exceeded " + std::to_string(timeout_seconds) + " s");
  }
  return bits;
}

std::string serialize_ranked_set(const RankedPatternSet &set) {
  json families = json::array();
  for (SampleClass f : set.families) families.push_back(class_name(f));
  json patterns = json::array();
  for (const RankedPattern &p : set.patterns)
    patterns.push_back({{"family", class_name(p.family)},
                        {"dfs_code", p.code.to_string()},
                        {"node_count", p.node_count},
                        {"family_frequency", p.family_frequency},
                        {"coverage", p.coverage},
                        {"benign_occurrences", p.benign_occurrences},
                        {"rank_score", p.rank_score}});
  json doc = {{"families", std::move(families)},
              {"patterns", std::move(patterns)},
              {"warnings", set.warnings}};
  return doc.dump(1) + "\n";
}

RankedPatternSet parse_ranked_set(std::string_view text) {
  RankedPatternSet set;
  try {
    json doc = json::parse(text);
    for (const auto &f : doc.at("families")) set.families.push_back(parse_class(f.get<std::string>()));
    for (const auto &item : doc.at("patterns")) {
      RankedPattern p;
      p.family = parse_class(item.at("family").get<std::string>());
      p.code = DfsCode::parse(item.at("dfs_code").get<std::string>());
      if (!is_min_code(p.code)) throw GraphError("pattern code is not canonical");
      p.graph = p.code.to_graph();
      p.node_count = item.at("node_count").get<int>();
      if (p.node_count != p.graph.size()) throw GraphError("node_count disagrees with the code");
      p.family_frequency = item.at("family_frequency").get<int>();
      p.coverage = item.at("coverage").get<double>();
      p.benign_occurrences = item.at("benign_occurrences").get<int>();
      p.rank_score = item.at("rank_score").get<double>();
      set.patterns.push_back(std::move(p));
    }
    if (doc.contains("warnings")) set.warnings = doc.at("warnings").get<std::vector<std::string>>();
  } catch (const json::exception &e) {
    throw GraphError(std::string("malformed ranked pattern set: ") + e.what());
  } catch (const std::invalid_argument &e) {
    throw GraphError(std::string("malformed ranked pattern set: ") + e.what());
  }
  return set;
}

std::string pattern_vectors_csv(std::span<const std::string> ids,
                                std::span<const std::vector<std::uint8_t>> vectors) {
  if (ids.size() != vectors.size()) throw std::invalid_argument("one id per vector required");
  const size_t width = vectors.empty() ? 0 : vectors.front().size();
  std::ostringstream out;
  out << "id";
  for (size_t i = 0; i < width; ++i) out << ",p" << i;
  out << "\n";
  for (size_t r = 0; r < vectors.size(); ++r) {
    if (vectors[r].size() != width) throw std::invalid_argument("ragged pattern vectors");
    out << ids[r];
    for (auto b : vectors[r]) out << ',' << (b ? '1' : '0');
    out << "\n";
  }
  return out.str();
}

void parse_pattern_vectors_csv(std::string_view text, std::vector<std::string> &ids,
                               std::vector<std::vector<std::uint8_t>> &vectors) {
  ids.clear();
  vectors.clear();
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line.rfind("id", 0) != 0)
    throw GraphError("pattern vector CSV lacks its header");
  const size_t width = static_cast<size_t>(std::count(line.begin(), line.end(), ','));
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    std::getline(row, cell, ',');
    ids.push_back(cell);
    std::vector<std::uint8_t> bits;
    while (std::getline(row, cell, ',')) {
      if (cell != "0" && cell != "1") throw GraphError("pattern vector cell is not 0 or 1");
      bits.push_back(cell == "1");
    }
    if (bits.size() != width) throw GraphError("pattern vector row has the wrong width");
    vectors.push_back(std::move(bits));
  }
}

Model train_sbd(std::span<const std::vector<std::uint8_t>> vectors, std::span<const int> labels,
                const TrainConfig &config) {
  if (vectors.empty() || vectors.size() != labels.size())
    throw TrainingError("SBD training needs one label per pattern vector");
  if (std::adjacent_find(labels.begin(), labels.end(), std::not_equal_to<>()) == labels.end())
    throw TrainingError("SBD training needs both benign and suspicious samples");
  Dataset data;
  for (const auto &v : vectors) data.x.push_back(to_double(v));
  data.y.assign(labels.begin(), labels.end());
  Model m(Architecture::kCnn, static_cast<int>(vectors.front().size()), 2);
  train(m, data, config);
  return m;
}

std::string_view verdict_name(VerdictKind v) {
  switch (v) {
    case VerdictKind::kBenign: return "benign";
    case VerdictKind::kMalware: return "malware";
    case VerdictKind::kSuspicious: return "suspicious";
  }
  return "benign";
}

std::string_view stage_name(Stage s) {
  switch (s) {
    case Stage::kDetector: return "detector";
    case Stage::kClassifier: return "classifier";
    case Stage::kSbd: return "sbd";
  }
  return "detector";
}

PipelineStages model_stages(const Model &detector, const Model &classifier, const Model &sbd,
                            const RankedPatternSet &patterns, double encode_timeout) {
  PipelineStages s;
  s.detector = [&detector](const Cfg &g) {
    const FeatureVector f = extract_features(g);
    return predict_proba(detector, f);
  };
  s.classifier = [&classifier](const Cfg &g) {
    const FeatureVector f = extract_features(g);
    return predict_proba(classifier, f);
  };
  s.sbd = [&sbd, &patterns, encode_timeout](const Cfg &g) {
    return predict_proba(sbd, to_double(encode(g, patterns, encode_timeout)));
  };
  return s;
}

PipelineVerdict classify_pipeline(const Cfg &sample, const PipelineStages &stages) {
  PipelineVerdict v;
  v.detector_proba = stages.detector(sample);
  if (argmax(v.detector_proba) != 0) {
    v.classifier_proba = stages.classifier(sample);
    const int family = argmax(v.classifier_proba) + 1;
    if (family >= kNumSampleClasses) throw ShapeError("classifier has too many classes");
    v.kind = VerdictKind::kMalware;
    v.family = static_cast<SampleClass>(family);
    v.stage = Stage::kClassifier;
    return v;
  }
  v.sbd_proba = stages.sbd(sample);
  v.stage = Stage::kSbd;
  v.kind = argmax(v.sbd_proba) == kSbdSuspicious ? VerdictKind::kSuspicious : VerdictKind::kBenign;
  return v;
}

std::string verdict_json_line(const PipelineVerdict &v) {
  json probabilities = {{"detector", v.detector_proba}};
  if (!v.classifier_proba.empty()) probabilities["classifier"] = v.classifier_proba;
  if (!v.sbd_proba.empty()) probabilities["sbd"] = v.sbd_proba;
  json doc = {{"id", v.id},
              {"verdict", verdict_name(v.kind)},
              {"family", v.family ? json(class_name(*v.family)) : json(nullptr)},
              {"stage", stage_name(v.stage)},
              {"probabilities", std::move(probabilities)}};
  return doc.dump() + "\n";
}

}  // namespace cfgsentry
