#include "cfgsentry/experiment.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cfgsentry/corpus.h"
#include "cfgsentry/features.h"
#include "cfgsentry/graph_io.h"
#include "cfgsentry/util.h"
#include "json.hpp"

namespace cfgsentry {
namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

void note(const ReproOptions &options, const std::string &message) {
  if (options.log) *options.log << "[repro] " << message << std::endl;
}

std::vector<double> features_of(const Cfg &g) {
  const FeatureVector f = extract_features(g);
  return {f.begin(), f.end()};
}

void write_features(const fs::path &path, std::span<const LabeledSample> samples) {
  std::vector<std::string> ids;
  std::vector<FeatureVector> rows;
  for (const auto &s : samples) {
    ids.push_back(s.id);
    rows.push_back(extract_features(s.cfg));
  }
  std::ostringstream out;
  write_feature_csv(out, ids, rows);
  write_file(path, out.str());
}

int floor_support(double fraction, size_t members) {
  return std::max(1, static_cast<int>(std::ceil(fraction * static_cast<double>(members))));
}

std::vector<std::vector<std::uint8_t>> encode_all(std::span<const LabeledSample> samples,
                                                  const RankedPatternSet &patterns,
                                                  double timeout) {
  std::vector<std::vector<std::uint8_t>> out;
  for (const auto &s : samples) out.push_back(encode(s.cfg, patterns, timeout));
  return out;
}

void write_vectors(const fs::path &path, std::span<const LabeledSample> samples,
                   std::span<const std::vector<std::uint8_t>> vectors) {
  std::vector<std::string> ids;
  for (const auto &s : samples) ids.push_back(s.id);
  write_file(path, pattern_vectors_csv(ids, vectors));
}

json metrics_doc(const EvalMetrics &m) { return json::parse(metrics_json(m)); }

}  // namespace

Dataset detector_dataset(std::span<const LabeledSample> samples) {
  Dataset d;
  for (const auto &s : samples) {
    d.x.push_back(features_of(s.cfg));
    d.y.push_back(is_malware(s.cls) ? 1 : 0);
  }
  return d;
}

Dataset classifier_dataset(std::span<const LabeledSample> samples) {
  Dataset d;
  for (const auto &s : samples) {
    if (!is_malware(s.cls)) continue;
    d.x.push_back(features_of(s.cfg));
    d.y.push_back(static_cast<int>(s.cls) - 1);
  }
  return d;
}

std::vector<LabeledSample> samples_of(std::span<const LabeledSample> samples, SampleClass cls) {
  std::vector<LabeledSample> out;
  for (const auto &s : samples)
    if (s.cls == cls) out.push_back(s);
  return out;
}

std::uint64_t split_seed(const ExperimentConfig &config) {
  return derive_seed(config.corpus.seed, 101);
}

std::uint64_t model_seed(const ExperimentConfig &config, std::string_view task, Architecture arch) {
  std::uint64_t stream = task == "detector" ? 200 : task == "classifier" ? 210 : 300;
  return derive_seed(config.corpus.seed, stream + static_cast<std::uint64_t>(arch));
}

std::vector<FamilyCandidates> mine_family_candidates(std::span<const LabeledSample> train,
                                                     const ExperimentConfig &config) {
  std::vector<FamilyCandidates> out;
  for (int c = 1; c < kNumSampleClasses; ++c) {
    const auto family = static_cast<SampleClass>(c);
    const size_t members = samples_of(train, family).size();
    if (members == 0) continue;
    DiscriminativeConfig dc;
    dc.min_support = floor_support(config.rank.min_family_fraction, members);
    dc.min_nodes = config.mine_min_nodes;
    dc.max_nodes = config.mine_max_nodes;
    dc.top_n = config.candidates_per_family;
    out.push_back({family, select_discriminative(train, family, dc)});
  }
  return out;
}

std::vector<Pattern> mine_sgea_patterns(std::span<const LabeledSample> train,
                                        const ExperimentConfig &config) {
  // The best candidates of every size, so larger injections stay available
  // when many small patterns score higher.
  std::vector<Pattern> patterns;
  for (int size = config.mine_min_nodes; size <= config.sgea_max_injection; ++size) {
    DiscriminativeConfig dc;
    dc.min_support = floor_support(config.rank.min_family_fraction,
                                   samples_of(train, SampleClass::kBenign).size());
    dc.min_nodes = size;
    dc.max_nodes = size;
    dc.top_n = config.sgea_candidates;
    for (auto &p : select_discriminative(train, SampleClass::kBenign, dc))
      patterns.push_back(std::move(p));
  }
  return patterns;
}

Model train_sbd_on(std::span<const LabeledSample> train, const RankedPatternSet &patterns,
                   const ExperimentConfig &config) {
  auto vectors = encode_all(train, patterns, config.encode_timeout);
  std::vector<int> labels;
  for (const auto &s : train) labels.push_back(is_malware(s.cls) ? kSbdSuspicious : kSbdBenign);
  TrainConfig tc = config.sbd_train;
  tc.seed = model_seed(config, "sbd", Architecture::kCnn);
  return train_sbd(vectors, labels, tc);
}

double ReproSummary::ae_flag_rate() const {
  return evading_examples == 0 ? 0.0 : static_cast<double>(flagged_examples) / evading_examples;
}

double ReproSummary::benign_false_flag_rate() const {
  return benign_test == 0 ? 0.0 : static_cast<double>(benign_flagged) / benign_test;
}

std::string summary_json(const ReproSummary &s) {
  json attacks = json::array();
  for (const auto &r : s.attacks)
    attacks.push_back({{"model", r.model},
                       {"architecture", r.architecture},
                       {"mode", r.mode},
                       {"strategy", r.strategy},
                       {"selected_nodes", r.selected_nodes},
                       {"attacked", r.attacked()},
                       {"misclassification_rate", r.misclassification_rate()},
                       {"targeted_rate", r.targeted_rate()},
                       {"mean_injected_size", r.mean_injected_size()}});
  json doc = {
      {"detector", {{"cnn", metrics_doc(s.detector[0])}, {"dnn", metrics_doc(s.detector[1])}}},
      {"classifier",
       {{"cnn", metrics_doc(s.classifier[0])}, {"dnn", metrics_doc(s.classifier[1])}}},
      {"attacks", std::move(attacks)},
      {"ranked_patterns", s.ranked_patterns},
      {"rank_warnings", s.rank_warnings},
      {"sgea_candidates", s.sgea_candidates},
      {"sbd_train_accuracy", s.sbd_train_accuracy},
      {"evading_examples", s.evading_examples},
      {"flagged_examples", s.flagged_examples},
      {"ae_flag_rate", s.ae_flag_rate()},
      {"benign_test", s.benign_test},
      {"benign_flagged", s.benign_flagged},
      {"benign_false_flag_rate", s.benign_false_flag_rate()},
      {"test_size", s.test_size},
      {"verdicts", s.verdicts}};
  return doc.dump(1) + "\n";
}

ReproSummary run_repro(const ExperimentConfig &config, const fs::path &out,
                       const ReproOptions &options) {
  config.validate();
  ReproSummary summary;
  write_file(out / "config.ini", experiment_config_ini(config));

  note(options, "generating corpus");
  const auto corpus = generate_corpus(config.corpus);
  const auto [train, test] = split_corpus(corpus, config.train_fraction, split_seed(config));
  save_corpus(corpus, out / "corpus");
  save_manifest(train, out / "corpus" / "train.json");
  save_manifest(test, out / "corpus" / "test.json");
  summary.test_size = static_cast<int>(test.size());

  note(options, "extracting features");
  write_features(out / "features" / "train.csv", train);
  write_features(out / "features" / "test.csv", test);

  const Dataset det_train = detector_dataset(train), det_test = detector_dataset(test);
  const Dataset cls_train = classifier_dataset(train), cls_test = classifier_dataset(test);
  std::vector<Model> detectors, classifiers;
  for (Architecture arch : {Architecture::kCnn, Architecture::kDnn}) {
    const std::string name(architecture_name(arch));
    note(options, "training " + name + " detector and classifier");
    TrainConfig tc = config.train;
    tc.seed = model_seed(config, "detector", arch);
    Model det(arch, kNumFeatures, 2);
    cfgsentry::train(det, det_train, tc);
    tc.seed = model_seed(config, "classifier", arch);
    Model cls(arch, kNumFeatures, kNumSampleClasses - 1);
    cfgsentry::train(cls, cls_train, tc);
    const int a = static_cast<int>(arch);
    summary.detector[a] = evaluate(det, det_test, true);
    summary.classifier[a] = evaluate(cls, cls_test, false);
    save_model(det, out / "models" / ("detector_" + name + ".bin"));
    save_model(cls, out / "models" / ("classifier_" + name + ".bin"));
    write_file(out / "metrics" / ("detector_" + name + ".json"), metrics_json(summary.detector[a]));
    write_file(out / "metrics" / ("classifier_" + name + ".json"),
               metrics_json(summary.classifier[a]));
    detectors.push_back(std::move(det));
    classifiers.push_back(std::move(cls));
  }

  note(options, "mining family candidates");
  const auto candidates = mine_family_candidates(train, config);
  for (const auto &fc : candidates)
    write_file(out / "patterns" / ("mined_" + std::string(class_name(fc.family)) + ".json"),
               serialize_patterns(fc.patterns));
  note(options, "ranking patterns");
  const RankedPatternSet ranked = rank_patterns(candidates, train, config.rank);
  summary.ranked_patterns = ranked.size();
  summary.rank_warnings = ranked.warnings;
  for (const auto &w : ranked.warnings) note(options, "warning: " + w);
  write_file(out / "patterns" / "ranked.json", serialize_ranked_set(ranked));

  note(options, "mining SGEA candidates");
  const auto sgea_patterns = mine_sgea_patterns(train, config);
  summary.sgea_candidates = static_cast<int>(sgea_patterns.size());
  write_file(out / "patterns" / "sgea_candidates.json", serialize_patterns(sgea_patterns));
  std::vector<Cfg> sgea_graphs;
  for (const auto &p : sgea_patterns) sgea_graphs.push_back(pattern_cfg(p.graph));

  note(options, "encoding and training the suspicious-behavior detector");
  const auto train_vectors = encode_all(train, ranked, config.encode_timeout);
  const auto test_vectors = encode_all(test, ranked, config.encode_timeout);
  write_vectors(out / "vectors" / "train.csv", train, train_vectors);
  write_vectors(out / "vectors" / "test.csv", test, test_vectors);
  Model sbd = train_sbd_on(train, ranked, config);
  save_model(sbd, out / "models" / "sbd.bin");
  {
    int correct = 0;
    for (size_t i = 0; i < train.size(); ++i) {
      std::vector<double> x(train_vectors[i].begin(), train_vectors[i].end());
      correct += predict(sbd, x) == (is_malware(train[i].cls) ? kSbdSuspicious : kSbdBenign);
    }
    summary.sbd_train_accuracy = static_cast<double>(correct) / static_cast<double>(train.size());
  }

  note(options, "attacking");
  const auto malware_test = [&] {
    std::vector<LabeledSample> v;
    for (const auto &s : test)
      if (is_malware(s.cls)) v.push_back(s);
    return v;
  }();
  const auto benign_pool = samples_of(train, SampleClass::kBenign);
  const auto family_a_test = samples_of(test, SampleClass::kFamilyA);
  const auto family_b_pool = samples_of(train, SampleClass::kFamilyB);
  std::vector<const AttackReport *> pipeline_attacks;
  for (Architecture arch : {Architecture::kCnn, Architecture::kDnn}) {
    const int a = static_cast<int>(arch);
    const std::string name(architecture_name(arch));
    const Predictor det = feature_predictor(detectors[a]);
    const Predictor cls = feature_predictor(classifiers[a]);
    auto add = [&](AttackReport r, const std::string &model, const std::string &target_name) {
      r.model = model;
      r.architecture = name;
      r.target_name = target_name;
      summary.attacks.push_back(std::move(r));
    };
    for (GeaStrategy s : {GeaStrategy::kMinimum, GeaStrategy::kMedian, GeaStrategy::kMaximum})
      add(gea_attack(det, malware_test, benign_pool, s, 0), "detector", "benign");
    add(sgea_attack_all(det, malware_test, sgea_graphs, 0, config.sgea_max_injection,
                        config.sgea_targeted),
        "detector", "benign");
    if (!family_a_test.empty() && !family_b_pool.empty())
      for (GeaStrategy s : {GeaStrategy::kMinimum, GeaStrategy::kMedian, GeaStrategy::kMaximum})
        add(gea_attack(cls, family_a_test, family_b_pool, s, 1), "classifier",
            std::string(class_name(SampleClass::kFamilyB)));
  }
  for (const auto &r : summary.attacks) {
    std::string file = r.model + "_" + r.architecture + "_" + r.mode;
    if (r.mode == "gea") file += "_" + r.strategy;
    write_file(out / "attacks" / (file + ".json"), attack_report_json(r, options.timing));
    if (r.model == "detector" && r.architecture == architecture_name(config.pipeline_architecture))
      pipeline_attacks.push_back(&r);
  }
  write_file(out / "attacks" / "summary.csv", attack_table_csv(summary.attacks, options.timing));

  note(options, "running the pipeline");
  const int pa = static_cast<int>(config.pipeline_architecture);
  const PipelineStages stages =
      model_stages(detectors[pa], classifiers[pa], sbd, ranked, config.encode_timeout);
  std::string log;
  for (const auto &s : test) {
    PipelineVerdict v = classify_pipeline(s.cfg, stages);
    v.id = s.id;
    log += verdict_json_line(v);
    ++summary.verdicts;
  }
  write_file(out / "pipeline" / "verdicts.jsonl", log);

  // The SBD on every benign test sample, regardless of the detector.
  for (size_t i = 0; i < test.size(); ++i) {
    if (is_malware(test[i].cls)) continue;
    ++summary.benign_test;
    std::vector<double> x(test_vectors[i].begin(), test_vectors[i].end());
    summary.benign_flagged += predict(sbd, x) == kSbdSuspicious;
  }

  std::string ae_log;
  for (const AttackReport *r : pipeline_attacks) {
    for (const auto &rec : r->records) {
      if (rec.pre_satisfied || !rec.adversarial || rec.adversarial_prediction != 0) continue;
      PipelineVerdict v = classify_pipeline(*rec.adversarial, stages);
      v.id = rec.id + "@" + r->mode + (r->mode == "gea" ? "_" + r->strategy : "");
      ae_log += verdict_json_line(v);
      ++summary.evading_examples;
      summary.flagged_examples += v.kind == VerdictKind::kSuspicious;
    }
  }
  write_file(out / "pipeline" / "adversarial_verdicts.jsonl", ae_log);

  write_file(out / "summary.json", summary_json(summary));
  note(options, "done");
  return summary;
}

}  // namespace cfgsentry
