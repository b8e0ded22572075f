#include "cfgsentry/config.h"

#include <charconv>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "cfgsentry/graph_io.h"
#include "cfgsentry/util.h"

namespace cfgsentry {
namespace {

struct Binding {
  std::string section;
  std::string key;
  std::function<std::string(const ExperimentConfig &)> get;
  std::function<void(ExperimentConfig &, const std::string &)> set;
};

template <typename T>
T parse_number(const std::string &text, const std::string &where) {
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw ConfigError(where + ": cannot parse '" + text + "'");
  return value;
}

bool parse_bool(const std::string &text, const std::string &where) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError(where + ": expected true or false, got '" + text + "'");
}

template <typename T>
Binding number(std::string section, std::string key, T ExperimentConfig::*field) {
  std::string where = section + "." + key;
  return {section, key,
          [field](const ExperimentConfig &c) {
            if constexpr (std::is_floating_point_v<T>)
              return format_double(c.*field);
            else
              return std::to_string(c.*field);
          },
          [field, where](ExperimentConfig &c, const std::string &v) {
            c.*field = parse_number<T>(v, where);
          }};
}

// Binds a member reached through an accessor, for nested structs.
template <typename T>
Binding nested(std::string section, std::string key,
               std::function<T &(ExperimentConfig &)> ref) {
  std::string where = section + "." + key;
  return {section, key,
          [ref](const ExperimentConfig &c) {
            T v = ref(const_cast<ExperimentConfig &>(c));
            if constexpr (std::is_same_v<T, bool>)
              return std::string(v ? "true" : "false");
            else if constexpr (std::is_floating_point_v<T>)
              return format_double(v);
            else
              return std::to_string(v);
          },
          [ref, where](ExperimentConfig &c, const std::string &v) {
            if constexpr (std::is_same_v<T, bool>)
              ref(c) = parse_bool(v, where);
            else
              ref(c) = parse_number<T>(v, where);
          }};
}

void add_train(std::vector<Binding> &b, const std::string &section,
               TrainConfig ExperimentConfig::*train) {
  b.push_back(nested<int>(section, "epochs", [train](ExperimentConfig &c) -> int & {
    return (c.*train).epochs;
  }));
  b.push_back(nested<int>(section, "batch_size", [train](ExperimentConfig &c) -> int & {
    return (c.*train).batch_size;
  }));
  b.push_back(nested<double>(section, "learning_rate", [train](ExperimentConfig &c) -> double & {
    return (c.*train).learning_rate;
  }));
  b.push_back(nested<double>(section, "beta1", [train](ExperimentConfig &c) -> double & {
    return (c.*train).beta1;
  }));
  b.push_back(nested<double>(section, "beta2", [train](ExperimentConfig &c) -> double & {
    return (c.*train).beta2;
  }));
  b.push_back(nested<double>(section, "epsilon", [train](ExperimentConfig &c) -> double & {
    return (c.*train).epsilon;
  }));
}

const std::vector<Binding> &bindings() {
  static const std::vector<Binding> table = [] {
    std::vector<Binding> b;
    b.push_back(nested<std::uint64_t>("corpus", "seed", [](ExperimentConfig &c) -> std::uint64_t & {
      return c.corpus.seed;
    }));
    b.push_back(nested<int>("corpus", "motifs_per_family", [](ExperimentConfig &c) -> int & {
      return c.corpus.motifs_per_family;
    }));
    b.push_back(nested<int>("corpus", "motif_min_nodes", [](ExperimentConfig &c) -> int & {
      return c.corpus.motif_min_nodes;
    }));
    b.push_back(nested<int>("corpus", "motif_max_nodes", [](ExperimentConfig &c) -> int & {
      return c.corpus.motif_max_nodes;
    }));
    b.push_back(nested<double>("corpus", "motif_density", [](ExperimentConfig &c) -> double & {
      return c.corpus.motif_density;
    }));
    b.push_back(nested<double>("corpus", "motif_prob", [](ExperimentConfig &c) -> double & {
      return c.corpus.motif_prob;
    }));
    b.push_back({"corpus", "label_mode",
                 [](const ExperimentConfig &c) {
                   return std::string(c.corpus.label_mode == LabelMode::kDegree ? "degree"
                                                                                : "uniform");
                 },
                 [](ExperimentConfig &c, const std::string &v) {
                   if (v == "degree")
                     c.corpus.label_mode = LabelMode::kDegree;
                   else if (v == "uniform")
                     c.corpus.label_mode = LabelMode::kUniform;
                   else
                     throw ConfigError("corpus.label_mode: expected degree or uniform");
                 }});
    for (int cls = 0; cls < kNumSampleClasses; ++cls) {
      const std::string p(class_name(static_cast<SampleClass>(cls)));
      auto profile = [cls](ExperimentConfig &c) -> ClassProfile & { return c.corpus.classes[cls]; };
      b.push_back(nested<int>("corpus", p + "_count",
                              [profile](ExperimentConfig &c) -> int & { return profile(c).count; }));
      b.push_back(nested<int>("corpus", p + "_min_nodes", [profile](ExperimentConfig &c) -> int & {
        return profile(c).min_nodes;
      }));
      b.push_back(nested<int>("corpus", p + "_max_nodes", [profile](ExperimentConfig &c) -> int & {
        return profile(c).max_nodes;
      }));
      b.push_back(nested<double>("corpus", p + "_branch_prob",
                                 [profile](ExperimentConfig &c) -> double & {
                                   return profile(c).branch_prob;
                                 }));
      b.push_back(nested<double>("corpus", p + "_switch_prob",
                                 [profile](ExperimentConfig &c) -> double & {
                                   return profile(c).switch_prob;
                                 }));
      b.push_back(nested<double>("corpus", p + "_back_prob",
                                 [profile](ExperimentConfig &c) -> double & {
                                   return profile(c).back_prob;
                                 }));
      b.push_back(nested<int>("corpus", p + "_span",
                              [profile](ExperimentConfig &c) -> int & { return profile(c).span; }));
    }
    b.push_back(number("split", "train_fraction", &ExperimentConfig::train_fraction));
    add_train(b, "train", &ExperimentConfig::train);
    b.push_back(number("mining", "min_nodes", &ExperimentConfig::mine_min_nodes));
    b.push_back(number("mining", "max_nodes", &ExperimentConfig::mine_max_nodes));
    b.push_back(number("mining", "candidates_per_family", &ExperimentConfig::candidates_per_family));
    b.push_back(nested<int>("rank", "top_k", [](ExperimentConfig &c) -> int & { return c.rank.top_k; }));
    b.push_back(nested<double>("rank", "min_family_fraction", [](ExperimentConfig &c) -> double & {
      return c.rank.min_family_fraction;
    }));
    b.push_back(nested<int>("rank", "max_benign",
                            [](ExperimentConfig &c) -> int & { return c.rank.max_benign; }));
    const char *weights[] = {"weight_size", "weight_frequency", "weight_coverage", "weight_rarity"};
    for (int i = 0; i < 4; ++i)
      b.push_back(nested<double>("rank", weights[i], [i](ExperimentConfig &c) -> double & {
        return c.rank.weights[i];
      }));
    b.push_back(number("attack", "sgea_candidates", &ExperimentConfig::sgea_candidates));
    b.push_back(number("attack", "sgea_max_injection", &ExperimentConfig::sgea_max_injection));
    b.push_back(nested<bool>("attack", "sgea_targeted",
                             [](ExperimentConfig &c) -> bool & { return c.sgea_targeted; }));
    add_train(b, "sbd", &ExperimentConfig::sbd_train);
    b.push_back(number("sbd", "encode_timeout", &ExperimentConfig::encode_timeout));
    b.push_back({"pipeline", "architecture",
                 [](const ExperimentConfig &c) {
                   return std::string(architecture_name(c.pipeline_architecture));
                 },
                 [](ExperimentConfig &c, const std::string &v) {
                   try {
                     c.pipeline_architecture = parse_architecture(v);
                   } catch (const std::invalid_argument &e) {
                     throw ConfigError(std::string("pipeline.architecture: ") + e.what());
                   }
                 }});
    return b;
  }();
  return table;
}

void check_train(const TrainConfig &t, const std::string &section) {
  if (t.epochs < 1) throw ConfigError(section + ".epochs must be >= 1");
  if (t.batch_size < 1) throw ConfigError(section + ".batch_size must be >= 1");
  if (!(t.learning_rate > 0)) throw ConfigError(section + ".learning_rate must be positive");
  if (!(t.beta1 >= 0 && t.beta1 < 1) || !(t.beta2 >= 0 && t.beta2 < 1))
    throw ConfigError(section + ": betas must be in [0, 1)");
  if (!(t.epsilon > 0)) throw ConfigError(section + ".epsilon must be positive");
}

}  // namespace

void ExperimentConfig::validate() const {
  corpus.validate();
  if (!(train_fraction > 0 && train_fraction < 1))
    throw ConfigError("split.train_fraction must be in (0, 1)");
  check_train(train, "train");
  check_train(sbd_train, "sbd");
  if (mine_min_nodes < 1 || mine_min_nodes > mine_max_nodes)
    throw ConfigError("mining node range must satisfy 1 <= min <= max");
  if (candidates_per_family < 1) throw ConfigError("mining.candidates_per_family must be >= 1");
  if (rank.top_k < 1) throw ConfigError("rank.top_k must be >= 1");
  if (!(rank.min_family_fraction >= 0 && rank.min_family_fraction <= 1))
    throw ConfigError("rank.min_family_fraction must be in [0, 1]");
  if (rank.max_benign < 0) throw ConfigError("rank.max_benign must be >= 0");
  for (double w : rank.weights)
    if (!(w >= 0)) throw ConfigError("rank weights must be non-negative");
  if (sgea_candidates < 1) throw ConfigError("attack.sgea_candidates must be >= 1");
  if (sgea_max_injection < 1) throw ConfigError("attack.sgea_max_injection must be >= 1");
  if (!(encode_timeout >= 0)) throw ConfigError("sbd.encode_timeout must be >= 0");
}

ExperimentConfig default_experiment_config() {
  ExperimentConfig c;
  c.sbd_train.epochs = 40;
  return c;
}

ExperimentConfig parse_experiment_config(std::string_view ini) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in{std::string(ini)};
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error &e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  std::map<std::pair<std::string, std::string>, const Binding *> index;
  std::set<std::string> sections;
  for (const Binding &b : bindings()) {
    index[{b.section, b.key}] = &b;
    sections.insert(b.section);
  }
  ExperimentConfig config = default_experiment_config();
  for (const auto &[section, body] : tree) {
    if (body.empty() && !body.data().empty())
      throw ConfigError("key '" + section + "' must appear inside a section");
    if (!sections.count(section)) throw ConfigError("unknown config section [" + section + "]");
    for (const auto &[key, value] : body) {
      auto it = index.find({section, key});
      if (it == index.end()) throw ConfigError("unknown config key " + section + "." + key);
      it->second->set(config, value.data());
    }
  }
  config.validate();
  return config;
}

ExperimentConfig load_experiment_config(const std::string &name_or_path) {
  if (name_or_path == "default") return default_experiment_config();
  std::string text;
  try {
    text = read_file(name_or_path);
  } catch (const std::exception &e) {
    throw ConfigError(std::string("cannot read config: ") + e.what());
  }
  return parse_experiment_config(text);
}

std::string experiment_config_ini(const ExperimentConfig &config) {
  std::ostringstream out;
  std::string current;
  for (const Binding &b : bindings()) {
    if (b.section != current) {
      if (!current.empty()) out << "\n";
      out << "[" << b.section << "]\n";
      current = b.section;
    }
    out << b.key << " = " << b.get(config) << "\n";
  }
  return out.str();
}

}  // namespace cfgsentry
