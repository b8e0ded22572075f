#include "cfgsentry/graph_io.h"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>

#include "json.hpp"

namespace cfgsentry {
namespace {

using json = nlohmann::json;

std::int64_t require_int(const json &value, const char *what) {
  if (!value.is_number_integer())
    throw GraphError(std::string("expected integer for ") + what);
  return value.get<std::int64_t>();
}

const json &require_key(const json &doc, const char *key) {
  auto it = doc.find(key);
  if (it == doc.end()) throw GraphError(std::string("missing key '") + key + "'");
  return *it;
}

}  // namespace

Cfg parse_graph(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error &e) {
    throw GraphError(std::string("malformed graph document: ") + e.what());
  }
  if (!doc.is_object()) throw GraphError("graph document must be an object");

  const json &nodes_json = require_key(doc, "nodes");
  const json &edges_json = require_key(doc, "edges");
  const json &exits_json = require_key(doc, "exits");
  if (!nodes_json.is_array() || !edges_json.is_array() || !exits_json.is_array())
    throw GraphError("nodes, edges and exits must be arrays");

  std::vector<Node> nodes;
  nodes.reserve(nodes_json.size());
  for (const json &n : nodes_json) {
    if (!n.is_object()) throw GraphError("node entries must be objects");
    std::int64_t label = require_int(require_key(n, "label"), "node label");
    if (label > std::numeric_limits<Label>::max()) throw GraphError("node label out of range");
    nodes.push_back({require_int(require_key(n, "id"), "node id"), static_cast<Label>(label)});
  }
  std::vector<Edge> edges;
  edges.reserve(edges_json.size());
  for (const json &e : edges_json) {
    if (!e.is_array() || e.size() != 2)
      throw GraphError("edges must be [src, dst] pairs");
    edges.emplace_back(require_int(e[0], "edge source"),
                       require_int(e[1], "edge target"));
  }
  std::vector<NodeId> exits;
  for (const json &x : exits_json) exits.push_back(require_int(x, "exit"));
  NodeId entry = require_int(require_key(doc, "entry"), "entry");
  return Cfg(std::move(nodes), std::move(edges), entry, std::move(exits));
}

std::string serialize_graph(const Cfg &g) {
  auto nodes = g.nodes();
  std::sort(nodes.begin(), nodes.end(),
            [](const Node &a, const Node &b) { return a.id < b.id; });
  json nodes_json = json::array();
  for (const Node &n : nodes) nodes_json.push_back({{"id", n.id}, {"label", n.label}});
  json edges_json = json::array();
  for (const auto &[s, d] : g.edges()) edges_json.push_back({s, d});
  json doc = {{"nodes", std::move(nodes_json)},
              {"edges", std::move(edges_json)},
              {"entry", g.entry()},
              {"exits", g.exits()}};
  return doc.dump() + "\n";
}

namespace {

class DotLexer {
 public:
  explicit DotLexer(std::string_view text) : text_(text) {}

  // Returns the next token or an empty optional at end of input. Punctuation
  // tokens are "{", "}", "[", "]", ";", ",", "=", "->".
  std::optional<std::string> next() {
    skip_space();
    if (pos_ >= text_.size()) return std::nullopt;
    char c = text_[pos_];
    if (c == '-' && pos_ + 1 < text_.size() && text_[pos_ + 1] == '>') {
      pos_ += 2;
      return "->";
    }
    if (std::string_view("{}[];,=").find(c) != std::string_view::npos) {
      ++pos_;
      return std::string(1, c);
    }
    if (c == '"') {
      size_t end = text_.find('"', pos_ + 1);
      if (end == std::string_view::npos) throw GraphError("unterminated string in DOT");
      std::string s(text_.substr(pos_ + 1, end - pos_ - 1));
      pos_ = end + 1;
      return s;
    }
    size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) ||
            text_[pos_] == '_' || text_[pos_] == '.' ||
            (text_[pos_] == '-' &&
             (pos_ + 1 >= text_.size() || text_[pos_ + 1] != '>'))))
      ++pos_;
    if (start == pos_) throw GraphError(std::string("unexpected character '") + c + "' in DOT");
    return std::string(text_.substr(start, pos_ - start));
  }

 private:
  void skip_space() {
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else if (c == '#' ||
                 (c == '/' && pos_ + 1 < text_.size() && text_[pos_ + 1] == '/')) {
        while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
      } else if (c == '/' && pos_ + 1 < text_.size() && text_[pos_ + 1] == '*') {
        size_t end = text_.find("*/", pos_ + 2);
        pos_ = end == std::string_view::npos ? text_.size() : end + 2;
      } else {
        break;
      }
    }
  }

  std::string_view text_;
  size_t pos_ = 0;
};

NodeId parse_node_name(const std::string &tok) {
  if (tok.empty() || !std::all_of(tok.begin(), tok.end(), [](char c) {
        return std::isdigit(static_cast<unsigned char>(c));
      }))
    throw GraphError("DOT node name '" + tok + "' is not a non-negative integer");
  try {
    return std::stoll(tok);
  } catch (const std::out_of_range &) {
    throw GraphError("DOT node name '" + tok + "' is out of range");
  }
}

}  // namespace

Cfg parse_dot(std::string_view text) {
  DotLexer lex(text);
  auto expect_token = [&]() {
    auto t = lex.next();
    if (!t) throw GraphError("unexpected end of DOT input");
    return *t;
  };

  std::string tok = expect_token();
  if (tok == "strict") tok = expect_token();
  if (tok != "digraph") throw GraphError("DOT input must be a digraph");
  tok = expect_token();
  if (tok != "{") tok = expect_token();
  if (tok != "{") throw GraphError("expected '{' in DOT input");

  std::vector<NodeId> order;
  std::map<NodeId, Label> labels;
  std::vector<Edge> edges;
  auto touch = [&](NodeId id) {
    if (labels.emplace(id, 0).second) order.push_back(id);
  };

  // Reads "[k=v, ...]" after the opening bracket; returns the label if given.
  auto read_attrs = [&]() {
    std::optional<Label> label;
    for (;;) {
      std::string key = expect_token();
      if (key == "]") return label;
      if (key == "," || key == ";") continue;
      if (expect_token() != "=") throw GraphError("expected '=' in DOT attribute list");
      std::string value = expect_token();
      if (key == "label") label = static_cast<Label>(parse_node_name(value));
    }
  };

  std::optional<std::string> pending;
  for (;;) {
    std::string t = pending ? *pending : expect_token();
    pending.reset();
    if (t == "}") break;
    if (t == ";" || t == ",") continue;
    if (t == "graph" || t == "node" || t == "edge") {
      std::string b = expect_token();
      if (b != "[") throw GraphError("expected attribute list after " + t);
      read_attrs();
      continue;
    }
    auto next = lex.next();
    if (next && *next == "=") {  // graph attribute: key = value
      expect_token();
      continue;
    }
    std::vector<NodeId> chain{parse_node_name(t)};
    touch(chain.back());
    while (next && *next == "->") {
      chain.push_back(parse_node_name(expect_token()));
      touch(chain.back());
      next = lex.next();
    }
    std::optional<Label> label;
    if (next && *next == "[") {
      label = read_attrs();
    } else if (next) {
      pending = *next;
    } else {
      throw GraphError("unexpected end of DOT input");
    }
    if (chain.size() == 1) {
      if (label) labels[chain[0]] = *label;
    } else {
      for (size_t i = 0; i + 1 < chain.size(); ++i)
        edges.emplace_back(chain[i], chain[i + 1]);
    }
  }
  if (order.empty()) throw GraphError("DOT graph has no nodes");

  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  std::map<NodeId, int> out_degree;
  for (const auto &[s, d] : edges) ++out_degree[s];
  std::vector<NodeId> exits;
  for (NodeId id : order)
    if (out_degree[id] == 0) exits.push_back(id);
  if (exits.empty()) exits.push_back(order.back());

  std::vector<Node> nodes;
  for (NodeId id : order) nodes.push_back({id, labels[id]});
  return Cfg(std::move(nodes), std::move(edges), order.front(), std::move(exits));
}

std::string read_file(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path &path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

Cfg load_graph(const std::filesystem::path &path) {
  std::string text = read_file(path);
  if (path.extension() == ".dot" || path.extension() == ".gv") return parse_dot(text);
  return parse_graph(text);
}

std::vector<LabeledSample> load_corpus(const std::filesystem::path &manifest) {
  json doc;
  try {
    doc = json::parse(read_file(manifest));
  } catch (const json::parse_error &e) {
    throw GraphError("malformed manifest " + manifest.string() + ": " + e.what());
  }
  if (!doc.is_object() || !doc.contains("samples") || !doc["samples"].is_array())
    throw GraphError("manifest must contain a 'samples' array");
  auto base = manifest.parent_path();
  std::vector<LabeledSample> samples;
  std::vector<std::string> seen;
  for (const json &s : doc["samples"]) {
    if (!s.is_object() || !s.contains("id") || !s.contains("class") ||
        !s.contains("path") || !s["id"].is_string() || !s["class"].is_string() ||
        !s["path"].is_string())
      throw GraphError("manifest entries need string id, class and path");
    std::string id = s["id"].get<std::string>();
    seen.push_back(id);
    SampleClass cls;
    try {
      cls = parse_class(s["class"].get<std::string>());
    } catch (const std::invalid_argument &e) {
      throw GraphError(e.what());
    }
    samples.push_back({id, load_graph(base / s["path"].get<std::string>()), cls});
  }
  std::sort(seen.begin(), seen.end());
  if (std::adjacent_find(seen.begin(), seen.end()) != seen.end())
    throw GraphError("duplicate sample id in manifest");
  return samples;
}

void save_corpus(const std::vector<LabeledSample> &samples,
                 const std::filesystem::path &dir) {
  for (const auto &s : samples) write_file(dir / "graphs" / (s.id + ".json"), serialize_graph(s.cfg));
  save_manifest(samples, dir / "manifest.json");
}

void save_manifest(const std::vector<LabeledSample> &samples,
                   const std::filesystem::path &manifest) {
  json list = json::array();
  for (const auto &s : samples)
    list.push_back({{"id", s.id},
                    {"class", std::string(class_name(s.cls))},
                    {"path", "graphs/" + s.id + ".json"}});
  write_file(manifest, json{{"samples", list}}.dump(1) + "\n");
}

}  // namespace cfgsentry
