#ifndef CFGSENTRY_GRAPH_IO_H_
#define CFGSENTRY_GRAPH_IO_H_

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "cfgsentry/graph.h"

namespace cfgsentry {

// Graph-JSON: {"nodes": [{"id": int, "label": int}], "edges": [[int, int]],
//              "entry": int, "exits": [int]}
// Node order in the document becomes the node index order. Throws GraphError
// on malformed documents or invariant violations.
Cfg parse_graph(std::string_view text);

// Deterministic: nodes sorted by id, edges by (src, dst), exits ascending.
// Equal graphs serialize to identical bytes.
std::string serialize_graph(const Cfg &g);

// Minimal DOT reader for `digraph { 0 [label=1]; 0 -> 1; }` style input.
// Node names must be integers; only the `label` attribute is read. The first
// node mentioned becomes the entry; nodes without successors become exits
// (falling back to the last node mentioned when every node has successors).
Cfg parse_dot(std::string_view text);

std::string read_file(const std::filesystem::path &path);
void write_file(const std::filesystem::path &path, std::string_view contents);

Cfg load_graph(const std::filesystem::path &path);

// Corpus manifest: {"samples": [{"id": str, "class": str, "path": str}]} with
// paths relative to the manifest's directory.
std::vector<LabeledSample> load_corpus(const std::filesystem::path &manifest);

// Writes <dir>/graphs/<id>.json for each sample and <dir>/manifest.json.
void save_corpus(const std::vector<LabeledSample> &samples,
                 const std::filesystem::path &dir);

// Manifest only, pointing at graphs/<id>.json next to it (a subset of a
// corpus written by save_corpus into the same directory).
void save_manifest(const std::vector<LabeledSample> &samples,
                   const std::filesystem::path &manifest);

}  // namespace cfgsentry

#endif  // CFGSENTRY_GRAPH_IO_H_
