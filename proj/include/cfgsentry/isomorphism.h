#ifndef CFGSENTRY_ISOMORPHISM_H_
#define CFGSENTRY_ISOMORPHISM_H_

#include <cstdint>

#include "cfgsentry/graph.h"

namespace cfgsentry {

// VF2-style subgraph monomorphism: an injective, label-preserving node map
// that sends every pattern edge to a host edge with the same direction.
// Extra host edges between mapped nodes are allowed (non-induced).
bool is_subgraph(const Digraph &pattern, const Digraph &host);

// Number of distinct injective mappings, stopping once `limit` is reached.
std::uint64_t match_count(const Digraph &pattern, const Digraph &host,
                          std::uint64_t limit);

}  // namespace cfgsentry

#endif  // CFGSENTRY_ISOMORPHISM_H_
