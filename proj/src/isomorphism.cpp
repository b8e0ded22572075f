#include "cfgsentry/isomorphism.h"

#include <algorithm>
#include <map>
#include <tuple>
#include <vector>

namespace cfgsentry {
namespace {

class Matcher {
 public:
  Matcher(const Digraph &pattern, const Digraph &host, std::uint64_t limit)
      : p_(pattern), h_(host), limit_(limit),
        p_to_h_(pattern.size(), -1), h_to_p_(host.size(), -1) {}

  std::uint64_t run() {
    if (p_.size() == 0) return 1;
    if (p_.size() > h_.size() || p_.num_edges() > h_.num_edges()) return 0;
    if (!labels_fit()) return 0;
    build_order();
    search(0);
    return found_;
  }

 private:
  bool labels_fit() const {
    std::map<Label, int> need;
    for (Label l : p_.labels()) ++need[l];
    for (Label l : h_.labels()) {
      auto it = need.find(l);
      if (it != need.end() && --it->second == 0) need.erase(it);
    }
    return need.empty();
  }

  // Connectivity-first ordering: each next node has the most edges into the
  // already ordered prefix, ties broken by descending degree, then label.
  void build_order() {
    const int n = p_.size();
    std::vector<int> links(n, 0);
    std::vector<char> placed(n, 0);
    order_.clear();
    parent_.clear();
    for (int step = 0; step < n; ++step) {
      int best = -1;
      for (int v = 0; v < n; ++v) {
        if (placed[v]) continue;
        if (best < 0) {
          best = v;
          continue;
        }
        auto key = [&](int x) {
          return std::make_tuple(links[x], p_.in_degree(x) + p_.out_degree(x),
                                 -p_.label(x), -x);
        };
        if (key(v) > key(best)) best = v;
      }
      placed[best] = 1;
      order_.push_back(best);
      // Anchor: an already placed neighbor used to generate candidates.
      int anchor = -1;
      bool anchor_is_pred = false;
      for (int u : p_.in(best))
        if (placed[u] && u != best) {
          anchor = u;
          anchor_is_pred = true;
          break;
        }
      if (anchor < 0)
        for (int u : p_.out(best))
          if (placed[u] && u != best) {
            anchor = u;
            break;
          }
      parent_.emplace_back(anchor, anchor_is_pred);
      for (int u : p_.in(best)) ++links[u];
      for (int u : p_.out(best)) ++links[u];
    }
  }

  bool feasible(int pu, int hv) const {
    if (h_to_p_[hv] >= 0 || p_.label(pu) != h_.label(hv)) return false;
    if (h_.out_degree(hv) < p_.out_degree(pu) || h_.in_degree(hv) < p_.in_degree(pu))
      return false;
    int p_free_out = 0, h_free_out = 0, p_free_in = 0, h_free_in = 0;
    for (int w : p_.out(pu)) {
      if (w == pu) {
        if (!h_.has_edge(hv, hv)) return false;
      } else if (p_to_h_[w] >= 0) {
        if (!h_.has_edge(hv, p_to_h_[w])) return false;
      } else {
        ++p_free_out;
      }
    }
    for (int w : p_.in(pu)) {
      if (w == pu) continue;
      if (p_to_h_[w] >= 0) {
        if (!h_.has_edge(p_to_h_[w], hv)) return false;
      } else {
        ++p_free_in;
      }
    }
    for (int x : h_.out(hv))
      if (x != hv && h_to_p_[x] < 0) ++h_free_out;
    for (int x : h_.in(hv))
      if (x != hv && h_to_p_[x] < 0) ++h_free_in;
    return p_free_out <= h_free_out && p_free_in <= h_free_in;
  }

  void assign(int pu, int hv, int depth) {
    p_to_h_[pu] = hv;
    h_to_p_[hv] = pu;
    search(depth + 1);
    p_to_h_[pu] = -1;
    h_to_p_[hv] = -1;
  }

  void search(int depth) {
    if (found_ >= limit_) return;
    if (depth == static_cast<int>(order_.size())) {
      ++found_;
      return;
    }
    const int pu = order_[depth];
    const auto [anchor, anchor_is_pred] = parent_[depth];
    if (anchor >= 0) {
      const int ha = p_to_h_[anchor];
      for (int hv : anchor_is_pred ? h_.out(ha) : h_.in(ha)) {
        if (feasible(pu, hv)) assign(pu, hv, depth);
        if (found_ >= limit_) return;
      }
    } else {
      for (int hv = 0; hv < h_.size(); ++hv) {
        if (feasible(pu, hv)) assign(pu, hv, depth);
        if (found_ >= limit_) return;
      }
    }
  }

  const Digraph &p_;
  const Digraph &h_;
  std::uint64_t limit_;
  std::uint64_t found_ = 0;
  std::vector<int> p_to_h_;
  std::vector<int> h_to_p_;
  std::vector<int> order_;
  std::vector<std::pair<int, bool>> parent_;
};

}  // namespace

bool is_subgraph(const Digraph &pattern, const Digraph &host) {
  return Matcher(pattern, host, 1).run() > 0;
}

std::uint64_t match_count(const Digraph &pattern, const Digraph &host,
                          std::uint64_t limit) {
  if (limit == 0) return 0;
  return Matcher(pattern, host, limit).run();
}

}  // namespace cfgsentry
