#include "larm/machine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "larm/errors.hpp"

namespace larm {

namespace {
// Sums within this of zero count as zero so float cancellation on
// symmetric +r/-r loops cannot fabricate a positive cycle.
constexpr double kCycleEps = 1e-9;
constexpr int kEnumerationStateLimit = 50;
constexpr long kEnumerationWorkLimit = 5'000'000;
}  // namespace

int Larm::check_state(int u) const {
  if (u < 0 || u >= num_states()) {
    throw UnknownState("state id " + std::to_string(u) + " out of range");
  }
  return u;
}

const std::string& Larm::event_name(int e) const {
  if (e < 0 || e >= num_events()) {
    throw UnknownEvent("event id " + std::to_string(e) + " out of range");
  }
  return event_names_[e];
}

int Larm::state_id(const std::string& name) const {
  auto it = state_index_.find(name);
  if (it == state_index_.end()) throw UnknownState("unknown state " + name);
  return it->second;
}

int Larm::event_id(const std::string& name) const {
  auto it = event_index_.find(name);
  return it == event_index_.end() ? kNoEvent : it->second;
}

Larm compile(const RewardMachineSpec& spec, const std::map<std::string, std::string>& instructions,
             const Embedder& embedder, int d) {
  ValidationReport rep = validate_rm(spec);
  if (!rep.ok()) {
    throw ValidationFailed("cannot compile a spec with validation errors:\n" + rep.to_string());
  }

  Larm m;
  m.spec_ = spec;
  m.embedding_dim_ = d;
  m.state_names_ = spec.states;
  for (int i = 0; i < m.num_states(); ++i) m.state_index_[m.state_names_[i]] = i;
  m.initial_ = m.state_index_.at(spec.initial);

  // Event ids in first-appearance order over explicit transitions.
  for (const RmTransition& t : spec.transitions) {
    if (t.event == kElseToken) continue;
    if (!m.event_index_.count(t.event)) {
      m.event_index_[t.event] = static_cast<int>(m.event_names_.size());
      m.event_names_.push_back(t.event);
    }
  }

  m.edges_.assign(m.num_states(), {});
  for (const RmTransition& t : spec.transitions) {
    if (t.event == kElseToken) continue;
    ExplicitEdge e;
    e.event = m.event_index_.at(t.event);
    e.to = m.state_index_.at(t.to);
    e.reward = 0.0;
    m.edges_[m.state_index_.at(t.from)].push_back(e);
  }
  // Duplicate reward entries: last one wins (validate_rm already warned).
  for (const RmReward& r : spec.rewards) {
    int from = m.state_index_.at(r.from);
    int ev = m.event_index_.at(r.event);
    int to = m.state_index_.at(r.to);
    for (ExplicitEdge& e : m.edges_[from]) {
      if (e.event == ev && e.to == to) e.reward = r.value;
    }
  }

  m.final_.assign(m.num_states(), false);
  for (int u = 0; u < m.num_states(); ++u) m.final_[u] = m.edges_[u].empty();

  Embedder embed = embedder;
  if (!embed) {
    embed = [d](const std::string& text) { return embed_instruction(text, d); };
  }
  m.instructions_.resize(m.num_states());
  m.embeddings_.resize(m.num_states());
  for (int u = 0; u < m.num_states(); ++u) {
    auto it = instructions.find(m.state_names_[u]);
    if (it == instructions.end()) {
      throw MissingInstruction("no instruction for state " + m.state_names_[u]);
    }
    m.instructions_[u] = it->second;
    EmbeddingVector v = embed(it->second);
    double norm = v.norm();
    if (norm == 0.0 || !std::isfinite(norm)) {
      throw DimensionMismatch("embedder produced a non-normalizable vector for state " +
                              m.state_names_[u]);
    }
    m.embeddings_[u] = v / norm;
  }
  return m;
}

StepOutcome rm_step(const Larm& m, int u, int event) {
  if (event != kNoEvent) {
    for (const ExplicitEdge& e : m.edges_from(u)) {
      if (e.event == event) return {e.to, e.reward, e.event};
    }
  }
  return {u, 0.0, kNoEvent};
}

StepOutcome rm_step(const Larm& m, int u, const std::string& event) {
  return rm_step(m, u, m.event_id(event));
}

namespace {

// Best (max) reward per ordered state pair; parallel explicit edges collapse
// to their most rewarding representative for cycle and path analysis.
std::vector<std::vector<std::pair<int, double>>> best_edges(const Larm& m) {
  int n = m.num_states();
  std::vector<std::vector<std::pair<int, double>>> adj(n);
  for (int u = 0; u < n; ++u) {
    std::map<int, double> best;
    for (const ExplicitEdge& e : m.edges_from(u)) {
      auto it = best.find(e.to);
      if (it == best.end() || e.reward > it->second) best[e.to] = e.reward;
    }
    adj[u].assign(best.begin(), best.end());
  }
  return adj;
}

// Elementary cycle enumeration rooted at the cycle's smallest vertex.
// work is a global extension budget; nullptr result means it ran out.
bool enumerate_cycles(const std::vector<std::vector<std::pair<int, double>>>& adj, int root,
                      int v, double sum, std::vector<int>& path, std::vector<bool>& on_path,
                      long& work, std::vector<std::vector<int>>& out) {
  for (const auto& [to, reward] : adj[v]) {
    if (--work < 0) return false;
    if (to < root) continue;
    if (to == root) {
      if (sum + reward > kCycleEps) out.push_back(path);
      continue;
    }
    if (on_path[to]) continue;
    path.push_back(to);
    on_path[to] = true;
    bool ok = enumerate_cycles(adj, root, to, sum + reward, path, on_path, work, out);
    on_path[to] = false;
    path.pop_back();
    if (!ok) return false;
  }
  return true;
}

// Bellman-Ford positive-cycle witness for machines too large to enumerate:
// run max-relaxation from all states at once; a vertex still relaxing after
// n passes sits on (or downstream of) a positive cycle, which the
// predecessor chain recovers.
std::vector<std::vector<int>> bellman_witness(
    const std::vector<std::vector<std::pair<int, double>>>& adj) {
  int n = static_cast<int>(adj.size());
  std::vector<double> dist(n, 0.0);
  std::vector<int> pred(n, -1);
  int flagged = -1;
  for (int pass = 0; pass < n && flagged < 0; ++pass) {
    bool changed = false;
    for (int u = 0; u < n; ++u) {
      for (const auto& [to, reward] : adj[u]) {
        if (dist[u] + reward > dist[to] + kCycleEps) {
          dist[to] = dist[u] + reward;
          pred[to] = u;
          changed = true;
          if (pass == n - 1) flagged = to;
        }
      }
    }
    if (!changed) return {};
  }
  if (flagged < 0) return {};
  // Walk back n times to land inside the cycle, then collect it.
  int v = flagged;
  for (int i = 0; i < n; ++i) v = pred[v];
  std::vector<int> cycle;
  int cur = v;
  do {
    cycle.push_back(cur);
    cur = pred[cur];
  } while (cur != v);
  std::reverse(cycle.begin(), cycle.end());
  int arg = static_cast<int>(std::min_element(cycle.begin(), cycle.end()) - cycle.begin());
  std::rotate(cycle.begin(), cycle.begin() + arg, cycle.end());
  return {cycle};
}

}  // namespace

std::vector<std::vector<int>> detect_positive_cycles(const Larm& m) {
  auto adj = best_edges(m);
  int n = m.num_states();
  if (n > kEnumerationStateLimit) return bellman_witness(adj);

  std::vector<std::vector<int>> out;
  long work = kEnumerationWorkLimit;
  for (int root = 0; root < n; ++root) {
    std::vector<int> path{root};
    std::vector<bool> on_path(n, false);
    on_path[root] = true;
    if (!enumerate_cycles(adj, root, root, 0.0, path, on_path, work, out)) {
      return bellman_witness(adj);
    }
  }
  return out;
}

double max_path_reward(const Larm& m) {
  auto cycles = detect_positive_cycles(m);
  if (!cycles.empty()) {
    std::ostringstream msg;
    msg << "positive-reward cycle:";
    for (int u : cycles.front()) msg << " " << m.state_name(u);
    throw PositiveCycle(msg.str());
  }

  auto adj = best_edges(m);
  int n = m.num_states();
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  std::vector<double> dist(n, kNegInf);
  dist[m.initial_state()] = 0.0;
  // No positive cycles, so n-1 max-relaxation passes settle every walk.
  for (int pass = 0; pass < n - 1; ++pass) {
    bool changed = false;
    for (int u = 0; u < n; ++u) {
      if (dist[u] == kNegInf) continue;
      for (const auto& [to, reward] : adj[u]) {
        if (dist[u] + reward > dist[to]) {
          dist[to] = dist[u] + reward;
          changed = true;
        }
      }
    }
    if (!changed) break;
  }

  double best = kNegInf;
  for (int u = 0; u < n; ++u) {
    if (m.is_final(u)) best = std::max(best, dist[u]);
  }
  if (best == kNegInf) throw NoFinalReachable("no final state reachable from initial");
  return best;
}

std::vector<int> reachable_states(const Larm& m) {
  std::set<int> reached{m.initial_state()};
  std::vector<int> frontier{m.initial_state()};
  while (!frontier.empty()) {
    int u = frontier.back();
    frontier.pop_back();
    for (const ExplicitEdge& e : m.edges_from(u)) {
      if (reached.insert(e.to).second) frontier.push_back(e.to);
    }
  }
  return {reached.begin(), reached.end()};
}

std::string to_dot(const Larm& m, bool include_else) {
  std::ostringstream out;
  out << "digraph reward_machine {\n";
  out << "  rankdir=LR;\n";
  out << "  __start [shape=point];\n";
  for (int u = 0; u < m.num_states(); ++u) {
    out << "  " << m.state_name(u) << " [shape=" << (m.is_final(u) ? "doublecircle" : "circle")
        << "];\n";
  }
  out << "  __start -> " << m.state_name(m.initial_state()) << ";\n";
  for (int u = 0; u < m.num_states(); ++u) {
    for (const ExplicitEdge& e : m.edges_from(u)) {
      out << "  " << m.state_name(u) << " -> " << m.state_name(e.to) << " [label=\""
          << m.event_name(e.event);
      if (e.reward != 0.0) out << "/" << format_reward(e.reward);
      out << "\"";
      if (e.reward < 0.0) out << ", color=red, fontcolor=red";
      out << "];\n";
    }
    if (include_else) {
      out << "  " << m.state_name(u) << " -> " << m.state_name(u)
          << " [label=\"else\", style=dashed];\n";
    }
  }
  out << "}\n";
  return out.str();
}

}  // namespace larm
