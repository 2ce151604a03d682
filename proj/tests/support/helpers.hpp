#pragma once

// Shared test utilities: fixture IO, a spec-text interpreter that rescans the
// raw machine text every step (reference semantics for rm_step), a brute-force
// elementary-cycle enumerator, a brute-force best-walk search, and a random
// valid-spec generator for property tests.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "larm/rm_spec.hpp"

namespace testsupport {

inline std::string fixture_path(const std::string& rel) {
  return std::string(LARM_FIXTURE_DIR) + "/" + rel;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

// Reference interpreter: no compiled tables, no index maps. Each step rescans
// the raw text for the current state's transition lines and reward lines.
struct NaiveInterpreter {
  std::string text;

  struct Step {
    std::string next;
    double reward;
    std::string fired;  // empty when the else self-loop fired
  };

  static std::string strip(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  Step step(const std::string& state, const std::string& event) const {
    std::istringstream in(text);
    std::string line;
    std::string section;
    std::optional<std::pair<std::string, std::string>> hit;  // (to, via-event)
    while (std::getline(in, line)) {
      std::string t = strip(line);
      if (t.empty()) continue;
      if (t == "TRANSITION_FUNCTION:" || t == "REWARD_FUNCTION:") {
        section = t;
        continue;
      }
      if (section != "TRANSITION_FUNCTION:" || t[0] != '(') continue;
      auto fields = parse_tuple(t);
      if (fields.size() != 3) continue;
      if (fields[0] == state && fields[1] == event && fields[1] != "else") {
        hit = {fields[2], fields[1]};
        break;
      }
    }
    if (!hit) return {state, 0.0, ""};

    // Rescan for the last matching reward entry (duplicates: last one wins).
    std::istringstream in2(text);
    section.clear();
    double reward = 0.0;
    while (std::getline(in2, line)) {
      std::string t = strip(line);
      if (t.empty()) continue;
      if (t == "TRANSITION_FUNCTION:" || t == "REWARD_FUNCTION:") {
        section = t;
        continue;
      }
      if (section != "REWARD_FUNCTION:" || t[0] != '(') continue;
      auto fields = parse_tuple(t);
      if (fields.size() != 4) continue;
      if (fields[0] == state && fields[1] == hit->second && fields[2] == hit->first) {
        reward = std::stod(fields[3]);
      }
    }
    return {hit->first, reward, hit->second};
  }

  // "(a, b) -> c" => {a, b, c}; "(a, b, c) -> v" => {a, b, c, v}.
  static std::vector<std::string> parse_tuple(const std::string& t) {
    std::vector<std::string> out;
    size_t close = t.find(')');
    size_t arrow = t.find("->");
    if (close == std::string::npos || arrow == std::string::npos) return out;
    std::string inner = t.substr(1, close - 1);
    std::istringstream fields(inner);
    std::string f;
    while (std::getline(fields, f, ',')) out.push_back(strip(f));
    out.push_back(strip(t.substr(arrow + 2)));
    return out;
  }
};

// All elementary cycles by exhaustive DFS (vertex cycles, max parallel edge
// weight per hop), reported smallest-id-first. Independent of the library's
// enumerator.
struct CycleOracle {
  std::vector<std::vector<std::pair<int, double>>> adj;  // to, weight

  std::vector<std::pair<std::vector<int>, double>> positive_cycles(double eps = 1e-9) const {
    std::vector<std::pair<std::vector<int>, double>> out;
    int n = static_cast<int>(adj.size());
    std::vector<int> path;
    std::vector<bool> used(n, false);
    for (int root = 0; root < n; ++root) {
      path = {root};
      used.assign(n, false);
      used[root] = true;
      dfs(root, root, 0.0, path, used, eps, out);
    }
    return out;
  }

 private:
  void dfs(int root, int v, double sum, std::vector<int>& path, std::vector<bool>& used,
           double eps, std::vector<std::pair<std::vector<int>, double>>& out) const {
    for (const auto& [to, w] : adj[v]) {
      if (to < root) continue;
      if (to == root) {
        if (sum + w > eps) out.push_back({path, sum + w});
        continue;
      }
      if (used[to]) continue;
      used[to] = true;
      path.push_back(to);
      dfs(root, to, sum + w, path, used, eps, out);
      path.pop_back();
      used[to] = false;
    }
  }
};

// Best initial-to-final walk reward by exhaustive simple-path search plus the
// observation that, absent positive cycles, some optimal walk is simple.
struct BestWalkOracle {
  std::vector<std::vector<std::pair<int, double>>> adj;
  std::vector<bool> is_final;
  int initial = 0;

  std::optional<double> best() const {
    int n = static_cast<int>(adj.size());
    std::vector<bool> used(n, false);
    used[initial] = true;
    std::optional<double> best_value;
    if (is_final[initial]) best_value = 0.0;
    dfs(initial, 0.0, used, best_value);
    return best_value;
  }

 private:
  void dfs(int v, double sum, std::vector<bool>& used, std::optional<double>& best_value) const {
    for (const auto& [to, w] : adj[v]) {
      if (used[to]) continue;
      double next = sum + w;
      if (is_final[to] && (!best_value || next > *best_value)) best_value = next;
      used[to] = true;
      dfs(to, next, used, best_value);
      used[to] = false;
    }
  }
};

// Random valid machine: every state gets its else self-loop, explicit
// transitions are deduped per (state, event), rewards only on existing
// transitions with multiple-of-0.05 values (clear of the cycle tolerance).
inline larm::RewardMachineSpec random_spec(std::mt19937_64& rng, int max_states = 6,
                                           bool rewards_on_all = false) {
  auto pick = [&rng](int n) { return static_cast<int>(rng() % static_cast<std::uint64_t>(n)); };
  larm::RewardMachineSpec spec;
  int n = 1 + pick(max_states);
  for (int i = 0; i < n; ++i) spec.states.push_back("u" + std::to_string(i));
  spec.initial = spec.states[pick(n)];

  const char* events[] = {"ev_a", "ev_b", "ev_c", "ev_d", "ev_e", "ev_f", "ev_g", "ev_h"};
  std::set<std::pair<int, int>> seen;
  int explicit_count = pick(2 * n + 1);
  std::vector<larm::RmTransition> explicits;
  for (int i = 0; i < explicit_count; ++i) {
    int from = pick(n);
    int ev = pick(8);
    if (!seen.insert({from, ev}).second) continue;
    explicits.push_back({spec.states[from], events[ev], spec.states[pick(n)], 0});
  }
  // Interleave else loops and explicit transitions in state order so
  // declaration order is varied but deterministic.
  for (int i = 0; i < n; ++i) {
    for (const auto& t : explicits) {
      if (t.from == spec.states[i]) spec.transitions.push_back(t);
    }
    spec.transitions.push_back({spec.states[i], larm::kElseToken, spec.states[i], 0});
  }
  for (const auto& t : explicits) {
    bool give_reward = rewards_on_all || (rng() % 2 == 0);
    if (!give_reward) continue;
    double value = 0.05 * static_cast<double>(static_cast<int>(rng() % 41) - 20);
    if (value == 0.0) continue;
    spec.rewards.push_back({t.from, t.event, t.to, value, 0});
  }
  return spec;
}

}  // namespace testsupport
