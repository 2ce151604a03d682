#include "larm/rm_spec.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <cstring>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "larm/errors.hpp"

namespace larm {
namespace {

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

bool valid_name(const std::string& s) {
  if (s.empty() || !is_ident_start(s[0])) return false;
  return std::all_of(s.begin(), s.end(), is_ident_char);
}

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Cursor over one already-trimmed line. Grammar pieces share it so error
// messages can point at the offending column content.
struct LineCursor {
  const std::string& text;
  size_t pos = 0;
  int line;

  void skip_ws() {
    while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t')) ++pos;
  }
  bool at_end() {
    skip_ws();
    return pos >= text.size();
  }
  void expect(char c) {
    skip_ws();
    if (pos >= text.size() || text[pos] != c) {
      throw SyntaxError(line, std::string("expected '") + c + "' in \"" + text + "\"");
    }
    ++pos;
  }
  void expect_arrow() {
    skip_ws();
    if (text.compare(pos, 2, "->") != 0) {
      throw SyntaxError(line, "expected '->' in \"" + text + "\"");
    }
    pos += 2;
  }
  std::string ident() {
    skip_ws();
    size_t b = pos;
    if (pos >= text.size() || !is_ident_start(text[pos])) {
      throw SyntaxError(line, "expected identifier in \"" + text + "\"");
    }
    while (pos < text.size() && is_ident_char(text[pos])) ++pos;
    return text.substr(b, pos - b);
  }
  double number() {
    skip_ws();
    size_t b = pos;
    while (pos < text.size() && text[pos] != ' ' && text[pos] != '\t') ++pos;
    std::string tok = text.substr(b, pos - b);
    if (tok.empty()) throw SyntaxError(line, "expected reward value in \"" + text + "\"");
    char* end = nullptr;
    double v = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size()) {
      throw SyntaxError(line, "non-numeric reward \"" + tok + "\"");
    }
    return v;
  }
  void expect_done() {
    if (!at_end()) {
      throw SyntaxError(line, "trailing text \"" + text.substr(pos) + "\"");
    }
  }
};

struct Line {
  int number;
  std::string text;
};

std::vector<Line> significant_lines(const std::string& text) {
  std::vector<Line> out;
  std::istringstream in(text);
  std::string raw;
  int n = 0;
  while (std::getline(in, raw)) {
    ++n;
    std::string t = trim(raw);
    if (!t.empty()) out.push_back({n, t});
  }
  return out;
}

bool starts_with_token(const std::string& line, const char* token) {
  return line.compare(0, std::strlen(token), token) == 0;
}

}  // namespace

RewardMachineSpec parse_rm(const std::string& text) {
  std::vector<Line> lines = significant_lines(text);
  size_t i = 0;
  int last_line = lines.empty() ? 1 : lines.back().number + 1;

  auto require_line = [&](const char* what) -> const Line& {
    if (i >= lines.size()) {
      throw SyntaxError(last_line, std::string("missing ") + what);
    }
    return lines[i];
  };

  RewardMachineSpec spec;

  // REWARD_MACHINE:
  {
    const Line& l = require_line("REWARD_MACHINE: header");
    if (l.text != "REWARD_MACHINE:") {
      throw SyntaxError(l.number, "expected REWARD_MACHINE: header, got \"" + l.text + "\"");
    }
    ++i;
  }

  // STATES: a, b, c
  {
    const Line& l = require_line("STATES: section");
    if (!starts_with_token(l.text, "STATES:")) {
      throw SyntaxError(l.number, "expected STATES: section, got \"" + l.text + "\"");
    }
    LineCursor c{l.text, std::strlen("STATES:"), l.number};
    spec.states.push_back(c.ident());
    while (!c.at_end()) {
      c.expect(',');
      spec.states.push_back(c.ident());
    }
    ++i;
  }

  // INITIAL_STATE: a
  {
    const Line& l = require_line("INITIAL_STATE: section");
    if (!starts_with_token(l.text, "INITIAL_STATE:")) {
      throw SyntaxError(l.number, "expected INITIAL_STATE: section, got \"" + l.text + "\"");
    }
    LineCursor c{l.text, std::strlen("INITIAL_STATE:"), l.number};
    spec.initial = c.ident();
    c.expect_done();
    ++i;
  }

  // TRANSITION_FUNCTION: then (from, event) -> to lines.
  {
    const Line& l = require_line("TRANSITION_FUNCTION: section");
    if (l.text != "TRANSITION_FUNCTION:") {
      throw SyntaxError(l.number, "expected TRANSITION_FUNCTION: section, got \"" + l.text + "\"");
    }
    ++i;
  }
  while (i < lines.size() && lines[i].text != "REWARD_FUNCTION:") {
    const Line& l = lines[i];
    LineCursor c{l.text, 0, l.number};
    RmTransition t;
    t.line = l.number;
    c.expect('(');
    t.from = c.ident();
    c.expect(',');
    t.event = c.ident();
    c.expect(')');
    c.expect_arrow();
    t.to = c.ident();
    c.expect_done();
    spec.transitions.push_back(std::move(t));
    ++i;
  }

  // REWARD_FUNCTION: then (from, event, to) -> value lines until EOF.
  require_line("REWARD_FUNCTION: section");
  ++i;  // the loop above only stops on the exact header
  while (i < lines.size()) {
    const Line& l = lines[i];
    LineCursor c{l.text, 0, l.number};
    RmReward r;
    r.line = l.number;
    c.expect('(');
    r.from = c.ident();
    c.expect(',');
    r.event = c.ident();
    c.expect(',');
    r.to = c.ident();
    c.expect(')');
    c.expect_arrow();
    r.value = c.number();
    c.expect_done();
    spec.rewards.push_back(std::move(r));
    ++i;
  }

  return spec;
}

bool structural_equal(const RewardMachineSpec& a, const RewardMachineSpec& b) {
  if (a.states != b.states || a.initial != b.initial) return false;
  if (a.transitions.size() != b.transitions.size()) return false;
  for (size_t i = 0; i < a.transitions.size(); ++i) {
    const RmTransition& x = a.transitions[i];
    const RmTransition& y = b.transitions[i];
    if (x.from != y.from || x.event != y.event || x.to != y.to) return false;
  }
  if (a.rewards.size() != b.rewards.size()) return false;
  for (size_t i = 0; i < a.rewards.size(); ++i) {
    const RmReward& x = a.rewards[i];
    const RmReward& y = b.rewards[i];
    if (x.from != y.from || x.event != y.event || x.to != y.to || x.value != y.value) return false;
  }
  return true;
}

int ValidationReport::count(const std::string& code) const {
  int n = 0;
  for (const Finding& f : errors) {
    if (f.code == code) ++n;
  }
  return n;
}

std::string ValidationReport::to_string() const {
  std::ostringstream out;
  for (const Finding& f : errors) {
    out << f.code << " (line " << f.line << "): " << f.message << "\n";
  }
  for (const Finding& f : warnings) {
    out << f.code << " (line " << f.line << "): " << f.message << "\n";
  }
  return out.str();
}

ValidationReport validate_rm(const RewardMachineSpec& spec) {
  ValidationReport rep;
  auto error = [&rep](const char* code, int line, std::string msg) {
    rep.errors.push_back({code, line, std::move(msg)});
  };
  auto warn = [&rep](const char* code, int line, std::string msg) {
    rep.warnings.push_back({code, line, std::move(msg)});
  };

  std::set<std::string> declared(spec.states.begin(), spec.states.end());

  // Name pattern. Unreachable from parse_rm (the grammar only produces
  // identifiers) but specs can be built in code.
  for (const std::string& s : spec.states) {
    if (!valid_name(s)) error(kErrBadName, 0, "state name \"" + s + "\" is not an identifier");
  }
  for (const RmTransition& t : spec.transitions) {
    if (!valid_name(t.event)) {
      error(kErrBadName, t.line, "event name \"" + t.event + "\" is not an identifier");
    }
  }

  if (!declared.count(spec.initial)) {
    error(kErrInitialUndeclared, 0, "initial state " + spec.initial + " is not declared");
  }

  // Undeclared references, one finding per occurrence (deduped per line+name).
  std::set<std::pair<int, std::string>> seen_undeclared;
  auto check_declared = [&](const std::string& name, int line) {
    if (declared.count(name)) return;
    if (!seen_undeclared.insert({line, name}).second) return;
    error(kErrUndeclaredState, line, "state " + name + " is not declared in STATES:");
  };
  for (const RmTransition& t : spec.transitions) {
    check_declared(t.from, t.line);
    check_declared(t.to, t.line);
  }
  for (const RmReward& r : spec.rewards) {
    check_declared(r.from, r.line);
    check_declared(r.to, r.line);
  }

  // At most one transition per (from, event); else must self-loop; every
  // declared state needs an else.
  std::map<std::pair<std::string, std::string>, int> first_seen;
  std::set<std::string> has_else;
  for (const RmTransition& t : spec.transitions) {
    auto key = std::make_pair(t.from, t.event);
    auto [it, fresh] = first_seen.insert({key, t.line});
    if (!fresh) {
      error(kErrDupTransition, t.line,
            "duplicate transition (" + t.from + ", " + t.event + "), first on line " +
                std::to_string(it->second));
    }
    if (t.event == kElseToken) {
      has_else.insert(t.from);
      if (t.to != t.from) {
        error(kErrElseNotSelf, t.line,
              "(" + t.from + ", else) must loop back to " + t.from + ", not " + t.to);
      }
    }
  }
  for (const std::string& s : spec.states) {
    if (!has_else.count(s)) {
      error(kErrMissingElse, 0, "state " + s + " has no (" + s + ", else) transition");
    }
  }

  // Rewards must sit on an existing explicit transition with the same
  // destination. ELSE transitions cannot carry reward.
  std::set<std::tuple<std::string, std::string, std::string>> explicit_edges;
  for (const RmTransition& t : spec.transitions) {
    if (t.event != kElseToken) explicit_edges.insert({t.from, t.event, t.to});
  }
  std::map<std::tuple<std::string, std::string, std::string>, int> reward_seen;
  for (const RmReward& r : spec.rewards) {
    auto triple = std::make_tuple(r.from, r.event, r.to);
    if (r.event == kElseToken || !explicit_edges.count(triple)) {
      error(kErrRewardNoTransition, r.line,
            "reward on (" + r.from + ", " + r.event + ", " + r.to +
                ") has no matching transition");
    }
    auto [it, fresh] = reward_seen.insert({triple, r.line});
    if (!fresh) {
      warn(kWarnDupReward, r.line,
           "duplicate reward for (" + r.from + ", " + r.event + ", " + r.to +
               "), overrides line " + std::to_string(it->second));
      it->second = r.line;
    }
  }

  // Reachability over explicit transitions from the initial state. Skipped
  // when the initial state itself is undeclared.
  if (declared.count(spec.initial)) {
    std::set<std::string> reached{spec.initial};
    std::vector<std::string> frontier{spec.initial};
    while (!frontier.empty()) {
      std::string u = frontier.back();
      frontier.pop_back();
      for (const RmTransition& t : spec.transitions) {
        if (t.from == u && t.event != kElseToken && declared.count(t.to) &&
            reached.insert(t.to).second) {
          frontier.push_back(t.to);
        }
      }
    }
    for (const std::string& s : spec.states) {
      if (!reached.count(s)) {
        warn(kWarnUnreachableState, 0, "state " + s + " is unreachable from " + spec.initial);
      }
    }
  }

  return rep;
}

std::string format_reward(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  std::string s(buf, end);
  if (s.find('.') == std::string::npos && s.find('e') == std::string::npos &&
      s.find("inf") == std::string::npos && s.find("nan") == std::string::npos) {
    s += ".0";
  }
  return s;
}

std::string serialize_rm(const RewardMachineSpec& spec) {
  ValidationReport rep = validate_rm(spec);
  if (!rep.ok()) {
    throw ValidationFailed("cannot serialize a spec with validation errors:\n" + rep.to_string());
  }
  std::ostringstream out;
  out << "REWARD_MACHINE:\n";
  out << "STATES: ";
  for (size_t i = 0; i < spec.states.size(); ++i) {
    if (i) out << ", ";
    out << spec.states[i];
  }
  out << "\n";
  out << "INITIAL_STATE: " << spec.initial << "\n";
  out << "TRANSITION_FUNCTION:\n";
  for (const RmTransition& t : spec.transitions) {
    out << "(" << t.from << ", " << t.event << ") -> " << t.to << "\n";
  }
  out << "REWARD_FUNCTION:\n";
  for (const RmReward& r : spec.rewards) {
    out << "(" << r.from << ", " << r.event << ", " << r.to << ") -> " << format_reward(r.value)
        << "\n";
  }
  return out.str();
}

}  // namespace larm
