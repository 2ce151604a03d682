#include "larm/labeling.hpp"

#include <array>
#include <cctype>
#include <cstdlib>
#include <set>
#include <sstream>

#include "larm/errors.hpp"

namespace larm {

namespace {

// Registered atom vocabulary: required and optional keyword arguments.
struct AtomSig {
  const char* name;
  std::set<std::string> required;
  std::set<std::string> optional;
};

const std::array<AtomSig, 8>& atom_signatures() {
  static const std::array<AtomSig, 8> kSigs = {{
      {"carrying", {"type"}, {"color"}},
      {"door_open", {}, {"color"}},
      {"door_locked", {}, {"color"}},
      {"on_cell", {"type"}, {"color"}},
      {"at_goal", {}, {}},
      {"adjacent", {"type"}, {"color"}},
      {"count", {"type", "op", "n"}, {}},
      {"tile_near", {"a_type", "a_color", "b_type", "b_color"}, {}},
  }};
  return kSigs;
}

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

// Single-line cursor over one labeling entry.
struct Cursor {
  const std::string& s;
  size_t pos = 0;
  int line;

  void skip_ws() {
    while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
  }
  bool done() {
    skip_ws();
    return pos >= s.size();
  }
  bool peek(char c) {
    skip_ws();
    return pos < s.size() && s[pos] == c;
  }
  bool eat(char c) {
    if (!peek(c)) return false;
    ++pos;
    return true;
  }
  bool eat2(const char* two) {
    skip_ws();
    if (pos + 1 < s.size() && s[pos] == two[0] && s[pos + 1] == two[1]) {
      pos += 2;
      return true;
    }
    return false;
  }
  void expect(char c, const char* what) {
    if (!eat(c)) throw SyntaxError(line, std::string("expected '") + c + "' " + what);
  }
  std::string ident(const char* what) {
    skip_ws();
    if (pos >= s.size() || !is_ident_start(s[pos])) {
      throw SyntaxError(line, std::string("expected ") + what);
    }
    size_t start = pos;
    while (pos < s.size() && is_ident_char(s[pos])) ++pos;
    return s.substr(start, pos - start);
  }
  // Argument values: identifiers or nonnegative integers.
  std::string value() {
    skip_ws();
    if (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) {
      size_t start = pos;
      while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
      return s.substr(start, pos - start);
    }
    return ident("argument value");
  }
};

void check_atom(const std::string& name, const std::map<std::string, std::string>& args,
                int line) {
  const AtomSig* sig = nullptr;
  for (const AtomSig& s : atom_signatures()) {
    if (name == s.name) {
      sig = &s;
      break;
    }
  }
  if (sig == nullptr) throw UnknownAtom(line, "unknown atom: " + name);
  for (const auto& [key, val] : args) {
    if (!sig->required.count(key) && !sig->optional.count(key)) {
      throw BadArg(line, name + "() does not take '" + key + "'");
    }
  }
  for (const std::string& key : sig->required) {
    if (!args.count(key)) throw BadArg(line, name + "() requires '" + key + "'");
  }
  // Value-level checks so typos fail at parse time, not mid-episode.
  auto check_type = [&](const char* key) {
    auto it = args.find(key);
    if (it == args.end()) return;
    try {
      object_type_from(it->second);
    } catch (const BadArg&) {
      throw BadArg(line, name + "(): bad object type '" + it->second + "'");
    }
  };
  auto check_color = [&](const char* key) {
    auto it = args.find(key);
    if (it == args.end()) return;
    try {
      color_from(it->second);
    } catch (const BadArg&) {
      throw BadArg(line, name + "(): bad color '" + it->second + "'");
    }
  };
  check_type("type");
  check_type("a_type");
  check_type("b_type");
  check_color("color");
  check_color("a_color");
  check_color("b_color");
  if (name == "count") {
    const std::string& op = args.at("op");
    if (op != "lt" && op != "le" && op != "eq" && op != "ge" && op != "gt") {
      throw BadArg(line, "count(): bad op '" + op + "'");
    }
    const std::string& n = args.at("n");
    for (char c : n) {
      if (!std::isdigit(static_cast<unsigned char>(c))) {
        throw BadArg(line, "count(): n must be a nonnegative integer");
      }
    }
    if (n.empty()) throw BadArg(line, "count(): n must be a nonnegative integer");
  }
}

std::shared_ptr<const PredicateExpr> parse_expr(Cursor& cur);

std::shared_ptr<const PredicateExpr> parse_factor(Cursor& cur) {
  if (cur.eat('!')) {
    auto node = std::make_shared<PredicateExpr>();
    node->kind = PredicateExpr::Kind::kNot;
    node->children.push_back(parse_factor(cur));
    return node;
  }
  if (cur.eat('(')) {
    auto inner = parse_expr(cur);
    cur.expect(')', "to close group");
    return inner;
  }
  auto node = std::make_shared<PredicateExpr>();
  node->kind = PredicateExpr::Kind::kAtom;
  node->atom = cur.ident("atom name");
  cur.expect('(', "after atom name");
  if (!cur.peek(')')) {
    while (true) {
      std::string key = cur.ident("argument name");
      cur.expect('=', "after argument name");
      std::string val = cur.value();
      if (!node->args.emplace(key, val).second) {
        throw BadArg(cur.line, node->atom + "(): duplicate argument '" + key + "'");
      }
      if (!cur.eat(',')) break;
    }
  }
  cur.expect(')', "to close atom arguments");
  check_atom(node->atom, node->args, cur.line);
  return node;
}

std::shared_ptr<const PredicateExpr> parse_term(Cursor& cur) {
  auto left = parse_factor(cur);
  while (cur.eat2("&&")) {
    auto node = std::make_shared<PredicateExpr>();
    node->kind = PredicateExpr::Kind::kAnd;
    node->children = {left, parse_factor(cur)};
    left = node;
  }
  return left;
}

std::shared_ptr<const PredicateExpr> parse_expr(Cursor& cur) {
  auto left = parse_term(cur);
  while (cur.eat2("||")) {
    auto node = std::make_shared<PredicateExpr>();
    node->kind = PredicateExpr::Kind::kOr;
    node->children = {left, parse_term(cur)};
    left = node;
  }
  return left;
}

bool type_matches(const Cell& c, ObjectType t) { return c.type == t; }

bool cell_matches(const Cell& c, ObjectType t, const std::map<std::string, std::string>& args,
                  const char* color_key) {
  if (c.type != t) return false;
  auto it = args.find(color_key);
  if (it == args.end()) return true;
  return c.color == color_from(it->second);
}

bool eval_atom(const PredicateExpr& e, const ObservationRecord& obs) {
  const auto& args = e.args;
  if (e.atom == "carrying") {
    if (!obs.carrying.has) return false;
    if (obs.carrying.type != object_type_from(args.at("type"))) return false;
    auto it = args.find("color");
    return it == args.end() || obs.carrying.color == color_from(it->second);
  }
  if (e.atom == "door_open" || e.atom == "door_locked") {
    bool want_open = (e.atom == "door_open");
    for (const Cell& c : obs.cells) {
      if (c.type != ObjectType::kDoor) continue;
      auto it = args.find("color");
      if (it != args.end() && c.color != color_from(it->second)) continue;
      if (want_open ? c.is_open : c.is_locked) return true;
    }
    return false;
  }
  if (e.atom == "on_cell") {
    return cell_matches(obs.at(obs.agent_x, obs.agent_y), object_type_from(args.at("type")), args,
                        "color");
  }
  if (e.atom == "at_goal") {
    return obs.at(obs.agent_x, obs.agent_y).type == ObjectType::kGoal;
  }
  if (e.atom == "adjacent") {
    ObjectType t = object_type_from(args.at("type"));
    constexpr int dx[] = {1, 0, -1, 0};
    constexpr int dy[] = {0, 1, 0, -1};
    for (int d = 0; d < 4; ++d) {
      int nx = obs.agent_x + dx[d], ny = obs.agent_y + dy[d];
      if (obs.in_bounds(nx, ny) && cell_matches(obs.at(nx, ny), t, args, "color")) return true;
    }
    return false;
  }
  if (e.atom == "count") {
    ObjectType t = object_type_from(args.at("type"));
    long have = 0;
    for (const Cell& c : obs.cells) {
      if (type_matches(c, t)) ++have;
    }
    long n = std::strtol(args.at("n").c_str(), nullptr, 10);
    const std::string& op = args.at("op");
    if (op == "lt") return have < n;
    if (op == "le") return have <= n;
    if (op == "eq") return have == n;
    if (op == "ge") return have >= n;
    return have > n;  // gt
  }
  // tile_near: some cell matching (a_type, a_color) is 4-adjacent to a cell
  // matching (b_type, b_color).
  ObjectType at = object_type_from(args.at("a_type"));
  ObjColor ac = color_from(args.at("a_color"));
  ObjectType bt = object_type_from(args.at("b_type"));
  ObjColor bc = color_from(args.at("b_color"));
  constexpr int dx[] = {1, 0, -1, 0};
  constexpr int dy[] = {0, 1, 0, -1};
  for (int y = 0; y < obs.height; ++y) {
    for (int x = 0; x < obs.width; ++x) {
      const Cell& a = obs.at(x, y);
      if (a.type != at || a.color != ac) continue;
      for (int d = 0; d < 4; ++d) {
        int nx = x + dx[d], ny = y + dy[d];
        if (!obs.in_bounds(nx, ny)) continue;
        const Cell& b = obs.at(nx, ny);
        if (b.type == bt && b.color == bc) return true;
      }
    }
  }
  return false;
}

bool eval_expr(const PredicateExpr& e, const ObservationRecord& obs) {
  switch (e.kind) {
    case PredicateExpr::Kind::kAtom:
      return eval_atom(e, obs);
    case PredicateExpr::Kind::kNot:
      return !eval_expr(*e.children[0], obs);
    case PredicateExpr::Kind::kAnd:
      return eval_expr(*e.children[0], obs) && eval_expr(*e.children[1], obs);
    case PredicateExpr::Kind::kOr:
      return eval_expr(*e.children[0], obs) || eval_expr(*e.children[1], obs);
  }
  return false;
}

}  // namespace

void LabelingMap::add(const std::string& event, std::shared_ptr<const PredicateExpr> expr) {
  if (!entries_.emplace(event, std::move(expr)).second) {
    throw SyntaxError(0, "duplicate labeling entry for event: " + event);
  }
  order_.push_back(event);
}

bool LabelingMap::has(const std::string& event) const { return entries_.count(event) > 0; }

const PredicateExpr& LabelingMap::expr(const std::string& event) const {
  auto it = entries_.find(event);
  if (it == entries_.end()) throw UnknownEvent("no labeling entry for event: " + event);
  return *it->second;
}

LabelingMap parse_labeling(const std::string& text) {
  LabelingMap map;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    size_t hash = raw.find('#');
    if (hash != std::string::npos) raw.resize(hash);
    if (raw.find_first_not_of(" \t\r") == std::string::npos) continue;
    while (!raw.empty() && (raw.back() == '\r' || raw.back() == ' ' || raw.back() == '\t')) {
      raw.pop_back();
    }
    Cursor cur{raw, 0, line_no};
    std::string event = cur.ident("event name");
    if (event == kElseToken) {
      throw SyntaxError(line_no, "the else event must not have a labeling entry");
    }
    cur.expect(':', "after event name");
    auto expr = parse_expr(cur);
    if (!cur.done()) throw SyntaxError(line_no, "trailing text after predicate");
    try {
      map.add(event, std::move(expr));
    } catch (const SyntaxError& e) {
      throw SyntaxError(line_no, e.what());
    }
  }
  return map;
}

bool eval_event(const LabelingMap& map, const std::string& event, const ObservationRecord& obs) {
  return eval_expr(map.expr(event), obs);
}

int resolve_event(const Larm& m, const LabelingMap& map, int u, const ObservationRecord& obs,
                  int* eval_count) {
  for (const ExplicitEdge& e : m.edges_from(u)) {
    if (eval_count != nullptr) ++*eval_count;
    if (eval_event(map, m.event_name(e.event), obs)) return e.event;
  }
  return kNoEvent;
}

}  // namespace larm
