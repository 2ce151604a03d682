#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "larm/machine.hpp"
#include "larm/observation.hpp"

namespace larm {

// Boolean predicate AST over ObservationRecord.
struct PredicateExpr {
  enum class Kind { kAtom, kNot, kAnd, kOr };

  Kind kind = Kind::kAtom;
  // kAtom
  std::string atom;
  std::map<std::string, std::string> args;
  // kNot: children[0]; kAnd/kOr: children[0], children[1]
  std::vector<std::shared_ptr<const PredicateExpr>> children;
};

// Event name -> predicate, in declaration order. Extra entries that no
// machine references are tolerated (they are simply never evaluated).
class LabelingMap {
 public:
  void add(const std::string& event, std::shared_ptr<const PredicateExpr> expr);
  bool has(const std::string& event) const;
  const PredicateExpr& expr(const std::string& event) const;  // UnknownEvent
  const std::vector<std::string>& events() const { return order_; }

 private:
  std::vector<std::string> order_;
  std::map<std::string, std::shared_ptr<const PredicateExpr>> entries_;
};

// Sidecar text format, one entry per line:
//   event_name: expr
//   expr   := term ("||" term)*
//   term   := factor ("&&" factor)*
//   factor := "!" factor | "(" expr ")" | atom
//   atom   := name "(" [key=value ("," key=value)*] ")"
// "#" starts a comment; blank lines ignored. Atom names and their keyword
// arguments are checked against the registered vocabulary at parse time
// (UnknownAtom / BadArg). Duplicate event entries are a SyntaxError.
LabelingMap parse_labeling(const std::string& text);

// Pure evaluation of one event's predicate. UnknownEvent if unregistered.
bool eval_event(const LabelingMap& map, const std::string& event, const ObservationRecord& obs);

// Algorithm: walk u's explicit transitions in declaration order, evaluate
// each edge's event predicate, return the first true one; kNoEvent when none
// fires. Predicates of events without a transition out of u are never
// evaluated (eval_count, when given, counts evaluations for tests).
int resolve_event(const Larm& m, const LabelingMap& map, int u, const ObservationRecord& obs,
                  int* eval_count = nullptr);

}  // namespace larm
