#include "larm/instructions.hpp"

#include <sstream>

#include "larm/errors.hpp"

namespace larm {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::map<std::string, std::string> parse_instructions(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    size_t colon = t.find(':');
    if (colon == std::string::npos) {
      throw SyntaxError(line_no, "expected `state: instruction text`");
    }
    std::string state = trim(t.substr(0, colon));
    if (state.empty()) throw SyntaxError(line_no, "empty state name");
    if (out.count(state)) throw SyntaxError(line_no, "duplicate instruction for " + state);
    out[state] = trim(t.substr(colon + 1));
  }
  return out;
}

std::string serialize_instructions(const std::map<std::string, std::string>& instructions) {
  std::string out;
  for (const auto& [state, text] : instructions) {
    out += state + ": " + text + "\n";
  }
  return out;
}

}  // namespace larm
