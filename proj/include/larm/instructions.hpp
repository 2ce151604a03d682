#pragma once

#include <map>
#include <string>

namespace larm {

// Sidecar format, one state per line: `u0: pick up the key`. Blank lines and
// `#` comments are ignored; the text keeps everything after the first colon
// with surrounding whitespace trimmed. Duplicate states are a SyntaxError.
std::map<std::string, std::string> parse_instructions(const std::string& text);

// Inverse of parse_instructions, states in map order, trailing newline.
std::string serialize_instructions(const std::map<std::string, std::string>& instructions);

}  // namespace larm
