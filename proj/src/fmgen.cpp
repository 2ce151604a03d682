#include <larm/fmgen.hpp>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include <larm/instructions.hpp>
#include <larm/labeling.hpp>
#include <larm/rm_spec.hpp>

// httplib leaks macros that clash with other headers; keep it last.
#include <httplib.h>
#include <json.hpp>

namespace larm {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string replace_all(std::string text, const std::string& key, const std::string& value) {
  size_t pos = 0;
  while ((pos = text.find(key, pos)) != std::string::npos) {
    text.replace(pos, key.size(), value);
    pos += value.size();
  }
  return text;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw BadArg(0, "cannot read " + path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

}  // namespace

Verdict parse_verdict(const std::string& critic_reply) {
  size_t ok = critic_reply.rfind(kApproveToken);
  size_t chg = critic_reply.rfind(kChangesToken);
  if (ok == std::string::npos && chg == std::string::npos) {
    return {false, {"no verdict found"}};
  }
  if (chg == std::string::npos || (ok != std::string::npos && ok > chg)) {
    return {true, {}};
  }
  Verdict v;
  v.approved = false;
  std::istringstream rest(critic_reply.substr(chg + std::string(kChangesToken).size()));
  std::string line;
  while (std::getline(rest, line)) {
    std::string t = trim(line);
    if (t.rfind("- ", 0) == 0) v.issues.push_back(trim(t.substr(2)));
  }
  return v;
}

std::string extract_block(const std::string& reply, const std::string& tag) {
  std::string best;
  bool found = false;
  size_t pos = 0;
  while ((pos = reply.find("```", pos)) != std::string::npos) {
    size_t tag_start = pos + 3;
    size_t eol = reply.find('\n', tag_start);
    if (eol == std::string::npos) break;
    std::string fence_tag = trim(reply.substr(tag_start, eol - tag_start));
    size_t close = reply.find("```", eol + 1);
    if (close == std::string::npos) break;
    if (fence_tag == tag) {
      std::string content = reply.substr(eol + 1, close - eol - 1);
      if (!content.empty() && content.back() == '\n') content.pop_back();
      if (!content.empty() && content.front() == '\n') content.erase(content.begin());
      best = content;
      found = true;
    }
    pos = close + 3;
  }
  if (!found) throw ExtractionError("no ```" + tag + "``` block in reply");
  return best;
}

std::string transcript_to_jsonl(const std::vector<TranscriptEntry>& transcript) {
  std::string out;
  for (const TranscriptEntry& e : transcript) {
    nlohmann::json j{{"round", e.round},
                     {"role", e.role},
                     {"request", e.request},
                     {"reply", e.reply},
                     {"ts", e.ts}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<TranscriptEntry> parse_transcript_jsonl(const std::string& text) {
  std::vector<TranscriptEntry> entries;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw SyntaxError(line_no, std::string("bad transcript line: ") + e.what());
    }
    try {
      TranscriptEntry e;
      e.round = j.at("round").get<int>();
      e.role = j.at("role").get<std::string>();
      e.request = j.at("request").get<std::string>();
      e.reply = j.at("reply").get<std::string>();
      e.ts = j.at("ts").get<std::string>();
      entries.push_back(std::move(e));
    } catch (const nlohmann::json::exception& e) {
      throw BadArg(line_no, std::string("bad transcript entry: ") + e.what());
    }
  }
  return entries;
}

std::string status_name(SessionStatus status) {
  switch (status) {
    case SessionStatus::kInProgress: return "in_progress";
    case SessionStatus::kApproved: return "approved";
    case SessionStatus::kExhausted: return "exhausted";
  }
  return "unknown";
}

std::string utc_now_iso8601() {
  std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

HttpFmClient::HttpFmClient(FmClientConfig config) : config_(std::move(config)) {
  const std::string& url = config_.endpoint;
  size_t scheme = url.find("://");
  if (scheme == std::string::npos) throw BadArg(0, "endpoint must be a http(s) URL");
  size_t slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) {
    host_ = url;
    path_ = "/v1/chat/completions";
  } else {
    host_ = url.substr(0, slash);
    std::string rest = url.substr(slash);
    path_ = (rest == "/") ? "/v1/chat/completions" : rest;
  }
}

std::string HttpFmClient::complete(const std::string& prompt) {
  const char* key = std::getenv(config_.api_key_env.c_str());
  if (key == nullptr || *key == '\0') {
    throw TransportError("environment variable " + config_.api_key_env + " is not set");
  }
  nlohmann::json body{{"model", config_.model},
                      {"messages", nlohmann::json::array({nlohmann::json{
                                       {"role", "user"}, {"content", prompt}}})},
                      {"temperature", 0.2}};
  const std::string payload = body.dump();
  std::string last_error;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(500L << (attempt - 1)));
    }
    httplib::Client cli(host_);
    cli.set_connection_timeout(config_.timeout_seconds, 0);
    cli.set_read_timeout(config_.timeout_seconds, 0);
    cli.set_write_timeout(config_.timeout_seconds, 0);
    httplib::Headers headers{{"Authorization", std::string("Bearer ") + key}};
    auto res = cli.Post(path_, headers, payload, "application/json");
    if (!res) {
      last_error = "transport failure: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    try {
      nlohmann::json reply = nlohmann::json::parse(res->body);
      return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      last_error = std::string("bad response body: ") + e.what();
    }
  }
  throw TransportError("POST " + host_ + path_ + " failed after " +
                       std::to_string(config_.max_retries + 1) + " attempts (" + last_error +
                       ")");
}

OfflineFmClient::OfflineFmClient(std::vector<TranscriptEntry> recorded) {
  for (TranscriptEntry& e : recorded) {
    if (e.role == kRoleGenerator || e.role == kRoleCritic) recorded_.push_back(std::move(e));
  }
}

OfflineFmClient OfflineFmClient::from_file(const std::string& jsonl_path) {
  return OfflineFmClient(parse_transcript_jsonl(read_text_file(jsonl_path)));
}

std::string OfflineFmClient::complete(const std::string& prompt) {
  if (next_ >= recorded_.size()) {
    throw TransportError("offline transcript exhausted after " +
                         std::to_string(recorded_.size()) + " exchanges");
  }
  const TranscriptEntry& e = recorded_[next_];
  if (e.request != prompt) {
    size_t byte = 0;
    size_t limit = std::min(e.request.size(), prompt.size());
    while (byte < limit && e.request[byte] == prompt[byte]) ++byte;
    throw TransportError("offline transcript mismatch at exchange " + std::to_string(next_ + 1) +
                         " (" + e.role + "): requests diverge at byte " + std::to_string(byte));
  }
  ++next_;
  return e.reply;
}

std::unique_ptr<FmClient> make_fm_client(const FmClientConfig& config) {
  if (!config.offline_transcript.empty()) {
    return std::make_unique<OfflineFmClient>(OfflineFmClient::from_file(config.offline_transcript));
  }
  return std::make_unique<HttpFmClient>(config);
}

PromptPack load_prompt_pack(const std::string& dir, bool raw_labeling) {
  PromptPack pack;
  pack.rm_generator = read_text_file(dir + "/rm_generator.txt");
  pack.rm_critic = read_text_file(dir + "/rm_critic.txt");
  if (raw_labeling) {
    pack.labeling_generator = read_text_file(dir + "/labeling_generator_python.txt");
    pack.labeling_critic = read_text_file(dir + "/labeling_critic_python.txt");
    pack.labeling_tag = "python";
  } else {
    pack.labeling_generator = read_text_file(dir + "/labeling_generator.txt");
    pack.labeling_critic = read_text_file(dir + "/labeling_critic.txt");
    pack.labeling_tag = "lbl";
  }
  pack.instructions_generator = read_text_file(dir + "/instructions_generator.txt");
  return pack;
}

namespace {

// Unique non-else event names in declaration order.
std::vector<std::string> machine_events(const RewardMachineSpec& spec) {
  std::vector<std::string> events;
  std::set<std::string> seen;
  for (const RmTransition& t : spec.transitions) {
    if (t.event == kElseToken) continue;
    if (seen.insert(t.event).second) events.push_back(t.event);
  }
  return events;
}

// Deterministic findings for a candidate RM: syntax errors or validator
// errors, one line each.
std::vector<std::string> check_rm_text(const std::string& text) {
  std::vector<std::string> findings;
  RewardMachineSpec spec;
  try {
    spec = parse_rm(text);
  } catch (const SyntaxError& e) {
    findings.push_back(std::string("the machine does not parse: ") + e.what());
    return findings;
  }
  ValidationReport report = validate_rm(spec);
  for (const Finding& f : report.errors) {
    findings.push_back(f.code + " line " + std::to_string(f.line) + ": " + f.message);
  }
  return findings;
}

// Findings for candidate labeling text: syntax errors or uncovered events.
std::vector<std::string> check_labeling_text(const std::string& text,
                                             const RewardMachineSpec& spec) {
  std::vector<std::string> findings;
  LabelingMap map;
  try {
    map = parse_labeling(text);
  } catch (const SyntaxError& e) {
    findings.push_back(std::string("the labeling does not parse: ") + e.what());
    return findings;
  }
  for (const std::string& event : machine_events(spec)) {
    if (!map.has(event)) findings.push_back("no entry for event " + event);
  }
  return findings;
}

std::vector<std::string> check_instructions_text(const std::string& text,
                                                 const RewardMachineSpec& spec) {
  std::vector<std::string> findings;
  std::map<std::string, std::string> entries;
  try {
    entries = parse_instructions(text);
  } catch (const SyntaxError& e) {
    findings.push_back(std::string("the instructions do not parse: ") + e.what());
    return findings;
  }
  for (const std::string& state : spec.states) {
    auto it = entries.find(state);
    if (it == entries.end() || trim(it->second).empty()) {
      findings.push_back("no instruction for state " + state);
    }
  }
  return findings;
}

struct StageOutcome {
  bool approved = false;
  std::string text;  // last candidate, approved or best-effort
  int rounds = 0;
};

std::string issues_suffix(const std::string& tag, const std::string& previous,
                          const std::vector<std::string>& issues) {
  std::string out = "\n\nA previous attempt produced this candidate:\n```" + tag + "\n" +
                    previous + "\n```\n\nReviewer feedback:\n";
  for (const std::string& issue : issues) out += "- " + issue + "\n";
  out += "\nRegenerate the full corrected output now.";
  return out;
}

}  // namespace

GenSession run_generation_loop(const std::string& mission, const PromptPack& prompts,
                               FmClient& client, const GenOptions& options) {
  if (options.max_rounds < 1) throw BadArg(0, "max_rounds must be at least 1");
  GenSession session;
  session.mission = mission;
  session.max_rounds = options.max_rounds;
  auto clock = options.clock ? options.clock : utc_now_iso8601;

  auto call = [&](const std::string& prompt, const char* role, int round) {
    std::string reply = client.complete(prompt);
    session.transcript.push_back({round, role, prompt, reply, clock()});
    return reply;
  };

  // One refinement stage: generator, fence extraction, critic verdict plus
  // deterministic findings. Approval requires both to be clean.
  auto run_stage = [&](const std::string& generator_base, const std::string& critic_template,
                       const std::string& tag,
                       const std::function<std::vector<std::string>(const std::string&)>& check,
                       int first_round) {
    StageOutcome outcome;
    std::vector<std::string> issues;
    std::string previous;
    for (int round = first_round; round <= options.max_rounds; ++round) {
      outcome.rounds = round;
      std::string prompt = generator_base;
      if (!issues.empty()) prompt += issues_suffix(tag, previous, issues);
      std::string candidate = extract_block(call(prompt, kRoleGenerator, round), tag);
      std::string critic_prompt = replace_all(critic_template, "{CANDIDATE}", candidate);
      Verdict verdict = parse_verdict(call(critic_prompt, kRoleCritic, round));
      std::vector<std::string> findings = check(candidate);
      outcome.text = candidate;
      if (verdict.approved && findings.empty()) {
        outcome.approved = true;
        return outcome;
      }
      issues = verdict.issues;
      issues.insert(issues.end(), findings.begin(), findings.end());
      previous = candidate;
    }
    return outcome;
  };

  // Reward machine stage.
  std::string rm_generator = replace_all(prompts.rm_generator, "{MISSION}", mission);
  std::string rm_critic = replace_all(prompts.rm_critic, "{MISSION}", mission);
  StageOutcome rm = run_stage(rm_generator, rm_critic, "plaintext", check_rm_text, 1);
  session.round = rm.rounds;
  session.rm_text = rm.text;
  if (!rm.approved) {
    session.status = SessionStatus::kExhausted;
    return session;
  }
  RewardMachineSpec spec = parse_rm(session.rm_text);

  // Labeling stage; raw python code is stored verbatim without parsing.
  auto check_labeling = [&](const std::string& text) {
    if (options.raw_labeling) return std::vector<std::string>{};
    return check_labeling_text(text, spec);
  };
  auto run_labeling = [&]() {
    std::string generator =
        replace_all(replace_all(prompts.labeling_generator, "{MISSION}", mission),
                    "{REWARD_MACHINE}", session.rm_text);
    std::string critic = replace_all(replace_all(prompts.labeling_critic, "{MISSION}", mission),
                                     "{REWARD_MACHINE}", session.rm_text);
    StageOutcome out = run_stage(generator, critic, prompts.labeling_tag, check_labeling, 1);
    session.labeling_round = out.rounds;
    session.labeling_text = out.text;
    return out.approved;
  };

  // Instructions stage: one generator call, one feedback retry on findings.
  auto run_instructions = [&]() {
    std::string base =
        replace_all(replace_all(prompts.instructions_generator, "{MISSION}", mission),
                    "{REWARD_MACHINE}", session.rm_text);
    std::string text = extract_block(call(base, kRoleGenerator, 1), "text");
    std::vector<std::string> findings = check_instructions_text(text, spec);
    if (!findings.empty()) {
      std::string retry = base + issues_suffix("text", text, findings);
      text = extract_block(call(retry, kRoleGenerator, 2), "text");
      findings = check_instructions_text(text, spec);
    }
    session.instructions_text = text;
    return findings.empty();
  };

  if (!run_labeling() || !run_instructions()) {
    session.status = SessionStatus::kExhausted;
    return session;
  }

  // Optional human checkpoint, invoked once. Feedback buys one extra reward
  // machine round, after which the dependent stages are regenerated.
  if (options.human_hook) {
    std::string shown = "Reward machine:\n" + session.rm_text + "\n\nLabeling:\n" +
                        session.labeling_text + "\n\nInstructions:\n" +
                        session.instructions_text + "\n\nApprove, or give feedback.";
    HumanDecision decision = options.human_hook(session);
    session.transcript.push_back({session.round, kRoleHuman, shown,
                                  decision.approve ? "approve" : decision.feedback, clock()});
    if (!decision.approve) {
      int extra_round = session.round + 1;
      std::string prompt = rm_generator +
                           issues_suffix("plaintext", session.rm_text, {decision.feedback});
      std::string candidate =
          extract_block(call(prompt, kRoleGenerator, extra_round), "plaintext");
      std::string critic_prompt = replace_all(rm_critic, "{CANDIDATE}", candidate);
      Verdict verdict = parse_verdict(call(critic_prompt, kRoleCritic, extra_round));
      std::vector<std::string> findings = check_rm_text(candidate);
      session.round = extra_round;
      session.rm_text = candidate;
      if (!verdict.approved || !findings.empty()) {
        session.status = SessionStatus::kExhausted;
        return session;
      }
      spec = parse_rm(session.rm_text);
      if (!run_labeling() || !run_instructions()) {
        session.status = SessionStatus::kExhausted;
        return session;
      }
    }
  }

  session.status = SessionStatus::kApproved;
  return session;
}

}  // namespace larm
