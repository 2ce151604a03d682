#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <larm/errors.hpp>

namespace larm {

// Transcript roles. Generator and critic entries are FM calls; human entries
// record the optional verification checkpoint.
inline constexpr const char* kRoleGenerator = "generator";
inline constexpr const char* kRoleCritic = "critic";
inline constexpr const char* kRoleHuman = "human";

// Verdict tokens the critic templates demand.
inline constexpr const char* kApproveToken = "NO CHANGES NEEDED";
inline constexpr const char* kChangesToken = "CHANGES REQUIRED";

struct Verdict {
  bool approved = false;
  std::vector<std::string> issues;  // empty when approved
};

// Scans for the last occurrence of either verdict token; the later one wins.
// CHANGES REQUIRED collects every following "- " bullet line as an issue.
// A reply with neither token is treated as changes required with a
// synthesized "no verdict found" issue.
Verdict parse_verdict(const std::string& critic_reply);

// Content of the last fenced block whose tag matches, with a single leading
// and trailing newline trimmed. Throws ExtractionError when no block matches.
std::string extract_block(const std::string& reply, const std::string& tag);

struct TranscriptEntry {
  int round = 0;  // 1-based round within the stage the exchange belongs to
  std::string role;
  std::string request;
  std::string reply;
  std::string ts;  // ISO-8601 UTC
};

// JSONL persistence, one exchange per line with fields
// {round, role, request, reply, ts}.
std::string transcript_to_jsonl(const std::vector<TranscriptEntry>& transcript);
std::vector<TranscriptEntry> parse_transcript_jsonl(const std::string& text);

enum class SessionStatus { kInProgress, kApproved, kExhausted };
std::string status_name(SessionStatus status);

struct GenSession {
  std::string mission;
  int max_rounds = 0;
  int round = 0;           // rounds consumed by the reward machine stage
  int labeling_round = 0;  // rounds consumed by the labeling stage
  std::vector<TranscriptEntry> transcript;
  std::string rm_text;
  std::string labeling_text;
  std::string instructions_text;
  SessionStatus status = SessionStatus::kInProgress;
};

struct FmClientConfig {
  std::string endpoint;  // base URL; default path is /v1/chat/completions
  std::string model;
  // Name of the environment variable holding the API key. The key itself
  // never appears in flags, configs, logs, or error messages.
  std::string api_key_env = "LARM_API_KEY";
  int timeout_seconds = 60;
  int max_retries = 2;
  std::string offline_transcript;  // set: replay this JSONL, no network
};

// Blocking single-prompt completion contract.
class FmClient {
 public:
  virtual ~FmClient() = default;
  virtual std::string complete(const std::string& prompt) = 0;
};

// Live client speaking the chat-completion wire protocol: POST with fields
// model, messages[{role, content}], temperature 0.2; the reply is the first
// choice's message content. Retries with exponential backoff, then throws
// TransportError.
class HttpFmClient : public FmClient {
 public:
  explicit HttpFmClient(FmClientConfig config);
  std::string complete(const std::string& prompt) override;

 private:
  FmClientConfig config_;
  std::string host_;  // scheme://host:port
  std::string path_;
};

// Replays a recorded transcript. Every complete() call must match the next
// recorded FM request byte for byte and returns the recorded reply. Never
// touches the network.
class OfflineFmClient : public FmClient {
 public:
  // Keeps only generator and critic entries; human entries are not FM calls.
  explicit OfflineFmClient(std::vector<TranscriptEntry> recorded);
  static OfflineFmClient from_file(const std::string& jsonl_path);
  std::string complete(const std::string& prompt) override;
  std::size_t calls_made() const { return next_; }
  std::size_t remaining() const { return recorded_.size() - next_; }

 private:
  std::vector<TranscriptEntry> recorded_;
  std::size_t next_ = 0;
};

// OfflineFmClient when config.offline_transcript is set, HttpFmClient
// otherwise.
std::unique_ptr<FmClient> make_fm_client(const FmClientConfig& config);

// Prompt templates. Placeholders: {MISSION} everywhere, {CANDIDATE} in the
// critic templates, {REWARD_MACHINE} in the labeling and instructions
// templates.
struct PromptPack {
  std::string rm_generator;
  std::string rm_critic;
  std::string labeling_generator;
  std::string labeling_critic;
  std::string instructions_generator;
  std::string labeling_tag = "lbl";  // fence tag the labeling stage extracts
};

// Loads the stock templates (rm_generator.txt and friends) from a directory.
// raw_labeling switches the labeling stage to the python-code templates; the
// extracted code is then stored verbatim instead of being parsed.
PromptPack load_prompt_pack(const std::string& dir, bool raw_labeling = false);

struct HumanDecision {
  bool approve = true;
  std::string feedback;  // used when approve is false
};
// Invoked once, after FM approval, with the finished artifacts.
using HumanHook = std::function<HumanDecision(const GenSession&)>;

struct GenOptions {
  int max_rounds = 3;
  bool raw_labeling = false;
  HumanHook human_hook;                    // optional checkpoint
  std::function<std::string()> clock;      // transcript timestamps; UTC now
};

// The generator-critic refinement loop. Each round sends the generator
// prompt (previous reviewer issues appended from round 2 on), extracts the
// fenced candidate, and asks the critic for a verdict; deterministic
// validator findings are appended to the critic's feedback, so approval
// implies the artifact parses and validates clean. After the reward machine
// stage the same loop runs for the labeling functions, then a single
// generator call (with one feedback retry) produces the per-state
// instructions. Exhausting max_rounds in any stage ends the session with
// status exhausted and best-effort artifacts. Throws TransportError after
// client retries are spent and ExtractionError when a generator reply has no
// fenced block.
GenSession run_generation_loop(const std::string& mission, const PromptPack& prompts,
                               FmClient& client, const GenOptions& options = {});

// Current time as ISO-8601 UTC, the default transcript clock.
std::string utc_now_iso8601();

}  // namespace larm
