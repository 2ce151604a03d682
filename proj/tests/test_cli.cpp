#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <sys/wait.h>

#include <json.hpp>

#include "support/helpers.hpp"

using nlohmann::json;
using testsupport::fixture_path;
using testsupport::read_file;

namespace {

struct CmdResult {
  int exit_code = -1;
  std::string output;  // stdout and stderr interleaved
};

// Runs the installed binary through the shell, capturing combined output.
CmdResult run_cli(const std::string& args) {
  std::string cmd = std::string(LARM_CLI_BIN) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  CmdResult result;
  char buf[4096];
  size_t n;
  while ((n = fread(buf, 1, sizeof(buf), pipe)) > 0) result.output.append(buf, n);
  int status = pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

std::string temp_dir(const std::string& tag) {
  std::string templ =
      (std::filesystem::temp_directory_path() / ("larm_cli_" + tag + "_XXXXXX")).string();
  char* made = mkdtemp(templ.data());
  REQUIRE(made != nullptr);
  return templ;
}

std::string rm(const std::string& name) { return fixture_path("rm/" + name); }

const std::string kDoorkeyMission =
    "This environment has a key that the agent must pick up in order to unlock a door "
    "and then get to the green goal square.";

std::string doorkey_task_flags() {
  return "--task doorkey --size 5 --rm " + rm("doorkey.rm") + " --lbl " +
         fixture_path("lbl/doorkey.lbl") + " --instructions " +
         fixture_path("instructions/doorkey.instructions");
}

}  // namespace

TEST_CASE("validate exits 0 on a clean fixture and 1 on a defective one") {
  CmdResult ok = run_cli("validate " + rm("doorkey.rm"));
  CHECK(ok.exit_code == 0);
  CHECK(ok.output == "ok\n");

  CmdResult bad = run_cli("validate " + rm("craftium.rm"));
  CHECK(bad.exit_code == 1);
  CHECK(bad.output.find("E_UNDECLARED_STATE") != std::string::npos);
  CHECK(bad.output.find("E_REWARD_NO_TRANSITION") != std::string::npos);
}

TEST_CASE("validate --json is a parseable report") {
  CmdResult bad = run_cli("validate --json " + rm("craftium.rm"));
  CHECK(bad.exit_code == 1);
  json report = json::parse(bad.output);
  CHECK(report["ok"] == false);
  bool found = false;
  for (const auto& e : report["errors"]) {
    if (e["code"] == "E_UNDECLARED_STATE") found = true;
  }
  CHECK(found);

  CmdResult ok = run_cli("validate --json " + rm("doorkey.rm"));
  CHECK(ok.exit_code == 0);
  json clean = json::parse(ok.output);
  CHECK(clean["ok"] == true);
  CHECK(clean["errors"].empty());
}

TEST_CASE("parse reports syntax and file errors with exit 2") {
  CHECK(run_cli("parse /nonexistent/no.rm").exit_code == 2);

  CmdResult ok = run_cli("parse --json " + rm("doorkey.rm"));
  CHECK(ok.exit_code == 0);
  json spec = json::parse(ok.output);
  CHECK(spec["states"].size() == 4);
  CHECK(spec["initial"] == "u0");
  CHECK(spec["transitions"].size() == 8);
  CHECK(spec["rewards"].size() == 4);
}

TEST_CASE("bad invocations exit 2") {
  CHECK(run_cli("").exit_code == 2);
  CHECK(run_cli("frobnicate").exit_code == 2);
  CHECK(run_cli("validate " + rm("doorkey.rm") + " --no-such-flag").exit_code == 2);
  CHECK(run_cli("--help").exit_code == 0);
}

TEST_CASE("viz emits DOT to stdout or a file") {
  CmdResult out = run_cli("viz " + rm("doorkey.rm"));
  CHECK(out.exit_code == 0);
  CHECK(out.output.find("digraph reward_machine") != std::string::npos);
  CHECK(out.output.find("__start -> u0") != std::string::npos);
  CHECK(out.output.find("u3 [shape=doublecircle]") != std::string::npos);
  CHECK(out.output.find("else") == std::string::npos);

  std::string dir = temp_dir("viz");
  CmdResult file = run_cli("viz " + rm("doorkey.rm") + " --include-else --dot " + dir + "/m.dot");
  CHECK(file.exit_code == 0);
  std::string dot = read_file(dir + "/m.dot");
  CHECK(dot.find("style=dashed") != std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST_CASE("embed writes one CSV row per instruction") {
  CmdResult pca = run_cli("embed --instructions " +
                          fixture_path("instructions/doorkey.instructions") + " --pca 2");
  CHECK(pca.exit_code == 0);
  std::istringstream lines(pca.output);
  std::string line;
  std::getline(lines, line);
  CHECK(line == "state,c0,c1");
  int rows = 0;
  while (std::getline(lines, line)) {
    if (!line.empty()) ++rows;
  }
  CHECK(rows == 4);

  CmdResult full = run_cli("embed --instructions " +
                           fixture_path("instructions/doorkey.instructions"));
  CHECK(full.exit_code == 0);
  CHECK(full.output.substr(0, 12) == "state,e0,e1,");
  CHECK(full.output.find(",e63") != std::string::npos);
}

TEST_CASE("train fans out over seeds and stamps the run manifest") {
  std::string dir = temp_dir("train");
  CmdResult r = run_cli("train " + doorkey_task_flags() +
                        " --backend tabular --mode both --steps 4000 --seeds 0,1 --out " + dir);
  CHECK(r.exit_code == 0);
  for (const char* name : {"report_seed0.csv", "report_seed1.csv", "qfn_seed0.json",
                           "qfn_seed1.json", "summary.json", "run.json"}) {
    CHECK(std::filesystem::exists(dir + "/" + name));
  }
  std::string csv = read_file(dir + "/report_seed0.csv");
  CHECK(csv.substr(0, csv.find('\n')) == "episode,env_return,rm_return,success,steps");

  json manifest = json::parse(read_file(dir + "/run.json"));
  CHECK(manifest["command"] == "train");
  CHECK(manifest["config"]["seeds"] == json::array({0, 1}));
  CHECK(manifest["config"]["total_steps"] == 4000);
  CHECK(manifest.contains("version"));
  CHECK(manifest.contains("started"));

  // Same seed, fresh run: identical report. Different seed: different course.
  std::string dir2 = temp_dir("train2");
  CmdResult r2 = run_cli("train " + doorkey_task_flags() +
                         " --backend tabular --mode both --steps 4000 --seeds 0 --out " + dir2);
  CHECK(r2.exit_code == 0);
  CHECK(read_file(dir2 + "/report_seed0.csv") == csv);
  CHECK(read_file(dir + "/report_seed1.csv") != csv);

  // eval reloads the saved q-function and reports a parseable rate.
  CmdResult ev = run_cli("eval " + doorkey_task_flags() + " --qfn " + dir +
                         "/qfn_seed0.json --episodes 20 --seed 3 --json");
  CHECK(ev.exit_code == 0);
  json eval_out = json::parse(ev.output);
  CHECK(eval_out["episodes"] == 20);
  CHECK(eval_out["success_rate"].is_number());

  std::filesystem::remove_all(dir);
  std::filesystem::remove_all(dir2);
}

TEST_CASE("train on a task json resolves sidecars by stem") {
  std::string dir = temp_dir("trainjson");
  CmdResult r = run_cli("train --task " + fixture_path("compose/task_a.json") +
                        " --backend tabular --mode both --steps 300 --seeds 5 --out " + dir);
  CHECK(r.exit_code == 0);
  CHECK(std::filesystem::exists(dir + "/report_seed5.csv"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("named task without sidecar files is rejected") {
  CmdResult r = run_cli("train --task no_such_layout --steps 10 --out /tmp/larm_cli_nope");
  CHECK(r.exit_code == 2);
  CHECK(r.output.find("--rm") != std::string::npos);
}

TEST_CASE("ablate prints the four conditioning rows") {
  std::string dir = temp_dir("ablate");
  CmdResult r = run_cli("ablate " + doorkey_task_flags() +
                        " --backend tabular --steps 600 --seeds 0 --eval-episodes 4 --out " + dir);
  CHECK(r.exit_code == 0);
  std::string csv = read_file(dir + "/ablation.csv");
  CHECK(csv.substr(0, csv.find('\n')) == "mode,mean,stddev,seed0");
  CHECK(csv.find("\nboth,") != std::string::npos);
  CHECK(csv.find("\nrewards_only,") != std::string::npos);
  CHECK(csv.find("\nembeddings_only,") != std::string::npos);
  CHECK(csv.find("\nneither,") != std::string::npos);
  CHECK(std::filesystem::exists(dir + "/run.json"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("gen --offline reproduces the recorded artifacts and exit codes") {
  std::string dir = temp_dir("gen");
  CmdResult ok = run_cli("gen --offline " + fixture_path("sessions/approve_round_1.jsonl") +
                         " --prompts " + fixture_path("prompts") + " --mission \"" +
                         kDoorkeyMission + "\" --out " + dir);
  CHECK(ok.exit_code == 0);
  CHECK(read_file(dir + "/rm.rm") == read_file(fixture_path("sessions/approve_round_1.rm")));
  CHECK(read_file(dir + "/labeling.lbl") ==
        read_file(fixture_path("sessions/approve_round_1.lbl")));
  CHECK(read_file(dir + "/instructions.instructions") ==
        read_file(fixture_path("sessions/approve_round_1.instructions")));
  CHECK(std::filesystem::exists(dir + "/transcript.jsonl"));
  json manifest = json::parse(read_file(dir + "/run.json"));
  CHECK(manifest["config"]["status"] == "approved");

  std::string dir2 = temp_dir("genx");
  CmdResult bad = run_cli("gen --offline " + fixture_path("sessions/exhausted.jsonl") +
                          " --prompts " + fixture_path("prompts") + " --rounds 1 --mission \"" +
                          kDoorkeyMission + "\" --out " + dir2);
  CHECK(bad.exit_code == 1);
  json manifest2 = json::parse(read_file(dir2 + "/run.json"));
  CHECK(manifest2["config"]["status"] == "exhausted");

  std::filesystem::remove_all(dir);
  std::filesystem::remove_all(dir2);
}

TEST_CASE("gen requires a transport choice and a mission") {
  CHECK(run_cli("gen --mission x --out /tmp/larm_cli_gen_err").exit_code == 2);
  CHECK(run_cli("gen --offline nope.jsonl --out /tmp/larm_cli_gen_err2").exit_code == 2);
}
