// Acceptance gate: one line per criterion, [PASS]/[FAIL], exit 0 only when
// every criterion passes. The CLI binary path is expected as argv[1] for the
// command-line criterion.

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "attnlab/report.hpp"
#include "attnlab/suites.hpp"

using namespace attnlab;
using Clock = std::chrono::steady_clock;

namespace {

struct CriterionResult {
  bool passed = false;
  double ms = 0.0;
  std::string detail;
};

bool g_all_passed = true;

std::string summarize(const std::vector<CheckResult>& checks) {
  int passed = 0;
  std::ostringstream failed;
  for (const auto& c : checks) {
    if (c.passed) {
      ++passed;
    } else {
      failed << " [" << c.name << " measured=" << c.measured << " bound=" << c.bound << "]";
    }
  }
  std::ostringstream out;
  out << passed << "/" << checks.size() << " checks";
  out << failed.str();
  return out.str();
}

void print_line(int id, const std::string& title, const CriterionResult& r) {
  if (!r.passed) g_all_passed = false;
  std::printf("[%s] criterion %d: %s (%s; %.1f s)\n", r.passed ? "PASS" : "FAIL", id,
              title.c_str(), r.detail.c_str(), r.ms / 1000.0);
  std::fflush(stdout);
}

template <typename Fn>
CriterionResult run_suite_criterion(Fn&& fn, double time_limit_s = 0.0) {
  CriterionResult r;
  const auto t0 = Clock::now();
  try {
    const std::vector<CheckResult> checks = fn();
    r.ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
    bool ok = !checks.empty();
    for (const auto& c : checks) ok = ok && c.passed;
    if (time_limit_s > 0.0 && r.ms > time_limit_s * 1000.0) {
      ok = false;
      r.detail = summarize(checks) + " [over time limit " + std::to_string(time_limit_s) + " s]";
    } else {
      r.detail = summarize(checks);
    }
    r.passed = ok;
  } catch (const std::exception& e) {
    r.ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
    r.passed = false;
    r.detail = std::string("exception: ") + e.what();
  }
  return r;
}

int run_cli(const std::string& cmd) {
  const int status = std::system((cmd + " > /dev/null 2>&1").c_str());
  if (status == -1) return -1;
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  return -1;
}

// report bytes with the timing line removed
std::string stable_report(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::string line, out;
  while (std::getline(in, line)) {
    if (line.find("\"wall_ms\"") != std::string::npos) continue;
    out += line;
    out += '\n';
  }
  return out;
}

CriterionResult run_cli_criterion(const std::string& cli) {
  CriterionResult r;
  const auto t0 = Clock::now();
  std::ostringstream detail;
  bool ok = true;
  auto expect = [&](bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      detail << " [" << what << "]";
    }
  };

  if (cli.empty()) {
    r.passed = false;
    r.detail = "no CLI path supplied";
    return r;
  }

  const auto dir = std::filesystem::temp_directory_path() /
                   ("attnlab-acceptance-" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  const std::string A = (dir / "a.json").string();
  const std::string B = (dir / "b.json").string();
  const std::string C = (dir / "c.json").string();
  const std::string DS = (dir / "ds.json").string();

  const std::string base = cli + " boltz-verify --pairs 50 --points 500";
  expect(run_cli(base + " --seed 7 --report-out " + A) == 0, "clean run exits 0");
  expect(run_cli(base + " --seed 7 --report-out " + B) == 0, "repeat run exits 0");
  expect(run_cli(base + " --seed 8 --report-out " + C) == 0, "reseeded run exits 0");

  const std::string a = stable_report(A), b = stable_report(B), c2 = stable_report(C);
  expect(!a.empty() && a == b, "same seed reproduces report bytes");
  expect(a != c2, "different seed changes the report");

  expect(run_cli(cli + " gen-data --out " + DS + " --n-seqs 2 --seq-len 3 --dim 3 --seed 5") == 0,
         "gen-data exits 0");
  expect(run_cli(cli + " check-sep --in " + DS + " --eps 10") == 1,
         "failed checks exit 1");
  expect(run_cli(cli + " check-sep") == 2, "missing required option exits 2");
  expect(run_cli(cli + " no-such-command") == 2, "unknown subcommand exits 2");
  expect(run_cli(cli + " gen-data --out " + (dir / "x.json").string() +
                 " --n-seqs 1 --seq-len 2 --dim 2 --eps 3.9 --seed 1") == 3,
         "infeasible generation exits 3");

  r.ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
  r.passed = ok;
  r.detail = ok ? "10/10 checks" : ("failures:" + detail.str());
  return r;
}

}  // namespace

int main(int argc, char** argv) {
  const std::string cli = argc > 1 ? argv[1] : "";

  print_line(1, "separated-pair gap bound, 1000 randomized pairs, under 5 s",
             run_suite_criterion([] { return run_boltz_separation_suite(2024, 1000); }, 5.0));
  print_line(2, "derivative and curvature formulas, signs, identities, 10000 points",
             run_suite_criterion([] { return run_boltz_calculus_suite(2025, 10000); }));
  print_line(3, "closed-form-scale contextual maps, 20 seeds",
             run_suite_criterion([] { return run_cm_closed_form_suite(11, 20); }));
  print_line(4, "tuned-scale contextual maps on shared vocabularies, 50 seeds",
             run_suite_criterion([] { return run_cm_scaled_suite(12, 50); }));
  print_line(5, "hardmax collisions at head counts 1, 2, 4; softmax separates",
             run_suite_criterion([] { return run_hardmax_suite(13, 100); }));
  print_line(6, "exact memorization with parameter budget, under 60 s",
             run_suite_criterion([] { return run_memorization_suite(14); }, 60.0));
  print_line(7, "grid approximation: key exactness and resolution consistency",
             run_suite_criterion([] { return run_approximation_suite(15); }));
  print_line(8, "training gradients match central differences, 20 configurations",
             run_suite_criterion([] { return run_grad_check_suite(16, 20); }));
  print_line(9, "synthetic task trains to 0.98; extra depth reaches it faster",
             run_suite_criterion([] { return run_training_suite(17); }));
  print_line(10, "command-line determinism and exit codes", run_cli_criterion(cli));

  if (!g_all_passed) {
    std::printf("RESULT: FAIL\n");
    return 1;
  }
  std::printf("RESULT: PASS\n");
  return 0;
}
