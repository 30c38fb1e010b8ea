// Runs the nine acceptance criteria and prints one PASS/FAIL line each.
// Exit status is nonzero when any criterion fails.
#include "gtrace/validation.hpp"

#include <cstdio>
#include <cstring>

int main(int argc, char** argv) {
  using namespace gtrace;
  ValidationContext ctx;
  std::vector<std::string> only;
  for (int i = 1; i < argc; ++i) only.emplace_back(argv[i]);

  int index = 0, failed = 0;
  for (const auto& check : validation_suite()) {
    ++index;
    if (!only.empty() && std::find(only.begin(), only.end(), check.name) == only.end()) continue;
    const auto r = run_check(check, ctx);
    failed += r.passed ? 0 : 1;
    std::printf("[%s] %d %-17s %7.1fs  %s\n", r.passed ? "PASS" : "FAIL", index, r.name.c_str(), r.seconds,
                r.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}
