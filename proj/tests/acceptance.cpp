// Runs every recipe at its acceptance settings and prints one PASS/FAIL line
// per criterion. Wall-clock limits are checked here and never written to the
// recipe outputs. The verdict lines also go to <out_dir>/acceptance_report.txt.
//   acceptance [out_dir]

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <iostream>
#include <map>
#include <string>

#include "rwre/exec.hpp"
#include "rwre/harness.hpp"
#include "rwre/io.hpp"

namespace {

struct Criterion {
  const char* title;
  const char* recipe;
  double limit_s;  // 0: no runtime limit of its own
};

const std::map<int, Criterion> kCriteria = {
    {1, {"2D potential-kernel table", "kernel-table", 30}},
    {2, {"cross-method kernel consistency", "kernel-table", 300}},
    {3, {"two-site density at z1 and residual scaling", "corollary2-verify", 900}},
    {4, {"one-site density near 1", "corollary2-verify", 900}},
    {5, {"velocity expansion", "velocity-verify", 600}},
    {6, {"Green-function lemma suite", "green-lemma-verify", 300}},
    {7, {"exact-solver normalization", "green-lemma-verify", 0}},
    {8, {"geometric Cesaro identity", "mu-delta-vs-cesaro", 600}},
    {9, {"mu_delta against Cesaro", "mu-delta-vs-cesaro", 900}},
    {10, {"Kalikow J_e^delta trend", "kalikow-jdelta", 1800}},
    {11, {"ballisticity checker", "ballisticity-check", 300}},
};

}  // namespace

int main(int argc, char** argv) {
  using namespace rwre;
  const std::string root = argc > 1 ? argv[1] : "acceptance_out";
  set_worker_count(1);

  std::map<int, CriterionResult> merged;
  std::map<std::string, double> seconds;
  for (const auto& recipe : recipe_names()) {
    auto m = default_manifest(recipe);
    m.out_dir = root + "/" + recipe;
    const auto t0 = std::chrono::steady_clock::now();
    RecipeResult r;
    try {
      r = run_recipe(m);
    } catch (const std::exception& e) {
      std::cerr << recipe << ": " << e.what() << "\n";
      r.recipe = recipe;
    }
    seconds[recipe] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::fprintf(stderr, "%-20s %8.1f s\n", recipe.c_str(), seconds[recipe]);
    for (const auto& c : r.criteria) {
      auto it = merged.find(c.id);
      if (it == merged.end()) {
        merged[c.id] = c;
      } else {
        it->second.pass = it->second.pass && c.pass;
        if (!c.note.empty()) it->second.note += (it->second.note.empty() ? "" : "; ") + c.note;
      }
    }
  }

  int failed = 0;
  std::ostringstream report;
  for (const auto& [id, spec] : kCriteria) {
    auto it = merged.find(id);
    bool pass = it != merged.end() && it->second.pass;
    std::string note = it == merged.end() ? "not evaluated" : it->second.note;
    const double t = seconds[spec.recipe];
    if (spec.limit_s > 0 && t > spec.limit_s) {
      pass = false;
      note += (note.empty() ? "" : "; ") + std::string("runtime over limit");
    }
    char head[160];
    std::snprintf(head, sizeof head, "criterion %2d %s  %-45s %7.1f s", id, pass ? "PASS" : "FAIL", spec.title, t);
    report << head;
    if (!note.empty()) report << "  [" << note << "]";
    report << "\n";
    if (!pass) ++failed;
  }
  report << (failed == 0 ? "all criteria pass" : std::to_string(failed) + " criteria fail") << "\n";
  std::cout << report.str();
  std::filesystem::create_directories(root);
  std::ofstream(root + "/acceptance_report.txt") << report.str();
  return failed == 0 ? 0 : 1;
}
