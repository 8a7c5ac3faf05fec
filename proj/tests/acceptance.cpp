// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
// Optional arguments select criteria by number, e.g. `acceptance 1 9`.

#include <cstdio>
#include <cstdlib>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "wpp/checks.hpp"
#include "wpp/experiment.hpp"

using namespace wpp;

namespace {

checks::CheckResult both(checks::CheckResult a, const checks::CheckResult& b) {
  a.passed = a.passed && b.passed;
  a.detail += "; " + b.name + ": " + b.detail;
  a.seconds += b.seconds;
  return a;
}

}  // namespace

int main(int argc, char** argv) {
  using experiment::Preset;
  const std::vector<std::function<checks::CheckResult()>> criteria{
      [] { return checks::check_toy_convergence(experiment::preset_config(Preset::toy)); },
      [] { return checks::check_minimality(); },
      [] { return checks::check_halpern_convergence(); },
      [] { return checks::check_mean_distance(); },
      [] { return checks::check_lipschitz(); },
      [] { return checks::check_gradients(); },
      [] { return checks::check_ct_study(experiment::preset_config(Preset::ellipse_ct)); },
      [] { return checks::check_straggler(); },
      [] { return both(checks::check_solver_agreement(), checks::check_radon_adjoint()); },
  };

  std::set<std::size_t> selected;
  for (int i = 1; i < argc; ++i) {
    const int n = std::atoi(argv[i]);
    if (n < 1 || n > static_cast<int>(criteria.size())) {
      std::fprintf(stderr, "unknown criterion '%s'\n", argv[i]);
      return 2;
    }
    selected.insert(static_cast<std::size_t>(n));
  }

  bool all = true;
  for (std::size_t n = 1; n <= criteria.size(); ++n) {
    if (!selected.empty() && !selected.count(n)) continue;
    const checks::CheckResult r = criteria[n - 1]();
    all = all && r.passed;
    std::printf("%s  [%zu] %-24s %8.2fs  %s\n", r.passed ? "PASS" : "FAIL", n, r.name.c_str(), r.seconds,
                r.detail.c_str());
    std::fflush(stdout);
  }
  return all ? 0 : 1;
}
