// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "hlab/cli/experiments.hpp"
#include "hlab/counterexamples/killed_ou.hpp"
#include "hlab/ou/spectral_ou.hpp"

using namespace hlab;

namespace {

struct Verdict {
  bool ok = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

/// Runs a named experiment with optional overrides; passes when every check passes.
Verdict experiment(const std::string& name, cli::json params = cli::json::object()) {
  cli::RunConfig rc;
  rc.experiment = name;
  rc.parameters = std::move(params);
  const auto r = cli::execute(*cli::find_experiment(name), rc);
  Verdict v;
  v.ok = r.status == cli::kExitOk;
  if (!r.artifacts) {
    v.detail = "rejected: " + r.message;
    return v;
  }
  const auto doc = cli::json::parse(r.artifacts->json_text);
  for (const auto& c : doc["checks"]) {
    if (!v.detail.empty()) v.detail += "; ";
    v.detail += c["name"].get<std::string>() + "=" + (c["value"].is_number() ? fmt(c["value"].get<double>()) : "null");
    if (!c["passed"].get<bool>()) v.detail += " (FAILED)";
  }
  if (!r.message.empty()) v.detail += "; " + r.message;
  return v;
}

Verdict brownian() { return experiment("bm-ratio", {{"n-min", 3}, {"n-max", 64}}); }

Verdict lambda_bound() {
  std::size_t probes = 0, bad = 0;
  double worst = -INFINITY;
  for (int i = 0; i <= 120; ++i)
    for (int j = 0; j <= 80; ++j) {
      const double a = std::pow(10.0, -3.0 + 0.05 * i), t = std::pow(10.0, -3.0 + 0.05 * j);
      const double q = ou::lambda_factor(a, t) * std::sqrt(t);
      worst = std::max(worst, q);
      bad += q <= 1.0 ? 0 : 1;
      ++probes;
    }
  return {bad == 0, std::to_string(probes) + " grid points, max Λ_t·√t = " + fmt(worst)};
}

Verdict trace_bound() {
  std::size_t bad = 0, probes = 0;
  double worst = -INFINITY;
  for (double p : {2.0, 4.0, 6.0}) {
    const auto m = ou::SpectralModel::power_law(p, 1000);
    const double bound = m.half_trace_inverse();
    for (int j = 0; j <= 120; ++j) {
      const double t = std::pow(10.0, -3.0 + 0.05 * j);
      const double tr = ou::trace_qt(m, t);
      worst = std::max(worst, tr / bound);
      bad += tr <= bound ? 0 : 1;
      ++probes;
    }
  }
  return {bad == 0, std::to_string(probes) + " (p, t) points, max Tr Q_t / (½ Tr A⁻¹) = " + fmt(worst)};
}

Verdict gradient_bound() {
  std::mt19937_64 gen(2024);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  double worst = INFINITY;
  for (int draw = 0; draw < 100; ++draw) {
    const std::size_t n = 1 + static_cast<std::size_t>(draw % 3);
    const auto m = ou::SpectralModel::power_law(1.5 + U(gen), n);
    std::vector<double> c(4 * n);
    for (auto& ci : c) ci = 2.0 * U(gen);
    // clipped cubic, bounded by 1
    ou::ScalarFunction f = [c, n](std::span<const double> z) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        s += c[4 * i] + c[4 * i + 1] * z[i] + c[4 * i + 2] * z[i] * z[i] + c[4 * i + 3] * z[i] * z[i] * z[i];
      return std::clamp(s, -1.0, 1.0);
    };
    std::vector<double> x(n), u(n);
    for (auto& v : x) v = U(gen);
    for (auto& v : u) v = U(gen);
    const double un = ou::norm(u);
    for (auto& v : u) v /= un;
    const double t = std::pow(10.0, U(gen));
    worst = std::min(worst, ou::gradient_bound_check(m, f, t, x, u, n <= 2 ? 40 : 16).slack);
  }
  return {worst >= -1e-6, "100 draws, min slack = " + fmt(worst)};
}

Verdict killed_spectrum() {
  const double target = 0.5 * std::pow(std::numbers::pi / 12.0, 2);
  const double b1 = cx::killed_ou_eigensystem(1e-6, 3, 2400).beta(0);
  const double coarse = cx::killed_ou_eigensystem(1.0, 3, 2000).beta(0);
  const double fine = cx::killed_ou_eigensystem(1.0, 3, 4000).beta(0);
  const double mesh = std::fabs(coarse / fine - 1.0);
  const double ratio = cx::killed_to_free_ratio(1.0, 0.01, 0.0, 2400, 400);
  const double rel = std::fabs(b1 / target - 1.0);
  const bool ok = rel <= 0.01 && std::fabs(target - 0.03427) < 5e-6 && mesh <= 1e-4 && ratio >= 0.99 && ratio <= 1.0;
  return {ok, "β₁(1e-6) = " + fmt(b1) + " (target " + fmt(target) + ", rel " + fmt(rel) + "); mesh rel " + fmt(mesh) +
                  "; q/q_free(0.01) = " + fmt(ratio)};
}

Verdict ou_harnack() { return experiment("ou-green-ratio", {{"p", 2.0}, {"n-max", 4}, {"envelope-n", 4}}); }

Verdict coupling_positivity() {
  return experiment("coupling", {{"trunc", 5},
                                 {"p", 6.0},
                                 {"x0", cli::json::array({0.5})},
                                 {"y0", cli::json::array({-0.5})},
                                 {"dt", 1e-4},
                                 {"trials", 10000},
                                 {"dt-halving", true}});
}

Verdict gamma_identities() { return experiment("gamma-verify", {{"draws", 500}, {"m", 3}, {"d", 3}, {"commutator-draws", 100}}); }

Verdict li_yau() { return experiment("li-yau"); }

Verdict distance() { return experiment("distance", {{"ode-tolerance", 1e-8}}); }

Verdict harnack() { return experiment("harnack", {{"probes", 50}}); }

/// Every experiment twice with one seed; the second run uses another thread count.
/// The long Monte Carlo experiments run on reduced sizes.
Verdict reproducibility() {
  const std::vector<std::pair<std::string, cli::json>> runs{
      {"bm-ratio", cli::json::object()},
      {"ou-green-ratio", {{"n-max", 2}}},
      {"coupling", {{"trials", 500}, {"dt", 1e-3}, {"marginal-trials", 200}}},
      {"exit-bounds", {{"trials", 500}, {"simulated-coordinates", 3}}},
      {"gamma-verify", cli::json::object()},
      {"li-yau", cli::json::object()},
      {"harnack", cli::json::object()},
      {"distance", cli::json::object()},
  };
  std::string detail;
  bool ok = true;
  for (const auto& [name, params] : runs) {
    cli::RunConfig rc;
    rc.experiment = name;
    rc.seed = 7;
    rc.parameters = params;
    rc.threads = 1;
    const auto a = cli::execute(*cli::find_experiment(name), rc);
    rc.threads = 2;
    const auto b = cli::execute(*cli::find_experiment(name), rc);
    const bool same = a.artifacts && b.artifacts && a.artifacts->json_text == b.artifacts->json_text &&
                      a.artifacts->csv_text == b.artifacts->csv_text;
    ok = ok && same;
    detail += (detail.empty() ? "" : ", ") + name + (same ? " identical" : " DIFFERS");
  }
  return {ok, detail};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* title;
    double budget_seconds;
    std::function<Verdict()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "Brownian ratio closed form and 4/3 step, n = 3..64", 1, brownian},
      {2, "Lambda_t factor <= 1/sqrt(t) on log grids", 1, lambda_bound},
      {3, "trace Q_t <= half trace A^-1, p in {2,4,6}, N = 1000", 1, trace_bound},
      {4, "gradient bound on 100 bounded test functions", 30, gradient_bound},
      {5, "killed OU spectrum, mesh refinement, short-time ratio", 30, killed_spectrum},
      {6, "OU Harnack ratio increasing, envelope ratio > 1e3 at n = 4", 600, ou_harnack},
      {7, "coupling positivity, dt halving, marginal laws", 600, coupling_positivity},
      {8, "Gamma calculus identities on random draws", 120, gamma_identities},
      {9, "Li-Yau margins on the grid scheme", 300, li_yau},
      {10, "arc distance and witness bounds", 10, distance},
      {11, "parabolic Harnack sweeps", 600, harnack},
      {12, "byte-identical artifacts across repeated runs", 600, reproducibility},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = Clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(Clock::now() - start).count();
    const bool in_time = secs < c.budget_seconds;
    const bool ok = v.ok && in_time;
    failed += ok ? 0 : 1;
    std::printf("%s criterion %d: %s [%.2f s of %.0f s%s] %s\n", ok ? "PASS" : "FAIL", c.id, c.title, secs,
                c.budget_seconds, in_time ? "" : ", over budget", v.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
