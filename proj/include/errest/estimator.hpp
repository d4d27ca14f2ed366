#pragma once

#include "errest/abstract.hpp"
#include "errest/mesh.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <vector>

namespace errest {

/// Compensated (Kahan) accumulator; the error equality is the headline claim,
/// so summation error must stay out of the totals.
class KahanSum {
public:
  void add(double value) {
    const double y = value - comp_;
    const double t = sum_ + y;
    comp_ = (t - sum_) - y;
    sum_ = t;
  }
  double value() const { return sum_; }

private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// Per-element squared indicators eta_T^2 and, when an exact solution is
/// known, the squared local errors e_T^2. Totals are compensated sums.
struct IndicatorField {
  std::vector<double> eta_sq;
  std::vector<double> e_sq;  // empty when the exact solution is unknown
  double eta_total_sq = 0.0;
  double e_total_sq = 0.0;

  bool has_exact() const { return !e_sq.empty(); }
  int size() const { return static_cast<int>(eta_sq.size()); }

  void recompute_totals() {
    KahanSum eta, e;
    for (double v : eta_sq) eta.add(v);
    for (double v : e_sq) e.add(v);
    eta_total_sq = eta.value();
    e_total_sq = e.value();
  }
};

/// Result of one majorant + error evaluation on a mesh.
struct FemEvaluation {
  MajorantBreakdown majorant;
  CombinedNorms error;
  IndicatorField indicators;
  bool quadrature_warning = false;
};

/// Observed vs. theoretical efficiency constants for the active case.
struct EfficiencyReport {
  bool passed = true;
  double global_ratio = 0.0;     // e / eta
  double min_local_ratio = 0.0;  // min over elements of e_T / eta_T
  double max_local_ratio = 0.0;
  double c_lower = 1.0;  // theoretical global efficiency constant
  double c_upper = 1.0;  // theoretical global reliability constant
  double c_local = M_SQRT1_2;
  std::vector<int> violations;
  std::string message;
};

inline EfficiencyReport efficiency_report(const IndicatorField& ind, CaseMode mode,
                                          double tol = 1e-9) {
  detail::require(ind.has_exact(), "efficiency_report: exact errors required");
  EfficiencyReport rep;
  if (mode == CaseMode::II) {
    rep.c_lower = std::sqrt(kCase2Lower);
    rep.c_upper = std::sqrt(kCase2Upper);
  }
  const double eta = std::sqrt(std::max(ind.eta_total_sq, 0.0));
  const double e = std::sqrt(std::max(ind.e_total_sq, 0.0));
  rep.global_ratio = eta > 0.0 ? e / eta : 0.0;
  if (eta > 0.0 &&
      (e < rep.c_lower * eta * (1.0 - tol) || e > rep.c_upper * eta * (1.0 + tol))) {
    rep.passed = false;
    rep.message = "global efficiency violated: e/eta = " + std::to_string(rep.global_ratio);
  }

  rep.min_local_ratio = std::numeric_limits<double>::infinity();
  rep.max_local_ratio = 0.0;
  for (int t = 0; t < ind.size(); ++t) {
    const double eta_t = std::sqrt(std::max(ind.eta_sq[t], 0.0));
    const double e_t = std::sqrt(std::max(ind.e_sq[t], 0.0));
    if (eta_t > 0.0) {
      const double r = e_t / eta_t;
      rep.min_local_ratio = std::min(rep.min_local_ratio, r);
      rep.max_local_ratio = std::max(rep.max_local_ratio, r);
    }
    if (e_t < rep.c_local * eta_t - tol * std::max(eta_t, 1e-30))
      rep.violations.push_back(t);
  }
  if (!std::isfinite(rep.min_local_ratio)) rep.min_local_ratio = 0.0;
  if (!rep.violations.empty()) {
    rep.passed = false;
    rep.message += " local efficiency violated on " +
                   std::to_string(rep.violations.size()) + " elements";
  }
  return rep;
}

/// Greedy Doerfler marking: descending eta_T^2 with ties broken by lower
/// element id; returns the smallest such prefix with marked mass >= theta
/// times the total.
inline std::vector<int> dorfler_mark(const IndicatorField& ind, double theta) {
  detail::require(theta > 0.0 && theta <= 1.0, "dorfler_mark: theta must be in (0,1]");
  std::vector<int> order(ind.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (ind.eta_sq[a] != ind.eta_sq[b]) return ind.eta_sq[a] > ind.eta_sq[b];
    return a < b;
  });
  // Total accumulated in the same order as the prefix sums, so theta = 1
  // selects exactly the elements with positive indicator.
  KahanSum total;
  for (int id : order) total.add(ind.eta_sq[id]);
  if (!(total.value() > 0.0)) return {};
  const double goal = theta * total.value();
  std::vector<int> marked;
  KahanSum acc;
  for (int id : order) {
    if (acc.value() >= goal) break;
    if (ind.eta_sq[id] <= 0.0) break;
    marked.push_back(id);
    acc.add(ind.eta_sq[id]);
  }
  return marked;
}

struct AdaptiveRecord {
  int iter = 0;
  int n_dofs = 0;
  double eta_sq = 0.0;
  double e_sq = std::numeric_limits<double>::quiet_NaN();
  double efficiency_index = std::numeric_limits<double>::quiet_NaN();
  int marked_count = 0;
};

/// One solve+indicate pass of a concrete discretization on a mesh.
struct AdaptiveStep {
  IndicatorField indicators;
  int n_dofs = 0;
};

using AdaptiveDriver = std::function<AdaptiveStep(const Mesh2D&)>;

struct AdaptiveRun {
  std::vector<AdaptiveRecord> records;
  Mesh2D final_mesh;
  bool reached_target = false;
  bool stagnation_flagged = false;  // eta non-decreasing over 3 iterations
};

/// solve -> indicate -> mark -> bisect until the target eta or max_iter.
inline AdaptiveRun adaptive_loop(const AdaptiveDriver& driver, Mesh2D mesh, double theta,
                                 int max_iter, double target_eta = 0.0) {
  detail::require(max_iter >= 1, "adaptive_loop: max_iter must be >= 1");
  AdaptiveRun run;
  int grow_streak = 0;
  double prev_eta = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < max_iter; ++iter) {
    AdaptiveStep step = driver(mesh);
    AdaptiveRecord rec;
    rec.iter = iter;
    rec.n_dofs = step.n_dofs;
    rec.eta_sq = step.indicators.eta_total_sq;
    if (step.indicators.has_exact()) {
      rec.e_sq = step.indicators.e_total_sq;
      if (rec.e_sq > 0.0) rec.efficiency_index = rec.eta_sq / rec.e_sq;
    }
    const double eta = std::sqrt(std::max(rec.eta_sq, 0.0));
    if (eta >= prev_eta) {
      if (++grow_streak >= 3) run.stagnation_flagged = true;
    } else {
      grow_streak = 0;
    }
    prev_eta = eta;

    if (target_eta > 0.0 && eta <= target_eta) {
      run.records.push_back(rec);
      run.reached_target = true;
      break;
    }
    std::vector<int> marked = dorfler_mark(step.indicators, theta);
    rec.marked_count = static_cast<int>(marked.size());
    run.records.push_back(rec);
    if (marked.empty() || iter + 1 == max_iter) break;
    mesh = bisect(mesh, marked);
  }
  run.final_mesh = std::move(mesh);
  return run;
}

}  // namespace errest
