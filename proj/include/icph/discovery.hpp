#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "icph/equality.hpp"
#include "icph/errors.hpp"
#include "icph/lasso.hpp"
#include "icph/parallel.hpp"
#include "icph/scm.hpp"
#include "icph/types.hpp"

namespace icph {

struct DiscoveryOptions {
  FitOptions fit;
  double alpha = 0.05;
  ParamMask test_parameters;
  std::vector<int> degrees;  // >1 entries: test under unknown state count
  int screening_k = 0;       // 0 disables screening; the usual choice is 5
  int max_subset_size = -1;  // -1: up to d, i.e. exhaustive
  long subset_cap = 1L << 12;
  int threads = 1;

  void validate() const {
    fit.validate();
    if (!(alpha > 0.0 && alpha < 1.0)) {
      throw InvalidOptions("DiscoveryOptions: alpha must lie in (0, 1)");
    }
    if (screening_k < 0) throw InvalidOptions("DiscoveryOptions: negative screening k");
    for (int k : degrees) {
      if (k < 1) throw InvalidOptions("DiscoveryOptions: degrees must be >= 1");
    }
  }
};

struct SubsetResult {
  std::vector<int> subset;  // 0-based predictor indices
  double p_value = 1.0;
  bool degenerate = false;
  bool floored = false;
  std::vector<std::pair<int, double>> degree_pvalues;  // multi-degree detail
};

struct DiscoveryResult {
  std::vector<SubsetResult> set_pvalues;  // in subset enumeration order
  std::vector<int> s_hat;
  Eigen::VectorXd predictor_pvalues;  // length d
  std::vector<int> screened;          // predictors entering the scan
  bool any_accepted = false;
  double alpha = 0.05;
  bool screening_on = false;
  double guarantee_level = 0.95;  // 1 - alpha, or 1 - 2 alpha with screening
};

/// The subset scan: tests every subset of the (possibly screened) predictors
/// for h-invariance across environments, including the empty set as a pure
/// mixture over Y, and intersects the accepted sets. Per-predictor
/// non-causality p-values are max{p_S : j not in S} once anything is
/// accepted, and 1 across the board otherwise.
inline DiscoveryResult discover(const Dataset& data, const DiscoveryOptions& options) {
  options.validate();
  data.validate();
  if (data.num_environments() < 2) {
    throw InsufficientData("discover: need at least two environments");
  }
  const int d = data.num_predictors();

  DiscoveryResult result;
  result.alpha = options.alpha;
  result.screening_on = options.screening_k > 0 && options.screening_k < d;
  result.guarantee_level =
      1.0 - options.alpha - (result.screening_on ? options.alpha : 0.0);

  if (result.screening_on) {
    result.screened = lasso_screen(data.y, data.x, options.screening_k);
    std::sort(result.screened.begin(), result.screened.end());
  } else {
    result.screened.resize(d);
    std::iota(result.screened.begin(), result.screened.end(), 0);
  }

  const int s = static_cast<int>(result.screened.size());
  const int max_size = options.max_subset_size < 0
                           ? s
                           : std::min(options.max_subset_size, s);
  std::vector<unsigned long> masks;
  for (unsigned long mask = 0; mask < (1UL << s); ++mask) {
    if (__builtin_popcountl(mask) <= max_size) masks.push_back(mask);
    if (static_cast<long>(masks.size()) > options.subset_cap) {
      throw SubsetBlowup("discover: subset scan exceeds the configured cap of " +
                         std::to_string(options.subset_cap));
    }
  }

  result.set_pvalues.resize(masks.size());
  parallel_for(0, static_cast<int>(masks.size()), options.threads, [&](int i) {
    SubsetResult record;
    for (int b = 0; b < s; ++b) {
      if (masks[i] & (1UL << b)) record.subset.push_back(result.screened[b]);
    }
    if (options.degrees.size() > 1) {
      const MultiDegreeResult multi = test_equality_multi_degree(
          data, record.subset, options.fit, options.degrees, options.test_parameters);
      record.p_value = multi.p_value;
      for (const auto& [degree, res] : multi.per_degree) {
        record.degree_pvalues.emplace_back(degree, res.p_value);
        record.degenerate |= res.degenerate;
        record.floored |= res.floored;
      }
    } else {
      FitOptions fit = options.fit;
      if (options.degrees.size() == 1) fit.num_states = options.degrees.front();
      const EqualityTestResult res =
          test_equality_sr(data, record.subset, fit, options.test_parameters);
      record.p_value = res.p_value;
      record.degenerate = res.degenerate;
      record.floored = res.floored;
    }
    result.set_pvalues[i] = std::move(record);
  });

  // Intersection of the accepted sets; empty index set gives the empty set.
  std::vector<int> intersection;
  for (const SubsetResult& record : result.set_pvalues) {
    if (record.p_value <= options.alpha) continue;
    if (!result.any_accepted) {
      intersection = record.subset;
      result.any_accepted = true;
    } else {
      std::vector<int> kept;
      std::set_intersection(intersection.begin(), intersection.end(),
                            record.subset.begin(), record.subset.end(),
                            std::back_inserter(kept));
      intersection = std::move(kept);
    }
  }
  result.s_hat = intersection;

  result.predictor_pvalues = Eigen::VectorXd::Ones(d);
  if (result.any_accepted) {
    result.predictor_pvalues.setZero();
    for (const SubsetResult& record : result.set_pvalues) {
      for (int j = 0; j < d; ++j) {
        if (!std::binary_search(record.subset.begin(), record.subset.end(), j)) {
          result.predictor_pvalues(j) =
              std::max(result.predictor_pvalues(j), record.p_value);
        }
      }
    }
  }
  return result;
}

struct CoverageCheck {
  double rate = 0.0;  // empirical P(S_hat subset of S_star)
  double std_error = 0.0;
  int hits = 0;
  int reps = 0;
};

/// Monte-Carlo estimate of the setwise false-discovery guarantee
/// P(S_hat subset of S_star) on a declared-SCM specification.
inline CoverageCheck coverage_guarantee_check(int num_reps, const ScmSpec& spec,
                                              const DiscoveryOptions& options) {
  if (num_reps < 1) throw InvalidOptions("coverage_guarantee_check: need reps >= 1");
  CoverageCheck check;
  check.reps = num_reps;
  std::vector<int> hit(num_reps, 0);
  parallel_for(0, num_reps, options.threads, [&](int rep) {
    ScmSpec draw = spec;
    draw.seed = derive_seed(spec.seed, 0xc0ffee + rep);
    const Simulation sim = simulate(draw);
    DiscoveryOptions per = options;
    per.threads = 1;
    per.fit.seed = derive_seed(options.fit.seed, rep);
    const DiscoveryResult res = discover(sim.data, per);
    hit[rep] = std::includes(sim.truth.s_star.begin(), sim.truth.s_star.end(),
                             res.s_hat.begin(), res.s_hat.end())
                   ? 1
                   : 0;
  });
  for (int h : hit) check.hits += h;
  check.rate = static_cast<double>(check.hits) / num_reps;
  check.std_error = std::sqrt(check.rate * (1.0 - check.rate) / num_reps);
  return check;
}

}  // namespace icph
