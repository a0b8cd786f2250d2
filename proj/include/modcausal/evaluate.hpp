#ifndef MODCAUSAL_EVALUATE_HPP
#define MODCAUSAL_EVALUATE_HPP

// Runs both estimators on a synthetic corpus and compares them with the
// effect the generator actually injected into the selected comments.

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "modcausal/corpus.hpp"
#include "modcausal/delayed_feedback.hpp"
#include "modcausal/features.hpp"
#include "modcausal/its.hpp"
#include "modcausal/parallel.hpp"
#include "modcausal/synth.hpp"

namespace modcausal::synth {

struct EvalOptions {
  int k = 10;
  FeatureKind feature = FeatureKind::noncompliance;
  df::Options df;
  FeatureConfig features = FeatureConfig::defaults();
  double alpha = 0.05;
};

/// Estimate next to the injected effect it targets. For noncompliance the
/// truth is the mean change in the removal-state component of the generator's
/// probability (drift excluded) across the very comments the estimator used;
/// other features carry no injected effect, so their truth is 0.
struct EstimatorCheck {
  double estimate = 0;
  double truth = 0;
  double bias = 0;
  std::optional<double> p;
  std::size_t n = 0;
};

struct Evaluation {
  std::optional<EstimatorCheck> its;                 // level change b2
  std::array<std::optional<EstimatorCheck>, 2> df;   // DiD, [non_affected, affected]
  std::optional<double> df_null_rejection_rate;
};

namespace detail {

struct StateLookup {
  const Corpus& corpus;
  std::vector<double> p_state; // per corpus index; roots 0

  StateLookup(const Corpus& c, const GroundTruth& truth) : corpus(c), p_state(c.comments().size(), 0.0) {
    for (const auto& t : truth.comments) {
      auto idx = c.find(t.id);
      if (!idx) throw LookupError("ground truth comment '" + t.id + "' is missing from the corpus");
      p_state[*idx] = t.p_state;
    }
  }
  double operator()(std::size_t idx) const { return p_state[idx]; }
};

} // namespace detail

inline Evaluation evaluate_estimators(const Corpus& corpus, const GroundTruth& truth,
                                      const EvalOptions& opts = {}) {
  Evaluation ev;
  const bool injected = opts.feature == FeatureKind::noncompliance;
  const detail::StateLookup state(corpus, truth);

  const auto instances = its::select_instances(corpus, {opts.k, opts.df.max_ordinal});
  if (!instances.empty()) {
    try {
      const auto rep = its::fit(corpus, instances, opts.feature, opts.features);
      EstimatorCheck c;
      c.estimate = rep.fit.beta[2];
      c.p = rep.fit.p[2];
      c.n = rep.n_instances;
      if (injected) {
        double s = 0;
        for (const auto& inst : instances) s += state(inst.post.front()) - state(inst.pre.back());
        c.truth = s / static_cast<double>(instances.size());
      }
      c.bias = c.estimate - c.truth;
      ev.its = c;
    } catch (const SampleSizeError&) {
    } catch (const SingularityError&) {
    }
  }

  if (!its_only(opts.feature)) {
    for (auto scenario : {df::Scenario::non_affected, df::Scenario::affected}) {
      const auto matched = df::run_matching(corpus, scenario, opts.df);
      try {
        const auto res = df::test(corpus, matched, scenario, opts.feature, opts.features);
        EstimatorCheck c;
        c.estimate = res.did.estimate;
        c.p = res.did.p;
        c.n = res.n_pairs;
        if (injected) {
          double s = 0;
          for (const auto& pr : matched.pairs)
            s += (state(pr.treatment.c_plus1) - state(pr.treatment.c_minus1)) -
                 (state(pr.control.c_plus1) - state(pr.control.c_minus1));
          c.truth = s / static_cast<double>(matched.pairs.size());
        }
        c.bias = c.estimate - c.truth;
        ev.df[scenario == df::Scenario::affected ? 1 : 0] = c;
      } catch (const SampleSizeError&) {
      }
    }
  }
  return ev;
}

/// Outcome of the delayed-feedback test on one null-model corpus.
struct NullRun {
  std::uint64_t seed = 0;
  std::size_t n_pairs = 0;
  double did = 0;
  std::optional<double> did_p;
  std::optional<double> balance_p;
};

struct NullCalibration {
  std::vector<NullRun> runs;     // seeds with at least 2 usable pairs
  std::size_t skipped = 0;       // seeds with too few pairs
  double rejection_rate = 0;     // share of runs with did_p < alpha
  double balance_ok_rate = 0;    // share of runs with balance_p >= alpha (or zero variance)
  double mean_did = 0;
  double se_mean_did = 0;
};

/// Regenerates `base` under the null for seeds first_seed .. first_seed +
/// n_seeds - 1 and records how often the DiD test rejects at `alpha`. The null
/// switches off every consequence of removal: delta, drift, the ban and churn.
inline NullCalibration null_calibration(SynthConfig base, std::size_t n_seeds, std::uint64_t first_seed,
                                        df::Scenario scenario = df::Scenario::non_affected,
                                        double alpha = 0.05, const df::Options& opts = {},
                                        unsigned threads = 1) {
  base.delta = 0;
  base.drift = Drift{};
  base.ban_after = 0;
  base.churn_prob = 0;
  std::vector<std::optional<NullRun>> slots(n_seeds);
  parallel_for(n_seeds, threads, [&](std::size_t i) {
    SynthConfig cfg = base;
    cfg.seed = first_seed + i;
    const auto corpus = generate(cfg).corpus();
    const auto matched = df::run_matching(corpus, scenario, opts);
    try {
      const auto r = df::test(corpus, matched, scenario, FeatureKind::noncompliance, FeatureConfig::defaults());
      slots[i] = NullRun{cfg.seed, r.n_pairs, r.did.estimate, r.did.p, r.balance.p};
    } catch (const SampleSizeError&) {
    }
  });
  NullCalibration out;
  std::size_t rejected = 0, balanced = 0;
  for (auto& s : slots) {
    if (!s) {
      ++out.skipped;
      continue;
    }
    rejected += (s->did_p && *s->did_p < alpha) ? 1 : 0;
    balanced += (!s->balance_p || *s->balance_p >= alpha) ? 1 : 0;
    out.runs.push_back(*s);
  }
  const double n = static_cast<double>(out.runs.size());
  if (n > 0) {
    out.rejection_rate = static_cast<double>(rejected) / n;
    out.balance_ok_rate = static_cast<double>(balanced) / n;
    for (const auto& r : out.runs) out.mean_did += r.did;
    out.mean_did /= n;
    if (n > 1) {
      double ss = 0;
      for (const auto& r : out.runs) ss += (r.did - out.mean_did) * (r.did - out.mean_did);
      out.se_mean_did = std::sqrt(ss / (n - 1) / n);
    }
  }
  return out;
}

} // namespace modcausal::synth

#endif // MODCAUSAL_EVALUATE_HPP
