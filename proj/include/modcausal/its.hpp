#ifndef MODCAUSAL_ITS_HPP
#define MODCAUSAL_ITS_HPP

// Interrupted time-series analysis around first and second removals:
//
//   y(i) = b0 + b1*i + b2*x(i) + b3*i*x(i),  i in {-k..-1, 1..k}, x(i) = [i > 0]
//
// fitted as one pooled regression over every selected instance.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "modcausal/corpus.hpp"
#include "modcausal/features.hpp"
#include "modcausal/stats.hpp"

namespace modcausal::its {

/// A removal with k comments on either side, all outside the affected tree.
struct Instance {
  std::string user;
  std::size_t removed = 0;        // corpus index of the problematic comment
  int ordinal = 0;                // 1 or 2
  std::vector<std::size_t> pre;   // chronological, indices -k..-1
  std::vector<std::size_t> post;  // chronological, indices 1..k

  friend bool operator==(const Instance&, const Instance&) = default;
};

struct SelectionOptions {
  int k = 10;
  int max_ordinal = 2;
};

/// Maps position p in [0, 2k) to the comment index -k..-1, 1..k.
inline int comment_index(std::size_t position, int k) {
  const int p = static_cast<int>(position);
  return p < k ? p - k : p - k + 1;
}

namespace detail {

inline std::int64_t created(const Corpus& c, std::size_t i) { return c.at(i).created_utc; }

// First timeline slot whose created_utc is > t (or >= t when !strict).
inline std::size_t first_after(const Corpus& c, std::span<const std::size_t> tl, std::int64_t t,
                               bool strict) {
  auto it = strict ? std::upper_bound(tl.begin(), tl.end(), t,
                                      [&](std::int64_t v, std::size_t i) { return v < created(c, i); })
                   : std::lower_bound(tl.begin(), tl.end(), t,
                                      [&](std::size_t i, std::int64_t v) { return created(c, i) < v; });
  return static_cast<std::size_t>(it - tl.begin());
}

} // namespace detail

/// The removal at `index` qualifies as an ITS anchor, independent of windows:
/// ordinal within bounds, author neither the affected tree's OP nor a moderator.
inline bool eligible_anchor(const Corpus& corpus, std::size_t index, int max_ordinal) {
  const Comment& c = corpus.at(index);
  const int ord = corpus.removal_ordinal(index);
  if (ord < 1 || ord > max_ordinal) return false;
  if (is_deleted_author(c.author)) return false;
  if (corpus.tree_of(index).op_author == c.author) return false;
  return !corpus.is_moderator(c.author);
}

/// Every removal satisfying the instance rules, ordered by removal time.
inline std::vector<Instance> select_instances(const Corpus& corpus, const SelectionOptions& opts = {}) {
  if (opts.k < 1) throw ConfigError("k must be at least 1");
  const auto k = static_cast<std::size_t>(opts.k);
  std::vector<Instance> out;
  for (auto idx : corpus.removal_comments()) {
    if (!eligible_anchor(corpus, idx, opts.max_ordinal)) continue;
    const Comment& c = corpus.at(idx);
    const auto tree = corpus.tree_index_of(idx);
    const auto removed_utc = c.removal->removed_utc;
    auto tl = corpus.timeline(c.author);

    // Any activity in (created, removed] makes the interruption point ambiguous.
    const auto after_post = detail::first_after(corpus, tl, c.created_utc, true);
    if (after_post < tl.size() && detail::created(corpus, tl[after_post]) <= removed_utc) continue;

    Instance inst{c.author, idx, corpus.removal_ordinal(idx), {}, {}};
    for (auto pos = detail::first_after(corpus, tl, c.created_utc, false); pos-- > 0 && inst.pre.size() < k;)
      if (corpus.tree_index_of(tl[pos]) != tree) inst.pre.push_back(tl[pos]);
    if (inst.pre.size() < k) continue;
    std::reverse(inst.pre.begin(), inst.pre.end());
    for (auto pos = detail::first_after(corpus, tl, removed_utc, true); pos < tl.size() && inst.post.size() < k; ++pos)
      if (corpus.tree_index_of(tl[pos]) != tree) inst.post.push_back(tl[pos]);
    if (inst.post.size() < k) continue;
    out.push_back(std::move(inst));
  }
  return out;
}

/// One instance's feature values, keyed by comment index.
using PanelRow = std::vector<std::pair<int, FeatureValue>>;

struct Report {
  FeatureKind feature = FeatureKind::noncompliance;
  std::size_t n_instances = 0;
  std::size_t n_observations = 0;
  stats::OLSFit fit;
  std::vector<IndexStat> series;
};

struct FitOptions {
  /// Cluster-robust standard errors with one cluster per instance.
  bool cluster_robust = false;
};

inline stats::DesignRow design_row(int i) {
  const double x = i > 0 ? 1.0 : 0.0;
  return {1.0, static_cast<double>(i), x, static_cast<double>(i) * x};
}

/// Pooled fit over prebuilt per-instance values. Undefined values drop out
/// row-wise.
inline Report fit_panel(FeatureKind feature, std::span<const PanelRow> panel, const FitOptions& opts = {}) {
  if (panel.empty()) throw SampleSizeError("ITS fit needs at least one instance");
  std::vector<stats::DesignRow> design;
  std::vector<double> y;
  std::vector<std::size_t> cluster;
  std::vector<std::pair<int, FeatureValue>> all;
  for (std::size_t inst = 0; inst < panel.size(); ++inst) {
    for (const auto& [i, v] : panel[inst]) {
      all.emplace_back(i, v);
      if (!v.defined) continue;
      design.push_back(design_row(i));
      y.push_back(v.value);
      cluster.push_back(inst);
    }
  }
  Report rep;
  rep.feature = feature;
  rep.n_instances = panel.size();
  rep.n_observations = y.size();
  rep.series = index_series(all);
  stats::OLSOptions o;
  if (opts.cluster_robust) o.clusters = std::span<const std::size_t>(cluster);
  rep.fit = stats::ols(design, y, o);
  return rep;
}

inline std::vector<PanelRow> build_panel(const Corpus& corpus, std::span<const Instance> instances,
                                         FeatureKind feature, const FeatureConfig& cfg) {
  check_feature_config(feature, cfg);
  std::vector<PanelRow> panel;
  panel.reserve(instances.size());
  for (const auto& inst : instances) {
    const int k = static_cast<int>(inst.pre.size());
    PanelRow row;
    row.reserve(inst.pre.size() + inst.post.size());
    for (std::size_t p = 0; p < inst.pre.size(); ++p)
      row.emplace_back(comment_index(p, k), extract(corpus, inst.pre[p], feature, cfg));
    for (std::size_t p = 0; p < inst.post.size(); ++p)
      row.emplace_back(static_cast<int>(p) + 1, extract(corpus, inst.post[p], feature, cfg));
    panel.push_back(std::move(row));
  }
  return panel;
}

inline Report fit(const Corpus& corpus, std::span<const Instance> instances, FeatureKind feature,
                  const FeatureConfig& cfg, const FitOptions& opts = {}) {
  const auto panel = build_panel(corpus, instances, feature, cfg);
  return fit_panel(feature, panel, opts);
}

/// OLS on the per-index means; equals the pooled coefficients on balanced panels.
inline stats::OLSFit fit_means(std::span<const IndexStat> series) {
  std::vector<stats::DesignRow> design;
  std::vector<double> y;
  for (const auto& s : series) {
    design.push_back(design_row(s.index));
    y.push_back(s.mean);
  }
  return stats::ols(design, y);
}

} // namespace modcausal::its

#endif // MODCAUSAL_ITS_HPP
