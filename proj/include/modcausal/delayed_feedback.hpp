#ifndef MODCAUSAL_DELAYED_FEEDBACK_HPP
#define MODCAUSAL_DELAYED_FEEDBACK_HPP

// Delayed-feedback design. A treatment is a removal whose author commented
// inside the pre-removal window (c-1) and again within a week after the
// removal (c+1). Each treatment with delay tD is paired with an unused
// removal of the smallest delay tD' > tD whose author commented before and
// after the pseudo-removal time (control problematic time + tD) but before
// their own real removal. The control's change absorbs the drift a user
// undergoes tD seconds after posting a problematic comment.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "modcausal/corpus.hpp"
#include "modcausal/features.hpp"
#include "modcausal/its.hpp"
#include "modcausal/stats.hpp"

namespace modcausal::df {

inline constexpr std::int64_t kOneWeek = 604800;

enum class Scenario { non_affected, affected };

inline constexpr std::string_view to_string(Scenario s) {
  return s == Scenario::affected ? "affected" : "non_affected";
}

inline std::optional<Scenario> parse_scenario(std::string_view s) {
  if (s == "affected") return Scenario::affected;
  if (s == "non_affected") return Scenario::non_affected;
  return std::nullopt;
}

struct Options {
  int max_ordinal = 2;
  std::int64_t post_window = kOneWeek;
  /// Forbid a removal that anchors a matched treatment from serving as a
  /// control, and vice versa.
  bool disjoint_roles = false;
  /// Accept any control comment up to the pseudo-removal time instead of
  /// requiring it inside the control's own pre-removal window.
  bool loose_control_window = false;
};

struct Treatment {
  std::string user;
  std::size_t removed = 0; // corpus index of the problematic comment
  int ordinal = 0;
  std::int64_t delay = 0;  // removed_utc - created_utc
  std::size_t c_minus1 = 0;
  std::size_t c_plus1 = 0;
  Scenario scenario = Scenario::non_affected;

  friend bool operator==(const Treatment&, const Treatment&) = default;
};

struct Control {
  std::string user;
  std::size_t removed = 0;
  int ordinal = 0;
  std::int64_t delay = 0;
  std::int64_t pseudo_removal_utc = 0;
  std::size_t c_minus1 = 0;
  std::size_t c_plus1 = 0;

  friend bool operator==(const Control&, const Control&) = default;
};

struct MatchedPair {
  Treatment treatment;
  Control control;
  std::int64_t delay_gap = 0; // control.delay - treatment.delay > 0

  friend bool operator==(const MatchedPair&, const MatchedPair&) = default;
};

struct MatchResult {
  std::vector<MatchedPair> pairs;
  std::size_t discarded_unmatched = 0;
};

namespace detail {

inline bool in_scope(const Corpus& corpus, std::size_t comment, std::size_t anchor_tree, Scenario s) {
  const bool same = corpus.tree_index_of(comment) == anchor_tree;
  return s == Scenario::affected ? same : !same;
}

// Last in-scope timeline comment with created_utc in (lo, hi], or in
// [-inf, hi] when lo is empty; `skip` is never returned.
inline std::optional<std::size_t> last_in(const Corpus& corpus, std::span<const std::size_t> tl,
                                          std::optional<std::int64_t> lo, std::int64_t hi,
                                          std::size_t tree, Scenario s, std::size_t skip) {
  for (auto pos = its::detail::first_after(corpus, tl, hi, true); pos-- > 0;) {
    const auto idx = tl[pos];
    if (lo && corpus.at(idx).created_utc <= *lo) break;
    if (idx != skip && in_scope(corpus, idx, tree, s)) return idx;
  }
  return std::nullopt;
}

// First in-scope timeline comment with created_utc in (lo, hi] (or (lo, hi)
// when !closed).
inline std::optional<std::size_t> first_in(const Corpus& corpus, std::span<const std::size_t> tl,
                                           std::int64_t lo, std::int64_t hi, bool closed,
                                           std::size_t tree, Scenario s) {
  for (auto pos = its::detail::first_after(corpus, tl, lo, true); pos < tl.size(); ++pos) {
    const auto idx = tl[pos];
    const auto t = corpus.at(idx).created_utc;
    if (closed ? t > hi : t >= hi) break;
    if (in_scope(corpus, idx, tree, s)) return idx;
  }
  return std::nullopt;
}

inline bool eligible(const Corpus& corpus, std::size_t idx, int max_ordinal) {
  const int ord = corpus.removal_ordinal(idx);
  return ord >= 1 && ord <= max_ordinal && !is_deleted_author(corpus.at(idx).author);
}

} // namespace detail

/// Removals with a c-1 in (created, removed] and a c+1 in
/// (removed, removed + one week] inside the scenario's tree scope.
inline std::vector<Treatment> select_treatments(const Corpus& corpus, Scenario scenario,
                                                const Options& opts = {}) {
  std::vector<Treatment> out;
  for (auto idx : corpus.removal_comments()) {
    if (!detail::eligible(corpus, idx, opts.max_ordinal)) continue;
    const Comment& c = corpus.at(idx);
    const auto tree = corpus.tree_index_of(idx);
    const auto removed_utc = c.removal->removed_utc;
    auto tl = corpus.timeline(c.author);
    auto before = detail::last_in(corpus, tl, c.created_utc, removed_utc, tree, scenario, idx);
    if (!before) continue;
    auto after = detail::first_in(corpus, tl, removed_utc, removed_utc + opts.post_window, true, tree, scenario);
    if (!after) continue;
    out.push_back(Treatment{c.author, idx, corpus.removal_ordinal(idx), removed_utc - c.created_utc,
                            *before, *after, scenario});
  }
  return out;
}

/// Builds the control record for pool removal `idx` at treatment delay
/// `delay`, or nothing when its windows hold no qualifying comments.
inline std::optional<Control> try_control(const Corpus& corpus, std::size_t idx, std::int64_t delay,
                                          Scenario scenario, const Options& opts = {}) {
  const Comment& c = corpus.at(idx);
  const auto tree = corpus.tree_index_of(idx);
  const auto removed_utc = c.removal->removed_utc;
  const auto own_delay = removed_utc - c.created_utc;
  if (own_delay <= delay) return std::nullopt;
  const auto pseudo = c.created_utc + delay;
  auto tl = corpus.timeline(c.author);
  const auto lo = opts.loose_control_window ? std::nullopt : std::optional<std::int64_t>(c.created_utc);
  auto before = detail::last_in(corpus, tl, lo, pseudo, tree, scenario, idx);
  if (!before) return std::nullopt;
  auto after = detail::first_in(corpus, tl, pseudo, removed_utc, false, tree, scenario);
  if (!after) return std::nullopt;
  return Control{c.author, idx, corpus.removal_ordinal(idx), own_delay, pseudo, *before, *after};
}

namespace detail {

// Delays d for which a pool removal yields a control: its windows hold a
// c'-1 iff d >= lo and a c'+1 iff d < hi.
struct ControlRange {
  std::int64_t lo = 0;
  std::int64_t hi = 0;
};

inline std::optional<ControlRange> control_range(const Corpus& corpus, std::size_t idx, Scenario scenario,
                                                 const Options& opts) {
  const Comment& c = corpus.at(idx);
  const auto tree = corpus.tree_index_of(idx);
  const auto removed_utc = c.removal->removed_utc;
  auto tl = corpus.timeline(c.author);
  std::optional<std::int64_t> first;
  const auto from = opts.loose_control_window ? 0 : its::detail::first_after(corpus, tl, c.created_utc, true);
  for (auto pos = from; pos < tl.size(); ++pos) {
    const auto j = tl[pos];
    if (corpus.at(j).created_utc >= removed_utc) break;
    if (j != idx && in_scope(corpus, j, tree, scenario)) {
      first = corpus.at(j).created_utc;
      break;
    }
  }
  if (!first) return std::nullopt;
  auto last = last_in(corpus, tl, std::nullopt, removed_utc - 1, tree, scenario, idx);
  if (!last) return std::nullopt;
  return ControlRange{*first - c.created_utc, corpus.at(*last).created_utc - c.created_utc};
}

// Min-tree over pool positions keyed by ControlRange::lo; retired entries hold
// the maximum value.
class LowTree {
public:
  explicit LowTree(std::span<const std::int64_t> lo) : size_(1) {
    while (size_ < lo.size()) size_ <<= 1;
    t_.assign(2 * size_, kOff);
    for (std::size_t i = 0; i < lo.size(); ++i) t_[size_ + i] = lo[i];
    for (std::size_t i = size_; i-- > 1;) t_[i] = std::min(t_[2 * i], t_[2 * i + 1]);
  }
  void retire(std::size_t i) {
    i += size_;
    t_[i] = kOff;
    for (i >>= 1; i >= 1; i >>= 1) t_[i] = std::min(t_[2 * i], t_[2 * i + 1]);
  }
  /// First position >= from whose key is <= bound.
  std::optional<std::size_t> first_at_most(std::size_t from, std::int64_t bound) const {
    return find(1, 0, size_, from, bound);
  }

private:
  static constexpr std::int64_t kOff = std::numeric_limits<std::int64_t>::max();
  std::optional<std::size_t> find(std::size_t node, std::size_t l, std::size_t r, std::size_t from,
                                  std::int64_t bound) const {
    if (r <= from || t_[node] > bound) return std::nullopt;
    if (r - l == 1) return l;
    const std::size_t m = (l + r) / 2;
    if (auto left = find(2 * node, l, m, from, bound)) return left;
    return find(2 * node + 1, m, r, from, bound);
  }
  std::size_t size_;
  std::vector<std::int64_t> t_;
};

} // namespace detail

/// Greedy closest-larger-delay matching. Treatments are taken in ascending
/// delay (ties by comment id); each takes the first unused pool removal in
/// ascending delay order that yields a valid control.
inline MatchResult match_controls(const Corpus& corpus, std::span<const Treatment> treatments,
                                  Scenario scenario, const Options& opts = {}) {
  auto delay_of = [&](std::size_t idx) {
    const auto& c = corpus.at(idx);
    return c.removal->removed_utc - c.created_utc;
  };
  auto by_delay = [&](std::size_t a, std::size_t b) {
    return std::make_tuple(delay_of(a), std::string_view(corpus.at(a).id)) <
           std::make_tuple(delay_of(b), std::string_view(corpus.at(b).id));
  };

  // Pool entries that can never host a control are left out up front.
  std::vector<std::size_t> pool;
  std::vector<detail::ControlRange> range;
  {
    std::vector<std::size_t> all;
    for (auto idx : corpus.removal_comments())
      if (detail::eligible(corpus, idx, opts.max_ordinal)) all.push_back(idx);
    std::sort(all.begin(), all.end(), by_delay);
    for (auto idx : all)
      if (auto r = detail::control_range(corpus, idx, scenario, opts); r && r->lo < r->hi) {
        pool.push_back(idx);
        range.push_back(*r);
      }
  }
  std::vector<std::int64_t> pool_delay(pool.size()), lows(pool.size());
  std::vector<std::size_t> position(corpus.comments().size(), pool.size());
  for (std::size_t j = 0; j < pool.size(); ++j) {
    pool_delay[j] = delay_of(pool[j]);
    lows[j] = range[j].lo;
    position[pool[j]] = j;
  }
  detail::LowTree tree(lows);
  // Entries whose window closes at or below the current delay never reopen.
  std::vector<std::size_t> by_hi(pool.size());
  for (std::size_t j = 0; j < pool.size(); ++j) by_hi[j] = j;
  std::sort(by_hi.begin(), by_hi.end(), [&](std::size_t a, std::size_t b) { return range[a].hi < range[b].hi; });
  std::size_t closed = 0;

  std::vector<const Treatment*> order;
  for (const auto& t : treatments) order.push_back(&t);
  std::sort(order.begin(), order.end(), [&](const Treatment* a, const Treatment* b) {
    return by_delay(a->removed, b->removed);
  });

  std::vector<char> used_control(corpus.comments().size(), 0);
  MatchResult res;
  for (const Treatment* t : order) {
    if (opts.disjoint_roles && used_control[t->removed]) {
      ++res.discarded_unmatched;
      continue;
    }
    for (; closed < by_hi.size() && range[by_hi[closed]].hi <= t->delay; ++closed) tree.retire(by_hi[closed]);
    auto from = static_cast<std::size_t>(
        std::upper_bound(pool_delay.begin(), pool_delay.end(), t->delay) - pool_delay.begin());
    std::optional<Control> found;
    while (auto j = tree.first_at_most(from, t->delay)) {
      if (pool[*j] != t->removed) {
        found = try_control(corpus, pool[*j], t->delay, scenario, opts);
        if (found) break;
      }
      from = *j + 1;
    }
    if (!found) {
      ++res.discarded_unmatched;
      continue;
    }
    used_control[found->removed] = 1;
    tree.retire(position[found->removed]);
    if (opts.disjoint_roles && position[t->removed] < pool.size()) tree.retire(position[t->removed]);
    res.pairs.push_back(MatchedPair{*t, *found, found->delay - t->delay});
  }
  // Report in treatment removal order.
  std::sort(res.pairs.begin(), res.pairs.end(), [&](const MatchedPair& a, const MatchedPair& b) {
    const auto& ca = corpus.at(a.treatment.removed);
    const auto& cb = corpus.at(b.treatment.removed);
    return std::tie(ca.removal->removed_utc, ca.id) < std::tie(cb.removal->removed_utc, cb.id);
  });
  return res;
}

// ---------------------------------------------------------------------------
// Tests on matched pairs

/// A test estimate whose p-value is absent when the sample had zero variance.
struct Outcome {
  double estimate = 0;
  std::optional<double> p;
  double statistic = 0;
  double df = 0;
  bool zero_variance = false;
};

enum class Slot { c_minus1, c_plus1, control_minus1, control_plus1 };

inline constexpr std::array<Slot, 4> kSlots = {Slot::c_minus1, Slot::c_plus1, Slot::control_minus1,
                                               Slot::control_plus1};

inline constexpr std::string_view to_string(Slot s) {
  switch (s) {
  case Slot::c_minus1: return "c-1";
  case Slot::c_plus1: return "c+1";
  case Slot::control_minus1: return "c'-1";
  case Slot::control_plus1: return "c'+1";
  }
  return "";
}

struct SlotStat {
  Slot slot;
  double mean = 0;
  double se = 0;
  std::size_t n = 0;
};

struct Result {
  FeatureKind feature = FeatureKind::noncompliance;
  Scenario scenario = Scenario::non_affected;
  std::size_t n_pairs = 0;
  std::size_t n_discarded_unmatched = 0;
  std::size_t n_dropped_undefined = 0;
  Outcome treatment_change; // paired: c+1 vs c-1
  Outcome control_change;   // paired: c'+1 vs c'-1
  Outcome balance;          // Welch: c-1 vs c'-1
  Outcome did;              // one-sample on (c+1 - c-1) - (c'+1 - c'-1)
  std::array<SlotStat, 4> slots{};
};

namespace detail {

template <class F>
Outcome guarded(double estimate, F&& test) {
  Outcome o;
  o.estimate = estimate;
  try {
    const auto r = test();
    o.p = r.p_two_sided;
    o.statistic = r.statistic;
    o.df = r.df;
  } catch (const DegenerateSampleError&) {
    o.zero_variance = true;
  }
  return o;
}

inline double mean_of(std::span<const double> xs) {
  double s = 0;
  for (double x : xs) s += x;
  return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

} // namespace detail

/// Slot values per pair in the order c-1, c+1, c'-1, c'+1.
using SlotValues = std::array<FeatureValue, 4>;

inline Result test_values(FeatureKind feature, Scenario scenario, std::span<const SlotValues> values,
                          std::size_t discarded_unmatched = 0) {
  if (its_only(feature))
    throw UnsupportedFeatureError("feature '" + std::string(to_string(feature)) +
                                  "' measures comment rate and cannot be compared at single "
                                  "delayed-feedback slots");
  std::array<std::vector<double>, 4> v;
  Result r;
  r.feature = feature;
  r.scenario = scenario;
  r.n_discarded_unmatched = discarded_unmatched;
  for (const auto& sv : values) {
    if (!std::all_of(sv.begin(), sv.end(), [](const FeatureValue& f) { return f.defined; })) {
      ++r.n_dropped_undefined;
      continue;
    }
    for (std::size_t s = 0; s < 4; ++s) v[s].push_back(sv[s].value);
  }
  r.n_pairs = v[0].size();
  if (r.n_pairs < 2)
    throw SampleSizeError("delayed-feedback tests need at least 2 usable pairs, got " +
                          std::to_string(r.n_pairs));

  std::vector<double> dt(r.n_pairs), dc(r.n_pairs), dd(r.n_pairs);
  for (std::size_t i = 0; i < r.n_pairs; ++i) {
    dt[i] = v[1][i] - v[0][i];
    dc[i] = v[3][i] - v[2][i];
    dd[i] = dt[i] - dc[i];
  }
  r.treatment_change = detail::guarded(detail::mean_of(dt), [&] { return stats::t_test_paired(v[1], v[0]); });
  r.control_change = detail::guarded(detail::mean_of(dc), [&] { return stats::t_test_paired(v[3], v[2]); });
  r.balance = detail::guarded(detail::mean_of(v[0]) - detail::mean_of(v[2]),
                              [&] { return stats::t_test_welch(v[0], v[2]); });
  r.did = detail::guarded(detail::mean_of(dd), [&] { return stats::t_test_one_sample(dd, 0.0); });

  for (std::size_t s = 0; s < 4; ++s) {
    std::vector<std::pair<int, FeatureValue>> xs;
    for (double x : v[s]) xs.emplace_back(1, FeatureValue::of(x));
    const auto st = index_series(xs);
    r.slots[s] = SlotStat{kSlots[s], st.at(0).mean, st.at(0).se, st.at(0).n};
  }
  return r;
}

inline std::vector<SlotValues> slot_values(const Corpus& corpus, std::span<const MatchedPair> pairs,
                                           FeatureKind feature, const FeatureConfig& cfg) {
  check_feature_config(feature, cfg);
  std::vector<SlotValues> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs)
    out.push_back({extract(corpus, p.treatment.c_minus1, feature, cfg),
                   extract(corpus, p.treatment.c_plus1, feature, cfg),
                   extract(corpus, p.control.c_minus1, feature, cfg),
                   extract(corpus, p.control.c_plus1, feature, cfg)});
  return out;
}

inline Result test(const Corpus& corpus, const MatchResult& matched, Scenario scenario,
                   FeatureKind feature, const FeatureConfig& cfg) {
  if (its_only(feature)) return test_values(feature, scenario, {}, matched.discarded_unmatched);
  const auto values = slot_values(corpus, matched.pairs, feature, cfg);
  return test_values(feature, scenario, values, matched.discarded_unmatched);
}

/// select_treatments + match_controls for one scenario.
inline MatchResult run_matching(const Corpus& corpus, Scenario scenario, const Options& opts = {}) {
  const auto treatments = select_treatments(corpus, scenario, opts);
  return match_controls(corpus, treatments, scenario, opts);
}

} // namespace modcausal::df

#endif // MODCAUSAL_DELAYED_FEEDBACK_HPP
