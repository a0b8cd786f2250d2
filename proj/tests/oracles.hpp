#ifndef MODCAUSAL_TESTS_ORACLES_HPP
#define MODCAUSAL_TESTS_ORACLES_HPP

// Independent brute-force reimplementations used as test oracles. They only
// touch the public record fields of a Corpus and recompute every derived
// quantity (ordinals, timelines, moderators, windows) from scratch.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "modcausal/modcausal.hpp"

namespace oracle {

using modcausal::Comment;
using modcausal::Corpus;

// ---------------------------------------------------------------------------
// Statistics

inline double t_two_sided_p(double t, double df) {
  if (std::isinf(t)) return 0.0;
  boost::math::students_t dist(df);
  return 2 * boost::math::cdf(boost::math::complement(dist, std::fabs(t)));
}

struct Fit {
  std::array<double, 4> beta{}, se{}, t{}, p{};
  double df = 0;
};

using Mat = std::array<std::array<long double, 4>, 4>;

inline Mat invert(Mat a) {
  Mat inv{};
  for (int i = 0; i < 4; ++i) inv[i][i] = 1;
  for (int col = 0; col < 4; ++col) {
    int piv = col;
    for (int r = col + 1; r < 4; ++r)
      if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
    std::swap(a[col], a[piv]);
    std::swap(inv[col], inv[piv]);
    const long double d = a[col][col];
    for (int j = 0; j < 4; ++j) {
      a[col][j] /= d;
      inv[col][j] /= d;
    }
    for (int r = 0; r < 4; ++r) {
      if (r == col) continue;
      const long double f = a[r][col];
      for (int j = 0; j < 4; ++j) {
        a[r][j] -= f * a[col][j];
        inv[r][j] -= f * inv[col][j];
      }
    }
  }
  return inv;
}

/// Normal-equations OLS in long double; classical or CR1 cluster-robust errors.
inline Fit ols(const std::vector<std::array<double, 4>>& x, const std::vector<double>& y,
               const std::vector<std::size_t>* clusters = nullptr) {
  const std::size_t n = y.size();
  Mat xtx{};
  std::array<long double, 4> xty{};
  for (std::size_t r = 0; r < n; ++r)
    for (int i = 0; i < 4; ++i) {
      xty[i] += static_cast<long double>(x[r][i]) * y[r];
      for (int j = 0; j < 4; ++j) xtx[i][j] += static_cast<long double>(x[r][i]) * x[r][j];
    }
  const Mat inv = invert(xtx);
  std::array<long double, 4> b{};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) b[i] += inv[i][j] * xty[j];
  std::vector<long double> e(n);
  long double rss = 0;
  for (std::size_t r = 0; r < n; ++r) {
    long double f = 0;
    for (int i = 0; i < 4; ++i) f += b[i] * x[r][i];
    e[r] = y[r] - f;
    rss += e[r] * e[r];
  }
  Mat cov{};
  Fit fit;
  if (clusters) {
    std::map<std::size_t, std::array<long double, 4>> score;
    for (std::size_t r = 0; r < n; ++r)
      for (int i = 0; i < 4; ++i) score[(*clusters)[r]][i] += x[r][i] * e[r];
    Mat meat{};
    for (const auto& [_, s] : score)
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) meat[i][j] += s[i] * s[j];
    const long double g = static_cast<long double>(score.size());
    const long double c = g / (g - 1) * (n - 1.0L) / (n - 4.0L);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j)
        for (int a = 0; a < 4; ++a)
          for (int bb = 0; bb < 4; ++bb) cov[i][j] += c * inv[i][a] * meat[a][bb] * inv[bb][j];
    fit.df = static_cast<double>(g - 1);
  } else {
    fit.df = static_cast<double>(n - 4);
    const long double s2 = rss / fit.df;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) cov[i][j] = s2 * inv[i][j];
  }
  for (int i = 0; i < 4; ++i) {
    fit.beta[i] = static_cast<double>(b[i]);
    fit.se[i] = static_cast<double>(std::sqrt(cov[i][i]));
    fit.t[i] = static_cast<double>(b[i] / std::sqrt(cov[i][i]));
    fit.p[i] = t_two_sided_p(fit.t[i], fit.df);
  }
  return fit;
}

inline std::array<double, 4> design(int i) {
  const double x = i > 0 ? 1.0 : 0.0;
  return {1.0, static_cast<double>(i), x, i * x};
}

/// |a - b| <= tol * max(1, |b|)
inline bool close(double a, double b, double tol) {
  return std::fabs(a - b) <= tol * std::max(1.0, std::fabs(b));
}

// ---------------------------------------------------------------------------
// Corpus-derived quantities recomputed by scanning

inline std::vector<std::size_t> all_by_author(const Corpus& c, const std::string& author) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < c.comments().size(); ++i) {
    const auto& cm = c.comments()[i];
    if (cm.author == author && cm.parent_id) out.push_back(i);
  }
  std::sort(out.begin(), out.end(), [&](std::size_t a, std::size_t b) {
    return std::tie(c.at(a).created_utc, c.at(a).id) < std::tie(c.at(b).created_utc, c.at(b).id);
  });
  return out;
}

inline std::string tree_op(const Corpus& c, const std::string& tree) {
  for (const auto& cm : c.comments())
    if (cm.tree_id == tree && !cm.parent_id) return cm.author;
  return {};
}

inline int ordinal(const Corpus& c, std::size_t idx) {
  const auto& me = c.at(idx);
  if (!me.removal) return 0;
  int ord = 1;
  for (const auto& cm : c.comments())
    if (cm.author == me.author && cm.removal &&
        std::tie(cm.removal->removed_utc, cm.id) < std::tie(me.removal->removed_utc, me.id))
      ++ord;
  return ord;
}

inline std::set<std::string> moderators(const Corpus& c) {
  std::set<std::string> m;
  for (const auto& cm : c.comments())
    if (cm.removal) m.insert(cm.removal->moderator);
  for (const auto& r : c.diagnostics().orphan_removals) m.insert(r.moderator);
  return m;
}

inline int depth(const Corpus& c, const std::string& id) {
  const auto& cm = c.comment(id);
  return cm.parent_id ? 1 + depth(c, *cm.parent_id) : 0;
}

inline std::int64_t delay(const Corpus& c, std::size_t idx) {
  return c.at(idx).removal->removed_utc - c.at(idx).created_utc;
}

using Timelines = std::map<std::string, std::vector<std::size_t>>;

inline Timelines timelines(const Corpus& c) {
  Timelines t;
  for (std::size_t i = 0; i < c.comments().size(); ++i)
    if (c.at(i).parent_id) t[c.at(i).author].push_back(i);
  for (auto& [_, v] : t)
    std::sort(v.begin(), v.end(), [&](std::size_t a, std::size_t b) {
      return std::tie(c.at(a).created_utc, c.at(a).id) < std::tie(c.at(b).created_utc, c.at(b).id);
    });
  return t;
}

// ---------------------------------------------------------------------------
// ITS selection

inline std::vector<modcausal::its::Instance> its_instances(const Corpus& c, int k, int max_ordinal = 2) {
  std::vector<std::size_t> removals;
  for (std::size_t i = 0; i < c.comments().size(); ++i)
    if (c.at(i).removal) removals.push_back(i);
  std::sort(removals.begin(), removals.end(), [&](std::size_t a, std::size_t b) {
    return std::tie(c.at(a).removal->removed_utc, c.at(a).id) < std::tie(c.at(b).removal->removed_utc, c.at(b).id);
  });
  const auto mods = moderators(c);
  std::vector<modcausal::its::Instance> out;
  for (auto r : removals) {
    const auto& cm = c.at(r);
    const int ord = ordinal(c, r);
    if (ord > max_ordinal || cm.author == "[deleted]" || mods.count(cm.author) ||
        tree_op(c, cm.tree_id) == cm.author)
      continue;
    const auto mine = all_by_author(c, cm.author);
    bool busy = false;
    std::vector<std::size_t> pre, post;
    for (auto j : mine) {
      const auto t = c.at(j).created_utc;
      if (t > cm.created_utc && t <= cm.removal->removed_utc) busy = true;
      if (c.at(j).tree_id == cm.tree_id) continue;
      if (t < cm.created_utc) pre.push_back(j);
      if (t > cm.removal->removed_utc && post.size() < static_cast<std::size_t>(k)) post.push_back(j);
    }
    if (busy || pre.size() < static_cast<std::size_t>(k) || post.size() < static_cast<std::size_t>(k)) continue;
    pre.erase(pre.begin(), pre.end() - k);
    out.push_back({cm.author, r, ord, pre, post});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Delayed feedback

inline bool in_scope(const Corpus& c, std::size_t j, const std::string& tree, modcausal::df::Scenario s) {
  const bool same = c.at(j).tree_id == tree;
  return s == modcausal::df::Scenario::affected ? same : !same;
}

inline std::vector<std::size_t> eligible_removals(const Corpus& c, int max_ordinal = 2) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < c.comments().size(); ++i) {
    if (!c.at(i).removal || c.at(i).author == "[deleted]") continue;
    if (ordinal(c, i) <= max_ordinal) out.push_back(i);
  }
  return out;
}

inline std::vector<modcausal::df::Treatment> treatments(const Corpus& c, modcausal::df::Scenario s,
                                                        int max_ordinal = 2) {
  std::vector<modcausal::df::Treatment> out;
  const auto tl = timelines(c);
  for (auto r : eligible_removals(c, max_ordinal)) {
    const auto& cm = c.at(r);
    const auto removed = cm.removal->removed_utc;
    std::optional<std::size_t> before, after;
    for (auto j : tl.at(cm.author)) {
      if (j == r || !in_scope(c, j, cm.tree_id, s)) continue;
      const auto t = c.at(j).created_utc;
      if (t > cm.created_utc && t <= removed) before = j;
      if (t > removed && t <= removed + 604800 && !after) after = j;
    }
    if (before && after) out.push_back({cm.author, r, ordinal(c, r), removed - cm.created_utc, *before, *after, s});
  }
  std::sort(out.begin(), out.end(), [&](const auto& a, const auto& b) {
    return std::tie(c.at(a.removed).removal->removed_utc, c.at(a.removed).id) <
           std::tie(c.at(b.removed).removal->removed_utc, c.at(b.removed).id);
  });
  return out;
}

inline std::optional<modcausal::df::Control> control(const Corpus& c, const Timelines& tl, std::size_t r,
                                                     std::int64_t d, modcausal::df::Scenario s, bool loose) {
  const auto& cm = c.at(r);
  const auto own = delay(c, r);
  if (own <= d) return std::nullopt;
  const auto pseudo = cm.created_utc + d;
  std::optional<std::size_t> before, after;
  for (auto j : tl.at(cm.author)) {
    if (j == r || !in_scope(c, j, cm.tree_id, s)) continue;
    const auto t = c.at(j).created_utc;
    if ((loose || t > cm.created_utc) && t <= pseudo) before = j;
    if (t > pseudo && t < cm.removal->removed_utc && !after) after = j;
  }
  if (!before || !after) return std::nullopt;
  return modcausal::df::Control{cm.author, r, ordinal(c, r), own, pseudo, *before, *after};
}

/// Greedy matching by exhaustive scan: each treatment, in ascending (delay,
/// id), takes the feasible unused pool removal with the smallest larger delay.
inline modcausal::df::MatchResult match(const Corpus& c, std::vector<modcausal::df::Treatment> ts,
                                        modcausal::df::Scenario s, const modcausal::df::Options& o = {}) {
  auto key = [&](std::size_t i) { return std::make_tuple(delay(c, i), c.at(i).id); };
  auto pool = eligible_removals(c, o.max_ordinal);
  std::sort(pool.begin(), pool.end(), [&](auto a, auto b) { return key(a) < key(b); });
  std::sort(ts.begin(), ts.end(), [&](const auto& a, const auto& b) { return key(a.removed) < key(b.removed); });
  const auto tl = timelines(c);
  std::set<std::size_t> used, treated;
  modcausal::df::MatchResult res;
  for (const auto& t : ts) {
    if (o.disjoint_roles && used.count(t.removed)) {
      ++res.discarded_unmatched;
      continue;
    }
    std::optional<modcausal::df::Control> best;
    for (auto p : pool) {
      if (p == t.removed || used.count(p) || (o.disjoint_roles && treated.count(p))) continue;
      if (auto ctl = control(c, tl, p, t.delay, s, o.loose_control_window)) {
        best = ctl;
        break;
      }
    }
    if (!best) {
      ++res.discarded_unmatched;
      continue;
    }
    used.insert(best->removed);
    treated.insert(t.removed);
    res.pairs.push_back({t, *best, best->delay - t.delay});
  }
  std::sort(res.pairs.begin(), res.pairs.end(), [&](const auto& a, const auto& b) {
    return std::tie(c.at(a.treatment.removed).removal->removed_utc, c.at(a.treatment.removed).id) <
           std::tie(c.at(b.treatment.removed).removal->removed_utc, c.at(b.treatment.removed).id);
  });
  return res;
}

/// Checks every matched-pair invariant; returns the first violation or "".
inline std::string check_pairs(const Corpus& c, const modcausal::df::MatchResult& m, modcausal::df::Scenario s,
                               bool loose = false) {
  std::set<std::size_t> controls;
  for (const auto& p : m.pairs) {
    const auto& t = p.treatment;
    const auto& k = p.control;
    const auto& tc = c.at(t.removed);
    const auto& kc = c.at(k.removed);
    const auto tid = tc.id;
    if (!(k.delay > t.delay)) return tid + ": control delay not larger";
    if (p.delay_gap != k.delay - t.delay || p.delay_gap <= 0) return tid + ": bad gap";
    if (k.removed == t.removed) return tid + ": self match";
    if (!controls.insert(k.removed).second) return tid + ": control reused";
    if (ordinal(c, t.removed) > 2 || ordinal(c, k.removed) > 2) return tid + ": ordinal > 2";
    if (k.pseudo_removal_utc != kc.created_utc + t.delay) return tid + ": pseudo time";
    const auto cm1 = c.at(t.c_minus1).created_utc, cp1 = c.at(t.c_plus1).created_utc;
    if (!(cm1 > tc.created_utc && cm1 <= tc.removal->removed_utc)) return tid + ": c-1 outside window";
    if (!(cp1 > tc.removal->removed_utc && cp1 <= tc.removal->removed_utc + 604800)) return tid + ": c+1 outside week";
    const auto km1 = c.at(k.c_minus1).created_utc, kp1 = c.at(k.c_plus1).created_utc;
    if (!((loose || km1 > kc.created_utc) && km1 <= k.pseudo_removal_utc)) return tid + ": c'-1 outside window";
    if (!(kp1 > k.pseudo_removal_utc && kp1 < kc.removal->removed_utc)) return tid + ": c'+1 not before removal";
    for (auto j : {t.c_minus1, t.c_plus1})
      if (c.at(j).author != tc.author || j == t.removed || !in_scope(c, j, tc.tree_id, s)) return tid + ": treatment scope";
    for (auto j : {k.c_minus1, k.c_plus1})
      if (c.at(j).author != kc.author || j == k.removed || !in_scope(c, j, kc.tree_id, s)) return tid + ": control scope";
  }
  return "";
}

// ---------------------------------------------------------------------------
// Return profile

/// [cohort][destination] fractions; cohort 0 = affected, destinations in
/// enum order.
inline std::array<std::array<double, 4>, 2> return_profile(const Corpus& c) {
  std::array<std::array<double, 4>, 2> hits{};
  std::array<double, 2> total{};
  std::set<std::string> authors;
  for (const auto& cm : c.comments())
    if (cm.parent_id && cm.author != "[deleted]") authors.insert(cm.author);
  for (const auto& a : authors) {
    const auto mine = all_by_author(c, a);
    for (std::size_t p = 0; p < mine.size(); ++p) {
      bool same = false, other = false;
      for (std::size_t q = p + 1; q < mine.size(); ++q)
        (c.at(mine[q]).tree_id == c.at(mine[p]).tree_id ? same : other) = true;
      const int ord = ordinal(c, mine[p]);
      const int cohort = ord >= 1 && ord <= 2 ? 0 : 1;
      total[cohort] += 1;
      hits[cohort][0] += same;
      hits[cohort][1] += other;
      hits[cohort][2] += same || other;
      hits[cohort][3] += !(same || other);
    }
  }
  for (int k = 0; k < 2; ++k)
    for (auto& h : hits[k]) h = total[k] > 0 ? h / total[k] : 0.0;
  return hits;
}

// ---------------------------------------------------------------------------
// Text

/// ASCII-only tokenizer: lowercase alnum runs, apostrophes kept between
/// letters.
inline std::vector<std::string> tokenize_ascii(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  auto alnum = [](char ch) { return std::isalnum(static_cast<unsigned char>(ch)) != 0; };
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char ch = s[i];
    if (alnum(ch)) {
      cur += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    } else if (ch == '\'' && !cur.empty() && i + 1 < s.size() && alnum(s[i + 1])) {
      cur += ch;
    } else if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

} // namespace oracle

#endif // MODCAUSAL_TESTS_ORACLES_HPP
