#ifndef MODCAUSAL_REPORT_HPP
#define MODCAUSAL_REPORT_HPP

// JSON and CSV emission. Reals are written with 10 significant digits and
// non-finite values become null (JSON) or an empty field (CSV), so reruns are
// byte-identical.

#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "modcausal/corpus.hpp"
#include "modcausal/delayed_feedback.hpp"
#include "modcausal/evaluate.hpp"
#include "modcausal/its.hpp"

namespace modcausal::report {

using Json = nlohmann::ordered_json;

inline std::string format_real(double v) {
  if (!std::isfinite(v)) return "null";
  if (v == 0) return "0";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline std::string csv_real(double v) { return std::isfinite(v) ? format_real(v) : ""; }

namespace detail {

inline void write_string(std::ostream& out, const std::string& s) {
  out << Json(s).dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

inline void write(std::ostream& out, const Json& j, int indent, int level) {
  const auto pad = [&](int l) {
    if (indent >= 0) out << '\n' << std::string(static_cast<std::size_t>(indent * l), ' ');
  };
  switch (j.type()) {
  case Json::value_t::object: {
    if (j.empty()) {
      out << "{}";
      return;
    }
    out << '{';
    bool first = true;
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (!first) out << ',';
      first = false;
      pad(level + 1);
      write_string(out, it.key());
      out << (indent >= 0 ? ": " : ":");
      write(out, it.value(), indent, level + 1);
    }
    pad(level);
    out << '}';
    return;
  }
  case Json::value_t::array: {
    if (j.empty()) {
      out << "[]";
      return;
    }
    out << '[';
    bool first = true;
    for (const auto& v : j) {
      if (!first) out << ',';
      first = false;
      pad(level + 1);
      write(out, v, indent, level + 1);
    }
    pad(level);
    out << ']';
    return;
  }
  case Json::value_t::number_float: out << format_real(j.get<double>()); return;
  case Json::value_t::string: write_string(out, j.get<std::string>()); return;
  default: out << j.dump(); return;
  }
}

} // namespace detail

/// Serializes with 10-significant-digit reals.
inline void write_json(std::ostream& out, const Json& j, int indent = 2) {
  detail::write(out, j, indent, 0);
  out << '\n';
}

inline std::string dump(const Json& j, int indent = 2) {
  std::ostringstream s;
  write_json(s, j, indent);
  return s.str();
}

inline Json optional_real(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

template <class A>
Json real_array(const A& xs) {
  Json a = Json::array();
  for (double x : xs) a.push_back(x);
  return a;
}

// ---------------------------------------------------------------------------
// Corpus

inline Json to_json(const CorpusCounts& c) {
  return Json{{"trees", c.trees},
              {"commenting_users", c.commenting_users},
              {"comments", c.comments},
              {"removals", c.removals},
              {"orphan_removals", c.orphan_removals},
              {"moderators", c.moderators},
              {"affected_users", c.affected_users},
              {"affected_trees", c.affected_trees}};
}

inline void write_counts_table(std::ostream& out, const CorpusCounts& c) {
  out << "trees            " << c.trees << '\n'
      << "commenting users " << c.commenting_users << '\n'
      << "comments         " << c.comments << '\n'
      << "removals         " << c.removals << '\n'
      << "orphan removals  " << c.orphan_removals << '\n'
      << "moderators       " << c.moderators << '\n'
      << "affected users   " << c.affected_users << '\n'
      << "affected trees   " << c.affected_trees << '\n';
}

inline void write_delay_cdf_csv(std::ostream& out, const Corpus& corpus) {
  out << "delay,fraction\n";
  for (const auto& p : delay_cdf(corpus)) out << p.delay << ',' << csv_real(p.fraction) << '\n';
}

inline void write_return_profile_csv(std::ostream& out, std::span<const ReturnProfileCell> cells) {
  out << "cohort,destination,fraction,se,n\n";
  for (const auto& c : cells)
    out << to_string(c.cohort) << ',' << to_string(c.destination) << ',' << csv_real(c.fraction) << ','
        << csv_real(c.se) << ',' << c.n << '\n';
}

// ---------------------------------------------------------------------------
// ITS

inline Json series_json(std::span<const IndexStat> series) {
  Json a = Json::array();
  for (const auto& s : series) a.push_back(Json{{"index", s.index}, {"mean", s.mean}, {"se", s.se}, {"n", s.n}});
  return a;
}

inline Json to_json(const its::Report& r) {
  Json j{{"feature", std::string(to_string(r.feature))},
         {"n_instances", r.n_instances},
         {"n_observations", r.n_observations},
         {"df", r.fit.df},
         {"cluster_robust", r.fit.cluster_robust},
         {"beta", real_array(r.fit.beta)},
         {"se", real_array(r.fit.se)},
         {"t", real_array(r.fit.t)},
         {"p", real_array(r.fit.p)}};
  j["series"] = series_json(r.series);
  return j;
}

inline void write_series_csv(std::ostream& out, std::span<const IndexStat> series) {
  out << "index,mean,se,n\n";
  for (const auto& s : series) out << s.index << ',' << csv_real(s.mean) << ',' << csv_real(s.se) << ',' << s.n << '\n';
}

// ---------------------------------------------------------------------------
// Delayed feedback

inline Json to_json(const df::Outcome& o) {
  Json j{{"est", o.estimate}, {"p", optional_real(o.p)}};
  if (o.zero_variance) j["status"] = "zero_variance";
  return j;
}

inline Json to_json(const df::Result& r) {
  Json j{{"feature", std::string(to_string(r.feature))},
         {"scenario", std::string(df::to_string(r.scenario))},
         {"n_pairs", r.n_pairs},
         {"n_discarded_unmatched", r.n_discarded_unmatched},
         {"n_dropped_undefined", r.n_dropped_undefined}};
  j["treatment_change"] = to_json(r.treatment_change);
  j["control_change"] = to_json(r.control_change);
  j["balance_p"] = optional_real(r.balance.p);
  if (r.balance.zero_variance) j["balance_status"] = "zero_variance";
  j["did"] = to_json(r.did);
  Json slots = Json::array();
  for (const auto& s : r.slots)
    slots.push_back(Json{{"slot", std::string(df::to_string(s.slot))}, {"mean", s.mean}, {"se", s.se}, {"n", s.n}});
  j["slots"] = slots;
  return j;
}

inline void write_slots_csv(std::ostream& out, const df::Result& r) {
  out << "slot,mean,se,n\n";
  for (const auto& s : r.slots)
    out << df::to_string(s.slot) << ',' << csv_real(s.mean) << ',' << csv_real(s.se) << ',' << s.n << '\n';
}

// ---------------------------------------------------------------------------
// Estimator validation

inline Json to_json(const std::optional<synth::EstimatorCheck>& c) {
  if (!c) return nullptr;
  return Json{{"estimate", c->estimate}, {"truth", c->truth}, {"bias", c->bias}, {"p", optional_real(c->p)}, {"n", c->n}};
}

inline Json to_json(const synth::Evaluation& e) {
  Json j;
  j["its"] = to_json(e.its);
  j["df_non_affected"] = to_json(e.df[0]);
  j["df_affected"] = to_json(e.df[1]);
  j["its_bias"] = e.its ? Json(e.its->bias) : Json(nullptr);
  j["df_bias"] = e.df[0] ? Json(e.df[0]->bias) : Json(nullptr);
  j["df_null_rejection_rate"] = optional_real(e.df_null_rejection_rate);
  return j;
}

inline Json to_json(const synth::NullCalibration& n) {
  return Json{{"seeds_used", n.runs.size()},  {"seeds_skipped", n.skipped},
              {"rejection_rate", n.rejection_rate}, {"balance_ok_rate", n.balance_ok_rate},
              {"mean_did", n.mean_did},       {"se_mean_did", n.se_mean_did}};
}

} // namespace modcausal::report

#endif // MODCAUSAL_REPORT_HPP
