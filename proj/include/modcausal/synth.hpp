#ifndef MODCAUSAL_SYNTH_HPP
#define MODCAUSAL_SYNTH_HPP

// Seeded synthetic corpus generator with injected, recorded effects.
//
// Each user posts on a Poisson clock. Every comment is problematic with
// probability p(t) = clamp(p0 + drift * days) * m, where m is 1 before the
// user's first removal takes effect, 1 - delta afterwards, and 0 once
// `ban_after` removals have landed. Problematic comments are removed after a
// log-normal delay; the removal (not the posting) changes the state, so the
// pre-removal window precedes treatment.
//
// Randomness is split into independent streams: one per user, one for tree
// roots and one per tree for reply structure. Adding users leaves every
// existing user's draws unchanged.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <tuple>
#include <fstream>
#include <queue>
#include <random>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <boost/random/bernoulli_distribution.hpp>
#include <boost/random/beta_distribution.hpp>
#include <boost/random/binomial_distribution.hpp>
#include <boost/random/exponential_distribution.hpp>
#include <boost/random/lognormal_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>
#include <boost/random/uniform_int_distribution.hpp>
#include <json.hpp>

#include "modcausal/corpus.hpp"
#include "modcausal/error.hpp"
#include "modcausal/features.hpp"

namespace modcausal::synth {

inline constexpr double kSecondsPerDay = 86400.0;

/// Log-normal delay parameters putting 40% of the mass above two hours with
/// sigma = 1.1: mu = ln(7200) - 1.1 * Phi^-1(0.6).
inline constexpr double kDefaultDelayMu = 8.603154491554767;
inline constexpr double kDefaultDelaySigma = 1.1;

struct Drift {
  double noncompliance = 0; // probability per day
  double swear_ratio = 0;
  double hate_ratio = 0;
  double score = 0;
  double word_count = 0;
  double delta_won = 0;

  friend bool operator==(const Drift&, const Drift&) = default;
};

struct SynthConfig {
  std::uint64_t seed = 42;
  int n_users = 500;
  int n_trees = 400;
  double comment_rate_per_day = 20;
  double rate_dispersion = 0;   // sigma of a mean-one log-normal rate multiplier
  double horizon_days = 7;
  double user_active_days = 0;  // 0: active for the whole horizon
  double p0 = 0.3;
  double delta = 0;
  Drift drift;
  double delay_mu = kDefaultDelayMu;
  double delay_sigma = kDefaultDelaySigma;
  double word_count_mu = 3.4;
  double word_count_sigma = 0.6;
  double swear_alpha = 0.5;
  double swear_beta = 30;
  double hate_alpha = 0.3;
  double hate_beta = 60;
  double score_mean = 3;
  double score_sd = 5;
  double delta_win_prob = 0.02;
  double stopword_fraction = 0.45;
  double same_tree_prob = 0.5;
  double tree_active_days = 2;
  double root_reply_prob = 0.5;
  int n_moderators = 10;
  int ban_after = 3;           // removals after which problematic posting stops; 0 disables
  double churn_prob = 0;       // chance a user leaves for good when a removal lands
  std::int64_t start_utc = 1420070400;

  friend bool operator==(const SynthConfig&, const SynthConfig&) = default;
};

inline void validate(const SynthConfig& c) {
  auto prob = [](double v, const char* name) {
    if (!(v >= 0 && v <= 1)) throw ConfigError(std::string(name) + " must lie in [0, 1]");
  };
  auto positive = [](double v, const char* name) {
    if (!(v > 0)) throw ConfigError(std::string(name) + " must be positive");
  };
  if (c.n_users < 1) throw ConfigError("n_users must be at least 1");
  if (c.n_trees < 1) throw ConfigError("n_trees must be at least 1");
  positive(c.comment_rate_per_day, "comment_rate_per_day");
  positive(c.horizon_days, "horizon_days");
  if (c.rate_dispersion < 0) throw ConfigError("rate_dispersion must be non-negative");
  if (c.user_active_days < 0) throw ConfigError("user_active_days must be non-negative");
  prob(c.p0, "p0");
  if (!(c.delta >= -1 && c.delta <= 1)) throw ConfigError("delta must lie in [-1, 1]");
  positive(c.delay_sigma, "delay_sigma");
  positive(c.word_count_sigma, "word_count_sigma");
  positive(c.swear_alpha, "swear_alpha");
  positive(c.swear_beta, "swear_beta");
  positive(c.hate_alpha, "hate_alpha");
  positive(c.hate_beta, "hate_beta");
  if (c.score_sd < 0) throw ConfigError("score_sd must be non-negative");
  prob(c.delta_win_prob, "delta_win_prob");
  prob(c.stopword_fraction, "stopword_fraction");
  prob(c.same_tree_prob, "same_tree_prob");
  positive(c.tree_active_days, "tree_active_days");
  prob(c.root_reply_prob, "root_reply_prob");
  prob(c.churn_prob, "churn_prob");
  if (c.n_moderators < 1) throw ConfigError("n_moderators must be at least 1");
  if (c.ban_after < 0) throw ConfigError("ban_after must be non-negative");
  for (double d : {c.drift.noncompliance, c.drift.swear_ratio, c.drift.hate_ratio, c.drift.score,
                   c.drift.word_count, c.drift.delta_won})
    if (!std::isfinite(d)) throw ConfigError("drift values must be finite");
}

// ---------------------------------------------------------------------------
// Config JSON

inline nlohmann::ordered_json to_json(const SynthConfig& c) {
  nlohmann::ordered_json j;
  j["seed"] = c.seed;
  j["n_users"] = c.n_users;
  j["n_trees"] = c.n_trees;
  j["comment_rate_per_day"] = c.comment_rate_per_day;
  j["rate_dispersion"] = c.rate_dispersion;
  j["horizon_days"] = c.horizon_days;
  j["user_active_days"] = c.user_active_days;
  j["p0"] = c.p0;
  j["delta"] = c.delta;
  j["drift"] = {{"noncompliance", c.drift.noncompliance}, {"swear_ratio", c.drift.swear_ratio},
                {"hate_ratio", c.drift.hate_ratio},       {"score", c.drift.score},
                {"word_count", c.drift.word_count},       {"delta_won", c.drift.delta_won}};
  j["delay"] = {{"mu", c.delay_mu}, {"sigma", c.delay_sigma}};
  j["word_count"] = {{"mu", c.word_count_mu}, {"sigma", c.word_count_sigma}};
  j["swear_ratio"] = {{"alpha", c.swear_alpha}, {"beta", c.swear_beta}};
  j["hate_ratio"] = {{"alpha", c.hate_alpha}, {"beta", c.hate_beta}};
  j["score"] = {{"mean", c.score_mean}, {"sd", c.score_sd}};
  j["delta_win_prob"] = c.delta_win_prob;
  j["stopword_fraction"] = c.stopword_fraction;
  j["same_tree_prob"] = c.same_tree_prob;
  j["tree_active_days"] = c.tree_active_days;
  j["root_reply_prob"] = c.root_reply_prob;
  j["n_moderators"] = c.n_moderators;
  j["ban_after"] = c.ban_after;
  j["churn_prob"] = c.churn_prob;
  j["start_utc"] = c.start_utc;
  return j;
}

namespace detail {

template <class T>
void read_opt(const nlohmann::json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) {
    try {
      out = it->template get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(std::string("config field '") + key + "' has the wrong type");
    }
  }
}

inline void reject_unknown(const nlohmann::json& j, std::initializer_list<std::string_view> known,
                           std::string_view where) {
  for (const auto& [key, _] : j.items())
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw ConfigError("unknown config field '" + std::string(where) + key + "'");
}

} // namespace detail

/// Missing fields keep their defaults; unknown fields are rejected.
inline SynthConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("synth config must be a JSON object");
  detail::reject_unknown(j,
                         {"seed", "n_users", "n_trees", "comment_rate_per_day", "rate_dispersion",
                          "horizon_days", "user_active_days", "p0", "delta", "drift", "delay",
                          "word_count", "swear_ratio", "hate_ratio", "score", "delta_win_prob",
                          "stopword_fraction", "same_tree_prob", "tree_active_days",
                          "root_reply_prob", "n_moderators", "ban_after", "churn_prob", "start_utc"},
                         "");
  SynthConfig c;
  detail::read_opt(j, "seed", c.seed);
  detail::read_opt(j, "n_users", c.n_users);
  detail::read_opt(j, "n_trees", c.n_trees);
  detail::read_opt(j, "comment_rate_per_day", c.comment_rate_per_day);
  detail::read_opt(j, "rate_dispersion", c.rate_dispersion);
  detail::read_opt(j, "horizon_days", c.horizon_days);
  detail::read_opt(j, "user_active_days", c.user_active_days);
  detail::read_opt(j, "p0", c.p0);
  detail::read_opt(j, "delta", c.delta);
  auto sub = [&](const char* key, std::initializer_list<std::string_view> known) -> const nlohmann::json* {
    auto it = j.find(key);
    if (it == j.end()) return nullptr;
    if (!it->is_object()) throw ConfigError(std::string("config field '") + key + "' must be an object");
    detail::reject_unknown(*it, known, std::string(key) + ".");
    return &*it;
  };
  if (auto d = sub("drift", {"noncompliance", "swear_ratio", "hate_ratio", "score", "word_count", "delta_won"})) {
    detail::read_opt(*d, "noncompliance", c.drift.noncompliance);
    detail::read_opt(*d, "swear_ratio", c.drift.swear_ratio);
    detail::read_opt(*d, "hate_ratio", c.drift.hate_ratio);
    detail::read_opt(*d, "score", c.drift.score);
    detail::read_opt(*d, "word_count", c.drift.word_count);
    detail::read_opt(*d, "delta_won", c.drift.delta_won);
  }
  if (auto d = sub("delay", {"mu", "sigma"})) {
    detail::read_opt(*d, "mu", c.delay_mu);
    detail::read_opt(*d, "sigma", c.delay_sigma);
  }
  if (auto d = sub("word_count", {"mu", "sigma"})) {
    detail::read_opt(*d, "mu", c.word_count_mu);
    detail::read_opt(*d, "sigma", c.word_count_sigma);
  }
  if (auto d = sub("swear_ratio", {"alpha", "beta"})) {
    detail::read_opt(*d, "alpha", c.swear_alpha);
    detail::read_opt(*d, "beta", c.swear_beta);
  }
  if (auto d = sub("hate_ratio", {"alpha", "beta"})) {
    detail::read_opt(*d, "alpha", c.hate_alpha);
    detail::read_opt(*d, "beta", c.hate_beta);
  }
  if (auto d = sub("score", {"mean", "sd"})) {
    detail::read_opt(*d, "mean", c.score_mean);
    detail::read_opt(*d, "sd", c.score_sd);
  }
  detail::read_opt(j, "delta_win_prob", c.delta_win_prob);
  detail::read_opt(j, "stopword_fraction", c.stopword_fraction);
  detail::read_opt(j, "same_tree_prob", c.same_tree_prob);
  detail::read_opt(j, "tree_active_days", c.tree_active_days);
  detail::read_opt(j, "root_reply_prob", c.root_reply_prob);
  detail::read_opt(j, "n_moderators", c.n_moderators);
  detail::read_opt(j, "ban_after", c.ban_after);
  detail::read_opt(j, "churn_prob", c.churn_prob);
  detail::read_opt(j, "start_utc", c.start_utc);
  validate(c);
  return c;
}

// ---------------------------------------------------------------------------
// Ground truth

/// Generator state behind one non-root comment.
struct CommentTruth {
  std::string id;
  std::string user;
  bool problematic = false;
  double p = 0;            // probability actually used, drift included
  double p_state = 0;      // p0 times the removal-state multiplier, no drift
  int removals_before = 0; // removals that had landed when it was posted
};

struct UserTruth {
  std::string user;
  double p0 = 0;
  double delta = 0;
  double rate_per_day = 0;
};

struct RemovalTruth {
  std::string comment_id;
  std::int64_t created_utc = 0;
  std::int64_t removed_utc = 0;
  std::int64_t delay = 0;
};

struct GroundTruth {
  SynthConfig config;
  std::vector<UserTruth> users;
  std::vector<CommentTruth> comments;  // canonical (created_utc, id) order
  std::vector<RemovalTruth> removals;  // (removed_utc, comment_id) order

  /// comment id -> position in `comments`
  std::unordered_map<std::string, std::size_t> index() const {
    std::unordered_map<std::string, std::size_t> m;
    m.reserve(comments.size());
    for (std::size_t i = 0; i < comments.size(); ++i) m.emplace(comments[i].id, i);
    return m;
  }
};

inline nlohmann::ordered_json to_json(const GroundTruth& g) {
  nlohmann::ordered_json j;
  j["config"] = to_json(g.config);
  auto& users = j["users"] = nlohmann::ordered_json::array();
  for (const auto& u : g.users)
    users.push_back({{"user", u.user}, {"p0", u.p0}, {"delta", u.delta}, {"rate_per_day", u.rate_per_day}});
  auto& comments = j["comments"] = nlohmann::ordered_json::array();
  for (const auto& c : g.comments)
    comments.push_back({{"id", c.id},
                        {"user", c.user},
                        {"problematic", c.problematic},
                        {"p", c.p},
                        {"p_state", c.p_state},
                        {"removals_before", c.removals_before}});
  auto& removals = j["removals"] = nlohmann::ordered_json::array();
  for (const auto& r : g.removals)
    removals.push_back({{"comment_id", r.comment_id},
                        {"created_utc", r.created_utc},
                        {"removed_utc", r.removed_utc},
                        {"delay", r.delay}});
  return j;
}

inline GroundTruth ground_truth_from_json(const nlohmann::json& j) {
  try {
    GroundTruth g;
    g.config = config_from_json(j.at("config"));
    for (const auto& u : j.at("users"))
      g.users.push_back({u.at("user").get<std::string>(), u.at("p0").get<double>(),
                         u.at("delta").get<double>(), u.at("rate_per_day").get<double>()});
    for (const auto& c : j.at("comments"))
      g.comments.push_back({c.at("id").get<std::string>(), c.at("user").get<std::string>(),
                            c.at("problematic").get<bool>(), c.at("p").get<double>(),
                            c.at("p_state").get<double>(), c.at("removals_before").get<int>()});
    for (const auto& r : j.at("removals"))
      g.removals.push_back({r.at("comment_id").get<std::string>(), r.at("created_utc").get<std::int64_t>(),
                            r.at("removed_utc").get<std::int64_t>(), r.at("delay").get<std::int64_t>()});
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed ground truth: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Generation

/// Placeholder hate-speech tokens emitted into synthetic bodies. Written next
/// to the corpus so hate_ratio can be computed on synthetic data.
inline const Lexicon& synthetic_hate_lexicon() {
  static const Lexicon lx("synthetic-hate", {"hatetok01", "hatetok02", "hatetok03", "hatetok04",
                                             "hatetok05", "hatetok06", "hatetok07", "hatetok08"});
  return lx;
}

struct SynthOutput {
  std::vector<Comment> comments;       // roots included, canonical order
  std::vector<RemovalRecord> removals; // (removed_utc, comment_id) order
  GroundTruth truth;

  Corpus corpus() const { return build_corpus(comments, removals); }
};

namespace detail {

using Engine = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

enum class Stream : std::uint64_t { user = 1, roots = 2, replies = 3 };

inline Engine stream(std::uint64_t seed, Stream kind, std::uint64_t index) {
  const auto s = splitmix64(splitmix64(seed) ^ splitmix64((static_cast<std::uint64_t>(kind) << 40) + index));
  return Engine(s);
}

inline constexpr std::array<std::string_view, 48> kFiller = {
    "argument", "evidence", "view",     "change",   "reason",   "policy",  "people",  "point",
    "example",  "society",  "believe",  "think",    "because",  "data",    "study",   "moral",
    "economy",  "system",   "history",  "culture",  "rights",   "freedom", "science", "claim",
    "position", "debate",   "logic",    "opinion",  "fact",     "reality", "problem", "solution",
    "market",   "vote",     "law",      "religion", "family",   "school",  "money",   "health",
    "source",   "context",  "question", "answer",   "consider", "support", "oppose",  "agree"};

inline constexpr std::array<std::string_view, 16> kBodyStopwords = {
    "the", "a", "and", "of", "to", "in", "is", "that", "it", "for", "on", "with", "as", "this", "but", "not"};

inline constexpr std::array<std::string_view, 5> kRules = {"R1", "R2", "R3", "R4", "R5"};
inline constexpr std::array<std::string_view, 5> kRuleText = {
    "direct challenge to the original view required", "no rudeness or hostility",
    "no accusations of bad faith", "no low-effort comments", "no off-topic comments"};

inline double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

struct TreeInfo {
  std::string id;
  std::int64_t root_utc = 0;
  int op_user = 0;
};

struct Draft {
  Comment comment;
  CommentTruth truth;
  std::size_t tree = 0;
};

struct Pending {
  std::int64_t removed_utc;
  std::string comment_id;
  bool operator>(const Pending& o) const {
    return std::tie(removed_utc, comment_id) > std::tie(o.removed_utc, o.comment_id);
  }
};

inline std::string user_name(int u) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "user%05d", u);
  return buf;
}

inline std::string body_text(Engine& rng, const SynthConfig& cfg, double days) {
  boost::random::lognormal_distribution<double> wc(cfg.word_count_mu, cfg.word_count_sigma);
  const double w_raw = wc(rng) + cfg.drift.word_count * days;
  const int w = std::max(1, static_cast<int>(std::llround(w_raw)));
  const double rs = clamp01(boost::random::beta_distribution<double>(cfg.swear_alpha, cfg.swear_beta)(rng) +
                            cfg.drift.swear_ratio * days);
  const double rh = clamp01(boost::random::beta_distribution<double>(cfg.hate_alpha, cfg.hate_beta)(rng) +
                            cfg.drift.hate_ratio * days);
  const int ks = boost::random::binomial_distribution<int>(w, rs)(rng);
  const int kh = boost::random::binomial_distribution<int>(w - ks, rh)(rng);
  const int stop = static_cast<int>(std::llround(w * cfg.stopword_fraction));

  static const auto swear = default_swear_lexicon().sorted_terms();
  static const auto hate = synthetic_hate_lexicon().sorted_terms();
  std::vector<std::string_view> tokens;
  tokens.reserve(static_cast<std::size_t>(w + stop));
  auto pick = [&](auto const& list) {
    return std::string_view(list[boost::random::uniform_int_distribution<std::size_t>(0, list.size() - 1)(rng)]);
  };
  for (int i = 0; i < ks; ++i) tokens.push_back(pick(swear));
  for (int i = 0; i < kh; ++i) tokens.push_back(pick(hate));
  for (int i = ks + kh; i < w; ++i) tokens.push_back(pick(kFiller));
  for (int i = 0; i < stop; ++i) tokens.push_back(pick(kBodyStopwords));
  for (std::size_t i = tokens.size(); i > 1; --i) {
    const auto j = boost::random::uniform_int_distribution<std::size_t>(0, i - 1)(rng);
    std::swap(tokens[i - 1], tokens[j]);
  }
  std::string body;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) body.push_back(i % 9 == 0 ? ',' : ' ');
    if (i % 9 == 0 && i) body.push_back(' ');
    body.append(tokens[i]);
  }
  if (!body.empty()) body[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(body[0])));
  body.push_back('.');
  return body;
}

} // namespace detail

inline SynthOutput generate(const SynthConfig& cfg) {
  validate(cfg);
  using namespace detail;
  const double horizon_s = cfg.horizon_days * kSecondsPerDay;
  const double active_s = cfg.tree_active_days * kSecondsPerDay;

  // Trees: the first root opens the corpus, the rest are uniform over the horizon.
  std::vector<TreeInfo> trees(static_cast<std::size_t>(cfg.n_trees));
  {
    auto rng = stream(cfg.seed, Stream::roots, 0);
    boost::random::uniform_01<double> u01;
    boost::random::uniform_int_distribution<int> op(0, cfg.n_users - 1);
    std::vector<std::int64_t> times(trees.size());
    for (std::size_t i = 0; i < trees.size(); ++i)
      times[i] = cfg.start_utc + (i == 0 ? 0 : static_cast<std::int64_t>(std::floor(u01(rng) * horizon_s)));
    std::sort(times.begin(), times.end());
    for (std::size_t i = 0; i < trees.size(); ++i) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "t%06zu", i);
      trees[i] = TreeInfo{buf, times[i], op(rng)};
    }
  }
  std::vector<std::int64_t> root_times(trees.size());
  for (std::size_t i = 0; i < trees.size(); ++i) root_times[i] = trees[i].root_utc;

  std::vector<Draft> drafts;
  SynthOutput out;
  out.truth.config = cfg;

  for (int u = 0; u < cfg.n_users; ++u) {
    auto rng = stream(cfg.seed, Stream::user, static_cast<std::uint64_t>(u));
    boost::random::uniform_01<double> u01;
    boost::random::normal_distribution<double> z01;
    const std::string name = user_name(u);

    double rate = cfg.comment_rate_per_day;
    if (cfg.rate_dispersion > 0)
      rate *= std::exp(cfg.rate_dispersion * z01(rng) - 0.5 * cfg.rate_dispersion * cfg.rate_dispersion);
    out.truth.users.push_back({name, cfg.p0, cfg.delta, rate});

    double start = 0, end = horizon_s;
    if (cfg.user_active_days > 0 && cfg.user_active_days * kSecondsPerDay < horizon_s) {
      start = u01(rng) * (horizon_s - cfg.user_active_days * kSecondsPerDay);
      end = start + cfg.user_active_days * kSecondsPerDay;
    }
    boost::random::exponential_distribution<double> gap(rate / kSecondsPerDay);
    boost::random::lognormal_distribution<double> delay_dist(cfg.delay_mu, cfg.delay_sigma);
    boost::random::normal_distribution<double> score_dist(0.0, 1.0);

    std::priority_queue<Pending, std::vector<Pending>, std::greater<>> pending;
    int landed = 0;
    bool churned = false;
    std::int64_t stop_after = std::numeric_limits<std::int64_t>::max();
    std::size_t prev_tree = trees.size();
    int seq = 0;
    for (double t = start + gap(rng); t < end; t += gap(rng)) {
      const std::int64_t created = cfg.start_utc + static_cast<std::int64_t>(std::floor(t));
      // A comment exactly at removed_utc is still pre-removal.
      while (!pending.empty() && pending.top().removed_utc < created) {
        const auto landed_at = pending.top().removed_utc;
        pending.pop();
        ++landed;
        if (!churned && cfg.churn_prob > 0 && u01(rng) < cfg.churn_prob) {
          churned = true;
          stop_after = landed_at;
        }
      }
      if (churned && created > stop_after) break;

      // Tree choice: stay in the previous conversation or join an active tree.
      const auto hi = static_cast<std::size_t>(
          std::upper_bound(root_times.begin(), root_times.end(), created) - root_times.begin());
      const auto lo = static_cast<std::size_t>(
          std::lower_bound(root_times.begin(), root_times.end(),
                           created - static_cast<std::int64_t>(active_s)) - root_times.begin());
      std::size_t tree;
      const bool prev_active = prev_tree < trees.size() &&
                               trees[prev_tree].root_utc >= created - static_cast<std::int64_t>(active_s);
      if (prev_active && u01(rng) < cfg.same_tree_prob) {
        tree = prev_tree;
      } else if (lo < hi) {
        tree = boost::random::uniform_int_distribution<std::size_t>(lo, hi - 1)(rng);
      } else {
        tree = hi - 1;
      }
      prev_tree = tree;

      const double days = (created - cfg.start_utc) / kSecondsPerDay;
      double multiplier = landed == 0 ? 1.0 : 1.0 - cfg.delta;
      if (cfg.ban_after > 0 && landed >= cfg.ban_after) multiplier = 0.0;
      const double p = clamp01(clamp01(cfg.p0 + cfg.drift.noncompliance * days) * multiplier);
      const bool problematic = u01(rng) < p;

      char idbuf[48];
      std::snprintf(idbuf, sizeof idbuf, "%s_%06d", name.c_str(), seq++);
      Draft d;
      d.tree = tree;
      d.comment.id = idbuf;
      d.comment.tree_id = trees[tree].id;
      d.comment.parent_id = std::string(); // assigned once all replies are known
      d.comment.author = name;
      d.comment.created_utc = created;
      d.comment.score = std::llround(cfg.score_mean + cfg.drift.score * days + cfg.score_sd * score_dist(rng));
      d.comment.delta_from_op = u01(rng) < clamp01(cfg.delta_win_prob + cfg.drift.delta_won * days);
      d.comment.body = body_text(rng, cfg, days);
      d.truth = CommentTruth{d.comment.id, name, problematic, p, clamp01(cfg.p0 * multiplier), landed};

      if (problematic) {
        const auto delay = std::max<std::int64_t>(1, std::llround(delay_dist(rng)));
        const auto mod = boost::random::uniform_int_distribution<int>(0, cfg.n_moderators - 1)(rng);
        const auto rule = boost::random::uniform_int_distribution<std::size_t>(0, kRules.size() - 1)(rng);
        char modbuf[16];
        std::snprintf(modbuf, sizeof modbuf, "mod%02d", mod);
        out.removals.push_back(RemovalRecord{d.comment.id, created + delay, modbuf,
                                             std::string(kRules[rule]), std::string(kRuleText[rule])});
        out.truth.removals.push_back(RemovalTruth{d.comment.id, created, created + delay, delay});
        pending.push({created + delay, d.comment.id});
      }
      drafts.push_back(std::move(d));
    }
  }

  // Reply structure, one stream per tree.
  std::vector<std::vector<std::size_t>> by_tree(trees.size());
  for (std::size_t i = 0; i < drafts.size(); ++i) by_tree[drafts[i].tree].push_back(i);
  for (std::size_t t = 0; t < trees.size(); ++t) {
    auto& members = by_tree[t];
    std::sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
      return modcausal::detail::comment_order(drafts[a].comment, drafts[b].comment);
    });
    auto rng = stream(cfg.seed, Stream::replies, t);
    boost::random::uniform_01<double> u01;
    for (std::size_t j = 0; j < members.size(); ++j) {
      auto& c = drafts[members[j]].comment;
      if (j == 0 || u01(rng) < cfg.root_reply_prob) {
        c.parent_id = trees[t].id;
      } else {
        const auto k = boost::random::uniform_int_distribution<std::size_t>(0, j - 1)(rng);
        c.parent_id = drafts[members[k]].comment.id;
      }
    }
  }

  for (const auto& tr : trees) {
    Comment root;
    root.id = tr.id;
    root.tree_id = tr.id;
    root.author = user_name(tr.op_user);
    root.created_utc = tr.root_utc;
    root.body = "Change my view on topic " + tr.id + ".";
    out.comments.push_back(std::move(root));
  }
  std::vector<std::size_t> order(drafts.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return modcausal::detail::comment_order(drafts[a].comment, drafts[b].comment);
  });
  std::vector<Comment> roots = std::move(out.comments);
  out.comments.clear();
  out.comments.reserve(roots.size() + drafts.size());
  out.truth.comments.reserve(drafts.size());
  std::size_t r = 0;
  for (auto i : order) {
    for (; r < roots.size() && modcausal::detail::comment_order(roots[r], drafts[i].comment); ++r)
      out.comments.push_back(std::move(roots[r]));
    out.comments.push_back(std::move(drafts[i].comment));
    out.truth.comments.push_back(std::move(drafts[i].truth));
  }
  for (; r < roots.size(); ++r) out.comments.push_back(std::move(roots[r]));
  auto removal_order = [](const auto& a, const auto& b) {
    return std::tie(a.removed_utc, a.comment_id) < std::tie(b.removed_utc, b.comment_id);
  };
  std::sort(out.removals.begin(), out.removals.end(), removal_order);
  std::sort(out.truth.removals.begin(), out.truth.removals.end(), removal_order);
  return out;
}

/// Writes comments.jsonl, removals.jsonl, ground_truth.json and
/// hate_lexicon.txt into `dir`.
inline void write_output(const SynthOutput& out, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) throw Error("cannot write " + (dir / name).string());
    return f;
  };
  {
    auto f = open("comments.jsonl");
    write_comments(f, out.comments);
  }
  {
    auto f = open("removals.jsonl");
    write_removals(f, out.removals);
  }
  {
    auto f = open("ground_truth.json");
    f << to_json(out.truth).dump() << '\n';
  }
  {
    auto f = open("hate_lexicon.txt");
    for (const auto& t : synthetic_hate_lexicon().sorted_terms()) f << t << '\n';
  }
}

} // namespace modcausal::synth

#endif // MODCAUSAL_SYNTH_HPP
