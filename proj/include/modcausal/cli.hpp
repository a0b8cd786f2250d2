#ifndef MODCAUSAL_CLI_HPP
#define MODCAUSAL_CLI_HPP

// Command-line front end: ingest-check, its, df, synth, validate, report.
// Exit codes: 0 success, 1 usage error, 2 data error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "modcausal/modcausal.hpp"

namespace modcausal::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

class UsageError : public Error {
public:
  using Error::Error;
};

class DataError : public Error {
public:
  using Error::Error;
};

namespace detail {

namespace fs = std::filesystem;
using report::Json;

inline std::string feature_names() {
  std::string s;
  for (auto k : kAllFeatures) {
    if (!s.empty()) s += ", ";
    s += to_string(k);
  }
  return s;
}

inline FeatureKind feature_arg(const std::string& name) {
  if (auto k = parse_feature_kind(name)) return *k;
  throw UsageError("unknown feature '" + name + "'; valid names: " + feature_names());
}

inline std::vector<FeatureKind> feature_args(const std::vector<std::string>& names) {
  std::vector<FeatureKind> out;
  for (const auto& n : names) {
    const auto k = feature_arg(n);
    if (std::find(out.begin(), out.end(), k) == out.end()) out.push_back(k);
  }
  return out;
}

inline std::vector<df::Scenario> scenario_args(const std::string& name) {
  if (name == "both") return {df::Scenario::non_affected, df::Scenario::affected};
  if (auto s = df::parse_scenario(name)) return {*s};
  throw UsageError("unknown scenario '" + name + "'; valid values: non_affected, affected, both");
}

inline std::ifstream open_in(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw DataError("cannot open '" + p.string() + "'");
  return f;
}

inline void write_file(const fs::path& p, const std::string& content) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw DataError("cannot write '" + p.string() + "'");
  f << content;
  if (!f) throw DataError("failed writing '" + p.string() + "'");
}

inline void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory '" + dir.string() + "': " + ec.message());
}

inline Corpus load_corpus(const std::string& comments, const std::string& removals) {
  auto c = open_in(comments);
  if (removals.empty()) {
    std::istringstream none;
    return parse_corpus(c, none);
  }
  auto r = open_in(removals);
  return parse_corpus(c, r);
}

struct LexiconArgs {
  std::string swear, hate, stopwords;

  void add(CLI::App& app) {
    app.add_option("--swear", swear, "Swear lexicon file (one lowercase term per line)");
    app.add_option("--hate", hate, "Hate-speech lexicon file (one lowercase term per line)");
    app.add_option("--stopwords", stopwords, "Stopword list (one lowercase term per line)");
  }
  FeatureConfig resolve() const {
    auto cfg = FeatureConfig::defaults();
    if (!swear.empty()) cfg.swear = Lexicon::load(swear, "swear");
    if (!hate.empty()) cfg.hate = Lexicon::load(hate, "hate");
    if (!stopwords.empty()) cfg.stopwords = Lexicon::load(stopwords, "stopwords");
    return cfg;
  }
  Json to_json() const {
    auto opt = [](const std::string& s) { return s.empty() ? Json("default") : Json(s); };
    return Json{{"swear", opt(swear)}, {"hate", hate.empty() ? Json(nullptr) : Json(hate)},
                {"stopwords", opt(stopwords)}};
  }
};

inline void log_config(std::ostream& err, const Json& cfg) { err << "config " << report::dump(cfg, -1); }

inline void log_counts(std::ostream& err, const Corpus& corpus) {
  err << "corpus " << report::dump(report::to_json(corpus.counts()), -1);
  for (const auto& o : corpus.diagnostics().orphan_removals)
    err << "warning: removal for unknown comment '" << o.comment_id << "'\n";
}

inline std::string its_stem(FeatureKind k) { return "its_" + std::string(to_string(k)); }
inline std::string df_stem(df::Scenario s, FeatureKind k) {
  return "df_" + std::string(df::to_string(s)) + "_" + std::string(to_string(k));
}

inline void emit_its(const fs::path& dir, const its::Report& r) {
  write_file(dir / (its_stem(r.feature) + ".json"), report::dump(report::to_json(r)));
  std::ostringstream csv;
  report::write_series_csv(csv, r.series);
  write_file(dir / (its_stem(r.feature) + "_series.csv"), csv.str());
}

inline void emit_df(const fs::path& dir, const df::Result& r) {
  write_file(dir / (df_stem(r.scenario, r.feature) + ".json"), report::dump(report::to_json(r)));
  std::ostringstream csv;
  report::write_slots_csv(csv, r);
  write_file(dir / (df_stem(r.scenario, r.feature) + "_slots.csv"), csv.str());
}

inline std::string p_text(const std::optional<double>& p) { return p ? report::format_real(*p) : "n/a"; }

// ---------------------------------------------------------------------------

struct CorpusArgs {
  std::string comments, removals;

  void add(CLI::App& app, bool removals_required) {
    app.add_option("--comments", comments, "Comment records (JSONL)")->required();
    auto r = app.add_option("--removals", removals, "Removal records (JSONL)");
    if (removals_required) r->required();
  }
};

inline int ingest_check(const CorpusArgs& in, bool as_json, std::ostream& out, std::ostream& err) {
  log_config(err, Json{{"subcommand", "ingest-check"}, {"comments", in.comments},
                       {"removals", in.removals.empty() ? Json(nullptr) : Json(in.removals)}});
  const auto corpus = load_corpus(in.comments, in.removals);
  log_counts(err, corpus);
  if (as_json) {
    auto j = report::to_json(corpus.counts());
    Json orphans = Json::array();
    for (const auto& o : corpus.diagnostics().orphan_removals) orphans.push_back(o.comment_id);
    j["orphan_comment_ids"] = orphans;
    report::write_json(out, j);
  } else {
    report::write_counts_table(out, corpus.counts());
  }
  return kExitOk;
}

struct ItsArgs {
  CorpusArgs in;
  LexiconArgs lex;
  std::string out = ".";
  std::vector<std::string> features{"noncompliance"};
  int k = 10;
  int max_ordinal = 2;
  bool cluster_robust = false;
};

inline int run_its(const ItsArgs& a, std::ostream& out, std::ostream& err) {
  const auto features = feature_args(a.features);
  if (a.k < 1) throw UsageError("--k must be at least 1");
  Json names = Json::array();
  for (auto f : features) names.push_back(std::string(to_string(f)));
  log_config(err, Json{{"subcommand", "its"},        {"comments", a.in.comments}, {"removals", a.in.removals},
                       {"out", a.out},                {"features", names},         {"k", a.k},
                       {"max_ordinal", a.max_ordinal}, {"cluster_robust", a.cluster_robust},
                       {"lexicons", a.lex.to_json()}});
  const auto cfg = a.lex.resolve();
  for (auto f : features) check_feature_config(f, cfg);
  const auto corpus = load_corpus(a.in.comments, a.in.removals);
  log_counts(err, corpus);
  const auto instances = its::select_instances(corpus, {a.k, a.max_ordinal});
  make_dir(a.out);
  for (auto f : features) {
    const auto r = its::fit(corpus, instances, f, cfg, {a.cluster_robust});
    emit_its(a.out, r);
    out << "its " << to_string(f) << ": n_instances=" << r.n_instances
        << " beta2=" << report::format_real(r.fit.beta[2]) << " p=" << report::format_real(r.fit.p[2]) << '\n';
  }
  return kExitOk;
}

struct DfArgs {
  CorpusArgs in;
  LexiconArgs lex;
  std::string out = ".";
  std::vector<std::string> features{"noncompliance"};
  std::string scenario = "both";
  int max_ordinal = 2;
  bool disjoint_roles = false;
  bool loose_control_window = false;
};

inline int run_df(const DfArgs& a, std::ostream& out, std::ostream& err) {
  const auto features = feature_args(a.features);
  for (auto f : features)
    if (its_only(f))
      throw UsageError("feature '" + std::string(to_string(f)) +
                       "' is ITS-only: the delayed-feedback design cannot be applied to comment rate");
  const auto scenarios = scenario_args(a.scenario);
  Json names = Json::array();
  for (auto f : features) names.push_back(std::string(to_string(f)));
  log_config(err, Json{{"subcommand", "df"},
                       {"comments", a.in.comments},
                       {"removals", a.in.removals},
                       {"out", a.out},
                       {"features", names},
                       {"scenario", a.scenario},
                       {"max_ordinal", a.max_ordinal},
                       {"post_window", df::kOneWeek},
                       {"disjoint_roles", a.disjoint_roles},
                       {"loose_control_window", a.loose_control_window},
                       {"lexicons", a.lex.to_json()}});
  const auto cfg = a.lex.resolve();
  for (auto f : features) check_feature_config(f, cfg);
  const auto corpus = load_corpus(a.in.comments, a.in.removals);
  log_counts(err, corpus);
  df::Options opts;
  opts.max_ordinal = a.max_ordinal;
  opts.disjoint_roles = a.disjoint_roles;
  opts.loose_control_window = a.loose_control_window;
  make_dir(a.out);
  for (auto s : scenarios) {
    const auto matched = df::run_matching(corpus, s, opts);
    for (auto f : features) {
      const auto r = df::test(corpus, matched, s, f, cfg);
      emit_df(a.out, r);
      out << "df " << df::to_string(s) << ' ' << to_string(f) << ": n_pairs=" << r.n_pairs
          << " did=" << report::format_real(r.did.estimate) << " p=" << p_text(r.did.p)
          << " balance_p=" << p_text(r.balance.p) << '\n';
    }
  }
  return kExitOk;
}

struct SynthArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

inline int run_synth(const SynthArgs& a, std::ostream& out, std::ostream& err) {
  synth::SynthConfig cfg;
  if (!a.config.empty()) {
    auto f = open_in(a.config);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(f);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError("config '" + a.config + "' is not valid JSON: " + e.what());
    }
    cfg = synth::config_from_json(j);
  }
  if (a.seed) cfg.seed = *a.seed;
  synth::validate(cfg);
  log_config(err, Json{{"subcommand", "synth"}, {"out", a.out}, {"synth", synth::to_json(cfg)}});
  const auto result = synth::generate(cfg);
  make_dir(a.out);
  synth::write_output(result, a.out);
  write_file(fs::path(a.out) / "config.json", synth::to_json(cfg).dump(2) + "\n");
  const auto corpus = result.corpus();
  log_counts(err, corpus);
  out << "synth: " << corpus.counts().comments << " comments, " << corpus.counts().removals << " removals -> "
      << a.out << '\n';
  return kExitOk;
}

struct ValidateArgs {
  std::string dir;
  std::string out;
  std::string feature = "noncompliance";
  int k = 10;
  std::size_t null_seeds = 0;
  std::uint64_t null_first_seed = 1;
};

inline int run_validate(const ValidateArgs& a, std::ostream& out, std::ostream& err) {
  const auto feature = feature_arg(a.feature);
  if (a.k < 1) throw UsageError("--k must be at least 1");
  const fs::path dir(a.dir);
  log_config(err, Json{{"subcommand", "validate"},
                       {"dir", a.dir},
                       {"feature", a.feature},
                       {"k", a.k},
                       {"null_seeds", a.null_seeds},
                       {"null_first_seed", a.null_first_seed}});
  const auto corpus = load_corpus((dir / "comments.jsonl").string(), (dir / "removals.jsonl").string());
  log_counts(err, corpus);
  auto tf = open_in(dir / "ground_truth.json");
  nlohmann::json tj;
  try {
    tj = nlohmann::json::parse(tf);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("ground_truth.json is not valid JSON: " + std::string(e.what()));
  }
  const auto truth = synth::ground_truth_from_json(tj);

  synth::EvalOptions opts;
  opts.k = a.k;
  opts.feature = feature;
  opts.features.hate = synth::synthetic_hate_lexicon();
  if (fs::exists(dir / "hate_lexicon.txt")) opts.features.hate = Lexicon::load((dir / "hate_lexicon.txt").string(), "hate");
  auto ev = synth::evaluate_estimators(corpus, truth, opts);
  Json j = report::to_json(ev);
  if (a.null_seeds > 0) {
    const auto n = synth::null_calibration(truth.config, a.null_seeds, a.null_first_seed, df::Scenario::non_affected,
                                           opts.alpha, opts.df, thread_budget());
    ev.df_null_rejection_rate = n.rejection_rate;
    j["df_null_rejection_rate"] = n.rejection_rate;
    j["null_calibration"] = report::to_json(n);
  }
  j = Json{{"feature", a.feature}, {"summary", j}};
  const auto text = report::dump(j);
  if (!a.out.empty()) {
    make_dir(a.out);
    write_file(fs::path(a.out) / "validation.json", text);
  }
  out << text;
  return kExitOk;
}

struct ReportArgs {
  CorpusArgs in;
  LexiconArgs lex;
  std::string out = ".";
  int k = 10;
};

inline int run_report(const ReportArgs& a, std::ostream& out, std::ostream& err) {
  if (a.k < 1) throw UsageError("--k must be at least 1");
  log_config(err, Json{{"subcommand", "report"}, {"comments", a.in.comments}, {"removals", a.in.removals},
                       {"out", a.out}, {"k", a.k}, {"lexicons", a.lex.to_json()}});
  const auto cfg = a.lex.resolve();
  const auto corpus = load_corpus(a.in.comments, a.in.removals);
  log_counts(err, corpus);
  const fs::path dir(a.out);
  make_dir(dir);

  write_file(dir / "counts.json", report::dump(report::to_json(corpus.counts())));
  {
    std::ostringstream s;
    report::write_delay_cdf_csv(s, corpus);
    write_file(dir / "delay_cdf.csv", s.str());
  }
  {
    std::ostringstream s;
    const auto cells = return_profile(corpus);
    report::write_return_profile_csv(s, cells);
    write_file(dir / "return_profile.csv", s.str());
  }

  const auto instances = its::select_instances(corpus, {a.k, 2});
  const std::array<df::Scenario, 2> scenarios{df::Scenario::non_affected, df::Scenario::affected};
  std::array<df::MatchResult, 2> matched;
  for (std::size_t s = 0; s < 2; ++s) matched[s] = df::run_matching(corpus, scenarios[s]);

  // One task per (feature, analysis); results land in fixed slots.
  struct Task {
    FeatureKind feature;
    int analysis; // 0 ITS, 1 DF non_affected, 2 DF affected
    std::optional<its::Report> its;
    std::optional<df::Result> df;
    std::string skipped;
  };
  std::vector<Task> tasks;
  for (auto f : kAllFeatures) {
    tasks.push_back({f, 0, {}, {}, {}});
    if (!its_only(f)) {
      tasks.push_back({f, 1, {}, {}, {}});
      tasks.push_back({f, 2, {}, {}, {}});
    }
  }
  parallel_for(tasks.size(), thread_budget(), [&](std::size_t i) {
    auto& t = tasks[i];
    try {
      if (t.analysis == 0)
        t.its = its::fit(corpus, instances, t.feature, cfg);
      else
        t.df = df::test(corpus, matched[static_cast<std::size_t>(t.analysis - 1)],
                        scenarios[static_cast<std::size_t>(t.analysis - 1)], t.feature, cfg);
    } catch (const ConfigError& e) {
      t.skipped = e.what();
    } catch (const SampleSizeError& e) {
      t.skipped = e.what();
    } catch (const SingularityError& e) {
      t.skipped = e.what();
    }
  });

  Json index = Json::array();
  for (const auto& t : tasks) {
    const std::string name(to_string(t.feature));
    const std::string analysis =
        t.analysis == 0 ? "its" : "df_" + std::string(df::to_string(scenarios[static_cast<std::size_t>(t.analysis - 1)]));
    Json entry{{"feature", name}, {"analysis", analysis}};
    if (t.its) {
      emit_its(dir, *t.its);
      entry["status"] = "ok";
      entry["file"] = its_stem(t.feature) + ".json";
    } else if (t.df) {
      emit_df(dir, *t.df);
      entry["status"] = "ok";
      entry["file"] = df_stem(t.df->scenario, t.feature) + ".json";
    } else {
      entry["status"] = "skipped";
      entry["reason"] = t.skipped;
      err << "skipped " << analysis << ' ' << name << ": " << t.skipped << '\n';
    }
    index.push_back(entry);
  }
  write_file(dir / "report.json", report::dump(Json{{"outputs", index}}));
  out << "report: " << index.size() << " analyses -> " << a.out << '\n';
  return kExitOk;
}

} // namespace detail

/// Parses argv and runs one subcommand, returning the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Causal effects of comment removal on author behaviour", "modcausal"};
  app.require_subcommand(1);

  detail::CorpusArgs ingest;
  bool ingest_json = false;
  auto* c_ingest = app.add_subcommand("ingest-check", "Parse a corpus and print dataset counts");
  ingest.add(*c_ingest, false);
  c_ingest->add_flag("--json", ingest_json, "Print counts as JSON");

  detail::ItsArgs its_args;
  auto* c_its = app.add_subcommand("its", "Interrupted time-series fit around first and second removals");
  its_args.in.add(*c_its, true);
  its_args.lex.add(*c_its);
  c_its->add_option("--out", its_args.out, "Output directory")->capture_default_str();
  c_its->add_option("--feature", its_args.features, "Feature name (repeatable)")->capture_default_str();
  c_its->add_option("--k", its_args.k, "Comments on each side of the removal")->capture_default_str();
  c_its->add_option("--max-ordinal", its_args.max_ordinal, "Highest removal ordinal analysed")->capture_default_str();
  c_its->add_flag("--cluster-robust", its_args.cluster_robust, "Cluster-robust standard errors by instance");

  detail::DfArgs df_args;
  auto* c_df = app.add_subcommand("df", "Delayed-feedback matched design");
  df_args.in.add(*c_df, true);
  df_args.lex.add(*c_df);
  c_df->add_option("--out", df_args.out, "Output directory")->capture_default_str();
  c_df->add_option("--feature", df_args.features, "Feature name (repeatable)")->capture_default_str();
  c_df->add_option("--scenario", df_args.scenario, "non_affected, affected or both")->capture_default_str();
  c_df->add_option("--max-ordinal", df_args.max_ordinal, "Highest removal ordinal analysed")->capture_default_str();
  c_df->add_flag("--disjoint-roles", df_args.disjoint_roles, "Never use a treatment removal as a control");
  c_df->add_flag("--loose-control-window", df_args.loose_control_window,
                 "Accept any control comment before the pseudo-removal time");

  detail::SynthArgs synth_args;
  std::uint64_t seed = 0;
  auto* c_synth = app.add_subcommand("synth", "Generate a synthetic corpus with known effects");
  c_synth->add_option("--config", synth_args.config, "Generator config (JSON)");
  auto* seed_opt = c_synth->add_option("--seed", seed, "Override the config seed");
  c_synth->add_option("--out", synth_args.out, "Output directory")->required();

  detail::ValidateArgs val_args;
  auto* c_val = app.add_subcommand("validate", "Compare both estimators with the generator's ground truth");
  c_val->add_option("--dir", val_args.dir, "Directory written by synth")->required();
  c_val->add_option("--out", val_args.out, "Directory for validation.json");
  c_val->add_option("--feature", val_args.feature, "Feature name")->capture_default_str();
  c_val->add_option("--k", val_args.k, "ITS window size")->capture_default_str();
  c_val->add_option("--null-seeds", val_args.null_seeds, "Null-model corpora for the DiD rejection rate")
      ->capture_default_str();
  c_val->add_option("--null-first-seed", val_args.null_first_seed, "First null-model seed")->capture_default_str();

  detail::ReportArgs rep_args;
  auto* c_rep = app.add_subcommand("report", "Per-index and per-slot series for every feature");
  rep_args.in.add(*c_rep, true);
  rep_args.lex.add(*c_rep);
  c_rep->add_option("--out", rep_args.out, "Output directory")->capture_default_str();
  c_rep->add_option("--k", rep_args.k, "ITS window size")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (*c_ingest) return detail::ingest_check(ingest, ingest_json, out, err);
    if (*c_its) return detail::run_its(its_args, out, err);
    if (*c_df) return detail::run_df(df_args, out, err);
    if (*c_synth) {
      if (*seed_opt) synth_args.seed = seed;
      return detail::run_synth(synth_args, out, err);
    }
    if (*c_val) return detail::run_validate(val_args, out, err);
    if (*c_rep) return detail::run_report(rep_args, out, err);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const UnsupportedFeatureError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

} // namespace modcausal::cli

#endif // MODCAUSAL_CLI_HPP
