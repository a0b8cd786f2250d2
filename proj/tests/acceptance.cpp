// Acceptance checks. Prints one PASS/FAIL/SKIP line per criterion and exits
// nonzero if any criterion fails.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <sys/wait.h>

#include <modcausal/cli.hpp>

#include "oracles.hpp"

using namespace modcausal;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

/// Collects failure notes for one criterion.
struct Check {
  std::vector<std::string> failures;
  std::vector<std::string> notes;
  void expect(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
  void note(const std::string& s) { notes.push_back(s); }
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

int n_failed = 0;

void report(int id, const std::string& title, const Check& c) {
  const char* verdict = c.failures.empty() ? "PASS" : "FAIL";
  if (!c.failures.empty()) ++n_failed;
  std::cout << verdict << " criterion " << id << ": " << title << '\n';
  for (const auto& n : c.notes) std::cout << "    " << n << '\n';
  for (const auto& f : c.failures) std::cout << "    failed: " << f << '\n';
  std::cout.flush();
}

synth::SynthConfig world(std::uint64_t seed, int users, int trees, double p0, double delta) {
  synth::SynthConfig c;
  c.seed = seed;
  c.n_users = users;
  c.n_trees = trees;
  c.comment_rate_per_day = 20;
  c.user_active_days = 2;
  c.horizon_days = 14;
  c.p0 = p0;
  c.delta = delta;
  return c;
}

// 1. OLS kernel against the normal-equations oracle.
void criterion_1() {
  Check c;
  const auto t0 = Clock::now();
  std::size_t compared = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> idx(1, 10);
    std::normal_distribution<double> coef(0, 2), noise(0, 1.5);
    const std::array<double, 4> b{coef(rng), coef(rng), coef(rng), coef(rng)};
    std::vector<stats::DesignRow> x;
    std::vector<std::array<double, 4>> xo;
    std::vector<double> y;
    for (int r = 0; r < 40; ++r) {
      const int i = r == 0 ? -3 : (r == 1 ? 4 : (r % 2 ? idx(rng) : -idx(rng)));
      const auto row = oracle::design(i);
      x.push_back(its::design_row(i));
      xo.push_back(row);
      y.push_back(b[0] * row[0] + b[1] * row[1] + b[2] * row[2] + b[3] * row[3] + noise(rng));
    }
    const auto fit = stats::ols(x, y);
    const auto ref = oracle::ols(xo, y);
    for (int j = 0; j < 4; ++j) {
      c.expect(oracle::close(fit.beta[j], ref.beta[j], 1e-8), fmt("seed %d beta[%d]", int(seed), j));
      c.expect(oracle::close(fit.se[j], ref.se[j], 1e-8), fmt("seed %d se[%d]", int(seed), j));
      c.expect(std::fabs(fit.p[j] - ref.p[j]) < 1e-8, fmt("seed %d p[%d]", int(seed), j));
      ++compared;
    }
  }

  // Exact line and pure level shift, each on a duplicated four-point panel.
  auto exact = [&](auto f, std::array<double, 4> want, const char* name) {
    std::vector<stats::DesignRow> x;
    std::vector<double> y;
    for (int copy = 0; copy < 2; ++copy)
      for (int i : {-2, -1, 1, 2}) {
        x.push_back(its::design_row(i));
        y.push_back(f(i));
      }
    const auto fit = stats::ols(x, y);
    for (int j = 0; j < 4; ++j) c.expect(std::fabs(fit.beta[j] - want[j]) < 1e-12, fmt("%s beta[%d]", name, j));
  };
  exact([](int i) { return 2.0 + 3.0 * i; }, {2, 3, 0, 0}, "line");
  exact([](int i) { return i < 0 ? -1.0 : 1.0; }, {-1, 0, 2, 0}, "level shift");

  const double secs = seconds_since(t0);
  c.expect(secs < 1.0, fmt("runtime %.3f s >= 1 s", secs));
  c.note(fmt("%zu coefficient triples within 1e-8 of the oracle; exact cases recovered; %.3f s", compared, secs));
  report(1, "OLS kernel vs oracle", c);
}

// 2. Pooled fit equals the fit on per-index means on balanced panels.
void criterion_2() {
  Check c;
  double worst = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0, 1);
    std::vector<its::PanelRow> panel(60);
    for (auto& row : panel)
      for (int i = -10; i <= 10; ++i)
        if (i != 0) row.emplace_back(i, FeatureValue::of(0.5 + 0.02 * i - 0.3 * (i > 0) + noise(rng)));
    const auto pooled = its::fit_panel(FeatureKind::score, panel);
    const auto means = its::fit_means(pooled.series);
    for (int j = 0; j < 4; ++j) worst = std::max(worst, std::fabs(pooled.fit.beta[j] - means.beta[j]));
  }
  c.expect(worst <= 1e-9, fmt("max difference %.3g", worst));
  c.note(fmt("10 seeds, max |pooled - means| = %.3g", worst));
  report(2, "pooled vs means equivalence", c);
}

// 3. Selection and matching against brute-force rescans.
void criterion_3() {
  Check c;
  std::size_t its_total = 0, treat_total = 0, pair_total = 0, max_comments = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto its_cfg = world(seed, 80, 60, 0.05, 0.5);
    its_cfg.horizon_days = 10;
    its_cfg.user_active_days = 0;
    its_cfg.comment_rate_per_day = 8;
    const auto ci = synth::generate(its_cfg).corpus();
    max_comments = std::max(max_comments, ci.comments().size());
    for (int k : {3, 10}) {
      const auto sel = its::select_instances(ci, {k, 2});
      c.expect(sel == oracle::its_instances(ci, k), fmt("ITS selection seed %d k %d", int(seed), k));
      its_total += sel.size();
    }

    auto df_cfg = world(seed, 160, 60, 0.15, 0.5);
    df_cfg.user_active_days = 3;
    df_cfg.horizon_days = 7;
    df_cfg.same_tree_prob = 0.5;
    const auto cd = synth::generate(df_cfg).corpus();
    max_comments = std::max(max_comments, cd.comments().size());
    df::Options disjoint, loose;
    disjoint.disjoint_roles = true;
    loose.loose_control_window = true;
    for (auto s : {df::Scenario::non_affected, df::Scenario::affected})
      for (const auto& opts : {df::Options{}, disjoint, loose}) {
        const auto ts = df::select_treatments(cd, s, opts);
        c.expect(ts == oracle::treatments(cd, s), fmt("treatments seed %d", int(seed)));
        const auto m = df::match_controls(cd, ts, s, opts);
        const auto ref = oracle::match(cd, ts, s, opts);
        c.expect(m.pairs == ref.pairs && m.discarded_unmatched == ref.discarded_unmatched,
                 fmt("matching seed %d", int(seed)));
        const auto bad = oracle::check_pairs(cd, m, s, opts.loose_control_window);
        c.expect(bad.empty(), fmt("pair invariant seed %d: %s", int(seed), bad.c_str()));
        treat_total += ts.size();
        pair_total += m.pairs.size();
      }
  }
  c.expect(max_comments <= 10000, fmt("corpus of %zu comments exceeds 10,000", max_comments));
  c.expect(its_total > 0 && pair_total > 0, "oracle comparison had nothing to compare");
  c.note(fmt("5 seeds, largest corpus %zu comments: %zu ITS instances, %zu treatments, %zu pairs checked",
             max_comments, its_total, treat_total, pair_total));
  report(3, "selection and matching oracles", c);
}

// 4. Effect recovery and runtime.
void criterion_4() {
  Check c;
  {
    // Direct count: comments posted while a user has one or two removals landed.
    const auto corpus = synth::generate(world(4, 15000, 6000, 0.3, 0.5)).corpus();
    std::map<std::string, std::vector<std::int64_t>> landed;
    for (auto i : corpus.removal_comments()) landed[corpus.at(i).author].push_back(corpus.at(i).removal->removed_utc);
    for (auto& [u, v] : landed) std::sort(v.begin(), v.end());
    std::size_t n = 0, removed = 0;
    for (const auto& cm : corpus.comments()) {
      if (!cm.parent_id) continue;
      const auto it = landed.find(cm.author);
      if (it == landed.end() || cm.created_utc <= it->second[0]) continue;
      if (it->second.size() >= 3 && cm.created_utc > it->second[2]) continue;
      ++n;
      removed += cm.removal.has_value();
    }
    const double rate = static_cast<double>(removed) / static_cast<double>(n);
    c.expect(n >= 50000, fmt("only %zu comments in the post-removal state", n));
    c.expect(std::fabs(rate - 0.15) <= 0.01, fmt("post-removal noncompliance %.4f", rate));
    c.note(fmt("p0 = 0.3, delta = 0.5: post-removal noncompliance %.4f over %zu comments (target 0.15 +/- 0.01)",
               rate, n));
  }
  {
    // DF recovery of a 0.15 drop in the probability of posting problematic comments.
    const auto out = synth::generate(world(4, 15000, 6000, 0.15, 1.0));
    const auto corpus = out.corpus();
    const auto ts = df::select_treatments(corpus, df::Scenario::non_affected);
    const auto m = df::match_controls(corpus, ts, df::Scenario::non_affected);
    const auto r = df::test(corpus, m, df::Scenario::non_affected, FeatureKind::noncompliance,
                            FeatureConfig::defaults());
    const auto ev = synth::evaluate_estimators(corpus, out.truth);
    c.expect(r.n_pairs >= 1000, fmt("only %zu pairs", r.n_pairs));
    c.expect(std::fabs(r.did.estimate + 0.15) <= 0.05, fmt("DiD %.4f", r.did.estimate));
    c.note(fmt("p0 = 0.15, delta = 1.0 (%zu comments): DiD %.4f on %zu pairs (target -0.15 +/- 0.05); "
               "generator truth on the same slots %.4f",
               corpus.comments().size(), r.did.estimate, r.n_pairs, ev.df[0] ? ev.df[0]->truth : NAN));
  }
  {
    // Runtime: parse, ITS and both DF scenarios on a ~100k-comment corpus.
    const auto out = synth::generate(world(40, 2500, 1000, 0.3, 0.5));
    std::ostringstream cs, rs;
    for (const auto& cm : out.comments) cs << to_json(cm).dump() << '\n';
    for (const auto& r : out.removals) rs << to_json(r).dump() << '\n';
    const auto t0 = Clock::now();
    const auto corpus = parse_corpus(cs.str(), rs.str());
    const auto inst = its::select_instances(corpus);
    const auto rep = its::fit(corpus, inst, FeatureKind::noncompliance, FeatureConfig::defaults());
    std::size_t pairs = 0;
    for (auto s : {df::Scenario::non_affected, df::Scenario::affected}) {
      const auto m = df::match_controls(corpus, df::select_treatments(corpus, s), s);
      pairs += df::test(corpus, m, s, FeatureKind::noncompliance, FeatureConfig::defaults()).n_pairs;
    }
    const double secs = seconds_since(t0);
    c.expect(corpus.comments().size() >= 100000, fmt("runtime corpus has %zu comments", corpus.comments().size()));
    c.expect(secs < 60, fmt("pipeline took %.1f s", secs));
    c.note(fmt("pipeline on %zu comments (%zu ITS instances, %zu DF pairs): %.2f s", corpus.comments().size(),
               rep.n_instances, pairs, secs));
  }
  report(4, "effect recovery", c);
}

// 5. Null calibration of the DiD test.
void criterion_5() {
  Check c;
  const auto t0 = Clock::now();
  const auto cal = synth::null_calibration(world(1, 300, 150, 0.05, 0), 500, 1, df::Scenario::non_affected, 0.05,
                                           {}, thread_budget());
  const double secs = seconds_since(t0);
  c.expect(cal.skipped == 0, fmt("%zu seeds had too few pairs", cal.skipped));
  c.expect(std::fabs(cal.rejection_rate - 0.05) <= 0.03, fmt("rejection rate %.3f", cal.rejection_rate));
  c.expect(cal.balance_ok_rate >= 0.90, fmt("balance non-significant in %.3f", cal.balance_ok_rate));
  std::size_t pairs = 0;
  for (const auto& r : cal.runs) pairs += r.n_pairs;
  c.note(fmt("500 seeds (mean %.0f pairs): rejection %.3f (target 0.05 +/- 0.03), balance ok %.3f (>= 0.90), "
             "mean DiD %.4f; %.1f s",
             static_cast<double>(pairs) / std::max<std::size_t>(1, cal.runs.size()), cal.rejection_rate,
             cal.balance_ok_rate, cal.mean_did, secs));
  report(5, "null calibration", c);
}

// 6. Drift-only world: ITS finds an effect, DF does not.
void criterion_6() {
  Check c;
  std::size_t its_sig = 0, df_close = 0;
  double did_sum = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto cfg = world(seed, 5000, 2500, 0.15, 0);
    cfg.drift.noncompliance = -0.005;
    cfg.ban_after = 0;
    cfg.churn_prob = 0;
    const auto out = synth::generate(cfg);
    const auto ev = synth::evaluate_estimators(out.corpus(), out.truth);
    if (!ev.its || !ev.df[0]) {
      c.expect(false, fmt("seed %d produced no estimate", int(seed)));
      continue;
    }
    const bool sig = ev.its->p && *ev.its->p < 0.05;
    its_sig += sig;
    did_sum += ev.df[0]->estimate;
    df_close += std::fabs(ev.df[0]->estimate) <= 0.02;
    c.note(fmt("seed %2d: ITS b2 %+.4f (p %.2g, n %zu); DF DiD %+.4f (p %.2g, %zu pairs)", int(seed),
               ev.its->estimate, ev.its->p.value_or(NAN), ev.its->n, ev.df[0]->estimate, ev.df[0]->p.value_or(NAN),
               ev.df[0]->n));
  }
  {
    // Reference: the same world without drift. A significant b2 here means the
    // ITS signal is driven by instance selection rather than by the drift.
    auto cfg = world(1, 5000, 2500, 0.15, 0);
    cfg.ban_after = 0;
    cfg.churn_prob = 0;
    const auto out = synth::generate(cfg);
    const auto ev = synth::evaluate_estimators(out.corpus(), out.truth);
    if (ev.its)
      c.note(fmt("reference without drift, seed 1: ITS b2 %+.4f (p %.2g)", ev.its->estimate,
                 ev.its->p.value_or(NAN)));
  }
  const double mean_did = did_sum / 10;
  c.expect(its_sig == 10, fmt("ITS b2 significant in %zu of 10 seeds", its_sig));
  c.expect(std::fabs(mean_did) <= 0.02, fmt("mean DF DiD %.4f", mean_did));
  c.note(fmt("ITS significant in %zu/10; mean DF DiD %+.4f (target 0 +/- 0.02); %zu/10 seeds individually within "
             "+/- 0.02",
             its_sig, mean_did, df_close));
  report(6, "drift confound", c);
}

// 7. Delay distribution calibration.
void criterion_7() {
  Check c;
  auto cfg = world(7, 6000, 2000, 0.3, 0);
  cfg.ban_after = 0;
  const auto d = removal_delays(synth::generate(cfg).corpus());
  double above = 0;
  for (auto x : d) above += x > 7200;
  const double frac = above / static_cast<double>(d.size());
  c.expect(d.size() >= 10000, fmt("only %zu removals", d.size()));
  c.expect(std::fabs(frac - 0.40) <= 0.02, fmt("P(delay > 7200) = %.4f", frac));
  c.note(fmt("%zu removals, P(delay > 7200 s) = %.4f (target 0.40 +/- 0.02)", d.size(), frac));
  report(7, "delay calibration", c);
}

// 8. Public dataset counts, when supplied.
void criterion_8() {
  const char* comments = std::getenv("MODCAUSAL_CMV_COMMENTS");
  const char* removals = std::getenv("MODCAUSAL_CMV_REMOVALS");
  if (!comments) {
    std::cout << "SKIP criterion 8: dataset counts (set MODCAUSAL_CMV_COMMENTS and MODCAUSAL_CMV_REMOVALS)\n";
    return;
  }
  Check c;
  std::vector<const char*> argv{"modcausal", "ingest-check", "--comments", comments, "--json"};
  if (removals) {
    argv.push_back("--removals");
    argv.push_back(removals);
  }
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  c.expect(code == 0, "ingest-check failed: " + err.str());
  if (code == 0) {
    const auto j = nlohmann::json::parse(out.str());
    auto want = [&](const char* key, std::size_t v) {
      const auto got = j.at(key).get<std::size_t>();
      c.expect(got == v, fmt("%s = %zu, expected %zu", key, got, v));
      c.note(fmt("%s %zu", key, got));
    };
    want("trees", 73047);
    want("comments", 4176818);
    if (removals) {
      want("removals", 22788);
      want("moderators", 43);
      want("affected_users", 12481);
      want("affected_trees", 8463);
    }
  }
  report(8, "dataset counts", c);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// 9. Byte-identical reruns of every subcommand through the installed binary.
void criterion_9() {
  Check c;
  const auto root = fs::temp_directory_path() / "modcausal_acceptance_9";
  fs::remove_all(root);
  fs::create_directories(root);
  {
    auto cfg = world(9, 400, 200, 0.2, 0.5);
    std::ofstream(root / "config.json") << synth::to_json(cfg).dump();
  }
  const std::string bin = MODCAUSAL_CLI_PATH;
  std::size_t files = 0;
  // Both runs use the same paths so that their inputs are identical; each
  // result is moved aside afterwards.
  for (const char* run : {"a", "b"}) {
    const auto dir = root / "run";
    const std::string d = dir.string(), s = (dir / "synth").string();
    const std::string data = " --comments " + s + "/comments.jsonl --removals " + s + "/removals.jsonl";
    // The second run uses a different worker count; output must not depend on it.
    const std::string env = std::string("MODCAUSAL_THREADS=") + (run[0] == 'a' ? "1" : "3") + " ";
    const std::vector<std::string> cmds{
        "synth --config " + (root / "config.json").string() + " --out " + s,
        "ingest-check --json" + data,
        "its" + data + " --feature noncompliance --feature word_count --k 5 --out " + d + "/its",
        "df" + data + " --feature noncompliance --feature score --out " + d + "/df",
        "report" + data + " --hate " + s + "/hate_lexicon.txt --k 5 --out " + d + "/report",
        "validate --dir " + s + " --k 5 --null-seeds 8 --out " + d + "/validate",
    };
    for (std::size_t i = 0; i < cmds.size(); ++i) {
      const auto& cmd = cmds[i];
      const std::string redirect =
          " > " + d + "/stdout_" + std::to_string(i) + ".txt 2>>" + (root / "stderr.log").string();
      fs::create_directories(dir);
      const int raw = std::system((env + bin + " " + cmd + redirect).c_str());
      c.expect(WIFEXITED(raw) && WEXITSTATUS(raw) == 0, "command failed: " + cmd);
    }
    fs::rename(dir, root / run);
  }
  for (const auto& f : fs::recursive_directory_iterator(root / "a")) {
    if (!f.is_regular_file()) continue;
    const auto rel = fs::relative(f.path(), root / "a");
    const auto other = root / "b" / rel;
    c.expect(fs::exists(other) && slurp(f.path()) == slurp(other), "differs: " + rel.string());
    ++files;
  }
  std::size_t files_b = 0;
  for (const auto& f : fs::recursive_directory_iterator(root / "b")) files_b += f.is_regular_file();
  c.expect(files == files_b, "runs produced different file sets");
  c.expect(files > 20, fmt("only %zu files compared", files));
  c.note(fmt("%zu output files byte-identical across two runs (1 vs 3 worker threads)", files));
  if (c.failures.empty()) fs::remove_all(root);
  report(9, "determinism", c);
}

} // namespace

int main() {
  const auto t0 = Clock::now();
  const std::vector<void (*)()> criteria{criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
                                         criterion_6, criterion_7, criterion_8, criterion_9};
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    try {
      criteria[i]();
    } catch (const std::exception& e) {
      ++n_failed;
      std::cout << "FAIL criterion " << i + 1 << ": exception: " << e.what() << '\n';
    }
  }
  std::cout << fmt("acceptance: %d failed, total %.1f s\n", n_failed, seconds_since(t0));
  return n_failed == 0 ? 0 : 1;
}
