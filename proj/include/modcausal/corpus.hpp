#ifndef MODCAUSAL_CORPUS_HPP
#define MODCAUSAL_CORPUS_HPP

// In-memory discussion corpus: post trees, per-user timelines and removal
// annotations, built from two line-delimited JSON streams.

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "modcausal/error.hpp"

namespace modcausal {

/// Author placeholder used by dumps for deleted accounts.
inline constexpr std::string_view kDeletedAuthor = "[deleted]";

inline bool is_deleted_author(std::string_view author) {
  return author == kDeletedAuthor;
}

struct RemovalRecord {
  std::string comment_id;
  std::int64_t removed_utc = 0;
  std::string moderator;
  std::string rule;
  std::string description;

  friend bool operator==(const RemovalRecord&, const RemovalRecord&) = default;
};

struct Comment {
  std::string id;
  std::string tree_id;
  std::optional<std::string> parent_id; // absent for the root post
  std::string author;
  std::int64_t created_utc = 0;
  std::string body;
  std::int64_t score = 0;
  bool delta_from_op = false;
  std::optional<RemovalRecord> removal;

  bool is_root() const noexcept { return !parent_id.has_value(); }

  friend bool operator==(const Comment&, const Comment&) = default;
};

struct PostTree {
  std::string id;
  std::string op_author;
  std::size_t root = 0;              // index into Corpus::comments()
  std::vector<std::size_t> members;  // all nodes incl. root, in corpus order

  friend bool operator==(const PostTree&, const PostTree&) = default;
};

struct CorpusDiagnostics {
  std::vector<RemovalRecord> orphan_removals; // comment_id not present

  friend bool operator==(const CorpusDiagnostics&, const CorpusDiagnostics&) = default;
};

/// Dataset-level counts reported by ingest-check.
struct CorpusCounts {
  std::size_t trees = 0;
  std::size_t commenting_users = 0;
  std::size_t comments = 0;       // non-root nodes
  std::size_t removals = 0;       // every removal record, orphans included
  std::size_t orphan_removals = 0;
  std::size_t moderators = 0;
  std::size_t affected_users = 0; // authors with >= 1 joined removal
  std::size_t affected_trees = 0;
};

struct TimelineScope {
  enum class Kind { all, within_tree, excluding_tree };
  Kind kind = Kind::all;
  std::string tree_id;
  bool include_roots = false;

  static TimelineScope all() { return {}; }
  static TimelineScope within_tree(std::string id) {
    return {Kind::within_tree, std::move(id), false};
  }
  static TimelineScope excluding_tree(std::string id) {
    return {Kind::excluding_tree, std::move(id), false};
  }
  TimelineScope with_roots(bool on = true) const {
    auto s = *this;
    s.include_roots = on;
    return s;
  }
};

class Corpus;
Corpus build_corpus(std::vector<Comment> comments, std::vector<RemovalRecord> removals);

/// Immutable after construction. Comments are stored in canonical
/// (created_utc, id) order so that input line order never matters.
class Corpus {
public:
  Corpus() = default;

  std::span<const Comment> comments() const noexcept { return comments_; }
  std::span<const PostTree> trees() const noexcept { return trees_; }
  /// Joined removals, sorted by (removed_utc, comment_id).
  std::span<const std::size_t> removal_comments() const noexcept { return removal_order_; }
  const CorpusDiagnostics& diagnostics() const noexcept { return diagnostics_; }
  const std::set<std::string>& moderators() const noexcept { return moderators_; }

  std::optional<std::size_t> find(std::string_view id) const {
    auto it = by_id_.find(std::string(id));
    if (it == by_id_.end()) return std::nullopt;
    return it->second;
  }
  std::size_t index_of(std::string_view id) const {
    if (auto i = find(id)) return *i;
    throw LookupError("unknown comment id '" + std::string(id) + "'");
  }
  const Comment& comment(std::string_view id) const { return comments_[index_of(id)]; }
  const Comment& at(std::size_t index) const { return comments_.at(index); }

  std::size_t tree_index_of(std::size_t comment_index) const { return tree_of_.at(comment_index); }
  const PostTree& tree_of(std::size_t comment_index) const { return trees_[tree_of_.at(comment_index)]; }
  const PostTree& tree(std::string_view tree_id) const {
    auto it = tree_by_id_.find(std::string(tree_id));
    if (it == tree_by_id_.end())
      throw LookupError("unknown tree id '" + std::string(tree_id) + "'");
    return trees_[it->second];
  }

  int depth(std::size_t comment_index) const { return depth_.at(comment_index); }
  int depth(std::string_view id) const { return depth_[index_of(id)]; }

  /// Rank of this comment's removal among its author's removals ordered by
  /// removed_utc; 0 when the comment was not removed.
  int removal_ordinal(std::size_t comment_index) const { return ordinal_.at(comment_index); }

  bool is_moderator(std::string_view user) const {
    return moderators_.count(std::string(user)) > 0;
  }

  /// Non-root comments of `author`, sorted by (created_utc, id). Empty for
  /// "[deleted]" and unknown authors.
  std::span<const std::size_t> timeline(std::string_view author) const {
    auto it = timelines_.find(std::string(author));
    if (it == timelines_.end()) return {};
    return it->second;
  }

  /// Position of a non-root comment inside its author's timeline.
  std::optional<std::size_t> timeline_position(std::size_t comment_index) const {
    auto p = timeline_pos_.at(comment_index);
    if (p == npos) return std::nullopt;
    return p;
  }

  std::vector<const Comment*> user_timeline(std::string_view author,
                                            const TimelineScope& scope = {}) const;

  std::vector<std::string> authors() const {
    std::vector<std::string> out;
    out.reserve(timelines_.size());
    for (const auto& [a, _] : timelines_) out.push_back(a);
    std::sort(out.begin(), out.end());
    return out;
  }

  CorpusCounts counts() const;

  friend bool operator==(const Corpus& a, const Corpus& b) {
    return a.comments_ == b.comments_ && a.diagnostics_ == b.diagnostics_;
  }

private:
  friend Corpus build_corpus(std::vector<Comment>, std::vector<RemovalRecord>);
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  std::vector<Comment> comments_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::vector<PostTree> trees_;
  std::unordered_map<std::string, std::size_t> tree_by_id_;
  std::vector<std::size_t> tree_of_;
  std::vector<int> depth_;
  std::vector<int> ordinal_;
  std::vector<std::size_t> removal_order_;
  std::unordered_map<std::string, std::vector<std::size_t>> timelines_;
  std::unordered_map<std::string, std::vector<std::size_t>> root_posts_;
  std::vector<std::size_t> timeline_pos_;
  std::set<std::string> moderators_;
  CorpusDiagnostics diagnostics_;
};

namespace detail {

inline bool comment_order(const Comment& a, const Comment& b) {
  return std::tie(a.created_utc, a.id) < std::tie(b.created_utc, b.id);
}

} // namespace detail

/// Builds a corpus from records, enforcing every tree and removal invariant.
/// Removals whose comment is absent are kept as orphan diagnostics.
inline Corpus build_corpus(std::vector<Comment> comments, std::vector<RemovalRecord> removals) {
  Corpus c;
  for (auto& cm : comments) cm.removal.reset();
  std::sort(comments.begin(), comments.end(), detail::comment_order);
  c.comments_ = std::move(comments);
  const auto n = c.comments_.size();

  c.by_id_.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!c.by_id_.emplace(c.comments_[i].id, i).second)
      throw StructuralError("duplicate comment id '" + c.comments_[i].id + "'");
  }

  // Trees and parent links.
  c.tree_of_.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& cm = c.comments_[i];
    auto [it, inserted] = c.tree_by_id_.emplace(cm.tree_id, c.trees_.size());
    if (inserted) c.trees_.push_back(PostTree{cm.tree_id, {}, Corpus::npos, {}});
    auto& tree = c.trees_[it->second];
    tree.members.push_back(i);
    c.tree_of_[i] = it->second;
    if (cm.is_root()) {
      if (tree.root != Corpus::npos)
        throw StructuralError("tree '" + cm.tree_id + "' has more than one root");
      tree.root = i;
      tree.op_author = cm.author;
      if (cm.delta_from_op)
        throw StructuralError("root post '" + cm.id + "' cannot carry delta_from_op");
    }
  }
  for (const auto& t : c.trees_)
    if (t.root == Corpus::npos) throw StructuralError("tree '" + t.id + "' has no root post");

  std::vector<std::size_t> parent(n, Corpus::npos);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& cm = c.comments_[i];
    if (cm.is_root()) continue;
    auto it = c.by_id_.find(*cm.parent_id);
    if (it == c.by_id_.end())
      throw StructuralError("comment '" + cm.id + "' references unknown parent '" +
                            *cm.parent_id + "'");
    const auto& p = c.comments_[it->second];
    if (p.tree_id != cm.tree_id)
      throw StructuralError("comment '" + cm.id + "' and its parent are in different trees");
    if (cm.created_utc < p.created_utc)
      throw StructuralError("comment '" + cm.id + "' is older than its parent");
    parent[i] = it->second;
  }

  // Depth by iterative walk; a node seen twice on the current path is a cycle.
  c.depth_.assign(n, -1);
  std::vector<char> on_path(n, 0);
  std::vector<std::size_t> path;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t cur = i;
    path.clear();
    while (c.depth_[cur] < 0 && parent[cur] != Corpus::npos) {
      if (on_path[cur])
        throw StructuralError("cycle in parent links at comment '" + c.comments_[cur].id + "'");
      on_path[cur] = 1;
      path.push_back(cur);
      cur = parent[cur];
    }
    if (c.depth_[cur] < 0) {
      if (on_path[cur])
        throw StructuralError("cycle in parent links at comment '" + c.comments_[cur].id + "'");
      c.depth_[cur] = 0; // a root
    }
    int d = c.depth_[cur];
    for (auto it = path.rbegin(); it != path.rend(); ++it) {
      c.depth_[*it] = ++d;
      on_path[*it] = 0;
    }
  }

  // Timelines: canonical order already holds, so appending keeps them sorted.
  c.timeline_pos_.assign(n, Corpus::npos);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& cm = c.comments_[i];
    if (is_deleted_author(cm.author)) continue;
    if (cm.is_root()) {
      c.root_posts_[cm.author].push_back(i);
    } else {
      auto& tl = c.timelines_[cm.author];
      c.timeline_pos_[i] = tl.size();
      tl.push_back(i);
    }
  }

  // Removals.
  std::sort(removals.begin(), removals.end(), [](const auto& a, const auto& b) {
    return std::tie(a.removed_utc, a.comment_id) < std::tie(b.removed_utc, b.comment_id);
  });
  std::set<std::string> seen;
  for (auto& r : removals) {
    if (!seen.insert(r.comment_id).second)
      throw StructuralError("duplicate removal for comment '" + r.comment_id + "'");
    c.moderators_.insert(r.moderator);
    auto it = c.by_id_.find(r.comment_id);
    if (it == c.by_id_.end()) {
      c.diagnostics_.orphan_removals.push_back(std::move(r));
      continue;
    }
    auto& cm = c.comments_[it->second];
    if (r.removed_utc < cm.created_utc)
      throw StructuralError("removal of '" + r.comment_id + "' precedes the comment");
    c.removal_order_.push_back(it->second);
    cm.removal = std::move(r);
  }

  c.ordinal_.assign(n, 0);
  std::unordered_map<std::string, int> per_author;
  for (auto idx : c.removal_order_) c.ordinal_[idx] = ++per_author[c.comments_[idx].author];
  return c;
}

inline std::vector<const Comment*> Corpus::user_timeline(std::string_view author,
                                                         const TimelineScope& scope) const {
  std::vector<std::size_t> idx;
  auto tl = timeline(author);
  idx.assign(tl.begin(), tl.end());
  if (scope.include_roots) {
    if (auto it = root_posts_.find(std::string(author)); it != root_posts_.end()) {
      idx.insert(idx.end(), it->second.begin(), it->second.end());
      std::sort(idx.begin(), idx.end()); // corpus index order == (created_utc, id)
    }
  }
  std::vector<const Comment*> out;
  out.reserve(idx.size());
  for (auto i : idx) {
    const auto& cm = comments_[i];
    switch (scope.kind) {
    case TimelineScope::Kind::all: break;
    case TimelineScope::Kind::within_tree:
      if (cm.tree_id != scope.tree_id) continue;
      break;
    case TimelineScope::Kind::excluding_tree:
      if (cm.tree_id == scope.tree_id) continue;
      break;
    }
    out.push_back(&cm);
  }
  return out;
}

inline CorpusCounts Corpus::counts() const {
  CorpusCounts k;
  k.trees = trees_.size();
  k.commenting_users = timelines_.size();
  for (const auto& cm : comments_) k.comments += cm.is_root() ? 0 : 1;
  k.removals = removal_order_.size() + diagnostics_.orphan_removals.size();
  k.orphan_removals = diagnostics_.orphan_removals.size();
  k.moderators = moderators_.size();
  std::set<std::string_view> users;
  std::set<std::size_t> trees;
  for (auto i : removal_order_) {
    if (!is_deleted_author(comments_[i].author)) users.insert(comments_[i].author);
    trees.insert(tree_of_[i]);
  }
  k.affected_users = users.size();
  k.affected_trees = trees.size();
  return k;
}

// ---------------------------------------------------------------------------
// JSONL input / output

namespace detail {

template <class T>
T required(const nlohmann::json& j, const char* key, std::size_t line) {
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(line, std::string("missing field '") + key + "'");
  try {
    return it->template get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ParseError(line, std::string("field '") + key + "' has the wrong type");
  }
}

inline bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char ch) { return std::isspace(ch); });
}

template <class F>
void for_each_json_line(std::istream& in, F&& f) {
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (blank(line)) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(no, std::string("malformed JSON: ") + e.what());
    }
    if (!j.is_object()) throw ParseError(no, "record is not a JSON object");
    f(j, no);
  }
}

} // namespace detail

inline Comment comment_from_json(const nlohmann::json& j, std::size_t line = 0) {
  Comment c;
  c.id = detail::required<std::string>(j, "id", line);
  c.tree_id = detail::required<std::string>(j, "tree_id", line);
  if (auto it = j.find("parent_id"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) throw ParseError(line, "field 'parent_id' has the wrong type");
    c.parent_id = it->get<std::string>();
  }
  c.author = detail::required<std::string>(j, "author", line);
  c.created_utc = detail::required<std::int64_t>(j, "created_utc", line);
  c.body = detail::required<std::string>(j, "body", line);
  c.score = detail::required<std::int64_t>(j, "score", line);
  c.delta_from_op = detail::required<bool>(j, "delta_from_op", line);
  return c;
}

inline RemovalRecord removal_from_json(const nlohmann::json& j, std::size_t line = 0) {
  RemovalRecord r;
  r.comment_id = detail::required<std::string>(j, "comment_id", line);
  r.removed_utc = detail::required<std::int64_t>(j, "removed_utc", line);
  r.moderator = detail::required<std::string>(j, "moderator", line);
  r.rule = detail::required<std::string>(j, "rule", line);
  r.description = detail::required<std::string>(j, "description", line);
  return r;
}

inline nlohmann::ordered_json to_json(const Comment& c) {
  nlohmann::ordered_json j;
  j["id"] = c.id;
  j["tree_id"] = c.tree_id;
  j["parent_id"] = c.parent_id ? nlohmann::ordered_json(*c.parent_id) : nlohmann::ordered_json();
  j["author"] = c.author;
  j["created_utc"] = c.created_utc;
  j["body"] = c.body;
  j["score"] = c.score;
  j["delta_from_op"] = c.delta_from_op;
  return j;
}

inline nlohmann::ordered_json to_json(const RemovalRecord& r) {
  nlohmann::ordered_json j;
  j["comment_id"] = r.comment_id;
  j["removed_utc"] = r.removed_utc;
  j["moderator"] = r.moderator;
  j["rule"] = r.rule;
  j["description"] = r.description;
  return j;
}

inline std::vector<Comment> read_comments(std::istream& in) {
  std::vector<Comment> out;
  detail::for_each_json_line(in, [&](const nlohmann::json& j, std::size_t no) {
    out.push_back(comment_from_json(j, no));
  });
  return out;
}

inline std::vector<RemovalRecord> read_removals(std::istream& in) {
  std::vector<RemovalRecord> out;
  detail::for_each_json_line(in, [&](const nlohmann::json& j, std::size_t no) {
    out.push_back(removal_from_json(j, no));
  });
  return out;
}

inline Corpus parse_corpus(std::istream& comments, std::istream& removals) {
  auto cs = read_comments(comments);
  auto rs = read_removals(removals);
  return build_corpus(std::move(cs), std::move(rs));
}

inline Corpus parse_corpus(std::string_view comments_jsonl, std::string_view removals_jsonl) {
  std::istringstream c{std::string(comments_jsonl)};
  std::istringstream r{std::string(removals_jsonl)};
  return parse_corpus(c, r);
}

/// One comment per line in canonical order.
inline void write_comments(std::ostream& out, std::span<const Comment> comments) {
  for (const auto& c : comments) out << to_json(c).dump() << '\n';
}

inline void write_removals(std::ostream& out, std::span<const RemovalRecord> removals) {
  for (const auto& r : removals) out << to_json(r).dump() << '\n';
}

inline void write_comments(std::ostream& out, const Corpus& corpus) {
  write_comments(out, corpus.comments());
}

/// Joined removals in (removed_utc, comment_id) order, then orphans.
inline void write_removals(std::ostream& out, const Corpus& corpus) {
  for (auto i : corpus.removal_comments()) out << to_json(*corpus.at(i).removal).dump() << '\n';
  write_removals(out, corpus.diagnostics().orphan_removals);
}

// ---------------------------------------------------------------------------
// Descriptive analyses

/// Removal delays (removed_utc - created_utc) of joined removals, ascending.
inline std::vector<std::int64_t> removal_delays(const Corpus& corpus) {
  std::vector<std::int64_t> d;
  d.reserve(corpus.removal_comments().size());
  for (auto i : corpus.removal_comments()) {
    const auto& c = corpus.at(i);
    d.push_back(c.removal->removed_utc - c.created_utc);
  }
  std::sort(d.begin(), d.end());
  return d;
}

struct CdfPoint {
  std::int64_t delay = 0;
  double fraction = 0; // P(delay <= this value)
};

/// Empirical CDF of removal delays, one point per distinct delay.
inline std::vector<CdfPoint> delay_cdf(const Corpus& corpus) {
  auto d = removal_delays(corpus);
  std::vector<CdfPoint> out;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (i + 1 < d.size() && d[i + 1] == d[i]) continue;
    out.push_back({d[i], static_cast<double>(i + 1) / static_cast<double>(d.size())});
  }
  return out;
}

enum class Cohort { affected, other };
enum class Destination { same_tree, different_tree, community, nowhere };

inline constexpr std::string_view to_string(Cohort c) {
  return c == Cohort::affected ? "affected" : "other";
}

inline constexpr std::string_view to_string(Destination d) {
  switch (d) {
  case Destination::same_tree: return "same_tree";
  case Destination::different_tree: return "different_tree";
  case Destination::community: return "community";
  case Destination::nowhere: return "nowhere";
  }
  return "";
}

struct ReturnProfileCell {
  Cohort cohort;
  Destination destination;
  double fraction = 0;
  double se = 0; // binomial standard error
  std::size_t n = 0;
};

/// Where authors post after each of their comments, split by whether the
/// comment was the author's first or second removal.
inline std::vector<ReturnProfileCell> return_profile(const Corpus& corpus) {
  std::array<std::array<std::size_t, 4>, 2> hits{};
  std::array<std::size_t, 2> totals{};
  for (const auto& author : corpus.authors()) {
    auto tl = corpus.timeline(author);
    std::unordered_map<std::size_t, std::size_t> later_in_tree;
    std::size_t later = 0;
    for (auto it = tl.rbegin(); it != tl.rend(); ++it) {
      const auto idx = *it;
      const auto tree = corpus.tree_index_of(idx);
      const auto same = later_in_tree[tree];
      const bool s = same > 0;
      const bool d = later > same;
      const int ord = corpus.removal_ordinal(idx);
      const std::size_t cohort = (ord >= 1 && ord <= 2) ? 0 : 1;
      ++totals[cohort];
      hits[cohort][0] += s;
      hits[cohort][1] += d;
      hits[cohort][2] += (s || d);
      hits[cohort][3] += !(s || d);
      ++later_in_tree[tree];
      ++later;
    }
  }
  std::vector<ReturnProfileCell> out;
  for (std::size_t c = 0; c < 2; ++c) {
    for (std::size_t d = 0; d < 4; ++d) {
      ReturnProfileCell cell{c == 0 ? Cohort::affected : Cohort::other,
                             static_cast<Destination>(d), 0.0, 0.0, totals[c]};
      if (totals[c] > 0) {
        const double p = static_cast<double>(hits[c][d]) / static_cast<double>(totals[c]);
        cell.fraction = p;
        cell.se = std::sqrt(p * (1.0 - p) / static_cast<double>(totals[c]));
      }
      out.push_back(cell);
    }
  }
  return out;
}

} // namespace modcausal

#endif // MODCAUSAL_CORPUS_HPP
