#ifndef MODCAUSAL_TESTS_FIXTURES_HPP
#define MODCAUSAL_TESTS_FIXTURES_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "modcausal/modcausal.hpp"

namespace fixture {

using namespace modcausal;

/// Hand-built corpora. Replies inherit the tree of their parent.
struct Builder {
  std::vector<Comment> comments;
  std::vector<RemovalRecord> removals;

  Builder& root(const std::string& id, const std::string& author, std::int64_t t) {
    comments.push_back(Comment{id, id, std::nullopt, author, t, "root post", 0, false, std::nullopt});
    return *this;
  }
  Builder& reply(const std::string& id, const std::string& parent, const std::string& author, std::int64_t t,
                 const std::string& body = "some words here", std::int64_t score = 1, bool delta = false) {
    std::string tree;
    for (const auto& c : comments)
      if (c.id == parent) tree = c.tree_id;
    comments.push_back(Comment{id, tree, parent, author, t, body, score, delta, std::nullopt});
    return *this;
  }
  Builder& remove(const std::string& id, std::int64_t t, const std::string& mod = "mod") {
    removals.push_back(RemovalRecord{id, t, mod, "R1", "rule one"});
    return *this;
  }
  Corpus build() const { return build_corpus(comments, removals); }
};

/// Small dense world for oracle comparisons.
inline synth::SynthConfig small_world(std::uint64_t seed, int users = 60, int trees = 40, double p0 = 0.15) {
  synth::SynthConfig c;
  c.seed = seed;
  c.n_users = users;
  c.n_trees = trees;
  c.comment_rate_per_day = 20;
  c.horizon_days = 7;
  c.user_active_days = 3;
  c.p0 = p0;
  c.delta = 0.5;
  c.same_tree_prob = 0.3;
  return c;
}

} // namespace fixture

#endif // MODCAUSAL_TESTS_FIXTURES_HPP
