#pragma once

#include <fstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "gclrec/graph.hpp"
#include "gclrec/rng.hpp"

namespace gclrec {

enum class Split : std::uint8_t { kUnassigned = 0, kTrain, kValid, kTest };

inline const char* split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kValid: return "valid";
    case Split::kTest: return "test";
    default: return "unassigned";
  }
}

/// Implicit-feedback records with dense user/item vocabularies and per-record
/// split tags. Vocabularies map raw string ids to contiguous indices in
/// first-appearance order.
struct InteractionSet {
  std::vector<std::string> user_ids;  // index -> raw id
  std::vector<std::string> item_ids;
  std::vector<EdgePair> records;      // dense indices, input order
  std::vector<Split> tags;            // aligned with records
  std::size_t duplicates_dropped = 0;

  Index n_users() const { return static_cast<Index>(user_ids.size()); }
  Index n_items() const { return static_cast<Index>(item_ids.size()); }
  Index n_records() const { return static_cast<Index>(records.size()); }

  std::vector<EdgePair> edges_of(Split s) const {
    std::vector<EdgePair> out;
    for (std::size_t r = 0; r < records.size(); ++r)
      if (tags[r] == s) out.push_back(records[r]);
    return out;
  }

  BipartiteGraph graph_of(Split s) const {
    return build_graph(edges_of(s), n_users(), n_items());
  }

  /// Per-user relevant item sets for one split, e.g. for evaluation.
  std::vector<std::vector<Index>> items_by_user(Split s) const {
    std::vector<std::vector<Index>> out(static_cast<std::size_t>(n_users()));
    for (std::size_t r = 0; r < records.size(); ++r)
      if (tags[r] == s)
        out[static_cast<std::size_t>(records[r].user)].push_back(records[r].item);
    for (auto& v : out) std::sort(v.begin(), v.end());
    return out;
  }
};

/// Parses `user<TAB>item` lines (extra trailing columns ignored, `#` comment
/// lines skipped). Duplicate (user, item) lines are dropped and counted.
inline InteractionSet load_interactions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_interactions: cannot open " + path);

  InteractionSet set;
  std::unordered_map<std::string, Index> user_index, item_index;
  std::unordered_set<std::uint64_t> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const std::size_t tab1 = line.find('\t');
    if (tab1 == std::string::npos || tab1 == 0)
      throw std::runtime_error("load_interactions: malformed row at line " +
                               std::to_string(line_no) + " of " + path);
    std::size_t tab2 = line.find('\t', tab1 + 1);
    if (tab2 == std::string::npos) tab2 = line.size();
    if (tab2 == tab1 + 1)
      throw std::runtime_error("load_interactions: malformed row at line " +
                               std::to_string(line_no) + " of " + path);
    const std::string user = line.substr(0, tab1);
    const std::string item = line.substr(tab1 + 1, tab2 - tab1 - 1);

    auto [uit, u_new] = user_index.try_emplace(user, set.n_users());
    if (u_new) set.user_ids.push_back(user);
    auto [iit, i_new] = item_index.try_emplace(item, set.n_items());
    if (i_new) set.item_ids.push_back(item);

    const std::uint64_t key =
        (static_cast<std::uint64_t>(uit->second) << 32) |
        static_cast<std::uint64_t>(iit->second);
    if (!seen.insert(key).second) {
      set.duplicates_dropped++;
      continue;
    }
    set.records.push_back({uit->second, iit->second});
  }
  if (set.records.empty())
    throw std::runtime_error("load_interactions: no records in " + path);
  set.tags.assign(set.records.size(), Split::kUnassigned);
  return set;
}

/// Writes records back as `user<TAB>item` plus a third `split` column.
inline void save_interactions(const InteractionSet& set, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_interactions: cannot write " + path);
  for (std::size_t r = 0; r < set.records.size(); ++r)
    out << set.user_ids[static_cast<std::size_t>(set.records[r].user)] << '\t'
        << set.item_ids[static_cast<std::size_t>(set.records[r].item)] << '\t'
        << split_name(set.tags[r]) << '\n';
}

/// Iteratively removes users and items with fewer than k interactions until
/// no such node remains, then re-densifies the vocabularies (survivors keep
/// their relative order). Split tags carry over.
inline InteractionSet filter_min_interactions(const InteractionSet& set, Index k) {
  if (k < 0) throw std::invalid_argument("filter_min_interactions: k < 0");

  std::vector<bool> keep(set.records.size(), true);
  std::vector<Index> udeg(static_cast<std::size_t>(set.n_users()), 0);
  std::vector<Index> ideg(static_cast<std::size_t>(set.n_items()), 0);
  for (const EdgePair& e : set.records) {
    udeg[static_cast<std::size_t>(e.user)]++;
    ideg[static_cast<std::size_t>(e.item)]++;
  }
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t r = 0; r < set.records.size(); ++r) {
      if (!keep[r]) continue;
      const EdgePair& e = set.records[r];
      if (udeg[static_cast<std::size_t>(e.user)] < k ||
          ideg[static_cast<std::size_t>(e.item)] < k) {
        keep[r] = false;
        udeg[static_cast<std::size_t>(e.user)]--;
        ideg[static_cast<std::size_t>(e.item)]--;
        changed = true;
      }
    }
  }

  InteractionSet out;
  std::vector<Index> user_map(static_cast<std::size_t>(set.n_users()), -1);
  std::vector<Index> item_map(static_cast<std::size_t>(set.n_items()), -1);
  for (std::size_t r = 0; r < set.records.size(); ++r) {
    if (!keep[r]) continue;
    const EdgePair& e = set.records[r];
    Index& u = user_map[static_cast<std::size_t>(e.user)];
    if (u < 0) {
      u = out.n_users();
      out.user_ids.push_back(set.user_ids[static_cast<std::size_t>(e.user)]);
    }
    Index& i = item_map[static_cast<std::size_t>(e.item)];
    if (i < 0) {
      i = out.n_items();
      out.item_ids.push_back(set.item_ids[static_cast<std::size_t>(e.item)]);
    }
    out.records.push_back({u, i});
    out.tags.push_back(set.tags[r]);
  }
  if (out.records.empty())
    throw std::runtime_error(
        "filter_min_interactions: no interactions survive k=" +
        std::to_string(k));
  return out;
}

enum class SplitMode { kPerUser, kGlobal };

struct SplitRatios {
  double train = 0.8;
  double valid = 0.1;
  double test = 0.1;
};

/// Assigns every record a train/valid/test tag. Per-user mode partitions each
/// user's records independently (floor rounding on the valid/test shares);
/// global mode partitions the whole record list. Either way every user with
/// at least one record keeps at least one training record.
inline InteractionSet split_interactions(const InteractionSet& set,
                                         SplitRatios ratios, std::uint64_t seed,
                                         SplitMode mode = SplitMode::kPerUser) {
  const double sum = ratios.train + ratios.valid + ratios.test;
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("split: ratios must sum to 1");

  InteractionSet out = set;
  Rng rng = derive_stream(seed, "split");

  if (mode == SplitMode::kPerUser) {
    std::vector<std::vector<std::size_t>> per_user(
        static_cast<std::size_t>(set.n_users()));
    for (std::size_t r = 0; r < set.records.size(); ++r)
      per_user[static_cast<std::size_t>(set.records[r].user)].push_back(r);
    for (auto& recs : per_user) {
      if (recs.empty()) continue;
      rng.shuffle(recs);
      const std::size_t n = recs.size();
      std::size_t n_valid = static_cast<std::size_t>(
          std::floor(ratios.valid * static_cast<double>(n)));
      std::size_t n_test = static_cast<std::size_t>(
          std::floor(ratios.test * static_cast<double>(n)));
      while (n_valid + n_test >= n && n_valid + n_test > 0)
        (n_test > 0 ? n_test : n_valid)--;  // train floor: keep >= 1
      std::size_t r = 0;
      for (; r < n - n_valid - n_test; ++r) out.tags[recs[r]] = Split::kTrain;
      for (; r < n - n_test; ++r) out.tags[recs[r]] = Split::kValid;
      for (; r < n; ++r) out.tags[recs[r]] = Split::kTest;
    }
  } else {
    std::vector<std::size_t> order(set.records.size());
    for (std::size_t r = 0; r < order.size(); ++r) order[r] = r;
    rng.shuffle(order);
    const std::size_t n = order.size();
    const std::size_t n_valid = static_cast<std::size_t>(
        std::floor(ratios.valid * static_cast<double>(n)));
    const std::size_t n_test = static_cast<std::size_t>(
        std::floor(ratios.test * static_cast<double>(n)));
    std::size_t r = 0;
    for (; r < n - n_valid - n_test; ++r) out.tags[order[r]] = Split::kTrain;
    for (; r < n - n_test; ++r) out.tags[order[r]] = Split::kValid;
    for (; r < n; ++r) out.tags[order[r]] = Split::kTest;
    // Train floor: promote one record for any user left without one.
    std::vector<bool> has_train(static_cast<std::size_t>(set.n_users()), false);
    for (std::size_t i = 0; i < out.records.size(); ++i)
      if (out.tags[i] == Split::kTrain)
        has_train[static_cast<std::size_t>(out.records[i].user)] = true;
    for (std::size_t i = 0; i < out.records.size(); ++i) {
      const std::size_t u = static_cast<std::size_t>(out.records[i].user);
      if (!has_train[u]) {
        out.tags[i] = Split::kTrain;
        has_train[u] = true;
      }
    }
  }
  return out;
}

/// One BPR training batch: aligned (user, positive item, negative item).
struct TrainBatch {
  std::vector<Index> users;
  std::vector<Index> pos_items;
  std::vector<Index> neg_items;
  std::size_t size() const { return users.size(); }
};

/// Draws the batch at [cursor, cursor+batch_size) of the epoch permutation,
/// sampling one uniform negative per positive by rejection against the
/// user's training items.
inline TrainBatch sample_batch(const BipartiteGraph& train_edges,
                               const std::vector<EdgePair>& positives,
                               const std::vector<std::size_t>& order,
                               std::size_t cursor, std::size_t batch_size,
                               Rng& rng) {
  if (cursor >= order.size())
    throw std::out_of_range("sample_batch: cursor past epoch end");
  const std::size_t end = std::min(order.size(), cursor + batch_size);
  TrainBatch batch;
  batch.users.reserve(end - cursor);
  batch.pos_items.reserve(end - cursor);
  batch.neg_items.reserve(end - cursor);
  const Index n_items = train_edges.n_items();
  for (std::size_t p = cursor; p < end; ++p) {
    const EdgePair& e = positives[order[p]];
    if (train_edges.user_degree_count(e.user) >= n_items)
      throw std::runtime_error("sample_batch: user " + std::to_string(e.user) +
                               " interacts with every item");
    Index neg;
    do {
      neg = static_cast<Index>(rng.below(static_cast<std::uint64_t>(n_items)));
    } while (train_edges.has_edge(e.user, neg));
    batch.users.push_back(e.user);
    batch.pos_items.push_back(e.item);
    batch.neg_items.push_back(neg);
  }
  return batch;
}

}  // namespace gclrec
