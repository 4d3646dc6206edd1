#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "georel/geo.hpp"
#include "georel/ids.hpp"

namespace georel {

struct GeoContext {
  std::string id;
  std::string name;
  BoundingBox region;
};

/// One implicit-feedback observation: `user` selected `item` at `location`.
struct EventRecord {
  std::string user;
  std::string item;
  Coordinate location;
  std::optional<std::string> context;
  std::optional<std::int64_t> timestamp;
};

/// One (user, context, item) fact. `count` is the number of events collapsed into
/// the triple.
struct Triple {
  UserId user;
  ContextId context;
  ItemId item;
  std::uint32_t count{1};

  friend bool operator==(const Triple& a, const Triple& b) {
    return a.user == b.user && a.context == b.context && a.item == b.item;
  }
};

inline bool triple_less(const Triple& a, const Triple& b) {
  if (a.user != b.user) return a.user < b.user;
  if (a.context != b.context) return a.context < b.context;
  return a.item < b.item;
}

/// Identifier tables and static geometry shared by a dataset and every
/// training subset derived from it, so ids agree across splits.
struct Vocabulary {
  Interner<UserId> users;
  Interner<ItemId> items;
  Interner<ContextId> contexts;
  std::vector<GeoContext> context_info;  // by ContextId
  std::vector<Coordinate> item_location;  // by ItemId, first observed

  ContextId add_context(const GeoContext& g) {
    if (!g.region.is_valid())
      throw std::invalid_argument("invalid region for context '" + g.id + "'");
    if (contexts.find(g.id))
      throw std::invalid_argument("duplicate context '" + g.id + "'");
    const ContextId id = contexts.intern(g.id);
    context_info.push_back(g);
    return id;
  }

  ItemId add_item(std::string_view name, const Coordinate& where) {
    const ItemId id = items.intern(name);
    if (id.index() == item_location.size()) item_location.push_back(where);
    return id;
  }
};

/// The (user, context, item) relation with CSR-style indexes. Immutable once built.
class Dataset {
 public:
  Dataset() : Dataset(std::make_shared<Vocabulary>(), {}) {}

  Dataset(std::shared_ptr<const Vocabulary> vocabulary,
          std::vector<Triple> triples)
      : vocab_(std::move(vocabulary)), triples_(std::move(triples)) {
    build();
  }

  const Vocabulary& vocabulary() const { return *vocab_; }
  const std::shared_ptr<const Vocabulary>& shared_vocabulary() const {
    return vocab_;
  }

  std::size_t num_users() const { return vocab_->users.size(); }
  std::size_t num_items() const { return vocab_->items.size(); }
  std::size_t num_contexts() const { return vocab_->contexts.size(); }

  /// Sorted by (user, context, item); duplicates merged.
  std::span<const Triple> triples() const { return triples_; }

  std::uint64_t event_count() const {
    std::uint64_t n = 0;
    for (const auto& t : triples_) n += t.count;
    return n;
  }

  std::span<const Triple> triples_of(UserId u, ContextId g) const {
    const auto [lo, hi] = user_range(u, g);
    return std::span<const Triple>(triples_).subspan(lo, hi - lo);
  }

  /// I_{u,g}, ascending.
  std::span<const ItemId> items_of(UserId u, ContextId g) const {
    const auto [lo, hi] = user_range(u, g);
    return std::span<const ItemId>(triple_items_).subspan(lo, hi - lo);
  }

  /// Items selected in the context, ascending.
  std::span<const ItemId> items_in(ContextId g) const {
    if (g.index() >= context_items_.size()) return {};
    return context_items_[g.index()];
  }

  /// Users with at least one triple in `g`, ascending.
  std::span<const UserId> users_in(ContextId g) const {
    if (g.index() >= context_users_.size()) return {};
    return context_users_[g.index()];
  }

  /// Contexts in which `u` has triples, ascending.
  std::span<const ContextId> contexts_of(UserId u) const {
    if (u.index() >= user_contexts_.size()) return {};
    return user_contexts_[u.index()];
  }

  /// Number of distinct users with a triple on `i` in any context.
  std::size_t popularity(ItemId i) const {
    return i.index() < popularity_.size() ? popularity_[i.index()] : 0;
  }

  const Coordinate& location(ItemId i) const {
    return vocab_->item_location.at(i.index());
  }
  const GeoContext& context(ContextId g) const {
    return vocab_->context_info.at(g.index());
  }

  /// Same vocabulary, keeping only triples for which `keep` is true.
  template <class Pred>
  Dataset filtered(Pred keep) const {
    std::vector<Triple> kept;
    kept.reserve(triples_.size());
    for (const auto& t : triples_)
      if (keep(t)) kept.push_back(t);
    return Dataset(vocab_, std::move(kept));
  }

 private:
  std::pair<std::size_t, std::size_t> user_range(UserId u,
                                                  ContextId g) const {
    if (u.index() + 1 >= user_offset_.size()) return {0, 0};
    const auto first = triples_.begin() + user_offset_[u.index()];
    const auto last = triples_.begin() + user_offset_[u.index() + 1];
    const auto lo = std::lower_bound(
        first, last, g, [](const Triple& t, ContextId c) { return t.context < c; });
    const auto hi = std::upper_bound(
        lo, last, g, [](ContextId c, const Triple& t) { return c < t.context; });
    return {static_cast<std::size_t>(lo - triples_.begin()),
            static_cast<std::size_t>(hi - triples_.begin())};
  }

  void build() {
    std::sort(triples_.begin(), triples_.end(), triple_less);
    std::vector<Triple> merged;
    merged.reserve(triples_.size());
    for (const auto& t : triples_) {
      if (!merged.empty() && merged.back() == t)
        merged.back().count += t.count;
      else
        merged.push_back(t);
    }
    triples_ = std::move(merged);

    const std::size_t n_users = vocab_->users.size();
    const std::size_t n_contexts = vocab_->contexts.size();
    const std::size_t n_items = vocab_->items.size();
    user_offset_.assign(n_users + 1, 0);
    context_items_.assign(n_contexts, {});
    context_users_.assign(n_contexts, {});
    user_contexts_.assign(n_users, {});
    popularity_.assign(n_items, 0);
    triple_items_.clear();
    triple_items_.reserve(triples_.size());

    std::vector<UserId> last_user_of_item(n_items);
    for (const auto& t : triples_) {
      if (t.user.index() >= n_users || t.context.index() >= n_contexts ||
          t.item.index() >= n_items)
        throw std::out_of_range("triple references an unknown id");
      ++user_offset_[t.user.index() + 1];
      triple_items_.push_back(t.item);
      context_items_[t.context.index()].push_back(t.item);
      auto& users = context_users_[t.context.index()];
      if (users.empty() || users.back() != t.user) users.push_back(t.user);
      auto& contexts = user_contexts_[t.user.index()];
      if (contexts.empty() || contexts.back() != t.context)
        contexts.push_back(t.context);
      // triples arrive grouped by user, so one marker per item suffices
      if (last_user_of_item[t.item.index()] != t.user) {
        last_user_of_item[t.item.index()] = t.user;
        ++popularity_[t.item.index()];
      }
    }
    for (std::size_t u = 0; u < n_users; ++u)
      user_offset_[u + 1] += user_offset_[u];
    for (auto& items : context_items_) {
      std::sort(items.begin(), items.end());
      items.erase(std::unique(items.begin(), items.end()), items.end());
    }
  }

  std::shared_ptr<const Vocabulary> vocab_;
  std::vector<Triple> triples_;
  std::vector<ItemId> triple_items_;
  std::vector<std::size_t> user_offset_;
  std::vector<std::vector<ItemId>> context_items_;
  std::vector<std::vector<UserId>> context_users_;
  std::vector<std::vector<ContextId>> user_contexts_;
  std::vector<std::size_t> popularity_;
};

struct IngestResult {
  Dataset dataset;
  // One line per rejected record.
  std::vector<std::string> diagnostics;
};

/// Interns identifiers, resolves each event's context and collapses
/// duplicate (user, context, item) triples into counts. Events that cannot
/// be placed in exactly one context are rejected with a diagnostic.
template <class Events>
IngestResult ingest(const Events& events, std::span<const GeoContext> contexts) {
  auto vocab = std::make_shared<Vocabulary>();
  for (const auto& g : contexts) vocab->add_context(g);

  IngestResult result;
  std::vector<Triple> triples;
  std::size_t record = 0;
  for (const EventRecord& e : events) {
    ++record;
    auto reject = [&](const std::string& why) {
      result.diagnostics.push_back("record " + std::to_string(record) +
                                   ": " + why);
    };
    if (!is_valid(e.location)) {
      reject("coordinate out of range");
      continue;
    }
    if (e.user.empty() || e.item.empty()) {
      reject("missing user or item id");
      continue;
    }
    ContextId context;
    if (e.context && !e.context->empty()) {
      auto found = vocab->contexts.find(*e.context);
      if (!found) {
        reject("unknown context '" + *e.context + "'");
        continue;
      }
      context = *found;
    } else {
      std::size_t hits = 0;
      for (std::size_t g = 0; g < vocab->context_info.size(); ++g) {
        if (vocab->context_info[g].region.contains(e.location)) {
          ++hits;
          context = ContextId{g};
        }
      }
      if (hits != 1) {
        reject(hits == 0 ? "location lies in no context"
                         : "location lies in " + std::to_string(hits) +
                               " contexts");
        continue;
      }
    }
    const UserId user = vocab->users.intern(e.user);
    const ItemId item = vocab->add_item(e.item, e.location);
    triples.push_back({user, context, item, 1});
  }
  result.dataset = Dataset(std::move(vocab), std::move(triples));
  return result;
}

}  // namespace georel
