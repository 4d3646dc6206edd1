#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace georel {

/// Dense index tagged by the entity it names.
template <class Tag>
struct DenseId {
  using value_type = std::uint32_t;
  static constexpr value_type kInvalid = std::numeric_limits<value_type>::max();

  value_type value{kInvalid};

  constexpr DenseId() = default;
  constexpr explicit DenseId(std::size_t v)
      : value(static_cast<value_type>(v)) {}

  constexpr bool valid() const { return value != kInvalid; }
  constexpr std::size_t index() const { return value; }

  friend constexpr auto operator<=>(DenseId, DenseId) = default;
};

struct UserTag {};
struct ItemTag {};
struct ContextTag {};
struct UnitTag {};
struct NodeTag {};

using UserId = DenseId<UserTag>;
using ItemId = DenseId<ItemTag>;
using ContextId = DenseId<ContextTag>;
// A recommendation unit: a DBSCAN cluster or a raw item.
using UnitId = DenseId<UnitTag>;
// A partonomy node.
using NodeId = DenseId<NodeTag>;

/// Bijection between external string identifiers and dense ids, assigned in
/// order of first appearance.
template <class Id>
class Interner {
 public:
  Id intern(std::string_view name) {
    auto it = index_.find(std::string(name));
    if (it != index_.end()) return it->second;
    const Id id{names_.size()};
    names_.emplace_back(name);
    index_.emplace(names_.back(), id);
    return id;
  }

  std::optional<Id> find(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  const std::string& name(Id id) const { return names_.at(id.index()); }
  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, Id> index_;
};

}  // namespace georel

template <class Tag>
struct std::hash<georel::DenseId<Tag>> {
  std::size_t operator()(georel::DenseId<Tag> id) const noexcept {
    return std::hash<std::uint32_t>{}(id.value);
  }
};
