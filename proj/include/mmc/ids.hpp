#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <string>

// Identifier types for the still/movie structures. Each kind of element gets
// its own integer-backed id so they cannot be mixed up silently. Ids are
// opaque: operations never depend on numeric order except when allocating
// fresh ones (max+1) or printing sorted listings.
namespace mmc {

template <class Tag>
struct Id {
  std::uint32_t v = 0;
  auto operator<=>(const Id &) const = default;
  bool operator==(const Id &) const = default;
};

struct CrossingTag {};
struct EdgeTag {};
struct LoopTag {};
struct BasepointTag {};
struct ComponentTag {};

using CrossingId = Id<CrossingTag>;
using EdgeId = Id<EdgeTag>;
using LoopId = Id<LoopTag>;
using BasepointId = Id<BasepointTag>;
using ComponentId = Id<ComponentTag>;

// A dart is one of the four strand ends meeting a crossing, named by its
// slot in the counterclockwise rotation. Slots 0 and 2 carry the strand
// that passes under; slots 1 and 3 the strand that passes over.
struct Dart {
  CrossingId c;
  int slot = 0;  // 0..3
  auto operator<=>(const Dart &) const = default;
  bool operator==(const Dart &) const = default;
};

inline std::string show(CrossingId i) { return "c" + std::to_string(i.v); }
inline std::string show(EdgeId i) { return "e" + std::to_string(i.v); }
inline std::string show(LoopId i) { return "o" + std::to_string(i.v); }
inline std::string show(BasepointId i) { return "b" + std::to_string(i.v); }
inline std::string show(ComponentId i) { return "k" + std::to_string(i.v); }

}  // namespace mmc

template <class Tag>
struct std::hash<mmc::Id<Tag>> {
  size_t operator()(const mmc::Id<Tag> &i) const noexcept { return i.v; }
};
