#pragma once

#include <array>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mmc/ids.hpp"

// Combinatorial planar link-diagram stills.
//
// A still is a disjoint union of connected pieces drawn in the plane. A piece
// is either a 4-valent plane graph (crossings joined by edges, encoded as a
// rotation system) or a single crossingless free loop. Faces of a piece are
// traced from the rotation system; the placement of pieces relative to each
// other is a nesting forest: every piece names the region that immediately
// contains it, and the unbounded region is the distinguished root.
namespace mmc {

struct EdgeEnd {
  EdgeId e;
  bool head = false;  // true: this slot holds the head (incoming) end
  auto operator<=>(const EdgeEnd &) const = default;
  bool operator==(const EdgeEnd &) const = default;
};

struct Crossing {
  CrossingId id;
  // Slot occupants in counterclockwise order. The strand through slots 0,2
  // passes under the strand through slots 1,3.
  std::array<EdgeEnd, 4> slots{};
};

struct Edge {
  EdgeId id;
  ComponentId comp;
  std::vector<BasepointId> bps;  // ordered tail -> head
};

struct FreeLoop {
  LoopId id;
  ComponentId comp;
  int orient = +1;               // +1: drawn counterclockwise (interior on the left)
  std::vector<BasepointId> bps;  // cyclic order along travel direction
};

// Reference to a strand-carrying element: an edge or a free loop.
struct ElemRef {
  bool isLoop = false;
  std::uint32_t id = 0;
  static ElemRef edge(EdgeId e) { return {false, e.v}; }
  static ElemRef loop(LoopId o) { return {true, o.v}; }
  EdgeId as_edge() const { return EdgeId{id}; }
  LoopId as_loop() const { return LoopId{id}; }
  auto operator<=>(const ElemRef &) const = default;
  bool operator==(const ElemRef &) const = default;
};

enum class Side : int { L = 0, R = 1 };
inline Side flip(Side s) { return s == Side::L ? Side::R : Side::L; }

// One side of an element, i.e. one arc of some face boundary. Equivalently a
// directed half-edge: (e, L) is traversed with the strand, (e, R) against it.
struct ArcSide {
  ElemRef elem;
  Side side = Side::L;
  auto operator<=>(const ArcSide &) const = default;
  bool operator==(const ArcSide &) const = default;
};

// A piece is named by its minimal element: the least edge id for a graph
// piece, the loop id for a free-loop piece.
struct PieceKey {
  bool isLoop = false;
  std::uint32_t id = 0;
  auto operator<=>(const PieceKey &) const = default;
  bool operator==(const PieceKey &) const = default;
};

// A region of the plane. Every bounded region is defined by the unique local
// face whose walk bounds it from outside of all pieces nested in it: for a
// graph piece any non-outer face, for a loop its interior side. The unbounded
// region is the root.
struct GlobalFace {
  bool root = true;
  ArcSide def{};  // minimal arc-side of the defining local face walk
  static GlobalFace Root() { return GlobalFace{}; }
  static GlobalFace of(ArcSide a) { return GlobalFace{false, a}; }
  auto operator<=>(const GlobalFace &) const = default;
  bool operator==(const GlobalFace &) const = default;
};

// Attach position on one side of an element: `gap` indexes the stretches
// between consecutive basepoints (edges: 0..#bps from the tail; loops:
// cyclic, gap g follows basepoint g; a bare loop has the single gap 0).
// `sub` orders attach points that land in the same gap, in strand direction.
struct ArcRef {
  ArcSide at;
  int gap = 0;
  int sub = 0;
  auto operator<=>(const ArcRef &) const = default;
  bool operator==(const ArcRef &) const = default;
};

struct ValidationReport {
  std::vector<std::string> problems;
  bool ok() const { return problems.empty(); }
};

struct Component {
  ComponentId id;
  std::vector<EdgeId> cycle;  // strand order, empty for a loop component
  std::optional<LoopId> loop;
};

// Derived caches, rebuilt by Diagram::reseal().
struct Derived;

struct Diagram {
  std::map<CrossingId, Crossing> crossings;
  std::map<EdgeId, Edge> edges;
  std::map<LoopId, FreeLoop> loops;
  // Hosting region per piece (graph pieces and loops alike).
  std::map<PieceKey, GlobalFace> host;
  // Outer local face per graph piece, named by its minimal arc-side. A loop's
  // outer side is determined by its orientation.
  std::map<PieceKey, ArcSide> outer;

  std::shared_ptr<const Derived> der;

  void reseal();
  const Derived &d() const;

  CrossingId fresh_crossing() const;
  EdgeId fresh_edge() const;
  LoopId fresh_loop() const;
  BasepointId fresh_basepoint() const;
  ComponentId fresh_component() const;

  bool operator==(const Diagram &o) const;
};

struct Face {
  std::vector<ArcSide> walk;  // cyclic, starts at the minimal arc-side
  ArcSide key() const { return walk.front(); }
};

struct Derived {
  // Edge end darts, from the crossings' slot tables.
  std::map<EdgeId, Dart> tail, head;
  // Piece membership.
  std::map<ElemRef, PieceKey> piece_of_elem;
  std::map<PieceKey, std::vector<ElemRef>> piece_elems;  // sorted
  // Faces of graph pieces (loop sides are implicit).
  std::vector<Face> faces;
  std::map<ArcSide, int> face_of_arc;  // every edge arc-side -> index into faces
  // Regions. global_faces is sorted: root first.
  std::vector<GlobalFace> global_faces;
  std::map<GlobalFace, std::vector<PieceKey>> hosted;  // pieces per region
  // Components.
  std::vector<Component> components;
  std::map<ComponentId, int> comp_index;
  std::map<BasepointId, ElemRef> bp_at;
};

// Structural well-formedness: slot/end bijection, strand orientation
// coherence at crossings, component-id consistency, basepoint placement
// uniqueness, nesting forest shape, and the per-piece Euler law V-E+F=2.
ValidationReport validate_diagram(const Diagram &d);

// Oriented component cycles. Throws std::invalid_argument on a malformed
// diagram.
std::vector<Component> components(const Diagram &d);

// Exactly one basepoint per component (and structural validity).
bool is_marking_valid_still(const Diagram &d);

// --- region helpers -------------------------------------------------------

// Local face key of an arc-side: minimal arc-side of its face walk.
ArcSide local_face_key(const Diagram &d, ArcSide a);
// The region an arc-side borders (resolves outer faces through the forest).
GlobalFace region_of(const Diagram &d, ArcSide a);
// Inner (region-defining) side of a loop.
Side loop_inner(const FreeLoop &l);
// Boundary circles of a region: one representative arc-side (the local face
// key) per circle. The defining circle comes first for bounded regions.
std::vector<ArcSide> region_boundary(const Diagram &d, GlobalFace g);
// True if the region bordered by `a` is a disk bounded by that walk alone:
// no other boundary circles and no hosted pieces.
bool region_is_empty_disk(const Diagram &d, ArcSide a);

PieceKey piece_key_of(const Diagram &d, ElemRef e);

// --- canonical form --------------------------------------------------------

// Label maps from a canonical traversal; used to transport bindings across
// isomorphic stills.
struct Labeling {
  std::map<CrossingId, int> crossing;
  std::map<EdgeId, int> edge;
  std::map<LoopId, int> loop;
  std::map<BasepointId, int> bp;
  std::map<ComponentId, int> comp;
};

// Canonical code: equal exactly for isomorphic basepointed plane structures
// (rotation, over/under, orientations, nesting and basepoint positions all
// preserved; identifiers ignored). Minimized over all starting flags.
std::string canonical_code(const Diagram &d);
Labeling canonical_labeling(const Diagram &d);

}  // namespace mmc
