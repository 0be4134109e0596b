#pragma once

#include <optional>
#include <stdexcept>
#include <variant>
#include <vector>

#include "mmc/diagram.hpp"

// Movie events. Every event carries a complete site binding, so application
// is deterministic. Fresh identifiers for structure an event creates are
// either given explicitly (Birth) or allocated as max+1 in a documented
// order.
namespace mmc {

struct BirthEvent {
  GlobalFace at;      // region the circle appears in
  int orient = +1;    // drawn orientation of the new loop
  LoopId loop;        // explicit fresh ids
  ComponentId comp;
  BasepointId bp;
};

struct DeathEvent {
  LoopId loop;  // innermost (empty interior), exactly one basepoint
};

// Move a basepoint `steps` combinatorial steps along its component
// (positive: with the orientation). One step passes one crossing end or one
// neighbouring basepoint; on a bare loop one step is a full revolution.
struct SlideEvent {
  BasepointId bp;
  int steps = 0;
};

struct R1AddEvent {
  ArcRef at;      // kink position; bulges into the region on this side
  int chir = +1;  // +1: the first passage (strand order) crosses over
};

struct R1RemoveEvent {
  ArcSide face;  // any arc-side of the monogon face
};

struct R2AddEvent {
  ArcRef a, b;    // two arcs bounding one common region
  bool a_over = true;
  std::vector<PieceKey> carry;  // pieces moved into the part swept a -> b
};

struct R2RemoveEvent {
  ArcSide face;  // any arc-side of the bigon face
};

struct R3Event {
  ArcSide face;     // any arc-side of the trigon face
  int variant = 0;  // oriented pattern tag 0..7, validated against the site
};

struct SaddleEvent {
  ArcRef a, b;           // attach arcs on one common region's boundary
  bool coherent = true;  // validated against the derived value
  std::vector<PieceKey> carry;  // on a region split: pieces moved to the a->b part
};

using Event = std::variant<BirthEvent, DeathEvent, SlideEvent, R1AddEvent,
                           R1RemoveEvent, R2AddEvent, R2RemoveEvent, R3Event,
                           SaddleEvent>;

const char *event_name(const Event &e);

struct ApplyError : std::runtime_error {
  enum Kind { SiteMismatch, DisciplineViolation };
  Kind kind;
  ApplyError(Kind k, const std::string &msg)
      : std::runtime_error(msg), kind(k) {}
};

struct EventTrace {
  std::vector<BasepointId> bp_consumed, bp_emitted;
  // Component continuation for changed components; identity elsewhere.
  std::vector<std::pair<ComponentId, ComponentId>> comp_flow;
  std::vector<ComponentId> comp_born, comp_dead;
  // Strand succession for consumed elements, in strand order.
  std::map<ElemRef, std::vector<ElemRef>> succ;
  std::optional<bool> saddle_merge;
  std::optional<bool> saddle_coherent;
  // Survivors reversed by an incoherent band (the absorbed component).
  std::set<ElemRef> reversed;
};

struct ApplyResult {
  Diagram diagram;
  EventTrace trace;
};

// Apply one event to a structurally valid still. Throws ApplyError on a bad
// site binding or basepoint-discipline violation.
ApplyResult apply_event(const Diagram &d, const Event &e);

}  // namespace mmc
