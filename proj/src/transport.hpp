#pragma once

#include <optional>
#include <set>

#include "mmc/movie.hpp"

// Identifier transport between canonically equal stills. Rewrites splice a
// rebuilt window into a movie; the events after the window were written
// against the old still's identifiers and are rebound through the canonical
// isomorphism, one event at a time so implicitly allocated fresh ids stay in
// correspondence.
namespace mmc {

struct IdMap {
  std::map<CrossingId, CrossingId> crossing;
  std::map<EdgeId, EdgeId> edge;
  std::map<LoopId, LoopId> loop;
  std::map<BasepointId, BasepointId> bp;
  std::map<ComponentId, ComponentId> comp;

  ElemRef map_elem(ElemRef e) const;
  ArcSide map_arc(ArcSide a) const;
};

// The isomorphism x -> y obtained by composing canonical labelings. Throws
// std::logic_error when the canonical codes differ.
IdMap iso_between(const Diagram &x, const Diagram &y);

// Copy with every basepoint removed.
Diagram strip_bps(const Diagram &d);

// Rewrite an event's identifier references through `f`. Fresh ids the event
// introduces explicitly (Birth) are reallocated from `target`, the still the
// rebound event will be applied to.
Event rebind_event(const Event &e, const IdMap &f, const Diagram &target);

// Rebind a whole event suffix from the coordinates of `x` to those of `y`.
// Applies each original event to x and its rebound twin to y so later events
// see corresponding identifiers.
std::vector<Event> transport_tail(const std::vector<Event> &tail, Diagram x,
                                  Diagram y);

// Signed slide steps that move `bp` onto `target` (minimum magnitude, ties
// positive). 0 when already hosted there; nullopt when the walk never reaches
// the element (different component).
std::optional<int> steps_to_element(const Diagram &d, BasepointId bp,
                                    ElemRef target);

// Elements present in `after` but not in `before`.
std::set<ElemRef> created_elements(const Diagram &before, const Diagram &after);

// Component of the circle an element belongs to.
ComponentId comp_of_elem(const Diagram &d, ElemRef e);

// The unique basepoint of a component.
BasepointId bp_of_comp(const Diagram &d, ComponentId c);

}  // namespace mmc
