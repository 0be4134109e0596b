#include "transport.hpp"

#include <stdexcept>

#include "mmc/marking.hpp"

namespace mmc {

ElemRef IdMap::map_elem(ElemRef e) const {
  if (e.isLoop) return ElemRef::loop(loop.at(e.as_loop()));
  return ElemRef::edge(edge.at(e.as_edge()));
}

ArcSide IdMap::map_arc(ArcSide a) const { return {map_elem(a.elem), a.side}; }

IdMap iso_between(const Diagram &x, const Diagram &y) {
  if (canonical_code(x) != canonical_code(y))
    throw std::logic_error("id transport between non-isomorphic stills");
  Labeling lx = canonical_labeling(x), ly = canonical_labeling(y);
  IdMap f;
  auto compose = [](const auto &fwd, const auto &rev, auto &out) {
    std::map<int, typename std::decay_t<decltype(rev)>::key_type> inv;
    for (const auto &[id, n] : rev) inv[n] = id;
    for (const auto &[id, n] : fwd) out[id] = inv.at(n);
  };
  compose(lx.crossing, ly.crossing, f.crossing);
  compose(lx.edge, ly.edge, f.edge);
  compose(lx.loop, ly.loop, f.loop);
  compose(lx.bp, ly.bp, f.bp);
  compose(lx.comp, ly.comp, f.comp);
  return f;
}

Diagram strip_bps(const Diagram &d) {
  Diagram out = d;
  for (auto &[id, e] : out.edges) e.bps.clear();
  for (auto &[id, l] : out.loops) l.bps.clear();
  out.reseal();
  return out;
}

namespace {

GlobalFace map_face(const GlobalFace &g, const IdMap &f, const Diagram &target) {
  if (g.root) return GlobalFace::Root();
  // Re-key: the image arc-side lies on the corresponding face walk, but the
  // minimal arc-side of that walk may be a different arc.
  return region_of(target, f.map_arc(g.def));
}

ArcRef map_ref(const ArcRef &r, const IdMap &f) {
  return {f.map_arc(r.at), r.gap, r.sub};
}

std::vector<PieceKey> map_carry(const std::vector<PieceKey> &carry,
                                const IdMap &f, const Diagram &target) {
  std::vector<PieceKey> out;
  for (PieceKey k : carry) {
    ElemRef e = k.isLoop ? ElemRef::loop(LoopId{k.id}) : ElemRef::edge(EdgeId{k.id});
    out.push_back(piece_key_of(target, f.map_elem(e)));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace

Event rebind_event(const Event &e, const IdMap &f, const Diagram &target) {
  struct V {
    const IdMap &f;
    const Diagram &target;
    Event operator()(const BirthEvent &b) const {
      return BirthEvent{map_face(b.at, f, target), b.orient,
                        target.fresh_loop(), target.fresh_component(),
                        target.fresh_basepoint()};
    }
    Event operator()(const DeathEvent &d) const {
      return DeathEvent{f.loop.at(d.loop)};
    }
    Event operator()(const SlideEvent &s) const {
      return SlideEvent{f.bp.at(s.bp), s.steps};
    }
    Event operator()(const R1AddEvent &r) const {
      return R1AddEvent{map_ref(r.at, f), r.chir};
    }
    Event operator()(const R1RemoveEvent &r) const {
      return R1RemoveEvent{f.map_arc(r.face)};
    }
    Event operator()(const R2AddEvent &r) const {
      return R2AddEvent{map_ref(r.a, f), map_ref(r.b, f), r.a_over,
                        map_carry(r.carry, f, target)};
    }
    Event operator()(const R2RemoveEvent &r) const {
      return R2RemoveEvent{f.map_arc(r.face)};
    }
    Event operator()(const R3Event &r) const {
      return R3Event{f.map_arc(r.face), r.variant};
    }
    Event operator()(const SaddleEvent &s) const {
      return SaddleEvent{map_ref(s.a, f), map_ref(s.b, f), s.coherent,
                         map_carry(s.carry, f, target)};
    }
  };
  return std::visit(V{f, target}, e);
}

std::vector<Event> transport_tail(const std::vector<Event> &tail, Diagram x,
                                  Diagram y) {
  std::vector<Event> out;
  out.reserve(tail.size());
  for (const Event &e : tail) {
    IdMap f = iso_between(x, y);
    Event e2 = rebind_event(e, f, y);
    x = apply_event(x, e).diagram;
    y = apply_event(y, e2).diagram;
    out.push_back(std::move(e2));
  }
  return out;
}

std::optional<int> steps_to_element(const Diagram &d, BasepointId bp,
                                    ElemRef target) {
  if (d.d().bp_at.at(bp) == target) return 0;
  ComponentId c = comp_of_elem(d, d.d().bp_at.at(bp));
  if (comp_of_elem(d, target) != c) return std::nullopt;
  int lap = lap_length(d, c);
  Diagram cur = d;
  for (int fwd = 1; fwd < lap; fwd++) {
    cur = apply_event(cur, SlideEvent{bp, +1}).diagram;
    if (cur.d().bp_at.at(bp) == target)
      return 2 * fwd <= lap ? fwd : fwd - lap;
  }
  return std::nullopt;
}

std::set<ElemRef> created_elements(const Diagram &before, const Diagram &after) {
  std::set<ElemRef> out;
  for (const auto &[id, e] : after.edges)
    if (!before.edges.count(id)) out.insert(ElemRef::edge(id));
  for (const auto &[id, l] : after.loops)
    if (!before.loops.count(id)) out.insert(ElemRef::loop(id));
  return out;
}

ComponentId comp_of_elem(const Diagram &d, ElemRef e) {
  return e.isLoop ? d.loops.at(e.as_loop()).comp : d.edges.at(e.as_edge()).comp;
}

BasepointId bp_of_comp(const Diagram &d, ComponentId c) {
  for (const auto &[b, e] : d.d().bp_at)
    if (comp_of_elem(d, e) == c) return b;
  throw std::logic_error("component has no basepoint");
}

}  // namespace mmc
