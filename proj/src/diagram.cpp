#include "mmc/diagram.hpp"

#include <algorithm>
#include <cassert>
#include <sstream>
#include <stdexcept>

namespace mmc {

namespace {

struct HalfEdge {
  EdgeId e;
  int dir;  // +1 with the strand, -1 against
  auto operator<=>(const HalfEdge &) const = default;
};

ArcSide as_arcside(HalfEdge h) {
  return ArcSide{ElemRef::edge(h.e), h.dir > 0 ? Side::L : Side::R};
}
HalfEdge as_halfedge(ArcSide a) {
  return HalfEdge{a.elem.as_edge(), a.side == Side::L ? +1 : -1};
}

struct UF {
  std::map<std::uint32_t, std::uint32_t> p;
  std::uint32_t find(std::uint32_t x) {
    auto it = p.find(x);
    if (it == p.end()) {
      p[x] = x;
      return x;
    }
    if (it->second == x) return x;
    return it->second = find(it->second);
  }
  void join(std::uint32_t a, std::uint32_t b) { p[find(a)] = find(b); }
};

}  // namespace

void Diagram::reseal() {
  auto dv = std::make_shared<Derived>();
  Derived &der = *dv;

  for (const auto &[cid, c] : crossings) {
    for (int s = 0; s < 4; s++) {
      const EdgeEnd &occ = c.slots[s];
      if (!edges.count(occ.e)) continue;
      (occ.head ? der.head : der.tail)[occ.e] = Dart{cid, s};
    }
  }

  // Pieces: crossings joined by edges; every edge of a crossing class belongs
  // to that class.
  UF uf;
  for (const auto &[eid, e] : edges) {
    auto t = der.tail.find(eid), h = der.head.find(eid);
    if (t != der.tail.end() && h != der.head.end())
      uf.join(t->second.c.v, h->second.c.v);
  }
  std::map<std::uint32_t, PieceKey> class_key;
  for (const auto &[eid, e] : edges) {
    auto t = der.tail.find(eid);
    if (t == der.tail.end()) continue;
    auto root = uf.find(t->second.c.v);
    auto it = class_key.find(root);
    if (it == class_key.end() || PieceKey{false, eid.v} < it->second)
      class_key[root] = PieceKey{false, eid.v};
  }
  for (const auto &[eid, e] : edges) {
    auto t = der.tail.find(eid);
    if (t == der.tail.end()) continue;
    PieceKey pk = class_key[uf.find(t->second.c.v)];
    der.piece_of_elem[ElemRef::edge(eid)] = pk;
    der.piece_elems[pk].push_back(ElemRef::edge(eid));
  }
  for (const auto &[oid, l] : loops) {
    PieceKey pk{true, oid.v};
    der.piece_of_elem[ElemRef::loop(oid)] = pk;
    der.piece_elems[pk].push_back(ElemRef::loop(oid));
  }

  // Faces: orbits of the left-face successor over directed half-edges.
  auto next_he = [&](HalfEdge h) -> std::optional<HalfEdge> {
    auto &ends = h.dir > 0 ? der.head : der.tail;
    auto it = ends.find(h.e);
    if (it == ends.end()) return std::nullopt;
    Dart arr = it->second;
    Dart dep{arr.c, (arr.slot + 3) & 3};
    auto cit = crossings.find(dep.c);
    if (cit == crossings.end()) return std::nullopt;
    const EdgeEnd &occ = cit->second.slots[dep.slot];
    if (!edges.count(occ.e)) return std::nullopt;
    return HalfEdge{occ.e, occ.head ? -1 : +1};
  };
  std::set<ArcSide> seen;
  for (const auto &[eid, e] : edges) {
    for (int dir : {+1, -1}) {
      HalfEdge h0{eid, dir};
      if (seen.count(as_arcside(h0))) continue;
      std::vector<ArcSide> walk;
      HalfEdge h = h0;
      bool closed = false;
      for (size_t guard = 0; guard <= 4 * edges.size() + 4; guard++) {
        ArcSide a = as_arcside(h);
        if (!walk.empty() && a == walk.front()) {
          closed = true;
          break;
        }
        if (seen.count(a)) break;
        seen.insert(a);
        walk.push_back(a);
        auto nx = next_he(h);
        if (!nx) break;
        h = *nx;
      }
      if (!closed || walk.empty()) continue;
      auto mn = std::min_element(walk.begin(), walk.end());
      std::rotate(walk.begin(), mn, walk.end());
      int idx = (int)der.faces.size();
      der.faces.push_back(Face{walk});
      for (const ArcSide &a : walk) der.face_of_arc[a] = idx;
    }
  }

  // Regions: root plus non-outer graph faces plus loop interiors.
  der.global_faces.push_back(GlobalFace::Root());
  std::map<PieceKey, ArcSide> outer_key;
  for (const auto &[pk, oa] : outer) {
    auto it = der.face_of_arc.find(oa);
    if (it != der.face_of_arc.end())
      outer_key[pk] = der.faces[it->second].key();
  }
  for (const auto &f : der.faces) {
    auto pit = der.piece_of_elem.find(f.key().elem);
    if (pit == der.piece_of_elem.end()) continue;
    auto ok = outer_key.find(pit->second);
    if (ok != outer_key.end() && ok->second == f.key()) continue;
    der.global_faces.push_back(GlobalFace::of(f.key()));
  }
  for (const auto &[oid, l] : loops)
    der.global_faces.push_back(
        GlobalFace::of(ArcSide{ElemRef::loop(oid), loop_inner(l)}));
  std::sort(der.global_faces.begin(), der.global_faces.end());
  for (const auto &[pk, g] : host) der.hosted[g].push_back(pk);

  // Components: strand cycles through crossings, then loops.
  std::set<EdgeId> done;
  std::vector<Component> comps;
  for (const auto &[eid, e] : edges) {
    if (done.count(eid)) continue;
    std::vector<EdgeId> cycle;
    EdgeId cur = eid;
    bool closed = false;
    for (size_t guard = 0; guard <= edges.size() + 1; guard++) {
      if (!cycle.empty() && cur == eid) {
        closed = true;
        break;
      }
      if (done.count(cur)) break;
      done.insert(cur);
      cycle.push_back(cur);
      auto hit = der.head.find(cur);
      if (hit == der.head.end()) break;
      Dart cont{hit->second.c, (hit->second.slot + 2) & 3};
      const EdgeEnd &occ = crossings.at(cont.c).slots[cont.slot];
      if (occ.head || !edges.count(occ.e)) break;
      cur = occ.e;
    }
    if (!closed || cycle.empty()) continue;
    comps.push_back(Component{edges.at(eid).comp, cycle, std::nullopt});
  }
  for (const auto &[oid, l] : loops)
    comps.push_back(Component{l.comp, {}, oid});
  std::sort(comps.begin(), comps.end(),
            [](const Component &a, const Component &b) { return a.id < b.id; });
  der.components = std::move(comps);
  for (size_t i = 0; i < der.components.size(); i++)
    der.comp_index[der.components[i].id] = (int)i;
  for (const auto &[eid, e] : edges)
    for (BasepointId b : e.bps) der.bp_at[b] = ElemRef::edge(eid);
  for (const auto &[oid, l] : loops)
    for (BasepointId b : l.bps) der.bp_at[b] = ElemRef::loop(oid);

  this->der = std::move(dv);
}

const Derived &Diagram::d() const {
  assert(der && "diagram not sealed; call reseal() after mutation");
  return *der;
}

CrossingId Diagram::fresh_crossing() const {
  std::uint32_t m = 0;
  for (const auto &[k, v] : crossings) m = std::max(m, k.v);
  return CrossingId{m + 1};
}
EdgeId Diagram::fresh_edge() const {
  std::uint32_t m = 0;
  for (const auto &[k, v] : edges) m = std::max(m, k.v);
  return EdgeId{m + 1};
}
LoopId Diagram::fresh_loop() const {
  std::uint32_t m = 0;
  for (const auto &[k, v] : loops) m = std::max(m, k.v);
  return LoopId{m + 1};
}
BasepointId Diagram::fresh_basepoint() const {
  std::uint32_t m = 0;
  for (const auto &[k, v] : edges)
    for (BasepointId b : v.bps) m = std::max(m, b.v);
  for (const auto &[k, v] : loops)
    for (BasepointId b : v.bps) m = std::max(m, b.v);
  return BasepointId{m + 1};
}
ComponentId Diagram::fresh_component() const {
  std::uint32_t m = 0;
  for (const auto &[k, v] : edges) m = std::max(m, v.comp.v);
  for (const auto &[k, v] : loops) m = std::max(m, v.comp.v);
  return ComponentId{m + 1};
}

bool Diagram::operator==(const Diagram &o) const {
  auto cr = [](const std::map<CrossingId, Crossing> &m) {
    std::vector<std::tuple<CrossingId, std::array<EdgeEnd, 4>>> v;
    for (const auto &[k, c] : m) v.emplace_back(k, c.slots);
    return v;
  };
  auto ed = [](const std::map<EdgeId, Edge> &m) {
    std::vector<std::tuple<EdgeId, ComponentId, std::vector<BasepointId>>> v;
    for (const auto &[k, e] : m) v.emplace_back(k, e.comp, e.bps);
    return v;
  };
  auto lo = [](const std::map<LoopId, FreeLoop> &m) {
    std::vector<std::tuple<LoopId, ComponentId, int, std::vector<BasepointId>>>
        v;
    for (const auto &[k, l] : m) v.emplace_back(k, l.comp, l.orient, l.bps);
    return v;
  };
  return cr(crossings) == cr(o.crossings) && ed(edges) == ed(o.edges) &&
         lo(loops) == lo(o.loops) && host == o.host && outer == o.outer;
}

Side loop_inner(const FreeLoop &l) { return l.orient > 0 ? Side::L : Side::R; }

PieceKey piece_key_of(const Diagram &d, ElemRef e) {
  auto it = d.d().piece_of_elem.find(e);
  if (it == d.d().piece_of_elem.end())
    throw std::invalid_argument("unknown element");
  return it->second;
}

ArcSide local_face_key(const Diagram &d, ArcSide a) {
  if (a.elem.isLoop) return a;
  auto it = d.d().face_of_arc.find(a);
  if (it == d.d().face_of_arc.end())
    throw std::invalid_argument("arc-side not on any face");
  return d.d().faces[it->second].key();
}

GlobalFace region_of(const Diagram &d, ArcSide a) {
  PieceKey pk = piece_key_of(d, a.elem);
  if (a.elem.isLoop) {
    const FreeLoop &l = d.loops.at(a.elem.as_loop());
    if (a.side == loop_inner(l)) return GlobalFace::of(a);
    auto h = d.host.find(pk);
    return h == d.host.end() ? GlobalFace::Root() : h->second;
  }
  ArcSide key = local_face_key(d, a);
  auto oit = d.outer.find(pk);
  if (oit != d.outer.end() && local_face_key(d, oit->second) == key) {
    auto h = d.host.find(pk);
    return h == d.host.end() ? GlobalFace::Root() : h->second;
  }
  return GlobalFace::of(key);
}

std::vector<ArcSide> region_boundary(const Diagram &d, GlobalFace g) {
  std::vector<ArcSide> out;
  if (!g.root) out.push_back(g.def);
  auto hit = d.d().hosted.find(g);
  if (hit != d.d().hosted.end()) {
    std::vector<PieceKey> ps = hit->second;
    std::sort(ps.begin(), ps.end());
    for (PieceKey pk : ps) {
      if (pk.isLoop) {
        const FreeLoop &l = d.loops.at(LoopId{pk.id});
        out.push_back(ArcSide{ElemRef::loop(l.id), flip(loop_inner(l))});
      } else {
        out.push_back(local_face_key(d, d.outer.at(pk)));
      }
    }
  }
  return out;
}

bool region_is_empty_disk(const Diagram &d, ArcSide a) {
  GlobalFace g = region_of(d, a);
  if (g.root) return false;  // the unbounded region is never a disk
  auto b = region_boundary(d, g);
  return b.size() == 1 && b[0] == local_face_key(d, a);
}

std::vector<Component> components(const Diagram &d) {
  auto rep = validate_diagram(d);
  if (!rep.ok())
    throw std::invalid_argument("malformed diagram: " + rep.problems.front());
  return d.d().components;
}

bool is_marking_valid_still(const Diagram &d) {
  if (!validate_diagram(d).ok()) return false;
  std::map<ComponentId, int> count;
  for (const auto &[eid, e] : d.edges) count[e.comp] += (int)e.bps.size();
  for (const auto &[oid, l] : d.loops) count[l.comp] += (int)l.bps.size();
  for (const auto &c : d.d().components)
    if (count[c.id] != 1) return false;
  return true;
}

ValidationReport validate_diagram(const Diagram &d) {
  ValidationReport r;
  auto bad = [&](std::string s) { r.problems.push_back(std::move(s)); };

  std::map<EdgeId, int> tails, heads;
  for (const auto &[cid, c] : d.crossings) {
    if (c.id != cid) bad("crossing key/id mismatch at " + show(cid));
    for (int s = 0; s < 4; s++) {
      const EdgeEnd &occ = c.slots[s];
      if (!d.edges.count(occ.e)) {
        bad("crossing " + show(cid) + " slot " + std::to_string(s) +
            " names missing edge " + show(occ.e));
        continue;
      }
      (occ.head ? heads : tails)[occ.e]++;
    }
  }
  for (const auto &[eid, e] : d.edges) {
    if (e.id != eid) bad("edge key/id mismatch at " + show(eid));
    if (tails[eid] != 1 || heads[eid] != 1)
      bad("edge " + show(eid) + " must occupy exactly one tail and one head slot");
  }
  for (const auto &[oid, l] : d.loops) {
    if (l.id != oid) bad("loop key/id mismatch at " + show(oid));
    if (l.orient != 1 && l.orient != -1)
      bad("loop " + show(oid) + " orientation must be +1 or -1");
  }
  if (!r.ok()) return r;

  for (const auto &[cid, c] : d.crossings) {
    for (int s : {0, 1}) {
      bool h0 = c.slots[s].head, h1 = c.slots[s + 2].head;
      if (h0 == h1)
        bad("crossing " + show(cid) + " strand through slots " +
            std::to_string(s) + "," + std::to_string(s + 2) +
            " is not oriented through");
    }
  }
  std::map<BasepointId, int> bpcount;
  for (const auto &[eid, e] : d.edges)
    for (BasepointId b : e.bps) bpcount[b]++;
  for (const auto &[oid, l] : d.loops)
    for (BasepointId b : l.bps) bpcount[b]++;
  for (const auto &[b, n] : bpcount)
    if (n > 1) bad("basepoint " + show(b) + " placed " + std::to_string(n) + " times");
  if (!r.ok()) return r;

  const Derived &der = d.d();

  // Component-id consistency against the walked partition.
  std::set<EdgeId> covered;
  std::set<ComponentId> used;
  for (const auto &comp : der.components) {
    if (!comp.cycle.empty()) {
      ComponentId c0 = d.edges.at(comp.cycle.front()).comp;
      for (EdgeId eid : comp.cycle) {
        covered.insert(eid);
        if (d.edges.at(eid).comp != c0)
          bad("edges " + show(comp.cycle.front()) + " and " + show(eid) +
              " are one strand but carry different components");
      }
    }
    if (used.count(comp.id))
      bad("component id " + show(comp.id) + " used by two distinct components");
    used.insert(comp.id);
  }
  for (const auto &[eid, e] : d.edges)
    if (!covered.count(eid))
      bad("edge " + show(eid) + " is not part of any closed strand");
  if (!r.ok()) return r;

  // Nesting forest.
  std::set<PieceKey> pieces;
  for (const auto &[pk, es] : der.piece_elems) pieces.insert(pk);
  for (const auto &[pk, g] : d.host)
    if (!pieces.count(pk)) bad("host entry for missing piece");
  for (const auto &[pk, oa] : d.outer) {
    if (!pieces.count(pk)) {
      bad("outer entry for missing piece");
      continue;
    }
    if (pk.isLoop) {
      bad("unexpected outer entry for loop piece");
      continue;
    }
    if (oa.elem.isLoop || !d.edges.count(oa.elem.as_edge()) ||
        der.piece_of_elem.at(oa.elem) != pk)
      bad("outer face of piece " + show(EdgeId{pk.id}) +
          " must be named by one of its own edge arc-sides");
  }
  for (PieceKey pk : pieces) {
    if (!d.host.count(pk)) bad("piece lacks a host region");
    if (!pk.isLoop && !d.outer.count(pk)) bad("graph piece lacks an outer face");
  }
  if (!r.ok()) return r;

  auto valid_region = [&](GlobalFace g) -> bool {
    if (g.root) return true;
    ArcSide a = g.def;
    if (a.elem.isLoop) {
      auto it = d.loops.find(a.elem.as_loop());
      return it != d.loops.end() && a.side == loop_inner(it->second);
    }
    if (!d.edges.count(a.elem.as_edge())) return false;
    ArcSide key = local_face_key(d, a);
    if (key != a) return false;
    PieceKey pk = der.piece_of_elem.at(a.elem);
    return local_face_key(d, d.outer.at(pk)) != key;
  };
  for (const auto &[pk, g] : d.host)
    if (!valid_region(g))
      bad("host of a piece is not a region-defining face");
  if (!r.ok()) return r;

  for (PieceKey pk : pieces) {
    std::set<PieceKey> path;
    PieceKey cur = pk;
    while (true) {
      if (path.count(cur)) {
        bad("nesting forest contains a cycle");
        break;
      }
      path.insert(cur);
      GlobalFace g = d.host.at(cur);
      if (g.root) break;
      cur = der.piece_of_elem.at(g.def.elem);
    }
    if (!r.ok()) break;
  }
  if (!r.ok()) return r;

  // Euler law per graph piece.
  std::map<PieceKey, std::array<int, 3>> vef;
  for (const auto &[eid, e] : d.edges)
    vef[der.piece_of_elem.at(ElemRef::edge(eid))][1]++;
  for (const auto &[cid, c] : d.crossings) {
    EdgeId any = c.slots[0].e;
    vef[der.piece_of_elem.at(ElemRef::edge(any))][0]++;
  }
  for (const auto &f : der.faces)
    vef[der.piece_of_elem.at(f.key().elem)][2]++;
  for (const auto &[pk, a] : vef) {
    if (a[0] - a[1] + a[2] != 2)
      bad("piece at " + show(EdgeId{pk.id}) + " violates V-E+F=2 (V=" +
          std::to_string(a[0]) + " E=" + std::to_string(a[1]) + " F=" +
          std::to_string(a[2]) + ")");
    // Every edge arc-side must lie on a traced face.
  }
  size_t arcs = 0;
  for (const auto &f : der.faces) arcs += f.walk.size();
  if (arcs != 2 * d.edges.size())
    bad("face tracing did not cover every edge side");

  return r;
}

}  // namespace mmc
