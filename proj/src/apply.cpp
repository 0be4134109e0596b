#include "mmc/event.hpp"

#include <algorithm>
#include <cassert>
#include <optional>
#include <sstream>
#include <stdexcept>

// Event application. Every surgery follows the same shape: validate the site
// binding against the current still, rebuild the touched strand elements
// (fresh ids, max+1, in a documented deterministic order), rewrite the
// affected crossing slots, then reconcile the nesting forest by matching new
// local faces against the old regions through surviving arc-sides.
namespace mmc {

const char *event_name(const Event &e) {
  struct V {
    const char *operator()(const BirthEvent &) const { return "birth"; }
    const char *operator()(const DeathEvent &) const { return "death"; }
    const char *operator()(const SlideEvent &) const { return "slide"; }
    const char *operator()(const R1AddEvent &) const { return "r1add"; }
    const char *operator()(const R1RemoveEvent &) const { return "r1remove"; }
    const char *operator()(const R2AddEvent &) const { return "r2add"; }
    const char *operator()(const R2RemoveEvent &) const { return "r2remove"; }
    const char *operator()(const R3Event &) const { return "r3"; }
    const char *operator()(const SaddleEvent &) const { return "saddle"; }
  };
  return std::visit(V{}, e);
}

namespace {

[[noreturn]] void site(const std::string &m) {
  throw ApplyError(ApplyError::SiteMismatch, m);
}
[[noreturn]] void discipline(const std::string &m) {
  throw ApplyError(ApplyError::DisciplineViolation, m);
}
[[noreturn]] void internal(const std::string &m) {
  throw std::logic_error("event application: " + m);
}

std::string show_elem(ElemRef e) {
  return e.isLoop ? show(e.as_loop()) : show(e.as_edge());
}

void dock(Diagram &d, Dart dt, EdgeId e, bool head) {
  d.crossings.at(dt.c).slots[dt.slot] = EdgeEnd{e, head};
}

// ---------------------------------------------------------------------------
// Nesting reconciliation.
//
// After a surgery the regions of the new still are matched to the old ones:
// every old region that keeps a surviving boundary arc-side is witnessed by
// it, and the event supplies explicit union groups for faces made entirely of
// fresh arcs (plus part assignments when a region splits). The union-find
// classes over the new local faces are then walked top-down from the
// unbounded region, which rebuilds host and outer assignments for every
// piece and fixes the drawn orientation of freshly created loops.

struct Recon {
  std::set<ElemRef> dead;        // consumed elements; never witnesses
  std::set<ElemRef> flipped;     // survivors whose direction reversed
  std::set<ArcSide> moved;       // surviving arcs that changed regions
  std::set<GlobalFace> overridden;  // split regions, handled by groups
  std::set<GlobalFace> dying;       // validated-empty regions that vanish
  std::vector<std::vector<ArcSide>> groups;  // handles to union (new still)
  // Handles per surviving old region. Accumulated in one group per region so
  // that two rebuilt curves bordering the same region stay in one region even
  // when none of its old boundary arcs survive as a witness.
  std::map<GlobalFace, std::vector<ArcSide>> joins;
  std::vector<ArcSide> to_root;
  std::set<LoopId> fresh_loops;  // orientation is set during assignment
};

// A reversed survivor keeps its geometric sides but their labels swap.
ArcSide translate(const Recon &rec, ArcSide a) {
  return rec.flipped.count(a.elem) ? ArcSide{a.elem, flip(a.side)} : a;
}

struct MiniUF {
  std::map<int, int> p;
  int find(int x) {
    auto it = p.find(x);
    if (it == p.end() || it->second == x) return x;
    return p[x] = find(it->second);
  }
  void join(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) p[a] = b;
  }
};

// All boundary arc-sides of a region: the defining walk plus the outer walks
// of hosted pieces.
std::vector<ArcSide> all_region_arcs(const Diagram &d, GlobalFace g) {
  const Derived &der = d.d();
  std::vector<ArcSide> out;
  auto add = [&](ArcSide a) {
    if (a.elem.isLoop) {
      out.push_back(a);
      return;
    }
    const Face &f = der.faces[der.face_of_arc.at(a)];
    out.insert(out.end(), f.walk.begin(), f.walk.end());
  };
  if (!g.root) add(g.def);
  auto hit = der.hosted.find(g);
  if (hit != der.hosted.end())
    for (PieceKey pk : hit->second) {
      if (pk.isLoop) {
        const FreeLoop &l = d.loops.at(LoopId{pk.id});
        out.push_back(ArcSide{ElemRef::loop(l.id), flip(loop_inner(l))});
      } else {
        add(d.outer.at(pk));
      }
    }
  return out;
}

std::optional<ArcSide> survivor(const Diagram &oldd, GlobalFace g,
                                const Recon &rec) {
  for (ArcSide a : all_region_arcs(oldd, g))
    if (!rec.dead.count(a.elem) && !rec.moved.count(a))
      return translate(rec, a);
  return std::nullopt;
}

// Tie a fresh arc-side to the old region it inherits.
void bridge(Recon &rec, const Diagram &oldd, GlobalFace r, ArcSide handle) {
  if (rec.dying.count(r) || rec.overridden.count(r)) return;
  auto &grp = rec.joins[r];
  if (grp.empty())
    if (auto s = survivor(oldd, r, rec)) grp.push_back(*s);
  grp.push_back(handle);
  if (r.root) rec.to_root.push_back(handle);
}

void reconcile(const Diagram &oldd, Diagram &nd, const Recon &rec) {
  nd.reseal();  // faces and pieces; host/outer are rebuilt below
  const Derived &der = nd.d();

  std::vector<LoopId> loopIds;
  std::map<LoopId, int> loopIdx;
  for (const auto &[oid, l] : nd.loops) {
    loopIdx[oid] = (int)loopIds.size();
    loopIds.push_back(oid);
  }
  int nFaces = (int)der.faces.size();
  auto node = [&](ArcSide a) -> int {
    if (!a.elem.isLoop) {
      auto it = der.face_of_arc.find(a);
      if (it == der.face_of_arc.end())
        internal("region handle " + show_elem(a.elem) + " is not in the new still");
      return 1 + it->second;
    }
    auto it = loopIdx.find(a.elem.as_loop());
    if (it == loopIdx.end()) internal("region handle names a missing loop");
    return 1 + nFaces + 2 * it->second + (a.side == Side::R ? 1 : 0);
  };

  MiniUF uf;
  for (GlobalFace g : oldd.d().global_faces) {
    if (rec.overridden.count(g) || rec.dying.count(g)) continue;
    int prev = -1;
    for (ArcSide a : all_region_arcs(oldd, g)) {
      if (rec.dead.count(a.elem) || rec.moved.count(a)) continue;
      int n = node(translate(rec, a));
      if (prev >= 0) uf.join(prev, n);
      prev = n;
      if (g.root) uf.join(0, n);
    }
  }
  auto join_group = [&](const std::vector<ArcSide> &grp) {
    int prev = -1;
    for (ArcSide a : grp) {
      int n = node(a);
      if (prev >= 0) uf.join(prev, n);
      prev = n;
    }
  };
  for (const auto &grp : rec.groups) join_group(grp);
  for (const auto &[g, grp] : rec.joins) join_group(grp);
  for (ArcSide a : rec.to_root) uf.join(0, node(a));

  int total = 1 + nFaces + 2 * (int)loopIds.size();
  std::map<int, std::vector<int>> members;
  for (int n = 0; n < total; n++) members[uf.find(n)].push_back(n);

  std::map<PieceKey, std::vector<int>> pieceFaces;
  for (int f = 0; f < nFaces; f++)
    pieceFaces[der.piece_of_elem.at(der.faces[f].key().elem)].push_back(f);

  nd.host.clear();
  nd.outer.clear();
  std::set<PieceKey> assigned;
  std::set<int> doneClass;
  std::vector<std::pair<int, GlobalFace>> stack{{uf.find(0), GlobalFace::Root()}};
  while (!stack.empty()) {
    auto [cls, region] = stack.back();
    stack.pop_back();
    if (doneClass.count(cls))
      internal("two regions were identified by the union instructions");
    doneClass.insert(cls);
    for (int n : members[cls]) {
      if (n == 0) continue;
      if (n <= nFaces) {
        int f = n - 1;
        ArcSide key = der.faces[f].key();
        if (!region.root && region.def == key) continue;  // the defining walk
        PieceKey pk = der.piece_of_elem.at(key.elem);
        if (assigned.count(pk)) internal("piece hosted in two regions");
        assigned.insert(pk);
        nd.host[pk] = region;
        nd.outer[pk] = key;
        for (int f2 : pieceFaces[pk]) {
          if (f2 == f) continue;
          GlobalFace sub = GlobalFace::of(der.faces[f2].key());
          stack.push_back({uf.find(1 + f2), sub});
        }
      } else {
        int li = (n - 1 - nFaces) / 2;
        Side s = (n - 1 - nFaces) % 2 ? Side::R : Side::L;
        LoopId o = loopIds[li];
        ArcSide as{ElemRef::loop(o), s};
        if (!region.root && region.def == as) continue;  // the defining side
        PieceKey pk{true, o.v};
        if (assigned.count(pk)) internal("loop hosted in two regions");
        assigned.insert(pk);
        nd.host[pk] = region;
        FreeLoop &l = nd.loops.at(o);
        Side inner = flip(s);
        if (rec.fresh_loops.count(o))
          l.orient = inner == Side::L ? +1 : -1;
        else if (loop_inner(l) != inner)
          internal("surviving loop faces away from its host region");
        ArcSide in{ElemRef::loop(o), inner};
        stack.push_back({uf.find(node(in)), GlobalFace::of(in)});
      }
    }
  }
  for (const auto &[pk, es] : der.piece_elems)
    if (!assigned.count(pk)) internal("piece not reached from the root region");
  nd.reseal();
}

// ---------------------------------------------------------------------------
// Strand surgery: cutting elements into portions and reassembling chains.

struct Portion {
  ElemRef orig;
  Side adj(Side s, bool flipped) const { return flipped ? flip(s) : s; }
  std::vector<BasepointId> bps;
  std::optional<Dart> startD, endD;  // anchors in strand direction
};

struct CutPoint {
  ElemRef elem;
  Side side = Side::L;
  int gap = 0, sub = 0;
  int lo = -1, hi = -1;  // portions before/after the cut in strand order
};

// Split one element at the given cut points (entries of `cuts` with matching
// elem are filled in). Portion indices are appended to `ports`.
void cut_element(const Diagram &d, ElemRef elem, std::vector<CutPoint *> cuts,
                 std::vector<Portion> &ports) {
  std::sort(cuts.begin(), cuts.end(), [](CutPoint *a, CutPoint *b) {
    return std::pair(a->gap, a->sub) < std::pair(b->gap, b->sub);
  });
  int base = (int)ports.size();
  int k = (int)cuts.size();
  if (!elem.isLoop) {
    const Edge &e = d.edges.at(elem.as_edge());
    const Derived &der = d.d();
    for (int j = 0; j <= k; j++) {
      Portion p;
      p.orig = elem;
      int from = j == 0 ? 0 : cuts[j - 1]->gap;
      int to = j == k ? (int)e.bps.size() : cuts[j]->gap;
      p.bps.assign(e.bps.begin() + from, e.bps.begin() + to);
      if (j == 0) p.startD = der.tail.at(e.id);
      if (j == k) p.endD = der.head.at(e.id);
      ports.push_back(std::move(p));
    }
    for (int j = 0; j < k; j++) {
      cuts[j]->lo = base + j;
      cuts[j]->hi = base + j + 1;
    }
  } else {
    const FreeLoop &l = d.loops.at(elem.as_loop());
    int n = (int)l.bps.size();
    // Portion j runs from cut j to cut j+1; the last wraps around. Loop gap g
    // sits just after basepoint g.
    for (int j = 0; j < k; j++) {
      Portion p;
      p.orig = elem;
      if (j + 1 < k) {
        for (int i = cuts[j]->gap + 1; i <= cuts[j + 1]->gap; i++)
          p.bps.push_back(l.bps[i]);
      } else if (n > 0) {
        for (int i = 1; i <= n; i++)
          p.bps.push_back(l.bps[(cuts[j]->gap + i) % n]);
        if (k > 1) {
          // Drop the part already taken by earlier portions.
          int taken = cuts[k - 1]->gap - cuts[0]->gap;
          p.bps.resize(n - taken);
        }
      }
      ports.push_back(std::move(p));
    }
    for (int j = 0; j < k; j++) {
      cuts[j]->hi = base + j;
      cuts[j]->lo = base + (j - 1 + k) % k;
    }
  }
}

using PEnd = std::pair<int, int>;  // portion index, end (0 start, 1 end)

PEnd inPE(const CutPoint &c) {
  return c.side == Side::L ? PEnd{c.lo, 1} : PEnd{c.hi, 0};
}
PEnd outPE(const CutPoint &c) {
  return c.side == Side::L ? PEnd{c.hi, 0} : PEnd{c.lo, 1};
}

struct ChainItem {
  int p = -1;
  int dir = +1;
};

struct Chain {
  std::vector<ChainItem> items;
  std::map<int, int> junctions;  // boundary after item index -> junction tag
  bool closed = false;
  ElemRef newElem;
  std::vector<BasepointId> bps;
  std::map<int, int> junction_pos;  // tag -> index into bps
};

// Reassemble portions into chains along the junction links. Chains through a
// junction flagged with a tag record where emitted basepoints go.
std::vector<Chain> assemble_chains(
    const std::vector<Portion> &ports,
    const std::vector<std::pair<PEnd, PEnd>> &links,
    const std::vector<int> &linkTags, ElemRef anchorElem) {
  std::map<PEnd, std::pair<PEnd, int>> follow;  // end -> (other end, link idx)
  for (size_t i = 0; i < links.size(); i++) {
    follow[links[i].first] = {links[i].second, (int)i};
    follow[links[i].second] = {links[i].first, (int)i};
  }
  std::vector<bool> visited(ports.size(), false);
  std::vector<Chain> chains;

  auto walk = [&](int p0, int end0, bool closed) {
    Chain ch;
    ch.closed = closed;
    int p = p0, enter = end0;
    while (true) {
      visited[p] = true;
      ch.items.push_back({p, enter == 0 ? +1 : -1});
      int exit = 1 - enter;
      auto it = follow.find({p, exit});
      if (it == follow.end()) break;  // anchored: open chain complete
      ch.junctions[(int)ch.items.size() - 1] = linkTags[it->second.second];
      PEnd nxt = it->second.first;
      if (closed && nxt == PEnd{p0, end0}) break;
      p = nxt.first;
      enter = nxt.second;
    }
    chains.push_back(std::move(ch));
  };

  for (size_t p = 0; p < ports.size(); p++)
    for (int end : {0, 1})
      if (!visited[p] && !follow.count({(int)p, end})) walk((int)p, end, false);
  for (size_t p = 0; p < ports.size(); p++)
    if (!visited[p]) walk((int)p, 0, true);

  // Orient each chain forward: anchored by the first cut arc's element when
  // present (it never reverses), otherwise by requiring some portion to run
  // forward. Mixed chains absorb the flipped side of an incoherent band.
  for (Chain &ch : chains) {
    bool rev = false, allNeg = true;
    for (const ChainItem &it : ch.items) {
      if (ports[it.p].orig == anchorElem && it.dir < 0) rev = true;
      if (it.dir > 0) allNeg = false;
    }
    if (allNeg) rev = true;
    if (!rev) continue;
    int n = (int)ch.items.size();
    std::reverse(ch.items.begin(), ch.items.end());
    for (ChainItem &it : ch.items) it.dir = -it.dir;
    std::map<int, int> jj;
    for (auto [b, t] : ch.junctions)
      jj[ch.closed ? ((n - 2 - b) % n + n) % n : n - 2 - b] = t;
    ch.junctions = std::move(jj);
  }
  // Deterministic representation of closed chains: least portion first.
  for (Chain &ch : chains) {
    if (!ch.closed) continue;
    int n = (int)ch.items.size();
    int best = 0;
    for (int i = 1; i < n; i++)
      if (ch.items[i].p < ch.items[best].p) best = i;
    if (best == 0) continue;
    std::rotate(ch.items.begin(), ch.items.begin() + best, ch.items.end());
    std::map<int, int> jj;
    for (auto [b, t] : ch.junctions) jj[((b - best) % n + n) % n] = t;
    ch.junctions = std::move(jj);
  }
  return chains;
}

struct PortionFate {
  ElemRef newElem;
  bool flipped = false;
};

// Turn chains into fresh edges/loops, dock their anchor darts, and record
// where each portion went. Components are inherited from the first portion.
void materialize_chains(const Diagram &oldd, Diagram &nd,
                        std::vector<Portion> &ports, std::vector<Chain> &chains,
                        std::map<int, PortionFate> &fate,
                        std::set<LoopId> &freshLoops) {
  EdgeId eNext = oldd.fresh_edge();
  LoopId oNext = oldd.fresh_loop();
  for (Chain &ch : chains) {
    ComponentId comp;
    {
      const Portion &p0 = ports[ch.items.front().p];
      comp = p0.orig.isLoop ? oldd.loops.at(p0.orig.as_loop()).comp
                            : oldd.edges.at(p0.orig.as_edge()).comp;
    }
    std::vector<BasepointId> bps;
    std::map<int, int> jpos;
    for (size_t i = 0; i < ch.items.size(); i++) {
      const ChainItem &it = ch.items[i];
      std::vector<BasepointId> part = ports[it.p].bps;
      if (it.dir < 0) std::reverse(part.begin(), part.end());
      bps.insert(bps.end(), part.begin(), part.end());
      auto j = ch.junctions.find((int)i);
      if (j != ch.junctions.end()) jpos[j->second] = (int)bps.size();
    }
    if (!ch.closed) {
      EdgeId id = eNext;
      eNext = EdgeId{eNext.v + 1};
      const ChainItem &f = ch.items.front(), &l = ch.items.back();
      Dart td = f.dir > 0 ? *ports[f.p].startD : *ports[f.p].endD;
      Dart hd = l.dir > 0 ? *ports[l.p].endD : *ports[l.p].startD;
      nd.edges[id] = Edge{id, comp, bps};
      dock(nd, td, id, false);
      dock(nd, hd, id, true);
      ch.newElem = ElemRef::edge(id);
    } else {
      LoopId id = oNext;
      oNext = LoopId{oNext.v + 1};
      nd.loops[id] = FreeLoop{id, comp, +1, bps};
      freshLoops.insert(id);
      ch.newElem = ElemRef::loop(id);
    }
    ch.bps = std::move(bps);
    ch.junction_pos = std::move(jpos);
    for (const ChainItem &it : ch.items)
      fate[it.p] = PortionFate{ch.newElem, it.dir < 0};
  }
}

// Bridge every portion's two sides to the regions they inherit.
void bridge_portions(Recon &rec, const Diagram &oldd,
                     const std::vector<Portion> &ports,
                     const std::map<int, PortionFate> &fate) {
  for (size_t i = 0; i < ports.size(); i++) {
    const Portion &p = ports[i];
    const PortionFate &f = fate.at((int)i);
    for (Side s : {Side::L, Side::R}) {
      GlobalFace r = region_of(oldd, ArcSide{p.orig, s});
      bridge(rec, oldd, r, ArcSide{f.newElem, p.adj(s, f.flipped)});
    }
  }
}

// Components that contain rebuilt elements get fresh ids (sorted by least
// element); everything else keeps its id. Returns the flows old -> new.
void rename_components(const Diagram &oldd, Diagram &nd,
                       const std::map<ElemRef, std::set<ComponentId>> &origins,
                       EventTrace &tr) {
  nd.reseal();
  struct Pending {
    ElemRef least;
    std::vector<ElemRef> elems;
    std::set<ComponentId> olds;
  };
  std::vector<Pending> todo;
  for (const Component &c : nd.d().components) {
    std::vector<ElemRef> elems;
    if (c.loop)
      elems.push_back(ElemRef::loop(*c.loop));
    else
      for (EdgeId e : c.cycle) elems.push_back(ElemRef::edge(e));
    bool touched = false;
    std::set<ComponentId> olds;
    for (ElemRef e : elems) {
      auto it = origins.find(e);
      if (it != origins.end()) {
        touched = true;
        olds.insert(it->second.begin(), it->second.end());
      } else {
        olds.insert(e.isLoop ? nd.loops.at(e.as_loop()).comp
                             : nd.edges.at(e.as_edge()).comp);
      }
    }
    if (!touched) continue;
    todo.push_back({*std::min_element(elems.begin(), elems.end()), elems, olds});
  }
  std::sort(todo.begin(), todo.end(),
            [](const Pending &a, const Pending &b) { return a.least < b.least; });
  ComponentId next = oldd.fresh_component();
  for (Pending &p : todo) {
    ComponentId id = next;
    next = ComponentId{next.v + 1};
    for (ElemRef e : p.elems) {
      if (e.isLoop)
        nd.loops.at(e.as_loop()).comp = id;
      else
        nd.edges.at(e.as_edge()).comp = id;
    }
    for (ComponentId o : p.olds) tr.comp_flow.push_back({o, id});
  }
  nd.reseal();
}

// ---------------------------------------------------------------------------
// Site resolution helpers.

ComponentId comp_of(const Diagram &d, ElemRef e) {
  return e.isLoop ? d.loops.at(e.as_loop()).comp : d.edges.at(e.as_edge()).comp;
}

void check_arcref(const Diagram &d, const ArcRef &a, const char *what) {
  if (a.at.elem.isLoop) {
    auto it = d.loops.find(a.at.elem.as_loop());
    if (it == d.loops.end())
      site(std::string(what) + " names missing loop " + show_elem(a.at.elem));
    int n = (int)it->second.bps.size();
    if (n == 0 ? a.gap != 0 : (a.gap < 0 || a.gap >= n))
      site(std::string(what) + " gap out of range on " + show_elem(a.at.elem));
  } else {
    auto it = d.edges.find(a.at.elem.as_edge());
    if (it == d.edges.end())
      site(std::string(what) + " names missing edge " + show_elem(a.at.elem));
    int n = (int)it->second.bps.size();
    if (a.gap < 0 || a.gap > n)
      site(std::string(what) + " gap out of range on " + show_elem(a.at.elem));
  }
}

std::vector<BasepointId> comp_bps(const Diagram &d, ComponentId c) {
  std::vector<BasepointId> out;
  for (const auto &[eid, e] : d.edges)
    if (e.comp == c) out.insert(out.end(), e.bps.begin(), e.bps.end());
  for (const auto &[oid, l] : d.loops)
    if (l.comp == c) out.insert(out.end(), l.bps.begin(), l.bps.end());
  return out;
}

// The local face key a cut arc lies on (loop sides are their own circles).
ArcSide circle_of(const Diagram &d, ArcSide a) { return local_face_key(d, a); }

// Representative handle for a hosted piece, stable across the surgery.
ArcSide piece_rep(const Diagram &d, PieceKey pk) {
  if (pk.isLoop) {
    const FreeLoop &l = d.loops.at(LoopId{pk.id});
    return ArcSide{ElemRef::loop(l.id), flip(loop_inner(l))};
  }
  return d.outer.at(pk);
}

// Shared split-region bookkeeping for Saddle and R2Add: the attach circle is
// divided at the two cut points; part 1 is the side swept from the first cut
// to the second (walk order), part 2 keeps the region's identity (defining
// circle or root).
void split_region_groups(Recon &rec, const Diagram &oldd, GlobalFace g,
                         ArcSide part1h, ArcSide part2h, ArcSide splitCircle,
                         const std::vector<PieceKey> &carry,
                         const std::set<PieceKey> &exclude) {
  rec.overridden.insert(g);
  std::set<PieceKey> carried(carry.begin(), carry.end());
  std::vector<ArcSide> g1{part1h}, g2{part2h};
  for (PieceKey pk : carried) g1.push_back(translate(rec, piece_rep(oldd, pk)));
  auto hit = oldd.d().hosted.find(g);
  if (hit != oldd.d().hosted.end())
    for (PieceKey pk : hit->second) {
      if (carried.count(pk) || exclude.count(pk)) continue;
      g2.push_back(translate(rec, piece_rep(oldd, pk)));
    }
  if (!g.root) {
    if (g.def != splitCircle)
      for (ArcSide a : all_region_arcs(oldd, g)) {
        if (rec.dead.count(a.elem) || rec.moved.count(a)) continue;
        if (circle_of(oldd, a) == g.def) g2.push_back(translate(rec, a));
      }
  } else {
    rec.to_root.push_back(part2h);
  }
  rec.groups.push_back(std::move(g1));
  rec.groups.push_back(std::move(g2));
}

void validate_carry(const Diagram &d, const std::vector<PieceKey> &carry,
                    GlobalFace g, bool sameCircle,
                    const std::set<PieceKey> &exclude) {
  if (!carry.empty() && !sameCircle)
    site("carried pieces given but the attach arcs lie on different circles");
  std::set<PieceKey> seen;
  const auto &der = d.d();
  auto hit = der.hosted.find(g);
  for (PieceKey pk : carry) {
    if (!seen.insert(pk).second) site("carried piece listed twice");
    if (exclude.count(pk))
      site("carried piece is being rebuilt by the event itself");
    bool ok = hit != der.hosted.end() &&
              std::find(hit->second.begin(), hit->second.end(), pk) !=
                  hit->second.end();
    if (!ok) site("carried piece is not hosted in the attach region");
  }
}

Diagram strip_elements(const Diagram &d, const std::set<ElemRef> &dead) {
  Diagram nd = d;
  for (ElemRef e : dead) {
    if (e.isLoop) {
      nd.loops.erase(e.as_loop());
    } else {
      nd.edges.erase(e.as_edge());
    }
  }
  return nd;
}

// An incoherent band makes the absorbed strand run against its old direction,
// so every surviving element of that component is reversed in place: dart
// roles swap, basepoint order flips, drawn loop orientation negates. The
// curves themselves do not move.
void flip_component(Diagram &nd, const Diagram &oldd, ComponentId comp,
                    const std::set<ElemRef> &dead, std::set<ElemRef> &flipped) {
  for (const auto &[eid, e] : oldd.edges) {
    if (e.comp != comp || dead.count(ElemRef::edge(eid))) continue;
    Edge &ne = nd.edges.at(eid);
    std::reverse(ne.bps.begin(), ne.bps.end());
    Dart t = oldd.d().tail.at(eid), h = oldd.d().head.at(eid);
    nd.crossings.at(t.c).slots[t.slot].head = true;
    nd.crossings.at(h.c).slots[h.slot].head = false;
    flipped.insert(ElemRef::edge(eid));
  }
  for (const auto &[oid, l] : oldd.loops) {
    if (l.comp != comp || dead.count(ElemRef::loop(oid))) continue;
    FreeLoop &nl = nd.loops.at(oid);
    std::reverse(nl.bps.begin(), nl.bps.end());
    nl.orient = -nl.orient;
    flipped.insert(ElemRef::loop(oid));
  }
}

// ---------------------------------------------------------------------------
// Birth / Death / Slide.

ApplyResult apply_birth(const Diagram &d, const BirthEvent &ev) {
  const auto &gf = d.d().global_faces;
  if (std::find(gf.begin(), gf.end(), ev.at) == gf.end())
    site("birth region does not exist");
  if (ev.orient != 1 && ev.orient != -1) site("birth orientation must be +1 or -1");
  if (d.loops.count(ev.loop)) site("birth loop id already in use");
  for (const auto &[oid, l] : d.loops)
    if (l.comp == ev.comp) site("birth component id already in use");
  for (const auto &[eid, e] : d.edges)
    if (e.comp == ev.comp) site("birth component id already in use");
  if (d.d().bp_at.count(ev.bp)) site("birth basepoint id already in use");

  ApplyResult r{d, {}};
  r.diagram.loops[ev.loop] = FreeLoop{ev.loop, ev.comp, ev.orient, {ev.bp}};
  r.diagram.host[PieceKey{true, ev.loop.v}] = ev.at;
  r.diagram.reseal();
  r.trace.comp_born.push_back(ev.comp);
  r.trace.bp_emitted.push_back(ev.bp);
  return r;
}

ApplyResult apply_death(const Diagram &d, const DeathEvent &ev) {
  auto it = d.loops.find(ev.loop);
  if (it == d.loops.end()) site("death names missing loop " + show(ev.loop));
  const FreeLoop &l = it->second;
  if (!region_is_empty_disk(d, ArcSide{ElemRef::loop(ev.loop), loop_inner(l)}))
    site("death loop is not innermost with an empty interior");
  if (l.bps.size() != 1)
    discipline("death loop must carry exactly one basepoint");

  ApplyResult r{d, {}};
  r.trace.comp_dead.push_back(l.comp);
  r.trace.bp_consumed.push_back(l.bps[0]);
  r.diagram.loops.erase(ev.loop);
  r.diagram.host.erase(PieceKey{true, ev.loop.v});
  r.diagram.reseal();
  return r;
}

ApplyResult apply_slide(const Diagram &d, const SlideEvent &ev) {
  if (ev.steps == 0) site("slide of zero steps");
  auto at = d.d().bp_at.find(ev.bp);
  if (at == d.d().bp_at.end()) site("slide names missing basepoint " + show(ev.bp));

  ApplyResult r{d, {}};
  Diagram &nd = r.diagram;
  const Derived &der = d.d();  // darts are untouched by slides
  ElemRef cur = at->second;
  for (int step = 0; step < std::abs(ev.steps); step++) {
    bool fwd = ev.steps > 0;
    if (cur.isLoop) {
      FreeLoop &l = nd.loops.at(cur.as_loop());
      int n = (int)l.bps.size();
      if (n <= 1) continue;  // a full revolution, nothing to reorder
      int i = (int)(std::find(l.bps.begin(), l.bps.end(), ev.bp) - l.bps.begin());
      int j = ((i + (fwd ? 1 : -1)) % n + n) % n;
      std::swap(l.bps[i], l.bps[j]);
    } else {
      Edge &e = nd.edges.at(cur.as_edge());
      int i = (int)(std::find(e.bps.begin(), e.bps.end(), ev.bp) - e.bps.begin());
      if (fwd && i + 1 < (int)e.bps.size()) {
        std::swap(e.bps[i], e.bps[i + 1]);
      } else if (!fwd && i > 0) {
        std::swap(e.bps[i], e.bps[i - 1]);
      } else {
        Dart end = fwd ? der.head.at(e.id) : der.tail.at(e.id);
        Dart cont{end.c, (end.slot + 2) & 3};
        EdgeEnd occ = nd.crossings.at(cont.c).slots[cont.slot];
        if (occ.head == fwd) internal("strand continuation is misoriented");
        Edge &e2 = nd.edges.at(occ.e);
        e.bps.erase(e.bps.begin() + i);
        if (fwd)
          e2.bps.insert(e2.bps.begin(), ev.bp);
        else
          e2.bps.push_back(ev.bp);
        cur = ElemRef::edge(occ.e);
      }
    }
  }
  nd.reseal();
  return r;
}

// ---------------------------------------------------------------------------
// Saddle.

ApplyResult apply_saddle(const Diagram &d, const SaddleEvent &ev) {
  check_arcref(d, ev.a, "saddle arc 1");
  check_arcref(d, ev.b, "saddle arc 2");
  ElemRef E1 = ev.a.at.elem, E2 = ev.b.at.elem;
  Side s1 = ev.a.at.side, s2 = ev.b.at.side;
  if (E1 == E2 && std::pair(ev.a.gap, ev.a.sub) == std::pair(ev.b.gap, ev.b.sub))
    site("saddle arcs name the same attach point");

  GlobalFace g = region_of(d, ev.a.at);
  if (region_of(d, ev.b.at) != g)
    site("saddle arcs do not bound a common region");
  bool sameCircle = circle_of(d, ev.a.at) == circle_of(d, ev.b.at);
  bool sameComp = comp_of(d, E1) == comp_of(d, E2);
  bool coherent = s1 == s2;
  if (coherent != ev.coherent)
    site("saddle coherence flag does not match the site");
  if (sameComp && (!sameCircle || !coherent))
    site("a saddle within one component must split its boundary circle coherently");

  std::set<PieceKey> exclude{piece_key_of(d, E1), piece_key_of(d, E2)};
  validate_carry(d, ev.carry, g, sameCircle, exclude);

  // Basepoint discipline.
  EventTrace tr;
  tr.saddle_merge = !sameComp;
  tr.saddle_coherent = coherent;
  std::set<BasepointId> consumed;
  if (!sameComp) {
    for (auto [E, name] : {std::pair(E1, "first"), std::pair(E2, "second")}) {
      auto bps = comp_bps(d, comp_of(d, E));
      if (bps.size() != 1)
        discipline("merging component must carry exactly one basepoint");
      if (d.d().bp_at.at(bps[0]) != E)
        discipline(std::string("basepoint of the ") + name +
                   " merging component must sit on its saddle-site arc");
      consumed.insert(bps[0]);
      tr.bp_consumed.push_back(bps[0]);
    }
  } else {
    auto bps = comp_bps(d, comp_of(d, E1));
    if (bps.size() != 1)
      discipline("splitting component must carry exactly one basepoint");
    ElemRef at = d.d().bp_at.at(bps[0]);
    if (at != E1 && at != E2)
      discipline("splitting component's basepoint must sit on a saddle-site arc");
    consumed.insert(bps[0]);
    tr.bp_consumed.push_back(bps[0]);
  }

  // Cut and reassemble.
  std::vector<Portion> ports;
  CutPoint c1{E1, s1, ev.a.gap, ev.a.sub};
  CutPoint c2{E2, s2, ev.b.gap, ev.b.sub};
  if (E1 == E2) {
    cut_element(d, E1, {&c1, &c2}, ports);
  } else {
    cut_element(d, E1, {&c1}, ports);
    cut_element(d, E2, {&c2}, ports);
  }
  for (Portion &p : ports)
    p.bps.erase(std::remove_if(p.bps.begin(), p.bps.end(),
                               [&](BasepointId b) { return consumed.count(b); }),
                p.bps.end());

  std::vector<std::pair<PEnd, PEnd>> links{{inPE(c1), outPE(c2)},
                                           {inPE(c2), outPE(c1)}};
  std::vector<int> tags{1, 2};
  std::vector<Chain> chains = assemble_chains(ports, links, tags, E1);

  std::set<ElemRef> dead{E1, E2};
  Diagram nd = strip_elements(d, dead);
  std::set<ElemRef> flipped;
  if (!sameComp && !coherent)
    flip_component(nd, d, comp_of(d, E2), dead, flipped);
  tr.reversed = flipped;
  std::map<int, PortionFate> fate;
  std::set<LoopId> freshLoops;
  materialize_chains(d, nd, ports, chains, fate, freshLoops);

  // Emit basepoints just after the band junctions.
  BasepointId nb = d.fresh_basepoint();
  auto emit = [&](int tag) {
    for (Chain &ch : chains) {
      auto it = ch.junction_pos.find(tag);
      if (it == ch.junction_pos.end()) continue;
      std::vector<BasepointId> *v =
          ch.newElem.isLoop ? &nd.loops.at(ch.newElem.as_loop()).bps
                            : &nd.edges.at(ch.newElem.as_edge()).bps;
      v->insert(v->begin() + it->second, nb);
      tr.bp_emitted.push_back(nb);
      nb = BasepointId{nb.v + 1};
      return;
    }
    internal("saddle junction not found on any chain");
  };
  emit(1);
  if (sameComp) emit(2);

  // Fresh component ids for the changed strands.
  std::map<ElemRef, std::set<ComponentId>> origins;
  for (const Chain &ch : chains)
    for (const ChainItem &it : ch.items)
      origins[ch.newElem].insert(comp_of(d, ports[it.p].orig));
  rename_components(d, nd, origins, tr);
  size_t changed = 0;
  {
    std::set<ComponentId> newIds;
    for (auto &[o, n] : tr.comp_flow) newIds.insert(n);
    changed = newIds.size();
  }
  if (changed != (sameComp ? 2u : 1u))
    internal("saddle changed the component count unexpectedly");

  // Regions.
  Recon rec;
  rec.dead = dead;
  rec.flipped = flipped;
  rec.fresh_loops = freshLoops;
  if (sameCircle) {
    auto handleOf = [&](const CutPoint &c, Side s) {
      int p = outPE(c).first;
      const PortionFate &f = fate.at(p);
      return ArcSide{f.newElem, ports[p].adj(s, f.flipped)};
    };
    split_region_groups(rec, d, g, handleOf(c1, s1), handleOf(c2, s2),
                        circle_of(d, ev.a.at), ev.carry, exclude);
  }
  bridge_portions(rec, d, ports, fate);
  reconcile(d, nd, rec);

  for (ElemRef e : {E1, E2}) {
    auto &v = tr.succ[e];
    for (size_t i = 0; i < ports.size(); i++)
      if (ports[i].orig == e) v.push_back(fate.at((int)i).newElem);
    if (E1 == E2) break;
  }
  return ApplyResult{std::move(nd), std::move(tr)};
}

// ---------------------------------------------------------------------------
// Kinks (first Reidemeister family).

ApplyResult apply_r1add(const Diagram &d, const R1AddEvent &ev) {
  check_arcref(d, ev.at, "kink position");
  if (ev.chir != 1 && ev.chir != -1) site("kink chirality must be +1 or -1");
  ElemRef E = ev.at.at.elem;
  Side sd = ev.at.at.side;

  std::vector<Portion> ports;
  CutPoint cut{E, sd, ev.at.gap, ev.at.sub};
  cut_element(d, E, {&cut}, ports);

  std::set<ElemRef> dead{E};
  Diagram nd = strip_elements(d, dead);
  CrossingId c = d.fresh_crossing();
  EdgeId base = d.fresh_edge();
  bool isLoop = E.isLoop;
  // Strand order: lower portion, kink loop, upper portion (a free loop gives
  // one wrap-around edge plus the kink loop).
  EdgeId loE = base;
  EdgeId mE{base.v + 1};
  EdgeId hiE = isLoop ? loE : EdgeId{base.v + 2};
  ComponentId comp = comp_of(d, E);
  if (isLoop) {
    nd.edges[loE] = Edge{loE, comp, ports[0].bps};
  } else {
    nd.edges[loE] = Edge{loE, comp, ports[0].bps};
    nd.edges[hiE] = Edge{hiE, comp, ports[1].bps};
  }
  nd.edges[mE] = Edge{mE, comp, {}};

  // Counterclockwise slots; the first strand passage crosses over for +1.
  EdgeEnd loH{loE, true}, hiT{hiE, false}, mT{mE, false}, mH{mE, true};
  std::vector<EdgeEnd> v = sd == Side::L
                               ? std::vector<EdgeEnd>{hiT, mT, mH, loH}
                               : std::vector<EdgeEnd>{hiT, loH, mH, mT};
  if (ev.chir < 0) std::rotate(v.begin(), v.end() - 1, v.end());
  Crossing cr{c, {v[0], v[1], v[2], v[3]}};
  nd.crossings[c] = cr;

  if (!isLoop) {
    dock(nd, d.d().tail.at(E.as_edge()), loE, false);
    dock(nd, d.d().head.at(E.as_edge()), hiE, true);
  }

  EventTrace tr;
  tr.succ[E] = isLoop ? std::vector<ElemRef>{ElemRef::edge(loE), ElemRef::edge(mE)}
                      : std::vector<ElemRef>{ElemRef::edge(loE), ElemRef::edge(mE),
                                             ElemRef::edge(hiE)};

  Recon rec;
  rec.dead = dead;
  std::map<int, PortionFate> fate;
  fate[0] = {ElemRef::edge(loE), false};
  if (!isLoop) fate[1] = {ElemRef::edge(hiE), false};
  bridge_portions(rec, d, ports, fate);
  reconcile(d, nd, rec);
  return ApplyResult{std::move(nd), std::move(tr)};
}

ApplyResult apply_r1remove(const Diagram &d, const R1RemoveEvent &ev) {
  if (ev.face.elem.isLoop) site("kink removal face is not a monogon");
  if (!d.edges.count(ev.face.elem.as_edge()))
    site("kink removal names a missing edge");
  const Derived &der = d.d();
  const Face &f = der.faces[der.face_of_arc.at(ev.face)];
  if (f.walk.size() != 1) site("kink removal face is not a monogon");
  EdgeId m = f.walk[0].elem.as_edge();
  Dart mt = der.tail.at(m), mh = der.head.at(m);
  if (mt.c != mh.c) internal("monogon edge spans two crossings");
  CrossingId c = mt.c;
  if (!d.edges.at(m).bps.empty())
    discipline("kink removal requires a basepoint-free monogon edge");
  GlobalFace mg = region_of(d, f.walk[0]);
  if (mg.root || mg.def != f.key() || !region_is_empty_disk(d, f.walk[0]))
    site("monogon interior must be an empty bounded disk");

  // Strand: e1 -> c -> m -> c -> e2.
  EdgeEnd in = d.crossings.at(c).slots[(mt.slot + 2) & 3];
  EdgeEnd out = d.crossings.at(c).slots[(mh.slot + 2) & 3];
  if (!in.head || out.head) internal("kink strand ends are misoriented");
  EdgeId e1 = in.e, e2 = out.e;
  if (e1 == m || e2 == m) internal("monogon edge continues into itself");

  std::vector<Portion> ports;
  ports.push_back(Portion{ElemRef::edge(e1), d.edges.at(e1).bps,
                          der.tail.at(e1), der.head.at(e1)});
  std::vector<std::pair<PEnd, PEnd>> links;
  if (e1 == e2) {
    links.push_back({{0, 1}, {0, 0}});
  } else {
    ports.push_back(Portion{ElemRef::edge(e2), d.edges.at(e2).bps,
                            der.tail.at(e2), der.head.at(e2)});
    links.push_back({{0, 1}, {1, 0}});
  }

  std::set<ElemRef> dead{ElemRef::edge(m), ElemRef::edge(e1), ElemRef::edge(e2)};
  Diagram nd = strip_elements(d, dead);
  nd.crossings.erase(c);
  std::vector<Chain> chains =
      assemble_chains(ports, links, std::vector<int>{0}, ElemRef::edge(e1));
  std::map<int, PortionFate> fate;
  std::set<LoopId> freshLoops;
  materialize_chains(d, nd, ports, chains, fate, freshLoops);

  EventTrace tr;
  for (ElemRef e : dead) tr.succ[e] = {chains[0].newElem};

  Recon rec;
  rec.dead = dead;
  rec.dying = {mg};
  rec.fresh_loops = freshLoops;
  bridge_portions(rec, d, ports, fate);
  reconcile(d, nd, rec);
  return ApplyResult{std::move(nd), std::move(tr)};
}

// ---------------------------------------------------------------------------
// Finger moves (second Reidemeister family).

ApplyResult apply_r2add(const Diagram &d, const R2AddEvent &ev) {
  check_arcref(d, ev.a, "finger arc 1");
  check_arcref(d, ev.b, "finger arc 2");
  ElemRef Ea = ev.a.at.elem, Eb = ev.b.at.elem;
  Side sa = ev.a.at.side, sb = ev.b.at.side;
  if (Ea == Eb && std::pair(ev.a.gap, ev.a.sub) == std::pair(ev.b.gap, ev.b.sub))
    site("finger arcs name the same attach point");
  GlobalFace g = region_of(d, ev.a.at);
  if (region_of(d, ev.b.at) != g)
    site("finger arcs do not bound a common region");
  bool sameCircle = circle_of(d, ev.a.at) == circle_of(d, ev.b.at);
  std::set<PieceKey> exclude{piece_key_of(d, Ea), piece_key_of(d, Eb)};
  validate_carry(d, ev.carry, g, sameCircle, exclude);

  std::vector<Portion> ports;
  CutPoint ca{Ea, sa, ev.a.gap, ev.a.sub};
  CutPoint cb{Eb, sb, ev.b.gap, ev.b.sub};
  if (Ea == Eb) {
    cut_element(d, Ea, {&ca, &cb}, ports);
  } else {
    cut_element(d, Ea, {&ca}, ports);
    cut_element(d, Eb, {&cb}, ports);
  }

  std::set<ElemRef> dead{Ea, Eb};
  Diagram nd = strip_elements(d, dead);
  CrossingId c1 = d.fresh_crossing();
  CrossingId c2{c1.v + 1};

  // New edges: the portions in creation order, then the two finger tips.
  EdgeId base = d.fresh_edge();
  std::map<int, PortionFate> fate;
  for (size_t i = 0; i < ports.size(); i++) {
    EdgeId id{base.v + (std::uint32_t)i};
    nd.edges[id] = Edge{id, comp_of(d, ports[i].orig), ports[i].bps};
    if (ports[i].startD) dock(nd, *ports[i].startD, id, false);
    if (ports[i].endD) dock(nd, *ports[i].endD, id, true);
    fate[(int)i] = {ElemRef::edge(id), false};
  }
  EdgeId midA{base.v + (std::uint32_t)ports.size()};
  EdgeId midB{midA.v + 1};
  nd.edges[midA] = Edge{midA, comp_of(d, Ea), {}};
  nd.edges[midB] = Edge{midB, comp_of(d, Eb), {}};

  // Walk-relative roles at the two fresh crossings. The region g lies to the
  // walk's left along both arcs; the finger pushes from arc 1 across arc 2.
  int dA = sa == Side::L ? +1 : -1;
  int dB = sb == Side::L ? +1 : -1;
  auto edgeOf = [&](int p) { return fate.at(p).newElem.as_edge(); };
  EdgeId winA = edgeOf(sa == Side::L ? ca.lo : ca.hi);
  EdgeId woutA = edgeOf(sa == Side::L ? ca.hi : ca.lo);
  EdgeId winB = edgeOf(sb == Side::L ? cb.lo : cb.hi);
  EdgeId woutB = edgeOf(sb == Side::L ? cb.hi : cb.lo);

  std::vector<EdgeEnd> v1{{winA, dA > 0}, {midB, dB > 0},
                          {midA, dA < 0}, {woutB, dB < 0}};
  std::vector<EdgeEnd> v2{{woutA, dA < 0}, {winB, dB > 0},
                          {midA, dA > 0}, {midB, dB < 0}};
  if (ev.a_over) {
    std::rotate(v1.begin(), v1.end() - 1, v1.end());
    std::rotate(v2.begin(), v2.end() - 1, v2.end());
  }
  nd.crossings[c1] = Crossing{c1, {v1[0], v1[1], v1[2], v1[3]}};
  nd.crossings[c2] = Crossing{c2, {v2[0], v2[1], v2[2], v2[3]}};

  // Strand order: the finger tip follows the first attach point, the short
  // crossed section follows the second.
  EventTrace tr;
  if (Ea != Eb) {
    auto &va = tr.succ[Ea];
    for (size_t i = 0; i < ports.size(); i++)
      if (ports[i].orig == Ea) va.push_back(fate.at((int)i).newElem);
    va.insert(va.begin() + 1, ElemRef::edge(midA));
    auto &vb = tr.succ[Eb];
    for (size_t i = 0; i < ports.size(); i++)
      if (ports[i].orig == Eb) vb.push_back(fate.at((int)i).newElem);
    vb.insert(vb.begin() + 1, ElemRef::edge(midB));
  } else {
    bool aFirst = std::pair(ca.gap, ca.sub) < std::pair(cb.gap, cb.sub);
    ElemRef mid1 = ElemRef::edge(aFirst ? midA : midB);
    ElemRef mid2 = ElemRef::edge(aFirst ? midB : midA);
    auto f = [&](int i) { return fate.at(i).newElem; };
    auto &va = tr.succ[Ea];
    if (Ea.isLoop)
      va = {f(0), mid2, f(1), mid1};
    else
      va = {f(0), mid1, f(1), mid2, f(2)};
  }

  Recon rec;
  rec.dead = dead;
  if (sameCircle) {
    auto handleOf = [&](const CutPoint &c, Side s) {
      int p = outPE(c).first;
      return ArcSide{fate.at(p).newElem, s};
    };
    split_region_groups(rec, d, g, handleOf(ca, sa), handleOf(cb, sb),
                        circle_of(d, ev.a.at), ev.carry, exclude);
  }
  bridge_portions(rec, d, ports, fate);
  reconcile(d, nd, rec);
  return ApplyResult{std::move(nd), std::move(tr)};
}

ApplyResult apply_r2remove(const Diagram &d, const R2RemoveEvent &ev) {
  if (ev.face.elem.isLoop) site("finger removal face is not a bigon");
  if (!d.edges.count(ev.face.elem.as_edge()))
    site("finger removal names a missing edge");
  const Derived &der = d.d();
  const Face &f = der.faces[der.face_of_arc.at(ev.face)];
  if (f.walk.size() != 2) site("finger removal face is not a bigon");
  ArcSide x1 = f.walk[0], x2 = f.walk[1];
  if (x1.elem == x2.elem) site("bigon sides must be two distinct edges");
  EdgeId m1 = x1.elem.as_edge(), m2 = x2.elem.as_edge();
  if (!d.edges.at(m1).bps.empty() || !d.edges.at(m2).bps.empty())
    discipline("finger removal requires basepoint-free bigon edges");
  GlobalFace bg = region_of(d, x1);
  if (bg.root || bg.def != f.key() || !region_is_empty_disk(d, x1))
    site("bigon interior must be an empty bounded disk");

  Dart t1 = der.tail.at(m1), h1 = der.head.at(m1);
  Dart t2 = der.tail.at(m2), h2 = der.head.at(m2);
  CrossingId cA = t1.c, cB = h1.c;
  if (cA == cB) site("bigon corners must be two distinct crossings");
  if (!((t2.c == cA && h2.c == cB) || (t2.c == cB && h2.c == cA)))
    internal("bigon edges do not join the same two crossings");
  // The same strand must cross over at both corners.
  bool overAtTail = t1.slot % 2 == 1;
  bool overAtHead = h1.slot % 2 == 1;
  if (overAtTail != overAtHead)
    site("bigon is braided: no strand passes over at both corners");

  // Outer stubs continue the two strands beyond the corners.
  auto stubAt = [&](Dart dt) { return d.crossings.at(dt.c).slots[(dt.slot + 2) & 3]; };
  EdgeEnd a1 = stubAt(t1), a2 = stubAt(h1);
  EdgeEnd b1 = stubAt(t2), b2 = stubAt(h2);
  if (a1.head == false || a2.head == true || b1.head == false || b2.head == true)
    internal("bigon stub orientations are inconsistent");

  std::set<EdgeId> stubIds{a1.e, a2.e, b1.e, b2.e};
  if (stubIds.count(m1) || stubIds.count(m2))
    internal("bigon edge doubles as its own continuation");
  std::vector<Portion> ports;
  std::map<EdgeId, int> pidx;
  for (EdgeId e : stubIds) {
    pidx[e] = (int)ports.size();
    ports.push_back(Portion{ElemRef::edge(e), d.edges.at(e).bps, der.tail.at(e),
                            der.head.at(e)});
  }
  auto pe = [&](EdgeEnd ee) { return PEnd{pidx.at(ee.e), ee.head ? 1 : 0}; };
  std::vector<std::pair<PEnd, PEnd>> links{{pe(a1), pe(a2)}, {pe(b1), pe(b2)}};

  std::set<ElemRef> dead{ElemRef::edge(m1), ElemRef::edge(m2)};
  for (EdgeId e : stubIds) dead.insert(ElemRef::edge(e));
  Diagram nd = strip_elements(d, dead);
  nd.crossings.erase(cA);
  nd.crossings.erase(cB);
  std::vector<Chain> chains = assemble_chains(
      ports, links, std::vector<int>{0, 0}, ElemRef::edge(a1.e));
  std::map<int, PortionFate> fate;
  std::set<LoopId> freshLoops;
  materialize_chains(d, nd, ports, chains, fate, freshLoops);

  EventTrace tr;
  for (const Chain &ch : chains)
    for (const ChainItem &it : ch.items)
      tr.succ[ports[it.p].orig] = {ch.newElem};
  tr.succ[ElemRef::edge(m1)] = {fate.at(pidx.at(a1.e)).newElem};
  tr.succ[ElemRef::edge(m2)] = {fate.at(pidx.at(b1.e)).newElem};

  Recon rec;
  rec.dead = dead;
  rec.dying = {bg};
  rec.fresh_loops = freshLoops;
  bridge_portions(rec, d, ports, fate);
  reconcile(d, nd, rec);
  return ApplyResult{std::move(nd), std::move(tr)};
}

// ---------------------------------------------------------------------------
// Triangle move (third Reidemeister family).

ApplyResult apply_r3(const Diagram &d, const R3Event &ev) {
  if (ev.face.elem.isLoop) site("triangle face is not a trigon");
  if (!d.edges.count(ev.face.elem.as_edge()))
    site("triangle move names a missing edge");
  const Derived &der = d.d();
  const Face &f = der.faces[der.face_of_arc.at(ev.face)];
  if (f.walk.size() != 3) site("triangle face is not a trigon");
  std::array<ArcSide, 3> arcs{f.walk[0], f.walk[1], f.walk[2]};
  std::set<ElemRef> elems{arcs[0].elem, arcs[1].elem, arcs[2].elem};
  if (elems.size() != 3) site("trigon sides must be three distinct edges");
  for (ArcSide a : arcs)
    if (!d.edges.at(a.elem.as_edge()).bps.empty())
      discipline("triangle move requires basepoint-free trigon edges");
  GlobalFace tg = region_of(d, arcs[0]);
  if (tg.root || tg.def != f.key() || !region_is_empty_disk(d, arcs[0]))
    site("trigon interior must be an empty bounded disk");

  int tag = 0;
  for (int i = 0; i < 3; i++) tag = tag * 2 + (arcs[i].side == Side::R ? 1 : 0);
  if (tag != ev.variant)
    site("triangle variant tag does not match the site (expected " +
         std::to_string(tag) + ")");

  // Height order: one strand must pass over at both of its corners.
  std::array<CrossingId, 3> corner{};
  for (int i = 0; i < 3; i++) {
    EdgeId e = arcs[i].elem.as_edge();
    Dart leave = arcs[i].side == Side::L ? der.head.at(e) : der.tail.at(e);
    corner[i] = leave.c;
  }
  if (std::set<CrossingId>(corner.begin(), corner.end()).size() != 3)
    site("trigon corners must be three distinct crossings");
  std::map<ElemRef, int> overCount;
  for (int i = 0; i < 3; i++) {
    EdgeId e = arcs[i].elem.as_edge();
    overCount[arcs[i].elem] = 0;
    if (der.tail.at(e).slot % 2 == 1) overCount[arcs[i].elem]++;
    if (der.head.at(e).slot % 2 == 1) overCount[arcs[i].elem]++;
  }
  {
    std::set<int> counts;
    for (auto &[e, n] : overCount) counts.insert(n);
    if (counts != std::set<int>{0, 1, 2})
      site("trigon strands are braided: no strand passes over the other two");
  }

  // Each trigon edge trades places with the stubs at its two corners: the
  // strand's crossing order reverses while every dart keeps its role.
  Diagram nd = d;
  for (ArcSide a : arcs) {
    EdgeId t = a.elem.as_edge();
    Dart tT = der.tail.at(t), tH = der.head.at(t);
    EdgeEnd sIn = d.crossings.at(tT.c).slots[(tT.slot + 2) & 3];
    EdgeEnd sOut = d.crossings.at(tH.c).slots[(tH.slot + 2) & 3];
    if (!sIn.head || sOut.head) internal("trigon stub orientations inconsistent");
    nd.crossings.at(tT.c).slots[(tT.slot + 2) & 3] = EdgeEnd{t, true};
    nd.crossings.at(tT.c).slots[tT.slot] = EdgeEnd{sOut.e, false};
    nd.crossings.at(tH.c).slots[tH.slot] = EdgeEnd{sIn.e, true};
    nd.crossings.at(tH.c).slots[(tH.slot + 2) & 3] = EdgeEnd{t, false};
  }

  Recon rec;
  rec.dying = {tg};
  for (ArcSide a : arcs) {
    rec.moved.insert(ArcSide{a.elem, Side::L});
    rec.moved.insert(ArcSide{a.elem, Side::R});
  }
  reconcile(d, nd, rec);
  return ApplyResult{std::move(nd), {}};
}

}  // namespace

ApplyResult apply_event(const Diagram &d, const Event &e) {
  if (!d.der) internal("input still is not sealed");
  ApplyResult r = std::visit(
      [&](const auto &ev) -> ApplyResult {
        using T = std::decay_t<decltype(ev)>;
        if constexpr (std::is_same_v<T, BirthEvent>) return apply_birth(d, ev);
        else if constexpr (std::is_same_v<T, DeathEvent>) return apply_death(d, ev);
        else if constexpr (std::is_same_v<T, SlideEvent>) return apply_slide(d, ev);
        else if constexpr (std::is_same_v<T, R1AddEvent>) return apply_r1add(d, ev);
        else if constexpr (std::is_same_v<T, R1RemoveEvent>) return apply_r1remove(d, ev);
        else if constexpr (std::is_same_v<T, R2AddEvent>) return apply_r2add(d, ev);
        else if constexpr (std::is_same_v<T, R2RemoveEvent>) return apply_r2remove(d, ev);
        else if constexpr (std::is_same_v<T, R3Event>) return apply_r3(d, ev);
        else return apply_saddle(d, ev);
      },
      e);
  auto rep = validate_diagram(r.diagram);
  if (!rep.ok())
    internal("produced an invalid still: " + rep.problems.front());
  return r;
}

}  // namespace mmc
