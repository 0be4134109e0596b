#include <algorithm>
#include <map>
#include <sstream>
#include <stdexcept>

#include "mmc/diagram.hpp"

// Canonical form. Each graph piece is serialized by a breadth-first scan of
// its rotation system from a starting flag (a dart); minimizing the rendered
// subtree text over all flags makes the result label-independent. Pieces are
// assembled over the nesting forest, children grouped per hosting face and
// sorted by their own canonical texts.
namespace mmc {

namespace {

struct FaceKey {
  int e = 0, s = 0;
  auto operator<=>(const FaceKey &) const = default;
};

struct PieceScan {
  std::vector<CrossingId> xorder;
  std::map<CrossingId, int> xnum, xrot;
  std::vector<EdgeId> eorder;
  std::map<EdgeId, int> enum_;
  std::string serial;
};

// Scan a graph piece from one flag, producing crossing/edge numbering and the
// flat serial (no nesting data).
PieceScan scan_piece(const Diagram &d, Dart flag) {
  const Derived &der = d.d();
  PieceScan ps;
  ps.xnum[flag.c] = 0;
  ps.xrot[flag.c] = flag.slot;
  ps.xorder.push_back(flag.c);
  std::ostringstream out;
  auto edge_idx = [&](EdgeId e) {
    auto it = ps.enum_.find(e);
    if (it != ps.enum_.end()) return it->second;
    int idx = (int)ps.eorder.size();
    ps.eorder.push_back(e);
    ps.enum_[e] = idx;
    return idx;
  };
  for (size_t i = 0; i < ps.xorder.size(); i++) {
    CrossingId c = ps.xorder[i];
    int r = ps.xrot[c];
    out << (i ? ";" : "") << "x" << (r & 1) << ":";
    for (int t = 0; t < 4; t++) {
      int s = (t + r) & 3;
      const EdgeEnd &occ = d.crossings.at(c).slots[s];
      Dart other = occ.head ? der.tail.at(occ.e) : der.head.at(occ.e);
      auto it = ps.xnum.find(other.c);
      if (it == ps.xnum.end()) {
        ps.xnum[other.c] = (int)ps.xorder.size();
        ps.xrot[other.c] = other.slot;
        ps.xorder.push_back(other.c);
        it = ps.xnum.find(other.c);
      }
      int t2 = (other.slot - ps.xrot[other.c]) & 3;
      out << "(" << edge_idx(occ.e) << "," << it->second << "," << t2 << ","
          << (occ.head ? "h" : "t") << ","
          << d.edges.at(occ.e).bps.size() << ")";
    }
  }
  ps.serial = out.str();
  return ps;
}

FaceKey face_key_under(const Diagram &d, const PieceScan &ps, ArcSide a) {
  const Derived &der = d.d();
  const Face &f = der.faces[der.face_of_arc.at(a)];
  FaceKey best{1 << 30, 0};
  for (const ArcSide &w : f.walk) {
    auto it = ps.enum_.find(w.elem.as_edge());
    if (it == ps.enum_.end()) continue;
    FaceKey k{it->second, w.side == Side::L ? 0 : 1};
    best = std::min(best, k);
  }
  return best;
}

struct Ctx {
  const Diagram &d;
  std::map<PieceKey, std::string> text;
  std::map<PieceKey, Dart> flag;
};

std::string subtree(Ctx &cx, PieceKey pk);

// Children of a region, with canonical texts, sorted.
std::vector<std::pair<std::string, PieceKey>> children_of(Ctx &cx,
                                                          GlobalFace g) {
  std::vector<std::pair<std::string, PieceKey>> out;
  auto it = cx.d.d().hosted.find(g);
  if (it == cx.d.d().hosted.end()) return out;
  for (PieceKey ch : it->second) out.emplace_back(subtree(cx, ch), ch);
  std::sort(out.begin(), out.end());
  return out;
}

std::string render_group(const std::vector<std::pair<std::string, PieceKey>> &ch) {
  std::string s = "[";
  for (size_t i = 0; i < ch.size(); i++) {
    if (i) s += ",";
    s += ch[i].first;
  }
  return s + "]";
}

std::string subtree(Ctx &cx, PieceKey pk) {
  auto memo = cx.text.find(pk);
  if (memo != cx.text.end()) return memo->second;
  std::string best;
  if (pk.isLoop) {
    const FreeLoop &l = cx.d.loops.at(LoopId{pk.id});
    auto inner = children_of(
        cx, GlobalFace::of(ArcSide{ElemRef::loop(l.id), loop_inner(l)}));
    std::ostringstream out;
    out << "O{" << (l.orient > 0 ? "+" : "-") << "," << l.bps.size() << "|"
        << render_group(inner) << "}";
    best = out.str();
    cx.flag[pk] = Dart{};
  } else {
    // Children keyed by defining face; their texts are flag-independent, so
    // compute them once up front.
    std::vector<std::pair<ArcSide, std::vector<std::pair<std::string, PieceKey>>>>
        groups;
    for (const Face &f : cx.d.d().faces) {
      if (cx.d.d().piece_of_elem.at(f.key().elem) != pk) continue;
      auto ch = children_of(cx, GlobalFace::of(f.key()));
      if (!ch.empty()) groups.emplace_back(f.key(), ch);
    }
    ArcSide outer_arc = local_face_key(cx.d, cx.d.outer.at(pk));
    bool first = true;
    for (const auto &[cid, c] : cx.d.crossings) {
      if (cx.d.d().piece_of_elem.at(ElemRef::edge(c.slots[0].e)) != pk) continue;
      for (int s = 0; s < 4; s++) {
        Dart fl{cid, s};
        PieceScan ps = scan_piece(cx.d, fl);
        std::ostringstream out;
        out << "G{" << ps.serial << "|";
        std::vector<std::pair<FaceKey, std::string>> gs;
        for (auto &[fk, ch] : groups)
          gs.emplace_back(face_key_under(cx.d, ps, fk), render_group(ch));
        std::sort(gs.begin(), gs.end());
        for (auto &[k, body] : gs)
          out << "f" << k.e << "." << k.s << body;
        FaceKey ok = face_key_under(cx.d, ps, outer_arc);
        out << "|out:" << ok.e << "." << ok.s << "}";
        std::string t = out.str();
        if (first || t < best) {
          best = t;
          cx.flag[pk] = fl;
          first = false;
        }
      }
    }
  }
  cx.text[pk] = best;
  return best;
}

void assign_labels(Ctx &cx, GlobalFace g, Labeling &lab, int &nx, int &ne,
                   int &no, int &nb, int &nk) {
  auto ch = children_of(cx, g);
  for (auto &[text, pk] : ch) {
    if (pk.isLoop) {
      const FreeLoop &l = cx.d.loops.at(LoopId{pk.id});
      lab.loop[l.id] = no++;
      if (!lab.comp.count(l.comp)) lab.comp[l.comp] = nk++;
      for (BasepointId b : l.bps) lab.bp[b] = nb++;
      assign_labels(cx, GlobalFace::of(ArcSide{ElemRef::loop(l.id), loop_inner(l)}),
                    lab, nx, ne, no, nb, nk);
    } else {
      PieceScan ps = scan_piece(cx.d, cx.flag.at(pk));
      for (CrossingId c : ps.xorder) lab.crossing[c] = nx++;
      for (EdgeId e : ps.eorder) {
        lab.edge[e] = ne++;
        const Edge &ed = cx.d.edges.at(e);
        if (!lab.comp.count(ed.comp)) lab.comp[ed.comp] = nk++;
        for (BasepointId b : ed.bps) lab.bp[b] = nb++;
      }
      // Recurse into this piece's bounded faces in canonical face order.
      std::vector<std::pair<FaceKey, ArcSide>> fks;
      for (const Face &f : cx.d.d().faces) {
        if (cx.d.d().piece_of_elem.at(f.key().elem) != pk) continue;
        fks.emplace_back(face_key_under(cx.d, ps, f.key()), f.key());
      }
      std::sort(fks.begin(), fks.end());
      ArcSide outer_arc = local_face_key(cx.d, cx.d.outer.at(pk));
      for (auto &[k, a] : fks) {
        if (a == outer_arc) continue;
        assign_labels(cx, GlobalFace::of(a), lab, nx, ne, no, nb, nk);
      }
    }
  }
}

void require_valid(const Diagram &d) {
  auto rep = validate_diagram(d);
  if (!rep.ok())
    throw std::invalid_argument("malformed diagram: " + rep.problems.front());
}

}  // namespace

std::string canonical_code(const Diagram &d) {
  require_valid(d);
  Ctx cx{d, {}, {}};
  auto roots = children_of(cx, GlobalFace::Root());
  std::string s = "D1(";
  for (size_t i = 0; i < roots.size(); i++) {
    if (i) s += ",";
    s += roots[i].first;
  }
  return s + ")";
}

Labeling canonical_labeling(const Diagram &d) {
  require_valid(d);
  Ctx cx{d, {}, {}};
  Labeling lab;
  int nx = 0, ne = 0, no = 0, nb = 0, nk = 0;
  assign_labels(cx, GlobalFace::Root(), lab, nx, ne, no, nb, nk);
  return lab;
}

}  // namespace mmc
