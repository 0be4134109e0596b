#include "mmc/textio.hpp"

#include <algorithm>
#include <charconv>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "mmc/movie.hpp"

namespace mmc {
namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

// --- tokens -----------------------------------------------------------------

struct Tok {
  std::string text;
  int line = 0;
  int col = 0;  // 1-based
};

struct Line {
  std::vector<Tok> toks;
};

Span span_of(const Tok &t) { return Span{t.line, t.col, (int)t.text.size()}; }

[[noreturn]] void fail(Span s, bool semantic, const std::string &msg) {
  throw ParseError(s, semantic, msg);
}
[[noreturn]] void fail(const Tok &t, bool semantic, const std::string &msg) {
  fail(span_of(t), semantic, msg);
}

// Line-oriented: '#' starts a comment, '(' and ')' are single-char tokens,
// everything else splits on blanks. Blank lines vanish.
struct Source {
  std::vector<Line> lines;
  int last_line = 1;  // for end-of-input spans
};

Source tokenize(const std::string &src) {
  Source out;
  int lineno = 1;
  size_t pos = 0;
  while (pos <= src.size()) {
    size_t nl = src.find('\n', pos);
    std::string_view line(src.data() + pos,
                          (nl == std::string::npos ? src.size() : nl) - pos);
    if (size_t h = line.find('#'); h != std::string_view::npos)
      line = line.substr(0, h);
    Line cur;
    size_t i = 0;
    while (i < line.size()) {
      char c = line[i];
      if (c == ' ' || c == '\t' || c == '\r') {
        i++;
        continue;
      }
      if (c == '(' || c == ')') {
        cur.toks.push_back({std::string(1, c), lineno, (int)i + 1});
        i++;
        continue;
      }
      size_t j = i;
      while (j < line.size() && line[j] != ' ' && line[j] != '\t' &&
             line[j] != '\r' && line[j] != '(' && line[j] != ')')
        j++;
      cur.toks.push_back({std::string(line.substr(i, j - i)), lineno,
                          (int)i + 1});
      i = j;
    }
    if (!cur.toks.empty()) out.lines.push_back(std::move(cur));
    out.last_line = lineno;
    if (nl == std::string::npos) break;
    pos = nl + 1;
    lineno++;
  }
  return out;
}

struct Cursor {
  const Source *src = nullptr;
  size_t i = 0;
  bool done() const { return i >= src->lines.size(); }
  const Line &peek() const { return src->lines[i]; }
  const Line &next() { return src->lines[i++]; }
  Span eof_span() const { return Span{src->last_line, 1, 0}; }
  [[noreturn]] void fail_eof(const std::string &expected) const {
    fail(eof_span(), false, "unexpected end of input; expected " + expected);
  }
};

// --- token readers ----------------------------------------------------------

std::uint32_t read_num(const Tok &t, std::string_view s,
                       const std::string &what) {
  std::uint32_t v{};
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || p != s.data() + s.size())
    fail(t, false, "expected " + what + ", got '" + t.text + "'");
  return v;
}

int read_int(const Tok &t, const std::string &what) {
  std::string_view s = t.text;
  if (!s.empty() && s[0] == '+') s = s.substr(1);
  int v{};
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || p != s.data() + s.size())
    fail(t, false, "expected " + what + ", got '" + t.text + "'");
  return v;
}

std::uint32_t read_prefixed(const Tok &t, std::string_view s, char prefix,
                            const std::string &what) {
  if (s.size() < 2 || s[0] != prefix)
    fail(t, false, "expected " + what + " (" + prefix + "<n>), got '" +
                       t.text + "'");
  return read_num(t, s.substr(1), what);
}

CrossingId read_crossing(const Tok &t) {
  return CrossingId{read_prefixed(t, t.text, 'c', "crossing id")};
}
EdgeId read_edge(const Tok &t) {
  return EdgeId{read_prefixed(t, t.text, 'e', "edge id")};
}
LoopId read_loop(const Tok &t) {
  return LoopId{read_prefixed(t, t.text, 'o', "loop id")};
}
BasepointId read_bp(const Tok &t) {
  return BasepointId{read_prefixed(t, t.text, 'b', "basepoint id")};
}
ComponentId read_comp(const Tok &t) {
  return ComponentId{read_prefixed(t, t.text, 'k', "component id")};
}

ElemRef read_elem_part(const Tok &t, std::string_view s) {
  if (s.size() >= 2 && s[0] == 'e')
    return ElemRef{false, read_num(t, s.substr(1), "edge id")};
  if (s.size() >= 2 && s[0] == 'o')
    return ElemRef{true, read_num(t, s.substr(1), "loop id")};
  fail(t, false,
       "expected element token (e<n> or o<n>), got '" + std::string(s) + "'");
}

ElemRef read_elem(const Tok &t) { return read_elem_part(t, t.text); }

PieceKey read_piece(const Tok &t) {
  ElemRef e = read_elem(t);
  return PieceKey{e.isLoop, e.id};
}

Side read_side_part(const Tok &t, std::string_view s) {
  if (s == "L") return Side::L;
  if (s == "R") return Side::R;
  fail(t, false, "expected side L or R, got '" + std::string(s) + "'");
}

ArcSide read_arcside_part(const Tok &t, std::string_view s) {
  size_t dot = s.find('.');
  if (dot == std::string_view::npos)
    fail(t, false,
         "expected arc side <elem>.<L|R>, got '" + std::string(s) + "'");
  return ArcSide{read_elem_part(t, s.substr(0, dot)),
                 read_side_part(t, s.substr(dot + 1))};
}

ArcSide read_arcside(const Tok &t) { return read_arcside_part(t, t.text); }

// <elem>.<side>[:<gap>[:<sub>]]
ArcRef read_arcref(const Tok &t) {
  std::string_view s = t.text;
  ArcRef r;
  size_t c1 = s.find(':');
  r.at = read_arcside_part(t, s.substr(0, c1));
  if (c1 == std::string_view::npos) return r;
  std::string_view rest = s.substr(c1 + 1);
  size_t c2 = rest.find(':');
  r.gap = (int)read_num(t, rest.substr(0, c2), "gap index");
  if (c2 != std::string_view::npos)
    r.sub = (int)read_num(t, rest.substr(c2 + 1), "sub index");
  return r;
}

GlobalFace read_face(const Tok &t) {
  if (t.text == "root") return GlobalFace::Root();
  return GlobalFace::of(read_arcside(t));
}

int read_sign(const Tok &t) {
  int v = read_int(t, "orientation +1 or -1");
  if (v != 1 && v != -1)
    fail(t, false, "expected orientation +1 or -1, got '" + t.text + "'");
  return v;
}

Dart read_dart(const Tok &t) {
  std::string_view s = t.text;
  size_t dot = s.find('.');
  if (dot == std::string_view::npos || dot + 1 >= s.size())
    fail(t, false, "expected dart <crossing>.<slot>, got '" + t.text + "'");
  Dart d;
  d.c = CrossingId{read_prefixed(t, s.substr(0, dot), 'c', "crossing id")};
  d.slot = (int)read_num(t, s.substr(dot + 1), "slot index");
  if (d.slot < 0 || d.slot > 3)
    fail(t, false, "slot index must be 0..3 in '" + t.text + "'");
  return d;
}

EdgeEnd read_edge_end(const Tok &t) {
  std::string_view s = t.text;
  size_t dot = s.find('.');
  if (dot == std::string_view::npos)
    fail(t, false, "expected edge end <edge>.<t|h>, got '" + t.text + "'");
  EdgeEnd e;
  e.e = EdgeId{read_prefixed(t, s.substr(0, dot), 'e', "edge id")};
  std::string_view h = s.substr(dot + 1);
  if (h == "h")
    e.head = true;
  else if (h == "t")
    e.head = false;
  else
    fail(t, false, "expected edge end suffix t or h in '" + t.text + "'");
  return e;
}

// --- token writers ----------------------------------------------------------

std::string side_s(Side s) { return s == Side::L ? "L" : "R"; }
std::string elem_s(ElemRef e) {
  return (e.isLoop ? "o" : "e") + std::to_string(e.id);
}
std::string arcside_s(ArcSide a) { return elem_s(a.elem) + "." + side_s(a.side); }
std::string arcref_s(const ArcRef &r) {
  return arcside_s(r.at) + ":" + std::to_string(r.gap) + ":" +
         std::to_string(r.sub);
}
std::string face_s(const GlobalFace &f) {
  return f.root ? "root" : arcside_s(f.def);
}
std::string piece_s(PieceKey p) {
  return (p.isLoop ? "o" : "e") + std::to_string(p.id);
}
std::string dart_s(Dart d) { return show(d.c) + "." + std::to_string(d.slot); }
std::string edge_end_s(EdgeEnd e) {
  return show(e.e) + (e.head ? ".h" : ".t");
}
std::string signed_s(int v) {
  return (v >= 0 ? "+" : "") + std::to_string(v);
}

void write_carry(std::string &out, const std::vector<PieceKey> &carry) {
  if (carry.empty()) return;
  out += " carry";
  for (PieceKey p : carry) out += " " + piece_s(p);
}

void write_event(std::string &out, const Event &ev) {
  std::visit(
      overloaded{
          [&](const BirthEvent &e) {
            out += "birth " + face_s(e.at) + " " + signed_s(e.orient) + " " +
                   show(e.loop) + " " + show(e.comp) + " " + show(e.bp);
          },
          [&](const DeathEvent &e) { out += "death " + show(e.loop); },
          [&](const SlideEvent &e) {
            out += "slide " + show(e.bp) + " " + signed_s(e.steps);
          },
          [&](const R1AddEvent &e) {
            out += "r1add " + arcref_s(e.at) + " " + signed_s(e.chir);
          },
          [&](const R1RemoveEvent &e) { out += "r1rem " + arcside_s(e.face); },
          [&](const R2AddEvent &e) {
            out += "r2add " + arcref_s(e.a) + " " + arcref_s(e.b) +
                   (e.a_over ? " over" : " under");
            write_carry(out, e.carry);
          },
          [&](const R2RemoveEvent &e) { out += "r2rem " + arcside_s(e.face); },
          [&](const R3Event &e) {
            out += "r3 " + arcside_s(e.face) + " " + std::to_string(e.variant);
          },
          [&](const SaddleEvent &e) {
            out += "saddle " + arcref_s(e.a) + " " + arcref_s(e.b) +
                   (e.coherent ? " coh" : " inc");
            write_carry(out, e.carry);
          },
      },
      ev);
  out += "\n";
}

// --- event reader -----------------------------------------------------------

// Identifier uses an event makes of the current still, for semantic checks.
struct IdRef {
  Tok tok;
  enum Kind { Elem, Bp, Loop } kind = Elem;
  ElemRef elem;       // Elem
  BasepointId bp;     // Bp
  LoopId loop;        // Loop
};

struct ReadEvent {
  Event ev;
  std::vector<IdRef> refs;
};

const char *const kEventKinds =
    "birth, death, slide, r1add, r1rem, r2add, r2rem, r3, saddle";

void check_arity(const Line &ln, size_t n, const char *shape) {
  if (ln.toks.size() != n)
    fail(ln.toks[0], false, std::string("expected '") + shape + "'");
}

std::vector<PieceKey> read_carry(const Line &ln, size_t from,
                                 std::vector<IdRef> &refs) {
  std::vector<PieceKey> carry;
  if (from >= ln.toks.size()) return carry;
  if (ln.toks[from].text != "carry")
    fail(ln.toks[from], false, "expected 'carry' or end of line");
  if (from + 1 >= ln.toks.size())
    fail(ln.toks[from], false, "expected piece tokens after 'carry'");
  for (size_t i = from + 1; i < ln.toks.size(); i++) {
    PieceKey p = read_piece(ln.toks[i]);
    refs.push_back({ln.toks[i], IdRef::Elem, ElemRef{p.isLoop, p.id}, {}, {}});
    carry.push_back(p);
  }
  return carry;
}

ReadEvent read_event(const Line &ln) {
  const Tok &kw = ln.toks[0];
  const std::string &k = kw.text;
  ReadEvent r;
  auto elem_ref = [&](const Tok &t, ElemRef e) {
    r.refs.push_back({t, IdRef::Elem, e, {}, {}});
  };
  if (k == "birth") {
    check_arity(ln, 6, "birth <face> <orient> <loop> <comp> <bp>");
    BirthEvent e;
    e.at = read_face(ln.toks[1]);
    if (!e.at.root) elem_ref(ln.toks[1], e.at.def.elem);
    e.orient = read_sign(ln.toks[2]);
    e.loop = read_loop(ln.toks[3]);
    e.comp = read_comp(ln.toks[4]);
    e.bp = read_bp(ln.toks[5]);
    r.ev = e;
  } else if (k == "death") {
    check_arity(ln, 2, "death <loop>");
    DeathEvent e{read_loop(ln.toks[1])};
    r.refs.push_back({ln.toks[1], IdRef::Loop, {}, {}, e.loop});
    r.ev = e;
  } else if (k == "slide") {
    check_arity(ln, 3, "slide <bp> <steps>");
    SlideEvent e;
    e.bp = read_bp(ln.toks[1]);
    e.steps = read_int(ln.toks[2], "step count");
    r.refs.push_back({ln.toks[1], IdRef::Bp, {}, e.bp, {}});
    r.ev = e;
  } else if (k == "r1add") {
    check_arity(ln, 3, "r1add <arcref> <chir>");
    R1AddEvent e;
    e.at = read_arcref(ln.toks[1]);
    e.chir = read_sign(ln.toks[2]);
    elem_ref(ln.toks[1], e.at.at.elem);
    r.ev = e;
  } else if (k == "r1rem") {
    check_arity(ln, 2, "r1rem <arcside>");
    R1RemoveEvent e{read_arcside(ln.toks[1])};
    elem_ref(ln.toks[1], e.face.elem);
    r.ev = e;
  } else if (k == "r2add") {
    if (ln.toks.size() < 4)
      fail(kw, false, "expected 'r2add <arcref> <arcref> <over|under>'");
    R2AddEvent e;
    e.a = read_arcref(ln.toks[1]);
    e.b = read_arcref(ln.toks[2]);
    if (ln.toks[3].text == "over")
      e.a_over = true;
    else if (ln.toks[3].text == "under")
      e.a_over = false;
    else
      fail(ln.toks[3], false, "expected 'over' or 'under'");
    elem_ref(ln.toks[1], e.a.at.elem);
    elem_ref(ln.toks[2], e.b.at.elem);
    e.carry = read_carry(ln, 4, r.refs);
    r.ev = e;
  } else if (k == "r2rem") {
    check_arity(ln, 2, "r2rem <arcside>");
    R2RemoveEvent e{read_arcside(ln.toks[1])};
    elem_ref(ln.toks[1], e.face.elem);
    r.ev = e;
  } else if (k == "r3") {
    check_arity(ln, 3, "r3 <arcside> <variant>");
    R3Event e;
    e.face = read_arcside(ln.toks[1]);
    e.variant = (int)read_num(ln.toks[2], ln.toks[2].text, "variant 0..7");
    if (e.variant > 7)
      fail(ln.toks[2], false, "expected variant 0..7, got '" +
                                  ln.toks[2].text + "'");
    elem_ref(ln.toks[1], e.face.elem);
    r.ev = e;
  } else if (k == "saddle") {
    if (ln.toks.size() < 4)
      fail(kw, false, "expected 'saddle <arcref> <arcref> <coh|inc>'");
    SaddleEvent e;
    e.a = read_arcref(ln.toks[1]);
    e.b = read_arcref(ln.toks[2]);
    if (ln.toks[3].text == "coh")
      e.coherent = true;
    else if (ln.toks[3].text == "inc")
      e.coherent = false;
    else
      fail(ln.toks[3], false, "expected 'coh' or 'inc'");
    elem_ref(ln.toks[1], e.a.at.elem);
    elem_ref(ln.toks[2], e.b.at.elem);
    e.carry = read_carry(ln, 4, r.refs);
    r.ev = e;
  } else {
    fail(kw, false, "expected an event line (" + std::string(kEventKinds) +
                        ") or 'end', got '" + k + "'");
  }
  return r;
}

void check_event_refs(const Diagram &d, const std::vector<IdRef> &refs) {
  for (const IdRef &r : refs) {
    switch (r.kind) {
      case IdRef::Elem: {
        bool ok = r.elem.isLoop ? d.loops.count(r.elem.as_loop()) > 0
                                : d.edges.count(r.elem.as_edge()) > 0;
        if (!ok)
          fail(r.tok, true,
               std::string("unknown ") + (r.elem.isLoop ? "loop " : "edge ") +
                   elem_s(r.elem));
        break;
      }
      case IdRef::Bp:
        if (!d.d().bp_at.count(r.bp))
          fail(r.tok, true, "unknown basepoint " + show(r.bp));
        break;
      case IdRef::Loop:
        if (!d.loops.count(r.loop))
          fail(r.tok, true, "unknown loop " + show(r.loop));
        break;
    }
  }
}

// --- movie block ------------------------------------------------------------

void expect_kw(Cursor &cur, const std::string &kw) {
  if (cur.done()) cur.fail_eof("'" + kw + "'");
  const Line &ln = cur.next();
  if (ln.toks[0].text != kw)
    fail(ln.toks[0], false, "expected '" + kw + "', got '" + ln.toks[0].text + "'");
  if (ln.toks.size() != 1)
    fail(ln.toks[1], false, "unexpected token after '" + kw + "'");
}

void expect_format(Cursor &cur) {
  if (cur.done()) cur.fail_eof("'format 1'");
  const Line &ln = cur.next();
  if (ln.toks[0].text != "format")
    fail(ln.toks[0], false, "expected 'format 1' header");
  if (ln.toks.size() != 2 || ln.toks[1].text != "1")
    fail(ln.toks.size() > 1 ? ln.toks[1] : ln.toks[0], false,
         "unsupported format version; expected 'format 1'");
}

void expect_eof(Cursor &cur) {
  if (!cur.done())
    fail(cur.peek().toks[0], false, "expected end of input, got '" +
                                        cur.peek().toks[0].text + "'");
}

// Parses `movie\ninitial:\n<X/E/O/N lines>\n<event lines>\nend`.
Movie parse_movie_block(Cursor &cur) {
  expect_kw(cur, "movie");
  if (cur.done()) cur.fail_eof("'initial:'");
  Span initial_span = span_of(cur.peek().toks[0]);
  expect_kw(cur, "initial:");

  Diagram dia;
  struct DartDecl {
    Tok tok;
    EdgeId e;
    Dart d;
    bool head;
  };
  std::vector<DartDecl> dart_decls;
  std::vector<std::pair<Tok, EdgeId>> slot_edges;
  std::vector<std::pair<Tok, ElemRef>> elem_refs;
  struct HostFaceCheck {
    Tok tok;
    PieceKey hostpiece;
    GlobalFace face;
  };
  std::vector<HostFaceCheck> hostface_checks;
  struct OuterCheck {
    Tok tok;
    PieceKey piece;
    ArcSide outer;
  };
  std::vector<OuterCheck> outer_checks;

  while (!cur.done()) {
    const std::string &k = cur.peek().toks[0].text;
    if (k != "X" && k != "E" && k != "O" && k != "N") break;
    const Line &ln = cur.next();
    if (k == "X") {
      check_arity(ln, 8, "X <id> (<end> <end> <end> <end>)");
      if (ln.toks[2].text != "(")
        fail(ln.toks[2], false, "expected '(' before the slot list");
      if (ln.toks[7].text != ")")
        fail(ln.toks[7], false, "expected ')' after the slot list");
      Crossing c;
      c.id = read_crossing(ln.toks[1]);
      if (dia.crossings.count(c.id))
        fail(ln.toks[1], true, "duplicate crossing id " + show(c.id));
      for (int s = 0; s < 4; s++) {
        c.slots[s] = read_edge_end(ln.toks[3 + s]);
        slot_edges.push_back({ln.toks[3 + s], c.slots[s].e});
      }
      dia.crossings[c.id] = c;
    } else if (k == "E") {
      if (ln.toks.size() < 5)
        fail(ln.toks[0], false, "expected 'E <id> <tail> <head> <comp> [bp...]'");
      Edge e;
      e.id = read_edge(ln.toks[1]);
      if (dia.edges.count(e.id))
        fail(ln.toks[1], true, "duplicate edge id " + show(e.id));
      dart_decls.push_back({ln.toks[2], e.id, read_dart(ln.toks[2]), false});
      dart_decls.push_back({ln.toks[3], e.id, read_dart(ln.toks[3]), true});
      e.comp = read_comp(ln.toks[4]);
      for (size_t i = 5; i < ln.toks.size(); i++)
        e.bps.push_back(read_bp(ln.toks[i]));
      dia.edges[e.id] = e;
    } else if (k == "O") {
      if (ln.toks.size() < 5)
        fail(ln.toks[0], false,
             "expected 'O <id> <comp> <orient> <host> [bp...]'");
      FreeLoop l;
      l.id = read_loop(ln.toks[1]);
      if (dia.loops.count(l.id))
        fail(ln.toks[1], true, "duplicate loop id " + show(l.id));
      l.comp = read_comp(ln.toks[2]);
      l.orient = read_sign(ln.toks[3]);
      GlobalFace host = read_face(ln.toks[4]);
      if (!host.root) elem_refs.push_back({ln.toks[4], host.def.elem});
      for (size_t i = 5; i < ln.toks.size(); i++)
        l.bps.push_back(read_bp(ln.toks[i]));
      dia.loops[l.id] = l;
      dia.host[PieceKey{true, l.id.v}] = host;
    } else {  // N
      check_arity(ln, 5, "N <piece> <hostpiece> <hostface> <outer>");
      PieceKey piece = read_piece(ln.toks[1]);
      if (piece.isLoop)
        fail(ln.toks[1], false,
             "N lines describe graph pieces; loop hosting sits on the O line");
      elem_refs.push_back({ln.toks[1], ElemRef{piece.isLoop, piece.id}});
      if (dia.host.count(piece))
        fail(ln.toks[1], true, "duplicate nesting line for piece " +
                                   piece_s(piece));
      GlobalFace face;
      if (ln.toks[2].text == "root") {
        if (ln.toks[3].text != "root")
          fail(ln.toks[3], false, "host piece root requires host face root");
        face = GlobalFace::Root();
      } else {
        PieceKey hostpiece = read_piece(ln.toks[2]);
        elem_refs.push_back({ln.toks[2], ElemRef{hostpiece.isLoop, hostpiece.id}});
        if (ln.toks[3].text == "root")
          fail(ln.toks[3], false, "host face root requires host piece root");
        face = GlobalFace::of(read_arcside(ln.toks[3]));
        elem_refs.push_back({ln.toks[3], face.def.elem});
        hostface_checks.push_back({ln.toks[3], hostpiece, face});
      }
      ArcSide outer = read_arcside(ln.toks[4]);
      if (outer.elem.isLoop)
        fail(ln.toks[4], false,
             "the outer face of a graph piece must name an edge arc");
      elem_refs.push_back({ln.toks[4], outer.elem});
      outer_checks.push_back({ln.toks[4], piece, outer});
      dia.host[piece] = face;
      dia.outer[piece] = outer;
    }
  }

  for (const auto &[tok, e] : slot_edges)
    if (!dia.edges.count(e))
      fail(tok, true, "unknown edge " + show(e) + " in a crossing slot");
  for (const DartDecl &dd : dart_decls) {
    auto it = dia.crossings.find(dd.d.c);
    if (it == dia.crossings.end())
      fail(dd.tok, true, "unknown crossing " + show(dd.d.c));
    if (it->second.slots[dd.d.slot] != EdgeEnd{dd.e, dd.head})
      fail(dd.tok, true,
           "edge " + show(dd.e) + (dd.head ? " head " : " tail ") + dart_s(dd.d) +
               " disagrees with the crossing slot table");
  }
  for (const auto &[tok, e] : elem_refs) {
    bool ok = e.isLoop ? dia.loops.count(e.as_loop()) > 0
                       : dia.edges.count(e.as_edge()) > 0;
    if (!ok)
      fail(tok, true,
           std::string("unknown ") + (e.isLoop ? "loop " : "edge ") + elem_s(e));
  }

  dia.reseal();
  ValidationReport rep = validate_diagram(dia);
  if (!rep.ok()) fail(initial_span, true, rep.problems.front());

  for (const HostFaceCheck &hc : hostface_checks)
    if (dia.d().piece_of_elem.at(hc.face.def.elem) != hc.hostpiece)
      fail(hc.tok, true, "host face " + arcside_s(hc.face.def) +
                             " does not belong to piece " + piece_s(hc.hostpiece));
  for (const OuterCheck &oc : outer_checks)
    if (dia.d().piece_of_elem.at(oc.outer.elem) != oc.piece)
      fail(oc.tok, true, "outer face " + arcside_s(oc.outer) +
                             " does not belong to piece " + piece_s(oc.piece));

  Movie m;
  m.initial = dia;
  // Replay while it applies, so event identifiers are checked against the
  // still they actually see; a non-applying movie still parses (validate_movie
  // reports the rest).
  bool live = true;
  Diagram still = dia;
  while (true) {
    if (cur.done()) cur.fail_eof("an event line or 'end'");
    const Line &ln = cur.next();
    if (ln.toks[0].text == "end") {
      if (ln.toks.size() != 1)
        fail(ln.toks[1], false, "unexpected token after 'end'");
      break;
    }
    ReadEvent re = read_event(ln);
    if (live) {
      check_event_refs(still, re.refs);
      try {
        still = apply_event(still, re.ev).diagram;
      } catch (const ApplyError &) {
        live = false;
      }
    }
    m.events.push_back(re.ev);
  }
  return m;
}

void print_movie_block(std::string &out, const Movie &m) {
  Diagram d0 = m.initial;
  d0.reseal();
  out += "movie\ninitial:\n";
  for (const auto &[cid, c] : d0.crossings) {
    out += "X " + show(cid) + " (";
    for (int s = 0; s < 4; s++)
      out += (s ? " " : "") + edge_end_s(c.slots[s]);
    out += ")\n";
  }
  for (const auto &[eid, e] : d0.edges) {
    out += "E " + show(eid) + " " + dart_s(d0.d().tail.at(eid)) + " " +
           dart_s(d0.d().head.at(eid)) + " " + show(e.comp);
    for (BasepointId b : e.bps) out += " " + show(b);
    out += "\n";
  }
  for (const auto &[oid, l] : d0.loops) {
    out += "O " + show(oid) + " " + show(l.comp) + " " + signed_s(l.orient) +
           " " + face_s(d0.host.at(PieceKey{true, oid.v}));
    for (BasepointId b : l.bps) out += " " + show(b);
    out += "\n";
  }
  for (const auto &[piece, face] : d0.host) {
    if (piece.isLoop) continue;
    out += "N " + piece_s(piece) + " ";
    if (face.root)
      out += "root root";
    else
      out += piece_s(d0.d().piece_of_elem.at(face.def.elem)) + " " +
             arcside_s(face.def);
    out += " " + arcside_s(d0.outer.at(piece)) + "\n";
  }
  for (const Event &ev : m.events) write_event(out, ev);
  out += "end\n";
}

// --- catalog ----------------------------------------------------------------

const std::set<std::string> kTemplateKinds = {
    "birth", "death", "slide", "r1add", "r1rem",
    "r2add", "r2rem", "r3",    "saddle"};

size_t template_arity(const std::string &kind) {
  if (kind == "birth") return 5;
  if (kind == "death" || kind == "r1rem" || kind == "r2rem") return 1;
  if (kind == "slide" || kind == "r1add" || kind == "r3") return 2;
  return 3;  // r2add, saddle
}

bool marked_id(int id) { return id == 8 || (id >= 12 && id <= 15); }

TemplateEvent read_template(const Line &ln) {
  if (ln.toks.size() < 2)
    fail(ln.toks[0], false, "expected '" + ln.toks[0].text + " <kind> <args...>'");
  TemplateEvent t;
  t.kind = ln.toks[1].text;
  if (!kTemplateKinds.count(t.kind))
    fail(ln.toks[1], false, "expected event kind (" + std::string(kEventKinds) +
                                "), got '" + t.kind + "'");
  size_t want = template_arity(t.kind);
  if (ln.toks.size() - 2 != want)
    fail(ln.toks[1], false, "event kind '" + t.kind + "' takes " +
                                std::to_string(want) + " argument tokens");
  for (size_t i = 2; i < ln.toks.size(); i++) {
    const std::string &a = ln.toks[i].text;
    if (a == "$")
      fail(ln.toks[i], false, "slot token needs a name after '$'");
    t.args.push_back(a);
  }
  return t;
}

std::vector<MoveSchema> parse_catalog_lines(Cursor &cur) {
  expect_kw(cur, "catalog");
  std::vector<MoveSchema> out;
  std::set<std::pair<int, std::string>> seen;
  while (!cur.done()) {
    const Line &head = cur.next();
    if (head.toks[0].text != "move")
      fail(head.toks[0], false,
           "expected 'move <id> <variant> [marked]', got '" +
               head.toks[0].text + "'");
    if (head.toks.size() != 3 &&
        !(head.toks.size() == 4 && head.toks[3].text == "marked"))
      fail(head.toks[0], false, "expected 'move <id> <variant> [marked]'");
    MoveSchema s;
    s.id = (int)read_num(head.toks[1], head.toks[1].text, "move id");
    s.variant = head.toks[2].text;
    s.marked = head.toks.size() == 4;
    if (s.id < 1 || s.id > 15)
      fail(head.toks[1], true,
           "unknown move id " + std::to_string(s.id) + "; the catalog has moves 1..15");
    if (s.marked && !marked_id(s.id))
      fail(head.toks[1], true, "move " + std::to_string(s.id) +
                                   " cannot be marked; only 8 and 12..15 carry basepoints");
    if (!s.marked && marked_id(s.id))
      fail(head.toks[1], true,
           "move " + std::to_string(s.id) + " must be marked");
    if (!seen.insert({s.id, s.variant}).second)
      fail(head.toks[2], true, "duplicate variant '" + s.variant +
                                   "' for move " + std::to_string(s.id));
    while (true) {
      if (cur.done()) cur.fail_eof("'lhs', 'rhs', 'cond' or 'end'");
      const Line &ln = cur.next();
      const std::string &k = ln.toks[0].text;
      if (k == "end") {
        if (ln.toks.size() != 1)
          fail(ln.toks[1], false, "unexpected token after 'end'");
        break;
      }
      if (k == "lhs")
        s.lhs.push_back(read_template(ln));
      else if (k == "rhs")
        s.rhs.push_back(read_template(ln));
      else if (k == "cond") {
        if (ln.toks.size() < 2)
          fail(ln.toks[0], false, "expected 'cond <name...>'");
        for (size_t i = 1; i < ln.toks.size(); i++)
          s.conditions.push_back(ln.toks[i].text);
      } else {
        fail(ln.toks[0], false,
             "expected 'lhs', 'rhs', 'cond' or 'end', got '" + k + "'");
      }
    }
    out.push_back(std::move(s));
  }

  std::set<int> ids;
  for (const MoveSchema &s : out) ids.insert(s.id);
  for (int i = 1; i <= 15; i++)
    if (!ids.count(i))
      fail(Span{cur.src->last_line, 1, 0}, true,
           "missing move id " + std::to_string(i));
  for (int id : {13, 15}) {
    std::set<std::string> variants;
    for (const MoveSchema &s : out)
      if (s.id == id) variants.insert(s.variant);
    if (!variants.count("fission") || !variants.count("merge"))
      fail(Span{cur.src->last_line, 1, 0}, true,
           "move " + std::to_string(id) +
               " needs both fission and merge variants");
  }
  return out;
}

// --- certificate steps --------------------------------------------------------

void write_step(std::string &out, const RewriteStep &s) {
  std::visit(
      overloaded{
          [&](const MoveInstance &mi) {
            out += "move " + std::to_string(mi.schema.id) + " " +
                   mi.schema.variant + (mi.reverse ? " rev " : " fwd ") +
                   std::to_string(mi.window_begin) + " " +
                   std::to_string(mi.window_end);
            for (const auto &[k, v] : mi.binding) out += " " + k + "=" + v;
          },
          [&](const InterchangeStep &st) {
            out += "interchange " + std::to_string(st.k);
          },
          [&](const TwistRewriteStep &st) {
            out += "twist " + std::to_string(st.saddle_index) +
                   (st.side == TwistSide::Below ? " below " : " above ") +
                   signed_s(st.sign);
          },
          [&](const ZeroArcExchangeStep &st) {
            out += "zeroarc " + std::to_string(st.i);
          },
          [&](const CancelPairStep &st) {
            out += "cancel " + std::to_string(st.i);
          },
          [&](const NormalizeSlidesStep &) { out += "normslides"; },
      },
      s);
  out += "\n";
}

RewriteStep read_step(const Line &ln) {
  const Tok &kw = ln.toks[0];
  const std::string &k = kw.text;
  if (k == "move") {
    if (ln.toks.size() < 6)
      fail(kw, false,
           "expected 'move <id> <variant> <fwd|rev> <begin> <end> [slot=token...]'");
    MoveInstance mi;
    mi.schema.id = (int)read_num(ln.toks[1], ln.toks[1].text, "move id");
    mi.schema.variant = ln.toks[2].text;
    mi.schema.marked = marked_id(mi.schema.id);
    if (ln.toks[3].text == "fwd")
      mi.reverse = false;
    else if (ln.toks[3].text == "rev")
      mi.reverse = true;
    else
      fail(ln.toks[3], false, "expected 'fwd' or 'rev'");
    mi.window_begin = read_int(ln.toks[4], "window begin");
    mi.window_end = read_int(ln.toks[5], "window end");
    for (size_t i = 6; i < ln.toks.size(); i++) {
      const std::string &b = ln.toks[i].text;
      size_t eq = b.find('=');
      if (eq == std::string::npos || eq == 0)
        fail(ln.toks[i], false, "expected binding '<slot>=<token>', got '" + b + "'");
      mi.binding[b.substr(0, eq)] = b.substr(eq + 1);
    }
    return mi;
  }
  if (k == "interchange") {
    check_arity(ln, 2, "interchange <k>");
    return InterchangeStep{read_int(ln.toks[1], "event index")};
  }
  if (k == "twist") {
    check_arity(ln, 4, "twist <saddle-index> <below|above> <sign>");
    TwistRewriteStep st;
    st.saddle_index = read_int(ln.toks[1], "saddle index");
    if (ln.toks[2].text == "below")
      st.side = TwistSide::Below;
    else if (ln.toks[2].text == "above")
      st.side = TwistSide::Above;
    else
      fail(ln.toks[2], false, "expected 'below' or 'above'");
    st.sign = read_sign(ln.toks[3]);
    return st;
  }
  if (k == "zeroarc") {
    check_arity(ln, 2, "zeroarc <i>");
    return ZeroArcExchangeStep{read_int(ln.toks[1], "event index")};
  }
  if (k == "cancel") {
    check_arity(ln, 2, "cancel <i>");
    return CancelPairStep{read_int(ln.toks[1], "event index")};
  }
  if (k == "normslides") {
    check_arity(ln, 1, "normslides");
    return NormalizeSlidesStep{};
  }
  fail(kw, false,
       "expected a step line (move, interchange, twist, zeroarc, cancel, "
       "normslides) or 'end', got '" + k + "'");
}

}  // namespace

// --- token views for the move matcher (textio_internal.hpp) -----------------

std::vector<std::string> event_tokens(const Event &e) {
  std::string line;
  write_event(line, e);
  line.pop_back();  // trailing newline
  std::vector<std::string> out;
  size_t i = 0;
  while (i < line.size()) {
    size_t j = line.find(' ', i);
    if (j == std::string::npos) j = line.size();
    out.push_back(line.substr(i, j - i));
    i = j + 1;
  }
  return out;
}

Event event_from_tokens(const std::vector<std::string> &toks) {
  if (toks.empty()) fail(Span{}, false, "empty event token list");
  Line ln;
  int col = 1;
  for (const std::string &t : toks) {
    ln.toks.push_back({t, 0, col});
    col += (int)t.size() + 1;
  }
  return read_event(ln).ev;
}

std::string arcref_token(const ArcRef &r) { return arcref_s(r); }
std::string arcside_token(ArcSide a) { return arcside_s(a); }
std::string face_token(const GlobalFace &f) { return face_s(f); }
std::string elem_token(ElemRef e) { return elem_s(e); }

// --- public entry points ------------------------------------------------------

Movie parse_movie(const std::string &src) {
  Source s = tokenize(src);
  Cursor cur{&s};
  expect_format(cur);
  Movie m = parse_movie_block(cur);
  expect_eof(cur);
  return m;
}

std::string print_movie(const Movie &m) {
  run_movie(m);  // reject movies that do not run
  std::string out = "format 1\n";
  print_movie_block(out, m);
  return out;
}

std::vector<MoveSchema> parse_catalog(const std::string &src) {
  Source s = tokenize(src);
  Cursor cur{&s};
  expect_format(cur);
  return parse_catalog_lines(cur);
}

std::string print_catalog(const std::vector<MoveSchema> &catalog) {
  std::string out = "format 1\ncatalog\n";
  for (const MoveSchema &s : catalog) {
    out += "move " + std::to_string(s.id) + " " + s.variant +
           (s.marked ? " marked\n" : "\n");
    for (const TemplateEvent &t : s.lhs) {
      out += "lhs " + t.kind;
      for (const std::string &a : t.args) out += " " + a;
      out += "\n";
    }
    for (const TemplateEvent &t : s.rhs) {
      out += "rhs " + t.kind;
      for (const std::string &a : t.args) out += " " + a;
      out += "\n";
    }
    if (!s.conditions.empty()) {
      out += "cond";
      for (const std::string &c : s.conditions) out += " " + c;
      out += "\n";
    }
    out += "end\n";
  }
  return out;
}

Certificate parse_certificate(const std::string &src) {
  Source s = tokenize(src);
  Cursor cur{&s};
  expect_format(cur);
  expect_kw(cur, "certificate");
  expect_kw(cur, "source:");
  Certificate c;
  c.source = parse_movie_block(cur);
  expect_kw(cur, "target:");
  c.target = parse_movie_block(cur);
  expect_kw(cur, "steps:");
  while (true) {
    if (cur.done()) cur.fail_eof("a step line or 'end'");
    const Line &ln = cur.next();
    if (ln.toks[0].text == "end") {
      if (ln.toks.size() != 1)
        fail(ln.toks[1], false, "unexpected token after 'end'");
      break;
    }
    c.steps.push_back(read_step(ln));
  }
  expect_eof(cur);
  return c;
}

std::string print_certificate(const Certificate &c) {
  run_movie(c.source);
  run_movie(c.target);
  std::string out = "format 1\ncertificate\nsource:\n";
  print_movie_block(out, c.source);
  out += "target:\n";
  print_movie_block(out, c.target);
  out += "steps:\n";
  for (const RewriteStep &s : c.steps) write_step(out, s);
  out += "end\n";
  return out;
}

}  // namespace mmc
