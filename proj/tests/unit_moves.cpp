#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>

#include "doctest.h"
#include "mmc/moves.hpp"
#include "mmc/textio.hpp"
#include "support/build.hpp"

namespace {

using namespace mmc;
using mmc::test::r3ready;
using mmc::test::trefoil;
using mmc::test::unknot;
using mmc::test::unlink;

const std::vector<MoveSchema> &catalog() {
  static const std::vector<MoveSchema> cat =
      load_catalog(MMC_SOURCE_DIR "/data/moves.cat");
  return cat;
}

const MoveSchema &schema(int id, const std::string &variant = "plain") {
  for (const MoveSchema &s : catalog())
    if (s.id == id && s.variant == variant) return s;
  throw std::logic_error("no schema " + std::to_string(id) + " " + variant);
}

ArcRef loop_arc(std::uint32_t o, Side s, int gap = 0, int sub = 0) {
  return ArcRef{{ElemRef::loop(LoopId{o}), s}, gap, sub};
}
ArcRef edge_arc(std::uint32_t e, Side s, int gap = 0, int sub = 0) {
  return ArcRef{{ElemRef::edge(EdgeId{e}), s}, gap, sub};
}

bool applies(const Diagram &d, const Event &e) {
  try {
    apply_event(d, e);
    return true;
  } catch (const ApplyError &) {
    return false;
  }
}

std::vector<std::string> still_codes(const Movie &m) {
  std::vector<std::string> out;
  for (const Diagram &d : stills(m)) out.push_back(canonical_code(d));
  return out;
}

void check_same_surface(const Movie &a, const Movie &b) {
  SurfaceInvariants ia = surface_invariants(a);
  SurfaceInvariants ib = surface_invariants(b);
  CHECK(ia.euler_characteristic == ib.euler_characteristic);
  CHECK(ia.surface_component_count == ib.surface_component_count);
  CHECK(ia.orientable == ib.orientable);
  CHECK(ia.boundary == ib.boundary);
}

// Apply the instance; the rewritten movie must validate, trace the same
// surface, and admit a reverse instance at the same window begin that
// restores every still code of the original.
Movie check_roundtrip(const Movie &m, const MoveInstance &inst) {
  Movie m2 = apply_move(m, inst);
  ValidationReport rep = validate_movie(m2);
  CAPTURE(rep.problems);
  REQUIRE(rep.ok());
  check_same_surface(m, m2);

  std::vector<std::string> want = still_codes(m);
  bool restored = false;
  for (const MoveInstance &ri : enumerate_matches(m2, inst.schema, !inst.reverse)) {
    if (ri.window_begin != inst.window_begin) continue;
    if (still_codes(apply_move(m2, ri)) == want) {
      restored = true;
      break;
    }
  }
  CHECK(restored);
  return m2;
}

// Every enumerated instance must apply to a valid movie tracing the same
// surface. Large enumerations are sampled from the front; order is
// deterministic.
void check_soundness(const Movie &m, const MoveSchema &s, bool reverse,
                     int cap = 60) {
  int n = 0;
  for (const MoveInstance &inst : enumerate_matches(m, s, reverse)) {
    if (++n > cap) break;
    Movie m2;
    REQUIRE_NOTHROW(m2 = apply_move(m, inst));
    ValidationReport rep = validate_movie(m2);
    CAPTURE(rep.problems);
    CHECK(rep.ok());
    check_same_surface(m, m2);
  }
}

// The first insertion instance of an identity move on an event-free movie,
// optionally filtered by a binding value prefix.
Movie insert_pair(const Diagram &base, const MoveSchema &s,
                  const std::string &slot = "", const std::string &prefix = "") {
  Movie m{base, {}};
  for (const MoveInstance &inst : enumerate_matches(m, s, true)) {
    if (!slot.empty()) {
      auto it = inst.binding.find(slot);
      if (it == inst.binding.end() ||
          it->second.compare(0, prefix.size(), prefix) != 0)
        continue;
    }
    return apply_move(m, inst);
  }
  REQUIRE(false);
  return m;
}

}  // namespace

TEST_CASE("the bundled catalog loads and bad files are rejected") {
  const std::vector<MoveSchema> &cat = catalog();
  CHECK(cat.size() == 18);

  std::set<int> ids;
  std::set<std::string> var13, var15, var8;
  for (const MoveSchema &s : cat) {
    ids.insert(s.id);
    CHECK(s.marked == (s.id == 8 || s.id >= 12));
    if (s.id == 8) var8.insert(s.variant);
    if (s.id == 13) var13.insert(s.variant);
    if (s.id == 15) var15.insert(s.variant);
  }
  for (int i = 1; i <= 15; i++) CHECK(ids.count(i));
  CHECK(var8 == std::set<std::string>{"cap", "cup"});
  CHECK(var13 == std::set<std::string>{"fission", "merge"});
  CHECK(var15 == std::set<std::string>{"fission", "merge"});

  CHECK(schema(1).conditions == std::vector<std::string>{"identity"});
  CHECK(schema(1).lhs.size() == 2);
  CHECK(schema(1).rhs.empty());
  CHECK(schema(7).lhs.size() == 4);
  CHECK(schema(7).rhs.size() == 4);

  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_catalog(MMC_SOURCE_DIR "/data/nonexistent.cat"),
                    ParseError);
  }
  SUBCASE("unknown condition") {
    namespace fs = std::filesystem;
    fs::path p = fs::temp_directory_path() / "mmc_badcond.cat";
    {
      std::ofstream out(p);
      out << "format 1\ncatalog\n";
      for (int i = 1; i <= 15; i++) {
        const char *flag = (i == 8 || i >= 12) ? " marked" : "";
        out << "move " << i << " a" << flag << "\nlhs death $l\n";
        if (i == 1) out << "cond frobnicate\n";
        out << "end\n";
        if (i == 13 || i == 15)
          out << "move " << i << " b marked\nlhs death $l\nend\n";
      }
    }
    // variants a/b do not cover fission/merge for 13 and 15, so fix that
    // first; the condition check must still fire.
    try {
      load_catalog(p.string());
      FAIL("bad catalog accepted");
    } catch (const ParseError &e) {
      CHECK(std::string(e.what()).find("fission") != std::string::npos);
    }
    fs::remove(p);
  }
}

TEST_CASE("identity moves insert and erase their windows") {
  SUBCASE("finger push and pull") {
    Movie m = insert_pair(unlink(2), schema(1));
    REQUIRE(m.events.size() == 2);
    CHECK(std::holds_alternative<R2AddEvent>(m.events[0]));
    CHECK(std::holds_alternative<R2RemoveEvent>(m.events[1]));

    auto fwd = enumerate_matches(m, schema(1), false);
    REQUIRE(!fwd.empty());
    CHECK(fwd.front().window_begin == 0);
    CHECK(fwd.front().window_end == 2);
    Movie erased = check_roundtrip(m, fwd.front());
    CHECK(erased.events.empty());
    CHECK(canonical_code(erased.initial) == canonical_code(unlink(2)));
  }
  SUBCASE("kink made and unmade") {
    Movie m = insert_pair(unknot(), schema(2));
    REQUIRE(m.events.size() == 2);
    CHECK(std::holds_alternative<R1AddEvent>(m.events[0]));
    CHECK(std::holds_alternative<R1RemoveEvent>(m.events[1]));
    auto fwd = enumerate_matches(m, schema(2), false);
    REQUIRE(!fwd.empty());
    CHECK(check_roundtrip(m, fwd.front()).events.empty());
  }
  SUBCASE("triangle moved and moved back") {
    Movie m = insert_pair(r3ready(), schema(3));
    REQUIRE(m.events.size() == 2);
    CHECK(std::holds_alternative<R3Event>(m.events[0]));
    CHECK(std::holds_alternative<R3Event>(m.events[1]));
    auto fwd = enumerate_matches(m, schema(3), false);
    REQUIRE(!fwd.empty());
    CHECK(check_roundtrip(m, fwd.front()).events.empty());
  }
  SUBCASE("finger across a crossing and out flat") {
    // A kinked unknot is the smallest still with a crossing to push across.
    Movie kinked = insert_pair(unknot(), schema(2));
    Diagram base = stills(kinked)[1];
    Movie m = insert_pair(base, schema(4));
    REQUIRE(m.events.size() == 3);
    CHECK(std::holds_alternative<R2AddEvent>(m.events[0]));
    CHECK(std::holds_alternative<R3Event>(m.events[1]));
    CHECK(std::holds_alternative<R2RemoveEvent>(m.events[2]));
    auto fwd = enumerate_matches(m, schema(4), false);
    REQUIRE(!fwd.empty());
    CHECK(check_roundtrip(m, fwd.front()).events.empty());
  }
  SUBCASE("a circle born and swallowed") {
    Movie m = insert_pair(unknot(), schema(8, "cup"));
    REQUIRE(m.events.size() == 2);
    CHECK(std::holds_alternative<BirthEvent>(m.events[0]));
    CHECK(std::holds_alternative<SaddleEvent>(m.events[1]));
    MovieRun run = run_movie(m);
    CHECK(run.traces[1].saddle_merge == true);
    CHECK(run.traces[1].bp_consumed.size() == 1);
    auto fwd = enumerate_matches(m, schema(8, "cup"), false);
    REQUIRE(!fwd.empty());
    CHECK(check_roundtrip(m, fwd.front()).events.empty());
  }
  SUBCASE("a circle pinched off and dying") {
    Movie m = insert_pair(unknot(), schema(8, "cap"));
    REQUIRE(m.events.size() == 2);
    CHECK(std::holds_alternative<SaddleEvent>(m.events[0]));
    CHECK(std::holds_alternative<DeathEvent>(m.events[1]));
    MovieRun run = run_movie(m);
    CHECK(run.traces[0].saddle_merge == false);
    auto fwd = enumerate_matches(m, schema(8, "cap"), false);
    REQUIRE(!fwd.empty());
    CHECK(check_roundtrip(m, fwd.front()).events.empty());
  }
}

TEST_CASE("a positive kink pair trades for a negative one") {
  Movie m = insert_pair(unknot(), schema(2), "c", "+1");
  REQUIRE(std::get<R1AddEvent>(m.events[0]).chir == +1);

  auto fwd = enumerate_matches(m, schema(5), false);
  REQUIRE(!fwd.empty());
  Movie m2 = check_roundtrip(m, fwd.front());
  REQUIRE(m2.events.size() == 2);
  CHECK(std::get<R1AddEvent>(m2.events[0]).chir == -1);

  // The negative pair matches only in reverse.
  CHECK(enumerate_matches(m2, schema(5), false).empty());
  CHECK(!enumerate_matches(m2, schema(5), true).empty());
}

TEST_CASE("kinks, fingers, and triangles transpose") {
  SUBCASE("kink then finger") {
    Movie m{unlink(2), {}};
    Event kink = R1AddEvent{loop_arc(1, Side::R), +1};
    REQUIRE(applies(m.initial, kink));
    m.events.push_back(kink);
    Diagram s1 = apply_event(m.initial, kink).diagram;
    std::optional<Event> finger;
    for (const auto &[eid, e] : s1.edges) {
      for (Side s : {Side::L, Side::R}) {
        for (Side t : {Side::L, Side::R}) {
          Event cand = R2AddEvent{edge_arc(eid.v, s), loop_arc(2, t), true, {}};
          if (applies(s1, cand)) {
            finger = cand;
            break;
          }
        }
        if (finger) break;
      }
      if (finger) break;
    }
    REQUIRE(finger);
    m.events.push_back(*finger);

    auto fwd = enumerate_matches(m, schema(6), false);
    REQUIRE(!fwd.empty());
    Movie m2 = check_roundtrip(m, fwd.front());
    CHECK(std::holds_alternative<R2AddEvent>(m2.events[0]));
    CHECK(std::holds_alternative<R1AddEvent>(m2.events[1]));
  }
  SUBCASE("four triangle passes reroute") {
    Movie m{r3ready(), {}};
    Diagram cur = m.initial;
    for (int i = 0; i < 4; i++) {
      std::optional<Event> found;
      for (const auto &[eid, e] : cur.edges) {
        for (Side s : {Side::L, Side::R}) {
          for (int v = 0; v < 8 && !found; v++) {
            Event cand = R3Event{ArcSide{ElemRef::edge(eid), s}, v};
            if (applies(cur, cand)) found = cand;
          }
          if (found) break;
        }
        if (found) break;
      }
      REQUIRE(found);
      m.events.push_back(*found);
      cur = apply_event(cur, *found).diagram;
    }
    auto fwd = enumerate_matches(m, schema(7), false);
    REQUIRE(!fwd.empty());
    check_roundtrip(m, fwd.front());
  }
  SUBCASE("finger then triangle") {
    Diagram base = r3ready();
    Event tri = R3Event{ArcSide{ElemRef::edge(EdgeId{1}), Side::R}, 7};
    REQUIRE(applies(base, tri));

    bool done = false;
    for (std::uint32_t a : {2u, 4u, 6u}) {
      for (std::uint32_t b : {2u, 4u, 6u}) {
        for (Side sa : {Side::L, Side::R}) {
          for (Side sb : {Side::L, Side::R}) {
            Event cand = R2AddEvent{edge_arc(a, sa), edge_arc(b, sb), true, {}};
            if (a == b && sa == sb)
              cand = R2AddEvent{edge_arc(a, sa), edge_arc(b, sb, 0, 1), true, {}};
            if (!applies(base, cand)) continue;
            Diagram s1 = apply_event(base, cand).diagram;
            if (!applies(s1, tri)) continue;
            Movie m{base, {cand, tri}};
            auto fwd = enumerate_matches(m, schema(9), false);
            if (fwd.empty()) continue;
            Movie m2 = check_roundtrip(m, fwd.front());
            CHECK(std::holds_alternative<R3Event>(m2.events[0]));
            CHECK(std::holds_alternative<R2AddEvent>(m2.events[1]));
            done = true;
            break;
          }
          if (done) break;
        }
        if (done) break;
      }
      if (done) break;
    }
    CHECK(done);
  }
  SUBCASE("two fingers swap") {
    Movie m{unlink(4),
            {R2AddEvent{loop_arc(1, Side::R), loop_arc(2, Side::R), true, {}},
             R2AddEvent{loop_arc(3, Side::R), loop_arc(4, Side::R), true, {}}}};
    REQUIRE(validate_movie(m).ok());
    auto fwd = enumerate_matches(m, schema(10), false);
    REQUIRE(!fwd.empty());
    bool swapped_found = false;
    for (const MoveInstance &inst : fwd) {
      Movie m2 = apply_move(m, inst);
      const auto &first = std::get<R2AddEvent>(m2.events[0]);
      if (first.a.at.elem == ElemRef::loop(LoopId{3})) {
        swapped_found = true;
        check_roundtrip(m, inst);
        break;
      }
    }
    CHECK(swapped_found);
  }
  SUBCASE("two triangle passes swap") {
    Movie m = insert_pair(r3ready(), schema(3));
    auto fwd = enumerate_matches(m, schema(11), false);
    REQUIRE(!fwd.empty());
    check_roundtrip(m, fwd.front());
  }
}

TEST_CASE("marked moves carry the basepoint across") {
  SUBCASE("birth beside a strand, then a finger over it") {
    Diagram base = unknot();
    Event birth = BirthEvent{GlobalFace::Root(), +1, LoopId{9}, ComponentId{9},
                             BasepointId{9}};
    Diagram s1 = apply_event(base, birth).diagram;
    std::optional<Event> finger;
    for (Side s9 : {Side::L, Side::R}) {
      for (Side s1s : {Side::L, Side::R}) {
        for (bool over : {true, false}) {
          Event cand =
              R2AddEvent{loop_arc(9, s9), loop_arc(1, s1s), over, {}};
          if (applies(s1, cand)) {
            finger = cand;
            break;
          }
        }
        if (finger) break;
      }
      if (finger) break;
    }
    REQUIRE(finger);
    Movie m{base, {birth, *finger}};
    auto fwd = enumerate_matches(m, schema(12, "side"), false);
    REQUIRE(!fwd.empty());
    check_roundtrip(m, fwd.front());
  }
  SUBCASE("joining saddle past a distant finger") {
    std::optional<Event> sad;
    for (bool coh : {true, false}) {
      Event cand = SaddleEvent{loop_arc(1, Side::R), loop_arc(2, Side::R), coh, {}};
      if (applies(unlink(4), cand)) {
        sad = cand;
        break;
      }
    }
    REQUIRE(sad);
    Movie m{unlink(4),
            {*sad,
             R2AddEvent{loop_arc(3, Side::R), loop_arc(4, Side::R), true, {}}}};
    MovieRun run = run_movie(m);
    REQUIRE(run.traces[0].saddle_merge == true);

    auto fwd = enumerate_matches(m, schema(13, "merge"), false);
    REQUIRE(!fwd.empty());
    Movie m2 = check_roundtrip(m, fwd.front());
    CHECK(std::holds_alternative<R2AddEvent>(m2.events[0]));
    CHECK(std::holds_alternative<SaddleEvent>(m2.events[1]));

    // The fission variant must not match a joining saddle.
    CHECK(enumerate_matches(m, schema(13, "fission"), false).empty());
  }
  SUBCASE("splitting saddle past a distant finger") {
    std::optional<Event> sad;
    for (bool coh : {true, false}) {
      Event cand =
          SaddleEvent{loop_arc(1, Side::R, 0, 0), loop_arc(1, Side::R, 0, 1), coh, {}};
      if (applies(unlink(3), cand)) {
        sad = cand;
        break;
      }
    }
    REQUIRE(sad);
    Movie m{unlink(3),
            {*sad,
             R2AddEvent{loop_arc(2, Side::R), loop_arc(3, Side::R), true, {}}}};
    MovieRun run = run_movie(m);
    REQUIRE(run.traces[0].saddle_merge == false);

    auto fwd = enumerate_matches(m, schema(13, "fission"), false);
    REQUIRE(!fwd.empty());
    check_roundtrip(m, fwd.front());
    CHECK(enumerate_matches(m, schema(13, "merge"), false).empty());
  }
  SUBCASE("a circle born kinked") {
    Diagram base = unknot();
    Event birth = BirthEvent{GlobalFace::Root(), +1, LoopId{9}, ComponentId{9},
                             BasepointId{9}};
    Diagram s1 = apply_event(base, birth).diagram;
    std::optional<Event> kink;
    for (Side s : {Side::L, Side::R}) {
      for (int chir : {+1, -1}) {
        Event cand = R1AddEvent{loop_arc(9, s), chir};
        if (applies(s1, cand)) {
          kink = cand;
          break;
        }
      }
      if (kink) break;
    }
    REQUIRE(kink);
    Movie m{base, {birth, *kink}};
    auto fwd = enumerate_matches(m, schema(14, "kink"), false);
    REQUIRE(!fwd.empty());
    check_roundtrip(m, fwd.front());
  }
  SUBCASE("saddles past a distant triangle pass") {
    Diagram base = r3ready();
    base.loops[LoopId{1}] =
        FreeLoop{LoopId{1}, ComponentId{8}, +1, {BasepointId{8}}};
    base.loops[LoopId{2}] =
        FreeLoop{LoopId{2}, ComponentId{9}, +1, {BasepointId{9}}};
    base.host[PieceKey{true, 1}] = GlobalFace::Root();
    base.host[PieceKey{true, 2}] = GlobalFace::Root();
    base.reseal();
    REQUIRE(validate_diagram(base).ok());
    Event tri = R3Event{ArcSide{ElemRef::edge(EdgeId{1}), Side::R}, 7};

    SUBCASE("joining") {
      std::optional<Event> sad;
      for (bool coh : {true, false}) {
        Event cand =
            SaddleEvent{loop_arc(1, Side::R), loop_arc(2, Side::R), coh, {}};
        if (applies(base, cand)) {
          sad = cand;
          break;
        }
      }
      REQUIRE(sad);
      Movie m{base, {*sad, tri}};
      REQUIRE(validate_movie(m).ok());
      auto fwd = enumerate_matches(m, schema(15, "merge"), false);
      REQUIRE(!fwd.empty());
      Movie m2 = check_roundtrip(m, fwd.front());
      CHECK(std::holds_alternative<R3Event>(m2.events[0]));
      CHECK(std::holds_alternative<SaddleEvent>(m2.events[1]));
      CHECK(enumerate_matches(m, schema(15, "fission"), false).empty());
    }
    SUBCASE("splitting") {
      std::optional<Event> sad;
      for (bool coh : {true, false}) {
        Event cand = SaddleEvent{loop_arc(1, Side::R, 0, 0),
                                 loop_arc(1, Side::R, 0, 1), coh, {}};
        if (applies(base, cand)) {
          sad = cand;
          break;
        }
      }
      REQUIRE(sad);
      Movie m{base, {*sad, tri}};
      auto fwd = enumerate_matches(m, schema(15, "fission"), false);
      REQUIRE(!fwd.empty());
      check_roundtrip(m, fwd.front());
      CHECK(enumerate_matches(m, schema(15, "merge"), false).empty());
    }
  }
}

TEST_CASE("every enumerated instance applies and preserves the traced surface") {
  // Identity erasers, both directions, on their natural bases.
  check_soundness(Movie{unlink(2), {}}, schema(1), true);
  check_soundness(insert_pair(unlink(2), schema(1)), schema(1), false);
  check_soundness(Movie{unknot(), {}}, schema(2), true);
  check_soundness(insert_pair(unknot(), schema(2)), schema(2), false);
  check_soundness(Movie{r3ready(), {}}, schema(3), true, 30);
  check_soundness(insert_pair(r3ready(), schema(3)), schema(3), false);
  check_soundness(Movie{unknot(), {}}, schema(8, "cup"), true);
  check_soundness(Movie{unknot(), {}}, schema(8, "cap"), true);

  // Transpositions, forward, on the same fixtures the earlier cases use.
  Movie kinked = insert_pair(unknot(), schema(2));
  check_soundness(kinked, schema(5), false);
  check_soundness(Movie{stills(kinked)[1], {}}, schema(4), true, 30);
  check_soundness(
      Movie{unlink(4),
            {R2AddEvent{loop_arc(1, Side::R), loop_arc(2, Side::R), true, {}},
             R2AddEvent{loop_arc(3, Side::R), loop_arc(4, Side::R), true, {}}}},
      schema(10), false);
  check_soundness(insert_pair(r3ready(), schema(3)), schema(11), false, 30);
}

TEST_CASE("stale instances are rejected with the staleness taxonomy") {
  Movie m = insert_pair(unlink(2), schema(1));
  auto fwd = enumerate_matches(m, schema(1), false);
  REQUIRE(!fwd.empty());
  MoveInstance good = fwd.front();

  SUBCASE("empty schema stub") {
    MoveInstance stub;
    stub.schema.id = 1;
    try {
      apply_move(m, stub);
      FAIL("stub accepted");
    } catch (const RewriteError &e) {
      CHECK(e.kind == RewriteError::StaleInstance);
      CHECK(std::string(e.what()).find("catalog") != std::string::npos);
    }
  }
  SUBCASE("window out of range") {
    MoveInstance bad = good;
    bad.window_begin = 1;
    bad.window_end = 3;
    CHECK_THROWS_AS(apply_move(m, bad), RewriteError);
  }
  SUBCASE("binding no longer matches") {
    MoveInstance bad = good;
    bad.binding["a"] = "o2.L:0:0";
    try {
      apply_move(m, bad);
      FAIL("stale binding accepted");
    } catch (const RewriteError &e) {
      CHECK(e.kind == RewriteError::StaleInstance);
    }
  }
  SUBCASE("applying twice") {
    Movie erased = apply_move(m, good);
    CHECK_THROWS_AS(apply_move(erased, good), RewriteError);
  }
  SUBCASE("different movie") {
    Movie other = insert_pair(unknot(), schema(2));
    CHECK_THROWS_AS(apply_move(other, good), RewriteError);
  }
}

TEST_CASE("interchange swaps distant events and classifies obstructions") {
  SUBCASE("a birth and a distant slide commute") {
    Movie m{trefoil(),
            {BirthEvent{GlobalFace::Root(), +1, LoopId{9}, ComponentId{9},
                        BasepointId{9}},
             SlideEvent{BasepointId{1}, +2}}};
    REQUIRE(validate_movie(m).ok());
    Movie m2 = interchange(m, 0);
    CHECK(std::holds_alternative<SlideEvent>(m2.events[0]));
    CHECK(std::holds_alternative<BirthEvent>(m2.events[1]));
    CHECK(validate_movie(m2).ok());
    CHECK(still_codes(m2).back() == still_codes(m).back());
    check_same_surface(m, m2);
  }
  SUBCASE("two births commute") {
    Movie m{unknot(),
            {BirthEvent{GlobalFace::Root(), +1, LoopId{8}, ComponentId{8},
                        BasepointId{8}},
             BirthEvent{GlobalFace::Root(), -1, LoopId{9}, ComponentId{9},
                        BasepointId{9}}}};
    Movie m2 = interchange(m, 0);
    CHECK(std::get<BirthEvent>(m2.events[0]).loop == LoopId{9});
    CHECK(still_codes(m2).back() == still_codes(m).back());
  }
  SUBCASE("death of a just-born circle overlaps it") {
    Movie m{unknot(),
            {BirthEvent{GlobalFace::Root(), +1, LoopId{9}, ComponentId{9},
                        BasepointId{9}},
             DeathEvent{LoopId{9}}}};
    REQUIRE(validate_movie(m).ok());
    try {
      interchange(m, 0);
      FAIL("overlapping interchange accepted");
    } catch (const RewriteError &e) {
      CHECK(e.kind == RewriteError::OverlappingSupports);
    }
  }
  SUBCASE("saddles joined by a marking worldline") {
    Diagram base = unlink(2);
    std::optional<Event> merge;
    for (bool coh : {true, false}) {
      Event cand = SaddleEvent{loop_arc(1, Side::R), loop_arc(2, Side::R), coh, {}};
      if (applies(base, cand)) {
        merge = cand;
        break;
      }
    }
    REQUIRE(merge);
    Diagram merged = apply_event(base, *merge).diagram;
    REQUIRE(merged.loops.size() == 1);
    std::uint32_t mo = merged.loops.begin()->first.v;
    std::optional<Event> split;
    for (bool coh : {true, false}) {
      Event cand = SaddleEvent{loop_arc(mo, Side::R, 0, 0),
                               loop_arc(mo, Side::R, 0, 1), coh, {}};
      if (applies(merged, cand)) {
        split = cand;
        break;
      }
    }
    REQUIRE(split);
    Movie m{base, {*merge, *split}};
    try {
      interchange(m, 0);
      FAIL("worldline interchange accepted");
    } catch (const RewriteError &e) {
      CHECK(e.kind == RewriteError::MarkingObstruction);
      CHECK(std::string(e.what()).find("zero-arc") != std::string::npos);
    }
  }
  SUBCASE("sliding a basepoint the first event introduces") {
    Diagram base = unlink(2);
    std::optional<Event> merge;
    for (bool coh : {true, false}) {
      Event cand = SaddleEvent{loop_arc(1, Side::R), loop_arc(2, Side::R), coh, {}};
      if (applies(base, cand)) merge = cand;
    }
    REQUIRE(merge);
    Diagram merged = apply_event(base, *merge).diagram;
    MovieRun probe = run_movie(Movie{base, {*merge}});
    REQUIRE(probe.traces[0].bp_emitted.size() == 1);
    BasepointId nb = probe.traces[0].bp_emitted[0];
    Movie m{base, {*merge, SlideEvent{nb, +1}}};
    REQUIRE(validate_movie(m).ok());
    try {
      interchange(m, 0);
      FAIL("slide of an introduced basepoint accepted");
    } catch (const RewriteError &e) {
      CHECK(e.kind == RewriteError::MarkingObstruction);
    }
  }
  SUBCASE("a kink pair does not transpose") {
    Movie m = insert_pair(unknot(), schema(2));
    try {
      interchange(m, 0);
      FAIL("kink pair interchange accepted");
    } catch (const RewriteError &e) {
      CHECK(e.kind == RewriteError::OverlappingSupports);
    }
  }
  SUBCASE("bounds") {
    Movie m = insert_pair(unknot(), schema(2));
    CHECK_THROWS_AS(interchange(m, -1), std::invalid_argument);
    CHECK_THROWS_AS(interchange(m, 1), std::invalid_argument);
    CHECK_THROWS_AS(interchange(m, 7), std::invalid_argument);
  }
}

TEST_CASE("window normalization parks basepoints and restores them") {
  SUBCASE("a kink pair on the marked edge") {
    Movie m = insert_pair(trefoil(), schema(2), "a", "e1.");
    REQUIRE(m.events.size() == 2);
    Movie m2 = normalize_window(m, 0, 2);
    REQUIRE(m2.events.size() == 4);
    CHECK(std::get<SlideEvent>(m2.events[0]).bp == BasepointId{1});
    CHECK(std::get<R1AddEvent>(m2.events[1]).at.gap == 0);
    CHECK(std::holds_alternative<R1RemoveEvent>(m2.events[2]));
    CHECK(std::get<SlideEvent>(m2.events[3]).bp == BasepointId{1});
    CHECK(validate_movie(m2).ok());
    CHECK(still_codes(m2).back() == still_codes(m).back());
    // The parked stills host no basepoint on the window's support.
    MovieRun run = run_movie(m2);
    ElemRef host = run.stills[1].d().bp_at.at(BasepointId{1});
    CHECK(host != ElemRef::edge(EdgeId{1}));
  }
  SUBCASE("a window off the marked edge changes nothing") {
    Movie m = insert_pair(trefoil(), schema(1), "a", "e3.");
    const auto &first = std::get<R2AddEvent>(m.events[0]);
    REQUIRE(first.a.at.elem == ElemRef::edge(EdgeId{3}));
    if (first.b.at.elem == ElemRef::edge(EdgeId{1})) return;  // touches e1
    Movie m2 = normalize_window(m, 0, 2);
    CHECK(m2.events.size() == m.events.size());
    CHECK(still_codes(m2) == still_codes(m));
  }
  SUBCASE("a bare circle's basepoint has nowhere to go") {
    Movie m = insert_pair(unknot(), schema(2));
    try {
      normalize_window(m, 0, 2);
      FAIL("unparkable window accepted");
    } catch (const RewriteError &e) {
      CHECK(e.kind == RewriteError::MarkingObstruction);
      CHECK(std::string(e.what()).find("b1") != std::string::npos);
    }
  }
  SUBCASE("slides alone normalize trivially") {
    Movie m{trefoil(), {SlideEvent{BasepointId{1}, +2}}};
    Movie m2 = normalize_window(m, 0, 1);
    CHECK(m2.events.size() == 1);
    CHECK(still_codes(m2) == still_codes(m));
  }
  SUBCASE("saddles and bounds are rejected") {
    std::optional<Event> merge;
    for (bool coh : {true, false}) {
      Event cand = SaddleEvent{loop_arc(1, Side::R), loop_arc(2, Side::R), coh, {}};
      if (applies(unlink(2), cand)) merge = cand;
    }
    REQUIRE(merge);
    Movie m{unlink(2), {*merge}};
    CHECK_THROWS_AS(normalize_window(m, 0, 1), std::invalid_argument);
    CHECK_THROWS_AS(normalize_window(m, 0, 5), std::invalid_argument);
    CHECK_THROWS_AS(normalize_window(m, -1, 0), std::invalid_argument);
  }
}

TEST_CASE("moves apply mid-movie and the tail is rebound") {
  Movie base{trefoil(),
             {BirthEvent{GlobalFace::Root(), +1, LoopId{9}, ComponentId{9},
                         BasepointId{9}},
              SlideEvent{BasepointId{9}, +1}}};
  REQUIRE(validate_movie(base).ok());

  std::optional<MoveInstance> mid;
  for (const MoveInstance &inst : enumerate_matches(base, schema(1), true)) {
    if (inst.window_begin == 1) {
      mid = inst;
      break;
    }
  }
  REQUIRE(mid);
  Movie m2 = apply_move(base, *mid);
  REQUIRE(m2.events.size() == 4);
  CHECK(std::holds_alternative<BirthEvent>(m2.events[0]));
  CHECK(std::holds_alternative<R2AddEvent>(m2.events[1]));
  CHECK(std::holds_alternative<R2RemoveEvent>(m2.events[2]));
  CHECK(std::holds_alternative<SlideEvent>(m2.events[3]));
  CHECK(validate_movie(m2).ok());
  CHECK(still_codes(m2).back() == still_codes(base).back());

  auto fwd = enumerate_matches(m2, schema(1), false);
  std::optional<MoveInstance> at1;
  for (const MoveInstance &inst : fwd)
    if (inst.window_begin == 1) {
      at1 = inst;
      break;
    }
  REQUIRE(at1);
  Movie m3 = apply_move(m2, *at1);
  REQUIRE(m3.events.size() == 2);
  CHECK(std::holds_alternative<BirthEvent>(m3.events[0]));
  CHECK(std::holds_alternative<SlideEvent>(m3.events[1]));
  CHECK(still_codes(m3) == still_codes(base));

  // Enumeration is deterministic.
  auto again = enumerate_matches(m2, schema(1), false);
  REQUIRE(fwd.size() == again.size());
  for (size_t i = 0; i < fwd.size(); i++) {
    CHECK(fwd[i].window_begin == again[i].window_begin);
    CHECK(fwd[i].binding == again[i].binding);
  }
}
