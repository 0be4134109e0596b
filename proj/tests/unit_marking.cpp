#include "mmc/marking.hpp"

#include "doctest.h"
#include "support/build.hpp"
#include "support/gen.hpp"

using namespace mmc;

namespace {

Movie sphere_movie() {
  Movie m;
  m.initial.reseal();
  m.events = {BirthEvent{GlobalFace::Root(), +1, LoopId{1}, ComponentId{1},
                         BasepointId{1}},
              DeathEvent{LoopId{1}}};
  return m;
}

// Merge the two unlink circles, then pinch the result apart again.
Movie pants_pair() {
  Movie m;
  m.initial = test::unlink(2);
  ArcSide a{ElemRef::loop(LoopId{1}), Side::R};
  ArcSide b{ElemRef::loop(LoopId{2}), Side::R};
  m.events.push_back(SaddleEvent{ArcRef{a, 0, 0}, ArcRef{b, 0, 0}, true, {}});
  Diagram mid = stills(m).back();
  REQUIRE(mid.loops.size() == 1);
  ArcSide inner{ElemRef::loop(mid.loops.begin()->first),
                loop_inner(mid.loops.begin()->second)};
  m.events.push_back(
      SaddleEvent{ArcRef{inner, 0, 0}, ArcRef{inner, 0, 1}, true, {}});
  return m;
}

}  // namespace

TEST_CASE("sphere movie traces a path graph") {
  Movie m = sphere_movie();
  MarkingGraph g = trace_marking(m);
  REQUIRE(g.vertices.size() == 2);
  REQUIRE(g.edges.size() == 1);
  CHECK(g.vertices[0].kind == MarkVertex::BirthLeaf);
  CHECK(g.vertices[1].kind == MarkVertex::DeathLeaf);
  CHECK(g.edges[0].from == 0);
  CHECK(g.edges[0].to == 1);
  CHECK(g.edges[0].begin == 1);
  CHECK(g.edges[0].end == 1);
  CHECK(g.components == 1);
  CHECK(g.warnings.empty());
  CHECK(g.edge_at(1, g.edges[0].bp) == 0);
  CHECK(g.edge_at(0, g.edges[0].bp) == -1);
}

TEST_CASE("identity cobordism is one boundary-to-boundary edge") {
  Movie m;
  m.initial = test::unknot();
  MarkingGraph g = trace_marking(m);
  REQUIRE(g.vertices.size() == 2);
  CHECK(g.vertices[0].kind == MarkVertex::BoundaryIn);
  CHECK(g.vertices[1].kind == MarkVertex::BoundaryOut);
  REQUIRE(g.edges.size() == 1);
  CHECK(g.edges[0].slides.empty());
  CHECK(g.components == 1);
}

TEST_CASE("torus movie traces a theta with legs") {
  Movie m;
  m.initial.reseal();
  ArcSide inner{ElemRef::loop(LoopId{1}), Side::L};
  m.events.push_back(BirthEvent{GlobalFace::Root(), +1, LoopId{1},
                                ComponentId{1}, BasepointId{1}});
  m.events.push_back(
      SaddleEvent{ArcRef{inner, 0, 0}, ArcRef{inner, 0, 1}, true, {}});
  Diagram mid = stills(m).back();
  std::vector<LoopId> pieces;
  for (const auto &[oid, l] : mid.loops) pieces.push_back(oid);
  REQUIRE(pieces.size() == 2);
  ArcSide a{ElemRef::loop(pieces[0]), flip(loop_inner(mid.loops.at(pieces[0])))};
  ArcSide b{ElemRef::loop(pieces[1]), flip(loop_inner(mid.loops.at(pieces[1])))};
  m.events.push_back(
      SaddleEvent{ArcRef{a, 0, 0}, ArcRef{b, 0, 0}, a.side == b.side, {}});
  Diagram glued = stills(m).back();
  m.events.push_back(DeathEvent{glued.loops.begin()->first});

  MarkingGraph g = trace_marking(m);
  int univalent = 0, trivalent = 0;
  for (const MarkVertex &v : g.vertices)
    (v.kind == MarkVertex::SaddleNode ? trivalent : univalent)++;
  CHECK(univalent == 2);
  CHECK(trivalent == 2);
  CHECK(g.edges.size() == 4);
  CHECK(g.components == 1);
  CHECK(g.warnings.empty());

  for (size_t v = 0; v < g.vertices.size(); ++v) {
    if (g.vertices[v].kind != MarkVertex::SaddleNode) continue;
    size_t ins = g.in_edges((int)v).size(), outs = g.out_edges((int)v).size();
    CHECK(ins + outs == 3);
    bool split = std::get<SaddleEvent>(m.events[g.vertices[v].event]).a.at ==
                 std::get<SaddleEvent>(m.events[g.vertices[v].event]).b.at;
    (void)split;
    CHECK((ins == 1 || ins == 2));
  }
}

TEST_CASE("full revolution on a bare loop is one twist") {
  Movie m;
  m.initial = test::unknot();
  m.events = {SlideEvent{BasepointId{1}, +1}};
  TwistWord tw = twist_word(m, 0);
  CHECK(tw.net_steps == 1);
  CHECK(tw.full_loops == 1);
  CHECK(tw.residual_empty());
}

TEST_CASE("trefoil lap is six steps and accounting is exact") {
  CHECK(lap_length(test::trefoil(), ComponentId{1}) == 6);

  Movie m;
  m.initial = test::trefoil();
  m.events = {SlideEvent{BasepointId{1}, +3}, SlideEvent{BasepointId{1}, -3}};
  TwistWord cancel = twist_word(m, 0);
  CHECK(cancel.net_steps == 0);
  CHECK(cancel.full_loops == 0);
  CHECK(cancel.residual_empty());

  m.events = {SlideEvent{BasepointId{1}, +2}};
  TwistWord partial = twist_word(m, 0);
  CHECK(partial.net_steps == 2);
  CHECK(partial.full_loops == 0);
  CHECK(partial.residual_num == 1);
  CHECK(partial.residual_den == 3);

  // Half a lap at length six, a kink added elsewhere, half a lap at length
  // eight: exactly one full traversal.
  m.events = {SlideEvent{BasepointId{1}, +3},
              R1AddEvent{ArcRef{ArcSide{ElemRef::edge(EdgeId{3}), Side::L}, 0, 0}, +1},
              SlideEvent{BasepointId{1}, +4}};
  Movie head = m;
  head.events.resize(2);
  CHECK(lap_length(stills(head).back(), ComponentId{1}) == 8);
  TwistWord mixed = twist_word(m, 0);
  CHECK(mixed.net_steps == 7);
  CHECK(mixed.full_loops == 1);
  CHECK(mixed.residual_empty());
}

TEST_CASE("worldline with no slides has the empty twist word") {
  Movie m;
  m.initial = test::unknot();
  TwistWord tw = twist_word(m, 0);
  CHECK(tw.net_steps == 0);
  CHECK(tw.full_loops == 0);
  CHECK(tw.residual_empty());
  CHECK_THROWS_AS(twist_word(m, 5), std::invalid_argument);
}

TEST_CASE("zero arc between pants saddles") {
  Movie m = pants_pair();
  std::optional<ZeroArcWitness> wit = find_zero_arc(m, 0, 1);
  REQUIRE(wit.has_value());
  CHECK(wit->from_event == 0);
  CHECK(wit->to_event == 1);
  CHECK(wit->residual.empty());

  Movie wound = m;
  wound.events.insert(wound.events.begin() + 1,
                      SlideEvent{wit->bp, +1});
  CHECK_FALSE(find_zero_arc(wound, 0, 2).has_value());
}

TEST_CASE("zero arc preconditions reject non-saddle windows") {
  Movie m = sphere_movie();
  CHECK_THROWS_AS(find_zero_arc(m, 0, 1), std::invalid_argument);
  Movie p = pants_pair();
  p.events.insert(p.events.begin() + 1,
                  BirthEvent{GlobalFace::Root(), +1, LoopId{9},
                             ComponentId{9}, BasepointId{9}});
  CHECK_THROWS_AS(find_zero_arc(p, 0, 2), std::invalid_argument);
  CHECK_THROWS_AS(find_zero_arc(p, 1, 0), std::invalid_argument);
}

TEST_CASE("random movies satisfy the marking vertex laws") {
  std::mt19937 rng(77002);
  for (int trial = 0; trial < 80; ++trial) {
    Movie m = test::random_movie(rng);
    CAPTURE(trial);
    MovieRun run = run_movie(m);
    MarkingGraph g = trace_marking(m, run);

    int births = 0, deaths = 0, saddles = 0;
    for (const Event &e : m.events) {
      births += std::holds_alternative<BirthEvent>(e);
      deaths += std::holds_alternative<DeathEvent>(e);
      saddles += std::holds_alternative<SaddleEvent>(e);
    }
    int boundary = (int)(run.stills.front().d().bp_at.size() +
                         run.stills.back().d().bp_at.size());
    int univalent = 0, trivalent = 0;
    for (const MarkVertex &v : g.vertices)
      (v.kind == MarkVertex::SaddleNode ? trivalent : univalent)++;
    CHECK(univalent == births + deaths + boundary);
    CHECK(trivalent == saddles);
    CHECK(g.warnings.empty());

    for (size_t v = 0; v < g.vertices.size(); ++v) {
      size_t ins = g.in_edges((int)v).size(),
             outs = g.out_edges((int)v).size();
      if (g.vertices[v].kind == MarkVertex::SaddleNode) {
        bool merge = *run.traces[g.vertices[v].event].saddle_merge;
        CHECK(ins == (merge ? 2u : 1u));
        CHECK(outs == (merge ? 1u : 2u));
      } else {
        CHECK(ins + outs == 1);
      }
    }
  }
}
