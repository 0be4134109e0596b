#pragma once

#include <algorithm>
#include <random>

#include "mmc/movie.hpp"

// Seeded random valid movies, built by generate-and-test: at every step a
// pool of candidate events is enumerated from the current still, shuffled,
// and the first one that actually applies is appended. All enumeration runs
// over sorted containers, so a fixed seed reproduces the same movie.
namespace mmc::test {

struct GenOptions {
  int events = 12;
  bool allow_type1 = true;   // births, deaths, saddles
  int max_crossings = 8;     // growth caps keep canonical codes cheap
  int max_loops = 6;
};

inline Movie random_movie(std::mt19937 &rng, const GenOptions &opt = {}) {
  Movie m;
  m.initial.reseal();
  Diagram cur = m.initial;

  for (int step = 0; step < opt.events; ++step) {
    const Derived &der = cur.d();
    std::vector<Event> pool;

    auto arcs_of = [&](GlobalFace g) {
      std::vector<ArcSide> out = region_boundary(cur, g);
      return out;
    };

    if (opt.allow_type1 && (int)cur.loops.size() < opt.max_loops)
      for (GlobalFace g : der.global_faces)
        for (int orient : {+1, -1})
          pool.push_back(BirthEvent{g, orient, cur.fresh_loop(),
                                    cur.fresh_component(),
                                    cur.fresh_basepoint()});

    if (opt.allow_type1)
      for (const auto &[oid, l] : cur.loops)
        pool.push_back(DeathEvent{oid});

    for (const auto &[bp, elem] : der.bp_at) {
      (void)elem;
      pool.push_back(SlideEvent{bp, +1});
      pool.push_back(SlideEvent{bp, -1});
    }

    if ((int)cur.crossings.size() < opt.max_crossings) {
      for (const auto &[eid, e] : cur.edges)
        for (Side s : {Side::L, Side::R})
          for (int chir : {+1, -1})
            pool.push_back(
                R1AddEvent{ArcRef{ArcSide{ElemRef::edge(eid), s}, 0, 0}, chir});
      for (const auto &[oid, l] : cur.loops)
        for (Side s : {Side::L, Side::R})
          for (int chir : {+1, -1})
            pool.push_back(
                R1AddEvent{ArcRef{ArcSide{ElemRef::loop(oid), s}, 0, 0}, chir});
    }

    for (const Face &f : der.faces) {
      if (f.walk.size() == 1) pool.push_back(R1RemoveEvent{f.key()});
      if (f.walk.size() == 2) pool.push_back(R2RemoveEvent{f.key()});
      if (f.walk.size() == 3)
        for (int v = 0; v < 8; ++v) pool.push_back(R3Event{f.key(), v});
    }

    if ((int)cur.crossings.size() < opt.max_crossings)
      for (GlobalFace g : der.global_faces) {
        std::vector<ArcSide> bd = arcs_of(g);
        for (size_t i = 0; i < bd.size(); ++i) {
          for (size_t j = i + 1; j < bd.size(); ++j)
            for (bool over : {false, true})
              pool.push_back(R2AddEvent{ArcRef{bd[i], 0, 0},
                                        ArcRef{bd[j], 0, 0}, over, {}});
          for (bool over : {false, true})
            pool.push_back(R2AddEvent{ArcRef{bd[i], 0, 0},
                                      ArcRef{bd[i], 0, 1}, over, {}});
        }
      }

    if (opt.allow_type1)
      for (GlobalFace g : der.global_faces) {
        std::vector<ArcSide> bd = arcs_of(g);
        for (size_t i = 0; i < bd.size(); ++i) {
          for (size_t j = i + 1; j < bd.size(); ++j)
            pool.push_back(SaddleEvent{ArcRef{bd[i], 0, 0},
                                       ArcRef{bd[j], 0, 0},
                                       bd[i].side == bd[j].side,
                                       {}});
          pool.push_back(SaddleEvent{ArcRef{bd[i], 0, 0},
                                     ArcRef{bd[i], 0, 1}, true, {}});
        }
      }

    std::shuffle(pool.begin(), pool.end(), rng);
    bool placed = false;
    for (const Event &cand : pool) {
      try {
        ApplyResult res = apply_event(cur, cand);
        cur = std::move(res.diagram);
        m.events.push_back(cand);
        placed = true;
        break;
      } catch (const ApplyError &) {
      }
    }
    if (!placed) break;  // still can run dry of legal events; keep what we have
  }
  return m;
}

}  // namespace mmc::test
