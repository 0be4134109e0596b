#pragma once

#include "mmc/marking.hpp"

// Marking equivalences as sound movie rewrites: slide normalization, moving
// a full twist past a saddle, exchanging saddles joined by a zero arc, and
// canceling a birth/death against a saddle. Every rewrite preserves the
// boundary stills, Euler characteristic, surface component count, and
// orientability.
namespace mmc {

// A rewrite's precondition failed. Shared by this module and module moves.
struct RewriteError : std::runtime_error {
  enum Kind {
    NoTwistArc,           // no removable full loop beside the saddle
    NoZeroArc,            // connecting worldline missing or wound up
    OverlappingSupports,  // the events interact through diagram elements
    MarkingObstruction,   // the swap breaks basepoint discipline
    NotCancelingPosition,
    TwistObstruction,  // full loop on the connecting worldline
    StaleInstance,     // move bindings no longer present
  };
  RewriteError(Kind k, const std::string &msg)
      : std::runtime_error(msg), kind(k) {}
  Kind kind;
};

// Merge adjacent runs of slides of the same basepoint, dropping runs that
// sum to zero. Idempotent; twist words and all other events are unchanged.
Movie normalize_slides(const Movie &m);

enum class TwistSide { Below, Above };

// Move one full loop of the given sign past the saddle at `saddle_index`.
// The loop must sit adjacent to the saddle on the named side (the slide run
// immediately before/after it); it reappears on the other side, on the
// worldline the saddle's junction prescribes. Throws RewriteError(NoTwistArc)
// when no such loop is adjacent.
Movie twist_rewrite(const Movie &m, int saddle_index, TwistSide side,
                    int sign);

// Transpose the saddle at index i with the next saddle after it, carrying
// the connecting marking across: requires a zero-arc witness between them
// (NoZeroArc otherwise), only Slide events between them and disjoint diagram
// supports (OverlappingSupports otherwise). The rewritten movie contains the
// reversed zero arc.
Movie zero_arc_exchange(const Movie &m, int i);

// Remove a Birth whose loop is consumed by the next saddle, or a Saddle
// whose split-off loop dies at the next Death, together with the connecting
// worldline's slides. Only Slide events may sit between the pair
// (NotCancelingPosition otherwise); a wound-up connecting worldline is
// reported as TwistObstruction (apply twist_rewrite first).
Movie cancel_pair(const Movie &m, int i);

}  // namespace mmc
