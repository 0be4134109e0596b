#pragma once

#include <map>
#include <set>

#include "mmc/equivalence.hpp"

// The movie-move catalog: fifteen moves kept as external data (event
// templates with symbolic slots), matched against movies and applied as
// window rewrites, plus the distant-critical-point interchange and the
// basepoint-clearing window normalization.
namespace mmc {

// One templated event: the event kind plus its argument tokens in the same
// order the movie grammar uses. Tokens starting with '$' are slots bound at
// match time; "*" matches any token without binding; anything else is
// literal.
struct TemplateEvent {
  std::string kind;
  std::vector<std::string> args;
};

struct MoveSchema {
  int id = 0;
  std::string variant;  // distinguishes co-numbered forms ("cup", "fission")
  bool marked = false;  // carries basepoint content (moves 8, 12-15)
  std::vector<TemplateEvent> lhs, rhs;
  // Extra context predicates; "identity" requires the window to return to
  // its opening still.
  std::vector<std::string> conditions;
};

// Read and validate a catalog file: exactly the ids 1..15, marked flags
// fixed to {8,12,13,14,15}, fission and merge variants present for 13 and
// 15. Throws ParseError (module textio) on malformed or incomplete data.
std::vector<MoveSchema> load_catalog(const std::string &path);

struct MoveInstance {
  MoveSchema schema;
  bool reverse = false;              // apply rhs -> lhs instead
  int window_begin = 0, window_end = 0;  // replaced range [begin, end)
  // Slot bindings for both sides, as concrete grammar tokens.
  std::map<std::string, std::string> binding;
};

// Every window and binding where the pattern side matches and the
// replacement side replays to the same closing still. Sound: every returned
// instance applies.
std::vector<MoveInstance> enumerate_matches(const Movie &m,
                                            const MoveSchema &s,
                                            bool reverse);

// Splice the instance's replacement side over its window, rebinding the
// tail. Throws RewriteError(StaleInstance) when the bindings no longer
// match m.
Movie apply_move(const Movie &m, const MoveInstance &inst);

// Transpose events k and k+1. They must touch disjoint diagram elements and
// the swap must preserve every still's validity; failures through elements
// are OverlappingSupports, failures through basepoint discipline or
// placement are MarkingObstruction.
Movie interchange(const Movie &m, int k);

// Push every basepoint out of the elements the window [begin, end) touches,
// by slides inserted before the window and inverted after it. The window
// must contain no Birth/Death/Saddle. Throws RewriteError(MarkingObstruction)
// naming the obstruction when a basepoint cannot be cleared.
Movie normalize_window(const Movie &m, int begin, int end);

}  // namespace mmc
