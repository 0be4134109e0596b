#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mmc/event.hpp"

// Movies: an initial still plus an ordered event word. Time is the event
// index; running a movie materializes every intermediate still together with
// the application traces that downstream layers (marking, moves, search)
// consume.
namespace mmc {

struct Movie {
  Diagram initial;
  std::vector<Event> events;
};

// An event failed to apply; `index` is the position of the failing event.
struct MovieError : std::runtime_error {
  MovieError(int index, ApplyError::Kind kind, const std::string &msg)
      : std::runtime_error(msg), index(index), kind(kind) {}
  int index;
  ApplyError::Kind kind;
};

// stills.size() == events.size() + 1; traces[k] produced stills[k + 1].
struct MovieRun {
  std::vector<Diagram> stills;
  std::vector<EventTrace> traces;
};

// Run every event in order. Throws MovieError at the first failure.
MovieRun run_movie(const Movie &m);

// The still sequence alone. Throws MovieError at the first failure.
std::vector<Diagram> stills(const Movie &m);

// Total: collects every problem (event applicability, per-still marking
// validity) instead of throwing. Empty report iff m is a marked movie.
ValidationReport validate_movie(const Movie &m);

// Invariants of the compact surface a movie traces out.
struct SurfaceInvariants {
  int euler_characteristic = 0;  // #births + #deaths - #saddles
  int surface_component_count = 0;
  bool orientable = true;  // no orientation-incoherent saddle anywhere
  // Canonical codes of the first and last still.
  std::pair<std::string, std::string> boundary;
};

// Throws MovieError if the movie does not run. The second form reuses an
// existing run of m.
SurfaceInvariants surface_invariants(const Movie &m);
SurfaceInvariants surface_invariants(const Movie &m, const MovieRun &run);

}  // namespace mmc
