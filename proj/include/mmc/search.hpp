#pragma once

#include <optional>
#include <variant>

#include "mmc/moves.hpp"

// Bounded equivalence proving: breadth-first search over single rewrite
// steps from both ends, with independently checkable certificates.
namespace mmc {

struct InterchangeStep {
  int k = 0;
};
struct TwistRewriteStep {
  int saddle_index = 0;
  TwistSide side = TwistSide::Below;
  int sign = +1;
};
struct ZeroArcExchangeStep {
  int i = 0;
};
struct CancelPairStep {
  int i = 0;
};
struct NormalizeSlidesStep {};

using RewriteStep =
    std::variant<MoveInstance, InterchangeStep, TwistRewriteStep,
                 ZeroArcExchangeStep, CancelPairStep, NormalizeSlidesStep>;

const char *step_name(const RewriteStep &s);

// Apply one step to a movie; throws RewriteError/MovieError on a step that
// no longer fits.
Movie apply_step(const Movie &m, const RewriteStep &s,
                 const std::vector<MoveSchema> &catalog);

struct Certificate {
  Movie source;
  std::vector<RewriteStep> steps;
  Movie target;
};

struct SearchConfig {
  int max_depth = 4;
  int node_budget = 20000;
  // Step kinds neighbors() may use (names per step_name); empty = all.
  std::set<std::string> step_whitelist;
};

// All single-step rewrites applicable to m: catalog moves in both
// directions, interchanges, twist/zero-arc/cancel rewrites, and slide
// normalization when it changes the movie.
std::vector<std::pair<RewriteStep, Movie>> neighbors(
    const Movie &m, const std::vector<MoveSchema> &catalog,
    const SearchConfig &cfg = {});

// Canonical key: concatenated canonical still codes after normalize_slides.
// Equal keys mean equal movies up to slide normalization and relabeling.
std::string movie_key(const Movie &m);

struct ProveResult {
  enum Status {
    Proved,        // certificate found
    Disproved,     // an invariant separates the movies, definitively
    Inconclusive,  // budget exhausted; never "not equivalent"
  };
  Status status = Inconclusive;
  std::optional<Certificate> certificate;  // set iff Proved
  std::string reason;  // disproof witness or budget note
};

// Bidirectional BFS between a and b. Boundary canonical codes are checked
// first; a mismatch there, or in Euler characteristic, surface component
// count, or orientability, disproves equivalence outright.
ProveResult prove_equivalent(const Movie &a, const Movie &b,
                             const SearchConfig &cfg,
                             const std::vector<MoveSchema> &catalog);

struct CheckResult {
  bool ok = false;
  int failed_step = -1;  // -1 when ok or when the endpoints mismatch
  std::string reason;
};

// Independent replay: re-validates every step against its intermediate
// movie, re-checks the conserved invariants at every stage, and compares the
// final movie's key against the target.
CheckResult check_certificate(const Certificate &c,
                              const std::vector<MoveSchema> &catalog);

}  // namespace mmc
