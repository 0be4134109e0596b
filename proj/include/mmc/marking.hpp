#pragma once

#include <optional>
#include <vector>

#include "mmc/movie.hpp"

// The marking graph a movie traces out: basepoint worldlines are edges,
// births/deaths/saddles and boundary basepoints are vertices. Twist words
// measure how far a worldline winds around its component.
namespace mmc {

struct MarkVertex {
  enum Kind {
    BirthLeaf,    // univalent, at a Birth event
    DeathLeaf,    // univalent, at a Death event
    BoundaryIn,   // univalent, basepoint of the initial still
    BoundaryOut,  // univalent, basepoint of the terminal still
    SaddleNode,   // trivalent, at a Saddle event
  };
  Kind kind;
  int event = -1;  // event index for BirthLeaf/DeathLeaf/SaddleNode
  BasepointId bp;  // the basepoint for BoundaryIn/BoundaryOut
};

// One basepoint's lifetime. Basepoint ids can be reused after consumption,
// so a worldline is identified by its position in MarkingGraph::edges, not
// by `bp` alone; `begin`/`end` are the still indices bounding its life.
struct Worldline {
  BasepointId bp;
  int from = -1, to = -1;  // vertex indices, oriented by increasing time
  int begin = 0, end = 0;  // alive in stills [begin, end]
  // Slide events acting on this basepoint: (event index, signed steps).
  std::vector<std::pair<int, int>> slides;
};

struct MarkingGraph {
  std::vector<MarkVertex> vertices;
  std::vector<Worldline> edges;
  int components = 0;  // connected components of the graph
  std::vector<std::string> warnings;

  // Index of the worldline wearing `bp` in still `still`; -1 if none.
  int edge_at(int still, BasepointId bp) const;
  // Incident edges with this vertex as head (in) resp. tail (out).
  std::vector<int> in_edges(int vertex) const;
  std::vector<int> out_edges(int vertex) const;
};

// Trace the graph. Throws MovieError if the movie does not run; degree and
// flow-orientation discipline hold on the result by construction.
MarkingGraph trace_marking(const Movie &m);
MarkingGraph trace_marking(const Movie &m, const MovieRun &run);

// Combinatorial length of one full traversal of a component: the number of
// crossing ends plus other basepoints a sliding basepoint passes. At least 1
// (a bare loop's full revolution is a single step).
int lap_length(const Diagram &d, ComponentId comp);

// Winding bookkeeping for one worldline. Laps are accumulated exactly: each
// slide contributes steps / lap_length measured in its own still, so the
// decomposition stays well defined when the component changes shape.
struct TwistWord {
  long long net_steps = 0;   // sum of signed slide steps
  long long full_loops = 0;  // whole traversals, rounded toward zero
  // Leftover winding after removing full loops, as an exact fraction of a
  // lap; num == 0 means the residual path is empty.
  long long residual_num = 0;
  long long residual_den = 1;
  bool residual_empty() const { return residual_num == 0; }
};

// Twist word of one worldline (index into trace_marking(m).edges). Throws
// MovieError if the movie does not run, std::invalid_argument on a bad edge.
TwistWord twist_word(const Movie &m, int edge);

// A winding-free connecting worldline between two saddles: the combinatorial
// form of an embedded arc joining the two critical points.
struct ZeroArcWitness {
  BasepointId bp;  // the worldline's basepoint, emitted at the first saddle
  int from_event = -1, to_event = -1;
  // Signed steps of the connecting slides, in order; empty when the emitted
  // basepoint already sits on the second saddle's site.
  std::vector<int> residual;
};

// Look for a zero arc between saddles i < j. The two events must be Saddles
// with no Birth/Death/Saddle strictly between them (std::invalid_argument
// otherwise). Some(witness) iff the worldline emitted at i is consumed at j
// with zero full loops.
std::optional<ZeroArcWitness> find_zero_arc(const Movie &m, int i, int j);

}  // namespace mmc
