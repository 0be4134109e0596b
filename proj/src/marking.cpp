#include "mmc/marking.hpp"

#include <functional>
#include <numeric>

namespace mmc {

int MarkingGraph::edge_at(int still, BasepointId bp) const {
  for (size_t i = 0; i < edges.size(); ++i)
    if (edges[i].bp == bp && edges[i].begin <= still && still <= edges[i].end)
      return (int)i;
  return -1;
}

std::vector<int> MarkingGraph::in_edges(int vertex) const {
  std::vector<int> out;
  for (size_t i = 0; i < edges.size(); ++i)
    if (edges[i].to == vertex) out.push_back((int)i);
  return out;
}

std::vector<int> MarkingGraph::out_edges(int vertex) const {
  std::vector<int> out;
  for (size_t i = 0; i < edges.size(); ++i)
    if (edges[i].from == vertex) out.push_back((int)i);
  return out;
}

MarkingGraph trace_marking(const Movie &m) {
  return trace_marking(m, run_movie(m));
}

MarkingGraph trace_marking(const Movie &m, const MovieRun &run) {
  MarkingGraph g;
  // basepoint -> open worldline index; ids can be reused after consumption,
  // so only the currently open line is keyed.
  std::map<BasepointId, int> live;

  auto open_line = [&](BasepointId bp, int vertex, int firstStill) {
    g.edges.push_back(Worldline{bp, vertex, -1, firstStill, -1, {}});
    live[bp] = (int)g.edges.size() - 1;
  };
  auto close_line = [&](BasepointId bp, int vertex, int lastStill) {
    auto it = live.find(bp);
    if (it == live.end())
      throw std::logic_error("worldline bookkeeping lost " + show(bp));
    g.edges[it->second].to = vertex;
    g.edges[it->second].end = lastStill;
    live.erase(it);
  };

  for (const auto &[bp, elem] : run.stills.front().d().bp_at) {
    (void)elem;
    g.vertices.push_back(MarkVertex{MarkVertex::BoundaryIn, -1, bp});
    open_line(bp, (int)g.vertices.size() - 1, 0);
  }

  for (size_t k = 0; k < m.events.size(); ++k) {
    const EventTrace &t = run.traces[k];
    if (const auto *sl = std::get_if<SlideEvent>(&m.events[k])) {
      auto it = live.find(sl->bp);
      if (it == live.end())
        throw std::logic_error("slide of unknown basepoint " + show(sl->bp));
      g.edges[it->second].slides.emplace_back((int)k, sl->steps);
      continue;
    }
    MarkVertex::Kind kind;
    if (std::holds_alternative<BirthEvent>(m.events[k]))
      kind = MarkVertex::BirthLeaf;
    else if (std::holds_alternative<DeathEvent>(m.events[k]))
      kind = MarkVertex::DeathLeaf;
    else if (std::holds_alternative<SaddleEvent>(m.events[k]))
      kind = MarkVertex::SaddleNode;
    else
      continue;
    g.vertices.push_back(MarkVertex{kind, (int)k, BasepointId{0}});
    int v = (int)g.vertices.size() - 1;
    for (BasepointId bp : t.bp_consumed) close_line(bp, v, (int)k);
    for (BasepointId bp : t.bp_emitted) open_line(bp, v, (int)k + 1);
    size_t want_in = kind == MarkVertex::SaddleNode && *t.saddle_merge ? 2 : 1;
    if (kind == MarkVertex::BirthLeaf) want_in = 0;
    if (t.bp_consumed.size() != want_in)
      throw std::logic_error("degree discipline broken at event " +
                             std::to_string(k));
  }

  int last = (int)run.stills.size() - 1;
  for (const auto &[bp, elem] : run.stills.back().d().bp_at) {
    (void)elem;
    g.vertices.push_back(MarkVertex{MarkVertex::BoundaryOut, -1, bp});
    close_line(bp, (int)g.vertices.size() - 1, last);
  }
  if (!live.empty())
    throw std::logic_error("worldline left open past the terminal still");

  // Connected components of the graph.
  std::vector<int> parent(g.vertices.size());
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const Worldline &w : g.edges) parent[find(w.from)] = find(w.to);
  std::set<int> roots;
  for (size_t v = 0; v < g.vertices.size(); ++v) roots.insert(find((int)v));
  g.components = (int)roots.size();

  int sheets = surface_invariants(m, run).surface_component_count;
  if (g.components != sheets)
    g.warnings.push_back("marking graph has " + std::to_string(g.components) +
                         " components but the surface has " +
                         std::to_string(sheets));
  return g;
}

int lap_length(const Diagram &d, ComponentId comp) {
  int edges = 0, bps = 0;
  for (const auto &[eid, e] : d.edges)
    if (e.comp == comp) {
      edges++;
      bps += (int)e.bps.size();
    }
  for (const auto &[oid, l] : d.loops)
    if (l.comp == comp) bps += (int)l.bps.size();
  int markers = edges + std::max(0, bps - 1);
  return std::max(1, markers);
}

namespace {

struct Rat {
  long long num = 0, den = 1;
  void add(long long n, long long d) {
    num = num * d + n * den;
    den *= d;
    long long g = std::gcd(num < 0 ? -num : num, den);
    if (g > 1) {
      num /= g;
      den /= g;
    }
  }
};

TwistWord twist_of(const MovieRun &run, const Worldline &w) {
  TwistWord tw;
  Rat progress;
  for (auto [event, steps] : w.slides) {
    const Diagram &still = run.stills[event];
    ComponentId comp;
    ElemRef at = still.d().bp_at.at(w.bp);
    comp = at.isLoop ? still.loops.at(at.as_loop()).comp
                     : still.edges.at(at.as_edge()).comp;
    tw.net_steps += steps;
    progress.add(steps, lap_length(still, comp));
  }
  tw.full_loops = progress.num / progress.den;  // toward zero
  tw.residual_num = progress.num - tw.full_loops * progress.den;
  tw.residual_den = progress.den;
  return tw;
}

}  // namespace

TwistWord twist_word(const Movie &m, int edge) {
  MovieRun run = run_movie(m);
  MarkingGraph g = trace_marking(m, run);
  if (edge < 0 || edge >= (int)g.edges.size())
    throw std::invalid_argument("no marking edge " + std::to_string(edge));
  return twist_of(run, g.edges[edge]);
}

std::optional<ZeroArcWitness> find_zero_arc(const Movie &m, int i, int j) {
  if (i < 0 || j <= i || j >= (int)m.events.size())
    throw std::invalid_argument("zero arc indices out of order");
  if (!std::holds_alternative<SaddleEvent>(m.events[i]) ||
      !std::holds_alternative<SaddleEvent>(m.events[j]))
    throw std::invalid_argument("zero arc endpoints must be saddles");
  for (int k = i + 1; k < j; ++k)
    if (std::holds_alternative<SaddleEvent>(m.events[k]) ||
        std::holds_alternative<BirthEvent>(m.events[k]) ||
        std::holds_alternative<DeathEvent>(m.events[k]))
      throw std::invalid_argument(
          "saddles are not consecutive: event " + std::to_string(k) +
          " is a critical point");

  MovieRun run = run_movie(m);
  MarkingGraph g = trace_marking(m, run);
  int vi = -1, vj = -1;
  for (size_t v = 0; v < g.vertices.size(); ++v) {
    if (g.vertices[v].kind == MarkVertex::SaddleNode) {
      if (g.vertices[v].event == i) vi = (int)v;
      if (g.vertices[v].event == j) vj = (int)v;
    }
  }
  for (const Worldline &w : g.edges) {
    if (w.from != vi || w.to != vj) continue;
    if (twist_of(run, w).full_loops != 0) continue;
    ZeroArcWitness wit;
    wit.bp = w.bp;
    wit.from_event = i;
    wit.to_event = j;
    for (auto [event, steps] : w.slides) wit.residual.push_back(steps);
    return wit;
  }
  return std::nullopt;
}

}  // namespace mmc
