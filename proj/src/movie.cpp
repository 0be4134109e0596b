#include "mmc/movie.hpp"

#include <algorithm>
#include <functional>
#include <set>

namespace mmc {

namespace {

std::string at_event(size_t k, const Event &e, const std::string &what) {
  return "event " + std::to_string(k) + " (" + event_name(e) + "): " + what;
}

}  // namespace

MovieRun run_movie(const Movie &m) {
  MovieRun run;
  run.stills.push_back(m.initial);
  run.stills.back().reseal();
  for (size_t k = 0; k < m.events.size(); ++k) {
    try {
      ApplyResult res = apply_event(run.stills.back(), m.events[k]);
      run.stills.push_back(std::move(res.diagram));
      run.traces.push_back(std::move(res.trace));
    } catch (const ApplyError &err) {
      throw MovieError((int)k, err.kind, at_event(k, m.events[k], err.what()));
    }
  }
  return run;
}

std::vector<Diagram> stills(const Movie &m) {
  return run_movie(m).stills;
}

ValidationReport validate_movie(const Movie &m) {
  ValidationReport report;
  Diagram cur = m.initial;
  cur.reseal();
  for (const std::string &p : validate_diagram(cur).problems)
    report.problems.push_back("initial: " + p);
  if (!report.ok()) return report;
  if (!is_marking_valid_still(cur))
    report.problems.push_back("initial: not exactly one basepoint per component");
  for (size_t k = 0; k < m.events.size(); ++k) {
    try {
      cur = apply_event(cur, m.events[k]).diagram;
    } catch (const ApplyError &err) {
      report.problems.push_back(at_event(k, m.events[k], err.what()));
      return report;  // later stills do not exist
    }
    if (!is_marking_valid_still(cur))
      report.problems.push_back(
          at_event(k, m.events[k],
                   "produced a still without exactly one basepoint per component"));
  }
  return report;
}

SurfaceInvariants surface_invariants(const Movie &m) {
  return surface_invariants(m, run_movie(m));
}

SurfaceInvariants surface_invariants(const Movie &m, const MovieRun &run) {
  SurfaceInvariants inv;

  for (const Event &e : m.events) {
    if (std::holds_alternative<BirthEvent>(e) ||
        std::holds_alternative<DeathEvent>(e))
      inv.euler_characteristic += 1;
    else if (std::holds_alternative<SaddleEvent>(e))
      inv.euler_characteristic -= 1;
  }

  for (const EventTrace &t : run.traces)
    if (t.saddle_coherent && !*t.saddle_coherent) inv.orientable = false;

  // Union-find over (still index, component id): link each component to its
  // continuation in the next still, explicit flows first, identity
  // otherwise. Sheet count = number of classes.
  std::map<std::pair<int, ComponentId>, int> node;
  std::vector<int> parent;
  auto id_of = [&](int k, ComponentId c) {
    auto [it, fresh] = node.try_emplace({k, c}, (int)parent.size());
    if (fresh) parent.push_back(it->second);
    return it->second;
  };
  std::function<int(int)> find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  auto unite = [&](int a, int b) { parent[find(a)] = find(b); };

  for (size_t k = 0; k < run.stills.size(); ++k)
    for (const Component &c : run.stills[k].d().components) id_of((int)k, c.id);
  for (size_t k = 0; k < run.traces.size(); ++k) {
    const EventTrace &t = run.traces[k];
    std::set<ComponentId> routed(t.comp_dead.begin(), t.comp_dead.end());
    for (auto [from, to] : t.comp_flow) {
      unite(id_of((int)k, from), id_of((int)k + 1, to));
      routed.insert(from);
    }
    for (const Component &c : run.stills[k].d().components)
      if (!routed.count(c.id))
        unite(id_of((int)k, c.id), id_of((int)k + 1, c.id));
  }
  std::set<int> roots;
  for (int x = 0; x < (int)parent.size(); ++x) roots.insert(find(x));
  inv.surface_component_count = (int)roots.size();

  inv.boundary = {canonical_code(run.stills.front()),
                  canonical_code(run.stills.back())};
  return inv;
}

}  // namespace mmc
