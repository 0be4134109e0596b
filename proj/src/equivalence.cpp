#include "mmc/equivalence.hpp"

#include <algorithm>

#include "transport.hpp"

namespace mmc {

namespace {

const SlideEvent *as_slide(const Event &e) { return std::get_if<SlideEvent>(&e); }

bool is_type1(const Event &e) {
  return std::holds_alternative<BirthEvent>(e) ||
         std::holds_alternative<DeathEvent>(e) ||
         std::holds_alternative<SaddleEvent>(e);
}

ComponentId comp_of_bp(const Diagram &d, BasepointId b) {
  return comp_of_elem(d, d.d().bp_at.at(b));
}

bool contains(const std::vector<BasepointId> &v, BasepointId b) {
  return std::find(v.begin(), v.end(), b) != v.end();
}

}  // namespace

Movie normalize_slides(const Movie &m) {
  Movie out;
  out.initial = m.initial;
  for (const Event &e : m.events) {
    if (const SlideEvent *s = as_slide(e)) {
      if (!out.events.empty()) {
        if (SlideEvent *p = std::get_if<SlideEvent>(&out.events.back());
            p && p->bp == s->bp) {
          p->steps += s->steps;
          if (p->steps == 0) out.events.pop_back();
          continue;
        }
      }
      if (s->steps != 0) out.events.push_back(e);
      continue;
    }
    out.events.push_back(e);
  }
  return out;
}

Movie twist_rewrite(const Movie &m, int saddle_index, TwistSide side,
                    int sign) {
  if (sign != +1 && sign != -1)
    throw std::invalid_argument("twist sign must be +1 or -1");
  int n = (int)m.events.size();
  if (saddle_index < 0 || saddle_index >= n ||
      !std::holds_alternative<SaddleEvent>(m.events[saddle_index]))
    throw std::invalid_argument("twist_rewrite target is not a saddle");
  int k = saddle_index;
  MovieRun run = run_movie(m);
  const EventTrace &tr = run.traces[k];

  Movie out;
  out.initial = m.initial;
  if (side == TwistSide::Below) {
    BasepointId b0 = tr.bp_consumed.front();
    int lo = k;
    while (lo > 0) {
      const SlideEvent *s = as_slide(m.events[lo - 1]);
      if (!s || s->bp != b0) break;
      --lo;
    }
    if (lo == k)
      throw RewriteError(RewriteError::NoTwistArc,
                         "no slide run of the saddle's worldline below it");
    long T = 0;
    for (int t = lo; t < k; t++) T += as_slide(m.events[t])->steps;
    int L = lap_length(run.stills[k], comp_of_bp(run.stills[k], b0));
    if (sign * T < L)
      throw RewriteError(RewriteError::NoTwistArc,
                         "the run below the saddle holds no full loop of this sign");
    BasepointId bl = tr.bp_emitted.front();
    int L2 = lap_length(run.stills[k + 1], comp_of_bp(run.stills[k + 1], bl));
    out.events.assign(m.events.begin(), m.events.begin() + lo);
    if (T - sign * L != 0)
      out.events.push_back(SlideEvent{b0, (int)(T - sign * L)});
    out.events.push_back(m.events[k]);
    out.events.push_back(SlideEvent{bl, sign * L2});
    out.events.insert(out.events.end(), m.events.begin() + k + 1,
                      m.events.end());
  } else {
    BasepointId b0 = tr.bp_emitted.front();
    int hi = k;
    while (hi + 1 < n) {
      const SlideEvent *s = as_slide(m.events[hi + 1]);
      if (!s || s->bp != b0) break;
      ++hi;
    }
    if (hi == k)
      throw RewriteError(RewriteError::NoTwistArc,
                         "no slide run of the saddle's worldline above it");
    long T = 0;
    for (int t = k + 1; t <= hi; t++) T += as_slide(m.events[t])->steps;
    int L = lap_length(run.stills[k + 1], comp_of_bp(run.stills[k + 1], b0));
    if (sign * T < L)
      throw RewriteError(RewriteError::NoTwistArc,
                         "the run above the saddle holds no full loop of this sign");
    BasepointId bl = tr.bp_consumed.front();
    int L2 = lap_length(run.stills[k], comp_of_bp(run.stills[k], bl));
    out.events.assign(m.events.begin(), m.events.begin() + k);
    out.events.push_back(SlideEvent{bl, sign * L2});
    out.events.push_back(m.events[k]);
    if (T - sign * L != 0)
      out.events.push_back(SlideEvent{b0, (int)(T - sign * L)});
    out.events.insert(out.events.end(), m.events.begin() + hi + 1,
                      m.events.end());
  }
  return out;
}

namespace {

// A saddle event rewritten to apply on the other side of an incoherent band:
// sites on elements the band reversed flip their side and renumber their gap.
SaddleEvent adjust_for_reversal(const SaddleEvent &ev,
                                const std::set<ElemRef> &reversed,
                                const Diagram &as_applied) {
  SaddleEvent out = ev;
  auto fix = [&](ArcRef &r) {
    if (!reversed.count(r.at.elem)) return;
    r.at.side = flip(r.at.side);
    if (!r.at.elem.isLoop) {
      int nb = (int)as_applied.edges.at(r.at.elem.as_edge()).bps.size();
      r.gap = nb - r.gap;
    }
  };
  fix(out.a);
  fix(out.b);
  if (out.a.at.elem == out.b.at.elem && reversed.count(out.a.at.elem) &&
      out.a.gap == out.b.gap)
    std::swap(out.a.sub, out.b.sub);
  out.coherent = out.a.at.side == out.b.at.side;
  return out;
}

}  // namespace

Movie zero_arc_exchange(const Movie &m, int i) {
  int n = (int)m.events.size();
  if (i < 0 || i >= n || !std::holds_alternative<SaddleEvent>(m.events[i]))
    throw std::invalid_argument("zero_arc_exchange target is not a saddle");
  int j = i + 1;
  while (j < n && as_slide(m.events[j])) ++j;
  if (j >= n || !std::holds_alternative<SaddleEvent>(m.events[j]))
    throw RewriteError(RewriteError::OverlappingSupports,
                       "no companion saddle reachable through slides");
  std::optional<ZeroArcWitness> wit = find_zero_arc(m, i, j);
  if (!wit)
    throw RewriteError(RewriteError::NoZeroArc,
                       "no zero-arc witness connects the saddles");
  for (int k = i + 1; k < j; k++)
    if (as_slide(m.events[k])->bp != wit->bp)
      throw RewriteError(RewriteError::OverlappingSupports,
                         "slides of an unrelated basepoint between the saddles");
  const SaddleEvent &A = std::get<SaddleEvent>(m.events[i]);
  const SaddleEvent &B = std::get<SaddleEvent>(m.events[j]);
  if (!A.carry.empty() || !B.carry.empty())
    throw RewriteError(RewriteError::OverlappingSupports,
                       "a saddle carries nested pieces");
  MovieRun run = run_movie(m);
  std::set<ElemRef> createdA =
      created_elements(run.stills[i], run.stills[i + 1]);
  if (createdA.count(B.a.at.elem) || createdA.count(B.b.at.elem))
    throw RewriteError(RewriteError::OverlappingSupports,
                       "the second saddle cuts structure the first created");

  // Extend the window over the slide runs feeding the first saddle and
  // draining the second, so an exchange of the exchange reassembles the
  // original window instead of piling up correction slides.
  std::set<BasepointId> in_bps(run.traces[i].bp_consumed.begin(),
                               run.traces[i].bp_consumed.end());
  int w0 = i;
  while (w0 > 0) {
    const SlideEvent *s = as_slide(m.events[w0 - 1]);
    if (!s || !in_bps.count(s->bp)) break;
    --w0;
  }
  std::set<BasepointId> out_bps(run.traces[j].bp_emitted.begin(),
                                run.traces[j].bp_emitted.end());
  int w1 = j;
  while (w1 + 1 < n) {
    const SlideEvent *s = as_slide(m.events[w1 + 1]);
    if (!s || !out_bps.count(s->bp)) break;
    ++w1;
  }

  const Diagram &S0 = run.stills[w0];
  const Diagram &Send = run.stills[w1 + 1];

  std::vector<Event> win;
  Diagram cur = S0;
  auto push = [&](const Event &e) {
    cur = apply_event(cur, e).diagram;
    win.push_back(e);
  };
  auto ensure_on = [&](BasepointId b, ElemRef target) {
    std::optional<int> st = steps_to_element(cur, b, target);
    if (!st)
      throw std::logic_error("zero arc exchange: basepoint cannot reach its site");
    if (*st != 0) push(SlideEvent{b, *st});
  };

  // Transposed sites keep their gap index only as far as the basepoints
  // present at the new application time allow.
  auto clamp_gaps = [](SaddleEvent &ev, const Diagram &d) {
    auto cl = [&](ArcRef &r) {
      int nb = r.at.elem.isLoop
                   ? 0
                   : (int)d.edges.at(r.at.elem.as_edge()).bps.size();
      if (r.gap > nb) r.gap = nb;
    };
    cl(ev.a);
    cl(ev.b);
  };

  SaddleEvent B1 = adjust_for_reversal(B, run.traces[i].reversed, run.stills[j]);
  {
    ComponentId ca = comp_of_elem(cur, B1.a.at.elem);
    ComponentId cb = comp_of_elem(cur, B1.b.at.elem);
    if (ca != cb) {
      ensure_on(bp_of_comp(cur, ca), B1.a.at.elem);
      ensure_on(bp_of_comp(cur, cb), B1.b.at.elem);
    } else {
      ElemRef tgt = run.stills[j].d().bp_at.at(wit->bp) == B.a.at.elem
                        ? B1.a.at.elem
                        : B1.b.at.elem;
      ensure_on(bp_of_comp(cur, ca), tgt);
    }
  }
  clamp_gaps(B1, cur);
  EventTrace trB;
  try {
    ApplyResult r = apply_event(cur, B1);
    trB = r.trace;
    cur = std::move(r.diagram);
    win.push_back(B1);
  } catch (const ApplyError &e) {
    if (e.kind == ApplyError::SiteMismatch)
      throw RewriteError(RewriteError::OverlappingSupports,
                         std::string("the second saddle does not fit before "
                                     "the first: ") + e.what());
    throw std::logic_error(std::string("zero arc exchange construction: ") +
                           e.what());
  }

  // Carry the transposed marking back along the zero arc: the same slides,
  // reversed and negated, so the rewritten movie witnesses the reversed arc.
  {
    BasepointId bw{0};
    bool found = false;
    for (BasepointId b : trB.bp_emitted) {
      ComponentId c = comp_of_bp(cur, b);
      if (c == comp_of_elem(cur, A.a.at.elem) ||
          c == comp_of_elem(cur, A.b.at.elem)) {
        bw = b;
        found = true;
        break;
      }
    }
    if (!found)
      throw std::logic_error("zero arc exchange: no emitted worldline reaches "
                             "the first saddle");
    for (auto it = wit->residual.rbegin(); it != wit->residual.rend(); ++it)
      push(SlideEvent{bw, -*it});
  }

  SaddleEvent A2 = adjust_for_reversal(A, trB.reversed, run.stills[i]);
  clamp_gaps(A2, cur);
  try {
    push(A2);
  } catch (const ApplyError &e) {
    if (e.kind == ApplyError::SiteMismatch)
      throw RewriteError(RewriteError::OverlappingSupports,
                         std::string("the first saddle does not fit after the "
                                     "second: ") + e.what());
    throw std::logic_error(std::string("zero arc exchange construction: ") +
                           e.what());
  }

  // Park every basepoint on the element corresponding to its resting place in
  // the original window's final still.
  {
    IdMap psi = iso_between(strip_bps(cur), strip_bps(Send));
    std::map<ElemRef, ElemRef> inv;
    for (const auto &[a, b] : psi.edge) inv[ElemRef::edge(b)] = ElemRef::edge(a);
    for (const auto &[a, b] : psi.loop) inv[ElemRef::loop(b)] = ElemRef::loop(a);
    std::vector<std::pair<BasepointId, ElemRef>> targets;
    for (const auto &[b, h] : cur.d().bp_at) {
      ComponentId cs = psi.comp.at(comp_of_elem(cur, h));
      targets.emplace_back(b, inv.at(Send.d().bp_at.at(bp_of_comp(Send, cs))));
    }
    for (const auto &[b, tgt] : targets) ensure_on(b, tgt);
  }
  if (canonical_code(cur) != canonical_code(Send))
    throw std::logic_error("zero arc exchange rebuilt a different still");

  std::vector<Event> tail(m.events.begin() + w1 + 1, m.events.end());
  std::vector<Event> tail2 = transport_tail(tail, Send, cur);

  Movie out;
  out.initial = m.initial;
  out.events.assign(m.events.begin(), m.events.begin() + w0);
  out.events.insert(out.events.end(), win.begin(), win.end());
  out.events.insert(out.events.end(), tail2.begin(), tail2.end());
  return out;
}

Movie cancel_pair(const Movie &m, int i) {
  int n = (int)m.events.size();
  if (i < 0 || i >= n)
    throw std::invalid_argument("cancel_pair index out of range");
  bool birth_case = std::holds_alternative<BirthEvent>(m.events[i]);
  if (!birth_case && !std::holds_alternative<SaddleEvent>(m.events[i]))
    throw RewriteError(RewriteError::NotCancelingPosition,
                       "event is not a birth or a saddle");
  int j = i + 1;
  while (j < n && as_slide(m.events[j])) ++j;
  if (j >= n)
    throw RewriteError(RewriteError::NotCancelingPosition,
                       "no companion critical event");
  if (!is_type1(m.events[j]))
    throw RewriteError(RewriteError::NotCancelingPosition,
                       "events between the pair are not slides");
  MovieRun run = run_movie(m);

  BasepointId link{0};
  if (birth_case) {
    if (!std::holds_alternative<SaddleEvent>(m.events[j]))
      throw RewriteError(RewriteError::NotCancelingPosition,
                         "birth companion is not a saddle");
    link = std::get<BirthEvent>(m.events[i]).bp;
    const EventTrace &tj = run.traces[j];
    if (!*tj.saddle_merge || !contains(tj.bp_consumed, link))
      throw RewriteError(RewriteError::NotCancelingPosition,
                         "the saddle does not absorb the born circle");
    if (!*tj.saddle_coherent)
      throw RewriteError(RewriteError::NotCancelingPosition,
                         "the canceling saddle attaches incoherently");
  } else {
    if (!std::holds_alternative<DeathEvent>(m.events[j]))
      throw RewriteError(RewriteError::NotCancelingPosition,
                         "saddle companion is not a death");
    const EventTrace &ti = run.traces[i];
    if (*ti.saddle_merge)
      throw RewriteError(RewriteError::NotCancelingPosition,
                         "the saddle does not split off the dying circle");
    if (!*ti.saddle_coherent)
      throw RewriteError(RewriteError::NotCancelingPosition,
                         "the canceling saddle attaches incoherently");
    LoopId dying = std::get<DeathEvent>(m.events[j]).loop;
    const auto &bps = run.stills[j].loops.at(dying).bps;
    link = bps.at(0);
    if (!contains(ti.bp_emitted, link))
      throw RewriteError(RewriteError::NotCancelingPosition,
                         "the dying circle does not come from the saddle");
  }

  long net = 0;
  for (int k = i + 1; k < j; k++) {
    const SlideEvent *s = as_slide(m.events[k]);
    if (s->bp == link) net += s->steps;
  }
  {
    const Diagram &d1 = run.stills[i + 1];
    int L = lap_length(d1, comp_of_bp(d1, link));
    if (net / L != 0)
      throw RewriteError(RewriteError::TwistObstruction,
                         "the connecting worldline winds a full loop");
  }

  // Drop the pair and the connecting worldline's slides; re-aim slides of a
  // basepoint the window renamed (split output back to the split input).
  std::map<BasepointId, BasepointId> rename;
  if (!birth_case) {
    const EventTrace &ti = run.traces[i];
    for (BasepointId e : ti.bp_emitted)
      if (e != link) rename[e] = ti.bp_consumed.front();
  }
  std::vector<Event> kept;
  for (int k = i + 1; k < j; k++) {
    SlideEvent s = *as_slide(m.events[k]);
    if (s.bp == link) continue;
    if (auto it = rename.find(s.bp); it != rename.end()) s.bp = it->second;
    kept.push_back(s);
  }
  Diagram cur = run.stills[i];
  for (const Event &e : kept) cur = apply_event(cur, e).diagram;
  if (canonical_code(cur) != canonical_code(run.stills[j + 1]))
    throw RewriteError(RewriteError::NotCancelingPosition,
                       "removing the pair does not restore the surrounding still");

  std::vector<Event> tail(m.events.begin() + j + 1, m.events.end());
  std::vector<Event> tail2 = transport_tail(tail, run.stills[j + 1], cur);

  Movie out;
  out.initial = m.initial;
  out.events.assign(m.events.begin(), m.events.begin() + i);
  out.events.insert(out.events.end(), kept.begin(), kept.end());
  out.events.insert(out.events.end(), tail2.begin(), tail2.end());
  return out;
}

}  // namespace mmc
