#include "mmc/moves.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "mmc/textio.hpp"
#include "textio_internal.hpp"
#include "transport.hpp"

namespace mmc {
namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

// --- conditions ------------------------------------------------------------

struct Conditions {
  bool identity = false;
  // Required saddle direction: true joins, false splits.
  std::optional<bool> saddle_merge;
};

Conditions read_conditions(const MoveSchema &s) {
  Conditions c;
  for (const std::string &name : s.conditions) {
    if (name == "identity")
      c.identity = true;
    else if (name == "merge")
      c.saddle_merge = true;
    else if (name == "fission")
      c.saddle_merge = false;
    else
      throw std::invalid_argument("unknown move condition '" + name + "'");
  }
  return c;
}

bool saddles_agree(const Conditions &c, const std::vector<EventTrace> &traces) {
  if (!c.saddle_merge) return true;
  for (const EventTrace &t : traces)
    if (t.saddle_merge && *t.saddle_merge != *c.saddle_merge) return false;
  return true;
}

// --- template slots ----------------------------------------------------------

bool is_slot(const std::string &arg) { return arg.size() > 1 && arg[0] == '$'; }

// Binding key of a slot. '*' slots in a replacement side get a synthetic
// per-position key so apply_move can rebuild the exact same replacement.
std::string slot_key(const std::string &arg, size_t level, size_t pos) {
  if (arg == "*")
    return "*" + std::to_string(level) + "." + std::to_string(pos);
  return arg.substr(1);
}

// Unify the pattern side against the window's events, token by token.
bool unify_window(const std::vector<TemplateEvent> &pattern, const Movie &m,
                  int w0, std::map<std::string, std::string> &binding) {
  for (size_t i = 0; i < pattern.size(); i++) {
    std::vector<std::string> toks = event_tokens(m.events[w0 + (int)i]);
    const TemplateEvent &t = pattern[i];
    if (toks[0] != t.kind || toks.size() - 1 != t.args.size()) return false;
    for (size_t a = 0; a < t.args.size(); a++) {
      const std::string &arg = t.args[a];
      const std::string &tok = toks[a + 1];
      if (arg == "*") continue;
      if (is_slot(arg)) {
        auto [it, fresh] = binding.try_emplace(arg.substr(1), tok);
        if (!fresh && it->second != tok) return false;
      } else if (arg != tok) {
        return false;
      }
    }
  }
  return true;
}

// --- slot candidate domains --------------------------------------------------

enum class Role {
  Face,
  Sign,
  FreshLoop,
  FreshComp,
  FreshBp,
  LoopRef,
  BpRef,
  Steps,
  Arc,
  ArcSideRef,
  OverFlag,
  CohFlag,
  Variant,
};

const std::vector<Role> &roles_of(const std::string &kind) {
  static const std::map<std::string, std::vector<Role>> table = {
      {"birth",
       {Role::Face, Role::Sign, Role::FreshLoop, Role::FreshComp,
        Role::FreshBp}},
      {"death", {Role::LoopRef}},
      {"slide", {Role::BpRef, Role::Steps}},
      {"r1add", {Role::Arc, Role::Sign}},
      {"r1rem", {Role::ArcSideRef}},
      {"r2add", {Role::Arc, Role::Arc, Role::OverFlag}},
      {"r2rem", {Role::ArcSideRef}},
      {"r3", {Role::ArcSideRef, Role::Variant}},
      {"saddle", {Role::Arc, Role::Arc, Role::CohFlag}},
  };
  return table.at(kind);
}

int gap_count(const Diagram &d, ElemRef e) {
  if (e.isLoop) {
    size_t b = d.loops.at(e.as_loop()).bps.size();
    return b == 0 ? 1 : (int)b;
  }
  return (int)d.edges.at(e.as_edge()).bps.size() + 1;
}

void each_elem(const Diagram &d, const std::function<void(ElemRef)> &f) {
  for (const auto &[id, e] : d.edges) f(ElemRef::edge(id));
  for (const auto &[id, l] : d.loops) f(ElemRef::loop(id));
}

// The same stretch as `first` with the next sub index: the twin candidate for
// the second site of a two-site event.
std::optional<std::string> twin_site(const std::string &first) {
  size_t colon = first.rfind(':');
  if (colon == std::string::npos || colon + 1 >= first.size())
    return std::nullopt;
  int sub = 0;
  const char *b = first.c_str() + colon + 1;
  const char *e = first.c_str() + first.size();
  auto [p, ec] = std::from_chars(b, e, sub);
  if (ec != std::errc() || p != e) return std::nullopt;
  return first.substr(0, colon + 1) + std::to_string(sub + 1);
}

std::vector<std::string> candidates(Role r, const Diagram &d,
                                    const std::vector<std::string> &args,
                                    size_t pos) {
  std::vector<std::string> out;
  switch (r) {
    case Role::Face:
      for (const GlobalFace &g : d.d().global_faces)
        out.push_back(face_token(g));
      break;
    case Role::Sign:
      out = {"+1", "-1"};
      break;
    case Role::FreshLoop:
      out = {show(d.fresh_loop())};
      break;
    case Role::FreshComp:
      out = {show(d.fresh_component())};
      break;
    case Role::FreshBp:
      out = {show(d.fresh_basepoint())};
      break;
    case Role::LoopRef:
      for (const auto &[id, l] : d.loops) out.push_back(show(id));
      break;
    case Role::BpRef:
      for (const auto &[b, host] : d.d().bp_at) out.push_back(show(b));
      break;
    case Role::Steps:
      // Slide distances are unbounded; an unbound steps slot offers no
      // candidates, so templates must pin them literally.
      break;
    case Role::Arc:
      each_elem(d, [&](ElemRef e) {
        for (Side s : {Side::L, Side::R})
          for (int g = 0; g < gap_count(d, e); g++)
            out.push_back(arcref_token(ArcRef{{e, s}, g, 0}));
      });
      if (pos == 1 && !args.empty())
        if (auto t = twin_site(args[0])) out.push_back(*t);
      break;
    case Role::ArcSideRef:
      each_elem(d, [&](ElemRef e) {
        for (Side s : {Side::L, Side::R})
          out.push_back(arcside_token(ArcSide{e, s}));
      });
      break;
    case Role::OverFlag:
      out = {"over", "under"};
      break;
    case Role::CohFlag:
      out = {"coh", "inc"};
      break;
    case Role::Variant:
      for (int v = 0; v < 8; v++) out.push_back(std::to_string(v));
      break;
  }
  return out;
}

// Backtracking instantiation of a replacement side: pick a token per open
// slot, level by level, pruning through apply_event, and accept exactly the
// assignments that replay to the window's closing still.
struct Instantiate {
  const std::vector<TemplateEvent> &tpl;
  const Conditions &conds;
  const std::string &close_code;
  std::map<std::string, std::string> &binding;
  const std::function<void()> &accept;

  std::vector<EventTrace> traces;

  void level(size_t lv, const Diagram &still) {
    if (lv == tpl.size()) {
      if (!saddles_agree(conds, traces)) return;
      if (canonical_code(still) != close_code) return;
      accept();
      return;
    }
    std::vector<std::string> args;
    arg(lv, still, args);
  }

  void arg(size_t lv, const Diagram &still, std::vector<std::string> &args) {
    const TemplateEvent &t = tpl[lv];
    if (args.size() == t.args.size()) {
      std::vector<std::string> toks;
      toks.reserve(args.size() + 1);
      toks.push_back(t.kind);
      toks.insert(toks.end(), args.begin(), args.end());
      ApplyResult r;
      try {
        r = apply_event(still, event_from_tokens(toks));
      } catch (const ParseError &) {
        return;
      } catch (const ApplyError &) {
        return;
      }
      traces.push_back(r.trace);
      level(lv + 1, r.diagram);
      traces.pop_back();
      return;
    }
    size_t pos = args.size();
    const std::string &a = t.args[pos];
    if (!is_slot(a) && a != "*") {
      args.push_back(a);
      arg(lv, still, args);
      args.pop_back();
      return;
    }
    std::string key = slot_key(a, lv, pos);
    if (auto it = binding.find(key); it != binding.end()) {
      args.push_back(it->second);
      arg(lv, still, args);
      args.pop_back();
      return;
    }
    for (const std::string &cand :
         candidates(roles_of(t.kind)[pos], still, args, pos)) {
      binding.emplace(key, cand);
      args.push_back(cand);
      arg(lv, still, args);
      args.pop_back();
      binding.erase(key);
    }
  }
};

// --- event reference sets ----------------------------------------------------

std::set<ElemRef> event_elem_refs(const Event &ev) {
  std::set<ElemRef> out;
  auto arc = [&](const ArcRef &r) { out.insert(r.at.elem); };
  auto face = [&](const GlobalFace &g) {
    if (!g.root) out.insert(g.def.elem);
  };
  auto carry = [&](const std::vector<PieceKey> &ps) {
    for (const PieceKey &p : ps)
      out.insert(p.isLoop ? ElemRef::loop(LoopId{p.id})
                          : ElemRef::edge(EdgeId{p.id}));
  };
  std::visit(overloaded{
                 [&](const BirthEvent &e) { face(e.at); },
                 [&](const DeathEvent &e) { out.insert(ElemRef::loop(e.loop)); },
                 [&](const SlideEvent &) {},
                 [&](const R1AddEvent &e) { arc(e.at); },
                 [&](const R1RemoveEvent &e) { out.insert(e.face.elem); },
                 [&](const R2AddEvent &e) {
                   arc(e.a);
                   arc(e.b);
                   carry(e.carry);
                 },
                 [&](const R2RemoveEvent &e) { out.insert(e.face.elem); },
                 [&](const R3Event &e) { out.insert(e.face.elem); },
                 [&](const SaddleEvent &e) {
                   arc(e.a);
                   arc(e.b);
                   carry(e.carry);
                 },
             },
             ev);
  return out;
}

std::optional<BasepointId> slide_bp(const Event &ev) {
  if (const auto *s = std::get_if<SlideEvent>(&ev)) return s->bp;
  return std::nullopt;
}

// Fresh basepoints an event introduces.
std::vector<BasepointId> bps_made(const Event &ev, const EventTrace &t) {
  std::vector<BasepointId> out = t.bp_emitted;
  if (const auto *b = std::get_if<BirthEvent>(&ev)) out.push_back(b->bp);
  return out;
}

// --- window normalization helpers ---------------------------------------------

// Rewrite one window event for a replay where `bare` elements host no
// basepoints: attach gaps on those elements collapse to 0; twin sites keep
// their strand order.
Event remap_bare(const Event &ev, const std::set<ElemRef> &bare) {
  Event out = ev;
  auto fix = [&](ArcRef &r) {
    if (bare.count(r.at.elem)) r.gap = 0;
  };
  auto fix_pair = [&](ArcRef &a, ArcRef &b) {
    ArcRef a0 = a, b0 = b;
    fix(a);
    fix(b);
    if (a.at == b.at && a.gap == b.gap) {
      bool a_first = std::pair(a0.gap, a0.sub) <= std::pair(b0.gap, b0.sub);
      a.sub = a_first ? 0 : 1;
      b.sub = a_first ? 1 : 0;
    }
  };
  std::visit(overloaded{
                 [&](R1AddEvent &e) { fix(e.at); },
                 [&](R2AddEvent &e) { fix_pair(e.a, e.b); },
                 [&](SaddleEvent &e) { fix_pair(e.a, e.b); },
                 [&](auto &) {},
             },
             out);
  return out;
}

}  // namespace

// --- catalog -----------------------------------------------------------------

std::vector<MoveSchema> load_catalog(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(Span{}, false, "cannot open catalog file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  std::vector<MoveSchema> catalog = parse_catalog(buf.str());
  for (const MoveSchema &s : catalog) {
    bool merge = false, fission = false;
    for (const std::string &c : s.conditions) {
      if (c == "merge")
        merge = true;
      else if (c == "fission")
        fission = true;
      else if (c != "identity")
        throw ParseError(Span{}, true,
                         "move " + std::to_string(s.id) + " " + s.variant +
                             ": unknown condition '" + c + "'");
    }
    if (merge && fission)
      throw ParseError(Span{}, true,
                       "move " + std::to_string(s.id) + " " + s.variant +
                           ": conditions merge and fission conflict");
  }
  return catalog;
}

// --- matching ------------------------------------------------------------------

std::vector<MoveInstance> enumerate_matches(const Movie &m,
                                            const MoveSchema &s,
                                            bool reverse) {
  Conditions conds = read_conditions(s);
  const std::vector<TemplateEvent> &pattern = reverse ? s.rhs : s.lhs;
  const std::vector<TemplateEvent> &replacement = reverse ? s.lhs : s.rhs;
  MovieRun run = run_movie(m);
  int n = (int)m.events.size();
  int plen = (int)pattern.size();

  std::vector<MoveInstance> out;
  for (int w0 = 0; w0 + plen <= n; w0++) {
    std::map<std::string, std::string> binding;
    if (!unify_window(pattern, m, w0, binding)) continue;
    if (conds.identity &&
        canonical_code(run.stills[w0]) != canonical_code(run.stills[w0 + plen]))
      continue;
    {
      std::vector<EventTrace> wtraces(run.traces.begin() + w0,
                                      run.traces.begin() + w0 + plen);
      if (!saddles_agree(conds, wtraces)) continue;
    }
    std::string close_code = canonical_code(run.stills[w0 + plen]);
    std::function<void()> accept = [&] {
      MoveInstance inst;
      inst.schema = s;
      inst.reverse = reverse;
      inst.window_begin = w0;
      inst.window_end = w0 + plen;
      inst.binding = binding;
      out.push_back(std::move(inst));
    };
    Instantiate gen{replacement, conds, close_code, binding, accept, {}};
    gen.level(0, run.stills[w0]);
  }
  return out;
}

// --- application -----------------------------------------------------------------

Movie apply_move(const Movie &m, const MoveInstance &inst) {
  const MoveSchema &s = inst.schema;
  auto stale = [](const std::string &msg) {
    return RewriteError(RewriteError::StaleInstance, msg);
  };
  if (s.lhs.empty() && s.rhs.empty())
    throw stale("move instance has an empty schema; resolve it against the catalog");
  Conditions conds = read_conditions(s);
  const std::vector<TemplateEvent> &pattern = inst.reverse ? s.rhs : s.lhs;
  const std::vector<TemplateEvent> &replacement = inst.reverse ? s.lhs : s.rhs;

  MovieRun run = run_movie(m);
  int n = (int)m.events.size();
  int w0 = inst.window_begin, w1 = inst.window_end;
  if (w0 < 0 || w1 < w0 || w1 > n || w1 - w0 != (int)pattern.size())
    throw stale("the move window no longer fits the movie");

  std::map<std::string, std::string> binding;
  if (!unify_window(pattern, m, w0, binding))
    throw stale("the window no longer matches the move's pattern");
  for (const auto &[key, tok] : binding) {
    auto it = inst.binding.find(key);
    if (it == inst.binding.end() || it->second != tok)
      throw stale("binding for $" + key + " no longer matches the window");
  }
  if (conds.identity &&
      canonical_code(run.stills[w0]) != canonical_code(run.stills[w1]))
    throw stale("the window no longer returns to its opening still");
  {
    std::vector<EventTrace> wtraces(run.traces.begin() + w0,
                                    run.traces.begin() + w1);
    if (!saddles_agree(conds, wtraces))
      throw stale("the window's saddle direction no longer matches the variant");
  }

  // Rebuild the replacement purely from the recorded bindings.
  Diagram still = run.stills[w0];
  std::vector<Event> repl;
  std::vector<EventTrace> rtraces;
  for (size_t lv = 0; lv < replacement.size(); lv++) {
    const TemplateEvent &t = replacement[lv];
    std::vector<std::string> toks{t.kind};
    for (size_t a = 0; a < t.args.size(); a++) {
      const std::string &arg = t.args[a];
      if (is_slot(arg) || arg == "*") {
        auto it = inst.binding.find(slot_key(arg, lv, a));
        if (it == inst.binding.end())
          throw stale("no binding recorded for slot " + arg);
        toks.push_back(it->second);
      } else {
        toks.push_back(arg);
      }
    }
    Event ev;
    try {
      ev = event_from_tokens(toks);
    } catch (const ParseError &e) {
      throw stale(std::string("replacement event is malformed: ") + e.what());
    }
    try {
      ApplyResult r = apply_event(still, ev);
      rtraces.push_back(r.trace);
      still = r.diagram;
    } catch (const ApplyError &e) {
      throw stale(std::string("the replacement no longer applies: ") + e.what());
    }
    repl.push_back(ev);
  }
  if (canonical_code(still) != canonical_code(run.stills[w1]))
    throw stale("the replacement no longer reproduces the window's closing still");
  if (!saddles_agree(conds, rtraces))
    throw stale("the replacement's saddle direction no longer matches the variant");

  std::vector<Event> tail(m.events.begin() + w1, m.events.end());
  std::vector<Event> tail2 = transport_tail(tail, run.stills[w1], still);

  Movie out;
  out.initial = m.initial;
  out.events.assign(m.events.begin(), m.events.begin() + w0);
  out.events.insert(out.events.end(), repl.begin(), repl.end());
  out.events.insert(out.events.end(), tail2.begin(), tail2.end());
  return out;
}

// --- interchange -----------------------------------------------------------------

Movie interchange(const Movie &m, int k) {
  MovieRun run = run_movie(m);
  int n = (int)m.events.size();
  if (k < 0 || k + 1 >= n)
    throw std::invalid_argument("interchange index out of range");
  const Event &ev1 = m.events[k], &ev2 = m.events[k + 1];
  const EventTrace &t1 = run.traces[k];

  // Saddles joined by a marking worldline never commute directly; that
  // exchange is the zero-arc rewrite's job.
  if (std::holds_alternative<SaddleEvent>(ev1) &&
      std::holds_alternative<SaddleEvent>(ev2)) {
    const EventTrace &t2 = run.traces[k + 1];
    for (BasepointId b : t1.bp_emitted)
      for (BasepointId c : t2.bp_consumed)
        if (b == c)
          throw RewriteError(
              RewriteError::MarkingObstruction,
              "the saddles are joined by a marking worldline; exchange them "
              "with the zero-arc rewrite");
  }

  std::set<ElemRef> created = created_elements(run.stills[k], run.stills[k + 1]);
  for (ElemRef e : event_elem_refs(ev2))
    if (created.count(e))
      throw RewriteError(RewriteError::OverlappingSupports,
                         "the second event is sited on structure the first "
                         "event creates");
  if (std::optional<BasepointId> b = slide_bp(ev2)) {
    for (BasepointId made : bps_made(ev1, t1))
      if (made == *b)
        throw RewriteError(RewriteError::MarkingObstruction,
                           "the slide moves a basepoint the first event "
                           "introduces");
  }

  bool has_slide = std::holds_alternative<SlideEvent>(ev1) ||
                   std::holds_alternative<SlideEvent>(ev2);
  auto classify = [&](const ApplyError &err, const char *ctx) {
    RewriteError::Kind kind =
        (err.kind == ApplyError::DisciplineViolation || has_slide)
            ? RewriteError::MarkingObstruction
            : RewriteError::OverlappingSupports;
    return RewriteError(kind, std::string(ctx) + err.what());
  };

  Diagram mid, swapped_end;
  try {
    mid = apply_event(run.stills[k], ev2).diagram;
  } catch (const ApplyError &e) {
    throw classify(e, "the later event does not apply first: ");
  }
  try {
    swapped_end = apply_event(mid, ev1).diagram;
  } catch (const ApplyError &e) {
    throw classify(e, "the earlier event does not apply second: ");
  }

  if (canonical_code(swapped_end) != canonical_code(run.stills[k + 2])) {
    bool elems_differ = canonical_code(strip_bps(swapped_end)) !=
                        canonical_code(strip_bps(run.stills[k + 2]));
    if (elems_differ)
      throw RewriteError(RewriteError::OverlappingSupports,
                         "the swapped order produces a different still");
    throw RewriteError(RewriteError::MarkingObstruction,
                       "the swapped order parks basepoints elsewhere");
  }

  std::vector<Event> tail(m.events.begin() + k + 2, m.events.end());
  std::vector<Event> tail2 = transport_tail(tail, run.stills[k + 2], swapped_end);

  Movie out;
  out.initial = m.initial;
  out.events.assign(m.events.begin(), m.events.begin() + k);
  out.events.push_back(ev2);
  out.events.push_back(ev1);
  out.events.insert(out.events.end(), tail2.begin(), tail2.end());
  return out;
}

// --- window normalization ----------------------------------------------------------

Movie normalize_window(const Movie &m, int begin, int end) {
  MovieRun run = run_movie(m);
  int n = (int)m.events.size();
  if (begin < 0 || end < begin || end > n)
    throw std::invalid_argument("window out of range");
  for (int i = begin; i < end; i++) {
    const Event &e = m.events[i];
    if (std::holds_alternative<BirthEvent>(e) ||
        std::holds_alternative<DeathEvent>(e) ||
        std::holds_alternative<SaddleEvent>(e))
      throw std::invalid_argument(
          "the window must contain no birth, death, or saddle");
  }

  // Everything the window sits on, consumes, or creates.
  std::set<ElemRef> support;
  for (int i = begin; i < end; i++) {
    std::set<ElemRef> refs = event_elem_refs(m.events[i]);
    support.insert(refs.begin(), refs.end());
    for (const auto &[from, to] : run.traces[i].succ) support.insert(from);
    for (ElemRef e : created_elements(run.stills[i], run.stills[i + 1]))
      support.insert(e);
  }

  // Park every basepoint hosted on the support: slide it to the nearest
  // element of its component outside the support.
  const Diagram &open = run.stills[begin];
  std::vector<SlideEvent> park;
  for (const auto &[bp, host] : open.d().bp_at) {
    if (!support.count(host)) continue;
    const Derived &der = open.d();
    const Component &c =
        der.components[der.comp_index.at(comp_of_elem(open, host))];
    std::vector<ElemRef> elems;
    if (c.loop) elems.push_back(ElemRef::loop(*c.loop));
    for (EdgeId e : c.cycle) elems.push_back(ElemRef::edge(e));
    std::optional<int> best;
    for (ElemRef e : elems) {
      if (support.count(e)) continue;
      std::optional<int> steps = steps_to_element(open, bp, e);
      if (steps && (!best || std::abs(*steps) < std::abs(*best))) best = *steps;
    }
    if (!best)
      throw RewriteError(
          RewriteError::MarkingObstruction,
          "basepoint " + show(bp) + " cannot leave the window's support");
    park.push_back(SlideEvent{bp, *best});
  }

  Movie out;
  out.initial = m.initial;
  out.events.assign(m.events.begin(), m.events.begin() + begin);
  for (const SlideEvent &s : park) out.events.push_back(s);
  for (int i = begin; i < end; i++)
    out.events.push_back(remap_bare(m.events[i], support));

  // Return slides: aim each parked basepoint back at the host it has in the
  // window's original closing still, so the tail replays verbatim.
  auto obstruct = [](const std::string &msg) {
    return RewriteError(RewriteError::MarkingObstruction, msg);
  };
  MovieRun partial;
  try {
    partial = run_movie(out);
  } catch (const MovieError &e) {
    throw obstruct(std::string("clearing the window breaks an event: ") +
                   e.what());
  }
  Diagram cur = partial.stills.back();
  for (const SlideEvent &s : park) {
    ElemRef target = run.stills[end].d().bp_at.at(s.bp);
    std::optional<int> back = steps_to_element(cur, s.bp, target);
    if (!back)
      throw obstruct("basepoint " + show(s.bp) +
                     " cannot return to its place after the window");
    if (*back == 0) continue;
    SlideEvent ret{s.bp, *back};
    cur = apply_event(cur, ret).diagram;
    out.events.push_back(ret);
  }

  if (!(cur == run.stills[end]))
    throw obstruct("clearing the window moves a basepoint it depends on");
  out.events.insert(out.events.end(), m.events.begin() + end, m.events.end());
  return out;
}

}  // namespace mmc
