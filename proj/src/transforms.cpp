#include "rmdp/transforms.hpp"

#include <algorithm>
#include <cctype>
#include <deque>
#include <functional>
#include <sstream>

namespace rmdp::transforms {

int Pda::state_index(const std::string& s) const {
  for (int i = 0; i < static_cast<int>(states.size()); ++i)
    if (states[i] == s) return i;
  return -1;
}

int Pda::symbol_index(const std::string& s) const {
  for (int i = 0; i < static_cast<int>(stack_symbols.size()); ++i)
    if (stack_symbols[i] == s) return i;
  return -1;
}

bool Pda::accepts(int state) const {
  return std::find(accepting.begin(), accepting.end(), state) != accepting.end();
}

// ---------------------------------------------------------------------------
// Exit lanes.
// ---------------------------------------------------------------------------

Rmdp add_exit_lane(const Rmdp& m, double lambda) {
  if (!(lambda > 0.0 && lambda < 1.0))
    throw Error(ErrorCode::InvalidArgument, "exit-lane lambda must be in (0,1)");
  RmdpBuilder b;
  for (int ci = 0; ci < static_cast<int>(m.components.size()); ++ci) {
    const Component& c = m.components[ci];
    std::string stop = "stop_" + c.name;
    b.add_component(c.name);
    for (const auto& a : c.actions) b.add_action(c.name, a);
    for (const auto& n : c.nodes) b.add_node(c.name, n);
    for (int e : c.entries) b.add_entry(c.name, c.nodes[e]);
    for (int e : c.exits) b.add_exit(c.name, c.nodes[e]);
    b.add_exit(c.name, stop);
    for (const auto& box : c.boxes) b.add_box(c.name, box.name, m.components[box.callee].name);
  }
  auto vref = [&](int ci, int vid) -> VRef {
    std::string n = m.vertex_name(ci, vid);
    auto dot = n.find('.');
    if (dot == std::string::npos) return VRef::n(n);
    return VRef::port(n.substr(0, dot), n.substr(dot + 1));
  };
  for (int ci = 0; ci < static_cast<int>(m.components.size()); ++ci) {
    const Component& c = m.components[ci];
    std::string stop = "stop_" + c.name;
    for (int vid = 0; vid < static_cast<int>(c.vertices.size()); ++vid) {
      for (const auto& row : c.rows[vid]) {
        const std::string& act = c.actions[row.action];
        for (const auto& [dst, p] : row.dests)
          b.add_transition(c.name, vref(ci, vid), act, vref(ci, dst), p * lambda);
        b.add_transition(c.name, vref(ci, vid), act, VRef::n(stop), 1.0 - lambda);
        if (row.reward != 0.0) b.set_reward(c.name, vref(ci, vid), act, row.reward);
      }
    }
    // The fresh return ports take the cost-free direct way to termination.
    for (const auto& box : c.boxes)
      b.add_transition(c.name, VRef::port(box.name, "stop_" + m.components[box.callee].name),
                       "adv", VRef::n(stop));
  }
  Rmdp out = b.build();
  ensure_valid(out);
  return out;
}

// ---------------------------------------------------------------------------
// PDA product.
// ---------------------------------------------------------------------------

namespace {

struct ProductCtx {
  const Rmdp& mdp;
  const Component& grid;  // the single flat component
  const Pda& pda;
  ProductRewards rw;
  double corruption;
  const std::set<int>& success;

  // ctx 0 = root (empty stack), ctx 1+k = stack symbol k.
  int nctx;
  std::vector<std::set<std::pair<int, int>>> visited;  // (vid, state)
  std::vector<std::set<std::pair<int, int>>> entries;  // (vid, state), symbols only
  std::vector<std::set<std::pair<int, int>>> pops;     // (state, vid)
  std::vector<std::set<int>> pushes;                   // callee symbols
  std::vector<bool> own_sink;
  std::deque<std::tuple<int, int, int>> work;          // (ctx, vid, state)

  bool monitored(const std::string& a) const {
    if (a == pda.special) return true;
    for (const auto& [k, e] : pda.delta)
      if (std::get<1>(k) == a) return true;
    return false;
  }

  std::string ctx_name(int ctx) const { return ctx == 0 ? "root" : pda.stack_symbols[ctx - 1]; }
  int top_of(int ctx) const { return ctx - 1; }  // -1 = empty stack

  void enqueue(int ctx, int vid, int state) {
    if (visited[ctx].insert({vid, state}).second) work.push_back({ctx, vid, state});
  }

  void record_push(int ctx, int sym, int vid, int state) {
    if (entries[1 + sym].insert({vid, state}).second) enqueue(1 + sym, vid, state);
    if (pushes[ctx].insert(sym).second)
      for (const auto& [s2, v2] : pops[1 + sym]) enqueue(ctx, v2, s2);
  }

  void record_pop(int ctx, int state, int vid) {
    if (!pops[ctx].insert({state, vid}).second) return;
    for (int other = 0; other < nctx; ++other)
      if (pushes[other].count(ctx - 1)) enqueue(other, vid, state);
  }

  // Processes the effect of executing input `u` from (ctx, vid, state).
  void explore_effect(int ctx, int vid, int state, const std::string& u) {
    auto it = pda.delta.find({state, u, top_of(ctx)});
    bool is_pop_on_empty = it != pda.delta.end() && it->second.op == Pda::Op::Pop && ctx == 0;
    if (it == pda.delta.end() || is_pop_on_empty) {
      if (!(u == pda.special && ctx == 0)) own_sink[ctx] = true;  // else: declaration
      return;
    }
    const Pda::Edge& e = it->second;
    std::vector<int> cells;
    if (u == pda.special) cells.push_back(vid);
    else
      for (const auto& [dst, p] : grid.row(vid, grid.action_index(u))->dests)
        cells.push_back(dst);
    for (int cell : cells) {
      switch (e.op) {
        case Pda::Op::Push: record_push(ctx, e.push_sym, cell, e.state2); break;
        case Pda::Op::Pop: record_pop(ctx, e.state2, cell); break;
        case Pda::Op::Stay: enqueue(ctx, cell, e.state2); break;
      }
    }
  }

  void explore() {
    while (!work.empty()) {
      auto [ctx, vid, state] = work.front();
      work.pop_front();
      bool any_monitored = false;
      for (const auto& row : grid.rows[vid]) {
        const std::string& a = grid.actions[row.action];
        if (!monitored(a)) {
          for (const auto& [dst, p] : row.dests) enqueue(ctx, dst, state);
          continue;
        }
        any_monitored = true;
        explore_effect(ctx, vid, state, a);
        if (corruption > 0.0) explore_effect(ctx, vid, state, pda.special);
      }
      if (any_monitored) explore_effect(ctx, vid, state, pda.special);
    }
  }
};

}  // namespace

Rmdp pda_product(const Rmdp& mdp, const Pda& pda, const ProductRewards& rewards,
                 double corruption, const std::set<int>& success_states) {
  if (mdp.components.size() != 1 || !mdp.components[0].boxes.empty())
    throw Error(ErrorCode::FlatModelRequired, "pda_product needs a single box-free component");
  if (corruption < 0.0 || corruption >= 1.0)
    throw Error(ErrorCode::InvalidArgument, "corruption must be in [0,1)");
  const Component& grid = mdp.components[0];
  if (grid.action_index(pda.special) >= 0)
    throw Error(ErrorCode::InvalidArgument, "the special action must not be an MDP action");

  ProductCtx px{mdp, grid, pda, rewards, corruption, success_states,
                1 + static_cast<int>(pda.stack_symbols.size())};
  px.visited.resize(px.nctx);
  px.entries.resize(px.nctx);
  px.pops.resize(px.nctx);
  px.pushes.resize(px.nctx);
  px.own_sink.assign(px.nctx, false);
  for (int en : grid.entries) px.enqueue(0, en, pda.initial);
  px.explore();

  // Sink exits cascade: a caller of a sinking component sinks too.
  std::vector<bool> sink = px.own_sink;
  for (bool changed = true; changed;) {
    changed = false;
    for (int ctx = 0; ctx < px.nctx; ++ctx)
      for (int sym : px.pushes[ctx])
        if (sink[1 + sym] && !sink[ctx]) {
          sink[ctx] = true;
          changed = true;
        }
  }

  auto comp_name = [&](int ctx) { return ctx == 0 ? std::string("Proot") : "P" + px.ctx_name(ctx); };
  auto node = [&](int ctx, int vid, int st) {
    return "p_" + px.ctx_name(ctx) + "_" + grid.nodes[vid] + "_" + pda.states[st];
  };
  auto eff = [&](int ctx, int vid, int st, const std::string& u) {
    return "e_" + px.ctx_name(ctx) + "_" + grid.nodes[vid] + "_" + pda.states[st] + "_" + u;
  };
  auto entry_node = [&](int ctx, int vid, int st) {
    return "en_" + px.ctx_name(ctx) + "_" + grid.nodes[vid] + "_" + pda.states[st];
  };
  auto exit_node = [&](int ctx, int st, int vid) {
    return "x_" + px.ctx_name(ctx) + "_" + pda.states[st] + "_" + grid.nodes[vid];
  };
  auto sink_node = [&](int ctx) { return ctx == 0 ? std::string("halt") : "snk_" + px.ctx_name(ctx); };
  auto box_name = [&](int ctx, int sym) {
    return "bx_" + px.ctx_name(ctx) + "_" + pda.stack_symbols[sym];
  };

  RmdpBuilder b;
  for (int ctx = 0; ctx < px.nctx; ++ctx) {
    std::string cn = comp_name(ctx);
    b.add_component(cn);
    if (ctx == 0) {
      for (int en : grid.entries) b.add_entry(cn, entry_node(0, en, pda.initial));
      b.add_exit(cn, "halt");
    } else {
      for (const auto& [vid, st] : px.entries[ctx]) b.add_entry(cn, entry_node(ctx, vid, st));
      for (const auto& [st, vid] : px.pops[ctx]) b.add_exit(cn, exit_node(ctx, st, vid));
      if (sink[ctx]) b.add_exit(cn, sink_node(ctx));
    }
    for (int sym : px.pushes[ctx]) b.add_box(cn, box_name(ctx, sym), comp_name(1 + sym));
  }

  // Emits the effect row for (ctx, vid, state, u). Returns the eff node name.
  std::set<std::string> emitted;
  std::function<std::string(int, int, int, const std::string&)> emit_eff =
      [&](int ctx, int vid, int st, const std::string& u) -> std::string {
    std::string en = eff(ctx, vid, st, u);
    if (!emitted.insert(en).second) return en;
    std::string cn = comp_name(ctx);
    VRef src = VRef::n(en);
    auto it = pda.delta.find({st, u, px.top_of(ctx)});
    bool pop_on_empty = it != pda.delta.end() && it->second.op == Pda::Op::Pop && ctx == 0;
    if (it == pda.delta.end() || pop_on_empty) {
      if (u == pda.special && ctx == 0) {
        bool ok = pda.accepts(st) && success_states.count(vid);
        b.add_transition(cn, src, "adv", VRef::n("halt"));
        b.set_reward(cn, src, "adv", ok ? rewards.success : rewards.reject);
      } else {
        b.add_transition(cn, src, "adv", VRef::n(sink_node(ctx)));
        b.set_reward(cn, src, "adv", rewards.reject);
      }
      return en;
    }
    const Pda::Edge& e = it->second;
    std::vector<std::pair<int, double>> cells;
    if (u == pda.special) cells.push_back({vid, 1.0});
    else cells = grid.row(vid, grid.action_index(u))->dests;
    for (const auto& [cell, p] : cells) {
      switch (e.op) {
        case Pda::Op::Push:
          b.add_transition(cn, src, "adv",
                           VRef::port(box_name(ctx, e.push_sym),
                                      entry_node(1 + e.push_sym, cell, e.state2)),
                           p);
          break;
        case Pda::Op::Pop:
          b.add_transition(cn, src, "adv", VRef::n(exit_node(ctx, e.state2, cell)), p);
          break;
        case Pda::Op::Stay:
          b.add_transition(cn, src, "adv", VRef::n(node(ctx, cell, e.state2)), p);
          break;
      }
    }
    b.set_reward(cn, src, "adv", rewards.step);
    return en;
  };

  auto emit_choice = [&](int ctx, const VRef& src, int vid, int st) {
    std::string cn = comp_name(ctx);
    bool any_monitored = false;
    for (const auto& row : grid.rows[vid]) {
      const std::string& a = grid.actions[row.action];
      if (!px.monitored(a)) {
        for (const auto& [dst, p] : row.dests)
          b.add_transition(cn, src, a, VRef::n(node(ctx, dst, st)), p);
        if (row.reward != 0.0) b.set_reward(cn, src, a, row.reward);
        continue;
      }
      any_monitored = true;
      std::string ea = emit_eff(ctx, vid, st, a);
      if (corruption > 0.0) {
        std::string es = emit_eff(ctx, vid, st, pda.special);
        b.add_transition(cn, src, a, VRef::n(ea), 1.0 - corruption);
        b.add_transition(cn, src, a, VRef::n(es), corruption);
      } else {
        b.add_transition(cn, src, a, VRef::n(ea));
      }
    }
    if (any_monitored) {
      std::string es = emit_eff(ctx, vid, st, pda.special);
      b.add_transition(cn, src, pda.special, VRef::n(es));
    }
  };

  for (int ctx = 0; ctx < px.nctx; ++ctx) {
    std::string cn = comp_name(ctx);
    for (const auto& [vid, st] : px.visited[ctx]) emit_choice(ctx, VRef::n(node(ctx, vid, st)), vid, st);
    if (ctx == 0) {
      for (int en : grid.entries) emit_choice(0, VRef::n(entry_node(0, en, pda.initial)), en, pda.initial);
    } else {
      for (const auto& [vid, st] : px.entries[ctx])
        emit_choice(ctx, VRef::n(entry_node(ctx, vid, st)), vid, st);
    }
    // Return ports resume the caller at the popped-to state; the sink return
    // port forwards the cascade.
    for (int sym : px.pushes[ctx]) {
      std::string bn = box_name(ctx, sym);
      for (const auto& [st, vid] : px.pops[1 + sym])
        emit_choice(ctx, VRef::port(bn, exit_node(1 + sym, st, vid)), vid, st);
      if (sink[1 + sym])
        b.add_transition(cn, VRef::port(bn, sink_node(1 + sym)), "adv", VRef::n(sink_node(ctx)));
    }
  }

  Rmdp out = b.build();
  ensure_valid(out);
  return out;
}

// ---------------------------------------------------------------------------
// Reference interpreter.
// ---------------------------------------------------------------------------

PdaInterpreter::PdaInterpreter(const Rmdp& mdp, const Pda& pda, const ProductRewards& rewards,
                               double corruption, const std::set<int>& success_states)
    : mdp_(mdp), pda_(pda), rw_(rewards), corruption_(corruption), success_(success_states) {
  const Component& grid = mdp.components.at(0);
  vid_ = grid.entries.at(0);
  state_ = pda.initial;
}

namespace {

int sample_sorted(const std::vector<std::pair<int, double>>& dests, Rng& rng) {
  if (dests.size() == 1) return dests.front().first;
  double u = rng.next_double();
  double cum = 0.0;
  for (const auto& [dst, p] : dests) {
    cum += p;
    if (u < cum) return dst;
  }
  return dests.back().first;
}

}  // namespace

double PdaInterpreter::start(Rng& rng) {
  const Component& grid = mdp_.components[0];
  const TransitionRow& row = grid.rows[vid_].at(0);
  vid_ = sample_sorted(row.dests, rng);
  return row.reward;
}

double PdaInterpreter::step(int action, Rng& rng) {
  if (terminated_) throw Error(ErrorCode::SteppedAfterTermination, "interpreter already terminated");
  const Component& grid = mdp_.components[0];
  std::string aname = action >= 0 ? grid.actions[action] : pda_.special;

  bool is_monitored = aname == pda_.special;
  if (!is_monitored)
    for (const auto& [k, e] : pda_.delta)
      if (std::get<1>(k) == aname) {
        is_monitored = true;
        break;
      }
  if (!is_monitored) {
    const TransitionRow* row = grid.row(vid_, grid.action_index(aname));
    vid_ = sample_sorted(row->dests, rng);
    return row->reward;
  }

  std::string u = aname;
  if (aname != pda_.special && corruption_ > 0.0) {
    // The product's choice row stores the two effect destinations in name
    // order, so the inverse-CDF mapping depends on which name sorts first.
    double draw = rng.next_double();
    if (aname < pda_.special) u = draw < 1.0 - corruption_ ? aname : pda_.special;
    else u = draw < corruption_ ? pda_.special : aname;
  }

  int top = stack_.empty() ? -1 : stack_.back();
  auto it = pda_.delta.find({state_, u, top});
  bool pop_on_empty = it != pda_.delta.end() && it->second.op == Pda::Op::Pop && stack_.empty();
  if (it == pda_.delta.end() || pop_on_empty) {
    terminated_ = true;
    if (u == pda_.special && stack_.empty()) {
      accepted_ = pda_.accepts(state_) && success_.count(vid_);
      return accepted_ ? rw_.success : rw_.reject;
    }
    return rw_.reject;
  }
  const Pda::Edge& e = it->second;
  int cell = vid_;
  if (u != pda_.special) {
    const TransitionRow* row = grid.row(vid_, grid.action_index(u));
    if (row->dests.size() != 1)
      throw Error(ErrorCode::InvalidArgument, "interpreter supports deterministic monitored moves only");
    cell = row->dests.front().first;
  }
  switch (e.op) {
    case Pda::Op::Push: stack_.push_back(e.push_sym); break;
    case Pda::Op::Pop: stack_.pop_back(); break;
    case Pda::Op::Stay: break;
  }
  state_ = e.state2;
  vid_ = cell;
  return rw_.step;
}

// ---------------------------------------------------------------------------
// Succinctness chain.
// ---------------------------------------------------------------------------

Rmdp hierarchical_chain(int n) {
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "chain size must be >= 1");
  RmdpBuilder b;
  // Root component first: callers precede callees.
  for (int i = n; i >= 1; --i) {
    std::string cn = "M" + std::to_string(i);
    std::string en = "en" + std::to_string(i), ex = "x" + std::to_string(i);
    b.add_component(cn);
    b.add_entry(cn, en);
    b.add_exit(cn, ex);
    b.add_transition(cn, VRef::n(en), "b", VRef::n(ex));
    if (i == 1) {
      b.add_transition(cn, VRef::n(en), "a", VRef::n(ex));
      b.set_reward(cn, VRef::n(en), "a", 1.0);
      continue;
    }
    std::string callee = "M" + std::to_string(i - 1);
    std::string cen = "en" + std::to_string(i - 1), cex = "x" + std::to_string(i - 1);
    std::string c1 = "c1_" + std::to_string(i), c2 = "c2_" + std::to_string(i);
    b.add_box(cn, c1, callee);
    b.add_box(cn, c2, callee);
    b.add_transition(cn, VRef::n(en), "a", VRef::port(c1, cen));
    b.add_transition(cn, VRef::port(c1, cex), "a", VRef::port(c2, cen));
    b.add_transition(cn, VRef::port(c1, cex), "b", VRef::n(ex));
    b.add_transition(cn, VRef::port(c2, cex), "a", VRef::n(ex));
    b.set_reward(cn, VRef::port(c2, cex), "a", 1.0);
    b.add_transition(cn, VRef::port(c2, cex), "b", VRef::n(ex));
  }
  Rmdp m = b.build();
  ensure_valid(m);
  return m;
}

// ---------------------------------------------------------------------------
// PDA text format.
// ---------------------------------------------------------------------------

namespace {

struct PdaCursor {
  const std::string& s;
  std::size_t i = 0;
  int line = 1;

  bool eof() const { return i >= s.size(); }
  char peek() const { return s[i]; }
  void advance() {
    if (s[i] == '\n') ++line;
    ++i;
  }
  void skip_ws() {
    while (!eof()) {
      if (std::isspace(static_cast<unsigned char>(peek()))) advance();
      else if (peek() == '#')
        while (!eof() && peek() != '\n') advance();
      else break;
    }
  }
  [[noreturn]] void fail(const std::string& msg) {
    std::ostringstream os;
    os << "line " << line << ": " << msg;
    throw Error(ErrorCode::Syntax, os.str());
  }
  std::string ident(const std::string& what) {
    skip_ws();
    std::size_t start = i;
    while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' ||
                      peek() == '*'))
      advance();
    if (i == start) fail("expected " + what);
    return s.substr(start, i - start);
  }
  bool try_consume(const std::string& tok) {
    skip_ws();
    if (s.compare(i, tok.size(), tok) != 0) return false;
    if (std::isalpha(static_cast<unsigned char>(tok[0])) && i + tok.size() < s.size() &&
        (std::isalnum(static_cast<unsigned char>(s[i + tok.size()])) || s[i + tok.size()] == '_'))
      return false;
    for (std::size_t k = 0; k < tok.size(); ++k) advance();
    return true;
  }
  void expect(const std::string& tok, const std::string& what) {
    if (!try_consume(tok)) fail("expected " + what);
  }
};

}  // namespace

Pda parse_pda(const std::string& text) {
  Pda p;
  PdaCursor c{text};
  c.expect("pda", "header 'pda 1'");
  c.expect("1", "header 'pda 1'");
  std::string initial;
  while (true) {
    c.skip_ws();
    if (c.eof()) break;
    if (c.try_consume("states")) {
      while (!c.try_consume(";")) p.states.push_back(c.ident("state name"));
    } else if (c.try_consume("initial")) {
      initial = c.ident("state name");
      c.expect(";", "';'");
    } else if (c.try_consume("accepting")) {
      while (!c.try_consume(";")) {
        std::string s = c.ident("state name");
        int ix = p.state_index(s);
        if (ix < 0) c.fail("unknown state " + s);
        p.accepting.push_back(ix);
      }
    } else if (c.try_consume("symbols")) {
      while (!c.try_consume(";")) p.stack_symbols.push_back(c.ident("stack symbol"));
    } else if (c.try_consume("special")) {
      p.special = c.ident("input name");
      c.expect(";", "';'");
    } else {
      // <state> --<input> / <top>--> <state2> (, push <sym> | , pop) ;
      std::string s1 = c.ident("state name");
      int from = p.state_index(s1);
      if (from < 0) c.fail("unknown state " + s1);
      c.expect("--", "'--'");
      std::string input = c.ident("input name");
      c.expect("/", "'/' before the top-of-stack pattern");
      std::string top = c.ident("top-of-stack symbol, 'empty' or '*'");
      c.expect("-->", "'-->'");
      std::string s2 = c.ident("state name");
      int to = p.state_index(s2);
      if (to < 0) c.fail("unknown state " + s2);
      Pda::Edge e{to, Pda::Op::Stay, -1};
      if (c.try_consume(",")) {
        if (c.try_consume("push")) {
          e.op = Pda::Op::Push;
          std::string sym = c.ident("stack symbol");
          e.push_sym = p.symbol_index(sym);
          if (e.push_sym < 0) c.fail("unknown stack symbol " + sym);
        } else if (c.try_consume("pop")) {
          e.op = Pda::Op::Pop;
        } else {
          c.fail("expected push or pop");
        }
      }
      c.expect(";", "';'");
      std::vector<int> tops;
      if (top == "*") {
        tops.push_back(-1);
        for (int k = 0; k < static_cast<int>(p.stack_symbols.size()); ++k) tops.push_back(k);
      } else if (top == "empty") {
        tops.push_back(-1);
      } else {
        int k = p.symbol_index(top);
        if (k < 0) c.fail("unknown stack symbol " + top);
        tops.push_back(k);
      }
      for (int t : tops) p.delta[{from, input, t}] = e;
    }
  }
  p.initial = p.state_index(initial);
  if (p.initial < 0) throw Error(ErrorCode::Syntax, "pda is missing an initial state");
  if (p.special.empty()) throw Error(ErrorCode::Syntax, "pda is missing the special input");
  return p;
}

}  // namespace rmdp::transforms
