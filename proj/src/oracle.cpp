#include "rmdp/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <utility>

namespace rmdp::oracle {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Flat indexing of all vertices across components.
struct Index {
  std::vector<int> base;  // per component
  int total = 0;

  explicit Index(const Rmdp& m) {
    for (const auto& c : m.components) {
      base.push_back(total);
      total += static_cast<int>(c.vertices.size());
    }
  }
  int at(int comp, int vid) const { return base[comp] + vid; }
};

// Call-port plumbing for the 1-exit system: x(q) = x(en) + x(b, ex).
struct CallInfo {
  int entry;     // flat index of the callee entry
  int ret;       // flat index of the single-exit return port
};

CallInfo call_info(const Rmdp& m, const Index& ix, int comp, int vid) {
  const Component& c = m.components[comp];
  const Vertex& v = c.vertices[vid];
  int callee = c.boxes[v.box].callee;
  return {ix.at(callee, m.components[callee].entries[v.port]),
          ix.at(comp, c.return_port(v.box, 0))};
}

// Solves the square system rows * x = rhs (dense, partial pivoting), for
// possibly several right-hand sides stacked as extra columns.
void gauss(std::vector<std::vector<double>>& a, int n, int rhs_cols) {
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r)
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    if (std::abs(a[piv][col]) < 1e-12)
      throw Error(ErrorCode::SingularSystem, "strategy evaluation system is singular");
    std::swap(a[col], a[piv]);
    for (int r = 0; r < n; ++r) {
      if (r == col || a[r][col] == 0.0) continue;
      double f = a[r][col] / a[col][col];
      for (int k = col; k < n + rhs_cols; ++k) a[r][k] -= f * a[col][k];
    }
  }
  for (int r = 0; r < n; ++r)
    for (int k = 0; k < rhs_cols; ++k) a[r][n + k] /= a[r][r];
}

void require_single_exit(const Rmdp& m) {
  if (!is_single_exit(m))
    throw Error(ErrorCode::NotSingleExit, "operation requires a 1-exit model");
}

}  // namespace

ValueMap eval_stackless(const Rmdp& m, const Strategy& sigma) {
  require_single_exit(m);
  Index ix(m);
  int n = ix.total;
  // Columns n and n+1 carry the reward rhs and the expected-steps rhs.
  std::vector<std::vector<double>> a(n, std::vector<double>(n + 2, 0.0));
  for (int ci = 0; ci < static_cast<int>(m.components.size()); ++ci) {
    const Component& c = m.components[ci];
    for (int vid = 0; vid < static_cast<int>(c.vertices.size()); ++vid) {
      int row = ix.at(ci, vid);
      a[row][row] = 1.0;
      const Vertex& v = c.vertices[vid];
      if (v.kind == VertexKind::Node && c.is_exit(v.node)) continue;  // x = 0
      if (v.kind == VertexKind::CallPort) {
        CallInfo info = call_info(m, ix, ci, vid);
        a[row][info.entry] -= 1.0;
        a[row][info.ret] -= 1.0;
        a[row][n + 1] = 1.0;
        continue;
      }
      if (c.rows[vid].empty()) continue;  // dead vertex, valued 0
      auto it = sigma.find({ci, vid});
      if (it == sigma.end())
        throw Error(ErrorCode::InvalidArgument,
                    "strategy undefined at " + m.vertex_name(ci, vid));
      const TransitionRow* tr = c.row(vid, it->second);
      if (!tr)
        throw Error(ErrorCode::IllegalAction,
                    "strategy picks an unavailable action at " + m.vertex_name(ci, vid));
      for (const auto& [dst, p] : tr->dests) a[row][ix.at(ci, dst)] -= p;
      a[row][n] = tr->reward;
      a[row][n + 1] = 1.0;
    }
  }
  gauss(a, n, 2);
  ValueMap out;
  for (int ci = 0; ci < static_cast<int>(m.components.size()); ++ci)
    for (int vid = 0; vid < static_cast<int>(m.components[ci].vertices.size()); ++vid) {
      if (a[ix.at(ci, vid)][n + 1] < -1e-9)
        throw Error(ErrorCode::SingularSystem,
                    "negative expected step count at " + m.vertex_name(ci, vid) +
                        ": strategy is improper");
      out[{ci, vid}] = a[ix.at(ci, vid)][n];
    }
  return out;
}

namespace {

double lookup(const ValueMap& x, int comp, int vid) {
  auto it = x.find({comp, vid});
  return it == x.end() ? 0.0 : it->second;
}

// One F sweep plus the greedy strategy it induces.
ValueMap f_sweep(const Rmdp& m, const ValueMap& x, Strategy* greedy) {
  ValueMap next;
  for (int ci = 0; ci < static_cast<int>(m.components.size()); ++ci) {
    const Component& c = m.components[ci];
    for (int vid = 0; vid < static_cast<int>(c.vertices.size()); ++vid) {
      const Vertex& v = c.vertices[vid];
      double val = 0.0;
      if (v.kind == VertexKind::CallPort) {
        int callee = c.boxes[v.box].callee;
        val = lookup(x, callee, m.components[callee].entries[v.port]) +
              lookup(x, ci, c.return_port(v.box, 0));
      } else if (!(v.kind == VertexKind::Node && c.is_exit(v.node)) && !c.rows[vid].empty()) {
        val = -kInf;
        int best = -1;
        for (const auto& row : c.rows[vid]) {
          double q = row.reward;
          for (const auto& [dst, p] : row.dests) q += p * lookup(x, ci, dst);
          if (q > val) {
            val = q;
            best = row.action;
          }
        }
        if (greedy) (*greedy)[{ci, vid}] = best;
      }
      next[{ci, vid}] = val;
    }
  }
  return next;
}

}  // namespace

ValueMap apply_f(const Rmdp& m, const ValueMap& x) { return f_sweep(m, x, nullptr); }

ValueSolution solve_1exit(const Rmdp& m) {
  require_single_exit(m);
  ensure_valid(m);

  // Warm start: sparse value iteration from 0.
  ValueMap x;
  Strategy sigma;
  for (int sweep = 0; sweep < 20000; ++sweep) {
    ValueMap next = f_sweep(m, x, &sigma);
    double delta = 0.0;
    for (const auto& [k, v] : next) delta = std::max(delta, std::abs(v - lookup(x, k.comp, k.vid)));
    x = std::move(next);
    if (delta < 1e-12) break;
  }

  // Exact policy iteration from the warm-start strategy.
  ValueSolution sol;
  for (int it = 0; it < 1000; ++it) {
    ValueMap vals;
    try {
      vals = eval_stackless(m, sigma);
    } catch (const Error& e) {
      if (e.code == ErrorCode::SingularSystem)
        throw Error(ErrorCode::ImproperModel,
                    std::string("policy iteration hit an improper strategy: ") + e.what());
      throw;
    }
    Strategy improved;
    f_sweep(m, vals, &improved);
    sol.iterations = it + 1;
    if (improved == sigma) {
      sol.values = std::move(vals);
      sol.strategy = std::move(sigma);
      break;
    }
    sigma = std::move(improved);
    if (it == 999)
      throw Error(ErrorCode::ImproperModel, "policy iteration failed to converge");
  }
  ValueMap fx = apply_f(m, sol.values);
  for (const auto& [k, v] : fx)
    sol.residual = std::max(sol.residual, std::abs(v - lookup(sol.values, k.comp, k.vid)));
  return sol;
}

std::string lp_export_1exit(const Rmdp& m) {
  require_single_exit(m);
  solve_1exit(m);  // gate: only export LPs for solvable (proper) inputs

  auto var = [&](int ci, int vid) {
    std::string n = "t_" + m.components[ci].name + "_" + m.vertex_name(ci, vid);
    for (char& ch : n)
      if (ch == '.') ch = '_';
    return n;
  };

  std::ostringstream os;
  os << "\\ total-reward fixed-point LP: any feasible point dominates the optimal values\n";
  os << "Minimize\n obj:";
  bool first = true;
  for (int ci = 0; ci < static_cast<int>(m.components.size()); ++ci)
    for (int vid = 0; vid < static_cast<int>(m.components[ci].vertices.size()); ++vid) {
      os << (first ? " " : " + ") << var(ci, vid);
      first = false;
    }
  os << "\nSubject To\n";
  int cn = 0;
  for (int ci = 0; ci < static_cast<int>(m.components.size()); ++ci) {
    const Component& c = m.components[ci];
    for (int vid = 0; vid < static_cast<int>(c.vertices.size()); ++vid) {
      const Vertex& v = c.vertices[vid];
      if (v.kind == VertexKind::Node && c.is_exit(v.node)) {
        os << " c" << ++cn << ": " << var(ci, vid) << " = 0\n";
        continue;
      }
      if (v.kind == VertexKind::CallPort) {
        int callee = c.boxes[v.box].callee;
        os << " c" << ++cn << ": " << var(ci, vid) << " - "
           << var(callee, m.components[callee].entries[v.port]) << " - "
           << var(ci, c.return_port(v.box, 0)) << " >= 0\n";
        continue;
      }
      for (const auto& row : c.rows[vid]) {
        os << " c" << ++cn << ": " << var(ci, vid);
        for (const auto& [dst, p] : row.dests) os << " - " << p << " " << var(ci, dst);
        os << " >= " << row.reward << "\n";
      }
    }
  }
  os << "Bounds\n";
  for (int ci = 0; ci < static_cast<int>(m.components.size()); ++ci)
    for (int vid = 0; vid < static_cast<int>(m.components[ci].vertices.size()); ++vid)
      os << " " << var(ci, vid) << " free\n";
  os << "End\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Truncated solve: top-down evaluation of the bounded-stack optimal value.
// A component instance is characterised by the concrete payoff vector w its
// exits are worth to the caller and by the number of pushes still allowed;
// reachable (component, budget, w) contexts are memoised, with w quantised at
// 1e-10. Once two consecutive budgets agree at a context the value has
// converged and deeper budgets reuse it.
// ---------------------------------------------------------------------------

namespace {

struct TruncSolver {
  const Rmdp& m;
  double tol;

  struct Entry {
    std::map<int, std::vector<double>> by_budget;
    int converged_at = -1;
  };
  // Key: component, influence bucket, quantised exit payoffs. A context deep
  // in the call tree affects the root value with weight bounded by the
  // product of call-port visit bounds along the path, so low-influence
  // contexts may be quantised coarsely and collapse together.
  std::map<std::tuple<int, int, std::vector<long long>>, Entry> memo;
  // Per component: vertex evaluation order (reverse dependency order) and
  // whether the internal flow is acyclic, in which case one pass suffices.
  std::vector<std::vector<int>> order;
  std::vector<bool> acyclic;
  // Per vertex: upper bound on expected visits from any entry.
  std::vector<std::vector<double>> visits;

  TruncSolver(const Rmdp& model, double tolerance) : m(model), tol(tolerance) {
    for (const auto& c : m.components) {
      int nv = static_cast<int>(c.vertices.size());
      // Dependency edges point from a vertex to the vertices its value
      // reads: row destinations, and return ports for a call port.
      std::vector<std::vector<int>> dep(nv);
      std::vector<int> pending(nv, 0);
      std::vector<std::vector<int>> rdep(nv);
      for (int vid = 0; vid < nv; ++vid) {
        const Vertex& v = c.vertices[vid];
        if (v.kind == VertexKind::CallPort) {
          int callee = c.boxes[v.box].callee;
          int nx = static_cast<int>(m.components[callee].exits.size());
          for (int x = 0; x < nx; ++x) dep[vid].push_back(c.return_port(v.box, x));
        } else if (!(v.kind == VertexKind::Node && c.is_exit(v.node))) {
          for (const auto& row : c.rows[vid])
            for (const auto& [dst, p] : row.dests) dep[vid].push_back(dst);
        }
        pending[vid] = static_cast<int>(dep[vid].size());
        for (int d : dep[vid]) rdep[d].push_back(vid);
      }
      std::vector<int> topo;
      for (int vid = 0; vid < nv; ++vid)
        if (pending[vid] == 0) topo.push_back(vid);
      for (std::size_t i = 0; i < topo.size(); ++i)
        for (int u : rdep[topo[i]])
          if (--pending[u] == 0) topo.push_back(u);
      std::vector<double> vis(nv, 1.0);
      if (static_cast<int>(topo.size()) == nv) {
        // Visit bounds flow from entries toward terminals, i.e. against the
        // dependency order.
        std::fill(vis.begin(), vis.end(), 0.0);
        for (int en : c.entries) vis[en] = 1.0;
        for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
          int u = *it;
          if (vis[u] == 0.0) continue;
          const Vertex& v = c.vertices[u];
          if (v.kind == VertexKind::CallPort) {
            for (int d : dep[u]) vis[d] += vis[u];
          } else if (!(v.kind == VertexKind::Node && c.is_exit(v.node))) {
            std::map<int, double> best;
            for (const auto& row : c.rows[u])
              for (const auto& [dst, p] : row.dests) best[dst] = std::max(best[dst], p);
            for (const auto& [dst, p] : best) vis[dst] += vis[u] * p;
          }
        }
        order.push_back(std::move(topo));
        acyclic.push_back(true);
      } else {
        std::vector<int> all(nv);
        for (int vid = 0; vid < nv; ++vid) all[vid] = vid;
        order.push_back(std::move(all));
        acyclic.push_back(false);
      }
      visits.push_back(std::move(vis));
    }
  }

  static int bucket_of(double influence) {
    int b = 0;
    while (b < 8 && influence < 1.0) {
      influence *= 10.0;
      ++b;
    }
    return b;
  }

  const std::vector<double>& solve(int ci, int d, const std::vector<double>& w,
                                   double influence) {
    int bucket = bucket_of(influence);
    double grain = 1e12 / std::pow(10.0, bucket);
    std::vector<long long> key(w.size());
    for (std::size_t k = 0; k < w.size(); ++k) key[k] = std::llround(w[k] * grain);
    Entry& e = memo[{ci, bucket, std::move(key)}];
    if (e.converged_at >= 0 && d >= e.converged_at) return e.by_budget.at(e.converged_at);
    auto hit = e.by_budget.find(d);
    if (hit != e.by_budget.end()) return hit->second;

    const Component& c = m.components[ci];
    int nv = static_cast<int>(c.vertices.size());
    std::vector<double> vals(nv, 0.0);
    for (std::size_t x = 0; x < c.exits.size(); ++x) vals[c.exits[x]] = w[x];
    int max_sweeps = acyclic[ci] ? 1 : 10000;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
      double delta = 0.0;
      for (int vid : order[ci]) {
        const Vertex& v = c.vertices[vid];
        if (v.kind == VertexKind::Node && c.is_exit(v.node)) continue;
        double nu = 0.0;
        if (v.kind == VertexKind::CallPort) {
          if (d > 0) {
            int callee = c.boxes[v.box].callee;
            const Component& cc = m.components[callee];
            std::vector<double> sub(cc.exits.size());
            for (std::size_t x = 0; x < sub.size(); ++x)
              sub[x] = vals[c.return_port(v.box, static_cast<int>(x))];
            double child = std::min(1.0, influence * visits[ci][vid]);
            nu = solve(callee, d - 1, sub, child)[cc.entries[v.port]];
          }
        } else if (!c.rows[vid].empty()) {
          nu = -kInf;
          for (const auto& row : c.rows[vid]) {
            double t = row.reward;
            for (const auto& [dst, p] : row.dests) t += p * vals[dst];
            nu = std::max(nu, t);
          }
        }
        delta = std::max(delta, std::abs(nu - vals[vid]));
        vals[vid] = nu;
      }
      if (delta <= tol) break;
    }

    std::vector<long long> key2(w.size());
    for (std::size_t k = 0; k < w.size(); ++k) key2[k] = std::llround(w[k] * grain);
    Entry& e2 = memo[{ci, bucket, std::move(key2)}];
    auto [it, inserted] = e2.by_budget.emplace(d, std::move(vals));
    auto below = e2.by_budget.find(d - 1);
    if (below != e2.by_budget.end() && e2.converged_at < 0) {
      double diff = 0.0;
      for (int vid = 0; vid < nv; ++vid)
        diff = std::max(diff, std::abs(it->second[vid] - below->second[vid]));
      if (diff <= tol) e2.converged_at = d;
    }
    return it->second;
  }
};

}  // namespace

std::vector<std::vector<double>> solve_truncated(const Rmdp& m, int stack_bound, double tol) {
  if (stack_bound < 1) throw Error(ErrorCode::InvalidArgument, "stack_bound must be >= 1");
  ensure_valid(m);
  TruncSolver solver(m, tol);
  std::vector<std::vector<double>> out;
  for (int ci = 0; ci < static_cast<int>(m.components.size()); ++ci) {
    std::vector<double> w(m.components[ci].exits.size(), 0.0);
    out.push_back(solver.solve(ci, stack_bound - 1, w, 1.0));
  }
#ifdef RMDP_MEMO_STATS
  std::size_t budgets = 0;
  for (const auto& [k, e] : solver.memo) budgets += e.by_budget.size();
  std::fprintf(stderr, "memo contexts=%zu budget-rows=%zu\n", solver.memo.size(), budgets);
#endif
  return out;
}
// ---------------------------------------------------------------------------
// Deterministic exhaustive search.
// ---------------------------------------------------------------------------

namespace {

struct DetSearch {
  const Rmdp& m;
  int cap;
  bool cap_hit = false;
  std::unordered_map<std::string, double> memo;
  std::unordered_map<std::string, int> on_path;

  static std::string key(const std::vector<int>& stack, int comp, int vid) {
    std::string k;
    k.reserve(stack.size() * 4 + 8);
    auto put = [&](int x) { k.append(reinterpret_cast<const char*>(&x), 4); };
    for (int b : stack) put(b);
    put(-1);
    put(comp);
    put(vid);
    return k;
  }

  // Returns (value, tainted): tainted results touched an on-path cycle cut or
  // the depth cap and must not be memoized.
  std::pair<double, bool> value(std::vector<int>& stack, int comp, int vid) {
    const Component& c = m.components[comp];
    const Vertex& v = c.vertices[vid];

    if (v.kind == VertexKind::Node && c.is_exit(v.node)) {
      if (stack.empty()) return {0.0, false};
      int gbox = stack.back();
      const auto& gb = m.gboxes[gbox];
      stack.pop_back();
      auto r = value(stack, gb.comp,
                     m.components[gb.comp].return_port(gb.box, c.exit_pos(v.node)));
      stack.push_back(gbox);
      return r;
    }
    if (v.kind == VertexKind::CallPort) {
      if (static_cast<int>(stack.size()) + 1 >= cap) {
        cap_hit = true;
        return {-kInf, true};
      }
      int gbox = m.gbox_of[comp][v.box];
      int callee = c.boxes[v.box].callee;
      stack.push_back(gbox);
      auto r = value(stack, callee, m.components[callee].entries[v.port]);
      stack.pop_back();
      return r;
    }
    if (c.rows[vid].empty()) return {0.0, false};

    std::string k = key(stack, comp, vid);
    if (auto it = memo.find(k); it != memo.end()) return {it->second, false};
    if (on_path.count(k)) return {-kInf, true};  // deterministic loop forever

    on_path.emplace(k, 1);
    double best = -kInf;
    bool tainted = false;
    for (const auto& row : c.rows[vid]) {
      if (row.dests.size() != 1 || row.dests.front().second != 1.0)
        throw Error(ErrorCode::NondeterministicModel,
                    "stochastic transition at " + m.vertex_name(comp, vid));
      auto [sub, t] = value(stack, comp, row.dests.front().first);
      tainted = tainted || t;
      best = std::max(best, row.reward + sub);
    }
    on_path.erase(k);
    if (!tainted) memo.emplace(std::move(k), best);
    return {best, tainted};
  }
};

std::map<std::pair<int, int>, double> det_run(const Rmdp& m, int cap, bool& cap_hit) {
  DetSearch s{m, cap};
  std::map<std::pair<int, int>, double> out;
  for (int ci = 0; ci < static_cast<int>(m.components.size()); ++ci)
    for (int en : m.components[ci].entries) {
      std::vector<int> stack;
      out[{ci, en}] = s.value(stack, ci, en).first;
    }
  cap_hit = s.cap_hit;
  return out;
}

}  // namespace

std::map<std::pair<int, int>, double> solve_deterministic(const Rmdp& m, int depth_cap) {
  ensure_valid(m);
  for (const auto& c : m.components)
    for (const auto& rows : c.rows)
      for (const auto& row : rows)
        if (row.dests.size() != 1)
          throw Error(ErrorCode::NondeterministicModel,
                      "model has a stochastic transition in component " + c.name);
  bool hit = false;
  auto a = det_run(m, depth_cap, hit);
  if (!hit) return a;
  bool hit2 = false;
  auto b = det_run(m, 2 * depth_cap, hit2);
  for (const auto& [k, v] : a) {
    double w = b.at(k);
    bool same = (std::isinf(v) && std::isinf(w)) || std::abs(v - w) <= 1e-9;
    if (!same)
      throw Error(ErrorCode::CapUnstable,
                  "value changed when the depth cap was doubled; raise depth_cap");
  }
  return a;
}

PacResult pac_learn_1exit(const RowSampler& sample, const Rmdp& skeleton, double eps, double delta,
                          double K, double r_max) {
  require_single_exit(skeleton);
  Rmdp learned = skeleton;

  long stochastic_rows = 0;
  int s_max = 1;
  for (const auto& c : skeleton.components)
    for (const auto& rows : c.rows)
      for (const auto& row : rows)
        if (row.dests.size() > 1) {
          ++stochastic_rows;
          s_max = std::max(s_max, static_cast<int>(row.dests.size()));
        }

  PacResult res;
  res.eps = eps;
  res.delta = delta;
  res.row_l1_target = r_max > 0 ? eps / (2.0 * K * K * r_max) : 1.0;
  double ep = res.row_l1_target;
  res.samples_per_row =
      stochastic_rows == 0
          ? 1
          : static_cast<long>(std::ceil(
                (2.0 / (ep * ep)) * (s_max * std::log(2.0) + std::log(stochastic_rows / delta))));

  for (int ci = 0; ci < static_cast<int>(learned.components.size()); ++ci) {
    Component& c = learned.components[ci];
    for (int vid = 0; vid < static_cast<int>(c.vertices.size()); ++vid)
      for (auto& row : c.rows[vid]) {
        long n = row.dests.size() > 1 ? res.samples_per_row : 1;
        std::unordered_map<int, long> counts;
        for (long i = 0; i < n; ++i) ++counts[sample(ci, vid, row.action)];
        for (auto& [dst, p] : row.dests) {
          auto it = counts.find(dst);
          p = it == counts.end() ? 0.0 : static_cast<double>(it->second) / n;
        }
      }
  }

  res.solution = solve_1exit(learned);
  res.learned = std::move(learned);
  return res;
}

}  // namespace rmdp::oracle
