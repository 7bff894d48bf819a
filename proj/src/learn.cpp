#include "rmdp/learn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rmdp::learn {

std::vector<std::int64_t> quantize(const std::vector<double>& v, double resolution) {
  std::vector<std::int64_t> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    double scaled = v[i] / resolution;
    // round half away from zero
    out[i] = static_cast<std::int64_t>(scaled >= 0.0 ? std::floor(scaled + 0.5)
                                                     : std::ceil(scaled - 0.5));
  }
  return out;
}

std::vector<double> dequantize(const std::vector<std::int64_t>& v, double resolution) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<double>(v[i]) * resolution;
  return out;
}

namespace {

struct Ctx {
  const Rmdp& m;
  const Hyperparameters& h;
  Algo algo;
  QTable& q;

  bool keyed_on_v() const { return algo == Algo::Rql; }

  QKey key(int comp, int vid, const std::vector<std::int64_t>& vkey, int action) const {
    if (keyed_on_v()) return {comp, vid, vkey, action};
    return {comp, vid, {}, action};
  }

  // max_a Q(s, v, a) over the legal actions at s.
  double max_q(int comp, int vid, const std::vector<std::int64_t>& vkey) const {
    const Component& c = m.components[comp];
    const Vertex& v = c.vertices[vid];
    bool autov = v.kind == VertexKind::CallPort ||
                 (v.kind == VertexKind::Node && c.is_exit(v.node));
    if (autov) return q.get(key(comp, vid, vkey, sem::kNoOpAction));
    if (c.rows[vid].empty()) return q.initial_value;
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& row : c.rows[vid]) best = std::max(best, q.get(key(comp, vid, vkey, row.action)));
    return best;
  }

  int greedy_action(int comp, int vid, const std::vector<std::int64_t>& vkey) const {
    const Component& c = m.components[comp];
    double best = -std::numeric_limits<double>::infinity();
    int act = sem::kNoOpAction;
    for (const auto& row : c.rows[vid]) {
      double qv = q.get(key(comp, vid, vkey, row.action));
      if (qv > best) {
        best = qv;
        act = row.action;
      }
    }
    return act;
  }

  void update(const QKey& k, double target) {
    long n = ++q.visits[k];
    double a = h.alpha_power > 0.0 ? 1.0 / std::pow(static_cast<double>(n), h.alpha_power)
                                   : h.alpha;
    double cur = q.get(k);
    q.entries[k] = cur + a * (target - cur);
  }

  // Exit-value vector at a box entry: return-port Q-maxima under the current
  // v, normalized so the minimum is 0, then quantized.
  std::vector<std::int64_t> entered_box(int comp, int box, const std::vector<std::int64_t>& vkey,
                                        double& v_min) const {
    const Component& c = m.components[comp];
    int callee = c.boxes[box].callee;
    int n_exits = static_cast<int>(m.components[callee].exits.size());
    std::vector<double> vp(n_exits);
    for (int k = 0; k < n_exits; ++k) vp[k] = max_q(comp, c.return_port(box, k), vkey);
    v_min = *std::min_element(vp.begin(), vp.end());
    for (double& x : vp) x -= v_min;
    return quantize(vp, h.quant);
  }
};

}  // namespace

TrainResult train(const Rmdp& m, const Hyperparameters& h, Algo algo) {
  ensure_valid(m);
  if (algo == Algo::Rql1 && !is_single_exit(m))
    throw Error(ErrorCode::NotSingleExit, "the 1-exit learner needs a single-exit model");
  if (h.total_steps < 1 || h.step_cap < 1)
    throw Error(ErrorCode::InvalidArgument, "total_steps and step_cap must be positive");

  TrainResult res;
  res.q.resolution = h.quant;
  res.q.initial_value = h.q_init;
  Ctx ctx{m, h, algo, res.q};

  Rng train_rng = Rng::substream(h.seed, 0);
  Rng eval_rng = Rng::substream(h.seed, 1);
  int start_comp = h.start_comp;
  int start_entry = h.start_entry >= 0 ? h.start_entry : m.components[start_comp].entries.at(0);
  long eval_every = h.eval_every > 0 ? h.eval_every : std::max(1L, h.total_steps / 200);

  sem::Configuration c = sem::initial_config(m, start_comp, start_entry);
  std::vector<std::int64_t> vkey(m.components[start_comp].exits.size(), 0);
  std::vector<std::vector<std::int64_t>> vstack;
  int episode_steps = 0;

  GreedyPolicy greedy(m, res.q, algo);

  for (long step = 1; step <= h.total_steps; ++step) {
    if (c.terminated || episode_steps >= h.step_cap) {
      if (!c.terminated) ++res.truncated_episodes;
      c = sem::initial_config(m, start_comp, start_entry);
      vkey.assign(m.components[start_comp].exits.size(), 0);
      vstack.clear();
      episode_steps = 0;
    }

    int action = sem::kNoOpAction;
    if (!sem::auto_advances(m, c)) {
      const auto& rows = m.components[c.comp].rows[c.vid];
      double eps = h.eps_initial;
      if (h.eps_decay_steps > 0) {
        double t = std::min(1.0, static_cast<double>(step) / h.eps_decay_steps);
        eps = h.eps_initial + t * (h.eps_final - h.eps_initial);
      }
      if (train_rng.next_double() < eps)
        action = rows[train_rng.next_below(rows.size())].action;
      else
        action = ctx.greedy_action(c.comp, c.vid, vkey);
    }

    sem::StepOutcome out = sem::step(m, c, action, train_rng);
    switch (out.event) {
      case sem::EventKind::Internal: {
        double max_next = ctx.max_q(out.next.comp, out.next.vid, vkey);
        ctx.update(ctx.key(c.comp, c.vid, vkey, action), out.reward + max_next);
        break;
      }
      case sem::EventKind::EnteredBox: {
        const auto& gb = m.gboxes[out.box];
        int callee = gb.callee;
        int entry_vid = out.next.vid;
        QKey k = ctx.key(c.comp, c.vid, vkey, action);
        if (algo == Algo::Rql) {
          double v_min = 0.0;
          std::vector<std::int64_t> v2 = ctx.entered_box(c.comp, gb.box, vkey, v_min);
          double target = (out.reward + ctx.max_q(callee, entry_vid, v2)) + v_min;
          ctx.update(k, target);
          vstack.push_back(std::move(vkey));
          vkey = std::move(v2);
        } else if (algo == Algo::Rql1) {
          double exit_q =
              ctx.max_q(c.comp, m.components[c.comp].return_port(gb.box, 0), vkey);
          double target =
              (out.reward + h.lambda * ctx.max_q(callee, entry_vid, vkey)) + h.lambda * exit_q;
          ctx.update(k, target);
        } else {
          ctx.update(k, out.reward + ctx.max_q(callee, entry_vid, vkey));
        }
        break;
      }
      case sem::EventKind::ExitedBox: {
        QKey k = ctx.key(c.comp, c.vid, vkey, action);
        if (algo == Algo::Rql) {
          double target = out.reward + static_cast<double>(vkey[out.exit_pos]) * h.quant;
          ctx.update(k, target);
          vkey = std::move(vstack.back());
          vstack.pop_back();
        } else if (algo == Algo::Rql1) {
          ctx.update(k, out.reward);
        } else {
          ctx.update(k, out.reward + ctx.max_q(out.next.comp, out.next.vid, vkey));
        }
        break;
      }
      case sem::EventKind::Terminated: {
        QKey k = ctx.key(c.comp, c.vid, vkey, action);
        if (algo == Algo::Rql)
          ctx.update(k, out.reward + static_cast<double>(vkey[out.exit_pos]) * h.quant);
        else
          ctx.update(k, out.reward);
        break;
      }
    }
    c = std::move(out.next);
    ++episode_steps;

    if (step % eval_every == 0 || step == h.total_steps) {
      if (res.curve.points.empty() || res.curve.points.back().first != step)
        res.curve.points.emplace_back(
            step, greedy.evaluate(start_comp, start_entry, eval_rng, h.step_cap, h.eval_episodes,
                                  h.include_truncated_eval));
    }
  }
  return res;
}

TrainResult rql_train(const Rmdp& m, const Hyperparameters& h) { return train(m, h, Algo::Rql); }
TrainResult rql1_train(const Rmdp& m, const Hyperparameters& h) { return train(m, h, Algo::Rql1); }
TrainResult flat_q_train(const Rmdp& m, const Hyperparameters& h) {
  return train(m, h, Algo::FlatQ);
}

GreedyPolicy::GreedyPolicy(const Rmdp& m, const QTable& q, Algo algo)
    : m_(m), q_(q), algo_(algo) {}

int GreedyPolicy::action_at(int comp, int vid, const std::vector<double>& v) const {
  const Component& c = m_.components[comp];
  std::vector<std::int64_t> vkey =
      algo_ == Algo::Rql ? quantize(v, q_.resolution) : std::vector<std::int64_t>{};
  double best = -std::numeric_limits<double>::infinity();
  int act = sem::kNoOpAction;
  for (const auto& row : c.rows[vid]) {
    QKey k{comp, vid, vkey, row.action};
    auto it = q_.entries.find(k);
    double qv = it == q_.entries.end() ? q_.initial_value : it->second;
    if (qv > best) {
      best = qv;
      act = row.action;
    }
  }
  return act;
}

std::vector<double> GreedyPolicy::exit_values(int comp, int box, const std::vector<double>& v) const {
  const Component& c = m_.components[comp];
  int callee = c.boxes[box].callee;
  int n_exits = static_cast<int>(m_.components[callee].exits.size());
  std::vector<std::int64_t> vkey =
      algo_ == Algo::Rql ? quantize(v, q_.resolution) : std::vector<std::int64_t>{};
  std::vector<double> vp(n_exits);
  for (int k = 0; k < n_exits; ++k) {
    int rp = c.return_port(box, k);
    const Vertex& rv = c.vertices[rp];
    (void)rv;
    double best;
    if (c.rows[rp].empty()) best = q_.initial_value;
    else {
      best = -std::numeric_limits<double>::infinity();
      for (const auto& row : c.rows[rp]) {
        QKey kk{comp, rp, vkey, row.action};
        auto it = q_.entries.find(kk);
        best = std::max(best, it == q_.entries.end() ? q_.initial_value : it->second);
      }
    }
    vp[k] = best;
  }
  double v_min = *std::min_element(vp.begin(), vp.end());
  for (double& x : vp) x -= v_min;
  if (algo_ == Algo::Rql) return dequantize(quantize(vp, q_.resolution), q_.resolution);
  return vp;
}

sem::Trajectory GreedyPolicy::episode(int start_comp, int start_entry, Rng& rng,
                                      int step_cap) const {
  sem::Configuration c = sem::initial_config(m_, start_comp, start_entry);
  std::vector<double> v(m_.components[start_comp].exits.size(), 0.0);
  std::vector<std::vector<double>> vstack;
  sem::Trajectory t;
  for (int i = 0; i < step_cap && !c.terminated; ++i) {
    int a = sem::auto_advances(m_, c) ? sem::kNoOpAction : action_at(c.comp, c.vid, v);
    sem::StepOutcome out = sem::step(m_, c, a, rng);
    if (algo_ == Algo::Rql) {
      if (out.event == sem::EventKind::EnteredBox) {
        const auto& gb = m_.gboxes[out.box];
        std::vector<double> v2 = exit_values(c.comp, gb.box, v);
        vstack.push_back(std::move(v));
        v = std::move(v2);
      } else if (out.event == sem::EventKind::ExitedBox) {
        v = std::move(vstack.back());
        vstack.pop_back();
      }
    }
    t.total_reward += out.reward;
    sem::Configuration next = out.next;
    t.steps.push_back({std::move(c), a, out.reward, std::move(out)});
    c = std::move(next);
  }
  t.truncated = !c.terminated;
  return t;
}

double GreedyPolicy::evaluate(int start_comp, int start_entry, Rng& rng, int step_cap,
                              int episodes, bool include_truncated) const {
  double sum = 0.0, sum_all = 0.0;
  long n = 0;
  for (int i = 0; i < episodes; ++i) {
    sem::Trajectory t = episode(start_comp, start_entry, rng, step_cap);
    sum_all += t.total_reward;
    if (include_truncated || !t.truncated) {
      sum += t.total_reward;
      ++n;
    }
  }
  // When every episode was truncated, fall back to the overall mean rather
  // than reporting nothing.
  if (n == 0) return sum_all / episodes;
  return sum / n;
}

}  // namespace rmdp::learn
