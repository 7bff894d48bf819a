#include "rmdp/semantics.hpp"

#include <sstream>

namespace rmdp::sem {

Configuration initial_config(const Rmdp& m, int component, int entry_node) {
  const Component& c = m.components.at(component);
  if (!c.is_entry(entry_node))
    throw Error(ErrorCode::UnknownEntry,
                c.nodes.at(entry_node) + " is not an entry of component " + c.name);
  return {{}, component, entry_node, false};
}

bool auto_advances(const Rmdp& m, const Configuration& c) {
  const Component& comp = m.components[c.comp];
  const Vertex& v = comp.vertices[c.vid];
  if (v.kind == VertexKind::CallPort) return true;
  return v.kind == VertexKind::Node && comp.is_exit(v.node);
}

namespace {

int sample_dest(const TransitionRow& row, Rng& rng) {
  if (row.dests.size() == 1) return row.dests.front().first;
  double u = rng.next_double();
  double cum = 0.0;
  for (const auto& [dst, p] : row.dests) {
    cum += p;
    if (u < cum) return dst;
  }
  return row.dests.back().first;
}

}  // namespace

StepOutcome step(const Rmdp& m, const Configuration& c, int action, Rng& rng) {
  if (c.terminated) throw Error(ErrorCode::SteppedAfterTermination, "episode already terminated");
  const Component& comp = m.components[c.comp];
  const Vertex& v = comp.vertices[c.vid];

  if (v.kind == VertexKind::CallPort) {
    int gbox = m.gbox_of[c.comp][v.box];
    const Component& callee = m.components[comp.boxes[v.box].callee];
    Configuration next = c;
    next.stack.push_back(gbox);
    next.comp = comp.boxes[v.box].callee;
    next.vid = callee.entries[v.port];
    return {std::move(next), 0.0, EventKind::EnteredBox, gbox, -1};
  }

  if (v.kind == VertexKind::Node && comp.is_exit(v.node)) {
    int pos = comp.exit_pos(v.node);
    if (c.stack.empty()) {
      Configuration next = c;
      next.terminated = true;
      return {std::move(next), 0.0, EventKind::Terminated, -1, pos};
    }
    int gbox = c.stack.back();
    const auto& gb = m.gboxes[gbox];
    Configuration next = c;
    next.stack.pop_back();
    next.comp = gb.comp;
    next.vid = m.components[gb.comp].return_port(gb.box, pos);
    return {std::move(next), 0.0, EventKind::ExitedBox, gbox, pos};
  }

  const TransitionRow* row = comp.row(c.vid, action);
  if (!row)
    throw Error(ErrorCode::IllegalAction, "no action " +
                                              (action >= 0 && action < (int)comp.actions.size()
                                                   ? comp.actions[action]
                                                   : std::to_string(action)) +
                                              " at " + m.vertex_name(c.comp, c.vid));
  Configuration next = c;
  next.vid = sample_dest(*row, rng);
  return {std::move(next), row->reward, EventKind::Internal, -1, -1};
}

Trajectory run_episode(const Rmdp& m, const std::function<int(const Configuration&)>& policy,
                       Configuration start, Rng& rng, int step_cap) {
  Trajectory t;
  Configuration c = std::move(start);
  for (int i = 0; i < step_cap && !c.terminated; ++i) {
    int a = auto_advances(m, c) ? kNoOpAction : policy(c);
    StepOutcome out = step(m, c, a, rng);
    t.total_reward += out.reward;
    Configuration next = out.next;
    t.steps.push_back({std::move(c), a, out.reward, std::move(out)});
    c = std::move(next);
  }
  t.truncated = !c.terminated;
  return t;
}

int stack_height(const Configuration& c) {
  return c.terminated ? 0 : 1 + static_cast<int>(c.stack.size());
}

std::string dump(const Rmdp& m, const Trajectory& t) {
  std::ostringstream os;
  for (std::size_t i = 0; i < t.steps.size(); ++i) {
    const TrajectoryStep& s = t.steps[i];
    const Component& comp = m.components[s.state.comp];
    const char* tag = s.outcome.event == EventKind::Internal     ? "internal"
                      : s.outcome.event == EventKind::EnteredBox ? "entered-box"
                      : s.outcome.event == EventKind::ExitedBox  ? "exited-box"
                                                                 : "terminated";
    os << i << '\t' << stack_height(s.state) << '\t' << m.vertex_name(s.state.comp, s.state.vid)
       << '\t' << (s.action == kNoOpAction ? "-" : comp.actions[s.action]) << '\t' << s.reward
       << '\t' << tag << '\n';
  }
  return os.str();
}

}  // namespace rmdp::sem
