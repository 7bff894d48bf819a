#pragma once

#include <functional>
#include <string>
#include <vector>

#include "rmdp/model.hpp"
#include "rmdp/rng.hpp"

namespace rmdp::sem {

/// Reserved action id recorded on auto-advance steps (call ports, exits).
inline constexpr int kNoOpAction = -1;

/// A state of the induced infinite MDP: the call stack (bottom-to-top, as
/// global box ids), the current vertex, and a termination flag.
struct Configuration {
  std::vector<int> stack;
  int comp = -1;
  int vid = -1;
  bool terminated = false;
  bool operator==(const Configuration&) const = default;
};

enum class EventKind { Internal, EnteredBox, ExitedBox, Terminated };

struct StepOutcome {
  Configuration next;
  double reward = 0.0;
  EventKind event = EventKind::Internal;
  int box = -1;       // EnteredBox/ExitedBox: global box id
  int exit_pos = -1;  // ExitedBox/Terminated: index into the exit list
};

struct TrajectoryStep {
  Configuration state;
  int action = kNoOpAction;
  double reward = 0.0;
  StepOutcome outcome;
};

struct Trajectory {
  std::vector<TrajectoryStep> steps;
  bool truncated = false;
  double total_reward = 0.0;
};

/// Start state (⟨∅⟩, entry). Throws Error(UnknownEntry) if `entry` is not an
/// entry node of `component`.
Configuration initial_config(const Rmdp& m, int component, int entry_node);

/// Whether the configuration auto-advances (call port or exit node): the
/// action is ignored and no rng draw is consumed unless the row demands one.
bool auto_advances(const Rmdp& m, const Configuration& c);

/// One step of the induced MDP. Throws IllegalAction / SteppedAfterTermination.
StepOutcome step(const Rmdp& m, const Configuration& c, int action, Rng& rng);

/// Rolls out `policy` until termination or `step_cap` steps (then truncated).
/// Auto-advance steps do not query the policy and record kNoOpAction.
Trajectory run_episode(const Rmdp& m, const std::function<int(const Configuration&)>& policy,
                       Configuration start, Rng& rng, int step_cap);

/// 0 once terminated, otherwise 1 + stack size.
int stack_height(const Configuration& c);

/// Tab-separated dump: step index, stack height, vertex, action, reward, event.
std::string dump(const Rmdp& m, const Trajectory& t);

}  // namespace rmdp::sem
