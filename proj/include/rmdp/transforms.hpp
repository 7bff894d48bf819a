#pragma once

#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "rmdp/model.hpp"
#include "rmdp/rng.hpp"

namespace rmdp::transforms {

/// A pushdown automaton used as a context-free reward monitor. Inputs are
/// the flat MDP's action names plus one designated special action; MDP
/// actions absent from the transition relation and from `special` are
/// silent (they do not drive the automaton and are never corrupted).
struct Pda {
  enum class Op { Push, Pop, Stay };
  struct Edge {
    int state2 = -1;
    Op op = Op::Stay;
    int push_sym = -1;
  };

  std::vector<std::string> states;
  int initial = 0;
  std::vector<int> accepting;
  std::vector<std::string> stack_symbols;
  std::string special;
  // (state, input, top symbol or -1 for empty stack) -> edge. Undefined
  // combinations reject: on the special input with an empty stack this is a
  // declaration (accept iff the state accepts and the MDP state qualifies),
  // otherwise the run moves to the rejecting sink.
  std::map<std::tuple<int, std::string, int>, Edge> delta;

  int state_index(const std::string& s) const;
  int symbol_index(const std::string& s) const;
  bool accepts(int state) const;
};

/// Parses the `.pda` text format (see README for the grammar).
Pda parse_pda(const std::string& text);

struct ProductRewards {
  double success = 50.0;
  double reject = -5.0;
  double step = -1.0;
};

/// Step-wise discounting via exit lanes: every component gains a fresh
/// zero-reward exit; agent-controlled rows are scaled by lambda with the
/// remaining 1-lambda mass routed to it. The result is proper by
/// construction.
Rmdp add_exit_lane(const Rmdp& m, double lambda);

/// Composes a flat (box-free) MDP with a PDA monitor: the PDA stack becomes
/// the call stack (one component per stack symbol plus a root for the empty
/// stack), the control state travels in the vertex, and exits are indexed by
/// (control state, MDP state) at pop time. Monitored agent actions are
/// corrupted into the special action with probability `corruption`; each
/// such action is modeled as a zero-reward choice step followed by an effect
/// step carrying the mapped reward. Declared acceptance requires an
/// accepting PDA state, an empty stack and an MDP state in `success_states`.
Rmdp pda_product(const Rmdp& mdp, const Pda& pda, const ProductRewards& rewards,
                 double corruption, const std::set<int>& success_states);

/// Reference interpreter for pda_product: steps the flat MDP and the PDA
/// directly, consuming rng draws in exactly the order the product model
/// does, and emits one reward chunk per agent action.
class PdaInterpreter {
 public:
  PdaInterpreter(const Rmdp& mdp, const Pda& pda, const ProductRewards& rewards,
                 double corruption, const std::set<int>& success_states);

  /// Runs the root entry's silent dispatch row. Returns its reward.
  double start(Rng& rng);
  /// Applies one agent action (an MDP action id of the flat model, or -1 for
  /// the special action). Returns the summed reward of the resulting steps.
  double step(int action, Rng& rng);
  bool terminated() const { return terminated_; }
  bool accepted() const { return accepted_; }

 private:
  const Rmdp& mdp_;
  const Pda& pda_;
  ProductRewards rw_;
  double corruption_;
  const std::set<int>& success_;
  int vid_ = -1;
  int state_ = -1;
  std::vector<int> stack_;
  bool terminated_ = false;
  bool accepted_ = false;
};

/// Appendix-style succinctness family: n components where each level calls
/// the one below twice under the rewarding action; optimal value 2^n - 1.
Rmdp hierarchical_chain(int n);

}  // namespace rmdp::transforms
