#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rmdp/error.hpp"

namespace rmdp {

/// A vertex of a component: a node, a call port (box, entry) or a return
/// port (box, exit). Ports reference the callee's entry/exit ordering by
/// position.
enum class VertexKind { Node, CallPort, ReturnPort };

struct Vertex {
  VertexKind kind = VertexKind::Node;
  int node = -1;  // Node: index into Component::nodes
  int box = -1;   // ports: index into Component::boxes
  int port = -1;  // ports: position in the callee's entry/exit list
  bool operator==(const Vertex&) const = default;
};

/// One (source, action) row: a probability distribution over destination
/// vertices plus the reward r(q, a). Destinations are kept in canonical
/// (vertex id) order; inverse-CDF sampling walks them in this order.
struct TransitionRow {
  int action = -1;
  double reward = 0.0;
  std::vector<std::pair<int, double>> dests;
  bool operator==(const TransitionRow&) const = default;
};

struct BoxDecl {
  std::string name;
  int callee = -1;  // component index
  bool operator==(const BoxDecl&) const = default;
};

struct Component {
  std::string name;
  std::vector<std::string> actions;  // sorted; action id = index
  std::vector<std::string> nodes;    // sorted; node id = index
  std::vector<int> entries;          // node ids, in declared (fixed) order
  std::vector<int> exits;            // node ids, in declared (fixed) order
  std::vector<BoxDecl> boxes;        // sorted by name

  // Derived on build(): vertex enumeration (nodes first, then per box its
  // call ports followed by its return ports) and per-vertex rows.
  std::vector<Vertex> vertices;
  std::vector<int> box_base;                     // per box: vid of first call port
  std::vector<std::vector<TransitionRow>> rows;  // per vid, sorted by action

  int node_index(const std::string& n) const;
  int action_index(const std::string& a) const;
  int box_index(const std::string& b) const;
  bool is_entry(int node) const;
  bool is_exit(int node) const;
  /// Position of `node` in the exit list, or -1.
  int exit_pos(int node) const;

  int call_port(int box, int entry_pos) const;
  int return_port(int box, int exit_pos) const;

  const TransitionRow* row(int vid, int action) const;
  const std::vector<TransitionRow>& rows_at(int vid) const { return rows[vid]; }

  bool operator==(const Component&) const = default;
};

struct GlobalVertex {
  int comp = -1;
  int vid = -1;
  bool operator==(const GlobalVertex&) const = default;
  auto operator<=>(const GlobalVertex&) const = default;
};

struct Diagnostic {
  std::string rule;
  std::string component;
  std::string vertex;
  std::string message;
  int line = 0;
  bool operator==(const Diagnostic&) const = default;
};

struct Rmdp {
  std::vector<Component> components;

  // Derived on build(): flat box table so call stacks can store plain ints.
  struct GBox {
    int comp = -1;
    int box = -1;
    int callee = -1;
    bool operator==(const GBox&) const = default;
  };
  std::vector<GBox> gboxes;
  std::vector<std::vector<int>> gbox_of;  // [comp][box] -> gbox id

  int component_index(const std::string& name) const;
  /// Human-readable vertex name: "u1" or "b1.u3".
  std::string vertex_name(int comp, int vid) const;
  /// Resolve a vertex name as produced by vertex_name().
  std::optional<int> vertex_by_name(int comp, const std::string& name) const;

  bool operator==(const Rmdp& o) const { return components == o.components; }
};

/// Structural and probabilistic well-formedness checks. Empty result iff the
/// model is valid. Pure: repeated calls return identical diagnostics.
std::vector<Diagnostic> validate(const Rmdp& m);

/// Maximum absolute one-step reward over all (vertex, action).
double diameter(const Rmdp& m);

/// True iff every component has exactly one exit.
bool is_single_exit(const Rmdp& m);

/// Throws Error(ModelInvalid) naming the first diagnostic if validate fails.
void ensure_valid(const Rmdp& m);

/// Vertex reference used while assembling a model: a plain node name, or a
/// port "box.node" where `node` is an entry or exit of the box's callee.
struct VRef {
  std::string box;  // empty for plain nodes
  std::string node;
  static VRef n(std::string name) { return {"", std::move(name)}; }
  static VRef port(std::string box, std::string node) { return {std::move(box), std::move(node)}; }
};

class RmdpBuilder {
 public:
  /// Opens (or creates) a component; later add_* calls name it explicitly.
  void add_component(const std::string& name);
  void add_action(const std::string& comp, const std::string& action);
  void add_node(const std::string& comp, const std::string& node);
  void add_entry(const std::string& comp, const std::string& node);
  void add_exit(const std::string& comp, const std::string& node);
  void add_box(const std::string& comp, const std::string& box, const std::string& callee);
  void add_transition(const std::string& comp, const VRef& src, const std::string& action,
                      const VRef& dst, double p = 1.0, int line = 0);
  void set_reward(const std::string& comp, const VRef& src, const std::string& action, double r);

  /// Resolves names, enumerates vertices, canonicalizes ordering. Throws
  /// Error(Syntax) with the offending name/line when a reference cannot be
  /// resolved. Domain violations (e.g. transitions out of exits) are left
  /// for validate().
  Rmdp build() const;

 private:
  struct RawTransition {
    VRef src;
    std::string action;
    VRef dst;
    double p;
    int line;
  };
  struct RawComponent {
    std::string name;
    std::vector<std::string> actions, nodes;
    std::vector<std::string> entries, exits;
    std::vector<std::pair<std::string, std::string>> boxes;  // (box, callee)
    std::vector<RawTransition> transitions;
    std::vector<std::tuple<VRef, std::string, double>> rewards;
  };
  RawComponent& comp(const std::string& name);
  std::vector<RawComponent> comps_;
};

struct GlobalVertexHash {
  std::size_t operator()(const GlobalVertex& g) const {
    return std::hash<std::uint64_t>{}((std::uint64_t(std::uint32_t(g.comp)) << 32) |
                                      std::uint32_t(g.vid));
  }
};

}  // namespace rmdp
