#include "rmdp/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

namespace rmdp {

namespace {

int index_of(const std::vector<std::string>& xs, const std::string& x) {
  auto it = std::lower_bound(xs.begin(), xs.end(), x);
  if (it == xs.end() || *it != x) return -1;
  return static_cast<int>(it - xs.begin());
}

}  // namespace

int Component::node_index(const std::string& n) const { return index_of(nodes, n); }
int Component::action_index(const std::string& a) const { return index_of(actions, a); }

int Component::box_index(const std::string& b) const {
  auto it = std::lower_bound(boxes.begin(), boxes.end(), b,
                             [](const BoxDecl& d, const std::string& s) { return d.name < s; });
  if (it == boxes.end() || it->name != b) return -1;
  return static_cast<int>(it - boxes.begin());
}

bool Component::is_entry(int node) const {
  return std::find(entries.begin(), entries.end(), node) != entries.end();
}
bool Component::is_exit(int node) const {
  return std::find(exits.begin(), exits.end(), node) != exits.end();
}
int Component::exit_pos(int node) const {
  auto it = std::find(exits.begin(), exits.end(), node);
  return it == exits.end() ? -1 : static_cast<int>(it - exits.begin());
}

int Component::call_port(int box, int entry_pos) const { return box_base[box] + entry_pos; }

int Component::return_port(int box, int exit_pos) const {
  const Vertex& first = vertices[box_base[box]];
  (void)first;
  // Return ports follow the box's call ports.
  int n_entries = 0;
  for (int v = box_base[box]; v < static_cast<int>(vertices.size()); ++v) {
    if (vertices[v].box != box || vertices[v].kind != VertexKind::CallPort) break;
    ++n_entries;
  }
  return box_base[box] + n_entries + exit_pos;
}

const TransitionRow* Component::row(int vid, int action) const {
  for (const auto& r : rows[vid])
    if (r.action == action) return &r;
  return nullptr;
}

int Rmdp::component_index(const std::string& name) const {
  for (int i = 0; i < static_cast<int>(components.size()); ++i)
    if (components[i].name == name) return i;
  return -1;
}

std::string Rmdp::vertex_name(int comp, int vid) const {
  const Component& c = components[comp];
  const Vertex& v = c.vertices[vid];
  if (v.kind == VertexKind::Node) return c.nodes[v.node];
  const Component& callee = components[c.boxes[v.box].callee];
  int node = v.kind == VertexKind::CallPort ? callee.entries[v.port] : callee.exits[v.port];
  return c.boxes[v.box].name + "." + callee.nodes[node];
}

std::optional<int> Rmdp::vertex_by_name(int comp, const std::string& name) const {
  const Component& c = components[comp];
  auto dot = name.find('.');
  if (dot == std::string::npos) {
    int n = c.node_index(name);
    if (n < 0) return std::nullopt;
    return n;  // nodes occupy the first vids
  }
  int b = c.box_index(name.substr(0, dot));
  if (b < 0) return std::nullopt;
  const Component& callee = components[c.boxes[b].callee];
  int n = callee.node_index(name.substr(dot + 1));
  if (n < 0) return std::nullopt;
  for (std::size_t pos = 0; pos < callee.entries.size(); ++pos)
    if (callee.entries[pos] == n) return c.call_port(b, static_cast<int>(pos));
  for (std::size_t pos = 0; pos < callee.exits.size(); ++pos)
    if (callee.exits[pos] == n) return c.return_port(b, static_cast<int>(pos));
  return std::nullopt;
}

std::vector<Diagnostic> validate(const Rmdp& m) {
  std::vector<Diagnostic> out;
  auto diag = [&](std::string rule, const std::string& comp, std::string vertex, std::string msg) {
    out.push_back({std::move(rule), comp, std::move(vertex), std::move(msg), 0});
  };

  // Node and box names must not repeat across components.
  std::map<std::string, std::string> node_owner, box_owner;
  for (const auto& c : m.components) {
    for (const auto& n : c.nodes) {
      auto [it, fresh] = node_owner.emplace(n, c.name);
      if (!fresh)
        diag("cross-component-name-clash", c.name, n, "node also declared in component " + it->second);
    }
    for (const auto& b : c.boxes) {
      auto [it, fresh] = box_owner.emplace(b.name, c.name);
      if (!fresh)
        diag("cross-component-name-clash", c.name, b.name, "box also declared in component " + it->second);
      if (b.callee < 0 || b.callee >= static_cast<int>(m.components.size()))
        diag("unknown-component", c.name, b.name, "box maps to an unknown component");
    }
  }

  for (int ci = 0; ci < static_cast<int>(m.components.size()); ++ci) {
    const Component& c = m.components[ci];
    for (int e : c.entries)
      if (c.is_exit(e))
        diag("entry-exit-overlap", c.name, c.nodes[e], "node is both an entry and an exit");

    for (int vid = 0; vid < static_cast<int>(c.vertices.size()); ++vid) {
      const Vertex& v = c.vertices[vid];
      const std::string vname = m.vertex_name(ci, vid);
      if (!c.rows[vid].empty()) {
        if (v.kind == VertexKind::CallPort)
          diag("source-is-call-port", c.name, vname, "call ports have the implicit push move only");
        if (v.kind == VertexKind::Node && c.is_exit(v.node))
          diag("source-in-exit", c.name, vname, "transition out of an exit node");
      }
      for (const auto& r : c.rows[vid]) {
        double sum = 0.0;
        for (const auto& [dst, p] : r.dests) {
          sum += p;
          if (p < -1e-12 || p > 1.0 + 1e-12)
            diag("probability-out-of-range", c.name, vname,
                 "p=" + std::to_string(p) + " under action " + c.actions[r.action]);
          const Vertex& dv = c.vertices[dst];
          if (dv.kind == VertexKind::ReturnPort)
            diag("dest-is-return-port", c.name, m.vertex_name(ci, dst),
                 "return ports are reached by the implicit pop move only");
          if (dv.kind == VertexKind::Node && c.is_entry(dv.node))
            diag("dest-is-entry", c.name, m.vertex_name(ci, dst),
                 "entry nodes are reached through call ports only");
        }
        if (std::abs(sum - 1.0) > 1e-12)
          diag("non-normalized", c.name, vname,
               "distribution under action " + c.actions[r.action] + " sums to " + std::to_string(sum));
      }
    }
  }
  return out;
}

double diameter(const Rmdp& m) {
  double r = 0.0;
  for (const auto& c : m.components)
    for (const auto& rows : c.rows)
      for (const auto& row : rows) r = std::max(r, std::abs(row.reward));
  return r;
}

bool is_single_exit(const Rmdp& m) {
  for (const auto& c : m.components)
    if (c.exits.size() != 1) return false;
  return true;
}

void ensure_valid(const Rmdp& m) {
  auto diags = validate(m);
  if (!diags.empty()) {
    const Diagnostic& d = diags.front();
    throw Error(ErrorCode::ModelInvalid, "invalid model: [" + d.rule + "] " + d.component + "/" +
                                             d.vertex + ": " + d.message);
  }
}

RmdpBuilder::RawComponent& RmdpBuilder::comp(const std::string& name) {
  for (auto& c : comps_)
    if (c.name == name) return c;
  comps_.push_back({});
  comps_.back().name = name;
  return comps_.back();
}

void RmdpBuilder::add_component(const std::string& name) { comp(name); }
void RmdpBuilder::add_action(const std::string& c, const std::string& a) { comp(c).actions.push_back(a); }
void RmdpBuilder::add_node(const std::string& c, const std::string& n) { comp(c).nodes.push_back(n); }
void RmdpBuilder::add_entry(const std::string& c, const std::string& n) { comp(c).entries.push_back(n); }
void RmdpBuilder::add_exit(const std::string& c, const std::string& n) { comp(c).exits.push_back(n); }
void RmdpBuilder::add_box(const std::string& c, const std::string& b, const std::string& callee) {
  comp(c).boxes.emplace_back(b, callee);
}
void RmdpBuilder::add_transition(const std::string& c, const VRef& src, const std::string& action,
                                 const VRef& dst, double p, int line) {
  comp(c).transitions.push_back({src, action, dst, p, line});
}
void RmdpBuilder::set_reward(const std::string& c, const VRef& src, const std::string& action,
                             double r) {
  comp(c).rewards.emplace_back(src, action, r);
}

Rmdp RmdpBuilder::build() const {
  Rmdp m;
  auto fail = [](int line, const std::string& msg) -> void {
    std::ostringstream os;
    if (line > 0) os << "line " << line << ": ";
    os << msg;
    throw Error(ErrorCode::Syntax, os.str());
  };

  // Pass 1: name tables.
  for (const auto& rc : comps_) {
    Component c;
    c.name = rc.name;
    std::set<std::string> nodes(rc.nodes.begin(), rc.nodes.end());
    nodes.insert(rc.entries.begin(), rc.entries.end());
    nodes.insert(rc.exits.begin(), rc.exits.end());
    std::set<std::string> actions(rc.actions.begin(), rc.actions.end());
    for (const auto& t : rc.transitions) {
      actions.insert(t.action);
      if (t.src.box.empty()) nodes.insert(t.src.node);
      if (t.dst.box.empty()) nodes.insert(t.dst.node);
    }
    for (const auto& [src, action, r] : rc.rewards) {
      actions.insert(action);
      if (src.box.empty()) nodes.insert(src.node);
    }
    c.nodes.assign(nodes.begin(), nodes.end());
    c.actions.assign(actions.begin(), actions.end());
    for (const auto& e : rc.entries) c.entries.push_back(c.node_index(e));
    for (const auto& e : rc.exits) c.exits.push_back(c.node_index(e));
    for (const auto& [b, callee] : rc.boxes) c.boxes.push_back({b, -1 /* resolved below */});
    std::sort(c.boxes.begin(), c.boxes.end(),
              [](const BoxDecl& a, const BoxDecl& b) { return a.name < b.name; });
    m.components.push_back(std::move(c));
  }

  // Resolve box callees.
  for (std::size_t ci = 0; ci < comps_.size(); ++ci) {
    for (const auto& [bname, callee] : comps_[ci].boxes) {
      int target = m.component_index(callee);
      if (target < 0) fail(0, "box " + bname + " maps to unknown component " + callee);
      m.components[ci].boxes[m.components[ci].box_index(bname)].callee = target;
    }
  }

  // Pass 2: vertex enumeration.
  for (auto& c : m.components) {
    for (int n = 0; n < static_cast<int>(c.nodes.size()); ++n)
      c.vertices.push_back({VertexKind::Node, n, -1, -1});
    for (int b = 0; b < static_cast<int>(c.boxes.size()); ++b) {
      c.box_base.push_back(static_cast<int>(c.vertices.size()));
      const Component& callee = m.components[c.boxes[b].callee];
      for (int pos = 0; pos < static_cast<int>(callee.entries.size()); ++pos)
        c.vertices.push_back({VertexKind::CallPort, -1, b, pos});
      for (int pos = 0; pos < static_cast<int>(callee.exits.size()); ++pos)
        c.vertices.push_back({VertexKind::ReturnPort, -1, b, pos});
    }
    c.rows.resize(c.vertices.size());
  }

  // Global box table.
  m.gbox_of.resize(m.components.size());
  for (int ci = 0; ci < static_cast<int>(m.components.size()); ++ci) {
    m.gbox_of[ci].resize(m.components[ci].boxes.size());
    for (int b = 0; b < static_cast<int>(m.components[ci].boxes.size()); ++b) {
      m.gbox_of[ci][b] = static_cast<int>(m.gboxes.size());
      m.gboxes.push_back({ci, b, m.components[ci].boxes[b].callee});
    }
  }

  // Pass 3: transitions and rewards.
  for (std::size_t ci = 0; ci < comps_.size(); ++ci) {
    const RawComponent& rc = comps_[ci];
    Component& c = m.components[ci];
    auto resolve = [&](const VRef& ref, int line) -> int {
      std::string name = ref.box.empty() ? ref.node : ref.box + "." + ref.node;
      auto vid = m.vertex_by_name(static_cast<int>(ci), name);
      if (!vid) fail(line, "unknown vertex " + name + " in component " + c.name);
      return *vid;
    };

    std::map<std::pair<int, int>, TransitionRow> grouped;
    for (const auto& t : rc.transitions) {
      int src = resolve(t.src, t.line);
      int dst = resolve(t.dst, t.line);
      int a = c.action_index(t.action);
      auto& row = grouped[{src, a}];
      row.action = a;
      for (const auto& [d, p] : row.dests)
        if (d == dst) fail(t.line, "duplicate transition to " + m.vertex_name(ci, dst));
      row.dests.emplace_back(dst, t.p);
    }
    for (const auto& [src, action, r] : rc.rewards) {
      int s = resolve(src, 0);
      int a = c.action_index(action);
      auto it = grouped.find({s, a});
      if (it == grouped.end())
        fail(0, "reward for " + m.vertex_name(ci, s) + " without a matching transition");
      it->second.reward = r;
    }
    for (auto& [key, row] : grouped) {
      std::sort(row.dests.begin(), row.dests.end());
      c.rows[key.first].push_back(std::move(row));
    }
    for (auto& rows : c.rows)
      std::sort(rows.begin(), rows.end(),
                [](const TransitionRow& a, const TransitionRow& b) { return a.action < b.action; });
  }

  return m;
}

}  // namespace rmdp
