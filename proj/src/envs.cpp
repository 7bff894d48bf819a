#include "rmdp/envs.hpp"

#include <stdexcept>
#include <string>
#include <vector>

#include "rmdp/error.hpp"

namespace rmdp::envs {

// ---------------------------------------------------------------------------
// Cloud computing
// ---------------------------------------------------------------------------

Rmdp cloud_rmdp() {
  RmdpBuilder b;

  b.add_component("T");
  b.add_entry("T", "u1");
  b.add_exit("T", "u2");
  b.add_box("T", "b1", "S");
  b.add_box("T", "b2", "S");
  b.add_box("T", "b3", "S");
  b.add_transition("T", VRef::n("u1"), "d", VRef::port("b1", "u3"));
  b.set_reward("T", VRef::n("u1"), "d", -0.5);
  b.add_transition("T", VRef::n("u1"), "m", VRef::n("u2"));
  b.set_reward("T", VRef::n("u1"), "m", -8.0);
  b.add_transition("T", VRef::port("b1", "u4"), "c", VRef::port("b2", "u3"));
  b.add_transition("T", VRef::port("b2", "u4"), "c", VRef::port("b3", "u3"));
  b.add_transition("T", VRef::port("b3", "u4"), "c", VRef::n("u2"));
  b.set_reward("T", VRef::port("b3", "u4"), "c", -0.5);

  b.add_component("S");
  b.add_entry("S", "u3");
  b.add_exit("S", "u4");
  b.add_box("S", "b4", "H");
  b.add_box("S", "b5", "S");
  b.add_transition("S", VRef::n("u3"), "r", VRef::port("b4", "u5"), 0.3);
  b.add_transition("S", VRef::n("u3"), "r", VRef::n("u4"), 0.7);
  b.set_reward("S", VRef::n("u3"), "r", -1.5);
  b.add_transition("S", VRef::n("u3"), "f", VRef::port("b5", "u3"), 0.4);
  b.add_transition("S", VRef::n("u3"), "f", VRef::n("u4"), 0.6);
  b.set_reward("S", VRef::n("u3"), "f", -1.0);
  b.add_transition("S", VRef::port("b4", "u6"), "c", VRef::n("u4"));
  b.set_reward("S", VRef::port("b4", "u6"), "c", 0.2);
  b.add_transition("S", VRef::port("b4", "u7"), "c", VRef::n("u4"));
  b.set_reward("S", VRef::port("b4", "u7"), "c", 0.2);
  b.add_transition("S", VRef::port("b5", "u4"), "c", VRef::n("u4"));

  b.add_component("H");
  b.add_entry("H", "u5");
  b.add_exit("H", "u6");
  b.add_exit("H", "u7");
  b.add_box("H", "b6", "H");
  b.add_box("H", "b7", "H");
  b.add_transition("H", VRef::n("u5"), "n", VRef::port("b6", "u5"), 0.3);
  b.add_transition("H", VRef::n("u5"), "n", VRef::n("u6"), 0.7);
  b.set_reward("H", VRef::n("u5"), "n", -0.01);
  b.add_transition("H", VRef::n("u5"), "y", VRef::n("u7"));
  b.set_reward("H", VRef::n("u5"), "y", -0.2);
  b.add_transition("H", VRef::port("b6", "u6"), "c", VRef::port("b7", "u5"));
  b.add_transition("H", VRef::port("b6", "u7"), "c", VRef::port("b7", "u5"));
  b.add_transition("H", VRef::port("b7", "u6"), "c", VRef::n("u6"));
  b.add_transition("H", VRef::port("b7", "u7"), "c", VRef::n("u7"));

  return b.build();
}

EnvSpec cloud_spec() {
  EnvSpec s;
  s.name = "cloud";
  s.model = cloud_rmdp();
  s.start_comp = s.model.component_index("T");
  s.start_entry = s.model.components[s.start_comp].entries[0];
  s.hyper.alpha = 0.02;
  s.hyper.alpha_power = 0.0;
  s.hyper.eps_initial = 0.1;
  s.hyper.eps_final = 0.1;
  s.hyper.quant = 0.001;
  s.hyper.step_cap = 500;
  s.hyper.total_steps = 200000;
  s.hyper.eval_episodes = 100;
  s.hyper.start_comp = s.start_comp;
  s.hyper.start_entry = s.start_entry;
  s.notes = "tasks offloaded to a recursive server/handler hierarchy";
  return s;
}

// ---------------------------------------------------------------------------
// Spelunking
// ---------------------------------------------------------------------------

namespace {

struct Level {
  int w = 0, h = 0;
  std::vector<bool> trap;
  int gear = -1;  // cell index of 'E', or -1
  int fall_in = -1;
};

Level parse_level(const std::vector<std::string>& rows) {
  if (rows.empty()) throw Error(ErrorCode::InvalidArgument, "layout must have rows");
  Level lv;
  lv.h = static_cast<int>(rows.size());
  lv.w = static_cast<int>(rows[0].size());
  lv.trap.assign(lv.w * lv.h, false);
  for (int y = 0; y < lv.h; ++y) {
    if ((int)rows[y].size() != lv.w)
      throw Error(ErrorCode::InvalidArgument, "layout rows must have equal width");
    for (int x = 0; x < lv.w; ++x) {
      int c = y * lv.w + x;
      switch (rows[y][x]) {
        case '.': break;
        case 'T': lv.trap[c] = true; break;
        case 'E': lv.gear = c; break;
        case 'I': lv.fall_in = c; break;
        default: throw Error(ErrorCode::InvalidArgument, "bad layout character");
      }
    }
  }
  return lv;
}

int grid_move(int c, int dir, int w, int h) {
  int x = c % w, y = c / w;
  switch (dir) {
    case 0: y = y > 0 ? y - 1 : y; break;          // n
    case 1: x = x < w - 1 ? x + 1 : x; break;      // e
    case 2: y = y < h - 1 ? y + 1 : y; break;      // s
    default: x = x > 0 ? x - 1 : x; break;         // w
  }
  return y * w + x;
}

const char* kDirs[4] = {"n", "e", "s", "w"};

std::string cave_node(int type, int c, int f, int g) {
  return "n" + std::to_string(type) + "_" + std::to_string(c) + "_" + std::to_string(f) + "_" +
         std::to_string(g);
}
std::string cave_entry(int type, int f, int g) {
  return "e" + std::to_string(type) + "_" + std::to_string(f) + "_" + std::to_string(g);
}
std::string cave_box(int type, int c, int f) {
  return "d" + std::to_string(type) + "_" + std::to_string(c) + "_" + std::to_string(f);
}

}  // namespace

SpelunkLayout parse_spelunk_layout(const std::string& text) {
  SpelunkLayout l;
  std::vector<std::string>* cur = &l.type1;
  size_t pos = 0;
  while (pos <= text.size()) {
    size_t nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    std::string line = text.substr(pos, nl - pos);
    pos = nl + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty() && line[0] == '#') continue;
    if (line.empty()) {
      if (!cur->empty() && cur == &l.type1) cur = &l.type2;
      if (pos > text.size()) break;
      continue;
    }
    cur->push_back(line);
    if (pos > text.size()) break;
  }
  if (l.type1.empty() || l.type2.empty())
    throw Error(ErrorCode::Syntax, "layout needs two blank-line separated blocks");
  return l;
}

SpelunkLayout default_spelunk_layout() {
  SpelunkLayout l;
  l.type1 = {
      "I...",
      "TTT.",
      "....",
      "....",
  };
  l.type2 = {
      "....",
      "TTT.",
      "E...",
      "....",
  };
  return l;
}

Rmdp spelunking_rmdp(double trap_p, double ascend_p, const SpelunkLayout& layout) {
  Level levels[2] = {parse_level(layout.type1), parse_level(layout.type2)};
  if (levels[0].fall_in < 0)
    throw Error(ErrorCode::InvalidArgument, "type-1 layout needs a fall-in cell 'I'");
  if (levels[1].gear < 0)
    throw Error(ErrorCode::InvalidArgument, "type-2 layout needs a gear cell 'E'");
  if (levels[0].w != levels[1].w || levels[0].h != levels[1].h)
    throw Error(ErrorCode::InvalidArgument, "both layouts must share the same dimensions");
  const int cells = levels[0].w * levels[0].h;

  RmdpBuilder b;
  const char* comp_name[2] = {"L1", "L2"};
  for (int t = 0; t < 2; ++t) {
    b.add_component(comp_name[t]);
    b.add_exit(comp_name[t], "up" + std::to_string(t + 1));
    for (int f = 0; f < cells; ++f)
      for (int g = 0; g < 2; ++g) b.add_entry(comp_name[t], cave_entry(t + 1, f, g));
    for (int c = 0; c < cells; ++c)
      for (int f = 0; f < cells; ++f) b.add_box(comp_name[t], cave_box(t + 1, c, f), comp_name[1 - t]);
  }

  for (int t = 0; t < 2; ++t) {
    const std::string comp = comp_name[t];
    const Level& lv = levels[t];
    const Level& other = levels[1 - t];
    const std::string exit_name = "up" + std::to_string(t + 1);
    // Entry gear flag on the far side of a descent or fall; picking the gear
    // cell as landing spot grabs the gear.
    auto land_gear = [&](int cell, int g) { return (g || cell == other.gear) ? 1 : 0; };

    // Emit the action rows of state (c, f, g) with source name `src`.
    auto emit_rows = [&](const std::string& src, int c, int f, int g) {
      double keep = g ? 1.0 - ascend_p : 1.0;
      for (int dir = 0; dir < 4; ++dir) {
        const std::string act = kDirs[dir];
        int dst = grid_move(c, dir, lv.w, lv.h);
        if (g)
          b.add_transition(comp, VRef::n(src), act, VRef::n(exit_name), ascend_p);
        if (!g && lv.trap[dst]) {
          // Stepping on a trap: teleport to a uniform cell and fall through.
          b.add_transition(comp, VRef::n(src), act, VRef::n(cave_node(t + 1, dst, f, 0)),
                           1.0 - trap_p);
          for (int r = 0; r < cells; ++r)
            b.add_transition(
                comp, VRef::n(src), act,
                VRef::port(cave_box(t + 1, r, f), cave_entry(2 - t, r, land_gear(r, 0))),
                trap_p / cells);
        } else {
          int g2 = (g || dst == lv.gear) ? 1 : 0;
          b.add_transition(comp, VRef::n(src), act, VRef::n(cave_node(t + 1, dst, f, g2)), keep);
        }
        b.set_reward(comp, VRef::n(src), act, -1.0);
      }
      // Vertical action: ascend at the fall-in cell with gear, else descend.
      if (g && c == f) {
        b.add_transition(comp, VRef::n(src), "v", VRef::n(exit_name));
      } else {
        if (g)
          b.add_transition(comp, VRef::n(src), "v", VRef::n(exit_name), ascend_p);
        b.add_transition(comp, VRef::n(src), "v",
                         VRef::port(cave_box(t + 1, c, f), cave_entry(2 - t, c, land_gear(c, g))),
                         keep);
      }
      b.set_reward(comp, VRef::n(src), "v", -1.0);
    };

    for (int c = 0; c < cells; ++c)
      for (int f = 0; f < cells; ++f)
        for (int g = 0; g < 2; ++g) emit_rows(cave_node(t + 1, c, f, g), c, f, g);
    for (int f = 0; f < cells; ++f)
      for (int g = 0; g < 2; ++g) emit_rows(cave_entry(t + 1, f, g), f, f, g);

    // Returning from a lower level means the gear was found down there.
    const std::string sub_exit = "up" + std::to_string(2 - t);
    for (int c = 0; c < cells; ++c)
      for (int f = 0; f < cells; ++f)
        b.add_transition(comp, VRef::port(cave_box(t + 1, c, f), sub_exit), "v",
                         VRef::n(cave_node(t + 1, c, f, 1)));
  }

  return b.build();
}

EnvSpec spelunking_spec() {
  EnvSpec s;
  s.name = "spelunking";
  s.model = spelunking_rmdp(0.5, 0.01, default_spelunk_layout());
  s.start_comp = s.model.component_index("L1");
  Level l1 = parse_level(default_spelunk_layout().type1);
  const Component& comp = s.model.components[s.start_comp];
  s.start_entry = comp.node_index(cave_entry(1, l1.fall_in, 0));
  s.hyper.alpha = 0.2;
  s.hyper.alpha_power = 0.0;
  s.hyper.eps_initial = 0.1;
  s.hyper.eps_final = 0.1;
  s.hyper.lambda = 1.0;
  s.hyper.step_cap = 400;
  s.hyper.total_steps = 500000;
  s.hyper.eval_episodes = 100;
  s.hyper.include_truncated_eval = true;
  s.hyper.start_comp = s.start_comp;
  s.hyper.start_entry = s.start_entry;
  s.notes = "recover from an endless cave; gear sits behind a trap field";
  return s;
}

// ---------------------------------------------------------------------------
// Palindrome
// ---------------------------------------------------------------------------

namespace {
constexpr int kGw = 3, kGh = 3;
}

PalindromeParts palindrome_parts() {
  PalindromeParts p;

  RmdpBuilder b;
  b.add_component("G");
  b.add_entry("G", "st");
  for (int c = 0; c < kGw * kGh; ++c) b.add_node("G", "c" + std::to_string(c));
  for (int c = 0; c < kGw * kGh; ++c)
    b.add_transition("G", VRef::n("st"), "go", VRef::n("c" + std::to_string(c)),
                     1.0 / (kGw * kGh));
  for (int c = 0; c < kGw * kGh; ++c)
    for (int dir = 0; dir < 4; ++dir)
      b.add_transition("G", VRef::n("c" + std::to_string(c)), kDirs[dir],
                       VRef::n("c" + std::to_string(grid_move(c, dir, kGw, kGh))));
  p.grid = b.build();

  transforms::Pda& pda = p.pda;
  pda.states = {"PUSH", "POP"};
  pda.initial = 0;
  pda.accepting = {1};
  pda.stack_symbols = {"n", "e", "s", "w"};
  pda.special = "sp";
  for (int a = 0; a < 4; ++a) {
    for (int top = -1; top < 4; ++top) {
      pda.delta[{0, kDirs[a], top}] = {0, transforms::Pda::Op::Push, a};
      if (top == a) pda.delta[{1, kDirs[a], top}] = {1, transforms::Pda::Op::Pop, -1};
    }
  }
  for (int top = -1; top < 4; ++top)
    pda.delta[{0, "sp", top}] = {1, transforms::Pda::Op::Stay, -1};

  p.rewards = {50.0, -5.0, -1.0};
  p.corruption = 0.01;
  p.success = {p.grid.components[0].node_index("c4")};
  return p;
}

Rmdp palindrome_env() {
  PalindromeParts p = palindrome_parts();
  return transforms::pda_product(p.grid, p.pda, p.rewards, p.corruption, p.success);
}

EnvSpec palindrome_spec() {
  EnvSpec s;
  s.name = "palindrome";
  s.model = palindrome_env();
  s.start_comp = 0;
  s.start_entry = s.model.components[0].entries[0];
  s.hyper.alpha = 0.1;
  s.hyper.alpha_power = 0.0;
  s.hyper.eps_initial = 1.0;
  s.hyper.eps_final = 0.1;
  s.hyper.eps_decay_steps = 3000000;
  s.hyper.quant = 10.0;
  s.hyper.step_cap = 200;
  s.hyper.total_steps = 10000000;
  s.hyper.eval_episodes = 100;
  s.hyper.include_truncated_eval = true;
  s.hyper.start_comp = s.start_comp;
  s.hyper.start_entry = s.start_entry;
  s.notes = "navigate a 3x3 grid while the move log must read as a palindrome";
  return s;
}

}  // namespace rmdp::envs
