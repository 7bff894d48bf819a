#include "rmdp/text_format.hpp"

#include <cctype>
#include <charconv>
#include <sstream>

namespace rmdp::text {

namespace {

[[noreturn]] void fail(int line, const std::string& msg) {
  std::ostringstream os;
  os << "line " << line << ": " << msg;
  throw Error(ErrorCode::Syntax, os.str());
}

struct Cursor {
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
      if (std::isspace(static_cast<unsigned char>(peek()))) {
        advance();
      } else if (peek() == '#') {
        while (!eof() && peek() != '\n') advance();
      } else {
        break;
      }
    }
  }
  bool try_consume(const std::string& tok) {
    skip_ws();
    if (s.compare(i, tok.size(), tok) != 0) return false;
    // Keywords must not swallow identifier prefixes ("box" vs node "boxy").
    if (std::isalpha(static_cast<unsigned char>(tok[0])) && i + tok.size() < s.size()) {
      char next = s[i + tok.size()];
      if (std::isalnum(static_cast<unsigned char>(next)) || next == '_' || next == '\'')
        return false;
    }
    for (std::size_t k = 0; k < tok.size(); ++k) advance();
    return true;
  }
  void expect(const std::string& tok, const std::string& what) {
    if (!try_consume(tok)) fail(line, "expected " + what);
  }
  std::string ident(const std::string& what) {
    skip_ws();
    std::size_t start = i;
    while (!eof() &&
           (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == '\''))
      advance();
    if (i == start) fail(line, "expected " + what);
    return s.substr(start, i - start);
  }
  double number() {
    skip_ws();
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data() + i, s.data() + s.size(), v);
    if (ec != std::errc{}) fail(line, "expected a number");
    i = static_cast<std::size_t>(p - s.data());
    return v;
  }
};

// "en" or "b1.en" with line-local splitting.
VRef vref(Cursor& c, const std::string& what) {
  std::string first = c.ident(what);
  if (!c.eof() && c.peek() == '.') {
    c.advance();
    return VRef::port(first, c.ident("port node after '.'"));
  }
  return VRef::n(first);
}

void parse_transition(Cursor& c, RmdpBuilder& b, const std::string& comp, const VRef& src) {
  int line = c.line;
  c.expect("--", "'--' after transition source");
  std::string action = c.ident("action name");
  bool have_p = false, have_r = false;
  double p = 1.0, r = 0.0;
  while (c.try_consume(",")) {
    if (c.try_consume("p")) {
      c.expect("=", "'=' after p");
      if (have_p) fail(c.line, "duplicate p=");
      p = c.number();
      have_p = true;
    } else if (c.try_consume("r")) {
      c.expect("=", "'=' after r");
      if (have_r) fail(c.line, "duplicate r=");
      r = c.number();
      have_r = true;
    } else {
      fail(c.line, "expected p= or r=");
    }
  }
  c.expect("-->", "'-->' before destination");
  VRef dst = vref(c, "destination vertex");
  c.expect(";", "';' after transition");
  b.add_transition(comp, src, action, dst, p, line);
  if (have_r) b.set_reward(comp, src, action, r);
}

void parse_component(Cursor& c, RmdpBuilder& b) {
  std::string name = c.ident("component name");
  b.add_component(name);
  c.expect("{", "'{' after component name");
  while (true) {
    c.skip_ws();
    if (c.try_consume("}")) return;
    if (c.eof()) fail(c.line, "unterminated component block");
    if (c.try_consume("actions")) {
      while (!c.try_consume(";")) b.add_action(name, c.ident("action name"));
    } else if (c.try_consume("nodes")) {
      while (!c.try_consume(";")) b.add_node(name, c.ident("node name"));
    } else if (c.try_consume("entries")) {
      while (!c.try_consume(";")) b.add_entry(name, c.ident("entry node"));
    } else if (c.try_consume("exits")) {
      while (!c.try_consume(";")) b.add_exit(name, c.ident("exit node"));
    } else if (c.try_consume("box")) {
      std::string box = c.ident("box name");
      c.expect(":", "':' after box name");
      b.add_box(name, box, c.ident("callee component"));
      c.expect(";", "';' after box declaration");
    } else {
      parse_transition(c, b, name, vref(c, "declaration or transition source"));
    }
  }
}

std::string fmt(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, p);
}

}  // namespace

Rmdp parse(const std::string& text) {
  Cursor c{text};
  c.skip_ws();
  if (c.eof()) fail(c.line, "missing header 'rmdp 1'");
  c.expect("rmdp", "header 'rmdp 1'");
  if (c.number() != 1.0) fail(c.line, "unsupported format version");
  RmdpBuilder b;
  while (true) {
    c.skip_ws();
    if (c.eof()) break;
    c.expect("component", "'component'");
    parse_component(c, b);
  }
  Rmdp m = b.build();
  ensure_valid(m);
  return m;
}

std::string serialize(const Rmdp& m) {
  std::ostringstream os;
  os << "rmdp 1\n";
  for (const Component& c : m.components) {
    os << "\ncomponent " << c.name << " {\n";
    if (!c.actions.empty()) {
      os << "  actions";
      for (const auto& a : c.actions) os << ' ' << a;
      os << ";\n";
    }
    if (!c.nodes.empty()) {
      os << "  nodes";
      for (const auto& n : c.nodes) os << ' ' << n;
      os << ";\n";
    }
    if (!c.entries.empty()) {
      os << "  entries";
      for (int e : c.entries) os << ' ' << c.nodes[e];
      os << ";\n";
    }
    if (!c.exits.empty()) {
      os << "  exits";
      for (int e : c.exits) os << ' ' << c.nodes[e];
      os << ";\n";
    }
    for (const auto& b : c.boxes)
      os << "  box " << b.name << " : " << m.components[b.callee].name << ";\n";
    int ci = static_cast<int>(&c - m.components.data());
    for (int vid = 0; vid < static_cast<int>(c.vertices.size()); ++vid) {
      for (const TransitionRow& row : c.rows[vid]) {
        bool first = true;
        for (const auto& [dst, p] : row.dests) {
          os << "  " << m.vertex_name(ci, vid) << " --" << c.actions[row.action];
          if (p != 1.0) os << ", p=" << fmt(p);
          if (first && row.reward != 0.0) os << ", r=" << fmt(row.reward);
          os << "--> " << m.vertex_name(ci, dst) << ";\n";
          first = false;
        }
      }
    }
    os << "}\n";
  }
  return os.str();
}

}  // namespace rmdp::text
