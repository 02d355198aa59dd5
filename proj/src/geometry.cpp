#include "antcode/geometry.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "antcode/codec.hpp"

namespace antcode {

Expr Expr::binary(Kind k, Expr lhs, Expr rhs) {
  Expr e;
  e.kind = k;
  e.operands.push_back(std::move(lhs));
  e.operands.push_back(std::move(rhs));
  return e;
}

Expr Expr::negate(Expr operand) {
  Expr e;
  e.kind = Kind::neg;
  e.operands.push_back(std::move(operand));
  return e;
}

static std::string with_position(const std::string& message, std::size_t line, std::size_t column) {
  return "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + message;
}

ParseError::ParseError(const std::string& message, std::size_t line, std::size_t column)
    : std::runtime_error(with_position(message, line, column)), line_(line), column_(column) {}

EvalError::EvalError(const std::string& message, std::size_t statement)
    : std::runtime_error("statement " + std::to_string(statement) + ": " + message),
      statement_(statement) {}

// ===================================================================== parse

namespace {

bool valid_identifier(std::string_view s) {
  if (s.empty()) return false;
  auto head = [](char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; };
  auto tail = [&](char c) { return head(c) || std::isdigit(static_cast<unsigned char>(c)); };
  return head(s[0]) && std::all_of(s.begin() + 1, s.end(), tail);
}

class Parser {
 public:
  explicit Parser(std::string_view code) : toks_(lex(code)) {}

  Ast run() {
    Ast ast;
    while (pos_ < toks_.size()) {
      if (toks_[pos_].text == kNewlineToken) {
        ++pos_;
        continue;
      }
      const std::size_t line = toks_[pos_].line;
      ast.statements.push_back(statement());
      ast.lines.push_back(line);
      if (!at_line_end()) {
        const Lexeme& t = toks_[pos_];
        fail_at(t, "arity mismatch: unexpected token '" + t.text + "' after " + command_ +
                       " statement");
      }
    }
    return ast;
  }

 private:
  [[noreturn]] void fail_at(const Lexeme& t, const std::string& msg) const {
    throw ParseError(msg, t.line, t.column);
  }
  [[noreturn]] void fail_here(const std::string& msg) const {
    if (pos_ < toks_.size()) fail_at(toks_[pos_], msg);
    if (toks_.empty()) throw ParseError(msg, 1, 1);
    const Lexeme& last = toks_.back();
    throw ParseError(msg, last.line, last.column + last.text.size());
  }

  bool at_line_end() const { return pos_ >= toks_.size() || toks_[pos_].text == kNewlineToken; }
  const Lexeme& peek() const { return toks_[pos_]; }
  bool peek_is(std::string_view s) const { return !at_line_end() && peek().text == s; }

  void check_lexeme(const Lexeme& t) const {
    const std::string& s = t.text;
    if (s == "\"" || s == ",") return;
    if (s.size() == 1 && std::string_view("()=+-*/").find(s[0]) != std::string_view::npos) return;
    if (is_number_token(s) || valid_identifier(s)) return;
    fail_at(t, "lexical error: invalid token '" + s + "'");
  }

  const Lexeme& take(const char* expected) {
    if (at_line_end()) fail_here(std::string("arity mismatch: expected ") + expected);
    check_lexeme(peek());
    return toks_[pos_++];
  }

  std::string identifier(const char* what) {
    const Lexeme& t = take(what);
    if (!valid_identifier(t.text)) fail_at(t, std::string("expected ") + what + ", got '" + t.text + "'");
    return t.text;
  }

  void keyword(std::string_view kw) {
    const Lexeme& t = take(std::string(kw).c_str());
    if (t.text != kw) fail_at(t, "expected '" + std::string(kw) + "', got '" + t.text + "'");
  }

  double number_literal(const Lexeme& t) const {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
    if (ec != std::errc() || ptr != t.text.data() + t.text.size()) {
      fail_at(t, "lexical error: bad numeric literal '" + t.text + "'");
    }
    return v;
  }

  Statement statement() {
    const Lexeme& head = take("a command");
    command_ = head.text;
    if (head.text == "use") {
      keyword("template");
      return UseTemplate{identifier("template name")};
    }
    if (head.text == "define") {
      keyword("material");
      DefineMaterial m;
      m.name = identifier("material name");
      const Lexeme& eps = take("relative permittivity");
      if (!is_number_token(eps.text)) fail_at(eps, "expected permittivity literal, got '" + eps.text + "'");
      m.epsilon_r = number_literal(eps);
      return m;
    }
    if (head.text == "param") {
      ParamDef p;
      p.name = identifier("parameter name");
      keyword("=");
      p.value = expr();
      return p;
    }
    if (head.text == "brick") {
      BrickDef b;
      b.name = identifier("solid name");
      b.material = identifier("material name");
      Expr* args[] = {&b.x1, &b.x2, &b.y1, &b.y2, &b.z1, &b.z2};
      arguments(args);
      return b;
    }
    if (head.text == "cylinder") {
      CylinderDef c;
      c.name = identifier("solid name");
      c.material = identifier("material name");
      const Lexeme& ax = take("axis");
      if (ax.text == "x") c.axis = Axis::x;
      else if (ax.text == "y") c.axis = Axis::y;
      else if (ax.text == "z") c.axis = Axis::z;
      else fail_at(ax, "expected axis x, y or z, got '" + ax.text + "'");
      Expr* args[] = {&c.u, &c.v, &c.radius, &c.h1, &c.h2};
      arguments(args);
      return c;
    }
    if (head.text == "feed") {
      FeedDef f;
      Expr* args[] = {&f.x, &f.y, &f.z};
      arguments(args);
      return f;
    }
    fail_at(head, "unknown command '" + head.text + "'");
  }

  template <std::size_t N>
  void arguments(Expr* (&slots)[N]) {
    for (std::size_t i = 0; i < N; ++i) {
      if (at_line_end()) {
        fail_here("arity mismatch: " + command_ + " expects " + std::to_string(N) +
                  " arguments, got " + std::to_string(i));
      }
      *slots[i] = argument();
    }
  }

  // Whitespace-separated argument: a literal, a name, a parenthesised
  // expression, or a negated argument.
  Expr argument() {
    if (peek_is("-")) {
      take("-");
      return Expr::negate(argument());
    }
    return primary();
  }

  Expr primary() {
    const Lexeme& t = take("an expression");
    if (t.text == "(") {
      Expr e = expr();
      if (!peek_is(")")) fail_here("malformed expression: expected ')'");
      ++pos_;
      return e;
    }
    if (is_number_token(t.text)) return Expr::number(number_literal(t));
    if (valid_identifier(t.text)) return Expr::ref(t.text);
    fail_at(t, "malformed expression: unexpected '" + t.text + "'");
  }

  Expr unary() {
    if (peek_is("-")) {
      take("-");
      return Expr::negate(unary());
    }
    return primary();
  }

  Expr term() {
    Expr lhs = unary();
    while (peek_is("*") || peek_is("/")) {
      const auto kind = take("operator").text == "*" ? Expr::Kind::mul : Expr::Kind::div;
      lhs = Expr::binary(kind, std::move(lhs), unary());
    }
    return lhs;
  }

  Expr expr() {
    Expr lhs = term();
    while (peek_is("+") || peek_is("-")) {
      const auto kind = take("operator").text == "+" ? Expr::Kind::add : Expr::Kind::sub;
      lhs = Expr::binary(kind, std::move(lhs), term());
    }
    return lhs;
  }

  std::vector<Lexeme> toks_;
  std::size_t pos_ = 0;
  std::string command_;
};

}  // namespace

Ast parse(std::string_view code) { return Parser(code).run(); }

// ===================================================================== print

std::string format_number(double v) {
  if (v == 0.0) v = 0.0;  // drop the sign of -0
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

namespace {

int precedence(const Expr& e) {
  switch (e.kind) {
    case Expr::Kind::add:
    case Expr::Kind::sub:
      return 1;
    case Expr::Kind::mul:
    case Expr::Kind::div:
      return 2;
    case Expr::Kind::neg:
      return 3;
    case Expr::Kind::number:
      return e.value < 0 ? 3 : 4;
    case Expr::Kind::name:
      return 4;
  }
  return 4;
}

std::string print_expr(const Expr& e, int context) {
  std::string s;
  const int prec = precedence(e);
  switch (e.kind) {
    case Expr::Kind::number:
      s = format_number(e.value);
      break;
    case Expr::Kind::name:
      s = e.name;
      break;
    case Expr::Kind::neg:
      s = "-" + print_expr(e.operands[0], 3);
      break;
    default: {
      const char* op = e.kind == Expr::Kind::add   ? " + "
                       : e.kind == Expr::Kind::sub ? " - "
                       : e.kind == Expr::Kind::mul ? " * "
                                                   : " / ";
      s = print_expr(e.operands[0], prec) + op + print_expr(e.operands[1], prec + 1);
    }
  }
  return prec < context ? "(" + s + ")" : s;
}

std::string print_arg(const Expr& e) { return print_expr(e, 4); }

const char* axis_name(Axis a) { return a == Axis::x ? "x" : a == Axis::y ? "y" : "z"; }

struct StatementPrinter {
  std::string operator()(const UseTemplate& s) const { return "use template " + s.name; }
  std::string operator()(const DefineMaterial& s) const {
    return "define material " + s.name + " " + format_number(s.epsilon_r);
  }
  std::string operator()(const ParamDef& s) const {
    return "param " + s.name + " = " + print_expr(s.value, 0);
  }
  std::string operator()(const BrickDef& s) const {
    std::string out = "brick " + s.name + " " + s.material;
    for (const Expr* e : {&s.x1, &s.x2, &s.y1, &s.y2, &s.z1, &s.z2}) out += " " + print_arg(*e);
    return out;
  }
  std::string operator()(const CylinderDef& s) const {
    std::string out = "cylinder " + s.name + " " + s.material + " " + axis_name(s.axis);
    for (const Expr* e : {&s.u, &s.v, &s.radius, &s.h1, &s.h2}) out += " " + print_arg(*e);
    return out;
  }
  std::string operator()(const FeedDef& s) const {
    return "feed " + print_arg(s.x) + " " + print_arg(s.y) + " " + print_arg(s.z);
  }
};

}  // namespace

std::string print(const Expr& expr) { return print_expr(expr, 0); }

std::string print(const Ast& ast) {
  std::string out;
  for (const Statement& s : ast.statements) {
    out += std::visit(StatementPrinter{}, s);
    out += '\n';
  }
  return out;
}

// ================================================================== evaluate

namespace {

class Evaluator {
 public:
  Scene run(const Ast& ast) {
    for (index_ = 0; index_ < ast.statements.size(); ++index_) {
      std::visit([this](const auto& s) { apply(s); }, ast.statements[index_]);
    }
    return std::move(scene_);
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { throw EvalError(msg, index_); }

  double eval(const Expr& e) const {
    double v = 0.0;
    switch (e.kind) {
      case Expr::Kind::number:
        v = e.value;
        break;
      case Expr::Kind::name: {
        auto it = params_.find(e.name);
        if (it == params_.end()) fail("undefined parameter '" + e.name + "'");
        v = it->second;
        break;
      }
      case Expr::Kind::neg:
        v = -eval(e.operands[0]);
        break;
      case Expr::Kind::add:
        v = eval(e.operands[0]) + eval(e.operands[1]);
        break;
      case Expr::Kind::sub:
        v = eval(e.operands[0]) - eval(e.operands[1]);
        break;
      case Expr::Kind::mul:
        v = eval(e.operands[0]) * eval(e.operands[1]);
        break;
      case Expr::Kind::div: {
        const double d = eval(e.operands[1]);
        if (d == 0.0) fail("division by zero");
        v = eval(e.operands[0]) / d;
        break;
      }
    }
    if (!std::isfinite(v)) fail("non-finite value");
    return v;
  }

  void require_material(const std::string& name) const {
    const bool known = std::any_of(scene_.materials.begin(), scene_.materials.end(),
                                   [&](const Material& m) { return m.name == name; });
    if (!known) fail("undefined material '" + name + "'");
  }

  void apply(const UseTemplate& s) { scene_.template_name = s.name; }

  void apply(const DefineMaterial& s) {
    for (const Material& m : scene_.materials) {
      if (m.name == s.name) fail("material '" + s.name + "' defined twice");
    }
    if (!(s.epsilon_r > 0.0)) fail("material '" + s.name + "' needs a positive permittivity");
    scene_.materials.push_back({s.name, s.epsilon_r});
  }

  void apply(const ParamDef& s) {
    if (params_.contains(s.name)) fail("parameter '" + s.name + "' defined twice");
    params_[s.name] = eval(s.value);
  }

  void apply(const BrickDef& s) {
    require_material(s.material);
    BrickGeom g{eval(s.x1), eval(s.x2), eval(s.y1), eval(s.y2), eval(s.z1), eval(s.z2)};
    if (!(g.x1 < g.x2) || !(g.y1 < g.y2) || !(g.z1 < g.z2)) {
      fail("inverted brick extent in '" + s.name + "'");
    }
    scene_.solids.push_back({s.name, s.material, g});
  }

  void apply(const CylinderDef& s) {
    require_material(s.material);
    CylinderGeom g{s.axis, eval(s.u), eval(s.v), eval(s.radius), eval(s.h1), eval(s.h2)};
    if (!(g.radius > 0.0)) fail("cylinder '" + s.name + "' needs a positive radius");
    if (!(g.h1 < g.h2)) fail("inverted cylinder extent in '" + s.name + "'");
    scene_.solids.push_back({s.name, s.material, g});
  }

  void apply(const FeedDef& s) {
    if (scene_.feed) fail("feed defined twice");
    scene_.feed = Point3{eval(s.x), eval(s.y), eval(s.z)};
  }

  Scene scene_;
  std::map<std::string, double> params_;
  std::size_t index_ = 0;
};

}  // namespace

Scene evaluate(const Ast& ast) { return Evaluator().run(ast); }

// ================================================================= geometry

namespace {

// Maps (axial, u, v) to (x, y, z) for a cylinder axis.
Point3 from_axis_frame(Axis axis, double along, double u, double v) {
  switch (axis) {
    case Axis::x:
      return {along, u, v};
    case Axis::y:
      return {u, along, v};
    case Axis::z:
      return {u, v, along};
  }
  return {};
}

}  // namespace

Box3 bounding_box(const Solid& s) {
  if (const auto* b = std::get_if<BrickGeom>(&s.geom)) {
    return {{b->x1, b->y1, b->z1}, {b->x2, b->y2, b->z2}};
  }
  const auto& c = std::get<CylinderGeom>(s.geom);
  return {from_axis_frame(c.axis, c.h1, c.u - c.radius, c.v - c.radius),
          from_axis_frame(c.axis, c.h2, c.u + c.radius, c.v + c.radius)};
}

bool contains(const Solid& s, const Point3& p) {
  if (const auto* b = std::get_if<BrickGeom>(&s.geom)) {
    return p.x >= b->x1 && p.x < b->x2 && p.y >= b->y1 && p.y < b->y2 && p.z >= b->z1 &&
           p.z < b->z2;
  }
  const auto& c = std::get<CylinderGeom>(s.geom);
  double along = 0, u = 0, v = 0;
  switch (c.axis) {
    case Axis::x:
      along = p.x, u = p.y, v = p.z;
      break;
    case Axis::y:
      along = p.y, u = p.x, v = p.z;
      break;
    case Axis::z:
      along = p.z, u = p.x, v = p.y;
      break;
  }
  const double du = u - c.u, dv = v - c.v;
  return along >= c.h1 && along < c.h2 && du * du + dv * dv < c.radius * c.radius;
}

bool same_geometry(const Solid& a, const Solid& b, double tol) {
  if (a.material != b.material || a.geom.index() != b.geom.index()) return false;
  auto near = [tol](double x, double y) { return std::abs(x - y) <= tol; };
  if (const auto* ba = std::get_if<BrickGeom>(&a.geom)) {
    const auto& bb = std::get<BrickGeom>(b.geom);
    return near(ba->x1, bb.x1) && near(ba->x2, bb.x2) && near(ba->y1, bb.y1) &&
           near(ba->y2, bb.y2) && near(ba->z1, bb.z1) && near(ba->z2, bb.z2);
  }
  const auto& ca = std::get<CylinderGeom>(a.geom);
  const auto& cb = std::get<CylinderGeom>(b.geom);
  return ca.axis == cb.axis && near(ca.u, cb.u) && near(ca.v, cb.v) &&
         near(ca.radius, cb.radius) && near(ca.h1, cb.h1) && near(ca.h2, cb.h2);
}

namespace {

struct Grid {
  Box3 box;
  std::size_t r;
  double step[3];

  double center(int axis, std::size_t i) const {
    const double lo = axis == 0 ? box.lo.x : axis == 1 ? box.lo.y : box.lo.z;
    return lo + (static_cast<double>(i) + 0.5) * step[axis];
  }

  // Voxel indices whose centres may fall inside [lo, hi].
  std::pair<std::size_t, std::size_t> range(int axis, double lo, double hi) const {
    const double origin = axis == 0 ? box.lo.x : axis == 1 ? box.lo.y : box.lo.z;
    const double a = std::floor((lo - origin) / step[axis] - 0.5);
    const double b = std::ceil((hi - origin) / step[axis] - 0.5);
    const auto clamp = [&](double v) {
      return static_cast<std::size_t>(std::clamp(v, 0.0, static_cast<double>(r)));
    };
    return {clamp(a), clamp(b + 1)};
  }
};

void rasterize(const std::vector<Solid>& solids, const Grid& g, std::vector<unsigned char>& occ) {
  const std::size_t r = g.r;
  for (const Solid& s : solids) {
    const Box3 bb = bounding_box(s);
    auto [x0, x1] = g.range(0, bb.lo.x, bb.hi.x);
    auto [y0, y1] = g.range(1, bb.lo.y, bb.hi.y);
    auto [z0, z1] = g.range(2, bb.lo.z, bb.hi.z);
    for (std::size_t i = x0; i < x1; ++i) {
      for (std::size_t j = y0; j < y1; ++j) {
        for (std::size_t k = z0; k < z1; ++k) {
          unsigned char& cell = occ[(i * r + j) * r + k];
          if (cell) continue;
          if (contains(s, {g.center(0, i), g.center(1, j), g.center(2, k)})) cell = 1;
        }
      }
    }
  }
}

std::string describe(const Solid& s) {
  std::ostringstream os;
  os << (s.is_brick() ? "brick " : "cylinder ") << s.name << " (" << s.material << ")";
  return os.str();
}

}  // namespace

Comparison compare(const Scene& a, const Scene& b, std::size_t resolution) {
  if (a.solids.empty() && b.solids.empty()) {
    throw std::invalid_argument("compare: IoU is undefined for two empty scenes");
  }
  if (resolution == 0) throw std::invalid_argument("compare: voxel resolution must be positive");

  Box3 box{{INFINITY, INFINITY, INFINITY}, {-INFINITY, -INFINITY, -INFINITY}};
  for (const auto* scene : {&a, &b}) {
    for (const Solid& s : scene->solids) {
      const Box3 bb = bounding_box(s);
      box.lo = {std::min(box.lo.x, bb.lo.x), std::min(box.lo.y, bb.lo.y), std::min(box.lo.z, bb.lo.z)};
      box.hi = {std::max(box.hi.x, bb.hi.x), std::max(box.hi.y, bb.hi.y), std::max(box.hi.z, bb.hi.z)};
    }
  }
  const double rd = static_cast<double>(resolution);
  Grid grid{box, resolution,
            {(box.hi.x - box.lo.x) / rd, (box.hi.y - box.lo.y) / rd, (box.hi.z - box.lo.z) / rd}};

  const std::size_t cells = resolution * resolution * resolution;
  std::vector<unsigned char> occ_a(cells, 0), occ_b(cells, 0);
  rasterize(a.solids, grid, occ_a);
  rasterize(b.solids, grid, occ_b);
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < cells; ++i) {
    inter += occ_a[i] & occ_b[i];
    uni += occ_a[i] | occ_b[i];
  }

  Comparison c;
  c.iou = uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);

  std::vector<bool> used(b.solids.size(), false);
  std::string first_unmatched;
  for (const Solid& s : a.solids) {
    bool found = false;
    for (std::size_t j = 0; j < b.solids.size(); ++j) {
      if (!used[j] && same_geometry(s, b.solids[j])) {
        used[j] = found = true;
        ++c.matched;
        break;
      }
    }
    if (!found && first_unmatched.empty()) first_unmatched = describe(s);
  }
  c.exact = c.matched == a.solids.size() && c.matched == b.solids.size();

  std::ostringstream report;
  report << "solids " << a.solids.size() << " vs " << b.solids.size() << ", matched " << c.matched
         << ", iou " << c.iou << " at R=" << resolution;
  if (!first_unmatched.empty()) report << "; first unmatched: " << first_unmatched;
  c.report = report.str();
  return c;
}

}  // namespace antcode
