#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace antcode {

// ---------------------------------------------------------------- AST

struct Expr {
  enum class Kind { number, name, add, sub, mul, div, neg };

  Kind kind = Kind::number;
  double value = 0.0;
  std::string name;
  std::vector<Expr> operands;

  static Expr number(double v) { return {Kind::number, v, {}, {}}; }
  static Expr ref(std::string n) { return {Kind::name, 0.0, std::move(n), {}}; }
  static Expr binary(Kind k, Expr lhs, Expr rhs);
  static Expr negate(Expr operand);

  friend bool operator==(const Expr&, const Expr&) = default;
};

enum class Axis { x, y, z };

struct UseTemplate {
  std::string name;
  friend bool operator==(const UseTemplate&, const UseTemplate&) = default;
};
struct DefineMaterial {
  std::string name;
  double epsilon_r = 1.0;
  friend bool operator==(const DefineMaterial&, const DefineMaterial&) = default;
};
struct ParamDef {
  std::string name;
  Expr value;
  friend bool operator==(const ParamDef&, const ParamDef&) = default;
};
struct BrickDef {
  std::string name, material;
  Expr x1, x2, y1, y2, z1, z2;
  friend bool operator==(const BrickDef&, const BrickDef&) = default;
};
// `u`, `v` locate the axis in the plane of the other two coordinates,
// taken in x, y, z order (axis z: (x, y); axis y: (x, z); axis x: (y, z)).
struct CylinderDef {
  std::string name, material;
  Axis axis = Axis::z;
  Expr u, v, radius, h1, h2;
  friend bool operator==(const CylinderDef&, const CylinderDef&) = default;
};
struct FeedDef {
  Expr x, y, z;
  friend bool operator==(const FeedDef&, const FeedDef&) = default;
};

using Statement = std::variant<UseTemplate, DefineMaterial, ParamDef, BrickDef, CylinderDef, FeedDef>;

struct Ast {
  std::vector<Statement> statements;
  std::vector<std::size_t> lines;  // source line of each statement

  friend bool operator==(const Ast& a, const Ast& b) { return a.statements == b.statements; }
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& message, std::size_t line, std::size_t column);
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_, column_;
};

class EvalError : public std::runtime_error {
 public:
  EvalError(const std::string& message, std::size_t statement);
  std::size_t statement() const { return statement_; }

 private:
  std::size_t statement_;
};

// Fails fast on the first error.
Ast parse(std::string_view code);

// Canonical text: one statement per line, 4-decimal literals.
std::string print(const Ast& ast);
std::string print(const Expr& expr);
std::string format_number(double v);

// ---------------------------------------------------------------- scene

struct BrickGeom {
  double x1 = 0, x2 = 0, y1 = 0, y2 = 0, z1 = 0, z2 = 0;
};
struct CylinderGeom {
  Axis axis = Axis::z;
  double u = 0, v = 0, radius = 0, h1 = 0, h2 = 0;
};

struct Solid {
  std::string name;
  std::string material;
  std::variant<BrickGeom, CylinderGeom> geom;

  bool is_brick() const { return std::holds_alternative<BrickGeom>(geom); }
};

struct Point3 {
  double x = 0, y = 0, z = 0;
};

struct Box3 {
  Point3 lo, hi;
};

Box3 bounding_box(const Solid& s);
bool contains(const Solid& s, const Point3& p);

struct Material {
  std::string name;
  double epsilon_r = 1.0;
};

struct Scene {
  std::string template_name;
  std::vector<Material> materials;
  std::vector<Solid> solids;
  std::optional<Point3> feed;
};

Scene evaluate(const Ast& ast);

// ---------------------------------------------------------------- compare

inline constexpr std::size_t kDefaultVoxelResolution = 128;
inline constexpr double kExactTolerance = 1e-6;

struct Comparison {
  double iou = 0.0;
  bool exact = false;
  std::size_t matched = 0;  // solids paired under the exact-match rule
  std::string report;
};

// Voxelised IoU of the two solid unions over their joint bounding box,
// plus an exact multiset match on kind, material and coordinates.
Comparison compare(const Scene& a, const Scene& b,
                   std::size_t resolution = kDefaultVoxelResolution);

bool same_geometry(const Solid& a, const Solid& b, double tolerance = kExactTolerance);

}  // namespace antcode
