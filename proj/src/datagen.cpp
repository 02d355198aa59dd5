#include "antcode/datagen.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdio>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "antcode/codec.hpp"

namespace antcode {

namespace fs = std::filesystem;

// ================================================================ families

const std::vector<Family>& all_families() {
  static const std::vector<Family> families = {Family::patch, Family::slotted_patch,
                                               Family::dipole, Family::monopole,
                                               Family::loop, Family::ring};
  return families;
}

std::string_view family_name(Family f) {
  switch (f) {
    case Family::patch:
      return "patch";
    case Family::slotted_patch:
      return "slotted_patch";
    case Family::dipole:
      return "dipole";
    case Family::monopole:
      return "monopole";
    case Family::loop:
      return "loop";
    case Family::ring:
      return "ring";
  }
  return "?";
}

Family parse_family(std::string_view name) {
  for (Family f : all_families()) {
    if (family_name(f) == name) return f;
  }
  throw std::invalid_argument("unknown antenna family '" + std::string(name) + "'");
}

std::vector<Family> parse_families(std::string_view list) {
  if (list == "all") return all_families();
  std::vector<Family> out;
  std::size_t start = 0;
  while (start <= list.size()) {
    const std::size_t comma = std::min(list.find(',', start), list.size());
    const std::string_view item = list.substr(start, comma - start);
    if (!item.empty()) {
      const Family f = parse_family(item);
      if (std::find(out.begin(), out.end(), f) == out.end()) out.push_back(f);
    }
    start = comma + 1;
  }
  if (out.empty()) throw std::invalid_argument("no antenna families selected");
  return out;
}

std::size_t template_conductor_count(Family f) {
  switch (f) {
    case Family::patch:
    case Family::dipole:
      return 2;
    case Family::slotted_patch:
    case Family::monopole:
      return 4;
    case Family::loop:
    case Family::ring:
      return 5;
  }
  return 0;
}

// ================================================================ sampling

namespace {

struct SubstrateMaterial {
  const char* name;
  double epsilon_r;
};

constexpr SubstrateMaterial kMaterials[] = {{"FR4", 4.3}, {"RO4003", 3.55}, {"RT5880", 2.2}};
constexpr double kThicknesses[] = {0.508, 0.787, 0.8, 1.524, 1.6};
constexpr double kWireRadii[] = {0.5, 1.0, 1.5};

double snap_down(double v) { return std::floor(v / kGridStep) * kGridStep; }

// Uniform over grid points in [lo, hi]; lo's grid point when the range is empty.
double grid(Rng& rng, double lo, double hi) {
  const double a = std::ceil(lo / kGridStep) * kGridStep;
  const double b = std::floor(hi / kGridStep) * kGridStep;
  if (b <= a) return a;
  const auto steps = static_cast<std::uint64_t>(std::llround((b - a) / kGridStep));
  return a + kGridStep * static_cast<double>(rng.below(steps + 1));
}

template <class T, std::size_t N>
const T& pick(Rng& rng, const T (&options)[N]) {
  return options[rng.below(N)];
}

Substrate sample_substrate(Rng& rng, double l_lo, double l_hi, double w_lo, double w_hi) {
  Substrate s;
  s.length = grid(rng, l_lo, l_hi);
  s.width = grid(rng, w_lo, w_hi);
  s.thickness = pick(rng, kThicknesses);
  const SubstrateMaterial& m = pick(rng, kMaterials);
  s.material = m.name;
  s.epsilon_r = m.epsilon_r;
  return s;
}

void centred_box(Rng& rng, const Substrate& s, double& x1, double& x2, double& y1, double& y2) {
  const double ow = grid(rng, 0.5 * s.length, 0.8 * s.length);
  const double oh = grid(rng, 0.5 * s.width, 0.8 * s.width);
  x1 = snap_down((s.length - ow) / 2);
  x2 = x1 + ow;
  y1 = snap_down((s.width - oh) / 2);
  y2 = y1 + oh;
}

}  // namespace

AntennaSpec sample_spec(Family family, Rng& rng) {
  AntennaSpec spec;
  spec.family = family;
  auto strip = [&](const char* name, double x1, double x2, double y1, double y2) {
    spec.conductors.push_back({name, Strip{x1, x2, y1, y2}});
  };

  switch (family) {
    case Family::patch: {
      const Substrate s = spec.substrate = sample_substrate(rng, 30, 60, 30, 60);
      const double pw = grid(rng, 0.4 * s.length, 0.7 * s.length);
      const double ph = grid(rng, 0.35 * s.width, 0.6 * s.width);
      const double px1 = snap_down((s.length - pw) / 2);
      const double py1 = grid(rng, 6, s.width - ph - 3);
      const double wf = grid(rng, 1, 3);
      const double fx1 = snap_down(s.length / 2 - wf / 2);
      strip("patch", px1, px1 + pw, py1, py1 + ph);
      strip("feedline", fx1, fx1 + wf, 0, py1);
      spec.feed = {fx1 + wf / 2, 0, FeedType::microstrip};
      break;
    }
    case Family::slotted_patch: {
      const Substrate s = spec.substrate = sample_substrate(rng, 35, 60, 35, 60);
      const double pw = grid(rng, 0.5 * s.length, 0.7 * s.length);
      const double ph = grid(rng, 0.4 * s.width, 0.6 * s.width);
      const double px1 = snap_down((s.length - pw) / 2);
      const double py1 = grid(rng, 6, s.width - ph - 3);
      const double sw = grid(rng, 1, std::max(1.0, 0.25 * pw));
      const double sd = grid(rng, 0.3 * ph, 0.6 * ph);
      const double wf = grid(rng, 1, 3);
      const double xc = px1 + pw / 2;
      const double py2 = py1 + ph;
      strip("body", px1, px1 + pw, py1, py2 - sd);
      strip("arm_left", px1, xc - sw / 2, py2 - sd, py2);
      strip("arm_right", xc + sw / 2, px1 + pw, py2 - sd, py2);
      strip("feedline", xc - wf / 2, xc + wf / 2, 0, py1);
      spec.feed = {xc, 0, FeedType::microstrip};
      break;
    }
    case Family::dipole: {
      const Substrate s = spec.substrate = sample_substrate(rng, 40, 60, 20, 40);
      const double r = pick(rng, kWireRadii);
      const double yc = snap_down(s.width / 2);
      const double g = grid(rng, 1, 3);
      const double xc = s.length / 2;
      const double arm = grid(rng, 0.3 * s.length, s.length / 2 - g / 2 - 1);
      spec.conductors.push_back({"arm_left", Wire{yc, r, xc - g / 2 - arm, xc - g / 2}});
      spec.conductors.push_back({"arm_right", Wire{yc, r, xc + g / 2, xc + g / 2 + arm}});
      spec.feed = {xc, yc, FeedType::gap};
      break;
    }
    case Family::monopole: {
      const Substrate s = spec.substrate = sample_substrate(rng, 30, 50, 40, 60);
      const double gl = grid(rng, 5, 0.25 * s.width);
      const double wf = grid(rng, 1.5, 3);
      const double gap = grid(rng, 0.5, 1);
      const double lift = grid(rng, 0.5, 2);
      const double xc = s.length / 2;
      const double r = grid(rng, 5, std::min(s.length / 2 - 1, (s.width - 1 - gl - lift) / 2));
      strip("ground_left", 0, xc - wf / 2 - gap, 0, gl);
      strip("ground_right", xc + wf / 2 + gap, s.length, 0, gl);
      spec.conductors.push_back({"disc", Disc{xc, gl + lift + r, r}});
      strip("feedline", xc - wf / 2, xc + wf / 2, 0, gl + lift + 0.5);
      spec.feed = {xc, 0, FeedType::coplanar};
      break;
    }
    case Family::loop: {
      const Substrate s = spec.substrate = sample_substrate(rng, 30, 60, 30, 60);
      double x1, x2, y1, y2;
      centred_box(rng, s, x1, x2, y1, y2);
      const double tw = grid(rng, 1, 3);
      const double g = grid(rng, 1, 3);
      const double xc = (x1 + x2) / 2;
      strip("side_left", x1, x1 + tw, y1, y2);
      strip("side_right", x2 - tw, x2, y1, y2);
      strip("side_top", x1 + tw, x2 - tw, y2 - tw, y2);
      strip("side_bottom_left", x1 + tw, xc - g / 2, y1, y1 + tw);
      strip("side_bottom_right", xc + g / 2, x2 - tw, y1, y1 + tw);
      spec.feed = {xc, y1 + tw / 2, FeedType::gap};
      break;
    }
    case Family::ring: {
      const Substrate s = spec.substrate = sample_substrate(rng, 30, 60, 30, 60);
      double x1, x2, y1, y2;
      centred_box(rng, s, x1, x2, y1, y2);
      const double tw = grid(rng, 1, 3);
      const double wf = grid(rng, 1, 3);
      const double xc = (x1 + x2) / 2;
      strip("side_left", x1, x1 + tw, y1, y2);
      strip("side_right", x2 - tw, x2, y1, y2);
      strip("side_top", x1 + tw, x2 - tw, y2 - tw, y2);
      strip("side_bottom", x1 + tw, x2 - tw, y1, y1 + tw);
      strip("feedline", xc - wf / 2, xc + wf / 2, 0, y1);
      spec.feed = {xc, 0, FeedType::microstrip};
      break;
    }
  }
  return spec;
}

std::string check_spec(const AntennaSpec& spec) {
  const Substrate& s = spec.substrate;
  if (!(s.length > 0 && s.width > 0 && s.thickness > 0 && s.epsilon_r > 0)) {
    return "substrate dimensions must be positive";
  }
  auto inside = [&](double x1, double x2, double y1, double y2) {
    return x1 >= 0 && x2 <= s.length && y1 >= 0 && y2 <= s.width;
  };
  for (const Conductor& c : spec.conductors) {
    bool ok = false;
    if (const auto* st = std::get_if<Strip>(&c.shape)) {
      ok = st->x1 < st->x2 && st->y1 < st->y2 && inside(st->x1, st->x2, st->y1, st->y2);
    } else if (const auto* d = std::get_if<Disc>(&c.shape)) {
      ok = d->radius > 0 && inside(d->cx - d->radius, d->cx + d->radius, d->cy - d->radius,
                                   d->cy + d->radius);
    } else {
      const auto& w = std::get<Wire>(c.shape);
      ok = w.radius > 0 && w.x1 < w.x2 && inside(w.x1, w.x2, w.y - w.radius, w.y + w.radius);
    }
    if (!ok) return "conductor '" + c.name + "' is degenerate or leaves the substrate";
  }
  if (!inside(spec.feed.x, spec.feed.x, spec.feed.y, spec.feed.y)) return "feed lies off the substrate";
  return {};
}

// =================================================================== scene

Scene to_scene(const AntennaSpec& spec) {
  const Substrate& s = spec.substrate;
  const double h = s.thickness;
  const double top = h + kCopperThickness;
  Scene scene;
  scene.template_name = "Antenna";
  scene.materials = {{s.material, s.epsilon_r}, {"copper", 1.0}};
  scene.solids.push_back({"substrate", s.material, BrickGeom{0, s.length, 0, s.width, 0, h}});
  for (const Conductor& c : spec.conductors) {
    if (const auto* st = std::get_if<Strip>(&c.shape)) {
      scene.solids.push_back({c.name, "copper", BrickGeom{st->x1, st->x2, st->y1, st->y2, h, top}});
    } else if (const auto* d = std::get_if<Disc>(&c.shape)) {
      scene.solids.push_back({c.name, "copper", CylinderGeom{Axis::z, d->cx, d->cy, d->radius, h, top}});
    } else {
      const auto& w = std::get<Wire>(c.shape);
      scene.solids.push_back(
          {c.name, "copper", CylinderGeom{Axis::x, w.y, h + w.radius, w.radius, w.x1, w.x2}});
    }
  }
  scene.feed = Point3{spec.feed.x, spec.feed.y, h};
  return scene;
}

std::string emit_code(const AntennaSpec& spec) {
  const Substrate& s = spec.substrate;
  const auto n = format_number;
  const std::string top = "(h + " + n(kCopperThickness) + ")";
  std::ostringstream os;
  os << "use template Antenna\n";
  os << "define material " << s.material << ' ' << n(s.epsilon_r) << '\n';
  os << "define material copper " << n(1.0) << '\n';
  os << "param h = " << n(s.thickness) << '\n';
  os << "brick substrate " << s.material << ' ' << n(0) << ' ' << n(s.length) << ' ' << n(0) << ' '
     << n(s.width) << ' ' << n(0) << " h\n";
  for (const Conductor& c : spec.conductors) {
    if (const auto* st = std::get_if<Strip>(&c.shape)) {
      os << "brick " << c.name << " copper " << n(st->x1) << ' ' << n(st->x2) << ' ' << n(st->y1)
         << ' ' << n(st->y2) << " h " << top << '\n';
    } else if (const auto* d = std::get_if<Disc>(&c.shape)) {
      os << "cylinder " << c.name << " copper z " << n(d->cx) << ' ' << n(d->cy) << ' '
         << n(d->radius) << " h " << top << '\n';
    } else {
      const auto& w = std::get<Wire>(c.shape);
      os << "cylinder " << c.name << " copper x " << n(w.y) << " (h + " << n(w.radius) << ") "
         << n(w.radius) << ' ' << n(w.x1) << ' ' << n(w.x2) << '\n';
    }
  }
  os << "feed " << n(spec.feed.x) << ' ' << n(spec.feed.y) << " h\n";
  return os.str();
}

// ================================================================== render

namespace {

struct P2 {
  double x, y;
};

double cross(const P2& o, const P2& a, const P2& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

// Andrew's monotone chain; counter-clockwise, no collinear points.
std::vector<P2> convex_hull(std::vector<P2> pts) {
  std::sort(pts.begin(), pts.end(), [](const P2& a, const P2& b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
  });
  if (pts.size() < 3) return pts;
  std::vector<P2> hull(2 * pts.size());
  std::size_t k = 0;
  for (const P2& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

bool inside_convex(const std::vector<P2>& poly, const P2& p) {
  if (poly.size() < 3) return false;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    if (cross(poly[i], poly[(i + 1) % poly.size()], p) < 0) return false;
  }
  return true;
}

std::vector<Point3> surface_samples(const Solid& s) {
  std::vector<Point3> pts;
  if (const auto* b = std::get_if<BrickGeom>(&s.geom)) {
    for (double x : {b->x1, b->x2})
      for (double y : {b->y1, b->y2})
        for (double z : {b->z1, b->z2}) pts.push_back({x, y, z});
    return pts;
  }
  const auto& c = std::get<CylinderGeom>(s.geom);
  constexpr int kRim = 32;
  for (int i = 0; i < kRim; ++i) {
    const double a = 2 * std::numbers::pi * i / kRim;
    const double u = c.u + c.radius * std::cos(a), v = c.v + c.radius * std::sin(a);
    for (double along : {c.h1, c.h2}) {
      switch (c.axis) {
        case Axis::x:
          pts.push_back({along, u, v});
          break;
        case Axis::y:
          pts.push_back({u, along, v});
          break;
        case Axis::z:
          pts.push_back({u, v, along});
          break;
      }
    }
  }
  return pts;
}

struct View {
  P2 (*project)(const Point3&);
  P2 lo, hi;  // fixed world window
};

P2 top_view(const Point3& p) { return {p.x, p.y}; }

// Cavalier-style oblique projection: y recedes at 45 degrees, depth 0.5.
P2 oblique_view(const Point3& p) {
  const double k = 0.5 * std::numbers::sqrt2 / 2;
  return {p.x + k * p.y, p.z + k * p.y};
}

constexpr View kObliqueView{oblique_view, {-2, -2}, {86, 30}};
constexpr View kTopView{top_view, {-2, -2}, {62, 62}};

void draw_view(const Scene& scene, const View& view, Tensor& image, std::size_t x0,
               std::size_t panel_w, std::size_t panel_h) {
  struct Shape2 {
    std::vector<P2> poly;
    double tone;
  };
  std::vector<Shape2> shapes;
  for (std::size_t i = 0; i < scene.solids.size(); ++i) {
    std::vector<P2> pts;
    for (const Point3& p : surface_samples(scene.solids[i])) pts.push_back(view.project(p));
    const double tone = scene.solids[i].material == "copper" ? kConductorTone : kSubstrateTone;
    shapes.push_back({convex_hull(std::move(pts)), tone});
  }

  constexpr int kSuper = 4;
  const double sx = (view.hi.x - view.lo.x) / static_cast<double>(panel_w);
  const double sy = (view.hi.y - view.lo.y) / static_cast<double>(panel_h);
  const std::size_t size = image.dim(2);
  for (std::size_t py = 0; py < panel_h; ++py) {
    for (std::size_t px = 0; px < panel_w; ++px) {
      double acc = 0.0;
      for (int a = 0; a < kSuper; ++a) {
        for (int b = 0; b < kSuper; ++b) {
          const P2 w{view.lo.x + (static_cast<double>(px) + (b + 0.5) / kSuper) * sx,
                     view.hi.y - (static_cast<double>(py) + (a + 0.5) / kSuper) * sy};
          double tone = kBackgroundTone;
          for (const Shape2& s : shapes) {
            if (inside_convex(s.poly, w)) tone = s.tone;
          }
          acc += tone;
        }
      }
      const double v = acc / (kSuper * kSuper);
      image[py * size + x0 + px] = std::round(v * 255.0) / 255.0;
    }
  }
}

}  // namespace

Tensor render(const AntennaSpec& spec, std::size_t size) {
  if (size < 2 || size % 2 != 0) throw std::invalid_argument("render size must be even");
  const Scene scene = to_scene(spec);
  Tensor image({1, size, size}, kBackgroundTone);
  draw_view(scene, kObliqueView, image, 0, size / 2, size);
  draw_view(scene, kTopView, image, size / 2, size / 2, size);
  return image;
}

// ================================================================= dataset

std::string_view split_name(Split s) {
  return s == Split::train ? "train" : s == Split::val ? "val" : "test";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "val") return Split::val;
  if (name == "test") return Split::test;
  throw std::invalid_argument("unknown split '" + std::string(name) + "'");
}

static std::string sample_id(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "s%04zu", i);
  return buf;
}

std::vector<RenderedSample> generate_samples(const DatasetOptions& options) {
  if (options.families.empty()) throw std::invalid_argument("no antenna families selected");
  std::vector<RenderedSample> samples;
  samples.reserve(options.n);
  for (std::size_t i = 0; i < options.n; ++i) {
    RenderedSample s;
    s.id = sample_id(i);
    s.family = options.families[i % options.families.size()];
    Rng rng(mix_seed(options.seed, i));
    s.spec = sample_spec(s.family, rng);
    s.image = render(s.spec, options.image_size);
    s.code = emit_code(s.spec);
    samples.push_back(std::move(s));
  }
  return samples;
}

std::vector<Split> assign_splits(const std::vector<RenderedSample>& samples,
                                 const DatasetOptions& options) {
  const SplitFractions& fr = options.fractions;
  if (std::abs(fr.train + fr.val + fr.test - 1.0) > 1e-9 || fr.train <= 0 || fr.val < 0 ||
      fr.test < 0) {
    throw std::invalid_argument("split fractions must be non-negative and sum to 1");
  }
  const std::size_t n = samples.size();
  std::vector<Family> fams;
  for (const RenderedSample& s : samples) {
    if (std::find(fams.begin(), fams.end(), s.family) == fams.end()) fams.push_back(s.family);
  }
  std::vector<std::vector<std::size_t>> members(fams.size());
  for (std::size_t i = 0; i < n; ++i) {
    const auto f = std::find(fams.begin(), fams.end(), samples[i].family) - fams.begin();
    members[static_cast<std::size_t>(f)].push_back(i);
  }

  std::vector<std::size_t> val(fams.size()), test(fams.size());
  // Largest-remainder allocation: per-family floors, then the remaining
  // global slots go to the largest fractional parts.
  auto allocate = [&](double fraction, std::vector<std::size_t>& quota) {
    const auto target = static_cast<std::size_t>(std::llround(static_cast<double>(n) * fraction));
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t f = 0; f < fams.size(); ++f) {
      const double exact = static_cast<double>(members[f].size()) * fraction;
      quota[f] = static_cast<std::size_t>(std::floor(exact + 1e-9));
      assigned += quota[f];
      remainders.push_back({exact - static_cast<double>(quota[f]), f});
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (const auto& [rem, f] : remainders) {
      if (assigned >= target) break;
      if (members[f].size() > val[f] + test[f] + 1) {
        ++quota[f];
        ++assigned;
      }
    }
  };
  allocate(fr.val, val);
  allocate(fr.test, test);

  std::vector<Split> splits(n, Split::train);
  for (std::size_t f = 0; f < fams.size(); ++f) {
    std::vector<std::size_t> ids = members[f];
    Rng rng(mix_seed(options.seed, 0xD1CE0000ULL + static_cast<std::uint64_t>(fams[f])));
    rng.shuffle(ids);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      splits[ids[k]] = k < val[f] ? Split::val : k < val[f] + test[f] ? Split::test : Split::train;
    }
  }
  return splits;
}

Manifest make_manifest(const std::vector<RenderedSample>& samples, const std::vector<Split>& splits,
                       std::uint64_t seed) {
  Manifest m;
  m.seed = seed;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const RenderedSample& s = samples[i];
    m.entries.push_back({s.id, std::string(family_name(s.family)), splits[i],
                         "images/" + s.id + ".pgm", "code/" + s.id + ".txt"});
  }
  return m;
}

std::string Manifest::to_text() const {
  std::string out = "MANIFEST v1 seed=" + std::to_string(seed) + "\n";
  for (const ManifestEntry& e : entries) {
    out += e.id + '\t' + e.family + '\t' + std::string(split_name(e.split)) + '\t' + e.image_path +
           '\t' + e.code_path + '\n';
  }
  return out;
}

Manifest Manifest::from_text(std::string_view text) {
  std::istringstream is{std::string(text)};
  std::string line;
  constexpr std::string_view kHeader = "MANIFEST v1 seed=";
  if (!std::getline(is, line) || line.rfind(kHeader, 0) != 0) {
    throw std::invalid_argument("manifest must start with \"MANIFEST v1 seed=<seed>\"");
  }
  Manifest m;
  m.seed = std::stoull(line.substr(kHeader.size()));
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const std::size_t tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() != 5) {
      throw std::invalid_argument("manifest line " + std::to_string(lineno) + " needs 5 fields");
    }
    m.entries.push_back({fields[0], fields[1], parse_split(fields[2]), fields[3], fields[4]});
  }
  return m;
}

Manifest Manifest::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read manifest " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str());
}

static void write_file(const fs::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

Manifest build_dataset(const DatasetOptions& options, const std::string& out_dir) {
  if (options.n < 10) throw std::invalid_argument("a dataset needs at least 10 samples");
  const fs::path root(out_dir);
  std::error_code ec;
  fs::create_directories(root / "images", ec);
  if (!ec) fs::create_directories(root / "code", ec);
  if (ec) throw std::runtime_error("cannot create dataset directory " + out_dir + ": " + ec.message());

  const std::vector<RenderedSample> samples = generate_samples(options);
  const std::vector<Split> splits = assign_splits(samples, options);
  const Manifest manifest = make_manifest(samples, splits, options.seed);

  std::vector<std::vector<std::string>> corpus;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    write_file(root / manifest.entries[i].image_path, encode_pgm(samples[i].image));
    write_file(root / manifest.entries[i].code_path, samples[i].code);
    corpus.push_back(tokenize(samples[i].code));
  }
  write_file(root / "vocab.txt", Vocabulary::build(corpus).to_text());
  write_file(root / "manifest.tsv", manifest.to_text());
  return manifest;
}

// ===================================================================== PGM

std::string encode_pgm(const Tensor& image) {
  if (image.rank() != 3 || image.dim(0) != 1) {
    throw std::invalid_argument("PGM images must be [1,H,W], got " + shape_string(image.shape()));
  }
  const std::size_t h = image.dim(1), w = image.dim(2);
  std::string out = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  for (double v : image.values()) {
    out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0))));
  }
  return out;
}

Tensor decode_pgm(std::string_view bytes) {
  std::size_t pos = 0;
  auto next_field = [&]() {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    return std::string(bytes.substr(start, pos - start));
  };
  if (next_field() != "P5") throw std::invalid_argument("not a binary PGM (P5) image");
  std::size_t w = 0, h = 0, maxval = 0;
  try {
    w = std::stoul(next_field());
    h = std::stoul(next_field());
    maxval = std::stoul(next_field());
  } catch (const std::exception&) {
    throw std::invalid_argument("malformed PGM header");
  }
  if (maxval != 255 || w == 0 || h == 0) throw std::invalid_argument("only 8-bit PGM images are supported");
  ++pos;  // single whitespace byte after maxval
  if (bytes.size() < pos + w * h) throw std::invalid_argument("truncated PGM pixel data");
  Tensor image({1, h, w});
  for (std::size_t i = 0; i < w * h; ++i) {
    image[i] = static_cast<unsigned char>(bytes[pos + i]) / 255.0;
  }
  return image;
}

void write_pgm(const std::string& path, const Tensor& image) { write_file(path, encode_pgm(image)); }

Tensor read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read image " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_pgm(ss.str());
}

}  // namespace antcode
