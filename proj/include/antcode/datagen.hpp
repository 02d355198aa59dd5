#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "antcode/geometry.hpp"
#include "antcode/rng.hpp"
#include "antcode/tensor.hpp"

namespace antcode {

enum class Family { patch, slotted_patch, dipole, monopole, loop, ring };

const std::vector<Family>& all_families();
std::string_view family_name(Family f);
Family parse_family(std::string_view name);
// Comma-separated names, or "all".
std::vector<Family> parse_families(std::string_view list);

inline constexpr double kCopperThickness = 0.035;  // mm
inline constexpr double kGridStep = 0.5;           // mm

struct Substrate {
  double length = 0;  // x extent, mm
  double width = 0;   // y extent, mm
  double thickness = 0;
  std::string material;
  double epsilon_r = 1.0;
};

// Conductors sit on the top face of the substrate (z = thickness).
struct Strip {  // copper rectangle, x1..x2 by y1..y2
  double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
};
struct Disc {  // copper disc
  double cx = 0, cy = 0, radius = 0;
};
struct Wire {  // round wire along x resting on the surface
  double y = 0, radius = 0, x1 = 0, x2 = 0;
};

struct Conductor {
  std::string name;
  std::variant<Strip, Disc, Wire> shape;
};

enum class FeedType { microstrip, coplanar, gap };

struct FeedPoint {
  double x = 0, y = 0;  // on the top face
  FeedType type = FeedType::microstrip;
};

struct AntennaSpec {
  Family family = Family::patch;
  Substrate substrate;
  std::vector<Conductor> conductors;
  FeedPoint feed;
};

// Number of conductors each family's template places.
std::size_t template_conductor_count(Family f);

AntennaSpec sample_spec(Family family, Rng& rng);

// Empty when the antenna spec satisfies its invariants, otherwise a description
// of the first violation.
std::string check_spec(const AntennaSpec& spec);

// Resolved 3-D geometry: the substrate brick followed by the conductors.
Scene to_scene(const AntennaSpec& spec);

std::string emit_code(const AntennaSpec& spec);

// Two-view grayscale image [1, size, size]: cavalier oblique view on the
// left half, top view on the right. Values are multiples of 1/255.
Tensor render(const AntennaSpec& spec, std::size_t size);

inline constexpr double kBackgroundTone = 1.0;
inline constexpr double kSubstrateTone = 0.6;
inline constexpr double kConductorTone = 0.1;

// ---- dataset

struct RenderedSample {
  std::string id;
  Family family = Family::patch;
  AntennaSpec spec;
  Tensor image;
  std::string code;
};

enum class Split { train, val, test };
std::string_view split_name(Split s);
Split parse_split(std::string_view name);

struct SplitFractions {
  double train = 0.70, val = 0.15, test = 0.15;
};

struct ManifestEntry {
  std::string id;
  std::string family;
  Split split = Split::train;
  std::string image_path;  // relative to the dataset directory
  std::string code_path;
};

struct Manifest {
  std::uint64_t seed = 0;
  std::vector<ManifestEntry> entries;

  std::string to_text() const;
  static Manifest from_text(std::string_view text);
  static Manifest load(const std::string& path);
};

struct DatasetOptions {
  std::size_t n = 200;
  std::vector<Family> families = all_families();
  std::uint64_t seed = 1;
  std::size_t image_size = 64;
  SplitFractions fractions;
};

// Deterministic in (seed, n, families, image_size).
std::vector<RenderedSample> generate_samples(const DatasetOptions& options);
// Stratified per family; index i of the result is the split of sample i.
std::vector<Split> assign_splits(const std::vector<RenderedSample>& samples,
                                 const DatasetOptions& options);
Manifest make_manifest(const std::vector<RenderedSample>& samples, const std::vector<Split>& splits,
                       std::uint64_t seed);

// Writes images/<id>.pgm, code/<id>.txt, vocab.txt and manifest.tsv.
Manifest build_dataset(const DatasetOptions& options, const std::string& out_dir);

// ---- 8-bit binary PGM (P5)

void write_pgm(const std::string& path, const Tensor& image);
Tensor read_pgm(const std::string& path);
std::string encode_pgm(const Tensor& image);
Tensor decode_pgm(std::string_view bytes);

}  // namespace antcode
