#include <filesystem>
#include <fstream>
#include <map>

#include "antcode/codec.hpp"
#include "antcode/datagen.hpp"
#include "doctest.h"

using namespace antcode;

namespace {

bool on_grid(double v) {
  const double k = v / kGridStep;
  return std::abs(k - std::round(k)) < 1e-9;
}

}  // namespace

TEST_CASE("family names round-trip") {
  for (Family f : all_families()) CHECK(parse_family(family_name(f)) == f);
  CHECK(all_families().size() == 6);
  CHECK(parse_families("all") == all_families());
  CHECK(parse_families("dipole,ring") == std::vector<Family>{Family::dipole, Family::ring});
  CHECK_THROWS_AS(parse_family("horn"), std::invalid_argument);
}

TEST_CASE("sampled specs are valid and round-trip through the interpreter") {
  Rng rng(123);
  std::size_t longest = 0;
  for (int i = 0; i < 1000; ++i) {
    const Family f = all_families()[static_cast<std::size_t>(i) % 6];
    const AntennaSpec spec = sample_spec(f, rng);
    INFO("family " << family_name(f) << " sample " << i);
    REQUIRE(check_spec(spec).empty());
    CHECK(spec.family == f);
    CHECK(spec.conductors.size() == template_conductor_count(f));
    CHECK(on_grid(spec.substrate.length));
    CHECK(on_grid(spec.substrate.width));

    const std::string code = emit_code(spec);
    longest = std::max(longest, tokenize(code).size());
    const Scene parsed = evaluate(parse(code));
    const Scene direct = to_scene(spec);
    CHECK(parsed.solids.size() == spec.conductors.size() + 1);
    const Comparison cmp = compare(parsed, direct);
    CHECK(cmp.exact);
    CHECK(cmp.iou == 1.0);
    CHECK(parsed.template_name == "Antenna");
  }
  CHECK(longest <= 120);
}

TEST_CASE("check_spec reports violations") {
  Rng rng(1);
  AntennaSpec spec = sample_spec(Family::patch, rng);
  AntennaSpec outside = spec;
  std::get<Strip>(outside.conductors[0].shape).x2 = spec.substrate.length + 5;
  CHECK_FALSE(check_spec(outside).empty());
  AntennaSpec thin = spec;
  thin.substrate.thickness = 0;
  CHECK_FALSE(check_spec(thin).empty());
}

TEST_CASE("rendering is deterministic and quantised") {
  Rng a(9), b(9);
  const AntennaSpec s1 = sample_spec(Family::monopole, a);
  const AntennaSpec s2 = sample_spec(Family::monopole, b);
  const Tensor i1 = render(s1, 64);
  CHECK(i1 == render(s2, 64));
  CHECK(i1.shape() == Shape{1, 64, 64});
  bool dark = false, background = false;
  for (double v : i1.values()) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    const double k = v * 255.0;
    CHECK(std::abs(k - std::round(k)) < 1e-9);
    dark = dark || v < 0.3;
    background = background || v == kBackgroundTone;
  }
  CHECK(dark);
  CHECK(background);

  Rng c(10);
  CHECK_FALSE(render(sample_spec(Family::ring, c), 64) == i1);
}

TEST_CASE("pgm encoding round-trips exactly") {
  Rng rng(4);
  const Tensor img = render(sample_spec(Family::loop, rng), 32);
  const std::string bytes = encode_pgm(img);
  CHECK(bytes.rfind("P5\n", 0) == 0);
  CHECK(decode_pgm(bytes) == img);
  CHECK_THROWS(decode_pgm("P2\n1 1\n255\n0"));
  CHECK_THROWS(decode_pgm(bytes.substr(0, bytes.size() - 3)));
}

TEST_CASE("splits are stratified and deterministic") {
  DatasetOptions o;
  o.n = 200;
  o.image_size = 32;
  const auto samples = generate_samples(o);
  REQUIRE(samples.size() == 200);
  const auto splits = assign_splits(samples, o);
  std::map<Split, int> count;
  std::map<std::pair<Family, Split>, int> per_family;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    ++count[splits[i]];
    ++per_family[{samples[i].family, splits[i]}];
  }
  CHECK(count[Split::train] == 140);
  CHECK(count[Split::val] == 30);
  CHECK(count[Split::test] == 30);
  for (Family f : all_families()) {
    CHECK(per_family[{f, Split::val}] >= 4);
    CHECK(per_family[{f, Split::test}] >= 4);
  }
  CHECK(assign_splits(samples, o) == splits);
  const auto again = generate_samples(o);
  CHECK(again[17].code == samples[17].code);
  CHECK(again[17].image == samples[17].image);
  CHECK(samples[0].id == "s0000");
}

TEST_CASE("manifest text round-trips") {
  DatasetOptions o;
  o.n = 12;
  o.image_size = 32;
  o.seed = 5;
  const auto samples = generate_samples(o);
  const Manifest m = make_manifest(samples, assign_splits(samples, o), o.seed);
  const Manifest back = Manifest::from_text(m.to_text());
  CHECK(back.seed == 5);
  REQUIRE(back.entries.size() == 12);
  CHECK(back.entries[3].id == m.entries[3].id);
  CHECK(back.entries[3].split == m.entries[3].split);
  CHECK(back.entries[3].code_path == m.entries[3].code_path);
  CHECK(back.to_text() == m.to_text());
  CHECK_THROWS(Manifest::from_text("garbage"));
}

TEST_CASE("build_dataset writes a complete directory") {
  const auto dir = std::filesystem::temp_directory_path() / "antcode_datagen_test";
  std::filesystem::remove_all(dir);
  DatasetOptions o;
  o.n = 12;
  o.image_size = 32;
  const Manifest m = build_dataset(o, dir.string());
  CHECK(std::filesystem::exists(dir / "manifest.tsv"));
  const Vocabulary v = Vocabulary::load((dir / "vocab.txt").string());
  for (const ManifestEntry& e : m.entries) {
    const Tensor img = read_pgm((dir / e.image_path).string());
    CHECK(img.shape() == Shape{1, 32, 32});
    std::ifstream in(dir / e.code_path);
    const std::string code((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    for (const std::string& t : tokenize(code)) CHECK(v.index_of(t) != kUnk);
  }
  CHECK(Manifest::load((dir / "manifest.tsv").string()).to_text() == m.to_text());
  o.n = 5;
  CHECK_THROWS_AS(build_dataset(o, dir.string()), std::invalid_argument);
  std::filesystem::remove_all(dir);
}
