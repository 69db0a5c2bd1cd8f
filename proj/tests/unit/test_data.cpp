#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "rsad/augment.hpp"
#include "rsad/dataset.hpp"
#include "rsad/episode.hpp"
#include "rsad/io.hpp"
#include "testutil.hpp"

using namespace rsad;
namespace fs = std::filesystem;

namespace {

/// Tiny on-disk class tree with decodable images.
fs::path make_tree(const testutil::TempDir& tmp, int n_classes,
                   int per_class) {
  fs::path root = tmp.path() / "ds";
  Image img(2, 2, 3);
  img.at(0, 0, 0) = 100;
  for (int c = 0; c < n_classes; ++c) {
    char cls[32];
    std::snprintf(cls, sizeof(cls), "class_%03d", c);
    for (int i = 0; i < per_class; ++i)
      write_png(root / cls / ("img_" + std::to_string(i) + ".png"), img);
  }
  return root;
}

/// In-memory section for sampler tests; no disk involved.
SectionIndex fake_section(int n_classes, int per_class) {
  SectionIndex section;
  for (int c = 0; c < n_classes; ++c) {
    section.classes.push_back("class_" + std::to_string(c));
    std::vector<std::string> pool;
    for (int i = 0; i < per_class; ++i)
      pool.push_back(section.classes.back() + "/img_" + std::to_string(i) +
                     ".png");
    section.instances.push_back(std::move(pool));
  }
  return section;
}

}  // namespace

TEST_CASE("split counts for the three benchmark layouts") {
  struct Row {
    int total;
    std::array<int, 3> counts;
  };
  // CUB-200-2011 / Stanford Dogs / Stanford Cars class arithmetic.
  for (const Row& row : {Row{200, {100, 50, 50}}, Row{120, {70, 20, 30}},
                         Row{196, {130, 17, 49}}}) {
    testutil::TempDir tmp("split");
    fs::path root = make_tree(tmp, row.total, 1);
    DatasetIndex ds = scan_dataset(root);
    SplitSpec split = make_split(ds, row.counts, 1);
    CHECK(static_cast<int>(split.base_classes.size()) == row.counts[0]);
    CHECK(static_cast<int>(split.val_classes.size()) == row.counts[1]);
    CHECK(static_cast<int>(split.novel_classes.size()) == row.counts[2]);

    std::set<std::string> all;
    for (const auto& c : split.base_classes) all.insert(c);
    for (const auto& c : split.val_classes) all.insert(c);
    for (const auto& c : split.novel_classes) all.insert(c);
    CHECK(static_cast<int>(all.size()) == row.total);  // disjoint + complete
  }
}

TEST_CASE("split counts must sum to the class total") {
  testutil::TempDir tmp("splitbad");
  DatasetIndex ds = scan_dataset(make_tree(tmp, 10, 1));
  CHECK_THROWS_AS(make_split(ds, {5, 3, 3}, 1), ConfigError);
}

TEST_CASE("splits are seed-deterministic and round-trip through disk") {
  testutil::TempDir tmp("splitrt");
  DatasetIndex ds = scan_dataset(make_tree(tmp, 12, 2));
  SplitSpec a = make_split(ds, {6, 3, 3}, 42);
  SplitSpec b = make_split(ds, {6, 3, 3}, 42);
  CHECK(a == b);
  SplitSpec c = make_split(ds, {6, 3, 3}, 43);
  CHECK(a.base_classes != c.base_classes);

  save_split(a, tmp.path() / "split.ndjson");
  SplitSpec loaded = load_split(tmp.path() / "split.ndjson");
  CHECK(loaded == a);
}

TEST_CASE("episode shapes: 5-way 1-shot 15-query and 15-way 5-shot") {
  SectionIndex section = fake_section(20, 25);
  Rng rng(1);
  Episode e1 = sample_episode(section, 5, 1, 15, rng);
  CHECK(e1.support.size() == 5);
  CHECK(e1.query.size() == 75);
  Episode e2 = sample_episode(section, 15, 5, 15, rng);
  CHECK(e2.support.size() == 75);
  CHECK(e2.query.size() == 225);
}

TEST_CASE("episodes are rng-deterministic") {
  SectionIndex section = fake_section(10, 10);
  Rng a(7), b(7);
  Episode ea = sample_episode(section, 5, 1, 3, a);
  Episode eb = sample_episode(section, 5, 1, 3, b);
  CHECK(ea.class_map == eb.class_map);
  for (std::size_t i = 0; i < ea.support.size(); ++i)
    CHECK(ea.support[i].instance == eb.support[i].instance);
  for (std::size_t i = 0; i < ea.query.size(); ++i)
    CHECK(ea.query[i].instance == eb.query[i].instance);
}

TEST_CASE("episode label structure and support/query disjointness") {
  SectionIndex section = fake_section(8, 9);
  Rng rng(3);
  Episode ep = sample_episode(section, 4, 2, 3, rng);
  std::vector<int> sup_counts(4, 0), qry_counts(4, 0);
  std::set<std::string> sup_ids, qry_ids;
  for (const auto& item : ep.support) {
    ++sup_counts[static_cast<std::size_t>(item.label)];
    sup_ids.insert(item.instance);
  }
  for (const auto& item : ep.query) {
    ++qry_counts[static_cast<std::size_t>(item.label)];
    qry_ids.insert(item.instance);
  }
  for (int c = 0; c < 4; ++c) {
    CHECK(sup_counts[static_cast<std::size_t>(c)] == 2);
    CHECK(qry_counts[static_cast<std::size_t>(c)] == 3);
  }
  for (const auto& id : sup_ids) CHECK(qry_ids.count(id) == 0);
}

TEST_CASE("sampler errors name the violated constraint") {
  SectionIndex small = fake_section(3, 4);
  Rng rng(1);
  CHECK_THROWS_AS(sample_episode(small, 5, 1, 1, rng), SamplingError);
  try {
    sample_episode(small, 2, 3, 3, rng);  // needs 6 per class, has 4
    FAIL("expected SamplingError");
  } catch (const SamplingError& e) {
    CHECK(std::string(e.what()).find("4") != std::string::npos);
  }
}

TEST_CASE("class selection is uniform within 4 sigma over 1000 episodes") {
  SectionIndex section = fake_section(50, 6);
  Rng rng(12345);
  std::vector<int> counts(50, 0);
  for (int e = 0; e < 1000; ++e) {
    Episode ep = sample_episode(section, 5, 1, 2, rng);
    for (const auto& cls : ep.class_map) {
      int idx = std::stoi(cls.substr(6));
      ++counts[static_cast<std::size_t>(idx)];
    }
  }
  const double expect = 1000.0 * 5.0 / 50.0;
  const double sigma = std::sqrt(1000.0 * 0.1 * 0.9);
  for (int c = 0; c < 50; ++c)
    CHECK(std::fabs(counts[static_cast<std::size_t>(c)] - expect) <=
          4.0 * sigma);
}

// ------------------------------------------------------------- augmentation

TEST_CASE("policy none equals deterministic resize") {
  Rng rng(5);
  Image img(40, 40, 3);
  for (auto& px : img.pixels)
    px = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
  AugmentPolicy policy = eval_transform(32);
  auto [a, b] = paired_augment(img, img, policy, rng);
  ImageF expect = resize_bilinear(to_float(img), 32, 32);
  CHECK(a.pixels == expect.pixels);
  CHECK(b.pixels == expect.pixels);
}

TEST_CASE("paired augmentation applies one shared draw to both inputs") {
  Rng rng(6);
  Image raw(48, 48, 3);
  for (auto& px : raw.pixels)
    px = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
  // Prior = raw with the left half zeroed.
  Image prior = raw;
  for (int y = 0; y < 48; ++y)
    for (int x = 0; x < 24; ++x)
      for (int c = 0; c < 3; ++c) prior.at(y, x, c) = 0;

  AugmentPolicy policy = standard_augment(32);
  Rng draw_rng(99);
  auto [araw, aprior] = paired_augment(raw, prior, policy, draw_rng);

  // Replaying the same rng stream must reproduce the identical transform.
  Rng replay(99);
  AugmentDraw draw = draw_augment(policy, 48, 48, replay);
  CHECK(apply_draw(raw, draw, 32).pixels == araw.pixels);
  CHECK(apply_draw(prior, draw, 32).pixels == aprior.pixels);
}

TEST_CASE("prior mask relation is preserved under the shared transform") {
  Rng rng(8);
  for (int trial = 0; trial < 5; ++trial) {
    Image raw(40, 40, 3);
    for (auto& px : raw.pixels)
      px = static_cast<std::uint8_t>(rng.uniform_int(1, 255));
    Image prior = raw;
    for (int y = 0; y < 40; ++y)
      for (int x = 0; x < 40; ++x)
        if ((x + y) % 3 == 0)
          for (int c = 0; c < 3; ++c) prior.at(y, x, c) = 0;

    AugmentPolicy policy = standard_augment(24);
    auto [araw, aprior] = paired_augment(raw, prior, policy, rng);
    // Bilinear interpolation is a convex combination, so the masked prior
    // can never exceed the raw image anywhere.
    for (std::size_t i = 0; i < araw.pixels.size(); ++i)
      CHECK(aprior.pixels[i] <= araw.pixels[i] + 1e-4f);
  }
}

TEST_CASE("paired augmentation rejects dimension mismatches") {
  Image a(10, 10, 3), b(12, 10, 3);
  Rng rng(1);
  AugmentPolicy policy = eval_transform(8);
  CHECK_THROWS_AS(paired_augment(a, b, policy, rng), InputError);
}

TEST_CASE("tensorize normalizes with split statistics") {
  ImageF img(2, 2, 3);
  for (auto& v : img.pixels) v = 127.5f;
  NormStats stats;
  stats.mean = {0.5, 0.5, 0.5};
  stats.stddev = {0.25, 0.25, 0.25};
  TensorF t = tensorize(img, stats);
  CHECK(t.shape() == std::vector<std::int64_t>{3, 2, 2});
  for (std::int64_t i = 0; i < t.size(); ++i)
    CHECK(t[i] == doctest::Approx(0.0).epsilon(1e-4));
}

TEST_CASE("prior cache lookup by instance id") {
  testutil::TempDir tmp("priorcache");
  fs::path root = make_tree(tmp, 2, 2);
  // Oracle maps: full-foreground masks.
  Image full(2, 2, 1);
  for (auto& px : full.pixels) px = 255;
  for (const auto& rel : list_image_files(root))
    write_png(tmp.path() / "masks" / rel, full);

  build_prior_cache({root, {tmp.path() / "masks"}, 0.5, tmp.path() / "cache"});
  PriorCache cache(tmp.path() / "cache");
  CHECK(cache.has("class_000/img_0"));
  CHECK(!cache.has("class_9/img_0"));
  Image prior = cache.load("class_000/img_0");
  CHECK(prior.at(0, 0, 0) == 100);  // full mask keeps pixels intact
  CHECK_THROWS_AS(cache.load("missing/instance"), InputError);
}
