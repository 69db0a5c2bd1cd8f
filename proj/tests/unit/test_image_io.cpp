#include <doctest.h>

#include "rsad/image.hpp"
#include "rsad/io.hpp"
#include "rsad/rng.hpp"
#include "testutil.hpp"

using namespace rsad;

TEST_CASE("png round trip preserves pixels and channel order") {
  testutil::TempDir tmp("png");
  Image img(5, 7, 3);
  Rng rng(1);
  for (auto& px : img.pixels)
    px = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
  img.at(0, 0, 0) = 200;  // R
  img.at(0, 0, 1) = 30;   // G
  img.at(0, 0, 2) = 10;   // B

  write_png(tmp.path() / "a.png", img);
  Image back = read_image(tmp.path() / "a.png");
  CHECK(back.height == 5);
  CHECK(back.width == 7);
  CHECK(back.pixels == img.pixels);
  CHECK(back.at(0, 0, 0) == 200);
}

TEST_CASE("grayscale read") {
  testutil::TempDir tmp("gray");
  Image gray(3, 3, 1);
  gray.at(1, 1, 0) = 77;
  write_png(tmp.path() / "g.png", gray);
  Image back = read_image_gray(tmp.path() / "g.png");
  CHECK(back.channels == 1);
  CHECK(back.at(1, 1, 0) == 77);
}

TEST_CASE("read errors on missing and corrupt files") {
  testutil::TempDir tmp("bad");
  CHECK_THROWS_AS(read_image(tmp.path() / "nope.png"), IoError);
  atomic_write_text(tmp.path() / "junk.png", "junk");
  CHECK_THROWS_AS(read_image(tmp.path() / "junk.png"), IoError);
}

TEST_CASE("atomic writes leave no temp file behind") {
  testutil::TempDir tmp("atomic");
  atomic_write_text(tmp.path() / "f.txt", "hello\n");
  CHECK(read_text(tmp.path() / "f.txt") == "hello\n");
  CHECK(!std::filesystem::exists(tmp.path() / "f.txt.tmp"));
}

TEST_CASE("bilinear resize: constant images stay constant") {
  ImageF img(9, 13, 3);
  for (auto& v : img.pixels) v = 42.0f;
  ImageF out = resize_bilinear(img, 84, 84);
  for (auto v : out.pixels) CHECK(v == doctest::Approx(42.0f));
}

TEST_CASE("bilinear identity resize returns the same values") {
  Rng rng(3);
  ImageF img(8, 8, 1);
  for (auto& v : img.pixels) v = static_cast<float>(rng.uniform(0, 255));
  ImageF out = resize_bilinear(img, 8, 8);
  for (std::size_t i = 0; i < img.pixels.size(); ++i)
    CHECK(out.pixels[i] == doctest::Approx(img.pixels[i]).epsilon(1e-5));
}

TEST_CASE("flip is an involution") {
  Rng rng(4);
  ImageF img(6, 11, 3);
  for (auto& v : img.pixels) v = static_cast<float>(rng.uniform(0, 255));
  ImageF copy = img;
  flip_horizontal(img);
  flip_horizontal(img);
  CHECK(img.pixels == copy.pixels);
}

TEST_CASE("list_image_files is sorted and recursive") {
  testutil::TempDir tmp("list");
  Image img(2, 2, 3);
  write_png(tmp.path() / "b" / "2.png", img);
  write_png(tmp.path() / "a" / "1.png", img);
  write_png(tmp.path() / "a" / "0.png", img);
  atomic_write_text(tmp.path() / "a" / "notes.txt", "skip me");
  auto files = list_image_files(tmp.path());
  REQUIRE(files.size() == 3);
  CHECK(files[0].generic_string() == "a/0.png");
  CHECK(files[1].generic_string() == "a/1.png");
  CHECK(files[2].generic_string() == "b/2.png");
}

TEST_CASE("fnv hash is stable and content-sensitive") {
  std::vector<std::uint8_t> a{1, 2, 3}, b{1, 2, 4};
  CHECK(fnv1a64_hex(a) == fnv1a64_hex(a));
  CHECK(fnv1a64_hex(a) != fnv1a64_hex(b));
  CHECK(fnv1a64_hex(a).size() == 16);
}
