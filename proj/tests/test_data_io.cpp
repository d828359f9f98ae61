#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "scagiqa/dataset.hpp"
#include "scagiqa/errors.hpp"
#include "scagiqa/raster.hpp"
#include "scagiqa/rng.hpp"
#include "scagiqa/tensor_file.hpp"
#include "temp_dir.hpp"

using namespace scagiqa;
using namespace scagiqa::io;
using scagiqa::testing::TempDir;

namespace {

void write_text(const std::filesystem::path& p, const std::string& text) { std::ofstream(p) << text; }

std::vector<std::uint8_t> bytes_of(const std::string& s) { return {s.begin(), s.end()}; }

std::vector<Sample> numbered_samples(std::size_t n) {
  std::vector<Sample> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back({"img" + std::to_string(i) + ".ppm", "prompt", std::nullopt, static_cast<double>(i),
                   "id" + std::to_string(i)});
  }
  return out;
}

RgbImage gradient_image(std::size_t w, std::size_t h) {
  RgbImage img(w, h);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < 3; ++c) img.at(x, y, c) = static_cast<std::uint8_t>((x * 7 + y * 13 + c * 50) % 256);
  return img;
}

}  // namespace

TEST_CASE("manifest loading") {
  TempDir dir;
  write_text(dir / "m.jsonl",
             "{\"image\": \"a/one.ppm\", \"prompt\": \"a cat\", \"mos\": 3.5}\n"
             "\n"
             "{\"image\": \"/abs/two.ppm\", \"prompt\": \"a dog\", \"mos\": 1, \"p_d\": \"a brown dog\", \"id\": \"x2\"}\n"
             "{\"image\": \"three.pgm\", \"prompt\": \"a, comma\", \"mos\": 4.25}\n");
  const auto s = load_manifest(dir / "m.jsonl");
  REQUIRE(s.size() == 3);
  CHECK(s[0].image_path == dir.path() / "a/one.ppm");
  CHECK(s[0].image_id == "one");
  CHECK_FALSE(s[0].descriptive_prompt.has_value());
  CHECK(s[0].mos == 3.5);
  CHECK(s[1].image_path == "/abs/two.ppm");
  CHECK(s[1].image_id == "x2");
  CHECK(s[1].descriptive_prompt == std::optional<std::string>("a brown dog"));
  CHECK(s[2].prompt == "a, comma");

  write_text(dir / "bad.jsonl",
             "{\"image\": \"a.ppm\", \"prompt\": \"p\", \"mos\": 1}\n{\"image\": \"b.ppm\", \"prompt\": \"p\"}\n");
  try {
    load_manifest(dir / "bad.jsonl");
    FAIL("expected an error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find(":2") != std::string::npos);
    CHECK(std::string(e.what()).find("mos") != std::string::npos);
  }

  write_text(dir / "dup.jsonl",
             "{\"image\": \"x/a.ppm\", \"prompt\": \"p\", \"mos\": 1}\n{\"image\": \"y/a.ppm\", \"prompt\": \"q\", \"mos\": 2}\n");
  CHECK_THROWS_AS(load_manifest(dir / "dup.jsonl"), DataError);
  write_text(dir / "junk.jsonl", "{not json\n");
  CHECK_THROWS_AS(load_manifest(dir / "junk.jsonl"), DataError);
  CHECK_THROWS_AS(load_manifest(dir / "absent.jsonl"), DataError);
}

TEST_CASE("manifest write then load preserves every field") {
  TempDir dir;
  std::vector<Sample> samples{
      {dir / "imgs/a.ppm", "first \"quoted\" prompt", std::string("desc a"), 0.125, "a"},
      {"/elsewhere/b.ppm", "second", std::nullopt, -2.75, "bee"},
      {dir / "c.pgm", "unicode \xc3\xa9", std::string(""), 1e-9, "c"},
  };
  write_manifest(dir / "out.jsonl", samples);
  CHECK(load_manifest(dir / "out.jsonl") == samples);
}

TEST_CASE("manifest rewritten into another directory still resolves its images") {
  TempDir dir;
  std::filesystem::create_directories(dir / "data/images");
  write_ppm(dir / "data/images/a.ppm", gradient_image(2, 2));
  write_text(dir / "data/m.jsonl", "{\"image\": \"images/a.ppm\", \"prompt\": \"p\", \"mos\": 1}\n");
  std::filesystem::create_directories(dir / "run");

  const auto previous = std::filesystem::current_path();
  std::filesystem::current_path(dir.path());
  const auto loaded = load_manifest("data/m.jsonl");
  write_manifest("run/m.jsonl", loaded);
  const auto again = load_manifest("run/m.jsonl");
  std::filesystem::current_path(previous);

  REQUIRE(again.size() == 1);
  CHECK(again[0].image_path.is_absolute());
  CHECK(std::filesystem::exists(again[0].image_path));
  CHECK(again[0].image_path == (dir / "data/images/a.ppm").lexically_normal());
}

TEST_CASE("PNM decoding") {
  const std::string p6 = std::string("P6\n# comment\n2 2\n255\n") + std::string("\x01\x02\x03\x04\x05\x06\x07\x08\x09\x0a\x0b\xff", 12);
  const auto img = decode_pnm(bytes_of(p6));
  CHECK(img.width == 2);
  CHECK(img.height == 2);
  CHECK(img.at(0, 0, 0) == 1);
  CHECK(img.at(1, 0, 2) == 6);
  CHECK(img.at(0, 1, 1) == 8);
  CHECK(img.at(1, 1, 2) == 255);

  const std::string p5 = std::string("P5 3 1 255\n") + std::string("\x10\x80\xf0", 3);
  const auto gray = decode_pnm(bytes_of(p5));
  CHECK(gray.width == 3);
  for (std::size_t x = 0; x < 3; ++x) {
    CHECK(gray.at(x, 0, 0) == gray.at(x, 0, 1));
    CHECK(gray.at(x, 0, 1) == gray.at(x, 0, 2));
  }
  CHECK(gray.at(1, 0, 0) == 0x80);

  CHECK_THROWS_AS(decode_pnm(bytes_of(p6.substr(0, p6.size() - 1))), DataError);
  CHECK_THROWS_AS(decode_pnm(bytes_of("P3\n1 1\n255\n0 0 0\n")), DataError);
  CHECK_THROWS_AS(decode_pnm(bytes_of("P6\n1 1\n65535\n\x00\x00\x00\x00\x00\x00")), DataError);

  const auto g = gradient_image(5, 4);
  CHECK(decode_pnm(encode_ppm(g)) == g);
  TempDir dir;
  write_ppm(dir / "g.ppm", g);
  CHECK(decode_image(dir / "g.ppm") == g);
  GrayImage gi(3, 2, 9);
  gi.at(2, 1) = 200;
  write_pgm(dir / "g.pgm", gi);
  const auto back = decode_image(dir / "g.pgm");
  CHECK(back.at(2, 1, 0) == 200);
  CHECK(back.at(0, 0, 2) == 9);
}

TEST_CASE("crop sampling") {
  const auto exact = gradient_image(16, 16);
  for (const auto& c : sample_crops(exact, 5, 16, 3)) CHECK(c == exact);

  const auto img = gradient_image(40, 30);
  const auto a = sample_crops(img, 15, 16, 42);
  const auto b = sample_crops(img, 15, 16, 42);
  CHECK(a == b);
  CHECK(sample_crops(img, 15, 16, 43) != a);

  // Every crop must equal the window at some in-bounds corner.
  Rng rng(5);
  for (int trial = 0; trial < 10000; ++trial) {
    const auto crops = sample_crops(img, 1, 16, rng.next_u64());
    const auto& c = crops[0];
    REQUIRE(c.width == 16);
    REQUIRE(c.height == 16);
    bool found = false;
    for (std::size_t y = 0; y + 16 <= 30 && !found; ++y)
      for (std::size_t x = 0; x + 16 <= 40 && !found; ++x)
        if (c.at(0, 0, 0) == img.at(x, y, 0) && c == crop(img, x, y, 16, 16)) found = true;
    REQUIRE(found);
  }

  const auto small = gradient_image(10, 6);
  const auto grown = sample_crops(small, 2, 16, 1);
  CHECK(grown[0].width == 16);
  CHECK(grown[0].at(15, 15, 0) == small.at(9, 5, 0));
  CHECK_THROWS_AS(sample_crops(img, 0, 16, 1), ShapeError);
}

TEST_CASE("edge padding replicates the border") {
  const auto img = gradient_image(3, 2);
  const auto p = pad_edge(img, 5, 4);
  CHECK(p.width == 5);
  CHECK(p.height == 4);
  CHECK(p.at(4, 0, 1) == img.at(2, 0, 1));
  CHECK(p.at(1, 3, 0) == img.at(1, 1, 0));
  CHECK(pad_edge(img, 2, 2) == img);
}

TEST_CASE("dataset split") {
  const auto samples = numbered_samples(10);
  const auto [train, val] = split_dataset(samples, {0.8, 11});
  CHECK(train.size() == 8);
  CHECK(val.size() == 2);
  std::set<std::string> seen;
  for (const auto& s : train) seen.insert(s.image_id);
  for (const auto& s : val) CHECK(seen.insert(s.image_id).second);
  CHECK(seen.size() == 10);

  const auto again = split_dataset(samples, {0.8, 11});
  CHECK(again.first == train);
  CHECK(again.second == val);
  CHECK(split_dataset(samples, {0.8, 12}).first != train);

  CHECK(split_dataset(numbered_samples(7), {0.8, 1}).first.size() == 5);
  CHECK_THROWS_AS(split_dataset(numbered_samples(1), {0.8, 1}), DataError);
}

TEST_CASE("MOS normalization") {
  std::vector<Sample> s = numbered_samples(3);
  s[0].mos = 1;
  s[1].mos = 3;
  s[2].mos = 5;
  const auto n = normalize_mos(s);
  CHECK(n[0].mos == 0.0);
  CHECK(n[1].mos == 0.5);
  CHECK(n[2].mos == 1.0);

  const auto map = MosNormalizer::fit(s);
  CHECK(map.normalize(7.0) == 1.5);
  Rng rng(2);
  for (int i = 0; i < 1000; ++i) {
    const double x = rng.uniform(-10, 10);
    CHECK(std::abs(map.denormalize(map.normalize(x)) - x) < 1e-12);
  }
  for (auto& v : s) v.mos = 2.0;
  CHECK_THROWS_AS(MosNormalizer::fit(s), DataError);
}

TEST_CASE("tensor container") {
  TempDir dir;
  Rng rng(6);
  std::vector<double> v(12);
  for (auto& x : v) x = rng.normal();
  const auto t = Tensor::from({3, 4}, v);
  write_tensor(dir / "t.bin", t);
  const auto back = read_tensor(dir / "t.bin");
  CHECK(back.dims() == t.dims());
  for (std::size_t i = 0; i < 12; ++i) CHECK(back.data()[i] == static_cast<double>(static_cast<float>(v[i])));

  const auto bytes = encode_tensor(t);
  CHECK(bytes.size() == 4 + 4 + 4 + 2 * 8 + 12 * 4);
  CHECK(std::memcmp(bytes.data(), "SCAT", 4) == 0);
  CHECK(bytes[4] == 1);
  CHECK(bytes[8] == 2);
  CHECK(bytes[12] == 3);
  CHECK(bytes[20] == 4);

  auto trailing = bytes;
  trailing.push_back(0);
  CHECK_THROWS_AS(decode_tensor(trailing), DataError);
  auto truncated = bytes;
  truncated.pop_back();
  CHECK_THROWS_AS(decode_tensor(truncated), DataError);
  auto magic = bytes;
  magic[0] = 'X';
  CHECK_THROWS_AS(decode_tensor(magic), DataError);
  auto version = bytes;
  version[4] = 2;
  CHECK_THROWS_AS(decode_tensor(version), DataError);
  // ndim = 0.
  std::vector<std::uint8_t> empty_dims{'S', 'C', 'A', 'T', 1, 0, 0, 0, 0, 0, 0, 0};
  CHECK_THROWS_AS(decode_tensor(empty_dims), DataError);
  CHECK_THROWS_AS(Tensor::from({}, {}), ShapeError);

  CHECK_THROWS_AS(encode_tensor(Tensor::from({1}, {std::nan("")})), DataError);

  // Records can be concatenated and read back in sequence.
  auto two = bytes;
  const auto second = encode_tensor(Tensor::from({2}, {1.5, -2.5}));
  two.insert(two.end(), second.begin(), second.end());
  std::size_t off = 0;
  CHECK(decode_tensor_at(two, off).dims() == Shape{3, 4});
  CHECK(decode_tensor_at(two, off).at(1) == -2.5);
  CHECK(off == two.size());
}
