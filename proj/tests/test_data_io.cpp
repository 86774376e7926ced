#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <set>
#include <string>

#include "bbs/data_io.hpp"

using namespace bbs;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
  fs::path p = fs::temp_directory_path() / ("bbs_io_" + tag + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Tensor ramp_image(int64_t c, int64_t h, int64_t w, double base) {
  Tensor t({c, h, w});
  for (size_t i = 0; i < t.data.size(); ++i)
    t.data[i] = std::fmod(base + static_cast<double>(i) / 97.0, 1.0);
  return t;
}

Tensor binary_square(int64_t h, int64_t w) {
  Tensor t = Tensor::zeros({1, h, w});
  for (int64_t y = h / 4; y < 3 * h / 4; ++y)
    for (int64_t x = w / 4; x < 3 * w / 4; ++x) t.at(0, y, x) = 1.0;
  return t;
}

// writes root/RGB/<id>.png (3ch), root/depth/<id>.png (1ch), root/GT/<id>.png
void write_triple(const fs::path& root, const std::string& id, int64_t h, int64_t w, double base) {
  fs::create_directories(root / "RGB");
  fs::create_directories(root / "depth");
  fs::create_directories(root / "GT");
  io::write_image_chw(ramp_image(3, h, w, base), (root / "RGB" / (id + ".png")).string());
  io::write_image_chw(ramp_image(1, h, w, base + 0.3), (root / "depth" / (id + ".png")).string());
  io::write_image_chw(binary_square(h, w), (root / "GT" / (id + ".png")).string());
}

}  // namespace

TEST_CASE("dataset scan pairs triples by stem and reports strays") {
  fs::path root = fresh_dir("scan");
  write_triple(root, "a", 12, 10, 0.1);
  write_triple(root, "b", 8, 8, 0.4);
  write_triple(root, "c", 9, 14, 0.7);
  io::write_image_chw(ramp_image(3, 6, 6, 0.2), (root / "RGB" / "orphan.png").string());

  std::vector<std::string> issues;
  io::DatasetManifest m = io::load_dataset(root.string(), "tiny", false, &issues);
  CHECK(m.entries.size() == 3);
  CHECK(m.entries[0].id == "a");
  CHECK(m.entries[1].id == "b");
  CHECK(m.entries[2].id == "c");
  CHECK(issues.size() == 1);
  CHECK(issues[0].find("orphan") != std::string::npos);

  std::string js = io::manifest_to_json(m);
  io::DatasetManifest back = io::manifest_from_json(js);
  CHECK(back.name == m.name);
  CHECK(back.entries.size() == m.entries.size());
  CHECK(back.entries[2].gt_path == m.entries[2].gt_path);
}

TEST_CASE("dataset scan fails loudly on missing or incomplete roots") {
  CHECK_THROWS(io::load_dataset("/nonexistent/path/xyz"));

  fs::path root = fresh_dir("rgbonly");
  fs::create_directories(root / "RGB");
  io::write_image_chw(ramp_image(3, 6, 6, 0.2), (root / "RGB" / "x.png").string());
  CHECK_THROWS(io::load_dataset(root.string()));
}

TEST_CASE("sample loading resizes, normalizes depth, and binarizes ground truth") {
  fs::path root = fresh_dir("load");
  write_triple(root, "s", 20, 16, 0.05);
  io::DatasetManifest m = io::load_dataset(root.string(), "ld");

  io::LoadOptions opt;
  opt.side = 24;
  io::RgbdSample s = io::load_sample(m.entries[0], opt);
  CHECK(s.rgb.shape == std::vector<int64_t>{3, 24, 24});
  CHECK(s.depth.shape == std::vector<int64_t>{1, 24, 24});
  CHECK(s.gt.shape == std::vector<int64_t>{1, 24, 24});
  for (double v : s.rgb.data) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  double dmin = 1e9, dmax = -1e9;
  for (double v : s.depth.data) {
    dmin = std::min(dmin, v);
    dmax = std::max(dmax, v);
  }
  CHECK(dmin == doctest::Approx(0.0));
  CHECK(dmax == doctest::Approx(1.0));
  for (double v : s.gt.data) CHECK((v == 0.0 || v == 1.0));
  CHECK(s.gt.sum() > 0.0);

  io::RgbdSample inv = io::load_sample(m.entries[0], opt, true);
  for (size_t i = 0; i < inv.depth.data.size(); ++i)
    CHECK(inv.depth.data[i] == doctest::Approx(1.0 - s.depth.data[i]));
}

TEST_CASE("constant depth maps normalize to zero with a warning") {
  fs::path root = fresh_dir("flatdepth");
  fs::create_directories(root / "RGB");
  fs::create_directories(root / "depth");
  fs::create_directories(root / "GT");
  io::write_image_chw(ramp_image(3, 8, 8, 0.1), (root / "RGB" / "f.png").string());
  io::write_image_chw(Tensor::full({1, 8, 8}, 0.5), (root / "depth" / "f.png").string());
  io::write_image_chw(binary_square(8, 8), (root / "GT" / "f.png").string());

  io::DatasetManifest m = io::load_dataset(root.string(), "flat");
  std::vector<std::string> warnings;
  io::LoadOptions opt;
  opt.side = 8;
  io::RgbdSample s = io::load_sample(m.entries[0], opt, false, &warnings);
  for (double v : s.depth.data) CHECK(v == 0.0);
  CHECK(!warnings.empty());
}

TEST_CASE("rgb standardization shifts each channel by its statistics") {
  Tensor rgb = Tensor::full({3, 2, 2}, 0.5);
  io::NormStats ns;
  Tensor out = io::normalize_rgb(rgb, ns);
  for (int64_t c = 0; c < 3; ++c) {
    double want = (0.5 - ns.mean[static_cast<size_t>(c)]) / ns.stdev[static_cast<size_t>(c)];
    CHECK(out.at(c, 0, 0) == doctest::Approx(want));
    CHECK(out.at(c, 1, 1) == doctest::Approx(want));
  }
}

TEST_CASE("split takes seeded per-source counts and keeps remainders as tests") {
  io::DatasetManifest a, b;
  a.name = "srcA";
  b.name = "srcB";
  for (int i = 0; i < 30; ++i)
    a.entries.push_back({"a" + std::to_string(i), "ra", "da", "ga"});
  for (int i = 0; i < 14; ++i)
    b.entries.push_back({"b" + std::to_string(i), "rb", "db", "gb"});

  io::SplitSpec spec;
  spec.seed = 7;
  spec.train_counts = {{"srcA", 21}, {"srcB", 9}};
  io::SplitResult r = io::materialize_split({a, b}, spec);
  CHECK(r.train.entries.size() == 30);
  CHECK(r.tests.size() == 2);
  CHECK(r.tests[0].entries.size() == 9);
  CHECK(r.tests[1].entries.size() == 5);

  // train and the matching test set are disjoint
  std::set<std::string> train_ids;
  for (const auto& e : r.train.entries) train_ids.insert(e.id);
  CHECK(train_ids.size() == 30);
  for (const auto& t : r.tests)
    for (const auto& e : t.entries) CHECK(train_ids.count(e.id) == 0);

  // same seed reproduces the split; a different seed changes it
  io::SplitResult r2 = io::materialize_split({a, b}, spec);
  for (size_t i = 0; i < r.train.entries.size(); ++i)
    CHECK(r.train.entries[i].id == r2.train.entries[i].id);
  spec.seed = 8;
  io::SplitResult r3 = io::materialize_split({a, b}, spec);
  bool same = true;
  for (size_t i = 0; i < r.train.entries.size(); ++i)
    same = same && r.train.entries[i].id == r3.train.entries[i].id;
  CHECK(!same);

  spec.train_counts = {{"srcA", 31}};
  CHECK_THROWS(io::materialize_split({a, b}, spec));
}

TEST_CASE("saliency maps survive a save/load round trip to within quantization") {
  fs::path root = fresh_dir("sal");
  Tensor map({1, 6, 6});
  Rng rng(31);
  for (double& v : map.data) v = rng.uniform();
  std::string p = (root / "m.png").string();
  io::save_saliency(map, p, 6, 6);
  Tensor back = io::read_saliency(p);
  CHECK(back.shape == map.shape);
  for (size_t i = 0; i < map.data.size(); ++i)
    CHECK(std::fabs(back.data[i] - map.data[i]) <= 0.5 / 255.0 + 1e-12);

  // binary maps are lossless
  Tensor bin = binary_square(6, 6);
  io::save_saliency(bin, p, 6, 6);
  Tensor bb = io::read_saliency(p);
  CHECK(bb.data == bin.data);

  // saving at ground-truth resolution resamples
  io::save_saliency(map, p, 12, 9);
  Tensor up = io::read_saliency(p);
  CHECK(up.shape == std::vector<int64_t>{1, 12, 9});
}

TEST_CASE("grayscale sources are replicated to three channels") {
  fs::path root = fresh_dir("gray");
  fs::create_directories(root / "RGB");
  fs::create_directories(root / "depth");
  fs::create_directories(root / "GT");
  io::write_image_chw(ramp_image(1, 10, 10, 0.2), (root / "RGB" / "g.png").string());
  io::write_image_chw(ramp_image(1, 10, 10, 0.6), (root / "depth" / "g.png").string());
  io::write_image_chw(binary_square(10, 10), (root / "GT" / "g.png").string());

  io::DatasetManifest m = io::load_dataset(root.string(), "gray");
  io::LoadOptions opt;
  opt.side = 10;
  io::RgbdSample s = io::load_sample(m.entries[0], opt);
  CHECK(s.rgb.shape == std::vector<int64_t>{3, 10, 10});
  for (int64_t y = 0; y < 10; ++y)
    for (int64_t x = 0; x < 10; ++x) {
      CHECK(s.rgb.at(0, y, x) == s.rgb.at(1, y, x));
      CHECK(s.rgb.at(1, y, x) == s.rgb.at(2, y, x));
    }
}
