#include "bbs/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <stdexcept>

#include <nlohmann/json.hpp>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace bbs::io {

namespace {

const std::array<const char*, 6> kImageExts{".png", ".jpg", ".jpeg", ".bmp", ".pgm", ".ppm"};

bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return std::find(kImageExts.begin(), kImageExts.end(), ext) != kImageExts.end();
}

std::map<std::string, std::string> scan_dir(const fs::path& dir) {
  std::map<std::string, std::string> by_stem;
  if (!fs::is_directory(dir)) return by_stem;
  for (const auto& de : fs::directory_iterator(dir))
    if (de.is_regular_file() && is_image_file(de.path())) by_stem[de.path().stem().string()] = de.path().string();
  return by_stem;
}

}  // namespace

DatasetManifest load_dataset(const std::string& root, const std::string& name, bool invert_depth,
                             std::vector<std::string>* issues) {
  fs::path rp(root);
  if (!fs::is_directory(rp))
    throw std::runtime_error("load_dataset: root is not a directory: " + root);
  auto rgb = scan_dir(rp / "RGB");
  auto depth = scan_dir(rp / "depth");
  auto gt = scan_dir(rp / "GT");

  DatasetManifest m;
  m.name = name.empty() ? rp.filename().string() : name;
  m.root = root;
  m.invert_depth = invert_depth;
  for (const auto& [stem, rgb_path] : rgb) {
    auto di = depth.find(stem), gi = gt.find(stem);
    if (di == depth.end() || gi == gt.end()) {
      if (issues)
        issues->push_back(stem + ": missing " + std::string(di == depth.end() ? "depth" : "GT") + " counterpart");
      continue;
    }
    m.entries.push_back({stem, rgb_path, di->second, gi->second});
  }
  if (issues)
    for (const auto& [stem, p] : depth)
      if (!rgb.count(stem)) issues->push_back(stem + ": depth file without RGB counterpart");
  if (m.entries.empty())
    throw std::runtime_error("load_dataset: no complete RGB/depth/GT triples under " + root);
  return m;
}

std::string manifest_to_json(const DatasetManifest& m) {
  json j;
  j["name"] = m.name;
  j["root"] = m.root;
  j["invert_depth"] = m.invert_depth;
  j["entries"] = json::array();
  for (const auto& e : m.entries)
    j["entries"].push_back({{"id", e.id}, {"rgb", e.rgb_path}, {"depth", e.depth_path}, {"gt", e.gt_path}});
  return j.dump(2);
}

DatasetManifest manifest_from_json(const std::string& text) {
  json j = json::parse(text);
  DatasetManifest m;
  m.name = j.at("name").get<std::string>();
  m.root = j.at("root").get<std::string>();
  m.invert_depth = j.value("invert_depth", false);
  for (const auto& e : j.at("entries"))
    m.entries.push_back({e.at("id").get<std::string>(), e.at("rgb").get<std::string>(),
                         e.at("depth").get<std::string>(), e.at("gt").get<std::string>()});
  return m;
}

Tensor read_image_chw(const std::string& path) {
  cv::Mat img = cv::imread(path, cv::IMREAD_UNCHANGED);
  if (img.empty()) throw std::runtime_error("read_image_chw: cannot decode " + path);
  double scale;
  switch (img.depth()) {
    case CV_8U: scale = 1.0 / 255.0; break;
    case CV_16U: scale = 1.0 / 65535.0; break;
    default: throw std::runtime_error("read_image_chw: unsupported bit depth in " + path);
  }
  int ch = img.channels();
  if (ch != 1 && ch != 3 && ch != 4)
    throw std::runtime_error("read_image_chw: unsupported channel count in " + path);
  int out_c = ch == 1 ? 1 : 3;
  Tensor t({out_c, img.rows, img.cols});
  for (int y = 0; y < img.rows; ++y)
    for (int x = 0; x < img.cols; ++x) {
      if (ch == 1) {
        double v = img.depth() == CV_8U ? img.at<uint8_t>(y, x) : img.at<uint16_t>(y, x);
        t.at(0, y, x) = v * scale;
      } else {
        // OpenCV stores BGR(A)
        double b, g, r;
        if (img.depth() == CV_8U) {
          const uint8_t* px = img.ptr<uint8_t>(y) + x * ch;
          b = px[0]; g = px[1]; r = px[2];
        } else {
          const uint16_t* px = img.ptr<uint16_t>(y) + x * ch;
          b = px[0]; g = px[1]; r = px[2];
        }
        t.at(0, y, x) = r * scale;
        t.at(1, y, x) = g * scale;
        t.at(2, y, x) = b * scale;
      }
    }
  return t;
}

void write_image_chw(const Tensor& chw01, const std::string& path) {
  if (chw01.rank() != 3 || (chw01.dim(0) != 1 && chw01.dim(0) != 3))
    throw std::invalid_argument("write_image_chw: want {1|3,H,W}, got " + shape_str(chw01.shape));
  int h = static_cast<int>(chw01.dim(1)), w = static_cast<int>(chw01.dim(2));
  cv::Mat img(h, w, chw01.dim(0) == 1 ? CV_8UC1 : CV_8UC3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      auto q = [](double v) {
        return static_cast<uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
      };
      if (chw01.dim(0) == 1)
        img.at<uint8_t>(y, x) = q(chw01.at(0, y, x));
      else {
        uint8_t* px = img.ptr<uint8_t>(y) + x * 3;
        px[0] = q(chw01.at(2, y, x));
        px[1] = q(chw01.at(1, y, x));
        px[2] = q(chw01.at(0, y, x));
      }
    }
  if (!cv::imwrite(path, img)) throw std::runtime_error("write_image_chw: cannot write " + path);
}

RgbdSample load_sample(const DatasetEntry& e, const LoadOptions& opt, bool invert_depth,
                       std::vector<std::string>* warnings) {
  RgbdSample s;
  s.id = e.id;

  Tensor rgb = read_image_chw(e.rgb_path);
  if (rgb.dim(0) == 1) {
    Tensor rgb3({3, rgb.dim(1), rgb.dim(2)});
    for (int c = 0; c < 3; ++c)
      std::copy(rgb.data.begin(), rgb.data.end(), rgb3.data.begin() + c * rgb.dim(1) * rgb.dim(2));
    rgb = std::move(rgb3);
  }
  s.rgb = resize_bilinear(rgb, opt.side, opt.side);

  Tensor d = read_image_chw(e.depth_path);
  if (d.dim(0) != 1) {
    Tensor d1({1, d.dim(1), d.dim(2)});
    for (int64_t i = 0; i < d.dim(1) * d.dim(2); ++i) d1.data[static_cast<size_t>(i)] = d.data[static_cast<size_t>(i)];
    d = std::move(d1);
  }
  d = resize_bilinear(d, opt.side, opt.side);
  double lo = d.data[0], hi = d.data[0];
  for (double v : d.data) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (hi - lo < 1e-12) {
    if (warnings) warnings->push_back(e.id + ": constant depth map, using zeros");
    d.fill(0.0);
  } else {
    for (double& v : d.data) v = (v - lo) / (hi - lo);
    if (invert_depth)
      for (double& v : d.data) v = 1.0 - v;
  }
  s.depth = std::move(d);

  Tensor g = read_image_chw(e.gt_path);
  if (g.dim(0) != 1) {
    Tensor g1({1, g.dim(1), g.dim(2)});
    for (int64_t i = 0; i < g.dim(1) * g.dim(2); ++i) g1.data[static_cast<size_t>(i)] = g.data[static_cast<size_t>(i)];
    g = std::move(g1);
  }
  g = resize_nearest(g, opt.side, opt.side);
  for (double& v : g.data) v = v > 0.5 ? 1.0 : 0.0;
  s.gt = std::move(g);
  return s;
}

Tensor normalize_rgb(const Tensor& rgb01, const NormStats& ns) {
  if (rgb01.rank() != 3 || rgb01.dim(0) != 3)
    throw std::invalid_argument("normalize_rgb: want {3,H,W}");
  Tensor out = rgb01;
  int64_t hw = out.dim(1) * out.dim(2);
  for (int c = 0; c < 3; ++c)
    for (int64_t i = 0; i < hw; ++i) {
      double& v = out.data[static_cast<size_t>(c * hw + i)];
      v = (v - ns.mean[static_cast<size_t>(c)]) / ns.stdev[static_cast<size_t>(c)];
    }
  return out;
}

SplitResult materialize_split(const std::vector<DatasetManifest>& sources, const SplitSpec& spec) {
  SplitResult r;
  r.train.name = "train";
  std::map<std::string, int> seen_ids;
  for (const auto& src : sources) {
    int64_t want = 0;
    for (const auto& [name, count] : spec.train_counts)
      if (name == src.name) want = count;
    if (want > static_cast<int64_t>(src.entries.size()))
      throw std::invalid_argument("materialize_split: " + src.name + " has " + std::to_string(src.entries.size()) +
                                  " entries, asked for " + std::to_string(want));
    std::vector<size_t> order(src.entries.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(Rng::mix(spec.seed, std::hash<std::string>{}(src.name)));
    for (size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(i) - 1))]);

    DatasetManifest rest;
    rest.name = src.name;
    rest.root = src.root;
    rest.invert_depth = src.invert_depth;
    for (size_t i = 0; i < order.size(); ++i) {
      const DatasetEntry& e = src.entries[order[i]];
      if (static_cast<int64_t>(i) < want) {
        if (++seen_ids[e.id] > 1) r.warnings.push_back("duplicate id in training pool: " + e.id);
        r.train.entries.push_back(e);
      } else {
        rest.entries.push_back(e);
      }
    }
    std::sort(rest.entries.begin(), rest.entries.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    r.tests.push_back(std::move(rest));
  }
  return r;
}

void save_saliency(const Tensor& map, const std::string& path, int64_t out_h, int64_t out_w) {
  if (map.rank() != 3 || map.dim(0) != 1)
    throw std::invalid_argument("save_saliency: want {1,H,W}, got " + shape_str(map.shape));
  for (double v : map.data)
    if (v < -1e-9 || v > 1.0 + 1e-9 || !std::isfinite(v))
      throw std::invalid_argument("save_saliency: map value " + std::to_string(v) + " outside [0,1]");
  Tensor up = resize_bilinear(map, out_h, out_w);
  write_image_chw(up, path);
}

Tensor read_saliency(const std::string& path) {
  Tensor t = read_image_chw(path);
  if (t.dim(0) != 1) throw std::runtime_error("read_saliency: expected grayscale file at " + path);
  return t;
}

}  // namespace bbs::io
