#include "ct3d/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <json.hpp>
#include <vector>

#include "ct3d/errors.hpp"

namespace ct3d {

using nlohmann::json;

namespace {

float load_f32_le(const unsigned char* p) {
  std::array<unsigned char, 4> raw{p[0], p[1], p[2], p[3]};
  if constexpr (std::endian::native == std::endian::big) std::reverse(raw.begin(), raw.end());
  return std::bit_cast<float>(raw);
}

void store_f32_le(std::vector<unsigned char>& out, float v) {
  auto raw = std::bit_cast<std::array<unsigned char, 4>>(v);
  if constexpr (std::endian::native == std::endian::big) std::reverse(raw.begin(), raw.end());
  out.insert(out.end(), raw.begin(), raw.end());
}

}  // namespace

PointCloud read_kitti_bin(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                         std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed on " + path.string());
  if (bytes.size() % 16 != 0)
    throw FormatError(path.string() + ": size " + std::to_string(bytes.size()) +
                      " is not a multiple of 16 bytes");
  PointCloud cloud;
  cloud.feature_dim = 1;
  const std::size_t n = bytes.size() / 16;
  cloud.points.reserve(n);
  cloud.features.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned char* p = bytes.data() + 16 * i;
    cloud.points.push_back({load_f32_le(p), load_f32_le(p + 4), load_f32_le(p + 8)});
    cloud.features.push_back(load_f32_le(p + 12));
  }
  return cloud;
}

void write_kitti_bin(const std::filesystem::path& path, const PointCloud& cloud) {
  std::vector<unsigned char> bytes;
  bytes.reserve(cloud.size() * 16);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.points[i];
    store_f32_le(bytes, static_cast<float>(p.x));
    store_f32_le(bytes, static_cast<float>(p.y));
    store_f32_le(bytes, static_cast<float>(p.z));
    store_f32_le(bytes, cloud.feature_dim > 0 ? static_cast<float>(cloud.feature(i)[0]) : 0.0f);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write on " + path.string());
}

void save_scene(const std::filesystem::path& json_path, const Scene& scene, bool inline_points) {
  json j;
  j["scene_id"] = scene.scene_id;
  j["gt_boxes"] = json::array();
  for (const Box3D& b : scene.gt_boxes) j["gt_boxes"].push_back(b.to_array());
  if (inline_points) {
    json pts = json::array();
    for (std::size_t i = 0; i < scene.cloud.size(); ++i) {
      const Vec3& p = scene.cloud.points[i];
      json row = {p.x, p.y, p.z};
      for (double f : scene.cloud.feature(i)) row.push_back(f);
      pts.push_back(std::move(row));
    }
    j["points"] = std::move(pts);
  } else {
    std::filesystem::path bin = json_path;
    bin.replace_extension(".bin");
    write_kitti_bin(bin, scene.cloud);
    j["points_bin"] = bin.filename().string();
  }
  std::ofstream out(json_path);
  if (!out) throw IoError("cannot write " + json_path.string());
  out << j.dump(1) << '\n';
}

Scene load_scene(const std::filesystem::path& json_path) {
  std::ifstream in(json_path);
  if (!in) throw IoError("cannot open " + json_path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(json_path.string() + ": " + e.what());
  }
  Scene scene;
  try {
    scene.scene_id = j.at("scene_id").get<std::string>();
    for (const auto& row : j.at("gt_boxes")) {
      const auto v = row.get<std::vector<double>>();
      const Box3D b = Box3D::from_array(v);
      validate(b);
      scene.gt_boxes.push_back(b);
    }
    if (j.contains("points_bin")) {
      scene.cloud = read_kitti_bin(json_path.parent_path() / j.at("points_bin").get<std::string>());
    } else {
      const auto& pts = j.at("points");
      scene.cloud.feature_dim = pts.empty() ? 1 : pts.front().size() - 3;
      for (const auto& row : pts) {
        const auto v = row.get<std::vector<double>>();
        if (v.size() != 3 + scene.cloud.feature_dim) throw FormatError("ragged point rows");
        scene.cloud.push_back({v[0], v[1], v[2]}, std::span<const double>(v).subspan(3));
      }
    }
  } catch (const json::exception& e) {
    throw FormatError(json_path.string() + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw FormatError(json_path.string() + ": " + e.what());
  }
  return scene;
}

namespace {

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(1) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace

void save_proposals(const std::filesystem::path& path, const ProposalSet& proposals) {
  json j;
  j["boxes"] = json::array();
  for (const Box3D& b : proposals.boxes) j["boxes"].push_back(b.to_array());
  j["scores"] = proposals.scores;
  write_json(path, j);
}

ProposalSet load_proposals(const std::filesystem::path& path) {
  const json j = read_json(path);
  ProposalSet out;
  try {
    for (const auto& row : j.at("boxes")) {
      const Box3D b = Box3D::from_array(row.get<std::vector<double>>());
      validate(b);
      out.boxes.push_back(b);
    }
    out.scores = j.at("scores").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  if (out.scores.size() != out.boxes.size())
    throw FormatError(path.string() + ": boxes and scores differ in length");
  return out;
}

void save_detections(const std::filesystem::path& path, std::span<const Detection> detections) {
  json j = json::array();
  for (const Detection& d : detections) j.push_back({{"box", d.box.to_array()}, {"confidence", d.confidence}});
  write_json(path, j);
}

}  // namespace ct3d
