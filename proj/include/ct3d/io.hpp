#pragma once

#include <filesystem>
#include <span>

#include "ct3d/detection.hpp"
#include "ct3d/geometry.hpp"
#include "ct3d/scene.hpp"

namespace ct3d {

// KITTI velodyne scan: little-endian float32 (x, y, z, reflectance) per point.
// Throws IoError if unreadable, FormatError if the size is not a multiple of 16.
PointCloud read_kitti_bin(const std::filesystem::path& path);

// Writes x, y, z and the first raw feature (0 when the cloud has none).
void write_kitti_bin(const std::filesystem::path& path, const PointCloud& cloud);

// One JSON document per scene:
//   {"scene_id": "...", "gt_boxes": [[x,y,z,l,w,h,yaw], ...],
//    "points": [[x,y,z,r], ...]}            (inline)
//   or "points_bin": "<file>.bin"             (sibling KITTI file)
void save_scene(const std::filesystem::path& json_path, const Scene& scene, bool inline_points);
Scene load_scene(const std::filesystem::path& json_path);

// {"boxes": [[x,y,z,l,w,h,yaw], ...], "scores": [...]}
void save_proposals(const std::filesystem::path& path, const ProposalSet& proposals);
ProposalSet load_proposals(const std::filesystem::path& path);

// [{"box": [x,y,z,l,w,h,yaw], "confidence": c}, ...]
void save_detections(const std::filesystem::path& path, std::span<const Detection> detections);

}  // namespace ct3d
