#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pgwm/phantom/trajectory.hpp"

namespace pgwm {

// On-disk dataset layout:
//   <root>/manifest.json           format version, volume seeds, scan table
//   <root>/scan_<k>/poses.jsonl    one record per frame (pose + image file)
//   <root>/scan_<k>/frame_*.png    8-bit grayscale (or .f32 when lossless)
constexpr int kDatasetFormatVersion = 1;

struct DatasetMeta {
  int image_h = 64;
  int image_w = 64;
  double pixel_spacing = 1.0;
  double voxel_spacing = 1.0;
  uint64_t volume_seed = 0;
  int volume_size = 64;
  bool lossless = false;
};

struct ScanInfo {
  int id = 0;
  std::string name;  // directory name, "scan_<id>"
  int frames = 0;
  uint64_t volume_seed = 0;
  uint64_t trajectory_seed = 0;
  std::string split; // "train" | "test"
  std::vector<Pose> poses;
  std::vector<std::string> image_files;
};

// Streaming writer; owns its root directory exclusively while open.
class DatasetWriter {
public:
  DatasetWriter(std::filesystem::path root, DatasetMeta meta, bool force = false);
  void add_scan(const Scan &scan, const std::string &split);
  void finalize(); // writes the manifest; no further add_scan calls
  const std::filesystem::path &root() const { return root_; }

private:
  std::filesystem::path root_;
  DatasetMeta meta_;
  std::vector<ScanInfo> scans_;
  bool finalized_ = false;
};

// Lazy per-frame reader. Poses and the manifest are loaded eagerly (small);
// images are decoded on first access. preload_images() may be called before
// handing the dataset to parallel workers; afterwards reads are const.
class Dataset {
public:
  static Dataset open(const std::filesystem::path &root);

  const DatasetMeta &meta() const { return meta_; }
  const std::vector<ScanInfo> &scans() const { return scans_; }
  int total_frames() const;

  std::vector<int> scan_indices_for_split(const std::string &split) const;

  SliceImage load_frame(int scan_idx, int frame_idx) const;
  void preload_images();

private:
  std::filesystem::path root_;
  DatasetMeta meta_;
  std::vector<ScanInfo> scans_;
  // cache[scan][frame]; empty until preload_images()
  mutable std::vector<std::vector<std::optional<std::vector<float>>>> cache_;
  bool cached_ = false;
};

} // namespace pgwm
