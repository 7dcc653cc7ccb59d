#include "pgwm/phantom/dataset.hpp"

#include <fstream>
#include <json.hpp>

#include "pgwm/phantom/image_io.hpp"

namespace pgwm {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string frame_file_name(int frame_index, bool lossless) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%05d.%s", frame_index, lossless ? "f32" : "png");
  return buf;
}

} // namespace

DatasetWriter::DatasetWriter(fs::path root, DatasetMeta meta, bool force)
    : root_(std::move(root)), meta_(meta) {
  if (fs::exists(root_) && !fs::is_empty(root_)) {
    if (!force)
      throw IoError("dataset root exists and is not empty (use force): " + root_.string());
    fs::remove_all(root_);
  }
  fs::create_directories(root_);
}

void DatasetWriter::add_scan(const Scan &scan, const std::string &split) {
  PGWM_CHECK(!finalized_, InvalidArgument, "dataset writer already finalized");
  PGWM_CHECK(!scan.frames.empty(), InvalidArgument, "cannot write an empty scan");
  PGWM_CHECK(split == "train" || split == "test", InvalidArgument,
             "split must be 'train' or 'test', got " + split);

  ScanInfo info;
  info.id = static_cast<int>(scans_.size());
  info.name = "scan_" + std::to_string(info.id);
  info.frames = static_cast<int>(scan.frames.size());
  info.volume_seed = scan.volume_seed;
  info.trajectory_seed = scan.trajectory_seed;
  info.split = split;

  const fs::path dir = root_ / info.name;
  fs::create_directories(dir);
  std::ofstream poses(dir / "poses.jsonl");
  if (!poses) throw IoError("cannot open for writing: " + (dir / "poses.jsonl").string());

  for (const auto &frame : scan.frames) {
    PGWM_CHECK(frame.h == meta_.image_h && frame.w == meta_.image_w, InvalidArgument,
               "frame size does not match dataset meta");
    const std::string file = frame_file_name(frame.frame_index, meta_.lossless);
    if (meta_.lossless)
      write_f32(dir / file, frame.pixels);
    else
      write_png_gray8(dir / file, frame.pixels, frame.h, frame.w);

    json rec;
    rec["frame_index"] = frame.frame_index;
    rec["t"] = {frame.pose.t[0], frame.pose.t[1], frame.pose.t[2]};
    rec["r"] = {frame.pose.r[0], frame.pose.r[1], frame.pose.r[2]};
    rec["image"] = file;
    poses << rec.dump() << "\n";

    info.poses.push_back(frame.pose);
    info.image_files.push_back(file);
  }
  scans_.push_back(std::move(info));
}

void DatasetWriter::finalize() {
  PGWM_CHECK(!finalized_, InvalidArgument, "dataset writer already finalized");
  json manifest;
  manifest["format_version"] = kDatasetFormatVersion;
  manifest["image_h"] = meta_.image_h;
  manifest["image_w"] = meta_.image_w;
  manifest["pixel_spacing_mm"] = meta_.pixel_spacing;
  manifest["voxel_spacing_mm"] = meta_.voxel_spacing;
  manifest["volume_seed"] = meta_.volume_seed;
  manifest["volume_size"] = meta_.volume_size;
  manifest["lossless"] = meta_.lossless;

  int total = 0;
  json scans = json::array();
  for (const auto &s : scans_) {
    json js;
    js["id"] = s.id;
    js["name"] = s.name;
    js["frames"] = s.frames;
    js["volume_seed"] = s.volume_seed;
    js["trajectory_seed"] = s.trajectory_seed;
    js["split"] = s.split;
    scans.push_back(js);
    total += s.frames;
  }
  manifest["scans"] = scans;
  manifest["total_frames"] = total;

  std::ofstream out(root_ / "manifest.json");
  if (!out) throw IoError("cannot open for writing: " + (root_ / "manifest.json").string());
  out << manifest.dump(2) << "\n";
  finalized_ = true;
}

Dataset Dataset::open(const fs::path &root) {
  const fs::path manifest_path = root / "manifest.json";
  if (!fs::exists(manifest_path))
    throw FormatError("missing dataset manifest: " + manifest_path.string());

  json manifest;
  try {
    std::ifstream in(manifest_path);
    in >> manifest;
  } catch (const std::exception &e) {
    throw FormatError("corrupt manifest " + manifest_path.string() + ": " + e.what());
  }

  Dataset ds;
  ds.root_ = root;
  try {
    const int version = manifest.at("format_version").get<int>();
    if (version != kDatasetFormatVersion)
      throw FormatError("unsupported dataset format version " + std::to_string(version) +
                        " in " + manifest_path.string());
    ds.meta_.image_h = manifest.at("image_h").get<int>();
    ds.meta_.image_w = manifest.at("image_w").get<int>();
    ds.meta_.pixel_spacing = manifest.at("pixel_spacing_mm").get<double>();
    ds.meta_.voxel_spacing = manifest.at("voxel_spacing_mm").get<double>();
    ds.meta_.volume_seed = manifest.at("volume_seed").get<uint64_t>();
    ds.meta_.volume_size = manifest.at("volume_size").get<int>();
    ds.meta_.lossless = manifest.at("lossless").get<bool>();

    for (const auto &js : manifest.at("scans")) {
      ScanInfo info;
      info.id = js.at("id").get<int>();
      info.name = js.at("name").get<std::string>();
      info.frames = js.at("frames").get<int>();
      info.volume_seed = js.at("volume_seed").get<uint64_t>();
      info.trajectory_seed = js.at("trajectory_seed").get<uint64_t>();
      info.split = js.at("split").get<std::string>();
      ds.scans_.push_back(std::move(info));
    }
  } catch (const json::exception &e) {
    throw FormatError("corrupt manifest " + manifest_path.string() + ": " + e.what());
  }

  for (auto &info : ds.scans_) {
    const fs::path poses_path = root / info.name / "poses.jsonl";
    std::ifstream in(poses_path);
    if (!in) throw FormatError("missing pose file: " + poses_path.string());
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      ++line_no;
      json rec;
      try {
        rec = json::parse(line);
        Pose pose;
        const auto &t = rec.at("t");
        const auto &r = rec.at("r");
        for (int i = 0; i < 3; ++i) pose.t[i] = t.at(i).get<double>();
        for (int i = 0; i < 3; ++i) pose.r[i] = r.at(i).get<double>();
        const int idx = rec.at("frame_index").get<int>();
        if (idx != static_cast<int>(info.poses.size()))
          throw FormatError("non-contiguous frame_index in " + poses_path.string());
        info.poses.push_back(pose);
        info.image_files.push_back(rec.at("image").get<std::string>());
      } catch (const json::exception &e) {
        throw FormatError("corrupt pose record (line " + std::to_string(line_no) + ") in " +
                          poses_path.string() + ": " + e.what());
      }
    }
    if (static_cast<int>(info.poses.size()) != info.frames)
      throw FormatError("pose count mismatch in " + poses_path.string() + ": manifest says " +
                        std::to_string(info.frames) + ", file has " +
                        std::to_string(info.poses.size()));
  }
  ds.cache_.resize(ds.scans_.size());
  for (size_t i = 0; i < ds.scans_.size(); ++i) ds.cache_[i].resize(ds.scans_[i].frames);
  return ds;
}

int Dataset::total_frames() const {
  int total = 0;
  for (const auto &s : scans_) total += s.frames;
  return total;
}

std::vector<int> Dataset::scan_indices_for_split(const std::string &split) const {
  std::vector<int> out;
  for (size_t i = 0; i < scans_.size(); ++i)
    if (scans_[i].split == split) out.push_back(static_cast<int>(i));
  return out;
}

SliceImage Dataset::load_frame(int scan_idx, int frame_idx) const {
  PGWM_CHECK(scan_idx >= 0 && scan_idx < static_cast<int>(scans_.size()), InvalidArgument,
             "load_frame: scan index out of range");
  const ScanInfo &info = scans_[scan_idx];
  PGWM_CHECK(frame_idx >= 0 && frame_idx < info.frames, InvalidArgument,
             "load_frame: frame index out of range");

  SliceImage img;
  img.h = meta_.image_h;
  img.w = meta_.image_w;
  img.pose = info.poses[frame_idx];
  img.scan_id = info.id;
  img.frame_index = frame_idx;

  auto &slot = cache_[scan_idx][frame_idx];
  if (slot.has_value()) {
    img.pixels = *slot;
    return img;
  }
  const fs::path file = root_ / info.name / info.image_files[frame_idx];
  if (meta_.lossless) {
    img.pixels = read_f32(file, static_cast<size_t>(img.h) * img.w);
  } else {
    int h = 0, w = 0;
    img.pixels = read_png_gray8(file, h, w);
    if (h != img.h || w != img.w)
      throw FormatError("image size mismatch in " + file.string());
  }
  return img;
}

void Dataset::preload_images() {
  if (cached_) return;
  for (size_t s = 0; s < scans_.size(); ++s)
    for (int f = 0; f < scans_[s].frames; ++f) {
      if (!cache_[s][f].has_value()) cache_[s][f] = load_frame(static_cast<int>(s), f).pixels;
    }
  cached_ = true;
}

} // namespace pgwm
