#include <png.h>

#include <algorithm>
#include <cstring>

#include "json.hpp"
#include "semican/io.hpp"

namespace semican {

using nlohmann::json;

InstanceMask read_png_mask(const fs::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
    throw Error(ErrorCode::MalformedFile, path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_GRAY;
  InstanceMask mask(static_cast<int>(image.width), static_cast<int>(image.height));
  if (!png_image_finish_read(&image, nullptr, mask.raster.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw Error(ErrorCode::MalformedFile, path.string() + ": " + msg);
  }
  return mask;
}

void write_png_mask(const fs::path& path, const InstanceMask& mask) {
  require(mask.width > 0 && mask.height > 0, "mask must be non-empty");
  require(mask.raster.size() == static_cast<std::size_t>(mask.width) * mask.height, "mask raster size mismatch");
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(mask.width);
  image.height = static_cast<png_uint_32>(mask.height);
  image.format = PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&image, path.string().c_str(), 0, mask.raster.data(), 0, nullptr)) {
    throw Error(ErrorCode::IoError, path.string() + ": " + image.message);
  }
}

std::vector<InstanceMask> read_masks(const fs::path& dir, const std::string& frame_id, int width, int height,
                                     const MaskFilter& filter) {
  const fs::path manifest = dir / (frame_id + ".json");
  if (!fs::exists(manifest)) throw Error(ErrorCode::ManifestMissing, manifest.string() + " not found");
  json doc;
  try {
    doc = json::parse(read_text_file(manifest));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedFile, manifest.string() + ": " + e.what());
  }
  const json& entries = doc.is_object() && doc.contains("masks") ? doc.at("masks") : doc;
  if (!entries.is_array()) throw Error(ErrorCode::MalformedFile, manifest.string() + ": expected a list of masks");

  std::vector<InstanceMask> out;
  for (const auto& entry : entries) {
    std::string png_path, cls;
    double score = 1.0;
    int instance_id = 0;
    try {
      png_path = entry.at("png_path").get<std::string>();
      cls = entry.value("class", std::string());
      score = entry.value("score", 1.0);
      instance_id = entry.value("instance_id", 0);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::MalformedFile, manifest.string() + ": " + e.what());
    }
    if (score < filter.min_score) continue;
    if (!filter.classes.empty() && std::find(filter.classes.begin(), filter.classes.end(), cls) == filter.classes.end()) {
      continue;
    }
    InstanceMask mask = read_png_mask(dir / png_path);
    if (mask.width != width || mask.height != height) {
      throw Error(ErrorCode::SizeMismatch, png_path + " is " + std::to_string(mask.width) + "x" +
                                               std::to_string(mask.height) + ", calibration expects " +
                                               std::to_string(width) + "x" + std::to_string(height));
    }
    mask.class_label = cls;
    mask.score = score;
    mask.instance_id = instance_id;
    out.push_back(std::move(mask));
  }
  return out;
}

void write_masks(const fs::path& dir, const std::string& frame_id, const std::vector<InstanceMask>& masks) {
  json entries = json::array();
  for (std::size_t k = 0; k < masks.size(); ++k) {
    const std::string name = frame_id + "_" + std::to_string(k) + ".png";
    write_png_mask(dir / name, masks[k]);
    entries.push_back({{"png_path", name}, {"class", masks[k].class_label}, {"score", masks[k].score},
                       {"instance_id", masks[k].instance_id}});
  }
  write_text_file(dir / (frame_id + ".json"), entries.dump(2) + "\n");
}

}  // namespace semican
