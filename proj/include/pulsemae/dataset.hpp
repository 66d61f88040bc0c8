#pragma once

#include <string>
#include <vector>

#include "pulsemae/synthdata.hpp"

namespace pmae {

// On-disk clip layout: <id>.clip.ndt1 (3xTxHxW f32), <id>.bvp.ndt1
// (length-T f64), <id>.meta (key = value text with one line per occluder).

void write_clip_files(const std::string& dir, const std::string& id,
                      const VideoClip& clip, const ClipMeta& meta);

std::pair<VideoClip, ClipMeta> read_clip_files(const std::string& dir,
                                               const std::string& id);

std::string meta_to_text(const ClipMeta& meta, const std::string& bvp_file);
ClipMeta meta_from_text(const std::string& text, const std::string& dir);

struct DatasetIndex {
  struct Row {
    std::string id;
    std::string split;  // train | val | test
    uint64_t seed = 0;
    uint64_t checksum = 0;  // fnv1a64 over the clip file bytes
  };
  std::vector<Row> rows;

  std::vector<Row> split(const std::string& name) const;
};

void write_manifest(const std::string& dir, const DatasetIndex& index);
DatasetIndex read_manifest(const std::string& dir);

uint64_t fnv1a64(const std::string& bytes);
uint64_t file_checksum(const std::string& path);

}  // namespace pmae
