#include "pulsemae/dataset.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "pulsemae/errors.hpp"
#include "pulsemae/ndt1.hpp"

namespace pmae {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string join_doubles(const std::vector<double>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += fmt(v[i]);
  }
  return out;
}

std::vector<double> split_doubles(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(std::stod(tok));
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open file: ", path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

uint64_t fnv1a64(const std::string& bytes) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

uint64_t file_checksum(const std::string& path) {
  return fnv1a64(read_file(path));
}

std::string meta_to_text(const ClipMeta& meta, const std::string& bvp_file) {
  std::ostringstream os;
  os << "hr_bpm = " << fmt(meta.hr_bpm) << "\n";
  os << "fs = " << fmt(meta.fs) << "\n";
  os << "seed = " << meta.seed << "\n";
  os << "face_rect = " << meta.face_x0 << " " << meta.face_y0 << " "
     << meta.face_x1 << " " << meta.face_y1 << "\n";
  os << "coverage_warning = " << (meta.coverage_warning ? 1 : 0) << "\n";
  os << "bvp_file = " << bvp_file << "\n";
  for (const auto& sp : meta.occlusions) {
    os << "occlusion = kind=" << occluder_kind_name(sp.kind)
       << " onset=" << sp.onset << " duration=" << sp.duration
       << " retention=" << fmt(sp.retention) << " key=" << sp.retention_key
       << " color=" << fmt(sp.color[0]) << "," << fmt(sp.color[1]) << ","
       << fmt(sp.color[2]) << " geometry=" << join_doubles(sp.geometry)
       << "\n";
  }
  return os.str();
}

ClipMeta meta_from_text(const std::string& text, const std::string& dir) {
  ClipMeta meta;
  std::istringstream in(text);
  std::string line;
  std::string bvp_file;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    size_t eq = line.find('=');
    require(eq != std::string::npos, "bad meta line: ", line);
    std::string key = line.substr(0, eq);
    while (!key.empty() && key.back() == ' ') key.pop_back();
    std::string val = line.substr(eq + 1);
    while (!val.empty() && val.front() == ' ') val.erase(val.begin());
    if (key == "hr_bpm") meta.hr_bpm = std::stod(val);
    else if (key == "fs") meta.fs = std::stod(val);
    else if (key == "seed") meta.seed = std::stoull(val);
    else if (key == "coverage_warning") meta.coverage_warning = val == "1";
    else if (key == "bvp_file") bvp_file = val;
    else if (key == "face_rect") {
      std::stringstream ss(val);
      ss >> meta.face_x0 >> meta.face_y0 >> meta.face_x1 >> meta.face_y1;
    } else if (key == "occlusion") {
      OcclusionSpec sp;
      std::stringstream ss(val);
      std::string field;
      while (ss >> field) {
        size_t feq = field.find('=');
        require(feq != std::string::npos, "bad occlusion field: ", field);
        std::string fk = field.substr(0, feq);
        std::string fv = field.substr(feq + 1);
        if (fk == "kind") sp.kind = occluder_kind_parse(fv);
        else if (fk == "onset") sp.onset = std::stoull(fv);
        else if (fk == "duration") sp.duration = std::stoull(fv);
        else if (fk == "retention") sp.retention = std::stod(fv);
        else if (fk == "key") sp.retention_key = std::stoull(fv);
        else if (fk == "color") {
          auto c = split_doubles(fv);
          require(c.size() == 3, "occlusion color needs 3 components");
          sp.color[0] = c[0];
          sp.color[1] = c[1];
          sp.color[2] = c[2];
        } else if (fk == "geometry") {
          sp.geometry = split_doubles(fv);
        } else {
          fail("unknown occlusion field: ", fk);
        }
      }
      meta.occlusions.push_back(std::move(sp));
    } else {
      fail("unknown meta key: ", key);
    }
  }
  if (!bvp_file.empty()) {
    auto t = ndt1_read_f64(dir + "/" + bvp_file);
    meta.bvp.assign(t.data(), t.data() + t.numel());
  }
  return meta;
}

void write_clip_files(const std::string& dir, const std::string& id,
                      const VideoClip& clip, const ClipMeta& meta) {
  ndt1_write(dir + "/" + id + ".clip.ndt1", clip.data);
  Tensor<double> bvp({meta.bvp.size()});
  std::copy(meta.bvp.begin(), meta.bvp.end(), bvp.data());
  ndt1_write(dir + "/" + id + ".bvp.ndt1", bvp);
  atomic_write_file(dir + "/" + id + ".meta",
                    meta_to_text(meta, id + ".bvp.ndt1"));
}

std::pair<VideoClip, ClipMeta> read_clip_files(const std::string& dir,
                                               const std::string& id) {
  VideoClip clip;
  clip.data = ndt1_read_f32(dir + "/" + id + ".clip.ndt1");
  require(clip.data.rank() == 4 && clip.data.shape()[0] == 3,
          "clip file must be [3,T,H,W]: ", id);
  ClipMeta meta = meta_from_text(read_file(dir + "/" + id + ".meta"), dir);
  clip.fs = meta.fs;
  return {std::move(clip), std::move(meta)};
}

std::vector<DatasetIndex::Row> DatasetIndex::split(
    const std::string& name) const {
  std::vector<Row> out;
  for (const auto& r : rows)
    if (r.split == name) out.push_back(r);
  return out;
}

void write_manifest(const std::string& dir, const DatasetIndex& index) {
  std::ostringstream os;
  os << "# id split seed checksum\n";
  for (const auto& r : index.rows) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, r.checksum);
    os << r.id << " " << r.split << " " << r.seed << " " << buf << "\n";
  }
  atomic_write_file(dir + "/manifest.txt", os.str());
}

DatasetIndex read_manifest(const std::string& dir) {
  std::string text = read_file(dir + "/manifest.txt");
  DatasetIndex idx;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    DatasetIndex::Row r;
    std::stringstream ss(line);
    std::string checksum;
    ss >> r.id >> r.split >> r.seed >> checksum;
    require(!r.id.empty() && !checksum.empty(), "bad manifest line: ", line);
    r.checksum = std::stoull(checksum, nullptr, 16);
    idx.rows.push_back(std::move(r));
  }
  return idx;
}

}  // namespace pmae
