#include "pulsemae/ndt1.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "pulsemae/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "NDT1 writer assumes a little-endian host");

namespace pmae {

namespace {

constexpr char kMagic[4] = {'N', 'D', 'T', '1'};

template <typename T>
std::string encode(const Tensor<T>& t, uint8_t dtype) {
  std::string out;
  size_t rank = t.rank();
  require(rank <= 255, "NDT1 rank limit exceeded: ", rank);
  out.reserve(6 + 8 * rank + sizeof(T) * t.numel());
  out.append(kMagic, 4);
  out.push_back(static_cast<char>(dtype));
  out.push_back(static_cast<char>(rank));
  for (size_t d : t.shape()) {
    uint64_t v = d;
    out.append(reinterpret_cast<const char*>(&v), 8);
  }
  out.append(reinterpret_cast<const char*>(t.data()), sizeof(T) * t.numel());
  return out;
}

struct Header {
  uint8_t dtype;
  Shape shape;
  size_t payload_offset;
};

Header read_header(std::ifstream& in, const std::string& path) {
  char magic[4];
  uint8_t dtype = 0, rank = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&dtype), 1);
  in.read(reinterpret_cast<char*>(&rank), 1);
  require(in.good() && std::memcmp(magic, kMagic, 4) == 0,
          "not an NDT1 file: ", path);
  require(dtype == 0 || dtype == 1, "NDT1 dtype code ", int(dtype),
          " unknown in ", path);
  Shape shape(rank);
  for (auto& d : shape) {
    uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 8);
    d = static_cast<size_t>(v);
  }
  require(in.good(), "truncated NDT1 header in ", path);
  return {dtype, std::move(shape), static_cast<size_t>(6 + 8 * rank)};
}

template <typename T>
Tensor<T> read_payload(std::ifstream& in, const Header& h,
                       const std::string& path) {
  Tensor<T> t(h.shape);
  in.read(reinterpret_cast<char*>(t.data()),
          static_cast<std::streamsize>(sizeof(T) * t.numel()));
  require(in.gcount() ==
              static_cast<std::streamsize>(sizeof(T) * t.numel()),
          "truncated NDT1 payload in ", path);
  return t;
}

}  // namespace

void atomic_write_file(const std::string& path, const std::string& bytes) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(out.good(), "cannot open for writing: ", tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    require(out.good(), "write failed: ", tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  require(!ec, "rename ", tmp, " -> ", path, " failed: ", ec.message());
}

void ndt1_write(const std::string& path, const Tensor<float>& t) {
  atomic_write_file(path, encode(t, 0));
}

void ndt1_write(const std::string& path, const Tensor<double>& t) {
  atomic_write_file(path, encode(t, 1));
}

int ndt1_dtype(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open NDT1 file: ", path);
  return read_header(in, path).dtype;
}

Tensor<float> ndt1_read_f32(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open NDT1 file: ", path);
  Header h = read_header(in, path);
  require(h.dtype == 0, "expected f32 NDT1 file, got dtype ", int(h.dtype),
          " in ", path);
  return read_payload<float>(in, h, path);
}

Tensor<double> ndt1_read_f64(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open NDT1 file: ", path);
  Header h = read_header(in, path);
  require(h.dtype == 1, "expected f64 NDT1 file, got dtype ", int(h.dtype),
          " in ", path);
  return read_payload<double>(in, h, path);
}

Tensor<float> ndt1_read_as_f32(const std::string& path) {
  if (ndt1_dtype(path) == 0) return ndt1_read_f32(path);
  return ndt1_read_f64(path).cast<float>();
}

Tensor<double> ndt1_read_as_f64(const std::string& path) {
  if (ndt1_dtype(path) == 1) return ndt1_read_f64(path);
  return ndt1_read_f32(path).cast<double>();
}

}  // namespace pmae
