#pragma once

#include <string>

#include "pulsemae/tensor.hpp"

namespace pmae {

// NDT1 tensor file: magic "NDT1", 1 byte dtype (0 = f32, 1 = f64),
// 1 byte rank, rank little-endian u64 dims, then row-major little-endian
// element data.

void ndt1_write(const std::string& path, const Tensor<float>& t);
void ndt1_write(const std::string& path, const Tensor<double>& t);

// 0 = f32, 1 = f64; throws ValidationError if the header is malformed.
int ndt1_dtype(const std::string& path);

Tensor<float> ndt1_read_f32(const std::string& path);
Tensor<double> ndt1_read_f64(const std::string& path);

// Reads either dtype, converting to the requested element type.
Tensor<float> ndt1_read_as_f32(const std::string& path);
Tensor<double> ndt1_read_as_f64(const std::string& path);

// write-temp-then-rename, so concurrent readers never see partial files
void atomic_write_file(const std::string& path, const std::string& bytes);

}  // namespace pmae
