#pragma once

#include <string>
#include <vector>

#include "pulsemae/synthdata.hpp"

namespace pmae {

enum class TeacherKind { oracle, pos, chrom };

const char* teacher_kind_name(TeacherKind k);
TeacherKind teacher_kind_parse(const std::string& s);

struct FaceRegion {
  size_t x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // half-open
};

FaceRegion centered_region(size_t H, size_t W, double fraction);

// Per-frame spatial means of R, G, B over the face region; values in [0,1].
struct RgbTrace {
  std::vector<double> r, g, b;
  size_t size() const { return r.size(); }
};

RgbTrace extract_trace(const VideoClip& clip, const FaceRegion& region);

// d_t = (x_{t+1} - x_t) / (x_{t+1} + x_t + 1e-6), standardized per clip.
// Output has T-1 frames.
Tensor<float> diff_normalize(const Tensor<float>& clip);

// Chrominance projection (3R - 2G vs 1.5R + G - 1.5B) on channels divided by
// their window means; 32-frame Hann windows at 50% overlap, overlap-added,
// standardized.
std::vector<double> chrom(const RgbTrace& trace);

// Plane-orthogonal-to-skin projection with sliding 48-frame windows
// (min(48, T) below desk scale), stride 1, overlap-added, standardized.
std::vector<double> pos(const RgbTrace& trace);

// Frozen teacher: returns a standardized length-T waveform. The oracle needs
// generator metadata carrying the ground-truth BVP; pos/chrom read the face
// region from the metadata rectangle when present, else a centered crop.
std::vector<double> teacher_forward(const VideoClip& clip,
                                    const ClipMeta* meta, TeacherKind kind,
                                    double center_crop_fraction = 0.6);

}  // namespace pmae
