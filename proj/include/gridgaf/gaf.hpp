#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "gridgaf/data_model.hpp"
#include "gridgaf/tensor.hpp"

namespace gridgaf {

// Gramian Angular Field image of one series: G[i][j] = cos(theta_i + theta_j)
// with theta = arccos of the min-max rescaled series. Symmetric by
// construction (each unordered pair computed once), entries in [-1, 1].
struct GafImage {
  std::size_t size = 0;
  std::vector<double> values;  // size*size, row-major
  std::string source_event_id;
  double rescale_min = 0.0;
  double rescale_max = 0.0;

  double at(std::size_t i, std::size_t j) const { return values[i * size + j]; }
  Tensor to_tensor() const;  // [size, size]
};

// (x - min) / (max - min); a constant series maps every element to 0.5.
std::vector<double> rescale_min_max(const std::vector<double>& series);

// arccos of each element; inputs may exceed [0,1] by at most 1e-12 (clamped),
// anything further is an error.
std::vector<double> polar_angles(const std::vector<double>& rescaled);

GafImage gaf_matrix(const std::vector<double>& angles);

// Piecewise aggregate approximation: contiguous bins as equal as possible
// (sizes differ by at most one), per-bin mean.
std::vector<double> paa_reduce(const std::vector<double>& series,
                               std::size_t target_len);

// truncate_window -> paa_reduce(image_size) -> rescale -> angles -> matrix
GafImage encode_event(const TimeSeriesEvent& event, double window_s,
                      std::size_t image_size);

// Binary 8-bit PGM ("P5"), pixel = round-half-up((g+1)/2 * 255), row-major.
void export_pgm(const GafImage& image, const std::filesystem::path& path);

// Raw matrix file: u64 little-endian size header, then size*size f64
// little-endian values, row-major.
void write_gaf_binary(const GafImage& image, const std::filesystem::path& path);
GafImage read_gaf_binary(const std::filesystem::path& path);

}  // namespace gridgaf
