#include "gridgaf/gaf.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "gridgaf/kernels.hpp"

namespace gridgaf {

Tensor GafImage::to_tensor() const {
  return Tensor::from({size, size}, values);
}

std::vector<double> rescale_min_max(const std::vector<double>& series) {
  if (series.empty()) {
    throw std::invalid_argument("rescale_min_max: empty series");
  }
  for (double v : series) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument("rescale_min_max: non-finite input");
    }
  }
  double lo, hi;
  kern::minmax(series.data(), series.size(), &lo, &hi);
  std::vector<double> out(series.size());
  if (lo == hi) {
    for (double& v : out) v = 0.5;
    return out;
  }
  const double span = hi - lo;
  for (std::size_t i = 0; i < series.size(); ++i) {
    out[i] = (series[i] - lo) / span;
  }
  return out;
}

std::vector<double> polar_angles(const std::vector<double>& rescaled) {
  std::vector<double> out(rescaled.size());
  for (std::size_t i = 0; i < rescaled.size(); ++i) {
    double v = rescaled[i];
    if (!(v >= -1e-12 && v <= 1.0 + 1e-12)) {
      throw std::invalid_argument("polar_angles: input outside [0,1]: " +
                                  std::to_string(v));
    }
    if (v < 0.0) v = 0.0;
    if (v > 1.0) v = 1.0;
    out[i] = std::acos(v);
  }
  return out;
}

GafImage gaf_matrix(const std::vector<double>& angles) {
  for (double a : angles) {
    if (!std::isfinite(a)) {
      throw std::invalid_argument("gaf_matrix: non-finite angle");
    }
  }
  const std::size_t n = angles.size();
  GafImage img;
  img.size = n;
  img.values.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    // diagonal via the double-angle form of cos(theta_i + theta_i); keeps
    // 2*x^2 - 1 accurate near -1 where the direct cosine loses the low bits
    const double xi = std::cos(angles[i]);
    double d = 2.0 * xi * xi - 1.0;
    if (d > 1.0) d = 1.0;
    if (d < -1.0) d = -1.0;
    img.values[i * n + i] = d;
    for (std::size_t j = i + 1; j < n; ++j) {
      double g = std::cos(angles[i] + angles[j]);
      if (g > 1.0) g = 1.0;
      if (g < -1.0) g = -1.0;
      img.values[i * n + j] = g;
      img.values[j * n + i] = g;
    }
  }
  return img;
}

std::vector<double> paa_reduce(const std::vector<double>& series,
                               std::size_t target_len) {
  const std::size_t n = series.size();
  if (target_len == 0 || target_len > n) {
    throw std::invalid_argument("paa_reduce: target_len must be in [1, length]");
  }
  if (target_len == n) return series;
  std::vector<double> out(target_len);
  for (std::size_t b = 0; b < target_len; ++b) {
    // bin b covers [ceil(b*n/S), ceil((b+1)*n/S))
    const std::size_t lo = (b * n + target_len - 1) / target_len;
    const std::size_t hi = ((b + 1) * n + target_len - 1) / target_len;
    out[b] = kern::sum(series.data() + lo, hi - lo) / static_cast<double>(hi - lo);
  }
  return out;
}

GafImage encode_event(const TimeSeriesEvent& event, double window_s,
                      std::size_t image_size) {
  const TimeSeriesEvent window = truncate_window(event, window_s);
  const std::vector<double> reduced = paa_reduce(window.samples, image_size);
  double lo, hi;
  kern::minmax(reduced.data(), reduced.size(), &lo, &hi);
  GafImage img = gaf_matrix(polar_angles(rescale_min_max(reduced)));
  img.source_event_id = event.event_id;
  img.rescale_min = lo;
  img.rescale_max = hi;
  return img;
}

namespace {

void write_u64_le(std::ofstream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t read_u64_le(std::ifstream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace

void export_pgm(const GafImage& image, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("export_pgm: cannot write " + path.string());
  }
  out << "P5\n" << image.size << ' ' << image.size << "\n255\n";
  std::vector<unsigned char> pixels(image.values.size());
  for (std::size_t i = 0; i < image.values.size(); ++i) {
    const double v = std::floor((image.values[i] + 1.0) * 0.5 * 255.0 + 0.5);
    pixels[i] = static_cast<unsigned char>(v < 0.0 ? 0.0 : (v > 255.0 ? 255.0 : v));
  }
  out.write(reinterpret_cast<const char*>(pixels.data()),
            static_cast<std::streamsize>(pixels.size()));
  if (!out) {
    throw std::runtime_error("export_pgm: write failed for " + path.string());
  }
}

void write_gaf_binary(const GafImage& image, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("write_gaf_binary: cannot write " + path.string());
  }
  write_u64_le(out, image.size);
  for (double v : image.values) {
    write_u64_le(out, std::bit_cast<std::uint64_t>(v));
  }
  if (!out) {
    throw std::runtime_error("write_gaf_binary: write failed for " + path.string());
  }
}

GafImage read_gaf_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("read_gaf_binary: cannot open " + path.string());
  }
  GafImage img;
  img.size = read_u64_le(in);
  if (!in || img.size == 0 || img.size > (1u << 20)) {
    throw std::runtime_error("read_gaf_binary: bad size header in " + path.string());
  }
  img.values.resize(img.size * img.size);
  for (double& v : img.values) {
    v = std::bit_cast<double>(read_u64_le(in));
  }
  if (!in) {
    throw std::runtime_error("read_gaf_binary: truncated file " + path.string());
  }
  return img;
}

}  // namespace gridgaf
