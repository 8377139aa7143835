#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <vector>

namespace rem {

// Planar float image, values nominally in [0, 1]. Each plane is
// height x width (rows are image rows).
struct Image {
  std::vector<Eigen::ArrayXXf> planes;

  Image() = default;
  Image(int height, int width, int channels, float fill = 0.0f);
  static Image gray(const Eigen::ArrayXXf& plane) { Image im; im.planes = {plane}; return im; }

  int height() const { return planes.empty() ? 0 : static_cast<int>(planes.front().rows()); }
  int width() const { return planes.empty() ? 0 : static_cast<int>(planes.front().cols()); }
  int channels() const { return static_cast<int>(planes.size()); }
  long size() const { return static_cast<long>(height()) * width() * channels(); }

  bool operator==(const Image& other) const;
};

// Channel mean as a double matrix (luminance proxy for spectral work).
Eigen::MatrixXd luminance(const Image& image);

// Planes concatenated, each row-major.
Eigen::VectorXd flatten(const Image& image);
Image unflatten(const Eigen::Ref<const Eigen::VectorXd>& values, int height, int width,
                int channels);

void clamp01(Image& image);
// Round to the nearest multiple of 1/255 (8-bit storage grid).
void quantize8(Image& image);

// Bilinear resampling with half-pixel centers and edge clamping.
Image resize_bilinear(const Image& image, int height, int width);

// Binary PGM (1 channel) / PPM (3 channels), 8-bit.
void write_pnm(const Image& image, const std::filesystem::path& path);
Image read_pnm(const std::filesystem::path& path);

}  // namespace rem
