#include "rem/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "rem/error.hpp"

namespace rem {

Image::Image(int height, int width, int channels, float fill) {
  planes.assign(static_cast<std::size_t>(channels), Eigen::ArrayXXf::Constant(height, width, fill));
}

bool Image::operator==(const Image& other) const {
  if (planes.size() != other.planes.size()) return false;
  for (std::size_t c = 0; c < planes.size(); ++c) {
    if (planes[c].rows() != other.planes[c].rows() || planes[c].cols() != other.planes[c].cols())
      return false;
    if ((planes[c] != other.planes[c]).any()) return false;
  }
  return true;
}

Eigen::MatrixXd luminance(const Image& image) {
  require(image.channels() >= 1, ErrorKind::InvalidArgument, "luminance: empty image");
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(image.height(), image.width());
  for (const auto& plane : image.planes) out += plane.matrix().cast<double>();
  return out / static_cast<double>(image.channels());
}

Eigen::VectorXd flatten(const Image& image) {
  const long hw = static_cast<long>(image.height()) * image.width();
  Eigen::VectorXd out(image.size());
  for (int c = 0; c < image.channels(); ++c) {
    // Row-major flattening of a column-major plane.
    const Eigen::Array<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = image.planes[c];
    out.segment(c * hw, hw) = Eigen::Map<const Eigen::VectorXf>(rm.data(), hw).cast<double>();
  }
  return out;
}

Image unflatten(const Eigen::Ref<const Eigen::VectorXd>& values, int height, int width,
                int channels) {
  const long hw = static_cast<long>(height) * width;
  require_dims(values.size(), hw * channels, "unflatten");
  Image im;
  im.planes.reserve(static_cast<std::size_t>(channels));
  for (int c = 0; c < channels; ++c) {
    const Eigen::VectorXf seg = values.segment(c * hw, hw).cast<float>();
    Eigen::Array<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm =
        Eigen::Map<const Eigen::Array<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
            seg.data(), height, width);
    im.planes.emplace_back(rm);
  }
  return im;
}

void clamp01(Image& image) {
  for (auto& plane : image.planes) plane = plane.max(0.0f).min(1.0f);
}

void quantize8(Image& image) {
  for (auto& plane : image.planes) plane = (plane.max(0.0f).min(1.0f) * 255.0f).round() / 255.0f;
}

Image resize_bilinear(const Image& image, int height, int width) {
  require(height >= 1 && width >= 1, ErrorKind::InvalidArgument, "resize: empty target");
  const int h0 = image.height();
  const int w0 = image.width();
  if (h0 == height && w0 == width) return image;
  const double sy = static_cast<double>(h0) / height;
  const double sx = static_cast<double>(w0) / width;
  Image out(height, width, image.channels());
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(h0 - 1));
    const int y0 = static_cast<int>(std::floor(fy));
    const int y1 = std::min(y0 + 1, h0 - 1);
    const double ty = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(w0 - 1));
      const int x0 = static_cast<int>(std::floor(fx));
      const int x1 = std::min(x0 + 1, w0 - 1);
      const double tx = fx - x0;
      for (int c = 0; c < image.channels(); ++c) {
        const auto& p = image.planes[c];
        const double top = (1 - tx) * p(y0, x0) + tx * p(y0, x1);
        const double bottom = (1 - tx) * p(y1, x0) + tx * p(y1, x1);
        out.planes[c](y, x) = static_cast<float>((1 - ty) * top + ty * bottom);
      }
    }
  }
  return out;
}

void write_pnm(const Image& image, const std::filesystem::path& path) {
  const int c = image.channels();
  require(c == 1 || c == 3, ErrorKind::InvalidArgument, "write_pnm: need 1 or 3 channels");
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
  out << (c == 1 ? "P5" : "P6") << '\n' << image.width() << ' ' << image.height() << "\n255\n";
  std::string bytes(static_cast<std::size_t>(image.size()), '\0');
  std::size_t k = 0;
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x)
      for (int ch = 0; ch < c; ++ch) {
        const float v = std::clamp(image.planes[ch](y, x), 0.0f, 1.0f);
        bytes[k++] = static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0f)));
      }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

namespace {

std::string next_token(std::istream& in) {
  std::string tok;
  char ch = 0;
  while (in.get(ch)) {
    if (ch == '#') {
      std::string skip;
      std::getline(in, skip);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(ch);
  }
  return tok;
}

}  // namespace

Image read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::MissingFile, "missing file: " + path.string());
  const std::string magic = next_token(in);
  require(magic == "P5" || magic == "P6", ErrorKind::Parse, path.string() + ": not a P5/P6 image");
  const int width = std::stoi(next_token(in));
  const int height = std::stoi(next_token(in));
  const int maxval = std::stoi(next_token(in));
  require(maxval == 255, ErrorKind::Parse, path.string() + ": only 8-bit images supported");
  const int c = magic == "P5" ? 1 : 3;
  std::string bytes(static_cast<std::size_t>(width) * height * c, '\0');
  in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  require(in.gcount() == static_cast<std::streamsize>(bytes.size()), ErrorKind::Parse,
          path.string() + ": truncated pixel data");
  Image image(height, width, c);
  std::size_t k = 0;
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      for (int ch = 0; ch < c; ++ch)
        image.planes[ch](y, x) = static_cast<unsigned char>(bytes[k++]) / 255.0f;
  return image;
}

}  // namespace rem
