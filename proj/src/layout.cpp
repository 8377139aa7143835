#include "rem/layout.hpp"

#include "rem/error.hpp"

namespace rem {

InputLayout InputLayout::of(const Sample& sample) {
  InputLayout layout;
  if (sample.is_image()) {
    layout.mode = PayloadMode::Image;
    layout.height = sample.image().height();
    layout.width = sample.image().width();
    layout.channels = sample.image().channels();
    layout.vector_dim = 0;
  } else {
    layout.mode = PayloadMode::Vector;
    layout.height = layout.width = layout.channels = 0;
    layout.vector_dim = static_cast<int>(sample.vector().size());
  }
  return layout;
}

Eigen::VectorXd to_input(const Payload& payload, const InputLayout& layout) {
  if (layout.mode == PayloadMode::Vector) {
    require(std::holds_alternative<Eigen::VectorXf>(payload), ErrorKind::DimensionMismatch,
            "expected a vector payload");
    const auto& v = std::get<Eigen::VectorXf>(payload);
    require_dims(v.size(), layout.vector_dim, "vector payload");
    return v.cast<double>();
  }
  require(std::holds_alternative<Image>(payload), ErrorKind::DimensionMismatch,
          "expected an image payload");
  const Image& image = std::get<Image>(payload);
  require_dims(image.channels(), layout.channels, "image channels");
  if (image.height() == layout.height && image.width() == layout.width) return flatten(image);
  return flatten(resize_bilinear(image, layout.height, layout.width));
}

Eigen::MatrixXd to_inputs(const std::vector<Sample>& samples, const InputLayout& layout) {
  Eigen::MatrixXd out(layout.flat_dim(), static_cast<Eigen::Index>(samples.size()));
  for (std::size_t i = 0; i < samples.size(); ++i)
    out.col(static_cast<Eigen::Index>(i)) = to_input(samples[i].payload, layout);
  return out;
}

Payload from_output(const Eigen::Ref<const Eigen::VectorXd>& values, const InputLayout& layout) {
  if (layout.mode == PayloadMode::Vector) return Eigen::VectorXf(values.cast<float>());
  Image image = unflatten(values, layout.height, layout.width, layout.channels);
  quantize8(image);
  return image;
}

}  // namespace rem
