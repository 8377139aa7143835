#pragma once

#include <Eigen/Dense>

#include <vector>

#include "rem/worldgen.hpp"

namespace rem {

// Shape of the payloads a model consumes. Image payloads of another size are
// resampled to (height, width) before use.
struct InputLayout {
  PayloadMode mode = PayloadMode::Image;
  int height = 32;
  int width = 32;
  int channels = 1;
  int vector_dim = 0;

  int flat_dim() const { return mode == PayloadMode::Image ? height * width * channels : vector_dim; }
  bool operator==(const InputLayout&) const = default;

  static InputLayout of(const Sample& sample);
};

// Payload as a flat double vector laid out per `layout`.
Eigen::VectorXd to_input(const Payload& payload, const InputLayout& layout);
// Samples stacked as columns (flat_dim x n).
Eigen::MatrixXd to_inputs(const std::vector<Sample>& samples, const InputLayout& layout);
Payload from_output(const Eigen::Ref<const Eigen::VectorXd>& values, const InputLayout& layout);

}  // namespace rem
