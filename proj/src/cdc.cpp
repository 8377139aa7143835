#include "rem/cdc.hpp"

#include <cstring>
#include <iomanip>
#include <sstream>

#include "rem/binio.hpp"
#include "rem/chainsim.hpp"
#include "rem/error.hpp"
#include "rem/rng.hpp"

namespace rem::cdc {

namespace {

void append_f32(std::string& bytes, const Eigen::MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const float f = static_cast<float>(m(i, j));
      std::uint32_t bits = 0;
      std::memcpy(&bits, &f, 4);
      for (int b = 0; b < 4; ++b) bytes.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
    }
}

Image degrade_image(const Image& image, const DegradePolicy& p, SeededRng& rng) {
  const int k = static_cast<int>(rng.uniform_int(p.k_min, p.k_max));
  Image x = image;
  for (int i = 0; i < k; ++i) {
    switch (rng.below(5)) {
      case 0:
        x = chainsim::jpeg_roundtrip(x, rng.uniform(p.jpeg_q_min, p.jpeg_q_max));
        break;
      case 1: {
        const int h = x.height();
        const int w = x.width();
        x = chainsim::resize_scale(x, rng.uniform(p.scale_min, p.scale_max));
        x = resize_bilinear(x, h, w);
        quantize8(x);
        break;
      }
      case 2:
        x = chainsim::gaussian_blur(x, rng.uniform(p.blur_min, p.blur_max));
        break;
      case 3:
        x = chainsim::add_noise(x, rng.uniform(p.noise_min, p.noise_max) / 255.0, rng.next_u64());
        break;
      default:
        x = chainsim::color_adjust(x, rng.uniform(p.gain_min, p.gain_max), 0.0);
        break;
    }
  }
  return x;
}

}  // namespace

AnchorEncoder AnchorEncoder::from_autoencoder(const mbr::Autoencoder& ae) {
  require(ae.meta.has_value(), ErrorKind::NotTrained, "anchor: autoencoder is untrained");
  return AnchorEncoder(ae.layout, ae.encoder, "mbr-encoder");
}

AnchorEncoder AnchorEncoder::fixed_seed(const InputLayout& layout, int hidden, int dim, std::uint64_t seed) {
  SeededRng rng(seed, 0xA4C408);
  auto net = TwoLayerNet<double>::random(layout.flat_dim(), hidden, dim, true, rng);
  round_to_float(net);
  return AnchorEncoder(layout, std::move(net), "fixed-seed");
}

AnchorEncoder AnchorEncoder::from_net(const InputLayout& layout, TwoLayerNet<double> net, std::string source) {
  require_dims(net.input_dim(), layout.flat_dim(), "anchor input");
  return AnchorEncoder(layout, std::move(net), std::move(source));
}

std::string AnchorEncoder::fingerprint() const {
  std::string bytes;
  append_f32(bytes, net_.w1);
  append_f32(bytes, net_.b1);
  append_f32(bytes, net_.w2);
  append_f32(bytes, net_.b2);
  bytes.push_back(net_.tanh_output ? 1 : 0);
  return sha256_hex(bytes);
}

Eigen::VectorXd anchor_forward(const AnchorEncoder& anchor, const Eigen::Ref<const Eigen::VectorXd>& x) {
  require_dims(x.size(), anchor.input_dim(), "anchor_forward");
  return predict(anchor.net(), x);
}

Eigen::MatrixXd anchor_forward_batch(const AnchorEncoder& anchor, const Eigen::Ref<const Eigen::MatrixXd>& x) {
  require_dims(x.rows(), anchor.input_dim(), "anchor_forward");
  return predict(anchor.net(), x);
}

Eigen::VectorXd anchor_forward(const AnchorEncoder& anchor, const Sample& sample) {
  return anchor_forward(anchor, to_input(sample.payload, anchor.layout()));
}

Eigen::VectorXd project_anchor(const Eigen::Ref<const Eigen::MatrixXd>& w,
                               const Eigen::Ref<const Eigen::VectorXd>& h) {
  require_dims(h.size(), w.cols(), "project_anchor");
  return w * h;
}

double loss_anc(const Eigen::Ref<const Eigen::MatrixXd>& a, const Eigen::Ref<const Eigen::MatrixXd>& h_hat) {
  require_dims(h_hat.rows(), a.rows(), "loss_anc");
  require_dims(h_hat.cols(), a.cols(), "loss_anc batch");
  require(a.cols() >= 1, ErrorKind::InvalidArgument, "loss_anc: empty batch");
  return (a - h_hat).squaredNorm() / static_cast<double>(a.cols());
}

double loss_res(const Eigen::Ref<const Eigen::MatrixXd>& a, const Eigen::Ref<const Eigen::MatrixXd>& h_hat,
                const Eigen::Ref<const Eigen::MatrixXd>& a_deg,
                const Eigen::Ref<const Eigen::MatrixXd>& h_hat_deg) {
  for (const auto* m : {&h_hat, &a_deg, &h_hat_deg}) {
    require_dims(m->rows(), a.rows(), "loss_res");
    require_dims(m->cols(), a.cols(), "loss_res batch");
  }
  require(a.cols() >= 1, ErrorKind::InvalidArgument, "loss_res: empty batch");
  return ((a - h_hat) - (a_deg - h_hat_deg)).squaredNorm() / static_cast<double>(a.cols());
}

void validate(const DegradePolicy& p) {
  auto range = [](double lo, double hi, double min, double max, const char* what) {
    require(std::isfinite(lo) && std::isfinite(hi) && min <= lo && lo <= hi && hi <= max,
            ErrorKind::InvalidArgument, std::string("DegradePolicy: invalid ") + what + " range");
  };
  range(p.jpeg_q_min, p.jpeg_q_max, 1, 100, "jpeg quality");
  range(p.scale_min, p.scale_max, 0.05, 2.0, "resize scale");
  range(p.blur_min, p.blur_max, 0, 10, "blur sigma");
  range(p.noise_min, p.noise_max, 0, 64, "noise sigma");
  range(p.gain_min, p.gain_max, 0.05, 4, "color gain");
  require(p.k_min >= 1 && p.k_min <= p.k_max, ErrorKind::InvalidArgument,
          "DegradePolicy: need 1 <= k_min <= k_max");
  require(p.vector_noise >= 0 && p.dropout >= 0 && p.dropout < 1, ErrorKind::InvalidArgument,
          "DegradePolicy: vector_noise >= 0 and dropout in [0, 1) required");
}

Sample degrade_train(const Sample& x, const DegradePolicy& policy, std::uint64_t draw) {
  validate(policy);
  SeededRng rng(mix_seed(policy.seed, hash_string(x.id), draw), 0xC0C);
  Sample out = x;
  if (x.is_image()) {
    out.payload = degrade_image(x.image(), policy, rng);
  } else {
    Eigen::VectorXf v = x.vector();
    for (auto& e : v) {
      const bool drop = rng.uniform() < policy.dropout;
      const double noise = policy.vector_noise * rng.gaussian();
      e = drop ? 0.0f : static_cast<float>(e + noise);
    }
    out.payload = std::move(v);
  }
  return out;
}

}  // namespace rem::cdc
