#include "rem/mbr.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rem/binio.hpp"
#include "rem/error.hpp"

namespace rem::mbr {

Autoencoder train_autoencoder(const std::vector<Sample>& reals, const AutoencoderConfig& config,
                              SeededRng& rng) {
  require(reals.size() >= 32, ErrorKind::InsufficientSamples,
          "train_autoencoder: need at least 32 real samples");
  const InputLayout layout = InputLayout::of(reals.front());
  const int in = layout.flat_dim();
  require(config.latent_dim >= 1 && config.latent_dim < in, ErrorKind::InvalidArgument,
          "train_autoencoder: latent_dim must be in [1, input dim)");
  require(config.epochs >= 1 && config.batch >= 1, ErrorKind::InvalidArgument,
          "train_autoencoder: epochs and batch must be >= 1");

  const Eigen::MatrixXd x = to_inputs(reals, layout);
  const int n = static_cast<int>(x.cols());

  Autoencoder ae;
  ae.layout = layout;
  ae.encoder = TwoLayerNet<double>::random(in, config.hidden, config.latent_dim, false, rng);
  ae.decoder = TwoLayerNet<double>::random(config.latent_dim, config.hidden, in, false, rng);

  Adam opt(AdamConfig{config.lr});
  TrainingMeta meta;
  meta.epochs = config.epochs;
  Eigen::MatrixXd batch;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const std::vector<int> order = permutation(n, rng);
    double loss_sum = 0.0;
    for (int start = 0; start < n; start += config.batch) {
      const int b = std::min(config.batch, n - start);
      batch.resize(in, b);
      for (int k = 0; k < b; ++k) batch.col(k) = x.col(order[static_cast<std::size_t>(start + k)]);

      const auto enc = forward(ae.encoder, batch);
      const auto dec = forward(ae.decoder, enc.output);
      const Eigen::MatrixXd residual = dec.output - batch;
      const double scale = 1.0 / (static_cast<double>(b) * in);
      loss_sum += residual.squaredNorm() / in;

      const Eigen::MatrixXd d_out = 2.0 * scale * residual;
      Eigen::MatrixXd d_latent;
      const auto g_dec = backward(ae.decoder, enc.output, dec, d_out, &d_latent);
      const auto g_enc = backward(ae.encoder, batch, enc, d_latent);
      opt.step({param_ref(ae.encoder.w1, g_enc.w1), param_ref(ae.encoder.b1, g_enc.b1),
                param_ref(ae.encoder.w2, g_enc.w2), param_ref(ae.encoder.b2, g_enc.b2),
                param_ref(ae.decoder.w1, g_dec.w1), param_ref(ae.decoder.b1, g_dec.b1),
                param_ref(ae.decoder.w2, g_dec.w2), param_ref(ae.decoder.b2, g_dec.b2)});
    }
    const double epoch_loss = loss_sum / n;
    if (!std::isfinite(epoch_loss) || !ae.encoder.all_finite() || !ae.decoder.all_finite()) {
      throw Error(ErrorKind::Divergence,
                  "train_autoencoder: divergence at epoch " + std::to_string(epoch));
    }
    meta.epoch_loss.push_back(static_cast<float>(epoch_loss));
  }

  round_to_float(ae.encoder);
  round_to_float(ae.decoder);
  const Eigen::MatrixXd z = ae.encode(x);
  const Eigen::VectorXd mean = z.rowwise().mean();
  ae.latent_std = ((z.colwise() - mean).array().square().rowwise().sum() / std::max(1, n - 1))
                      .sqrt()
                      .matrix();
  round_to_float(ae.latent_std);
  ae.meta = std::move(meta);
  return ae;
}

void validate(const PerturbSpec& spec) {
  require(spec.mask_ratio > 0.0 && spec.mask_ratio <= 1.0, ErrorKind::InvalidArgument,
          "PerturbSpec: mask_ratio must be in (0, 1]");
  require(std::isfinite(spec.epsilon) && spec.epsilon >= 0.0, ErrorKind::InvalidArgument,
          "PerturbSpec: epsilon must be finite and nonnegative");
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> sample_mask_and_noise(int latent_dim,
                                                                   const PerturbSpec& spec,
                                                                   SeededRng& rng) {
  require(latent_dim >= 1, ErrorKind::InvalidArgument, "sample_mask_and_noise: d_z must be >= 1");
  validate(spec);
  const int ones = std::clamp(static_cast<int>(std::lround(spec.mask_ratio * latent_dim)), 1, latent_dim);
  // Partial Fisher-Yates: the first `ones` slots are a uniform subset.
  std::vector<int> idx(static_cast<std::size_t>(latent_dim));
  for (int i = 0; i < latent_dim; ++i) idx[static_cast<std::size_t>(i)] = i;
  Eigen::VectorXd mask = Eigen::VectorXd::Zero(latent_dim);
  for (int i = 0; i < ones; ++i) {
    const auto j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(latent_dim - i)));
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    mask(idx[static_cast<std::size_t>(i)]) = 1.0;
  }
  Eigen::VectorXd delta(latent_dim);
  for (auto& d : delta) d = spec.epsilon * rng.gaussian();
  return {mask, delta};
}

Eigen::VectorXd perturb_latent(const Eigen::Ref<const Eigen::VectorXd>& z,
                               const Eigen::Ref<const Eigen::VectorXd>& mask,
                               const Eigen::Ref<const Eigen::VectorXd>& delta) {
  require_dims(mask.size(), z.size(), "perturb_latent mask");
  require_dims(delta.size(), z.size(), "perturb_latent delta");
  return z + mask.cwiseProduct(delta);
}

namespace {

void require_trained(const Autoencoder& ae) {
  require(ae.meta.has_value(), ErrorKind::NotTrained, "autoencoder is untrained");
}

Sample near_real_sample(const Sample& real, Payload payload) {
  Sample s;
  s.id = real.id + "-nr";
  s.payload = std::move(payload);
  s.role = Role::NearReal;
  s.seed = real.seed;
  return s;
}

}  // namespace

std::vector<Sample> generate_near_real(const Autoencoder& ae, const std::vector<Sample>& reals,
                                       const PerturbSpec& spec, const SeededRng& rng) {
  require_trained(ae);
  validate(spec);
  const Eigen::MatrixXd x = to_inputs(reals, ae.layout);
  const Eigen::MatrixXd z = ae.encode(x);
  Eigen::MatrixXd z_prime = z;
  for (Eigen::Index i = 0; i < z.cols(); ++i) {
    SeededRng local = rng.split(static_cast<std::uint64_t>(i));
    const auto [mask, delta] = sample_mask_and_noise(ae.latent_dim(), spec, local);
    z_prime.col(i) = perturb_latent(z.col(i), mask, ae.latent_std.cwiseProduct(delta));
  }
  const Eigen::MatrixXd decoded = ae.decode(z_prime);
  std::vector<Sample> out;
  out.reserve(reals.size());
  for (std::size_t i = 0; i < reals.size(); ++i) {
    out.push_back(near_real_sample(
        reals[i], from_output(decoded.col(static_cast<Eigen::Index>(i)), ae.layout)));
  }
  return out;
}

std::vector<Sample> reconstruct(const Autoencoder& ae, const std::vector<Sample>& reals) {
  require_trained(ae);
  const Eigen::MatrixXd decoded = ae.decode(ae.encode(to_inputs(reals, ae.layout)));
  std::vector<Sample> out;
  out.reserve(reals.size());
  for (std::size_t i = 0; i < reals.size(); ++i) {
    out.push_back(near_real_sample(
        reals[i], from_output(decoded.col(static_cast<Eigen::Index>(i)), ae.layout)));
  }
  return out;
}

void save_autoencoder(const Autoencoder& ae, const std::filesystem::path& path) {
  require_trained(ae);
  BinaryWriter w(path);
  w.magic("REMAE1");
  w.u32(static_cast<std::uint32_t>(ae.input_dim()));
  w.u32(static_cast<std::uint32_t>(ae.latent_dim()));
  w.u32(static_cast<std::uint32_t>(ae.encoder.hidden_dim()));
  w.u32(ae.layout.mode == PayloadMode::Image ? 0u : 1u);
  w.u32(static_cast<std::uint32_t>(ae.layout.height));
  w.u32(static_cast<std::uint32_t>(ae.layout.width));
  w.u32(static_cast<std::uint32_t>(ae.layout.channels));
  w.u32(static_cast<std::uint32_t>(ae.meta->epoch_loss.size()));
  for (const auto* net : {&ae.encoder, &ae.decoder}) {
    w.block(net->w1);
    w.block(net->b1);
    w.block(net->w2);
    w.block(net->b2);
  }
  w.block(ae.latent_std);
  for (double l : ae.meta->epoch_loss) w.f32(l);
  w.finish();
}

Autoencoder load_autoencoder(const std::filesystem::path& path) {
  BinaryReader r(path);
  r.expect_magic("REMAE1");
  const int in = static_cast<int>(r.u32());
  const int dz = static_cast<int>(r.u32());
  const int hidden = static_cast<int>(r.u32());
  Autoencoder ae;
  ae.layout.mode = r.u32() == 0 ? PayloadMode::Image : PayloadMode::Vector;
  ae.layout.height = static_cast<int>(r.u32());
  ae.layout.width = static_cast<int>(r.u32());
  ae.layout.channels = static_cast<int>(r.u32());
  ae.layout.vector_dim = ae.layout.mode == PayloadMode::Vector ? in : 0;
  const auto epochs = r.u32();
  require(ae.layout.flat_dim() == in, ErrorKind::Parse, path.string() + ": inconsistent layout");
  auto read_net = [&](int a, int h, int b) {
    TwoLayerNet<double> net;
    net.w1 = r.block(h, a);
    net.b1 = r.vec(h);
    net.w2 = r.block(b, h);
    net.b2 = r.vec(b);
    return net;
  };
  ae.encoder = read_net(in, hidden, dz);
  ae.decoder = read_net(dz, hidden, in);
  ae.latent_std = r.vec(dz);
  TrainingMeta meta;
  meta.epochs = static_cast<int>(epochs);
  for (std::uint32_t e = 0; e < epochs; ++e) meta.epoch_loss.push_back(r.f32());
  ae.meta = std::move(meta);
  return ae;
}

}  // namespace rem::mbr
