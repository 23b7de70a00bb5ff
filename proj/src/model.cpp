#include "spt2ss/model.hpp"

#include <stdexcept>

#include "spt2ss/gaf.hpp"
#include "spt2ss/ops.hpp"

namespace spt2ss {

namespace {

Seq2SeqConfig net_config(const ModelConfig& cfg) {
  Seq2SeqConfig net;
  net.input_channels = cfg.gaf_enabled ? kRawChannels + kF1dChannels + kF2dChannels
                                       : kRawChannels + kF1dChannels;
  net.hidden_size = cfg.hidden_size;
  net.num_layers = cfg.num_layers;
  net.num_heads = cfg.num_heads;
  net.dropout = cfg.dropout;
  net.attn_exact = cfg.attn_exact;
  return net;
}

}  // namespace

BatchInput make_batch(const std::vector<const CurvePair*>& samples, const NormStats& stats,
                      bool gaf_enabled, bool with_target) {
  if (samples.empty()) throw std::invalid_argument("make_batch: empty batch");
  const int batch = static_cast<int>(samples.size());
  const int l_in = static_cast<int>(samples.front()->load.size());
  const int l_out = static_cast<int>(samples.front()->stress.size());

  Eigen::ArrayXd load(static_cast<Eigen::Index>(batch) * l_in);
  Eigen::ArrayXd thick(static_cast<Eigen::Index>(batch) * l_in);
  Eigen::ArrayXd image;
  if (gaf_enabled) image.resize(static_cast<Eigen::Index>(batch) * l_in * l_in);
  Eigen::ArrayXd target;
  if (with_target) target.resize(static_cast<Eigen::Index>(batch) * l_out);

  for (int b = 0; b < batch; ++b) {
    const CurvePair& p = *samples[static_cast<std::size_t>(b)];
    if (static_cast<int>(p.load.size()) != l_in || static_cast<int>(p.stress.size()) != l_out) {
      throw std::invalid_argument("make_batch: sample " + std::to_string(b) +
                                  " has inconsistent sequence lengths");
    }
    for (int i = 0; i < l_in; ++i) {
      load[static_cast<Eigen::Index>(b) * l_in + i] =
          norm_load(p.load[static_cast<std::size_t>(i)], stats);
      thick[static_cast<Eigen::Index>(b) * l_in + i] = p.spec.t / ranges::kTHi;
    }
    if (gaf_enabled) {
      const GafImage img = gaf_transform(p.load, GafMode::lenient);
      for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(img.g.size()); ++i) {
        image[static_cast<Eigen::Index>(b) * l_in * l_in + i] = img.g[static_cast<std::size_t>(i)];
      }
    }
    if (with_target) {
      for (int i = 0; i < l_out; ++i) {
        target[static_cast<Eigen::Index>(b) * l_out + i] =
            norm_stress(p.stress[static_cast<std::size_t>(i)], stats);
      }
    }
  }

  BatchInput out;
  out.batch = batch;
  out.load_norm = Tensor::from_data({batch, l_in, 1}, std::move(load), false);
  out.thickness = Tensor::from_data({batch, l_in, 1}, std::move(thick), false);
  if (gaf_enabled) {
    out.image = Tensor::from_data({batch, l_in, l_in, 1}, std::move(image), false);
  }
  if (with_target) out.target_norm = Tensor::from_data({batch, l_out}, std::move(target), false);
  return out;
}

SptStressModel::SptStressModel(const ModelConfig& cfg, Rng& rng)
    : cfg_(cfg), features_(cfg.gaf_enabled, rng), net_(net_config(cfg), rng) {}

Tensor SptStressModel::forward(const BatchInput& batch, double teacher_forcing_ratio,
                               bool training, Rng& rng) const {
  Tensor m = features_.forward(batch.load_norm, batch.thickness, batch.image);
  const Tensor* target = batch.target_norm.defined() ? &batch.target_norm : nullptr;
  return net_.forward(m, cfg_.grid.l_out, target, teacher_forcing_ratio, training, rng);
}

ParamList SptStressModel::params() const {
  ParamList out;
  features_.append_params("features.", out);
  net_.append_params(out);
  return out;
}

}  // namespace spt2ss
