#include "temppnet/encoder.hpp"

#include <cmath>
#include <string>

namespace temppnet {

Encoder::Encoder() {
  for (int i = 0; i < kBlocks; ++i) {
    const int cin = kChannels[i], cout = kChannels[i + 1];
    const std::string tag = "encoder.block" + std::to_string(i);
    blocks_[i].weight = ad::Param(tag + ".weight", {cout, cin, kKernel});
    blocks_[i].bias = ad::Param(tag + ".bias", {cout});
    blocks_[i].bn_gamma = ad::Param(tag + ".bn_gamma", {cout});
    blocks_[i].bn_beta = ad::Param(tag + ".bn_beta", {cout});
    blocks_[i].running.mean.assign(cout, 0.0);
    blocks_[i].running.var.assign(cout, 1.0);
    std::fill(blocks_[i].bn_gamma.value.begin(), blocks_[i].bn_gamma.value.end(), 1.0);
  }
}

void Encoder::init_weights(std::mt19937_64& rng) {
  for (ConvBlock& b : blocks_) {
    const int fan_in = b.weight.shape[1] * b.weight.shape[2];
    const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> u(-scale, scale);
    for (double& w : b.weight.value) w = u(rng);
    for (double& w : b.bias.value) w = u(rng);
    std::fill(b.bn_gamma.value.begin(), b.bn_gamma.value.end(), 1.0);
    std::fill(b.bn_beta.value.begin(), b.bn_beta.value.end(), 0.0);
    b.running.mean.assign(b.running.mean.size(), 0.0);
    b.running.var.assign(b.running.var.size(), 1.0);
  }
}

Encoder::Leaves Encoder::leaves(ad::Graph& g) {
  Leaves lv;
  for (int i = 0; i < kBlocks; ++i) {
    lv.weight[i] = g.param(blocks_[i].weight);
    lv.bias[i] = g.param(blocks_[i].bias);
    lv.gamma[i] = g.param(blocks_[i].bn_gamma);
    lv.beta[i] = g.param(blocks_[i].bn_beta);
  }
  return lv;
}

ad::Value Encoder::encode_segment(ad::Graph& g, const Leaves& lv, ad::Value x,
                                  bool training, std::vector<ad::Shape>* trace) const {
  if (x.shape() != ad::Shape{3, 300})
    throw ad::ShapeError("encode_segment: segment must be (3,300), got " +
                         ad::shape_str(x.shape()));
  ad::Value v = x;
  for (int i = 0; i < kBlocks; ++i) {
    v = g.conv1d(v, lv.weight[i], lv.bias[i], kKernel);
    if (trace) trace->push_back(v.shape());
    v = g.batchnorm1d(v, lv.gamma[i], lv.beta[i], i,
                      training ? nullptr : &blocks_[i].running);
    if (i + 1 < kBlocks) {
      v = g.maxpool1d(v);
      if (trace) trace->push_back(v.shape());
      v = g.leaky_relu(v, 0.01);
    }
  }
  return v;  // [128, 5]
}

ad::Value Encoder::encode_test(ad::Graph& g, const Leaves& lv,
                               const std::array<ad::Value, 3>& segments,
                               bool training) const {
  std::vector<ad::Value> outs;
  outs.reserve(3);
  for (const ad::Value& seg : segments)
    outs.push_back(encode_segment(g, lv, seg, training));
  return g.hconcat(outs);  // [128, 15]
}

ReceptiveField Encoder::receptive_field(int patch_one_based) {
  if (patch_one_based < 1 || patch_one_based > kNumPatches)
    throw ad::ShapeError("receptive_field: patch index " +
                         std::to_string(patch_one_based) + " outside 1..15");
  const int o = patch_one_based - 1;
  ReceptiveField rf;
  rf.segment = o / kPatchesPerSegment;
  const int p = o % kPatchesPerSegment;
  rf.begin = kFieldStride * p;
  rf.end = std::min(rf.begin + kFieldExtent - 1, 299);
  return rf;
}

void Encoder::fold_batch_stats(const std::vector<ad::BatchNormObservation>& obs,
                               double momentum) {
  for (const ad::BatchNormObservation& o : obs) {
    ad::BatchNormStats& rs = blocks_[o.layer_id].running;
    for (std::size_t c = 0; c < rs.mean.size(); ++c) {
      rs.mean[c] = (1.0 - momentum) * rs.mean[c] + momentum * o.mean[c];
      rs.var[c] = (1.0 - momentum) * rs.var[c] + momentum * o.var_unbiased[c];
    }
  }
}

std::vector<ad::Param*> Encoder::parameters() {
  std::vector<ad::Param*> out;
  for (ConvBlock& b : blocks_) {
    out.push_back(&b.weight);
    out.push_back(&b.bias);
    out.push_back(&b.bn_gamma);
    out.push_back(&b.bn_beta);
  }
  return out;
}

}  // namespace temppnet
