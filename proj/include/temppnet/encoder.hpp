#pragma once

#include <array>
#include <random>
#include <vector>

#include "temppnet/autodiff.hpp"

// Five-block 1-D CNN over a shaped 3x300 segment. Each block runs
// conv -> batchnorm -> maxpool -> leaky_relu; the final block stops after
// batchnorm. The three segment outputs concatenate to the 128x15 feature
// matrix whose columns are patch embeddings.

namespace temppnet {

struct ConvBlock {
  ad::Param weight;  // [cout, cin, kernel]
  ad::Param bias;
  ad::Param bn_gamma;
  ad::Param bn_beta;
  ad::BatchNormStats running;
};

struct ReceptiveField {
  int segment = 0;  // 0 outbound, 1 return, 2 rest
  int begin = 0;    // inclusive 10 Hz sample indices within the segment
  int end = 0;
};

class Encoder {
 public:
  static constexpr int kBlocks = 5;
  static constexpr int kKernel = 8;
  static constexpr std::array<int, kBlocks + 1> kChannels = {3, 256, 512, 256, 128, 128};
  static constexpr int kEmbedDim = 128;          // n_e
  static constexpr int kPatchesPerSegment = 5;
  static constexpr int kNumPatches = 15;         // n_o
  // composed conv/pool arithmetic: patch p covers [16p, 16p + 232]
  static constexpr int kFieldStride = 16;
  static constexpr int kFieldExtent = 233;

  Encoder();
  void init_weights(std::mt19937_64& rng);

  // Parameter leaves created once per graph and shared by all segments.
  struct Leaves {
    std::array<ad::Value, kBlocks> weight, bias, gamma, beta;
  };
  Leaves leaves(ad::Graph& g);

  // x must be 3x300. In training mode batchnorm uses batch statistics and
  // records observations on the graph (layer ids 0..4); fold them with
  // fold_batch_stats afterwards.
  ad::Value encode_segment(ad::Graph& g, const Leaves& lv, ad::Value x, bool training,
                           std::vector<ad::Shape>* trace = nullptr) const;

  // Three shaped segments (outbound, return, rest) -> 128x15.
  ad::Value encode_test(ad::Graph& g, const Leaves& lv,
                        const std::array<ad::Value, 3>& segments, bool training) const;

  // Patch index o in 1..15 -> segment id and input interval.
  static ReceptiveField receptive_field(int patch_one_based);

  void fold_batch_stats(const std::vector<ad::BatchNormObservation>& obs,
                        double momentum = 0.1);

  std::vector<ad::Param*> parameters();
  ConvBlock& block(int i) { return blocks_[i]; }
  const ConvBlock& block(int i) const { return blocks_[i]; }

 private:
  std::array<ConvBlock, kBlocks> blocks_;
};

}  // namespace temppnet
