#pragma once

// Mamba-based generator: patch embedding -> RDSMB stack -> CRSA -> decoder.

#include <string>
#include <vector>

#include "stymam/rng.hpp"
#include "stymam/scan.hpp"
#include "stymam/ssm.hpp"
#include "stymam/tensor.hpp"

namespace stymam {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};
using ParamList = std::vector<NamedTensor>;

std::vector<Tensor> tensors_of(const ParamList& params);

struct GeneratorConfig {
  std::size_t channels = 8;        // C
  std::size_t state_dim = 4;       // N
  std::size_t num_rdsmb = 1;
  std::size_t dsmb_per_rdsmb = 2;
  std::size_t strip_size = 4;      // at feature resolution
  Real alpha_init = 0.1;
  bool selective = false;          // input-dependent B_t, C_t in the SSM
  bool crsa_softmax = false;       // row softmax on the spatial attention map

  static GeneratorConfig desk();
  static GeneratorConfig paper();
  void validate() const;
};

// One DSMB branch: Linear -> DWConv -> SiLU -> SSM -> Linear -> LOE.
struct BranchWeights {
  Tensor lin_in_w, lin_in_b;    // [C x C], [C]
  Tensor dw_kernels;            // [3 x 3 x C]
  SSMParams ssm;
  Tensor lin_out_w, lin_out_b;  // [C x C], [C]
  Tensor loe_kernels;           // [3 x 3 x C]
  Tensor loe_scale;             // [C]

  void collect(const std::string& prefix, ParamList& out) const;
};

struct DSMBWeights {
  BranchWeights horizontal, vertical;
  Tensor alpha;  // [1], shared residual scale

  void collect(const std::string& prefix, ParamList& out) const;
};

struct RDSMBWeights {
  std::vector<DSMBWeights> blocks;
};

struct CRSAWeights {
  Tensor w_r, b_r;  // 1x1 conv producing R: [C x C], [C]
};

struct EmbedWeights {
  Tensor conv1_w, conv1_b;  // [3 x 3 x 3 x C], stride 2
  Tensor conv2_w, conv2_b;  // [3 x 3 x C x C], stride 2
};

struct DecoderWeights {
  Tensor up1_w, up1_b;  // [3 x 3 x C x C]
  Tensor up2_w, up2_b;  // [3 x 3 x C x C]
  Tensor out_w, out_b;  // [C x 3], [3]
};

struct GeneratorWeights {
  GeneratorConfig config;
  EmbedWeights embed;
  std::vector<RDSMBWeights> groups;
  CRSAWeights crsa;
  DecoderWeights decoder;

  static GeneratorWeights init(const GeneratorConfig& config, Rng& rng);
  // Every tensor zero, alpha included.
  static GeneratorWeights zeros(const GeneratorConfig& config);

  // Stable, uniquely named list of all trainable tensors.
  ParamList params() const;
};

// Zeroes every branch pipeline weight, leaving alpha alone.
void zero_pipelines(DSMBWeights& w);

// [H x W x 3] -> [H/4 x W/4 x C]. H and W must be multiples of 4.
Tensor patch_embed(const Tensor& img, const EmbedWeights& w);

// Single branch pipeline output (before the residual), [h x w x C].
Tensor branch_pipeline(const Tensor& features, const BranchWeights& w, const ScanOrder& order);

// Mean of the two residual branches: F + alpha * (p_h(F) + p_v(F)) / 2.
Tensor dsmb_forward(const Tensor& features, const DSMBWeights& w, const DualPath& paths);

// F + (DSMB_k o ... o DSMB_1)(F).
Tensor rdsmb_forward(const Tensor& features, const RDSMBWeights& w, const DualPath& paths);

// Channel-reweighted spatial attention:
//   G  = avgpool(F), R = conv1x1(F), G1 = R (.) G
//   A  = R' G1'^T / (hw C)   (optionally row-softmaxed)
//   out = reshape(A F')
Tensor crsa_forward(const Tensor& features, const CRSAWeights& w, bool softmax = false);

// [h x w x C] -> [4h x 4w x 3] in [-1, 1].
Tensor decode(const Tensor& features, const DecoderWeights& w);

Tensor generator_forward(const Tensor& img, const GeneratorWeights& w);
// Same, with caller-provided scan paths (must match the feature extents).
Tensor generator_forward(const Tensor& img, const GeneratorWeights& w, const DualPath& paths);

}  // namespace stymam
