#ifndef RECTNET_LAYERS_HPP_
#define RECTNET_LAYERS_HPP_

#include <cstddef>
#include <vector>

#include "rectnet/net_spec.hpp"
#include "rectnet/rng.hpp"
#include "rectnet/tensor.hpp"

namespace rectnet {

enum class Mode { Train, Eval };

/// Trainable state, one slot per spec layer. Conv/fc layers own weight
/// [d x c x k x k] (conv, flattened row per filter) or [d x n] (fc) plus
/// bias [d]; parametric activations own slopes (one per channel, or one
/// total when shared). Unused slots stay empty.
struct LayerParams {
  Tensor weight;
  Tensor bias;
  Tensor slopes;
};

struct Params {
  std::vector<LayerParams> layers;
};

/// Everything a layer's backward pass needs from its forward pass.
struct LayerCache {
  Tensor input;                 // conv/fc (flattened)/activation input
  Tensor mask;                  // dropout keep-scale per element
  std::vector<std::size_t> argmax;  // maxpool: flat input index per output
  std::vector<std::size_t> input_shape;  // shape the upstream layer expects
};

/// max(0, y) + a * min(0, y) applied elementwise; a is selected per channel
/// (axis 1 for rank >= 2 tensors, axis 0 for vectors) or shared. The
/// negative branch applies at y == 0.
Tensor prelu_forward(const Tensor& y, const Tensor& slopes, bool shared);

struct PreluGrads {
  Tensor grad_input;
  Tensor grad_slopes;
};

/// grad_input = upstream where y > 0, a * upstream where y <= 0.
/// grad_slopes[i] = sum over channel i's positions of upstream * y where
/// y <= 0; shared mode sums over all channels into one slot. Summation is
/// channel-major, then position, in ascending order.
PreluGrads prelu_backward(const Tensor& y, const Tensor& slopes, bool shared,
                          const Tensor& upstream);

/// Forward pass of spec layer `layer_idx` (not the loss layer). Dropout in
/// train mode requires rng. The cache is filled for layer_backward.
Tensor layer_forward(const NetworkSpec& spec, std::size_t layer_idx,
                     const Params& params, const Tensor& input, Mode mode,
                     RngStream* rng, LayerCache& cache);

/// Exact gradient of the layer's forward map. Returns grad wrt the input
/// and accumulates parameter gradients into `grads` (overwrites the slot).
Tensor layer_backward(const NetworkSpec& spec, std::size_t layer_idx,
                      const Params& params, const LayerCache& cache,
                      const Tensor& upstream, LayerParams& grads);

struct LossResult {
  double loss = 0.0;
  Tensor grad_logits;
};

/// Mean cross-entropy over the batch with max-shifted softmax; gradient is
/// (softmax - onehot) / batch.
LossResult softmax_xent(const Tensor& logits,
                        const std::vector<std::size_t>& labels);

struct ForwardPass {
  Tensor logits;  // output of the last layer before the loss, flattened
  std::vector<LayerCache> caches;
  std::vector<std::size_t> pre_loss_shape;  // logits shape before flattening
};

/// Runs every layer up to (not including) the softmax loss.
ForwardPass network_forward(const NetworkSpec& spec, const Params& params,
                            const Tensor& input, Mode mode,
                            RngStream* rng = nullptr);

/// Backpropagates grad_logits through the cached forward pass; returns all
/// parameter gradients, and the gradient wrt the network input if requested.
Params network_backward(const NetworkSpec& spec, const Params& params,
                        const ForwardPass& pass, const Tensor& grad_logits,
                        Tensor* grad_input = nullptr);

/// Zero-initialized parameter slots shaped like the spec demands (used for
/// gradients and optimizer state).
Params zero_params_like(const NetworkSpec& spec, const Params& params);

}  // namespace rectnet

#endif  // RECTNET_LAYERS_HPP_
