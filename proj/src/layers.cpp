#include "rectnet/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace rectnet {

namespace {

// Channel axis: 1 for batched tensors, 0 for plain vectors.
std::size_t channel_count(const Tensor& t) {
  return t.rank() >= 2 ? t.dim(1) : t.dim(0);
}

// Elements per (batch row, channel) block. For [N,C,H,W] this is H*W; for
// [N,C] it is 1; for a vector every element is its own channel.
std::size_t channel_block(const Tensor& t) {
  std::size_t block = 1;
  for (std::size_t axis = 2; axis < t.rank(); ++axis) block *= t.dim(axis);
  return block;
}

void check_slopes(const Tensor& slopes, std::size_t channels, bool shared) {
  const std::size_t expect = shared ? 1 : channels;
  if (slopes.rank() != 1 || slopes.size() != expect) {
    throw std::invalid_argument(
        "slope tensor " + slopes.shape_str() + " does not match " +
        (shared ? std::string("shared mode (expected [1])")
                : "channel count " + std::to_string(channels)));
  }
}

struct ConvGeometry {
  std::size_t batch, in_c, in_h, in_w;
  std::size_t out_c, out_h, out_w;
  std::size_t k, stride;
  long pad_top, pad_left;
};

ConvGeometry conv_geometry(const ConvSpec& conv, const Tensor& input) {
  if (input.rank() != 4) {
    throw std::invalid_argument("conv expects a [N x C x H x W] input, got " +
                                input.shape_str());
  }
  ConvGeometry g;
  g.batch = input.dim(0);
  g.in_c = input.dim(1);
  g.in_h = input.dim(2);
  g.in_w = input.dim(3);
  g.k = conv.k;
  g.stride = conv.stride;
  g.out_c = conv.filters;
  g.out_h = conv_output_extent(g.in_h, conv.k, conv.stride, conv.pad);
  g.out_w = conv_output_extent(g.in_w, conv.k, conv.stride, conv.pad);
  if (conv.pad == Padding::Same) {
    const long pad_h = std::max<long>(
        0, static_cast<long>((g.out_h - 1) * g.stride + g.k) -
               static_cast<long>(g.in_h));
    const long pad_w = std::max<long>(
        0, static_cast<long>((g.out_w - 1) * g.stride + g.k) -
               static_cast<long>(g.in_w));
    g.pad_top = pad_h / 2;
    g.pad_left = pad_w / 2;
  } else {
    g.pad_top = 0;
    g.pad_left = 0;
  }
  return g;
}

// Accumulation order per output element: channels, then filter rows, then
// filter columns, all ascending; bias added after the products. The direct
// convolution oracle in the tests uses the same order, so results must be
// bit-identical.
Tensor conv_forward(const ConvSpec& conv, const Tensor& W, const Tensor& b,
                    const Tensor& input, LayerCache& cache) {
  const ConvGeometry g = conv_geometry(conv, input);
  Tensor out({g.batch, g.out_c, g.out_h, g.out_w});
  const double* x = input.data();
  const double* w = W.data();
  double* y = out.data();
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t f = 0; f < g.out_c; ++f) {
      for (std::size_t oh = 0; oh < g.out_h; ++oh) {
        for (std::size_t ow = 0; ow < g.out_w; ++ow) {
          double acc = 0.0;
          for (std::size_t c = 0; c < g.in_c; ++c) {
            for (std::size_t kh = 0; kh < g.k; ++kh) {
              const long ih =
                  static_cast<long>(oh * g.stride + kh) - g.pad_top;
              if (ih < 0 || ih >= static_cast<long>(g.in_h)) continue;
              for (std::size_t kw = 0; kw < g.k; ++kw) {
                const long iw =
                    static_cast<long>(ow * g.stride + kw) - g.pad_left;
                if (iw < 0 || iw >= static_cast<long>(g.in_w)) continue;
                acc += w[((f * g.in_c + c) * g.k + kh) * g.k + kw] *
                       x[((n * g.in_c + c) * g.in_h + ih) * g.in_w + iw];
              }
            }
          }
          y[((n * g.out_c + f) * g.out_h + oh) * g.out_w + ow] = acc + b[f];
        }
      }
    }
  }
  cache.input = input;
  return out;
}

Tensor conv_backward(const ConvSpec& conv, const Tensor& W,
                     const LayerCache& cache, const Tensor& upstream,
                     LayerParams& grads) {
  const ConvGeometry g = conv_geometry(conv, cache.input);
  grads.weight = Tensor(W.shape());
  grads.bias = Tensor({g.out_c});
  Tensor grad_in(cache.input.shape());
  const double* x = cache.input.data();
  const double* w = W.data();
  const double* up = upstream.data();
  double* gw = grads.weight.data();
  double* gb = grads.bias.data();
  double* gx = grad_in.data();
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t f = 0; f < g.out_c; ++f) {
      for (std::size_t oh = 0; oh < g.out_h; ++oh) {
        for (std::size_t ow = 0; ow < g.out_w; ++ow) {
          const double u =
              up[((n * g.out_c + f) * g.out_h + oh) * g.out_w + ow];
          gb[f] += u;
          for (std::size_t c = 0; c < g.in_c; ++c) {
            for (std::size_t kh = 0; kh < g.k; ++kh) {
              const long ih =
                  static_cast<long>(oh * g.stride + kh) - g.pad_top;
              if (ih < 0 || ih >= static_cast<long>(g.in_h)) continue;
              for (std::size_t kw = 0; kw < g.k; ++kw) {
                const long iw =
                    static_cast<long>(ow * g.stride + kw) - g.pad_left;
                if (iw < 0 || iw >= static_cast<long>(g.in_w)) continue;
                const std::size_t wi = ((f * g.in_c + c) * g.k + kh) * g.k + kw;
                const std::size_t xi =
                    ((n * g.in_c + c) * g.in_h + ih) * g.in_w + iw;
                gw[wi] += u * x[xi];
                gx[xi] += u * w[wi];  // the rearranged-filter product
              }
            }
          }
        }
      }
    }
  }
  return grad_in;
}

Tensor as_matrix(const Tensor& t) {
  if (t.rank() == 2) return t;
  std::size_t flat = 1;
  for (std::size_t axis = 1; axis < t.rank(); ++axis) flat *= t.dim(axis);
  return t.reshaped({t.dim(0), flat});
}

Tensor fc_forward(const Tensor& W, const Tensor& b, const Tensor& input,
                  LayerCache& cache) {
  cache.input_shape = input.shape();
  const Tensor x = as_matrix(input);
  const std::size_t batch = x.dim(0), in_n = x.dim(1);
  const std::size_t units = W.dim(0);
  if (W.dim(1) != in_n) {
    throw std::invalid_argument("fc weight " + W.shape_str() +
                                " does not accept input " + x.shape_str());
  }
  Tensor out({batch, units});
  const double* px = x.data();
  const double* pw = W.data();
  double* py = out.data();
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t o = 0; o < units; ++o) {
      double acc = 0.0;
      const double* xrow = px + n * in_n;
      const double* wrow = pw + o * in_n;
      for (std::size_t i = 0; i < in_n; ++i) acc += wrow[i] * xrow[i];
      py[n * units + o] = acc + b[o];
    }
  }
  cache.input = x;
  return out;
}

Tensor fc_backward(const Tensor& W, const LayerCache& cache,
                   const Tensor& upstream, LayerParams& grads) {
  const Tensor& x = cache.input;
  const std::size_t batch = x.dim(0), in_n = x.dim(1);
  const std::size_t units = W.dim(0);
  grads.weight = Tensor(W.shape());
  grads.bias = Tensor({units});
  Tensor grad_in({batch, in_n});
  const double* up = upstream.data();
  const double* px = x.data();
  const double* pw = W.data();
  double* gw = grads.weight.data();
  double* gb = grads.bias.data();
  double* gx = grad_in.data();
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t o = 0; o < units; ++o) {
      const double u = up[n * units + o];
      gb[o] += u;
      const double* xrow = px + n * in_n;
      double* gwrow = gw + o * in_n;
      double* gxrow = gx + n * in_n;
      const double* wrow = pw + o * in_n;
      for (std::size_t i = 0; i < in_n; ++i) {
        gwrow[i] += u * xrow[i];
        gxrow[i] += u * wrow[i];
      }
    }
  }
  return grad_in.reshaped(cache.input_shape);
}

Tensor maxpool_forward(const MaxPoolSpec& pool, const Tensor& input,
                       LayerCache& cache) {
  if (input.rank() != 4) {
    throw std::invalid_argument("maxpool expects [N x C x H x W], got " +
                                input.shape_str());
  }
  const std::size_t batch = input.dim(0), ch = input.dim(1);
  const std::size_t in_h = input.dim(2), in_w = input.dim(3);
  const std::size_t out_h =
      conv_output_extent(in_h, pool.k, pool.stride, Padding::Valid);
  const std::size_t out_w =
      conv_output_extent(in_w, pool.k, pool.stride, Padding::Valid);
  Tensor out({batch, ch, out_h, out_w});
  cache.argmax.assign(out.size(), 0);
  cache.input_shape = input.shape();
  const double* x = input.data();
  double* y = out.data();
  std::size_t oi = 0;
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t c = 0; c < ch; ++c) {
      for (std::size_t oh = 0; oh < out_h; ++oh) {
        for (std::size_t ow = 0; ow < out_w; ++ow, ++oi) {
          double best = -std::numeric_limits<double>::infinity();
          std::size_t best_i = 0;
          for (std::size_t kh = 0; kh < pool.k; ++kh) {
            for (std::size_t kw = 0; kw < pool.k; ++kw) {
              const std::size_t ih = oh * pool.stride + kh;
              const std::size_t iw = ow * pool.stride + kw;
              const std::size_t xi = ((n * ch + c) * in_h + ih) * in_w + iw;
              if (x[xi] > best) {  // ties keep the first position scanned
                best = x[xi];
                best_i = xi;
              }
            }
          }
          y[oi] = best;
          cache.argmax[oi] = best_i;
        }
      }
    }
  }
  return out;
}

Tensor maxpool_backward(const LayerCache& cache, const Tensor& upstream) {
  Tensor grad_in(cache.input_shape);
  for (std::size_t i = 0; i < upstream.size(); ++i) {
    grad_in[cache.argmax[i]] += upstream[i];
  }
  return grad_in;
}

double act_slope(const ActSpec& act) {
  switch (act.kind) {
    case ActKind::ReLU:
      return 0.0;
    case ActKind::Identity:
      return 1.0;
    default:
      return act.a;
  }
}

Tensor fixed_slope_forward(const Tensor& y, double a) {
  Tensor out(y.shape());
  for (std::size_t i = 0; i < y.size(); ++i) {
    out[i] = y[i] > 0.0 ? y[i] : a * y[i];
  }
  return out;
}

Tensor fixed_slope_backward(const Tensor& y, double a,
                            const Tensor& upstream) {
  Tensor grad(y.shape());
  for (std::size_t i = 0; i < y.size(); ++i) {
    grad[i] = y[i] > 0.0 ? upstream[i] : a * upstream[i];
  }
  return grad;
}

Tensor dropout_forward(const DropoutSpec& drop, const Tensor& input,
                       Mode mode, RngStream* rng, LayerCache& cache) {
  if (mode == Mode::Eval || drop.rate == 0.0) {
    return input;  // inverted dropout: evaluation is the identity
  }
  if (!rng) {
    throw std::invalid_argument("dropout requires an rng in train mode");
  }
  const double keep_scale = 1.0 / (1.0 - drop.rate);
  cache.mask = Tensor(input.shape());
  Tensor out(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) {
    const double keep = rng->uniform() >= drop.rate ? keep_scale : 0.0;
    cache.mask[i] = keep;
    out[i] = input[i] * keep;
  }
  return out;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(what) + " shape mismatch: " +
                                a.shape_str() + " vs " + b.shape_str());
  }
}

}  // namespace

Tensor prelu_forward(const Tensor& y, const Tensor& slopes, bool shared) {
  const std::size_t channels = channel_count(y);
  check_slopes(slopes, channels, shared);
  const std::size_t block = channel_block(y);
  const std::size_t row = channels * block;  // elements per batch item
  const std::size_t rows = y.size() / row;
  Tensor out(y.shape());
  for (std::size_t n = 0; n < rows; ++n) {
    for (std::size_t c = 0; c < channels; ++c) {
      const double a = shared ? slopes[0] : slopes[c];
      const std::size_t base = n * row + c * block;
      for (std::size_t p = 0; p < block; ++p) {
        const double v = y[base + p];
        out[base + p] = v > 0.0 ? v : a * v;
      }
    }
  }
  return out;
}

PreluGrads prelu_backward(const Tensor& y, const Tensor& slopes, bool shared,
                          const Tensor& upstream) {
  check_same_shape(y, upstream, "prelu upstream");
  const std::size_t channels = channel_count(y);
  check_slopes(slopes, channels, shared);
  const std::size_t block = channel_block(y);
  const std::size_t row = channels * block;
  const std::size_t rows = y.size() / row;
  PreluGrads out;
  out.grad_input = Tensor(y.shape());
  out.grad_slopes = Tensor(slopes.shape());
  // Channel-major accumulation, positions (batch, spatial) ascending inside.
  for (std::size_t c = 0; c < channels; ++c) {
    const double a = shared ? slopes[0] : slopes[c];
    double& slot = out.grad_slopes[shared ? 0 : c];
    for (std::size_t n = 0; n < rows; ++n) {
      const std::size_t base = n * row + c * block;
      for (std::size_t p = 0; p < block; ++p) {
        const double v = y[base + p];
        const double u = upstream[base + p];
        if (v > 0.0) {
          out.grad_input[base + p] = u;
        } else {
          out.grad_input[base + p] = a * u;
          slot += u * v;
        }
      }
    }
  }
  return out;
}

Tensor layer_forward(const NetworkSpec& spec, std::size_t layer_idx,
                     const Params& params, const Tensor& input, Mode mode,
                     RngStream* rng, LayerCache& cache) {
  const LayerSpec& layer = spec.layer(layer_idx);
  const LayerParams& p = params.layers[layer_idx];

  if (const auto* conv = std::get_if<ConvSpec>(&layer)) {
    return conv_forward(*conv, p.weight, p.bias, input, cache);
  }
  if (std::holds_alternative<FcSpec>(layer)) {
    return fc_forward(p.weight, p.bias, input, cache);
  }
  if (const auto* pool = std::get_if<MaxPoolSpec>(&layer)) {
    return maxpool_forward(*pool, input, cache);
  }
  if (const auto* act = std::get_if<ActSpec>(&layer)) {
    cache.input = input;
    if (act->parametric()) {
      return prelu_forward(input, p.slopes,
                           act->kind == ActKind::PReLUShared);
    }
    return fixed_slope_forward(input, act_slope(*act));
  }
  if (const auto* drop = std::get_if<DropoutSpec>(&layer)) {
    return dropout_forward(*drop, input, mode, rng, cache);
  }
  if (std::holds_alternative<InputSpec>(layer)) {
    return input;
  }
  throw std::invalid_argument("layer_forward cannot run a loss layer");
}

Tensor layer_backward(const NetworkSpec& spec, std::size_t layer_idx,
                      const Params& params, const LayerCache& cache,
                      const Tensor& upstream, LayerParams& grads) {
  const LayerSpec& layer = spec.layer(layer_idx);
  const LayerParams& p = params.layers[layer_idx];

  if (const auto* conv = std::get_if<ConvSpec>(&layer)) {
    return conv_backward(*conv, p.weight, cache, upstream, grads);
  }
  if (std::holds_alternative<FcSpec>(layer)) {
    return fc_backward(p.weight, cache, upstream, grads);
  }
  if (std::holds_alternative<MaxPoolSpec>(layer)) {
    return maxpool_backward(cache, upstream);
  }
  if (const auto* act = std::get_if<ActSpec>(&layer)) {
    check_same_shape(cache.input, upstream, "activation upstream");
    if (act->parametric()) {
      PreluGrads g = prelu_backward(cache.input, p.slopes,
                                    act->kind == ActKind::PReLUShared,
                                    upstream);
      grads.slopes = std::move(g.grad_slopes);
      return std::move(g.grad_input);
    }
    return fixed_slope_backward(cache.input, act_slope(*act), upstream);
  }
  if (std::holds_alternative<DropoutSpec>(layer)) {
    if (cache.mask.empty()) return upstream;  // eval / rate 0: identity
    check_same_shape(cache.mask, upstream, "dropout upstream");
    Tensor grad(upstream.shape());
    for (std::size_t i = 0; i < grad.size(); ++i) {
      grad[i] = upstream[i] * cache.mask[i];
    }
    return grad;
  }
  if (std::holds_alternative<InputSpec>(layer)) {
    return upstream;
  }
  throw std::invalid_argument("layer_backward cannot run a loss layer");
}

LossResult softmax_xent(const Tensor& logits,
                        const std::vector<std::size_t>& labels) {
  if (logits.rank() != 2) {
    throw std::invalid_argument("softmax_xent expects [batch x classes], got " +
                                logits.shape_str());
  }
  const std::size_t batch = logits.dim(0), classes = logits.dim(1);
  if (labels.size() != batch) {
    throw std::invalid_argument("label count " + std::to_string(labels.size()) +
                                " does not match batch " +
                                std::to_string(batch));
  }
  LossResult res;
  res.grad_logits = Tensor(logits.shape());
  double total = 0.0;
  const double inv_batch = 1.0 / static_cast<double>(batch);
  for (std::size_t n = 0; n < batch; ++n) {
    if (labels[n] >= classes) {
      throw std::invalid_argument("label " + std::to_string(labels[n]) +
                                  " out of range for " +
                                  std::to_string(classes) + " classes");
    }
    const double* row = logits.data() + n * classes;
    double mx = row[0];
    for (std::size_t j = 1; j < classes; ++j) mx = std::max(mx, row[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < classes; ++j) z += std::exp(row[j] - mx);
    const double log_z = std::log(z);
    total += -(row[labels[n]] - mx - log_z);
    double* grow = res.grad_logits.data() + n * classes;
    for (std::size_t j = 0; j < classes; ++j) {
      const double p = std::exp(row[j] - mx) / z;
      grow[j] = (p - (j == labels[n] ? 1.0 : 0.0)) * inv_batch;
    }
  }
  res.loss = total * inv_batch;
  return res;
}

ForwardPass network_forward(const NetworkSpec& spec, const Params& params,
                            const Tensor& input, Mode mode, RngStream* rng) {
  ForwardPass pass;
  pass.caches.resize(spec.layer_count());
  Tensor cur = input;
  for (std::size_t i = 0; i + 1 < spec.layer_count(); ++i) {
    cur = layer_forward(spec, i, params, cur, mode, rng, pass.caches[i]);
  }
  // The loss layer consumes flattened logits.
  pass.pre_loss_shape = cur.shape();
  pass.logits = as_matrix(cur);
  return pass;
}

Params network_backward(const NetworkSpec& spec, const Params& params,
                        const ForwardPass& pass, const Tensor& grad_logits,
                        Tensor* grad_input) {
  Params grads = zero_params_like(spec, params);
  // Undo the logits flattening before entering the layer stack.
  Tensor cur = grad_logits.reshaped(pass.pre_loss_shape);
  for (std::size_t i = spec.layer_count() - 1; i-- > 0;) {
    cur = layer_backward(spec, i, params, pass.caches[i], cur,
                         grads.layers[i]);
  }
  if (grad_input) *grad_input = std::move(cur);
  return grads;
}

Params zero_params_like(const NetworkSpec& spec, const Params& params) {
  Params out;
  out.layers.resize(spec.layer_count());
  for (std::size_t i = 0; i < spec.layer_count(); ++i) {
    const LayerParams& p = params.layers[i];
    if (!p.weight.empty()) out.layers[i].weight = Tensor(p.weight.shape());
    if (!p.bias.empty()) out.layers[i].bias = Tensor(p.bias.shape());
    if (!p.slopes.empty()) out.layers[i].slopes = Tensor(p.slopes.shape());
  }
  return out;
}

}  // namespace rectnet
