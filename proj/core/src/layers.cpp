#include "dmtlr/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace dmtlr::nn {

namespace {

[[noreturn]] void shape_error(const LayerSpec& spec, const Tensor& input,
                              const std::string& expected) {
  throw std::invalid_argument(spec.name() + ": input shape " +
                              input.shape_string() + " incompatible, expected " +
                              expected);
}

struct ConvGeometry {
  int out_h = 0, out_w = 0;
  int pad_top = 0, pad_left = 0;
};

ConvGeometry conv_geometry(const LayerSpec& spec, int h, int w) {
  ConvGeometry g;
  if (spec.padding == Padding::kValid) {
    if (h < spec.kernel || w < spec.kernel)
      throw std::invalid_argument(spec.name() + ": input " + std::to_string(h) +
                                  "x" + std::to_string(w) +
                                  " smaller than kernel");
    g.out_h = (h - spec.kernel) / spec.stride + 1;
    g.out_w = (w - spec.kernel) / spec.stride + 1;
  } else {
    g.out_h = (h + spec.stride - 1) / spec.stride;
    g.out_w = (w + spec.stride - 1) / spec.stride;
    const int pad_h = std::max((g.out_h - 1) * spec.stride + spec.kernel - h, 0);
    const int pad_w = std::max((g.out_w - 1) * spec.stride + spec.kernel - w, 0);
    g.pad_top = pad_h / 2;
    g.pad_left = pad_w / 2;
  }
  return g;
}

void apply_relu(Tensor& t, std::vector<std::uint8_t>* mask) {
  if (mask) mask->resize(t.data.size());
  for (std::size_t i = 0; i < t.data.size(); ++i) {
    const bool positive = t.data[i] > 0.0;
    if (!positive) t.data[i] = 0.0;
    if (mask) (*mask)[i] = positive ? 1 : 0;
  }
}

// grad of the activation: grad_out masked by the forward sign.
Tensor masked_grad(const LayerSpec& spec, const ForwardCache& cache,
                   const Tensor& grad_out) {
  Tensor dz = grad_out;
  if (spec.activation == Activation::kReLU) {
    if (cache.relu_mask.size() != dz.data.size())
      throw std::invalid_argument(spec.name() + ": cache/layer mismatch");
    for (std::size_t i = 0; i < dz.data.size(); ++i)
      if (!cache.relu_mask[i]) dz.data[i] = 0.0;
  }
  return dz;
}

Tensor dense_forward(const LayerSpec& spec, const ParamSet& params,
                     const Tensor& input, ForwardCache* cache) {
  if (input.rank() != 2 || input.dim(1) != spec.in_dim)
    shape_error(spec, input, "(batch," + std::to_string(spec.in_dim) + ")");
  const int batch = input.dim(0);
  const int din = spec.in_dim, dout = spec.out_dim;
  Tensor out({batch, dout});
  const double* w = params.weights.data.data();
  const double* bias = params.biases.data.data();
  for (int b = 0; b < batch; ++b) {
    const double* x = &input.data[static_cast<std::size_t>(b) * din];
    double* y = &out.data[static_cast<std::size_t>(b) * dout];
    std::copy(bias, bias + dout, y);
    for (int i = 0; i < din; ++i) {
      const double v = x[i];
      const double* wrow = w + static_cast<std::size_t>(i) * dout;
      for (int j = 0; j < dout; ++j) y[j] += v * wrow[j];
    }
  }
  if (spec.activation == Activation::kReLU)
    apply_relu(out, cache ? &cache->relu_mask : nullptr);
  if (cache) cache->input = input;
  return out;
}

Tensor dense_backward(const LayerSpec& spec, ParamSet& params,
                      const ForwardCache& cache, const Tensor& grad_out) {
  const Tensor dz = masked_grad(spec, cache, grad_out);
  const Tensor& input = cache.input;
  const int batch = input.dim(0);
  const int din = spec.in_dim, dout = spec.out_dim;
  Tensor grad_in({batch, din});
  double* wg = params.weight_grad.data.data();
  double* bg = params.bias_grad.data.data();
  const double* w = params.weights.data.data();
  for (int b = 0; b < batch; ++b) {
    const double* g = &dz.data[static_cast<std::size_t>(b) * dout];
    const double* x = &input.data[static_cast<std::size_t>(b) * din];
    double* gi = &grad_in.data[static_cast<std::size_t>(b) * din];
    for (int j = 0; j < dout; ++j) bg[j] += g[j];
    for (int i = 0; i < din; ++i) {
      const double v = x[i];
      double* wgrow = wg + static_cast<std::size_t>(i) * dout;
      const double* wrow = w + static_cast<std::size_t>(i) * dout;
      double acc = 0.0;
      for (int j = 0; j < dout; ++j) {
        wgrow[j] += v * g[j];
        acc += wrow[j] * g[j];
      }
      gi[i] = acc;
    }
  }
  return grad_in;
}

Tensor conv_forward(const LayerSpec& spec, const ParamSet& params,
                    const Tensor& input, ForwardCache* cache) {
  if (input.rank() != 4 || input.dim(3) != spec.in_channels)
    shape_error(spec, input, "(batch,h,w," + std::to_string(spec.in_channels) + ")");
  const int batch = input.dim(0), h = input.dim(1), w = input.dim(2);
  const int cin = spec.in_channels, cout = spec.out_channels, k = spec.kernel;
  const ConvGeometry g = conv_geometry(spec, h, w);
  Tensor out({batch, g.out_h, g.out_w, cout});
  const double* wts = params.weights.data.data();  // (k, k, cin, cout)
  const double* bias = params.biases.data.data();
  for (int b = 0; b < batch; ++b) {
    const double* in_b = &input.data[static_cast<std::size_t>(b) * h * w * cin];
    double* out_b = &out.data[static_cast<std::size_t>(b) * g.out_h * g.out_w * cout];
    for (int oy = 0; oy < g.out_h; ++oy) {
      for (int ox = 0; ox < g.out_w; ++ox) {
        double* acc = out_b + (static_cast<std::size_t>(oy) * g.out_w + ox) * cout;
        std::copy(bias, bias + cout, acc);
        const int iy0 = oy * spec.stride - g.pad_top;
        const int ix0 = ox * spec.stride - g.pad_left;
        for (int ky = 0; ky < k; ++ky) {
          const int iy = iy0 + ky;
          if (iy < 0 || iy >= h) continue;
          for (int kx = 0; kx < k; ++kx) {
            const int ix = ix0 + kx;
            if (ix < 0 || ix >= w) continue;
            const double* px = in_b + (static_cast<std::size_t>(iy) * w + ix) * cin;
            const double* wk = wts + (static_cast<std::size_t>(ky) * k + kx) * cin * cout;
            for (int ic = 0; ic < cin; ++ic) {
              const double v = px[ic];
              const double* wrow = wk + static_cast<std::size_t>(ic) * cout;
              for (int oc = 0; oc < cout; ++oc) acc[oc] += v * wrow[oc];
            }
          }
        }
      }
    }
  }
  if (spec.activation == Activation::kReLU)
    apply_relu(out, cache ? &cache->relu_mask : nullptr);
  if (cache) cache->input = input;
  return out;
}

Tensor conv_backward(const LayerSpec& spec, ParamSet& params,
                     const ForwardCache& cache, const Tensor& grad_out) {
  const Tensor dz = masked_grad(spec, cache, grad_out);
  const Tensor& input = cache.input;
  const int batch = input.dim(0), h = input.dim(1), w = input.dim(2);
  const int cin = spec.in_channels, cout = spec.out_channels, k = spec.kernel;
  const ConvGeometry g = conv_geometry(spec, h, w);
  Tensor grad_in(input.shape);
  double* wg = params.weight_grad.data.data();
  double* bg = params.bias_grad.data.data();
  const double* wts = params.weights.data.data();
  for (int b = 0; b < batch; ++b) {
    const double* in_b = &input.data[static_cast<std::size_t>(b) * h * w * cin];
    double* gin_b = &grad_in.data[static_cast<std::size_t>(b) * h * w * cin];
    const double* dz_b = &dz.data[static_cast<std::size_t>(b) * g.out_h * g.out_w * cout];
    for (int oy = 0; oy < g.out_h; ++oy) {
      for (int ox = 0; ox < g.out_w; ++ox) {
        const double* gpx = dz_b + (static_cast<std::size_t>(oy) * g.out_w + ox) * cout;
        for (int oc = 0; oc < cout; ++oc) bg[oc] += gpx[oc];
        const int iy0 = oy * spec.stride - g.pad_top;
        const int ix0 = ox * spec.stride - g.pad_left;
        for (int ky = 0; ky < k; ++ky) {
          const int iy = iy0 + ky;
          if (iy < 0 || iy >= h) continue;
          for (int kx = 0; kx < k; ++kx) {
            const int ix = ix0 + kx;
            if (ix < 0 || ix >= w) continue;
            const double* px = in_b + (static_cast<std::size_t>(iy) * w + ix) * cin;
            double* gin_px = gin_b + (static_cast<std::size_t>(iy) * w + ix) * cin;
            const std::size_t koff = (static_cast<std::size_t>(ky) * k + kx) * cin * cout;
            for (int ic = 0; ic < cin; ++ic) {
              const double v = px[ic];
              double* wgrow = wg + koff + static_cast<std::size_t>(ic) * cout;
              const double* wrow = wts + koff + static_cast<std::size_t>(ic) * cout;
              double acc = 0.0;
              for (int oc = 0; oc < cout; ++oc) {
                wgrow[oc] += v * gpx[oc];
                acc += wrow[oc] * gpx[oc];
              }
              gin_px[ic] += acc;
            }
          }
        }
      }
    }
  }
  return grad_in;
}

Tensor pool_forward(const LayerSpec& spec, const Tensor& input, ForwardCache* cache) {
  if (input.rank() != 4) shape_error(spec, input, "(batch,h,w,c)");
  const int batch = input.dim(0), h = input.dim(1), w = input.dim(2), c = input.dim(3);
  if (h < spec.kernel || w < spec.kernel)
    shape_error(spec, input, "spatial dims >= kernel " + std::to_string(spec.kernel));
  const int out_h = (h - spec.kernel) / spec.stride + 1;
  const int out_w = (w - spec.kernel) / spec.stride + 1;
  Tensor out({batch, out_h, out_w, c});
  if (cache) cache->argmax.assign(out.data.size(), 0);
  std::size_t o = 0;
  for (int b = 0; b < batch; ++b) {
    const std::size_t in_b = static_cast<std::size_t>(b) * h * w * c;
    for (int oy = 0; oy < out_h; ++oy) {
      for (int ox = 0; ox < out_w; ++ox, o += static_cast<std::size_t>(c)) {
        double* acc = &out.data[o];
        std::fill(acc, acc + c, -std::numeric_limits<double>::infinity());
        for (int ky = 0; ky < spec.kernel; ++ky) {
          const int iy = oy * spec.stride + ky;
          for (int kx = 0; kx < spec.kernel; ++kx) {
            const int ix = ox * spec.stride + kx;
            const std::size_t base = in_b + (static_cast<std::size_t>(iy) * w + ix) * c;
            for (int ch = 0; ch < c; ++ch) {
              const double v = input.data[base + ch];
              if (v > acc[ch]) {
                acc[ch] = v;
                if (cache) cache->argmax[o + ch] = static_cast<std::int64_t>(base + ch);
              }
            }
          }
        }
      }
    }
  }
  return out;
}

Tensor pool_backward(const ForwardCache& cache, const Tensor& grad_out) {
  Tensor grad_in(cache.input_shape);
  for (std::size_t o = 0; o < grad_out.data.size(); ++o)
    grad_in.data[static_cast<std::size_t>(cache.argmax[o])] += grad_out.data[o];
  return grad_in;
}

Tensor dropout_forward(const LayerSpec& spec, const Tensor& input, Mode mode,
                       Rng* rng, ForwardCache* cache) {
  if (mode == Mode::kEval) return input;
  if (!rng)
    throw std::invalid_argument(spec.name() + ": train-mode forward needs an rng");
  const double scale = 1.0 / (1.0 - spec.rate);
  Tensor out(input.shape);
  std::vector<double> mask(input.data.size());
  for (std::size_t i = 0; i < input.data.size(); ++i) {
    mask[i] = rng->bernoulli(spec.rate) ? 0.0 : scale;
    out.data[i] = input.data[i] * mask[i];
  }
  if (cache) cache->mask = std::move(mask);
  return out;
}

}  // namespace

LayerSpec LayerSpec::dense(int in_dim, int out_dim, Activation act) {
  if (in_dim < 1 || out_dim < 1)
    throw std::invalid_argument("Dense: dims must be positive");
  LayerSpec s;
  s.kind = Kind::kDense;
  s.in_dim = in_dim;
  s.out_dim = out_dim;
  s.activation = act;
  return s;
}

LayerSpec LayerSpec::conv2d(int in_channels, int out_channels, int kernel,
                            int stride, Padding padding, Activation act) {
  if (in_channels < 1 || out_channels < 1)
    throw std::invalid_argument("Conv2D: channel counts must be positive");
  if (kernel < 1 || stride < 1)
    throw std::invalid_argument("Conv2D: kernel and stride must be >= 1");
  LayerSpec s;
  s.kind = Kind::kConv2d;
  s.in_channels = in_channels;
  s.out_channels = out_channels;
  s.kernel = kernel;
  s.stride = stride;
  s.padding = padding;
  s.activation = act;
  return s;
}

LayerSpec LayerSpec::max_pool2d(int kernel, int stride) {
  if (kernel < 1 || stride < 1)
    throw std::invalid_argument("MaxPool2D: kernel and stride must be >= 1");
  LayerSpec s;
  s.kind = Kind::kMaxPool2d;
  s.kernel = kernel;
  s.stride = stride;
  return s;
}

LayerSpec LayerSpec::flatten() {
  LayerSpec s;
  s.kind = Kind::kFlatten;
  return s;
}

LayerSpec LayerSpec::dropout(double rate) {
  if (!(rate >= 0.0 && rate < 1.0))
    throw std::invalid_argument("Dropout: rate must be in [0,1)");
  LayerSpec s;
  s.kind = Kind::kDropout;
  s.rate = rate;
  return s;
}

LayerSpec LayerSpec::concat() {
  LayerSpec s;
  s.kind = Kind::kConcat;
  return s;
}

std::string LayerSpec::name() const {
  switch (kind) {
    case Kind::kDense:
      return "Dense(" + std::to_string(in_dim) + "," + std::to_string(out_dim) + ")";
    case Kind::kConv2d:
      return "Conv2D(" + std::to_string(in_channels) + "->" +
             std::to_string(out_channels) + ",k" + std::to_string(kernel) + ")";
    case Kind::kMaxPool2d:
      return "MaxPool2D(k" + std::to_string(kernel) + ")";
    case Kind::kFlatten:
      return "Flatten";
    case Kind::kDropout:
      return "Dropout(" + std::to_string(rate) + ")";
    case Kind::kConcat:
      return "Concat";
  }
  return "Layer";
}

ParamSet init_params(const LayerSpec& spec, Rng& rng) {
  ParamSet p;
  if (!spec.has_params()) return p;
  int fan_in = 0, fan_out = 0;
  if (spec.kind == LayerSpec::Kind::kDense) {
    p.weights = Tensor({spec.in_dim, spec.out_dim});
    p.biases = Tensor({spec.out_dim});
    fan_in = spec.in_dim;
    fan_out = spec.out_dim;
  } else {
    p.weights = Tensor({spec.kernel, spec.kernel, spec.in_channels, spec.out_channels});
    p.biases = Tensor({spec.out_channels});
    fan_in = spec.kernel * spec.kernel * spec.in_channels;
    fan_out = spec.kernel * spec.kernel * spec.out_channels;
  }
  if (spec.activation == Activation::kReLU) {
    const double stddev = std::sqrt(2.0 / fan_in);
    for (double& v : p.weights.data) v = stddev * rng.normal();
  } else {
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (double& v : p.weights.data) v = rng.uniform(-limit, limit);
  }
  p.weight_grad = Tensor(p.weights.shape);
  p.bias_grad = Tensor(p.biases.shape);
  return p;
}

Tensor forward(const LayerSpec& spec, const ParamSet& params, const Tensor& input,
               Mode mode, Rng* rng, ForwardCache* cache) {
  if (spec.kind == LayerSpec::Kind::kConcat)
    throw std::invalid_argument("Concat takes multiple inputs; use concat_forward");
  if (spec.has_params() && params.empty())
    throw std::invalid_argument(spec.name() + ": missing parameters");
  if (cache) {
    *cache = ForwardCache{};
    cache->kind = spec.kind;
    cache->mode = mode;
    cache->input_shape = input.shape;
  }
  Tensor out;
  switch (spec.kind) {
    case LayerSpec::Kind::kDense:
      out = dense_forward(spec, params, input, cache);
      break;
    case LayerSpec::Kind::kConv2d:
      out = conv_forward(spec, params, input, cache);
      break;
    case LayerSpec::Kind::kMaxPool2d:
      out = pool_forward(spec, input, cache);
      break;
    case LayerSpec::Kind::kFlatten: {
      if (input.rank() < 2) shape_error(spec, input, "rank >= 2");
      std::int64_t features = 1;
      for (int d = 1; d < input.rank(); ++d) features *= input.dim(d);
      out = Tensor({input.dim(0), static_cast<int>(features)}, input.data);
      break;
    }
    case LayerSpec::Kind::kDropout:
      out = dropout_forward(spec, input, mode, rng, cache);
      break;
    case LayerSpec::Kind::kConcat:
      break;  // unreachable
  }
  if (cache) cache->output_shape = out.shape;
  return out;
}

Tensor backward(const LayerSpec& spec, ParamSet& params, const ForwardCache& cache,
               const Tensor& grad_out) {
  if (cache.kind != spec.kind)
    throw std::invalid_argument(spec.name() + ": cache/layer mismatch");
  if (grad_out.shape != cache.output_shape)
    throw std::invalid_argument(spec.name() + ": grad shape " +
                                grad_out.shape_string() +
                                " does not match forward output");
  switch (spec.kind) {
    case LayerSpec::Kind::kDense:
      return dense_backward(spec, params, cache, grad_out);
    case LayerSpec::Kind::kConv2d:
      return conv_backward(spec, params, cache, grad_out);
    case LayerSpec::Kind::kMaxPool2d:
      return pool_backward(cache, grad_out);
    case LayerSpec::Kind::kFlatten:
      return Tensor(cache.input_shape, grad_out.data);
    case LayerSpec::Kind::kDropout: {
      if (cache.mode == Mode::kEval) return grad_out;
      if (cache.mask.size() != grad_out.data.size())
        throw std::invalid_argument(spec.name() + ": cache/layer mismatch");
      Tensor grad_in = grad_out;
      for (std::size_t i = 0; i < grad_in.data.size(); ++i)
        grad_in.data[i] *= cache.mask[i];
      return grad_in;
    }
    case LayerSpec::Kind::kConcat:
      throw std::invalid_argument("Concat: use concat_backward");
  }
  throw std::logic_error("unreachable layer kind");
}

Tensor concat_forward(std::span<const Tensor> parts, ForwardCache* cache) {
  if (parts.empty()) throw std::invalid_argument("Concat: no inputs");
  const int batch = parts[0].dim(0);
  int total = 0;
  for (const Tensor& part : parts) {
    if (part.rank() != 2 || part.dim(0) != batch)
      throw std::invalid_argument("Concat: parts must be (batch,d) with equal batch");
    total += part.dim(1);
  }
  Tensor out({batch, total});
  std::vector<int> widths;
  widths.reserve(parts.size());
  for (const Tensor& part : parts) widths.push_back(part.dim(1));
  for (int b = 0; b < batch; ++b) {
    double* row = &out.data[static_cast<std::size_t>(b) * total];
    for (const Tensor& part : parts) {
      const int d = part.dim(1);
      const double* src = &part.data[static_cast<std::size_t>(b) * d];
      row = std::copy(src, src + d, row);
    }
  }
  if (cache) {
    *cache = ForwardCache{};
    cache->kind = LayerSpec::Kind::kConcat;
    cache->part_widths = std::move(widths);
    cache->output_shape = out.shape;
  }
  return out;
}

std::vector<Tensor> concat_backward(const ForwardCache& cache, const Tensor& grad_out) {
  if (cache.kind != LayerSpec::Kind::kConcat)
    throw std::invalid_argument("Concat: cache/layer mismatch");
  if (grad_out.shape != cache.output_shape)
    throw std::invalid_argument("Concat: grad shape " + grad_out.shape_string() +
                                " does not match forward output");
  const int batch = grad_out.dim(0);
  const int total = grad_out.dim(1);
  std::vector<Tensor> grads;
  grads.reserve(cache.part_widths.size());
  int offset = 0;
  for (int d : cache.part_widths) {
    Tensor g({batch, d});
    for (int b = 0; b < batch; ++b) {
      const double* src = &grad_out.data[static_cast<std::size_t>(b) * total + offset];
      std::copy(src, src + d, &g.data[static_cast<std::size_t>(b) * d]);
    }
    grads.push_back(std::move(g));
    offset += d;
  }
  return grads;
}

void Sequential::append(const LayerSpec& spec, Rng& rng) {
  if (spec.kind == LayerSpec::Kind::kConcat)
    throw std::invalid_argument("Concat cannot appear in a sequential stack");
  layers.push_back(spec);
  params.push_back(init_params(spec, rng));
}

Tensor Sequential::forward(const Tensor& input, Mode mode, Rng* rng,
                           std::vector<ForwardCache>* caches) const {
  if (caches) {
    caches->clear();
    caches->resize(layers.size());
  }
  Tensor x = input;
  for (std::size_t i = 0; i < layers.size(); ++i)
    x = nn::forward(layers[i], params[i], x, mode, rng,
                    caches ? &(*caches)[i] : nullptr);
  return x;
}

Tensor Sequential::backward(const std::vector<ForwardCache>& caches,
                            const Tensor& grad_out) {
  if (caches.size() != layers.size())
    throw std::invalid_argument("Sequential: cache count mismatch");
  Tensor g = grad_out;
  for (std::size_t i = layers.size(); i-- > 0;)
    g = nn::backward(layers[i], params[i], caches[i], g);
  return g;
}

std::int64_t Sequential::parameter_count() const {
  std::int64_t n = 0;
  for (const ParamSet& p : params) n += p.parameter_count();
  return n;
}

void Sequential::set_trainable(bool trainable) {
  for (ParamSet& p : params)
    if (!p.empty()) p.trainable = trainable;
}

void Sequential::zero_grads() {
  for (ParamSet& p : params) p.zero_grads();
}

std::uint64_t hash_params(const std::vector<ParamSet>& params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const ParamSet& p : params) {
    h = byte_hash(p.weights, h);
    h = byte_hash(p.biases, h);
  }
  return h;
}

}  // namespace dmtlr::nn
