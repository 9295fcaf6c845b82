#include "streamkws/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "streamkws/errors.hpp"

namespace streamkws::kernels {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

[[noreturn]] void fail(const Node& node, const std::string& what) {
  throw ShapeMismatch("node '" + node.id + "': " + what);
}

float sigmoid(float v) { return 1.0f / (1.0f + std::exp(-v)); }

// First input frame seen by output frame `i` (may be negative under causal padding).
std::int64_t window_start(std::int64_t i, std::int64_t kernel, std::int64_t stride,
                          std::int64_t dilation, Padding padding) {
  const std::int64_t left = padding == Padding::Causal ? dilation * (kernel - 1) : 0;
  return i * stride - left;
}

std::int64_t checked_out_len(const Node& node, std::int64_t in_len, std::int64_t kernel,
                             std::int64_t stride, std::int64_t dilation, Padding padding) {
  const auto n = conv_output_length(in_len, kernel, stride, dilation, padding);
  if (n < 1) fail(node, "input of " + std::to_string(in_len) + " frames is too short");
  return n;
}

}  // namespace

Tensor conv2d_forward(const Tensor& x, const Node& node) {
  const auto* p = kind_as<layers::Conv2D>(node.kind);
  if (!p) fail(node, "not a Conv2D node");
  if (x.rank() != 2 && x.rank() != 3) fail(node, "Conv2D expects [T,F] or [T,F,C]");
  const Tensor& kernel = node.weight("kernel");
  const Tensor& bias = node.weight("bias");
  const std::int64_t in_t = x.dim(0), in_f = x.dim(1), in_c = x.rank() == 3 ? x.dim(2) : 1;
  const Shape kshape{p->kernel_t, p->kernel_f, in_c, p->filters};
  if (kernel.shape() != kshape || bias.shape() != Shape{p->filters}) {
    fail(node, "Conv2D weights do not match input " + shape_to_string(x.shape()));
  }
  const auto out_t =
      checked_out_len(node, in_t, p->kernel_t, p->stride_t, p->dilation_t, p->padding);
  const auto out_f = checked_out_len(node, in_f, p->kernel_f, p->stride_f, 1, Padding::Valid);
  const std::int64_t filters = p->filters;

  Tensor out({out_t, out_f, filters});
  const float* xd = x.data().data();
  const float* kd = kernel.data().data();
  float* od = out.data().data();
  for (std::int64_t i = 0; i < out_t; ++i) {
    const auto t0 = window_start(i, p->kernel_t, p->stride_t, p->dilation_t, p->padding);
    for (std::int64_t j = 0; j < out_f; ++j) {
      float* acc = od + (i * out_f + j) * filters;
      std::copy_n(bias.data().data(), filters, acc);
      for (std::int64_t dt = 0; dt < p->kernel_t; ++dt) {
        const auto t = t0 + dt * p->dilation_t;
        if (t < 0) continue;
        for (std::int64_t df = 0; df < p->kernel_f; ++df) {
          const auto f = j * p->stride_f + df;
          for (std::int64_t c = 0; c < in_c; ++c) {
            const float v = xd[(t * in_f + f) * in_c + c];
            const float* k = kd + ((dt * p->kernel_f + df) * in_c + c) * filters;
            for (std::int64_t o = 0; o < filters; ++o) acc[o] += v * k[o];
          }
        }
      }
    }
  }
  return out;
}

Tensor conv1d_forward(const Tensor& x, const Node& node) {
  const auto* p = kind_as<layers::Conv1D>(node.kind);
  if (!p) fail(node, "not a Conv1D node");
  if (x.rank() != 2) fail(node, "Conv1D expects [T,F]");
  const Tensor& kernel = node.weight("kernel");
  const Tensor& bias = node.weight("bias");
  const std::int64_t in_t = x.dim(0), in_f = x.dim(1), filters = p->filters;
  if (kernel.shape() != Shape{p->kernel_t, in_f, filters} || bias.shape() != Shape{filters}) {
    fail(node, "Conv1D weights do not match input " + shape_to_string(x.shape()));
  }
  const auto out_t =
      checked_out_len(node, in_t, p->kernel_t, p->stride_t, p->dilation_t, p->padding);

  Tensor out({out_t, filters});
  const float* xd = x.data().data();
  const float* kd = kernel.data().data();
  for (std::int64_t i = 0; i < out_t; ++i) {
    const auto t0 = window_start(i, p->kernel_t, p->stride_t, p->dilation_t, p->padding);
    float* acc = out.frame(i).data();
    std::copy_n(bias.data().data(), filters, acc);
    for (std::int64_t dt = 0; dt < p->kernel_t; ++dt) {
      const auto t = t0 + dt * p->dilation_t;
      if (t < 0) continue;
      for (std::int64_t c = 0; c < in_f; ++c) {
        const float v = xd[t * in_f + c];
        const float* k = kd + (dt * in_f + c) * filters;
        for (std::int64_t o = 0; o < filters; ++o) acc[o] += v * k[o];
      }
    }
  }
  return out;
}

Tensor depthwise_conv1d_forward(const Tensor& x, const Node& node) {
  const auto* p = kind_as<layers::DepthwiseConv1D>(node.kind);
  if (!p) fail(node, "not a DepthwiseConv1D node");
  if (x.rank() < 2) fail(node, "DepthwiseConv1D expects [T,...]");
  const Tensor& kernel = node.weight("kernel");
  const Tensor& bias = node.weight("bias");
  const std::int64_t channels = x.frame_size(), mult = p->multiplier;
  if (kernel.shape() != Shape{p->kernel_t, channels, mult} ||
      bias.shape() != Shape{channels * mult}) {
    fail(node, "DepthwiseConv1D weights do not match input " + shape_to_string(x.shape()));
  }
  const auto out_t = checked_out_len(node, x.frames(), p->kernel_t, 1, 1, p->padding);
  Shape shape = x.shape();
  shape[0] = out_t;
  shape.back() *= mult;
  Tensor out(std::move(shape));
  const float* kd = kernel.data().data();
  for (std::int64_t i = 0; i < out_t; ++i) {
    const auto t0 = window_start(i, p->kernel_t, 1, 1, p->padding);
    float* acc = out.frame(i).data();
    std::copy_n(bias.data().data(), channels * mult, acc);
    for (std::int64_t dt = 0; dt < p->kernel_t; ++dt) {
      const auto t = t0 + dt;
      if (t < 0) continue;
      const float* row = x.frame(t).data();
      const float* k = kd + dt * channels * mult;
      for (std::int64_t c = 0; c < channels; ++c) {
        for (std::int64_t m = 0; m < mult; ++m) acc[c * mult + m] += row[c] * k[c * mult + m];
      }
    }
  }
  return out;
}

Tensor dense_forward(const Tensor& x, const Node& node) {
  const auto* p = kind_as<layers::Dense>(node.kind);
  if (!p) fail(node, "not a Dense node");
  if (x.rank() < 2) fail(node, "Dense expects [T,...,F]");
  const Tensor& kernel = node.weight("kernel");
  const std::int64_t in = x.shape().back(), units = p->units;
  if (kernel.shape() != Shape{in, units}) {
    fail(node, "Dense kernel " + shape_to_string(kernel.shape()) + " does not match input " +
                   shape_to_string(x.shape()));
  }
  const Tensor* bias = nullptr;
  if (p->use_bias) {
    bias = &node.weight("bias");
    if (bias->shape() != Shape{units}) fail(node, "Dense bias has wrong shape");
  }
  Shape shape = x.shape();
  shape.back() = units;
  Tensor out(std::move(shape));
  const auto rows = static_cast<std::int64_t>(x.size()) / in;
  const float* xd = x.data().data();
  const float* kd = kernel.data().data();
  float* od = out.data().data();
  for (std::int64_t r = 0; r < rows; ++r) {
    float* acc = od + r * units;
    if (bias) std::copy_n(bias->data().data(), units, acc);
    const float* xr = xd + r * in;
    for (std::int64_t i = 0; i < in; ++i) {
      const float v = xr[i];
      const float* k = kd + i * units;
      for (std::int64_t o = 0; o < units; ++o) acc[o] += v * k[o];
    }
  }
  return out;
}

Tensor avgpool_forward(const Tensor& x, const layers::AvgPool2D& p) {
  if (x.rank() != 3) throw ShapeMismatch("AvgPool2D expects [T,F,C]");
  const std::int64_t in_f = x.dim(1), ch = x.dim(2);
  const auto out_t = conv_output_length(x.dim(0), p.pool_t, p.stride_t, 1, Padding::Valid);
  const auto out_f = conv_output_length(in_f, p.pool_f, p.stride_f, 1, Padding::Valid);
  if (out_t < 1 || out_f < 1) throw ShapeMismatch("AvgPool2D window larger than input");
  Tensor out({out_t, out_f, ch});
  const float scale = 1.0f / static_cast<float>(p.pool_t * p.pool_f);
  const float* xd = x.data().data();
  for (std::int64_t i = 0; i < out_t; ++i) {
    for (std::int64_t j = 0; j < out_f; ++j) {
      float* acc = out.data().data() + (i * out_f + j) * ch;
      for (std::int64_t dt = 0; dt < p.pool_t; ++dt) {
        for (std::int64_t df = 0; df < p.pool_f; ++df) {
          const float* src = xd + ((i * p.stride_t + dt) * in_f + j * p.stride_f + df) * ch;
          for (std::int64_t c = 0; c < ch; ++c) acc[c] += src[c];
        }
      }
      for (std::int64_t c = 0; c < ch; ++c) acc[c] *= scale;
    }
  }
  return out;
}

Tensor batchnorm_forward(const Tensor& x, const Node& node) {
  const Tensor& scale = node.weight("scale");
  const Tensor& offset = node.weight("offset");
  const std::int64_t ch = x.shape().back();
  if (scale.shape() != Shape{ch} || offset.shape() != Shape{ch}) {
    fail(node, "BatchNorm parameters do not match input " + shape_to_string(x.shape()));
  }
  Tensor out = x;
  auto d = out.data();
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto c = static_cast<std::size_t>(i % static_cast<std::size_t>(ch));
    d[i] = d[i] * scale[c] + offset[c];
  }
  return out;
}

Tensor activation_forward(const Tensor& x, ActivationFn fn) {
  Tensor out = x;
  auto d = out.data();
  switch (fn) {
    case ActivationFn::Relu:
      for (auto& v : d) v = std::max(v, 0.0f);
      break;
    case ActivationFn::Sigmoid:
      for (auto& v : d) v = sigmoid(v);
      break;
    case ActivationFn::Tanh:
      for (auto& v : d) v = std::tanh(v);
      break;
    case ActivationFn::Softmax: {
      const auto n = static_cast<std::size_t>(x.shape().back());
      for (std::size_t r = 0; r < d.size(); r += n) {
        auto row = d.subspan(r, n);
        const float mx = *std::max_element(row.begin(), row.end());
        float sum = 0.0f;
        for (auto& v : row) {
          v = std::exp(v - mx);
          sum += v;
        }
        for (auto& v : row) v /= sum;
      }
      break;
    }
  }
  return out;
}

Tensor add_forward(std::span<const Tensor* const> inputs) {
  if (inputs.size() < 2) throw ShapeMismatch("Add expects at least two inputs");
  Tensor out = *inputs[0];
  for (std::size_t k = 1; k < inputs.size(); ++k) {
    if (inputs[k]->shape() != out.shape()) throw ShapeMismatch("Add input shapes differ");
    auto src = inputs[k]->data();
    auto dst = out.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }
  return out;
}

Tensor concat_forward(std::span<const Tensor* const> inputs, std::int64_t axis) {
  if (inputs.empty()) throw ShapeMismatch("Concat expects inputs");
  const Shape& first = inputs[0]->shape();
  const auto rank = static_cast<std::int64_t>(first.size());
  if (axis < 0 || axis >= rank) throw ShapeMismatch("Concat axis out of range");
  Shape shape = first;
  shape[axis] = 0;
  for (const Tensor* t : inputs) {
    if (static_cast<std::int64_t>(t->rank()) != rank) throw ShapeMismatch("Concat rank differs");
    for (std::int64_t a = 0; a < rank; ++a) {
      if (a != axis && t->dim(a) != first[a]) throw ShapeMismatch("Concat shapes differ");
    }
    shape[axis] += t->dim(axis);
  }
  // outer = product of axes before `axis`; each input contributes a contiguous
  // block of dim(axis) * inner elements per outer index.
  const auto outer = shape_size(Shape(first.begin(), first.begin() + axis));
  const auto inner = shape_size(Shape(first.begin() + axis + 1, first.end()));
  Tensor out(shape);
  float* dst = out.data().data();
  for (std::int64_t o = 0; o < outer; ++o) {
    for (const Tensor* t : inputs) {
      const auto block = t->dim(axis) * inner;
      dst = std::copy_n(t->data().data() + o * block, block, dst);
    }
  }
  return out;
}

Tensor flatten_forward(const Tensor& x) {
  return x.reshaped({1, static_cast<std::int64_t>(x.size())});
}

Tensor global_avg_pool_time_forward(const Tensor& x) {
  Shape shape = x.shape();
  shape[0] = 1;
  if (shape.size() == 1) shape.push_back(1);
  Tensor out(std::move(shape));
  auto acc = out.data();
  for (std::int64_t t = 0; t < x.frames(); ++t) {
    auto row = x.frame(t);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += row[i];
  }
  const float inv = 1.0f / static_cast<float>(x.frames());
  for (auto& v : acc) v *= inv;
  return out;
}

Tensor center_select_forward(const Tensor& x) { return slice_time(x, x.frames() / 2, 1); }

GruWeights GruWeights::from_node(const Node& node, std::string_view prefix) {
  auto get = [&](const char* name) {
    const std::string key = std::string(prefix) + name;
    auto it = node.weights.find(key);
    if (it == node.weights.end() || !it->second) fail(node, "missing GRU weight '" + key + "'");
    return it->second;
  };
  return GruWeights{get("w_z"), get("w_r"), get("w_h"), get("u_z"), get("u_r"),
                    get("u_h"), get("b_z"), get("b_r"), get("b_h")};
}

void GruWeights::validate(std::int64_t features) const {
  for (const auto* p : {&w_z, &w_r, &w_h, &u_z, &u_r, &u_h, &b_z, &b_r, &b_h}) {
    if (!*p) throw ShapeMismatch("GRU weight missing");
  }
  const auto u = b_z->dim(0);
  const Shape in{features, u}, rec{u, u}, b{u};
  if (w_z->shape() != in || w_r->shape() != in || w_h->shape() != in ||
      u_z->shape() != rec || u_r->shape() != rec || u_h->shape() != rec ||
      b_z->shape() != b || b_r->shape() != b || b_h->shape() != b) {
    throw ShapeMismatch("GRU weights inconsistent with " + std::to_string(features) +
                        " input features");
  }
}

namespace {

// acc[o] += sum_i v[i] * m[i, o], accumulated in increasing i.
void accumulate_matvec(std::span<const float> v, const Tensor& m, float* acc) {
  const auto cols = m.dim(1);
  const float* md = m.data().data();
  for (std::size_t i = 0; i < v.size(); ++i) {
    const float s = v[i];
    const float* row = md + static_cast<std::int64_t>(i) * cols;
    for (std::int64_t o = 0; o < cols; ++o) acc[o] += s * row[o];
  }
}

// Gate input projections b + x W for the three gates, in that summation order.
struct GateInputs {
  std::vector<float> z, r, h;
};

GateInputs project_input(std::span<const float> x, const GruWeights& w) {
  GateInputs g{std::vector<float>(w.b_z->data().begin(), w.b_z->data().end()),
               std::vector<float>(w.b_r->data().begin(), w.b_r->data().end()),
               std::vector<float>(w.b_h->data().begin(), w.b_h->data().end())};
  accumulate_matvec(x, *w.w_z, g.z.data());
  accumulate_matvec(x, *w.w_r, g.r.data());
  accumulate_matvec(x, *w.w_h, g.h.data());
  return g;
}

// Finishes a step given the precomputed input projections; writes h' to `out`.
void recur(GateInputs g, std::span<const float> h, const GruWeights& w, float* out) {
  const auto u = g.z.size();
  accumulate_matvec(h, *w.u_z, g.z.data());
  accumulate_matvec(h, *w.u_r, g.r.data());
  std::vector<float> z(u), rh(u);
  for (std::size_t i = 0; i < u; ++i) {
    z[i] = sigmoid(g.z[i]);
    rh[i] = sigmoid(g.r[i]) * h[i];
  }
  accumulate_matvec(rh, *w.u_h, g.h.data());
  for (std::size_t i = 0; i < u; ++i) {
    const float c = std::tanh(g.h[i]);
    out[i] = (1.0f - z[i]) * c + z[i] * h[i];
  }
}

}  // namespace

Tensor gru_cell(std::span<const float> x, std::span<const float> h, const GruWeights& w) {
  w.validate(static_cast<std::int64_t>(x.size()));
  if (static_cast<std::int64_t>(h.size()) != w.units()) {
    throw ShapeMismatch("GRU state has " + std::to_string(h.size()) + " values, expected " +
                        std::to_string(w.units()));
  }
  Tensor out({w.units()});
  recur(project_input(x, w), h, w, out.data().data());
  return out;
}

GruOutput gru_forward(const Tensor& x, const GruWeights& w, const Tensor& h0) {
  const auto features = x.frame_size();
  w.validate(features);
  const auto u = w.units();
  if (h0.shape() != Shape{u}) throw ShapeMismatch("GRU initial state must be [units]");
  const auto steps = x.frames();

  std::vector<GateInputs> projected;
  projected.reserve(static_cast<std::size_t>(steps));
  for (std::int64_t t = 0; t < steps; ++t) projected.push_back(project_input(x.frame(t), w));

  Tensor seq({steps, u});
  std::span<const float> h = h0.data();
  for (std::int64_t t = 0; t < steps; ++t) {
    float* dst = seq.frame(t).data();
    recur(std::move(projected[static_cast<std::size_t>(t)]), h, w, dst);
    h = seq.frame(t);
  }
  Tensor final_state({u}, std::vector<float>(h.begin(), h.end()));
  return {std::move(seq), std::move(final_state)};
}

Tensor bidirectional_gru_forward(const Tensor& x, const GruWeights& forward,
                                 const GruWeights& backward) {
  const auto steps = x.frames();
  const auto u = forward.units();
  if (backward.units() != u) throw ShapeMismatch("bidirectional GRU halves differ in width");
  std::vector<Tensor> reversed_frames;
  reversed_frames.reserve(static_cast<std::size_t>(steps));
  for (std::int64_t t = steps - 1; t >= 0; --t) reversed_frames.push_back(slice_time(x, t, 1));
  const Tensor reversed = concat_time(reversed_frames);

  const auto fw = gru_forward(x, forward, Tensor({u})).sequence;
  const auto bw = gru_forward(reversed, backward, Tensor({u})).sequence;
  Tensor out({steps, 2 * u});
  for (std::int64_t t = 0; t < steps; ++t) {
    auto dst = out.frame(t);
    std::copy_n(fw.frame(t).data(), u, dst.data());
    std::copy_n(bw.frame(steps - 1 - t).data(), u, dst.data() + u);
  }
  return out;
}

AttentionWeights AttentionWeights::from_node(const Node& node) {
  auto get = [&](const char* name) {
    auto it = node.weights.find(name);
    if (it == node.weights.end() || !it->second) {
      fail(node, std::string("missing attention weight '") + name + "'");
    }
    return it->second;
  };
  return AttentionWeights{get("query"), get("key"), get("value"), get("output")};
}

namespace {

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeMismatch("matmul " + shape_to_string(a.shape()) + " x " +
                        shape_to_string(b.shape()));
  }
  Tensor out({a.dim(0), b.dim(1)});
  for (std::int64_t r = 0; r < a.dim(0); ++r) accumulate_matvec(a.frame(r), b, out.frame(r).data());
  return out;
}

struct Projected {
  Tensor q, k, v;
  std::int64_t key_dim;
};

Projected project_attention(const Tensor& query, const Tensor& kv, std::int64_t heads,
                            const AttentionWeights& w) {
  if (heads < 1) throw ShapeMismatch("attention needs at least one head");
  const Tensor q_in = query.rank() == 1 ? query.reshaped({1, query.dim(0)}) : query;
  if (q_in.rank() != 2 || kv.rank() != 2) throw ShapeMismatch("attention expects [T,D] inputs");
  const auto d = w.output->dim(0);
  if (d % heads != 0) {
    throw ShapeMismatch("attention width " + std::to_string(d) + " not divisible by " +
                        std::to_string(heads) + " heads");
  }
  if (w.output->shape() != Shape{d, d} || w.query->dim(1) != d || w.key->dim(1) != d ||
      w.value->dim(1) != d || w.key->dim(0) != kv.dim(1) || w.value->dim(0) != kv.dim(1)) {
    throw ShapeMismatch("attention weights inconsistent");
  }
  return {matmul(q_in, *w.query), matmul(kv, *w.key), matmul(kv, *w.value), d / heads};
}

Tensor probabilities(const Projected& p, std::int64_t heads) {
  const auto tq = p.q.dim(0), steps = p.k.dim(0), kd = p.key_dim;
  const float scale = 1.0f / std::sqrt(static_cast<float>(kd));
  Tensor scores({tq, heads, steps});
  for (std::int64_t i = 0; i < tq; ++i) {
    const float* q = p.q.frame(i).data();
    for (std::int64_t h = 0; h < heads; ++h) {
      for (std::int64_t t = 0; t < steps; ++t) {
        const float* k = p.k.frame(t).data();
        float dot = 0.0f;
        for (std::int64_t c = h * kd; c < (h + 1) * kd; ++c) dot += q[c] * k[c];
        scores[static_cast<std::size_t>((i * heads + h) * steps + t)] = dot * scale;
      }
    }
  }
  return activation_forward(scores, ActivationFn::Softmax);
}

}  // namespace

Tensor attention_probabilities(const Tensor& query, const Tensor& keys_values,
                               std::int64_t heads, const AttentionWeights& w) {
  return probabilities(project_attention(query, keys_values, heads, w), heads);
}

Tensor multihead_attention_forward(const Tensor& query, const Tensor& keys_values,
                                   std::int64_t heads, const AttentionWeights& w) {
  const auto p = project_attention(query, keys_values, heads, w);
  const Tensor probs = probabilities(p, heads);
  const auto tq = p.q.dim(0), steps = p.k.dim(0), kd = p.key_dim, d = heads * kd;
  Tensor context({tq, d});
  for (std::int64_t i = 0; i < tq; ++i) {
    float* ctx = context.frame(i).data();
    for (std::int64_t h = 0; h < heads; ++h) {
      for (std::int64_t t = 0; t < steps; ++t) {
        const float a = probs[static_cast<std::size_t>((i * heads + h) * steps + t)];
        const float* v = p.v.frame(t).data();
        for (std::int64_t c = h * kd; c < (h + 1) * kd; ++c) ctx[c] += a * v[c];
      }
    }
  }
  return matmul(context, *w.output);
}

Tensor forward_node(const Node& node, std::span<const Tensor* const> in) {
  auto one = [&]() -> const Tensor& {
    if (in.size() != 1) fail(node, "expects exactly one input");
    return *in[0];
  };
  return std::visit(
      overloaded{
          [&](const layers::Input&) -> Tensor { fail(node, "Input nodes are fed, not run"); },
          [&](const layers::Conv2D&) { return conv2d_forward(one(), node); },
          [&](const layers::Conv1D&) { return conv1d_forward(one(), node); },
          [&](const layers::DepthwiseConv1D&) { return depthwise_conv1d_forward(one(), node); },
          [&](const layers::Dense&) { return dense_forward(one(), node); },
          [&](const layers::Flatten&) { return flatten_forward(one()); },
          [&](const layers::GlobalAvgPoolTime&) { return global_avg_pool_time_forward(one()); },
          [&](const layers::AvgPool2D& p) { return avgpool_forward(one(), p); },
          [&](const layers::Activation& p) { return activation_forward(one(), p.fn); },
          [&](const layers::BatchNormInference&) { return batchnorm_forward(one(), node); },
          [&](const layers::GRU& p) {
            const Tensor& x = one();
            const auto w = GruWeights::from_node(node);
            auto out = gru_forward(x, w, Tensor({w.units()}));
            if (p.return_sequences) return std::move(out.sequence);
            return out.final_state.reshaped({1, w.units()});
          },
          [&](const layers::BidirectionalGRU&) {
            return bidirectional_gru_forward(one(), GruWeights::from_node(node, "forward/"),
                                             GruWeights::from_node(node, "backward/"));
          },
          [&](const layers::Add&) { return add_forward(in); },
          [&](const layers::Concat& p) { return concat_forward(in, p.axis); },
          [&](const layers::MultiHeadAttention& p) {
            if (in.size() != 2) fail(node, "attention expects (query, keys_values)");
            return multihead_attention_forward(*in[0], *in[1], p.heads,
                                               AttentionWeights::from_node(node));
          },
          [&](const layers::CenterSelect&) { return center_select_forward(one()); },
          [&](const layers::RingBuffer&) -> Tensor {
            fail(node, "RingBuffer nodes need streaming state");
          },
          [&](const layers::Stream&) -> Tensor { fail(node, "unresolved Stream"); },
      },
      unwrap(node.kind).value);
}

}  // namespace streamkws::kernels
