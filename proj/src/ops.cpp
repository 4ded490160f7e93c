/*
 * Copyright 2026 The RLSD Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "rlsd/ops.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "kernels.hpp"

namespace rlsd::ops {
namespace {

[[noreturn]] void shape_error(const std::string& op, const Tensor& a,
                              const Tensor& b) {
  throw std::invalid_argument(op + ": incompatible shapes " +
                              shape_str(a.shape()) + " and " +
                              shape_str(b.shape()));
}

void require_same_size(const std::string& op, const Tensor& a,
                       const Tensor& b) {
  if (a.size() != b.size()) shape_error(op, a, b);
}

void im2col3x3(const double* in, std::size_t c, std::size_t h, std::size_t w,
               double* cols) {
  const std::size_t n = h * w;
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double* plane = in + ch * n;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        double* row = cols + ((ch * 9) + ky * 3 + kx) * n;
        for (std::size_t y = 0; y < h; ++y) {
          const long sy = static_cast<long>(y) + ky - 1;
          double* dst = row + y * w;
          if (sy < 0 || sy >= static_cast<long>(h)) {
            std::fill(dst, dst + w, 0.0);
            continue;
          }
          const double* src = plane + sy * w;
          for (std::size_t x = 0; x < w; ++x) {
            const long sx = static_cast<long>(x) + kx - 1;
            dst[x] = (sx < 0 || sx >= static_cast<long>(w)) ? 0.0 : src[sx];
          }
        }
      }
    }
  }
}

void col2im3x3(const double* cols, std::size_t c, std::size_t h,
               std::size_t w, double* out) {
  const std::size_t n = h * w;
  for (std::size_t ch = 0; ch < c; ++ch) {
    double* plane = out + ch * n;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const double* row = cols + ((ch * 9) + ky * 3 + kx) * n;
        for (std::size_t y = 0; y < h; ++y) {
          const long sy = static_cast<long>(y) + ky - 1;
          if (sy < 0 || sy >= static_cast<long>(h)) continue;
          const double* src = row + y * w;
          double* dst = plane + sy * w;
          for (std::size_t x = 0; x < w; ++x) {
            const long sx = static_cast<long>(x) + kx - 1;
            if (sx >= 0 && sx < static_cast<long>(w)) dst[sx] += src[x];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d(Tape& tape, const Tensor& input, const Tensor& kernels,
              const Tensor& bias) {
  if (input.rank() != 3 || kernels.rank() != 4 || kernels.dim(2) != 3 ||
      kernels.dim(3) != 3 || kernels.dim(1) != input.dim(0)) {
    shape_error("conv2d", input, kernels);
  }
  const std::size_t c_out = kernels.dim(0);
  if (bias.rank() != 1 || bias.dim(0) != c_out) {
    shape_error("conv2d bias", kernels, bias);
  }
  const std::size_t c_in = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t n = h * w, k = c_in * 9;

  std::vector<double> cols(k * n);
  im2col3x3(input.data().data(), c_in, h, w, cols.data());

  const bool need = tape.wants({&input, &kernels, &bias});
  Tensor out = Tensor::make_output({c_out, h, w}, need);
  double* o = out.data().data();
  for (std::size_t oc = 0; oc < c_out; ++oc) {
    std::fill(o + oc * n, o + (oc + 1) * n, bias.data()[oc]);
  }
  kernels::gemm_nn(c_out, n, k, kernels.data().data(), cols.data(), o);

  if (need) {
    tape.record(out, [input, kernels, bias, out, cols = std::move(cols), c_in,
                      c_out, h, w, n, k]() {
      const double* g = out.grad().data();
      if (kernels.requires_grad()) {
        kernels::gemm_nt(c_out, n, k, g, cols.data(), kernels.grad().data());
      }
      if (bias.requires_grad()) {
        for (std::size_t oc = 0; oc < c_out; ++oc) {
          double s = 0.0;
          for (std::size_t i = 0; i < n; ++i) s += g[oc * n + i];
          bias.grad()[oc] += s;
        }
      }
      if (input.requires_grad()) {
        std::vector<double> gcols(cols.size(), 0.0);
        kernels::gemm_tn(c_out, n, k, kernels.data().data(), g, gcols.data());
        col2im3x3(gcols.data(), c_in, h, w, input.grad().data());
      }
    });
  }
  return out;
}

Tensor max_pool2d(Tape& tape, const Tensor& input) {
  if (input.rank() != 3 || input.dim(1) < 2 || input.dim(2) < 2) {
    throw std::invalid_argument("max_pool2d: need [C,H,W] with H,W >= 2, got " +
                                shape_str(input.shape()));
  }
  const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t oh = h / 2, ow = w / 2;
  const bool need = tape.wants({&input});
  Tensor out = Tensor::make_output({c, oh, ow}, need);
  std::vector<std::size_t> argmax(c * oh * ow);
  const double* in = input.data().data();
  double* o = out.data().data();
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        const std::size_t base = ch * h * w + (2 * y) * w + 2 * x;
        const std::size_t cand[4] = {base, base + 1, base + w, base + w + 1};
        std::size_t best = cand[0];
        for (std::size_t q = 1; q < 4; ++q) {
          if (in[cand[q]] > in[best]) best = cand[q];
        }
        const std::size_t oi = (ch * oh + y) * ow + x;
        o[oi] = in[best];
        argmax[oi] = best;
      }
    }
  }
  if (need) {
    tape.record(out, [input, out, argmax = std::move(argmax)]() mutable {
      const auto g = out.grad();
      auto gi = input.grad();
      for (std::size_t i = 0; i < argmax.size(); ++i) gi[argmax[i]] += g[i];
    });
  }
  return out;
}

Tensor linear(Tape& tape, const Tensor& input, const Tensor& weight,
              const Tensor& bias) {
  if (weight.rank() != 2 || input.rank() < 1 || input.rank() > 2 ||
      input.shape().back() != weight.dim(1)) {
    shape_error("linear", input, weight);
  }
  const std::size_t n_out = weight.dim(0), n_in = weight.dim(1);
  if (bias.defined() && bias.size() != n_out) {
    shape_error("linear bias", weight, bias);
  }
  const std::size_t batch = input.rank() == 2 ? input.dim(0) : 1;
  const bool need = bias.defined() ? tape.wants({&input, &weight, &bias})
                                   : tape.wants({&input, &weight});
  Shape out_shape = input.rank() == 2 ? Shape{batch, n_out} : Shape{n_out};
  Tensor out = Tensor::make_output(std::move(out_shape), need);
  const double* x = input.data().data();
  const double* wd = weight.data().data();
  double* o = out.data().data();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t r = 0; r < n_out; ++r) {
      o[b * n_out + r] = bias.defined() ? bias.data()[r] : 0.0;
    }
  }
  if (batch == 1) {
    for (std::size_t r = 0; r < n_out; ++r) o[r] += kernels::dot(wd + r * n_in, x, n_in);
  } else {
    kernels::gemm_nt(batch, n_in, n_out, x, wd, o);
  }
  if (need) {
    tape.record(out, [input, weight, bias, out, batch, n_in, n_out]() mutable {
      const double* g = out.grad().data();
      const double* x = input.data().data();
      if (weight.requires_grad()) {
        kernels::gemm_tn(batch, n_in, n_out, g, x, weight.grad().data());
      }
      if (bias.defined() && bias.requires_grad()) {
        auto gb = bias.grad();
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t r = 0; r < n_out; ++r) gb[r] += g[b * n_out + r];
        }
      }
      if (input.requires_grad()) {
        const double* wd = weight.data().data();
        kernels::gemm_nn(batch, n_in, n_out, g, wd, input.grad().data());
      }
    });
  }
  return out;
}

Tensor activation(Tape& tape, const Tensor& input, Activation kind) {
  const bool need = tape.wants({&input});
  Tensor out = Tensor::make_output(input.shape(), need);
  const auto x = input.data();
  auto y = out.data();
  for (std::size_t i = 0; i < x.size(); ++i) {
    switch (kind) {
      case Activation::kRelu:
        y[i] = x[i] > 0.0 ? x[i] : 0.0;
        break;
      case Activation::kSigmoid:
        y[i] = x[i] >= 0.0 ? 1.0 / (1.0 + std::exp(-x[i]))
                           : std::exp(x[i]) / (1.0 + std::exp(x[i]));
        break;
      case Activation::kTanh:
        y[i] = std::tanh(x[i]);
        break;
    }
  }
  if (need) {
    tape.record(out, [input, out, kind]() mutable {
      const auto g = out.grad();
      const auto x = input.data();
      const auto y = out.data();
      auto gi = input.grad();
      for (std::size_t i = 0; i < g.size(); ++i) {
        switch (kind) {
          case Activation::kRelu:
            if (x[i] > 0.0) gi[i] += g[i];
            break;
          case Activation::kSigmoid:
            gi[i] += g[i] * y[i] * (1.0 - y[i]);
            break;
          case Activation::kTanh:
            gi[i] += g[i] * (1.0 - y[i] * y[i]);
            break;
        }
      }
    });
  }
  return out;
}

Tensor softmax(Tape& tape, const Tensor& input) {
  if (input.size() == 0) throw std::invalid_argument("softmax: empty input");
  const std::size_t width = input.rank() == 2 ? input.dim(1) : input.size();
  const std::size_t rows = input.size() / width;
  const bool need = tape.wants({&input});
  Tensor out = Tensor::make_output(input.shape(), need);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = input.data().data() + r * width;
    double* y = out.data().data() + r * width;
    double mx = x[0];
    for (std::size_t i = 1; i < width; ++i) mx = std::max(mx, x[i]);
    double z = 0.0;
    for (std::size_t i = 0; i < width; ++i) {
      y[i] = std::exp(x[i] - mx);
      z += y[i];
    }
    for (std::size_t i = 0; i < width; ++i) y[i] /= z;
  }
  if (need) {
    tape.record(out, [input, out, rows, width]() mutable {
      for (std::size_t r = 0; r < rows; ++r) {
        const double* g = out.grad().data() + r * width;
        const double* y = out.data().data() + r * width;
        double* gi = input.grad().data() + r * width;
        double gy = 0.0;
        for (std::size_t i = 0; i < width; ++i) gy += g[i] * y[i];
        for (std::size_t i = 0; i < width; ++i) gi[i] += y[i] * (g[i] - gy);
      }
    });
  }
  return out;
}

Tensor dropout(Tape& tape, const Tensor& input, double rate, Mode mode,
               Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw std::invalid_argument("dropout rate must be in [0,1), got " +
                                std::to_string(rate));
  }
  if (mode == Mode::kEval || rate == 0.0) return input;
  const bool need = tape.wants({&input});
  Tensor out = Tensor::make_output(input.shape(), need);
  std::vector<double> mask(input.size());
  const double keep_scale = 1.0 / (1.0 - rate);
  const auto x = input.data();
  auto y = out.data();
  for (std::size_t i = 0; i < mask.size(); ++i) {
    mask[i] = rng.uniform() < rate ? 0.0 : keep_scale;
    y[i] = x[i] * mask[i];
  }
  if (need) {
    tape.record(out, [input, out, mask = std::move(mask)]() mutable {
      const auto g = out.grad();
      auto gi = input.grad();
      for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i] * mask[i];
    });
  }
  return out;
}

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  require_same_size("add", a, b);
  const bool need = tape.wants({&a, &b});
  Tensor out = Tensor::make_output(a.shape(), need);
  auto y = out.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.data()[i] + b.data()[i];
  if (need) {
    tape.record(out, [a, b, out]() mutable {
      const auto g = out.grad();
      if (a.requires_grad()) {
        for (std::size_t i = 0; i < g.size(); ++i) a.grad()[i] += g[i];
      }
      if (b.requires_grad()) {
        for (std::size_t i = 0; i < g.size(); ++i) b.grad()[i] += g[i];
      }
    });
  }
  return out;
}

Tensor sub(Tape& tape, const Tensor& a, const Tensor& b) {
  require_same_size("sub", a, b);
  const bool need = tape.wants({&a, &b});
  Tensor out = Tensor::make_output(a.shape(), need);
  auto y = out.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.data()[i] - b.data()[i];
  if (need) {
    tape.record(out, [a, b, out]() mutable {
      const auto g = out.grad();
      if (a.requires_grad()) {
        for (std::size_t i = 0; i < g.size(); ++i) a.grad()[i] += g[i];
      }
      if (b.requires_grad()) {
        for (std::size_t i = 0; i < g.size(); ++i) b.grad()[i] -= g[i];
      }
    });
  }
  return out;
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  require_same_size("mul", a, b);
  const bool need = tape.wants({&a, &b});
  Tensor out = Tensor::make_output(a.shape(), need);
  auto y = out.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.data()[i] * b.data()[i];
  if (need) {
    tape.record(out, [a, b, out]() mutable {
      const auto g = out.grad();
      if (a.requires_grad()) {
        for (std::size_t i = 0; i < g.size(); ++i) {
          a.grad()[i] += g[i] * b.data()[i];
        }
      }
      if (b.requires_grad()) {
        for (std::size_t i = 0; i < g.size(); ++i) {
          b.grad()[i] += g[i] * a.data()[i];
        }
      }
    });
  }
  return out;
}

Tensor scale(Tape& tape, const Tensor& a, double factor) {
  const bool need = tape.wants({&a});
  Tensor out = Tensor::make_output(a.shape(), need);
  auto y = out.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.data()[i] * factor;
  if (need) {
    tape.record(out, [a, out, factor]() mutable {
      const auto g = out.grad();
      for (std::size_t i = 0; i < g.size(); ++i) a.grad()[i] += g[i] * factor;
    });
  }
  return out;
}

Tensor square(Tape& tape, const Tensor& a) { return mul(tape, a, a); }

Tensor sum(Tape& tape, const Tensor& a) {
  const bool need = tape.wants({&a});
  Tensor out = Tensor::make_output({1}, need);
  double s = 0.0;
  for (double v : a.data()) s += v;
  out.data()[0] = s;
  if (need) {
    tape.record(out, [a, out]() mutable {
      const double g = out.grad()[0];
      for (double& gi : a.grad()) gi += g;
    });
  }
  return out;
}

Tensor mean(Tape& tape, const Tensor& a) {
  return scale(tape, sum(tape, a), 1.0 / static_cast<double>(a.size()));
}

Tensor reshape(Tape& tape, const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.size()) {
    throw std::invalid_argument("reshape: cannot view " + shape_str(a.shape()) +
                                " as " + shape_str(shape));
  }
  const bool need = tape.wants({&a});
  Tensor out = Tensor::make_output(std::move(shape), need);
  std::copy(a.data().begin(), a.data().end(), out.data().begin());
  if (need) {
    tape.record(out, [a, out]() mutable {
      const auto g = out.grad();
      for (std::size_t i = 0; i < g.size(); ++i) a.grad()[i] += g[i];
    });
  }
  return out;
}

Tensor gather(Tape& tape, const Tensor& a,
              std::span<const std::size_t> indices) {
  if (indices.empty()) throw std::invalid_argument("gather: no indices");
  for (std::size_t i : indices) {
    if (i >= a.size()) {
      throw std::out_of_range("gather: index " + std::to_string(i) +
                              " outside " + shape_str(a.shape()));
    }
  }
  const bool need = tape.wants({&a});
  Tensor out = Tensor::make_output({indices.size()}, need);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    out.data()[i] = a.data()[indices[i]];
  }
  if (need) {
    tape.record(out, [a, out, idx = std::vector<std::size_t>(
                                   indices.begin(), indices.end())]() mutable {
      const auto g = out.grad();
      for (std::size_t i = 0; i < idx.size(); ++i) a.grad()[idx[i]] += g[i];
    });
  }
  return out;
}

Tensor concat(Tape& tape, std::span<const Tensor> parts) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  std::size_t total = 0;
  bool need = false;
  for (const Tensor& p : parts) {
    total += p.size();
    need = need || tape.wants({&p});
  }
  Tensor out = Tensor::make_output({total}, need);
  std::size_t off = 0;
  for (const Tensor& p : parts) {
    std::copy(p.data().begin(), p.data().end(), out.data().begin() + off);
    off += p.size();
  }
  if (need) {
    tape.record(out, [ins = std::vector<Tensor>(parts.begin(), parts.end()),
                      out]() mutable {
      const auto g = out.grad();
      std::size_t off = 0;
      for (Tensor& p : ins) {
        if (p.requires_grad()) {
          auto gp = p.grad();
          for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g[off + i];
        }
        off += p.size();
      }
    });
  }
  return out;
}

Tensor global_avg_pool(Tape& tape, const Tensor& input) {
  if (input.rank() != 3) {
    throw std::invalid_argument("global_avg_pool: need [C,H,W], got " +
                                shape_str(input.shape()));
  }
  const std::size_t c = input.dim(0), n = input.dim(1) * input.dim(2);
  const bool need = tape.wants({&input});
  Tensor out = Tensor::make_output({c}, need);
  for (std::size_t ch = 0; ch < c; ++ch) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += input.data()[ch * n + i];
    out.data()[ch] = s / static_cast<double>(n);
  }
  if (need) {
    tape.record(out, [input, out, c, n]() mutable {
      const auto g = out.grad();
      auto gi = input.grad();
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double v = g[ch] / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) gi[ch * n + i] += v;
      }
    });
  }
  return out;
}

Tensor binary_cross_entropy(Tape& tape, const Tensor& probs,
                            std::span<const double> targets, double clamp) {
  if (probs.size() != targets.size()) {
    throw std::invalid_argument(
        "binary_cross_entropy: " + std::to_string(probs.size()) +
        " scores vs " + std::to_string(targets.size()) + " targets");
  }
  const bool need = tape.wants({&probs});
  Tensor out = Tensor::make_output({1}, need);
  const std::size_t n = probs.size();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = std::clamp(probs.data()[i], clamp, 1.0 - clamp);
    s -= targets[i] * std::log(p) + (1.0 - targets[i]) * std::log(1.0 - p);
  }
  out.data()[0] = s / static_cast<double>(n);
  if (need) {
    tape.record(out, [probs, out, clamp, n,
                      y = std::vector<double>(targets.begin(),
                                              targets.end())]() mutable {
      const double g = out.grad()[0] / static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) {
        const double raw = probs.data()[i];
        if (raw < clamp || raw > 1.0 - clamp) continue;
        probs.grad()[i] += g * (-y[i] / raw + (1.0 - y[i]) / (1.0 - raw));
      }
    });
  }
  return out;
}

double smooth_l1_value(double x) {
  const double ax = std::abs(x);
  return ax < 1.0 ? 0.5 * x * x : ax - 0.5;
}

double smooth_l1_derivative(double x) {
  if (x >= 1.0) return 1.0;
  if (x <= -1.0) return -1.0;
  return x;
}

Tensor smooth_l1(Tape& tape, const Tensor& pred,
                 std::span<const double> target) {
  if (pred.size() != target.size()) {
    throw std::invalid_argument("smooth_l1: " + std::to_string(pred.size()) +
                                " predictions vs " +
                                std::to_string(target.size()) + " targets");
  }
  const bool need = tape.wants({&pred});
  Tensor out = Tensor::make_output({1}, need);
  double s = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    s += smooth_l1_value(pred.data()[i] - target[i]);
  }
  out.data()[0] = s;
  if (need) {
    tape.record(out, [pred, out, t = std::vector<double>(target.begin(),
                                                         target.end())]() mutable {
      const double g = out.grad()[0];
      for (std::size_t i = 0; i < t.size(); ++i) {
        pred.grad()[i] += g * smooth_l1_derivative(pred.data()[i] - t[i]);
      }
    });
  }
  return out;
}

Tensor elementwise_max(Tape& tape, std::span<const Tensor> inputs,
                       std::size_t width) {
  if (inputs.empty() || width == 0) {
    throw std::invalid_argument("elementwise_max: empty input");
  }
  bool need = false;
  for (const Tensor& t : inputs) {
    if (t.size() < width) {
      throw std::invalid_argument("elementwise_max: input " +
                                  shape_str(t.shape()) + " narrower than " +
                                  std::to_string(width));
    }
    need = need || tape.wants({&t});
  }
  Tensor out = Tensor::make_output({width}, need);
  std::vector<std::size_t> winner(width, 0);
  for (std::size_t j = 0; j < width; ++j) {
    double best = inputs[0].data()[j];
    for (std::size_t m = 1; m < inputs.size(); ++m) {
      if (inputs[m].data()[j] > best) {
        best = inputs[m].data()[j];
        winner[j] = m;
      }
    }
    out.data()[j] = best;
  }
  if (need) {
    tape.record(out, [ins = std::vector<Tensor>(inputs.begin(), inputs.end()),
                      out, winner = std::move(winner)]() mutable {
      const auto g = out.grad();
      for (std::size_t j = 0; j < winner.size(); ++j) {
        Tensor& src = ins[winner[j]];
        if (src.requires_grad()) src.grad()[j] += g[j];
      }
    });
  }
  return out;
}

}  // namespace rlsd::ops
