// Copyright 2026 The impactlab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef IMPACTLAB_NN_OPS_HPP_
#define IMPACTLAB_NN_OPS_HPP_

// Differentiable operations recorded on a Graph. All layer ops take a leading
// batch axis: dense/LSTM inputs are [B, n], conv inputs are [B, H, W, C].

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "impactlab/nn/graph.hpp"
#include "impactlab/nn/tensor.hpp"

namespace impactlab::nn {

enum class Activation { kLinear, kRelu };

namespace detail {

inline void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Applies ReLU in place and returns the smallest |pre-activation|.
inline double relu_inplace(std::span<double> v) {
  double margin = std::numeric_limits<double>::infinity();
  for (double& x : v) {
    margin = std::min(margin, std::abs(x));
    if (x < 0.0) x = 0.0;
  }
  return margin;
}

// Dot product with four interleaved partial sums (fixed order, so still
// deterministic) to break the serial add chain in backward passes.
inline double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    s0 += a[j] * b[j];
    s1 += a[j + 1] * b[j + 1];
    s2 += a[j + 2] * b[j + 2];
    s3 += a[j + 3] * b[j + 3];
  }
  for (; j < n; ++j) s0 += a[j] * b[j];
  return (s0 + s1) + (s2 + s3);
}

}  // namespace detail

// Valid (no padding), stride-1 cross-correlation with a kh x kw x C x F kernel.
inline NodeId conv2d(Graph& g, NodeId x_id, NodeId kernel_id, NodeId bias_id, Activation act = Activation::kRelu) {
  const Tensor& x = g.value(x_id);
  const Tensor& k = g.value(kernel_id);
  const Tensor& bias = g.value(bias_id);
  detail::require(x.rank() == 4, "conv2d: input must be [B,H,W,C], got " + shape_string(x.shape()));
  detail::require(k.rank() == 4, "conv2d: kernel must be [kh,kw,C,F], got " + shape_string(k.shape()));
  const std::size_t batch = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
  const std::size_t kh = k.dim(0), kw = k.dim(1), f = k.dim(3);
  detail::require(k.dim(2) == c, "conv2d: kernel channels " + std::to_string(k.dim(2)) + " != input channels " +
                                     std::to_string(c));
  detail::require(bias.size() == f, "conv2d: bias length " + std::to_string(bias.size()) + " != filters " +
                                        std::to_string(f));
  detail::require(h >= kh && w >= kw, "conv2d: input " + shape_string(x.shape()) + " smaller than kernel " +
                                          shape_string(k.shape()));
  const std::size_t ho = h - kh + 1, wo = w - kw + 1;
  Tensor y({batch, ho, wo, f});
  const double* xp = x.data().data();
  const double* kp = k.data().data();
  double* yp = y.data().data();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t i = 0; i < ho; ++i) {
      for (std::size_t j = 0; j < wo; ++j) {
        double* out = yp + ((b * ho + i) * wo + j) * f;
        for (std::size_t q = 0; q < f; ++q) out[q] = bias[q];
        for (std::size_t di = 0; di < kh; ++di) {
          for (std::size_t dj = 0; dj < kw; ++dj) {
            const double* in = xp + ((b * h + i + di) * w + j + dj) * c;
            const double* kk = kp + ((di * kw + dj) * c) * f;
            for (std::size_t ch = 0; ch < c; ++ch) {
              const double v = in[ch];
              if (v == 0.0) continue;
              const double* kr = kk + ch * f;
              for (std::size_t q = 0; q < f; ++q) out[q] += v * kr[q];
            }
          }
        }
      }
    }
  }
  if (act == Activation::kRelu) g.note_relu_margin(detail::relu_inplace(y.data()));
  return g.apply(std::move(y), {x_id, kernel_id, bias_id}, [=](Graph& gr, NodeId self) {
    const Tensor& xv = gr.value(x_id);
    const Tensor& kv = gr.value(kernel_id);
    const Tensor& yv = gr.value(self);
    const Tensor& dy = gr.grad(self);
    const bool need_x = gr.requires_grad(x_id);
    const bool need_k = gr.requires_grad(kernel_id);
    const bool need_b = gr.requires_grad(bias_id);
    double* dk = need_k ? gr.grad(kernel_id).data().data() : nullptr;
    double* db = need_b ? gr.grad(bias_id).data().data() : nullptr;
    double* dx = need_x ? gr.grad(x_id).data().data() : nullptr;
    const double* xp2 = xv.data().data();
    const double* kp2 = kv.data().data();
    std::vector<double> dz(f);
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t i = 0; i < ho; ++i) {
        for (std::size_t j = 0; j < wo; ++j) {
          const std::size_t o = ((b * ho + i) * wo + j) * f;
          bool any = false;
          for (std::size_t q = 0; q < f; ++q) {
            dz[q] = (act == Activation::kRelu && yv[o + q] <= 0.0) ? 0.0 : dy[o + q];
            any = any || dz[q] != 0.0;
          }
          if (!any) continue;
          if (db) {
            for (std::size_t q = 0; q < f; ++q) db[q] += dz[q];
          }
          for (std::size_t di = 0; di < kh; ++di) {
            for (std::size_t dj = 0; dj < kw; ++dj) {
              const std::size_t in_off = ((b * h + i + di) * w + j + dj) * c;
              const std::size_t k_off = ((di * kw + dj) * c) * f;
              for (std::size_t ch = 0; ch < c; ++ch) {
                const double v = xp2[in_off + ch];
                if (dk && v != 0.0) {
                  double* dkr = dk + k_off + ch * f;
                  for (std::size_t q = 0; q < f; ++q) dkr[q] += v * dz[q];
                }
                if (dx) {
                  const double* kr = kp2 + k_off + ch * f;
                  double s = 0.0;
                  for (std::size_t q = 0; q < f; ++q) s += kr[q] * dz[q];
                  dx[in_off + ch] += s;
                }
              }
            }
          }
        }
      }
    }
  });
}

// y = act(x W + b) with W stored [n, m].
inline NodeId dense(Graph& g, NodeId x_id, NodeId w_id, NodeId b_id, Activation act) {
  const Tensor& x = g.value(x_id);
  const Tensor& wt = g.value(w_id);
  const Tensor& bias = g.value(b_id);
  detail::require(x.rank() >= 1, "dense: empty input");
  detail::require(wt.rank() == 2, "dense: weight must be [n,m], got " + shape_string(wt.shape()));
  const std::size_t batch = x.rows(), n = x.row_size(), m = wt.dim(1);
  detail::require(wt.dim(0) == n, "dense: input width " + std::to_string(n) + " != weight fan-in " +
                                      std::to_string(wt.dim(0)) + " (input " + shape_string(x.shape()) + ")");
  detail::require(bias.size() == m, "dense: bias length " + std::to_string(bias.size()) + " != units " +
                                        std::to_string(m));
  Tensor y({batch, m});
  const double* xp = x.data().data();
  const double* wp = wt.data().data();
  double* yp = y.data().data();
  for (std::size_t b = 0; b < batch; ++b) {
    double* out = yp + b * m;
    for (std::size_t j = 0; j < m; ++j) out[j] = bias[j];
    const double* in = xp + b * n;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = in[i];
      if (v == 0.0) continue;
      const double* wr = wp + i * m;
      for (std::size_t j = 0; j < m; ++j) out[j] += v * wr[j];
    }
  }
  if (act == Activation::kRelu) g.note_relu_margin(detail::relu_inplace(y.data()));
  return g.apply(std::move(y), {x_id, w_id, b_id}, [=](Graph& gr, NodeId self) {
    const Tensor& xv = gr.value(x_id);
    const Tensor& wv = gr.value(w_id);
    const Tensor& yv = gr.value(self);
    const Tensor& dy = gr.grad(self);
    double* dw = gr.requires_grad(w_id) ? gr.grad(w_id).data().data() : nullptr;
    double* db = gr.requires_grad(b_id) ? gr.grad(b_id).data().data() : nullptr;
    double* dx = gr.requires_grad(x_id) ? gr.grad(x_id).data().data() : nullptr;
    std::vector<double> dz(m);
    for (std::size_t b = 0; b < batch; ++b) {
      bool any = false;
      for (std::size_t j = 0; j < m; ++j) {
        dz[j] = (act == Activation::kRelu && yv[b * m + j] <= 0.0) ? 0.0 : dy[b * m + j];
        any = any || dz[j] != 0.0;
      }
      if (!any) continue;
      if (db) {
        for (std::size_t j = 0; j < m; ++j) db[j] += dz[j];
      }
      const double* in = xv.data().data() + b * n;
      for (std::size_t i = 0; i < n; ++i) {
        const double* wr = wv.data().data() + i * m;
        if (dw && in[i] != 0.0) {
          double* dwr = dw + i * m;
          const double v = in[i];
          for (std::size_t j = 0; j < m; ++j) dwr[j] += v * dz[j];
        }
        if (dx) dx[b * n + i] += detail::dot(wr, dz.data(), m);
      }
    }
  });
}

// One LSTM cell step. `state` packs [h | c] as [B, 2u]; so does the result.
// Gate order in the 4u pre-activation block: input, forget, candidate, output.
inline NodeId lstm_step(Graph& g, NodeId x_id, NodeId state_id, NodeId wx_id, NodeId wh_id, NodeId b_id) {
  const Tensor& x = g.value(x_id);
  const Tensor& st = g.value(state_id);
  const Tensor& wx = g.value(wx_id);
  const Tensor& wh = g.value(wh_id);
  const Tensor& bias = g.value(b_id);
  detail::require(wx.rank() == 2 && wh.rank() == 2, "lstm: weights must be matrices");
  const std::size_t batch = x.rows(), n = x.row_size(), u = wh.dim(0);
  detail::require(wx.dim(0) == n && wx.dim(1) == 4 * u, "lstm: input weight " + shape_string(wx.shape()) +
                                                            " incompatible with input width " + std::to_string(n) +
                                                            " and " + std::to_string(u) + " units");
  detail::require(wh.dim(1) == 4 * u, "lstm: recurrent weight must be [u,4u], got " + shape_string(wh.shape()));
  detail::require(bias.size() == 4 * u, "lstm: bias must have 4u entries");
  detail::require(st.rows() == batch && st.row_size() == 2 * u,
                  "lstm: state " + shape_string(st.shape()) + " does not match " + std::to_string(u) + " units");
  if (!st.all_finite()) throw NumericError("lstm: non-finite recurrent state");

  auto gates = std::make_shared<std::vector<double>>(batch * 4 * u);  // post-activation i, f, g, o
  Tensor out({batch, 2 * u});
  // Pre-activations for the whole batch, weight-row-major. Each entry still
  // accumulates its inputs in ascending index order.
  std::vector<double> z_all(batch * 4 * u);
  for (std::size_t b = 0; b < batch; ++b) {
    std::copy(bias.data().begin(), bias.data().end(), z_all.begin() + static_cast<long>(b * 4 * u));
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double* wr = wx.data().data() + i * 4 * u;
    for (std::size_t b = 0; b < batch; ++b) {
      const double v = x.data()[b * n + i];
      if (v == 0.0) continue;
      double* z = z_all.data() + b * 4 * u;
      for (std::size_t j = 0; j < 4 * u; ++j) z[j] += v * wr[j];
    }
  }
  for (std::size_t i = 0; i < u; ++i) {
    const double* wr = wh.data().data() + i * 4 * u;
    for (std::size_t b = 0; b < batch; ++b) {
      const double v = st.data()[b * 2 * u + i];
      if (v == 0.0) continue;
      double* z = z_all.data() + b * 4 * u;
      for (std::size_t j = 0; j < 4 * u; ++j) z[j] += v * wr[j];
    }
  }
  for (std::size_t b = 0; b < batch; ++b) {
    const double* z = z_all.data() + b * 4 * u;
    const double* cp = st.data().data() + b * 2 * u + u;
    double* gt = gates->data() + b * 4 * u;
    double* ho = out.data().data() + b * 2 * u;
    double* co = ho + u;
    for (std::size_t j = 0; j < u; ++j) {
      const double ig = detail::sigmoid(z[j]);
      const double fg = detail::sigmoid(z[u + j]);
      const double cg = std::tanh(z[2 * u + j]);
      const double og = detail::sigmoid(z[3 * u + j]);
      gt[j] = ig;
      gt[u + j] = fg;
      gt[2 * u + j] = cg;
      gt[3 * u + j] = og;
      co[j] = fg * cp[j] + ig * cg;
      ho[j] = og * std::tanh(co[j]);
    }
  }
  return g.apply(std::move(out), {x_id, state_id, wx_id, wh_id, b_id}, [=](Graph& gr, NodeId self) {
    const Tensor& xv = gr.value(x_id);
    const Tensor& sv = gr.value(state_id);
    const Tensor& wxv = gr.value(wx_id);
    const Tensor& whv = gr.value(wh_id);
    const Tensor& ov = gr.value(self);
    const Tensor& dout = gr.grad(self);
    double* dx = gr.requires_grad(x_id) ? gr.grad(x_id).data().data() : nullptr;
    double* ds = gr.requires_grad(state_id) ? gr.grad(state_id).data().data() : nullptr;
    double* dwx = gr.requires_grad(wx_id) ? gr.grad(wx_id).data().data() : nullptr;
    double* dwh = gr.requires_grad(wh_id) ? gr.grad(wh_id).data().data() : nullptr;
    double* db = gr.requires_grad(b_id) ? gr.grad(b_id).data().data() : nullptr;
    // Gate gradients for the whole batch first, then weight-row-major
    // accumulation so each weight row stays in cache across the batch. The
    // per-element summation order over b is unchanged.
    std::vector<double> dz_all(batch * 4 * u);
    for (std::size_t b = 0; b < batch; ++b) {
      const double* gt = gates->data() + b * 4 * u;
      const double* dh = dout.data().data() + b * 2 * u;
      const double* dc_out = dh + u;
      const double* c_new = ov.data().data() + b * 2 * u + u;
      const double* c_prev = sv.data().data() + b * 2 * u + u;
      double* dz = dz_all.data() + b * 4 * u;
      for (std::size_t j = 0; j < u; ++j) {
        const double ig = gt[j], fg = gt[u + j], cg = gt[2 * u + j], og = gt[3 * u + j];
        const double tc = std::tanh(c_new[j]);
        const double dc = dc_out[j] + dh[j] * og * (1.0 - tc * tc);
        dz[j] = dc * cg * ig * (1.0 - ig);
        dz[u + j] = dc * c_prev[j] * fg * (1.0 - fg);
        dz[2 * u + j] = dc * ig * (1.0 - cg * cg);
        dz[3 * u + j] = dh[j] * tc * og * (1.0 - og);
        if (ds) ds[b * 2 * u + u + j] += dc * fg;
      }
      if (db) {
        for (std::size_t j = 0; j < 4 * u; ++j) db[j] += dz[j];
      }
    }
    const double* xp = xv.data().data();
    const double* sp = sv.data().data();
    for (std::size_t i = 0; i < n; ++i) {
      const double* wr = wxv.data().data() + i * 4 * u;
      double* dwr = dwx ? dwx + i * 4 * u : nullptr;
      for (std::size_t b = 0; b < batch; ++b) {
        const double* dz = dz_all.data() + b * 4 * u;
        const double v = xp[b * n + i];
        if (dwr && v != 0.0) {
          for (std::size_t j = 0; j < 4 * u; ++j) dwr[j] += v * dz[j];
        }
        if (dx) dx[b * n + i] += detail::dot(wr, dz, 4 * u);
      }
    }
    for (std::size_t i = 0; i < u; ++i) {
      const double* wr = whv.data().data() + i * 4 * u;
      double* dwr = dwh ? dwh + i * 4 * u : nullptr;
      for (std::size_t b = 0; b < batch; ++b) {
        const double* dz = dz_all.data() + b * 4 * u;
        const double v = sp[b * 2 * u + i];
        if (dwr && v != 0.0) {
          for (std::size_t j = 0; j < 4 * u; ++j) dwr[j] += v * dz[j];
        }
        if (ds) ds[b * 2 * u + i] += detail::dot(wr, dz, 4 * u);
      }
    }
  });
}

// Columns [begin, end) of a [B, n] view.
inline NodeId slice_cols(Graph& g, NodeId x_id, std::size_t begin, std::size_t end) {
  const Tensor& x = g.value(x_id);
  const std::size_t batch = x.rows(), n = x.row_size();
  detail::require(begin < end && end <= n, "slice_cols: range [" + std::to_string(begin) + "," +
                                               std::to_string(end) + ") outside width " + std::to_string(n));
  const std::size_t w = end - begin;
  Tensor y({batch, w});
  for (std::size_t b = 0; b < batch; ++b) {
    std::copy_n(x.data().begin() + static_cast<std::ptrdiff_t>(b * n + begin), w,
                y.data().begin() + static_cast<std::ptrdiff_t>(b * w));
  }
  return g.apply(std::move(y), {x_id}, [=](Graph& gr, NodeId self) {
    const Tensor& dy = gr.grad(self);
    Tensor& dx = gr.grad(x_id);
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t j = 0; j < w; ++j) dx[b * n + begin + j] += dy[b * w + j];
    }
  });
}

inline NodeId concat_cols(Graph& g, const std::vector<NodeId>& parts) {
  detail::require(!parts.empty(), "concat_cols: no inputs");
  const std::size_t batch = g.value(parts[0]).rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (NodeId p : parts) {
    const Tensor& t = g.value(p);
    detail::require(t.rows() == batch, "concat_cols: batch mismatch " + shape_string(t.shape()));
    widths.push_back(t.row_size());
    total += t.row_size();
  }
  Tensor y({batch, total});
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& t = g.value(parts[k]);
    for (std::size_t b = 0; b < batch; ++b) {
      std::copy_n(t.data().begin() + static_cast<std::ptrdiff_t>(b * widths[k]), widths[k],
                  y.data().begin() + static_cast<std::ptrdiff_t>(b * total + off));
    }
    off += widths[k];
  }
  return g.apply(std::move(y), parts, [=](Graph& gr, NodeId self) {
    const Tensor& dy = gr.grad(self);
    std::size_t o = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
      if (gr.requires_grad(parts[k])) {
        Tensor& dx = gr.grad(parts[k]);
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t j = 0; j < widths[k]; ++j) dx[b * widths[k] + j] += dy[b * total + o + j];
        }
      }
      o += widths[k];
    }
  });
}

// Rows [begin, end) of a [B, n] view; output [end - begin, n].
inline NodeId slice_rows(Graph& g, NodeId x_id, std::size_t begin, std::size_t end) {
  const Tensor& x = g.value(x_id);
  const std::size_t n = x.row_size();
  detail::require(begin < end && end <= x.rows(), "slice_rows: range [" + std::to_string(begin) + "," +
                                                      std::to_string(end) + ") outside " + std::to_string(x.rows()) +
                                                      " rows");
  Tensor y({end - begin, n});
  std::copy_n(x.data().begin() + static_cast<std::ptrdiff_t>(begin * n), (end - begin) * n, y.data().begin());
  return g.apply(std::move(y), {x_id}, [=](Graph& gr, NodeId self) {
    const Tensor& dy = gr.grad(self);
    Tensor& dx = gr.grad(x_id);
    for (std::size_t i = 0; i < dy.size(); ++i) dx[begin * n + i] += dy[i];
  });
}

// Stacks [B_k, n] parts into [sum B_k, n].
inline NodeId concat_rows(Graph& g, const std::vector<NodeId>& parts) {
  detail::require(!parts.empty(), "concat_rows: no inputs");
  const std::size_t n = g.value(parts[0]).row_size();
  std::size_t rows = 0;
  for (NodeId p : parts) {
    detail::require(g.value(p).row_size() == n, "concat_rows: width mismatch " + shape_string(g.value(p).shape()));
    rows += g.value(p).rows();
  }
  Tensor y({rows, n});
  std::size_t off = 0;
  for (NodeId p : parts) {
    const Tensor& t = g.value(p);
    std::copy(t.data().begin(), t.data().end(), y.data().begin() + static_cast<std::ptrdiff_t>(off));
    off += t.size();
  }
  return g.apply(std::move(y), parts, [=](Graph& gr, NodeId self) {
    const Tensor& dy = gr.grad(self);
    std::size_t o = 0;
    for (NodeId p : parts) {
      const std::size_t sz = gr.value(p).size();
      if (gr.requires_grad(p)) {
        Tensor& dx = gr.grad(p);
        for (std::size_t i = 0; i < sz; ++i) dx[i] += dy[o + i];
      }
      o += sz;
    }
  });
}

// [B, ...] -> [B, prod(...)]
inline NodeId flatten_rows(Graph& g, NodeId x_id) {
  const Tensor& x = g.value(x_id);
  Tensor y = x.reshaped({x.rows(), x.row_size()});
  return g.apply(std::move(y), {x_id}, [=](Graph& gr, NodeId self) {
    const Tensor& dy = gr.grad(self);
    Tensor& dx = gr.grad(x_id);
    for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i];
  });
}

// Value copy with no gradient path back to x.
inline NodeId stop_gradient(Graph& g, NodeId x_id) { return g.input(g.value(x_id)); }

// Log-softmax over consecutive blocks of `block` columns in each row.
inline NodeId log_softmax_blocks(Graph& g, NodeId x_id, std::size_t block) {
  const Tensor& x = g.value(x_id);
  const std::size_t batch = x.rows(), n = x.row_size();
  detail::require(block > 0 && n % block == 0, "log_softmax_blocks: width " + std::to_string(n) +
                                                   " is not a multiple of block " + std::to_string(block));
  Tensor y({batch, n});
  for (std::size_t r = 0; r < batch * n; r += block) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < block; ++j) mx = std::max(mx, x[r + j]);
    double s = 0.0;
    for (std::size_t j = 0; j < block; ++j) s += std::exp(x[r + j] - mx);
    const double lse = mx + std::log(s);
    for (std::size_t j = 0; j < block; ++j) y[r + j] = x[r + j] - lse;
  }
  if (!y.all_finite()) throw NumericError("log_softmax: non-finite logits");
  return g.apply(std::move(y), {x_id}, [=](Graph& gr, NodeId self) {
    const Tensor& yv = gr.value(self);
    const Tensor& dy = gr.grad(self);
    Tensor& dx = gr.grad(x_id);
    for (std::size_t r = 0; r < batch * n; r += block) {
      double s = 0.0;
      for (std::size_t j = 0; j < block; ++j) s += dy[r + j];
      for (std::size_t j = 0; j < block; ++j) dx[r + j] += dy[r + j] - std::exp(yv[r + j]) * s;
    }
  });
}

// Per row: sum over blocks of logp[block k][targets[row*K + k]]; negative
// targets are skipped. Output [B, 1].
inline NodeId select_blocks(Graph& g, NodeId logp_id, std::size_t block, std::vector<int> targets) {
  const Tensor& lp = g.value(logp_id);
  const std::size_t batch = lp.rows(), n = lp.row_size();
  detail::require(block > 0 && n % block == 0, "select_blocks: width not a multiple of block");
  const std::size_t k_blocks = n / block;
  detail::require(targets.size() == batch * k_blocks, "select_blocks: expected " + std::to_string(batch * k_blocks) +
                                                          " targets, got " + std::to_string(targets.size()));
  Tensor y({batch, 1});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t k = 0; k < k_blocks; ++k) {
      const int t = targets[b * k_blocks + k];
      if (t < 0) continue;
      detail::require(static_cast<std::size_t>(t) < block, "select_blocks: target out of range");
      y[b] += lp[b * n + k * block + static_cast<std::size_t>(t)];
    }
  }
  return g.apply(std::move(y), {logp_id}, [=, targets = std::move(targets)](Graph& gr, NodeId self) {
    const Tensor& dy = gr.grad(self);
    Tensor& dx = gr.grad(logp_id);
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t k = 0; k < k_blocks; ++k) {
        const int t = targets[b * k_blocks + k];
        if (t >= 0) dx[b * n + k * block + static_cast<std::size_t>(t)] += dy[b];
      }
    }
  });
}

// Per row: sum over blocks of the entropy -sum p log p, from log-probabilities. Output [B, 1].
inline NodeId entropy_blocks(Graph& g, NodeId logp_id, std::size_t block) {
  const Tensor& lp = g.value(logp_id);
  const std::size_t batch = lp.rows(), n = lp.row_size();
  detail::require(block > 0 && n % block == 0, "entropy_blocks: width not a multiple of block");
  Tensor y({batch, 1});
  for (std::size_t b = 0; b < batch; ++b) {
    double h = 0.0;
    for (std::size_t j = 0; j < n; ++j) h -= std::exp(lp[b * n + j]) * lp[b * n + j];
    y[b] = h;
  }
  return g.apply(std::move(y), {logp_id}, [=](Graph& gr, NodeId self) {
    const Tensor& lpv = gr.value(logp_id);
    const Tensor& dy = gr.grad(self);
    Tensor& dx = gr.grad(logp_id);
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t j = 0; j < n; ++j) {
        const double l = lpv[b * n + j];
        dx[b * n + j] += -dy[b] * std::exp(l) * (l + 1.0);
      }
    }
  });
}

// Per row: 0.5 * ||a - b||^2. Output [B, 1].
inline NodeId half_squared_distance(Graph& g, NodeId a_id, NodeId b_id) {
  const Tensor& a = g.value(a_id);
  const Tensor& bt = g.value(b_id);
  detail::require(a.rows() == bt.rows() && a.row_size() == bt.row_size(),
                  "half_squared_distance: shapes " + shape_string(a.shape()) + " and " + shape_string(bt.shape()));
  const std::size_t batch = a.rows(), n = a.row_size();
  Tensor y({batch, 1});
  for (std::size_t b = 0; b < batch; ++b) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double d = a[b * n + j] - bt[b * n + j];
      s += d * d;
    }
    y[b] = 0.5 * s;
  }
  return g.apply(std::move(y), {a_id, b_id}, [=](Graph& gr, NodeId self) {
    const Tensor& av = gr.value(a_id);
    const Tensor& bv = gr.value(b_id);
    const Tensor& dy = gr.grad(self);
    double* da = gr.requires_grad(a_id) ? gr.grad(a_id).data().data() : nullptr;
    double* dbv = gr.requires_grad(b_id) ? gr.grad(b_id).data().data() : nullptr;
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t j = 0; j < n; ++j) {
        const double d = (av[b * n + j] - bv[b * n + j]) * dy[b];
        if (da) da[b * n + j] += d;
        if (dbv) dbv[b * n + j] -= d;
      }
    }
  });
}

// ---- elementwise and reductions over equally-shaped tensors ----

inline NodeId add(Graph& g, NodeId a_id, NodeId b_id) {
  const Tensor& a = g.value(a_id);
  const Tensor& b = g.value(b_id);
  detail::require(a.size() == b.size(), "add: size mismatch");
  Tensor y = a;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += b[i];
  return g.apply(std::move(y), {a_id, b_id}, [=](Graph& gr, NodeId self) {
    const Tensor& dy = gr.grad(self);
    for (NodeId p : {a_id, b_id}) {
      if (!gr.requires_grad(p)) continue;
      Tensor& dx = gr.grad(p);
      for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i];
    }
  });
}

inline NodeId sub(Graph& g, NodeId a_id, NodeId b_id) {
  const Tensor& a = g.value(a_id);
  const Tensor& b = g.value(b_id);
  detail::require(a.size() == b.size(), "sub: size mismatch");
  Tensor y = a;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= b[i];
  return g.apply(std::move(y), {a_id, b_id}, [=](Graph& gr, NodeId self) {
    const Tensor& dy = gr.grad(self);
    if (gr.requires_grad(a_id)) {
      Tensor& dx = gr.grad(a_id);
      for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i];
    }
    if (gr.requires_grad(b_id)) {
      Tensor& dx = gr.grad(b_id);
      for (std::size_t i = 0; i < dy.size(); ++i) dx[i] -= dy[i];
    }
  });
}

inline NodeId mul(Graph& g, NodeId a_id, NodeId b_id) {
  const Tensor& a = g.value(a_id);
  const Tensor& b = g.value(b_id);
  detail::require(a.size() == b.size(), "mul: size mismatch");
  Tensor y = a;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= b[i];
  return g.apply(std::move(y), {a_id, b_id}, [=](Graph& gr, NodeId self) {
    const Tensor& dy = gr.grad(self);
    const Tensor& av = gr.value(a_id);
    const Tensor& bv = gr.value(b_id);
    if (gr.requires_grad(a_id)) {
      Tensor& dx = gr.grad(a_id);
      for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i] * bv[i];
    }
    if (gr.requires_grad(b_id)) {
      Tensor& dx = gr.grad(b_id);
      for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i] * av[i];
    }
  });
}

inline NodeId scale(Graph& g, NodeId x_id, double s) {
  Tensor y = g.value(x_id);
  for (double& v : y.data()) v *= s;
  return g.apply(std::move(y), {x_id}, [=](Graph& gr, NodeId self) {
    const Tensor& dy = gr.grad(self);
    Tensor& dx = gr.grad(x_id);
    for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += s * dy[i];
  });
}

inline NodeId exp(Graph& g, NodeId x_id) {
  Tensor y = g.value(x_id);
  for (double& v : y.data()) v = std::exp(v);
  return g.apply(std::move(y), {x_id}, [=](Graph& gr, NodeId self) {
    const Tensor& yv = gr.value(self);
    const Tensor& dy = gr.grad(self);
    Tensor& dx = gr.grad(x_id);
    for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i] * yv[i];
  });
}

inline NodeId square(Graph& g, NodeId x_id) {
  Tensor y = g.value(x_id);
  for (double& v : y.data()) v *= v;
  return g.apply(std::move(y), {x_id}, [=](Graph& gr, NodeId self) {
    const Tensor& xv = gr.value(x_id);
    const Tensor& dy = gr.grad(self);
    Tensor& dx = gr.grad(x_id);
    for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += 2.0 * xv[i] * dy[i];
  });
}

// Clamp to [lo, hi]; gradient is zero where clamping is active.
inline NodeId clamp(Graph& g, NodeId x_id, double lo, double hi) {
  Tensor y = g.value(x_id);
  for (double& v : y.data()) v = std::clamp(v, lo, hi);
  return g.apply(std::move(y), {x_id}, [=](Graph& gr, NodeId self) {
    const Tensor& xv = gr.value(x_id);
    const Tensor& dy = gr.grad(self);
    Tensor& dx = gr.grad(x_id);
    for (std::size_t i = 0; i < dy.size(); ++i) {
      if (xv[i] >= lo && xv[i] <= hi) dx[i] += dy[i];
    }
  });
}

// Elementwise min; ties route the gradient to `a`.
inline NodeId minimum(Graph& g, NodeId a_id, NodeId b_id) {
  const Tensor& a = g.value(a_id);
  const Tensor& b = g.value(b_id);
  detail::require(a.size() == b.size(), "minimum: size mismatch");
  Tensor y = a;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::min(a[i], b[i]);
  return g.apply(std::move(y), {a_id, b_id}, [=](Graph& gr, NodeId self) {
    const Tensor& av = gr.value(a_id);
    const Tensor& bv = gr.value(b_id);
    const Tensor& dy = gr.grad(self);
    for (std::size_t i = 0; i < dy.size(); ++i) {
      const NodeId target = av[i] <= bv[i] ? a_id : b_id;
      if (gr.requires_grad(target)) gr.grad(target)[i] += dy[i];
    }
  });
}

// sum_i w_i x_i with constant weights. Output [1].
inline NodeId weighted_sum(Graph& g, NodeId x_id, std::vector<double> weights) {
  const Tensor& x = g.value(x_id);
  detail::require(weights.size() == x.size(), "weighted_sum: " + std::to_string(weights.size()) +
                                                  " weights for " + std::to_string(x.size()) + " values");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += weights[i] * x[i];
  return g.apply(Tensor({1}, {s}), {x_id}, [=, weights = std::move(weights)](Graph& gr, NodeId self) {
    const double dy = gr.grad(self)[0];
    Tensor& dx = gr.grad(x_id);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += weights[i] * dy;
  });
}

inline NodeId sum(Graph& g, NodeId x_id) {
  return weighted_sum(g, x_id, std::vector<double>(g.value(x_id).size(), 1.0));
}

inline NodeId mean(Graph& g, NodeId x_id) {
  const std::size_t n = g.value(x_id).size();
  return weighted_sum(g, x_id, std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

// ---- non-recording helpers ----

// Softmax over blocks, computed directly from values (no graph).
inline std::vector<double> softmax_blocks(std::span<const double> logits, std::size_t block) {
  if (block == 0 || logits.size() % block != 0) throw ShapeError("softmax_blocks: width not a multiple of block");
  std::vector<double> p(logits.size());
  for (std::size_t r = 0; r < logits.size(); r += block) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < block; ++j) mx = std::max(mx, logits[r + j]);
    if (!std::isfinite(mx)) throw NumericError("softmax: non-finite logits");
    double s = 0.0;
    for (std::size_t j = 0; j < block; ++j) s += (p[r + j] = std::exp(logits[r + j] - mx));
    for (std::size_t j = 0; j < block; ++j) p[r + j] /= s;
  }
  return p;
}

}  // namespace impactlab::nn

#endif  // IMPACTLAB_NN_OPS_HPP_
