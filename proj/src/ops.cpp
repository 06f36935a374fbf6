#include "zskd/ops.hpp"

#include <cmath>
#include <cstring>
#include <numbers>

#include "zskd/error.hpp"

namespace zskd {

namespace detail {

void mm_nn(const double* a, const double* b, double* c, int64_t m, int64_t k,
           int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (int64_t p = 0; p < k; ++p) {
      double av = arow[p];
      const double* brow = b + p * n;
      for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void mm_nt(const double* a, const double* b, double* c, int64_t m, int64_t k,
           int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (int64_t j = 0; j < n; ++j) {
      const double* brow = b + j * k;
      double s = 0.0;
      for (int64_t p = 0; p < k; ++p) s += arow[p] * brow[p];
      crow[j] += s;
    }
  }
}

void mm_tn(const double* a, const double* b, double* c, int64_t m, int64_t k,
           int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    const double* brow = b + i * n;
    for (int64_t p = 0; p < k; ++p) {
      double av = arow[p];
      double* crow = c + p * n;
      for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace detail

namespace {

using detail::mm_nn;
using detail::mm_nt;
using detail::mm_tn;

double* grad_of(const std::shared_ptr<TensorNode>& node) {
  // A leaf that is currently frozen may still hold a sized (zeroed) grad
  // buffer from an earlier training phase; accumulation must honor the
  // freeze flag, not the buffer.
  if (!node->needs_grad() || node->grad.empty()) return nullptr;
  return node->grad.data();
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.vec());
  const double* bd = b.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] += bd[i];
  return make_op_result(a.shape(), std::move(out), {a, b}, [](TensorNode& self) {
    for (int p = 0; p < 2; ++p) {
      if (double* g = grad_of(self.parents[p])) {
        for (size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
      }
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.vec());
  const double* bd = b.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] -= bd[i];
  return make_op_result(a.shape(), std::move(out), {a, b}, [](TensorNode& self) {
    if (double* g = grad_of(self.parents[0])) {
      for (size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    }
    if (double* g = grad_of(self.parents[1])) {
      for (size_t i = 0; i < self.grad.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.vec());
  const double* bd = b.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] *= bd[i];
  return make_op_result(a.shape(), std::move(out), {a, b}, [](TensorNode& self) {
    const double* ad = self.parents[0]->data.data();
    const double* bd2 = self.parents[1]->data.data();
    if (double* g = grad_of(self.parents[0])) {
      for (size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * bd2[i];
    }
    if (double* g = grad_of(self.parents[1])) {
      for (size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * ad[i];
    }
  });
}

Tensor scale(const Tensor& a, double c) {
  std::vector<double> out(a.vec());
  for (double& v : out) v *= c;
  return make_op_result(a.shape(), std::move(out), {a}, [c](TensorNode& self) {
    if (double* g = grad_of(self.parents[0])) {
      for (size_t i = 0; i < self.grad.size(); ++i) g[i] += c * self.grad[i];
    }
  });
}

Tensor add_scalar(const Tensor& a, double c) {
  std::vector<double> out(a.vec());
  for (double& v : out) v += c;
  return make_op_result(a.shape(), std::move(out), {a}, [](TensorNode& self) {
    if (double* g = grad_of(self.parents[0])) {
      for (size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: incompatible shapes " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
  }
  int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(static_cast<size_t>(m * n), 0.0);
  mm_nn(a.data(), b.data(), out.data(), m, k, n);
  return make_op_result({m, n}, std::move(out), {a, b},
                        [m, k, n](TensorNode& self) {
                          const double* ad = self.parents[0]->data.data();
                          const double* bd = self.parents[1]->data.data();
                          const double* g = self.grad.data();
                          if (double* ga = grad_of(self.parents[0])) {
                            mm_nt(g, bd, ga, m, n, k);
                          }
                          if (double* gb = grad_of(self.parents[1])) {
                            mm_tn(ad, g, gb, m, k, n);
                          }
                        });
}

Tensor linear(const Tensor& x, const Tensor& w) {
  if (w.ndim() != 2 || x.dim(-1) != w.dim(0)) {
    throw DimensionError("linear: incompatible shapes " + shape_str(x.shape()) +
                         " vs " + shape_str(w.shape()));
  }
  int64_t k = w.dim(0), n = w.dim(1);
  int64_t rows = x.numel() / k;
  std::vector<double> out(static_cast<size_t>(rows * n), 0.0);
  mm_nn(x.data(), w.data(), out.data(), rows, k, n);
  Shape out_shape(x.shape());
  out_shape.back() = n;
  return make_op_result(std::move(out_shape), std::move(out), {x, w},
                        [rows, k, n](TensorNode& self) {
                          const double* xd = self.parents[0]->data.data();
                          const double* wd = self.parents[1]->data.data();
                          const double* g = self.grad.data();
                          if (double* gx = grad_of(self.parents[0])) {
                            mm_nt(g, wd, gx, rows, n, k);
                          }
                          if (double* gw = grad_of(self.parents[1])) {
                            mm_tn(xd, g, gw, rows, k, n);
                          }
                        });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  if (bias.ndim() != 1 || x.dim(-1) != bias.dim(0)) {
    throw DimensionError("add_bias: " + shape_str(x.shape()) + " vs " +
                         shape_str(bias.shape()));
  }
  int64_t c = bias.dim(0);
  int64_t rows = x.numel() / c;
  std::vector<double> out(x.vec());
  const double* bd = bias.data();
  for (int64_t r = 0; r < rows; ++r) {
    double* row = out.data() + r * c;
    for (int64_t j = 0; j < c; ++j) row[j] += bd[j];
  }
  return make_op_result(x.shape(), std::move(out), {x, bias},
                        [rows, c](TensorNode& self) {
                          const double* g = self.grad.data();
                          if (double* gx = grad_of(self.parents[0])) {
                            for (size_t i = 0; i < self.grad.size(); ++i)
                              gx[i] += g[i];
                          }
                          if (double* gb = grad_of(self.parents[1])) {
                            for (int64_t r = 0; r < rows; ++r) {
                              const double* grow = g + r * c;
                              for (int64_t j = 0; j < c; ++j) gb[j] += grow[j];
                            }
                          }
                        });
}

Tensor add_positions(const Tensor& x, const Tensor& pos) {
  // The position table may be longer than the batch (max_len rows for a
  // shorter sequence); only its leading rows are used.
  if (x.ndim() != 3 || pos.ndim() != 2 || x.dim(1) > pos.dim(0) ||
      x.dim(2) != pos.dim(1)) {
    throw DimensionError("add_positions: " + shape_str(x.shape()) + " vs " +
                         shape_str(pos.shape()));
  }
  int64_t b = x.dim(0);
  int64_t plane = x.dim(1) * x.dim(2);
  std::vector<double> out(x.vec());
  const double* pd = pos.data();
  for (int64_t i = 0; i < b; ++i) {
    double* row = out.data() + i * plane;
    for (int64_t j = 0; j < plane; ++j) row[j] += pd[j];
  }
  return make_op_result(x.shape(), std::move(out), {x, pos},
                        [b, plane](TensorNode& self) {
                          const double* g = self.grad.data();
                          if (double* gx = grad_of(self.parents[0])) {
                            for (size_t i = 0; i < self.grad.size(); ++i)
                              gx[i] += g[i];
                          }
                          if (double* gp = grad_of(self.parents[1])) {
                            for (int64_t i = 0; i < b; ++i) {
                              const double* grow = g + i * plane;
                              for (int64_t j = 0; j < plane; ++j)
                                gp[j] += grow[j];
                            }
                          }
                        });
}

Tensor bmm(const Tensor& a, const Tensor& b, bool trans_b) {
  if (a.ndim() != 3 || b.ndim() != 3 || a.dim(0) != b.dim(0)) {
    throw DimensionError("bmm: incompatible shapes " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
  }
  int64_t batch = a.dim(0), m = a.dim(1), k = a.dim(2);
  int64_t n = trans_b ? b.dim(1) : b.dim(2);
  int64_t bk = trans_b ? b.dim(2) : b.dim(1);
  if (bk != k) {
    throw DimensionError("bmm: inner dims differ " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
  }
  std::vector<double> out(static_cast<size_t>(batch * m * n), 0.0);
  for (int64_t i = 0; i < batch; ++i) {
    const double* ap = a.data() + i * m * k;
    const double* bp = b.data() + i * k * n;
    double* cp = out.data() + i * m * n;
    if (trans_b) {
      mm_nt(ap, bp, cp, m, k, n);
    } else {
      mm_nn(ap, bp, cp, m, k, n);
    }
  }
  return make_op_result(
      {batch, m, n}, std::move(out), {a, b},
      [batch, m, k, n, trans_b](TensorNode& self) {
        const double* ad = self.parents[0]->data.data();
        const double* bd = self.parents[1]->data.data();
        const double* g = self.grad.data();
        double* ga = grad_of(self.parents[0]);
        double* gb = grad_of(self.parents[1]);
        for (int64_t i = 0; i < batch; ++i) {
          const double* ap = ad + i * m * k;
          const double* bp = bd + i * k * n;
          const double* gp = g + i * m * n;
          if (!trans_b) {
            // out = a.b : ga += g.b^T, gb += a^T.g
            if (ga) mm_nt(gp, bp, ga + i * m * k, m, n, k);
            if (gb) mm_tn(ap, gp, gb + i * k * n, m, k, n);
          } else {
            // out = a.b^T with b[n,k] : ga += g.b, gb += g^T.a
            if (ga) mm_nn(gp, bp, ga + i * m * k, m, n, k);
            if (gb) mm_tn(gp, ap, gb + i * k * n, m, n, k);
          }
        }
      });
}

Tensor split_heads(const Tensor& x, int64_t heads) {
  if (x.ndim() != 3 || x.dim(2) % heads != 0) {
    throw DimensionError("split_heads: bad input " + shape_str(x.shape()) +
                         " for " + std::to_string(heads) + " heads");
  }
  int64_t b = x.dim(0), l = x.dim(1), h = x.dim(2), dh = h / heads;
  std::vector<double> out(static_cast<size_t>(x.numel()));
  const double* xd = x.data();
  for (int64_t i = 0; i < b; ++i)
    for (int64_t t = 0; t < l; ++t)
      for (int64_t hd = 0; hd < heads; ++hd) {
        const double* src = xd + (i * l + t) * h + hd * dh;
        double* dst = out.data() + ((i * heads + hd) * l + t) * dh;
        std::memcpy(dst, src, static_cast<size_t>(dh) * sizeof(double));
      }
  return make_op_result(
      {b * heads, l, dh}, std::move(out), {x},
      [b, l, h, heads, dh](TensorNode& self) {
        if (double* gx = grad_of(self.parents[0])) {
          const double* g = self.grad.data();
          for (int64_t i = 0; i < b; ++i)
            for (int64_t t = 0; t < l; ++t)
              for (int64_t hd = 0; hd < heads; ++hd) {
                const double* src = g + ((i * heads + hd) * l + t) * dh;
                double* dst = gx + (i * l + t) * h + hd * dh;
                for (int64_t j = 0; j < dh; ++j) dst[j] += src[j];
              }
        }
      });
}

Tensor merge_heads(const Tensor& x, int64_t heads) {
  if (x.ndim() != 3 || x.dim(0) % heads != 0) {
    throw DimensionError("merge_heads: bad input " + shape_str(x.shape()));
  }
  int64_t b = x.dim(0) / heads, l = x.dim(1), dh = x.dim(2), h = dh * heads;
  std::vector<double> out(static_cast<size_t>(x.numel()));
  const double* xd = x.data();
  for (int64_t i = 0; i < b; ++i)
    for (int64_t t = 0; t < l; ++t)
      for (int64_t hd = 0; hd < heads; ++hd) {
        const double* src = xd + ((i * heads + hd) * l + t) * dh;
        double* dst = out.data() + (i * l + t) * h + hd * dh;
        std::memcpy(dst, src, static_cast<size_t>(dh) * sizeof(double));
      }
  return make_op_result(
      {b, l, h}, std::move(out), {x},
      [b, l, h, heads, dh](TensorNode& self) {
        if (double* gx = grad_of(self.parents[0])) {
          const double* g = self.grad.data();
          for (int64_t i = 0; i < b; ++i)
            for (int64_t t = 0; t < l; ++t)
              for (int64_t hd = 0; hd < heads; ++hd) {
                const double* src = g + (i * l + t) * h + hd * dh;
                double* dst = gx + ((i * heads + hd) * l + t) * dh;
                for (int64_t j = 0; j < dh; ++j) dst[j] += src[j];
              }
        }
      });
}

Tensor add_key_bias(const Tensor& scores, const Tensor& bias, int64_t heads) {
  if (scores.ndim() != 3 || bias.ndim() != 2 ||
      scores.dim(0) != bias.dim(0) * heads || scores.dim(2) != bias.dim(1)) {
    throw DimensionError("add_key_bias: " + shape_str(scores.shape()) + " vs " +
                         shape_str(bias.shape()));
  }
  int64_t rows = scores.dim(0) * scores.dim(1);
  int64_t lk = scores.dim(2);
  int64_t lq = scores.dim(1);
  std::vector<double> out(scores.vec());
  const double* bd = bias.data();
  for (int64_t r = 0; r < rows; ++r) {
    int64_t batch = r / (heads * lq);
    const double* brow = bd + batch * lk;
    double* row = out.data() + r * lk;
    for (int64_t j = 0; j < lk; ++j) row[j] += brow[j];
  }
  return make_op_result(scores.shape(), std::move(out), {scores, bias},
                        [](TensorNode& self) {
                          if (double* g = grad_of(self.parents[0])) {
                            for (size_t i = 0; i < self.grad.size(); ++i)
                              g[i] += self.grad[i];
                          }
                        });
}

Tensor softmax(const Tensor& x, double temperature) {
  if (temperature <= 0.0) {
    throw ParameterError("softmax: temperature must be positive, got " +
                         std::to_string(temperature));
  }
  int64_t c = x.dim(-1);
  int64_t rows = x.numel() / c;
  std::vector<double> out(static_cast<size_t>(x.numel()));
  const double* xd = x.data();
  for (int64_t r = 0; r < rows; ++r) {
    const double* row = xd + r * c;
    double* orow = out.data() + r * c;
    double mx = row[0];
    for (int64_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (int64_t j = 0; j < c; ++j) {
      double e = std::exp((row[j] - mx) / temperature);
      orow[j] = e;
      sum += e;
    }
    double inv = 1.0 / sum;
    for (int64_t j = 0; j < c; ++j) orow[j] *= inv;
  }
  return make_op_result(
      x.shape(), std::move(out), {x}, [rows, c, temperature](TensorNode& self) {
        if (double* gx = grad_of(self.parents[0])) {
          const double* p = self.data.data();
          const double* g = self.grad.data();
          for (int64_t r = 0; r < rows; ++r) {
            const double* prow = p + r * c;
            const double* grow = g + r * c;
            double dot = 0.0;
            for (int64_t j = 0; j < c; ++j) dot += prow[j] * grow[j];
            double* gxrow = gx + r * c;
            for (int64_t j = 0; j < c; ++j)
              gxrow[j] += prow[j] * (grow[j] - dot) / temperature;
          }
        }
      });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps) {
  int64_t h = x.dim(-1);
  if (gamma.numel() != h || beta.numel() != h) {
    throw DimensionError("layer_norm: param size " + shape_str(gamma.shape()) +
                         " does not match " + shape_str(x.shape()));
  }
  int64_t rows = x.numel() / h;
  std::vector<double> out(static_cast<size_t>(x.numel()));
  std::vector<double> xhat(static_cast<size_t>(x.numel()));
  std::vector<double> inv_std(static_cast<size_t>(rows));
  const double* xd = x.data();
  const double* gm = gamma.data();
  const double* bt = beta.data();
  for (int64_t r = 0; r < rows; ++r) {
    const double* row = xd + r * h;
    double mean = 0.0;
    for (int64_t j = 0; j < h; ++j) mean += row[j];
    mean /= static_cast<double>(h);
    double var = 0.0;
    for (int64_t j = 0; j < h; ++j) {
      double d = row[j] - mean;
      var += d * d;
    }
    var /= static_cast<double>(h);
    double is = 1.0 / std::sqrt(var + eps);
    inv_std[static_cast<size_t>(r)] = is;
    double* xh = xhat.data() + r * h;
    double* orow = out.data() + r * h;
    for (int64_t j = 0; j < h; ++j) {
      xh[j] = (row[j] - mean) * is;
      orow[j] = xh[j] * gm[j] + bt[j];
    }
  }
  return make_op_result(
      x.shape(), std::move(out), {x, gamma, beta},
      [rows, h, xhat = std::move(xhat),
       inv_std = std::move(inv_std)](TensorNode& self) {
        const double* g = self.grad.data();
        const double* gm = self.parents[1]->data.data();
        double* gx = grad_of(self.parents[0]);
        double* ggamma = grad_of(self.parents[1]);
        double* gbeta = grad_of(self.parents[2]);
        for (int64_t r = 0; r < rows; ++r) {
          const double* grow = g + r * h;
          const double* xh = xhat.data() + r * h;
          if (ggamma) {
            for (int64_t j = 0; j < h; ++j) ggamma[j] += grow[j] * xh[j];
          }
          if (gbeta) {
            for (int64_t j = 0; j < h; ++j) gbeta[j] += grow[j];
          }
          if (gx) {
            double mean_gy = 0.0, mean_gy_xh = 0.0;
            for (int64_t j = 0; j < h; ++j) {
              double gy = grow[j] * gm[j];
              mean_gy += gy;
              mean_gy_xh += gy * xh[j];
            }
            mean_gy /= static_cast<double>(h);
            mean_gy_xh /= static_cast<double>(h);
            double is = inv_std[static_cast<size_t>(r)];
            double* gxrow = gx + r * h;
            for (int64_t j = 0; j < h; ++j) {
              double gy = grow[j] * gm[j];
              gxrow[j] += is * (gy - mean_gy - xh[j] * mean_gy_xh);
            }
          }
        }
      });
}

Tensor gelu(const Tensor& x) {
  std::vector<double> out(static_cast<size_t>(x.numel()));
  const double* xd = x.data();
  constexpr double inv_sqrt2 = 0.7071067811865475244;
  for (size_t i = 0; i < out.size(); ++i) {
    out[i] = 0.5 * xd[i] * (1.0 + std::erf(xd[i] * inv_sqrt2));
  }
  return make_op_result(x.shape(), std::move(out), {x}, [](TensorNode& self) {
    if (double* gx = grad_of(self.parents[0])) {
      const double* xd = self.parents[0]->data.data();
      const double* g = self.grad.data();
      constexpr double inv_sqrt2 = 0.7071067811865475244;
      const double inv_sqrt2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
      for (size_t i = 0; i < self.grad.size(); ++i) {
        double cdf = 0.5 * (1.0 + std::erf(xd[i] * inv_sqrt2));
        double pdf = inv_sqrt2pi * std::exp(-0.5 * xd[i] * xd[i]);
        gx[i] += g[i] * (cdf + xd[i] * pdf);
      }
    }
  });
}

Tensor embedding(const Tensor& table, std::span<const int32_t> ids,
                 Shape out_leading) {
  if (table.ndim() != 2) {
    throw DimensionError("embedding: table must be 2-D, got " +
                         shape_str(table.shape()));
  }
  int64_t v = table.dim(0), h = table.dim(1);
  if (shape_numel(out_leading) != static_cast<int64_t>(ids.size())) {
    throw DimensionError("embedding: leading shape " + shape_str(out_leading) +
                         " does not cover " + std::to_string(ids.size()) +
                         " ids");
  }
  std::vector<double> out(ids.size() * static_cast<size_t>(h));
  const double* td = table.data();
  for (size_t i = 0; i < ids.size(); ++i) {
    int32_t id = ids[i];
    if (id < 0 || id >= v) {
      throw DataError("embedding: token id " + std::to_string(id) +
                      " at position " + std::to_string(i) +
                      " outside vocab of size " + std::to_string(v));
    }
    std::memcpy(out.data() + i * static_cast<size_t>(h), td + id * h,
                static_cast<size_t>(h) * sizeof(double));
  }
  Shape out_shape(out_leading);
  out_shape.push_back(h);
  std::vector<int32_t> saved(ids.begin(), ids.end());
  return make_op_result(std::move(out_shape), std::move(out), {table},
                        [h, saved = std::move(saved)](TensorNode& self) {
                          if (double* gt = grad_of(self.parents[0])) {
                            const double* g = self.grad.data();
                            for (size_t i = 0; i < saved.size(); ++i) {
                              const double* grow = g + i * static_cast<size_t>(h);
                              double* trow = gt + saved[i] * h;
                              for (int64_t j = 0; j < h; ++j) trow[j] += grow[j];
                            }
                          }
                        });
}

Tensor take_position(const Tensor& x, int64_t position) {
  if (x.ndim() != 3 || position < 0 || position >= x.dim(1)) {
    throw DimensionError("take_position: position " + std::to_string(position) +
                         " invalid for " + shape_str(x.shape()));
  }
  int64_t b = x.dim(0), l = x.dim(1), h = x.dim(2);
  std::vector<double> out(static_cast<size_t>(b * h));
  const double* xd = x.data();
  for (int64_t i = 0; i < b; ++i) {
    std::memcpy(out.data() + i * h, xd + (i * l + position) * h,
                static_cast<size_t>(h) * sizeof(double));
  }
  return make_op_result({b, h}, std::move(out), {x},
                        [b, l, h, position](TensorNode& self) {
                          if (double* gx = grad_of(self.parents[0])) {
                            const double* g = self.grad.data();
                            for (int64_t i = 0; i < b; ++i) {
                              double* dst = gx + (i * l + position) * h;
                              const double* src = g + i * h;
                              for (int64_t j = 0; j < h; ++j) dst[j] += src[j];
                            }
                          }
                        });
}

Tensor reshape(const Tensor& x, Shape new_shape) {
  if (shape_numel(new_shape) != x.numel()) {
    throw DimensionError("reshape: cannot view " + shape_str(x.shape()) +
                         " as " + shape_str(new_shape));
  }
  std::vector<double> out(x.vec());
  return make_op_result(std::move(new_shape), std::move(out), {x},
                        [](TensorNode& self) {
                          if (double* gx = grad_of(self.parents[0])) {
                            for (size_t i = 0; i < self.grad.size(); ++i)
                              gx[i] += self.grad[i];
                          }
                        });
}

Tensor sum_all(const Tensor& x) {
  double s = 0.0;
  for (double v : x.vec()) s += v;
  return make_op_result({1}, {s}, {x}, [](TensorNode& self) {
    if (double* gx = grad_of(self.parents[0])) {
      double g = self.grad[0];
      for (size_t i = 0; i < self.parents[0]->data.size(); ++i) gx[i] += g;
    }
  });
}

Tensor mean_all(const Tensor& x) {
  double s = 0.0;
  for (double v : x.vec()) s += v;
  double inv = 1.0 / static_cast<double>(x.numel());
  return make_op_result({1}, {s * inv}, {x}, [inv](TensorNode& self) {
    if (double* gx = grad_of(self.parents[0])) {
      double g = self.grad[0] * inv;
      for (size_t i = 0; i < self.parents[0]->data.size(); ++i) gx[i] += g;
    }
  });
}

Tensor cross_entropy_with_logits(const Tensor& logits,
                                 std::span<const int32_t> labels) {
  if (logits.ndim() != 2 ||
      logits.dim(0) != static_cast<int64_t>(labels.size())) {
    throw DimensionError("cross_entropy: " + shape_str(logits.shape()) +
                         " vs " + std::to_string(labels.size()) + " labels");
  }
  int64_t n = logits.dim(0), c = logits.dim(1);
  const double* zd = logits.data();
  double total = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    int32_t y = labels[static_cast<size_t>(i)];
    if (y < 0 || y >= c) {
      throw DataError("cross_entropy: label " + std::to_string(y) +
                      " outside [0, " + std::to_string(c) + ") at row " +
                      std::to_string(i));
    }
    const double* row = zd + i * c;
    double mx = row[0];
    for (int64_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (int64_t j = 0; j < c; ++j) sum += std::exp(row[j] - mx);
    total += mx + std::log(sum) - row[y];
  }
  double val = total / static_cast<double>(n);
  std::vector<int32_t> saved(labels.begin(), labels.end());
  return make_op_result(
      {1}, {val}, {logits}, [n, c, saved = std::move(saved)](TensorNode& self) {
        if (double* gz = grad_of(self.parents[0])) {
          const double* zd = self.parents[0]->data.data();
          double g = self.grad[0] / static_cast<double>(n);
          for (int64_t i = 0; i < n; ++i) {
            const double* row = zd + i * c;
            double mx = row[0];
            for (int64_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
            double sum = 0.0;
            for (int64_t j = 0; j < c; ++j) sum += std::exp(row[j] - mx);
            double* grow = gz + i * c;
            for (int64_t j = 0; j < c; ++j) {
              double p = std::exp(row[j] - mx) / sum;
              grow[j] += g * p;
            }
            grow[saved[static_cast<size_t>(i)]] -= g;
          }
        }
      });
}

}  // namespace zskd
