#include "ahip/numerics/ops.hpp"

#include <cmath>
#include <numbers>
#include <unordered_set>

namespace ahip {

namespace {

template <typename Scalar>
void require_same_shape(const Var<Scalar>& a, const Var<Scalar>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
}

}  // namespace

template <typename Scalar>
void backward(const Var<Scalar>& root) {
  using N = Node<Scalar>;
  if (!root.requires_grad()) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<N*> order;
  std::unordered_set<N*> visited;
  std::vector<std::pair<N*, std::size_t>> stack{{root.node(), 0}};
  visited.insert(root.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      N* p = node->parents[next++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root.node()->grad_buffer().values().setOnes();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    N* node = *it;
    if (node->backward_fn && node->has_grad) {
      node->backward_fn(*node);
      node->grad = Tensor<Scalar>();
      node->has_grad = false;
    }
  }
}

template <typename Scalar>
Var<Scalar> matmul(const Var<Scalar>& a, const Var<Scalar>& b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  if (bv.rank() != 2 || av.rank() < 1 || av.cols() != bv.dim(0)) {
    throw DimensionError("matmul: inner dimensions disagree " + shape_string(av.shape()) +
                         " x " + shape_string(bv.shape()));
  }
  Shape out_shape = av.shape();
  out_shape.back() = bv.dim(1);
  Tensor<Scalar> out(out_shape);
  out.matrix().noalias() = av.matrix() * bv.matrix();
  return Var<Scalar>::from_op(std::move(out), {a, b}, [](Node<Scalar>& self) {
    auto& pa = self.parent(0);
    auto& pb = self.parent(1);
    const auto g = self.grad.matrix();
    if (pa.requires_grad) pa.grad_buffer().matrix().noalias() += g * pb.value.matrix().transpose();
    if (pb.requires_grad) pb.grad_buffer().matrix().noalias() += pa.value.matrix().transpose() * g;
  });
}

template <typename Scalar>
Var<Scalar> add(const Var<Scalar>& a, const Var<Scalar>& b) {
  require_same_shape(a, b, "add");
  Tensor<Scalar> out(a.shape());
  out.values() = a.value().values() + b.value().values();
  return Var<Scalar>::from_op(std::move(out), {a, b}, [](Node<Scalar>& self) {
    for (std::size_t i = 0; i < 2; ++i) {
      auto& p = self.parent(i);
      if (p.requires_grad) p.grad_buffer().values() += self.grad.values();
    }
  });
}

template <typename Scalar>
Var<Scalar> add_bias(const Var<Scalar>& x, const Var<Scalar>& bias) {
  if (bias.value().numel() != x.value().cols()) {
    throw DimensionError("add_bias: bias " + shape_string(bias.shape()) +
                         " does not match " + shape_string(x.shape()));
  }
  Tensor<Scalar> out = x.value();
  out.matrix().rowwise() += bias.value().values().transpose();
  return Var<Scalar>::from_op(std::move(out), {x, bias}, [](Node<Scalar>& self) {
    auto& px = self.parent(0);
    auto& pb = self.parent(1);
    if (px.requires_grad) px.grad_buffer().values() += self.grad.values();
    if (pb.requires_grad) {
      pb.grad_buffer().values() += self.grad.matrix().colwise().sum().transpose();
    }
  });
}

template <typename Scalar>
Var<Scalar> add_tiled(const Var<Scalar>& x, const Var<Scalar>& pattern) {
  const auto& xv = x.value();
  const auto& pv = pattern.value();
  const Index r = pv.rows();
  if (pv.cols() != xv.cols() || r == 0 || xv.rows() % r != 0) {
    throw DimensionError("add_tiled: pattern " + shape_string(pv.shape()) +
                         " does not tile " + shape_string(xv.shape()));
  }
  Tensor<Scalar> out = xv;
  auto om = out.matrix();
  for (Index g = 0; g < xv.rows() / r; ++g) om.middleRows(g * r, r) += pv.matrix();
  return Var<Scalar>::from_op(std::move(out), {x, pattern}, [r](Node<Scalar>& self) {
    auto& px = self.parent(0);
    auto& pp = self.parent(1);
    if (px.requires_grad) px.grad_buffer().values() += self.grad.values();
    if (pp.requires_grad) {
      auto gp = pp.grad_buffer().matrix();
      const auto g = self.grad.matrix();
      for (Index k = 0; k < g.rows() / r; ++k) gp += g.middleRows(k * r, r);
    }
  });
}

template <typename Scalar>
Var<Scalar> scale(const Var<Scalar>& x, Scalar factor) {
  Tensor<Scalar> out(x.shape());
  out.values() = x.value().values() * factor;
  return Var<Scalar>::from_op(std::move(out), {x}, [factor](Node<Scalar>& self) {
    self.parent(0).grad_buffer().values() += self.grad.values() * factor;
  });
}

template <typename Scalar>
Var<Scalar> scale_groups(const Var<Scalar>& x, const std::vector<Scalar>& factors) {
  const Index groups = static_cast<Index>(factors.size());
  const auto& xv = x.value();
  if (groups == 0 || xv.rows() % groups != 0) {
    throw DimensionError("scale_groups: " + std::to_string(groups) +
                         " groups do not divide " + shape_string(xv.shape()));
  }
  const Index r = xv.rows() / groups;
  Tensor<Scalar> out = xv;
  for (Index g = 0; g < groups; ++g) out.matrix().middleRows(g * r, r) *= factors[g];
  return Var<Scalar>::from_op(std::move(out), {x}, [factors, r](Node<Scalar>& self) {
    auto gx = self.parent(0).grad_buffer().matrix();
    const auto g = self.grad.matrix();
    for (std::size_t k = 0; k < factors.size(); ++k) {
      const Index row = static_cast<Index>(k) * r;
      gx.middleRows(row, r) += g.middleRows(row, r) * factors[k];
    }
  });
}

template <typename Scalar>
Var<Scalar> gelu(const Var<Scalar>& x) {
  const Scalar inv_sqrt2 = Scalar(1) / std::sqrt(Scalar(2));
  Tensor<Scalar> out(x.shape());
  out.values() = x.value().values().unaryExpr([inv_sqrt2](Scalar v) {
    return Scalar(0.5) * v * (Scalar(1) + std::erf(v * inv_sqrt2));
  });
  return Var<Scalar>::from_op(std::move(out), {x}, [inv_sqrt2](Node<Scalar>& self) {
    auto& px = self.parent(0);
    const Scalar inv_sqrt_2pi = Scalar(1) / std::sqrt(Scalar(2) * std::numbers::pi_v<Scalar>);
    const auto& xv = px.value.values();
    auto& gx = px.grad_buffer().values();
    const auto& g = self.grad.values();
    for (Index i = 0; i < xv.size(); ++i) {
      const Scalar v = xv[i];
      const Scalar cdf = Scalar(0.5) * (Scalar(1) + std::erf(v * inv_sqrt2));
      const Scalar pdf = inv_sqrt_2pi * std::exp(Scalar(-0.5) * v * v);
      gx[i] += g[i] * (cdf + v * pdf);
    }
  });
}

template <typename Scalar>
Var<Scalar> softmax(const Var<Scalar>& x, Index axis) {
  const auto& xv = x.value();
  const Index rank = xv.rank();
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank) {
    throw DimensionError("softmax: invalid axis for shape " + shape_string(xv.shape()));
  }
  Index outer = 1, inner = 1;
  for (Index i = 0; i < axis; ++i) outer *= xv.dim(i);
  for (Index i = axis + 1; i < rank; ++i) inner *= xv.dim(i);
  const Index n = xv.dim(axis);

  Tensor<Scalar> out(xv.shape());
  for (Index o = 0; o < outer; ++o) {
    for (Index j = 0; j < inner; ++j) {
      const Index base = o * n * inner + j;
      Scalar m = -std::numeric_limits<Scalar>::infinity();
      for (Index i = 0; i < n; ++i) m = std::max(m, xv[base + i * inner]);
      Scalar total = 0;
      for (Index i = 0; i < n; ++i) {
        const Scalar e = std::exp(xv[base + i * inner] - m);
        out[base + i * inner] = e;
        total += e;
      }
      for (Index i = 0; i < n; ++i) out[base + i * inner] /= total;
    }
  }
  Tensor<Scalar> saved = out;
  return Var<Scalar>::from_op(
      std::move(out), {x}, [saved = std::move(saved), outer, inner, n](Node<Scalar>& self) {
        auto& gx = self.parent(0).grad_buffer();
        const auto& g = self.grad;
        for (Index o = 0; o < outer; ++o) {
          for (Index j = 0; j < inner; ++j) {
            const Index base = o * n * inner + j;
            Scalar dot = 0;
            for (Index i = 0; i < n; ++i) dot += saved[base + i * inner] * g[base + i * inner];
            for (Index i = 0; i < n; ++i) {
              const Index at = base + i * inner;
              gx[at] += saved[at] * (g[at] - dot);
            }
          }
        }
      });
}

template <typename Scalar>
Var<Scalar> layernorm(const Var<Scalar>& x, const Var<Scalar>& gamma, const Var<Scalar>& beta,
                      Scalar eps) {
  const auto& xv = x.value();
  const Index n = xv.cols();
  if (gamma.value().numel() != n || beta.value().numel() != n) {
    throw DimensionError("layernorm: affine parameters do not match " +
                         shape_string(xv.shape()));
  }
  const Index rows = xv.rows();
  auto normed = std::make_shared<RowMatrix<Scalar>>(rows, n);
  auto rstd = std::make_shared<VectorX<Scalar>>(rows);
  const auto xm = xv.matrix();
  for (Index r = 0; r < rows; ++r) {
    const Scalar mean = xm.row(r).mean();
    const Scalar var = (xm.row(r).array() - mean).square().mean();
    (*rstd)[r] = Scalar(1) / std::sqrt(var + eps);
    normed->row(r) = (xm.row(r).array() - mean) * (*rstd)[r];
  }
  Tensor<Scalar> out(xv.shape());
  out.matrix() = (normed->array().rowwise() * gamma.value().values().transpose().array())
                     .rowwise() +
                 beta.value().values().transpose().array();
  return Var<Scalar>::from_op(
      std::move(out), {x, gamma, beta}, [normed, rstd, n](Node<Scalar>& self) {
        auto& px = self.parent(0);
        auto& pg = self.parent(1);
        auto& pb = self.parent(2);
        const auto g = self.grad.matrix();
        if (pg.requires_grad) {
          pg.grad_buffer().values() +=
              (g.array() * normed->array()).colwise().sum().matrix().transpose();
        }
        if (pb.requires_grad) pb.grad_buffer().values() += g.colwise().sum().transpose();
        if (px.requires_grad) {
          auto gx = px.grad_buffer().matrix();
          const auto gamma_row = pg.value.values().transpose().array();
          for (Index r = 0; r < g.rows(); ++r) {
            const auto dxhat = (g.row(r).array() * gamma_row).eval();
            const Scalar mean_d = dxhat.mean();
            const Scalar mean_dx = (dxhat * normed->row(r).array()).mean();
            gx.row(r).array() +=
                (*rstd)[r] * (dxhat - mean_d - normed->row(r).array() * mean_dx);
          }
        }
        (void)n;
      });
}

template <typename Scalar>
Var<Scalar> attention(const Var<Scalar>& q, const Var<Scalar>& k, const Var<Scalar>& v,
                      Index batch, Index heads) {
  require_same_shape(q, k, "attention");
  require_same_shape(q, v, "attention");
  const Index d = q.value().cols();
  if (batch <= 0 || heads <= 0 || d % heads != 0 || q.value().rows() % batch != 0) {
    throw DimensionError("attention: bad batch/head split for " + shape_string(q.shape()));
  }
  const Index len = q.value().rows() / batch;
  const Index dh = d / heads;
  const Scalar sc = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));

  // Probabilities for every (sample, head), stacked as [batch*heads*L, L].
  auto probs = std::make_shared<RowMatrix<Scalar>>(batch * heads * len, len);
  Tensor<Scalar> out(q.shape());
  const auto qm = q.value().matrix();
  const auto km = k.value().matrix();
  const auto vm = v.value().matrix();
  auto om = out.matrix();
  for (Index b = 0; b < batch; ++b) {
    for (Index h = 0; h < heads; ++h) {
      auto p = probs->middleRows((b * heads + h) * len, len);
      p.noalias() = qm.block(b * len, h * dh, len, dh) *
                    km.block(b * len, h * dh, len, dh).transpose();
      p *= sc;
      for (Index r = 0; r < len; ++r) {
        const Scalar m = p.row(r).maxCoeff();
        p.row(r) = (p.row(r).array() - m).exp();
        p.row(r) /= p.row(r).sum();
      }
      om.block(b * len, h * dh, len, dh).noalias() = p * vm.block(b * len, h * dh, len, dh);
    }
  }
  return Var<Scalar>::from_op(
      std::move(out), {q, k, v}, [probs, batch, heads, len, dh, sc](Node<Scalar>& self) {
        auto& pq = self.parent(0);
        auto& pk = self.parent(1);
        auto& pv = self.parent(2);
        const auto g = self.grad.matrix();
        const auto qm = pq.value.matrix();
        const auto km = pk.value.matrix();
        const auto vm = pv.value.matrix();
        RowMatrix<Scalar> dp(len, len);
        for (Index b = 0; b < batch; ++b) {
          for (Index h = 0; h < heads; ++h) {
            const auto p = probs->middleRows((b * heads + h) * len, len);
            const auto go = g.block(b * len, h * dh, len, dh);
            if (pv.requires_grad) {
              pv.grad_buffer().matrix().block(b * len, h * dh, len, dh).noalias() +=
                  p.transpose() * go;
            }
            if (!pq.requires_grad && !pk.requires_grad) continue;
            dp.noalias() = go * vm.block(b * len, h * dh, len, dh).transpose();
            for (Index r = 0; r < len; ++r) {
              const Scalar dot = p.row(r).dot(dp.row(r));
              dp.row(r) = p.row(r).array() * (dp.row(r).array() - dot);
            }
            dp *= sc;
            if (pq.requires_grad) {
              pq.grad_buffer().matrix().block(b * len, h * dh, len, dh).noalias() +=
                  dp * km.block(b * len, h * dh, len, dh);
            }
            if (pk.requires_grad) {
              pk.grad_buffer().matrix().block(b * len, h * dh, len, dh).noalias() +=
                  dp.transpose() * qm.block(b * len, h * dh, len, dh);
            }
          }
        }
      });
}

template <typename Scalar>
Tensor<Scalar> attention_weights(const Tensor<Scalar>& q, const Tensor<Scalar>& k, Index batch,
                                 Index heads) {
  const Index d = q.cols();
  const Index len = q.rows() / batch;
  const Index dh = d / heads;
  const Scalar sc = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));
  Tensor<Scalar> out(Shape{batch, heads, len, len});
  auto om = out.matrix();
  for (Index b = 0; b < batch; ++b) {
    for (Index h = 0; h < heads; ++h) {
      auto p = om.middleRows((b * heads + h) * len, len);
      p.noalias() = q.matrix().block(b * len, h * dh, len, dh) *
                    k.matrix().block(b * len, h * dh, len, dh).transpose();
      p *= sc;
      for (Index r = 0; r < len; ++r) {
        const Scalar m = p.row(r).maxCoeff();
        p.row(r) = (p.row(r).array() - m).exp();
        p.row(r) /= p.row(r).sum();
      }
    }
  }
  return out;
}

template <typename Scalar>
Var<Scalar> prepend_token(const Var<Scalar>& tokens, const Var<Scalar>& token, Index batch) {
  const auto& tv = tokens.value();
  const Index d = tv.cols();
  if (token.value().numel() != d || batch <= 0 || tv.rows() % batch != 0) {
    throw DimensionError("prepend_token: token " + shape_string(token.shape()) +
                         " incompatible with " + shape_string(tv.shape()));
  }
  const Index per = tv.rows() / batch;
  Tensor<Scalar> out(Shape{batch * (per + 1), d});
  auto om = out.matrix();
  for (Index b = 0; b < batch; ++b) {
    om.row(b * (per + 1)) = token.value().values().transpose();
    om.middleRows(b * (per + 1) + 1, per) = tv.matrix().middleRows(b * per, per);
  }
  return Var<Scalar>::from_op(std::move(out), {tokens, token}, [batch, per](Node<Scalar>& self) {
    auto& pt = self.parent(0);
    auto& pc = self.parent(1);
    const auto g = self.grad.matrix();
    for (Index b = 0; b < batch; ++b) {
      if (pc.requires_grad) pc.grad_buffer().values() += g.row(b * (per + 1)).transpose();
      if (pt.requires_grad) {
        pt.grad_buffer().matrix().middleRows(b * per, per) +=
            g.middleRows(b * (per + 1) + 1, per);
      }
    }
  });
}

template <typename Scalar>
Var<Scalar> select_token(const Var<Scalar>& x, Index batch, Index index) {
  const auto& xv = x.value();
  if (batch <= 0 || xv.rows() % batch != 0 || index < 0 || index >= xv.rows() / batch) {
    throw DimensionError("select_token: bad index for " + shape_string(xv.shape()));
  }
  const Index len = xv.rows() / batch;
  Tensor<Scalar> out(Shape{batch, xv.cols()});
  for (Index b = 0; b < batch; ++b) out.matrix().row(b) = xv.matrix().row(b * len + index);
  return Var<Scalar>::from_op(std::move(out), {x}, [len, index](Node<Scalar>& self) {
    auto gx = self.parent(0).grad_buffer().matrix();
    const auto g = self.grad.matrix();
    for (Index b = 0; b < g.rows(); ++b) gx.row(b * len + index) += g.row(b);
  });
}

template <typename Scalar>
Var<Scalar> cross_entropy_smoothed(const Var<Scalar>& logits, std::span<const int> labels,
                                   Scalar smoothing) {
  const auto& lv = logits.value();
  if (lv.rank() != 2 || static_cast<std::size_t>(lv.rows()) != labels.size()) {
    throw DimensionError("cross_entropy: logits " + shape_string(lv.shape()) + " vs " +
                         std::to_string(labels.size()) + " labels");
  }
  if (!(smoothing >= 0) || !(smoothing < 1)) {
    throw InputError("cross_entropy: smoothing must lie in [0, 1)");
  }
  const Index batch = lv.rows();
  const Index classes = lv.cols();
  for (int y : labels) {
    if (y < 0 || y >= classes) {
      throw InputError("cross_entropy: label " + std::to_string(y) + " outside [0, " +
                       std::to_string(classes) + ")");
    }
  }
  auto probs = std::make_shared<RowMatrix<Scalar>>(batch, classes);
  const Scalar off = smoothing / static_cast<Scalar>(classes);
  Scalar total = 0;
  for (Index b = 0; b < batch; ++b) {
    const auto row = lv.matrix().row(b);
    Index top = 0;
    const Scalar m = row.maxCoeff(&top);
    Scalar rest = 0;
    for (Index c = 0; c < classes; ++c) {
      if (c != top) rest += std::exp(row(c) - m);
    }
    const Scalar tail = std::log1p(rest);
    probs->row(b) = (row.array() - m - tail).exp();
    // -sum_c q_c log p_c with q = (1-s) onehot + s/C
    const Scalar nll_true = (m - row(labels[b])) + tail;
    const Scalar nll_mean = (m - row.mean()) + tail;
    total += (Scalar(1) - smoothing) * nll_true + smoothing * nll_mean;
  }
  Tensor<Scalar> out(Shape{1});
  out[0] = total / static_cast<Scalar>(batch);
  if (!std::isfinite(out[0])) throw NumericError("cross_entropy: non-finite loss");
  std::vector<int> kept(labels.begin(), labels.end());
  return Var<Scalar>::from_op(
      std::move(out), {logits}, [probs, kept = std::move(kept), smoothing, off](Node<Scalar>& self) {
        auto gx = self.parent(0).grad_buffer().matrix();
        const Scalar g = self.grad[0] / static_cast<Scalar>(probs->rows());
        for (Index b = 0; b < probs->rows(); ++b) {
          auto row = gx.row(b);
          row.array() += g * (probs->row(b).array() - off);
          row(kept[b]) -= g * (Scalar(1) - smoothing);
        }
      });
}

template <typename Scalar>
Var<Scalar> sum(const Var<Scalar>& x) {
  Tensor<Scalar> out(Shape{1});
  out[0] = x.value().values().sum();
  return Var<Scalar>::from_op(std::move(out), {x}, [](Node<Scalar>& self) {
    self.parent(0).grad_buffer().values().array() += self.grad[0];
  });
}

template <typename Scalar>
Var<Scalar> weighted_sum(const Var<Scalar>& x, const Tensor<Scalar>& weights) {
  if (weights.shape() != x.shape()) {
    throw DimensionError("weighted_sum: weights " + shape_string(weights.shape()) +
                         " vs " + shape_string(x.shape()));
  }
  Tensor<Scalar> out(Shape{1});
  out[0] = x.value().values().dot(weights.values());
  return Var<Scalar>::from_op(std::move(out), {x}, [weights](Node<Scalar>& self) {
    self.parent(0).grad_buffer().values() += self.grad[0] * weights.values();
  });
}

#define AHIP_INSTANTIATE_OPS(S)                                                          \
  template void backward<S>(const Var<S>&);                                              \
  template Var<S> matmul<S>(const Var<S>&, const Var<S>&);                               \
  template Var<S> add<S>(const Var<S>&, const Var<S>&);                                  \
  template Var<S> add_bias<S>(const Var<S>&, const Var<S>&);                             \
  template Var<S> add_tiled<S>(const Var<S>&, const Var<S>&);                            \
  template Var<S> scale<S>(const Var<S>&, S);                                            \
  template Var<S> scale_groups<S>(const Var<S>&, const std::vector<S>&);                 \
  template Var<S> gelu<S>(const Var<S>&);                                                \
  template Var<S> softmax<S>(const Var<S>&, Index);                                      \
  template Var<S> layernorm<S>(const Var<S>&, const Var<S>&, const Var<S>&, S);          \
  template Var<S> attention<S>(const Var<S>&, const Var<S>&, const Var<S>&, Index, Index); \
  template Tensor<S> attention_weights<S>(const Tensor<S>&, const Tensor<S>&, Index, Index); \
  template Var<S> prepend_token<S>(const Var<S>&, const Var<S>&, Index);                 \
  template Var<S> select_token<S>(const Var<S>&, Index, Index);                          \
  template Var<S> cross_entropy_smoothed<S>(const Var<S>&, std::span<const int>, S);     \
  template Var<S> sum<S>(const Var<S>&);                                                 \
  template Var<S> weighted_sum<S>(const Var<S>&, const Tensor<S>&);

AHIP_INSTANTIATE_OPS(float)
AHIP_INSTANTIATE_OPS(double)

}  // namespace ahip
