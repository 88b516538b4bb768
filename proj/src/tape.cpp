#include "splitlab/tape.hpp"

#include <cmath>

namespace splitlab {

Value Tape::record(Tensor value, bool needs_grad, BackFn back, const char* op) {
  require_finite(value, op);
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  if (needs_grad) n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Value{static_cast<int>(nodes_.size()) - 1};
}

Value Tape::leaf(Tensor t, bool requires_grad) {
  return record(std::move(t), requires_grad, nullptr, "leaf");
}

const Tensor& Tape::val(Value v) const {
  require(v.valid() && static_cast<std::size_t>(v.id) < nodes_.size(),
          "tape: invalid value handle");
  return nodes_[static_cast<std::size_t>(v.id)].value;
}

void Tape::accumulate(int id, const Tensor& g) {
  auto idx = static_cast<std::size_t>(id);
  if (!grad_set_[idx]) {
    grads_[idx] = g;
    grad_set_[idx] = 1;
  } else {
    for (std::size_t i = 0; i < g.numel(); ++i) grads_[idx].data[i] += g.data[i];
  }
}

void Tape::zero_grads() {
  grads_.assign(nodes_.size(), Tensor());
  grad_set_.assign(nodes_.size(), 0);
}

void Tape::run_backward(Value output, const Tensor& cotangent) {
  require(output.valid() && static_cast<std::size_t>(output.id) < nodes_.size(),
          "backward: output not on tape");
  zero_grads();
  accumulate(output.id, cotangent);
  for (int i = output.id; i >= 0; --i) {
    auto idx = static_cast<std::size_t>(i);
    if (grad_set_[idx] && nodes_[idx].back) nodes_[idx].back(*this, grads_[idx]);
  }
}

void Tape::backward(Value output) {
  require(val(output).numel() == 1, "backward: output must be scalar");
  run_backward(output, Tensor::scalar(1.0));
}

void Tape::backward_cotangent(Value output, const Tensor& cotangent) {
  require(val(output).same_shape(cotangent),
          "backward: cotangent shape mismatch");
  run_backward(output, cotangent);
}

bool Tape::has_grad(Value v) const {
  return v.valid() && static_cast<std::size_t>(v.id) < grad_set_.size() &&
         grad_set_[static_cast<std::size_t>(v.id)];
}

const Tensor& Tape::grad(Value v) const {
  require(has_grad(v), "grad: no gradient recorded for this value");
  return grads_[static_cast<std::size_t>(v.id)];
}

Value Tape::matmul(Value a, Value b) {
  Tensor out = t_matmul(val(a), val(b));
  bool ng = needs(a) || needs(b);
  int aid = a.id, bid = b.id;
  return record(std::move(out), ng,
                [aid, bid](Tape& tp, const Tensor& og) {
                  const Tensor& av = tp.nodes_[std::size_t(aid)].value;
                  const Tensor& bv = tp.nodes_[std::size_t(bid)].value;
                  if (tp.nodes_[std::size_t(aid)].needs_grad)
                    tp.accumulate(aid, t_matmul(og, t_transpose(bv)));
                  if (tp.nodes_[std::size_t(bid)].needs_grad)
                    tp.accumulate(bid, t_matmul(t_transpose(av), og));
                },
                "matmul");
}

Value Tape::add(Value a, Value b) {
  Tensor out = t_add(val(a), val(b));
  bool ng = needs(a) || needs(b);
  int aid = a.id, bid = b.id;
  return record(std::move(out), ng,
                [aid, bid](Tape& tp, const Tensor& og) {
                  if (tp.nodes_[std::size_t(aid)].needs_grad) tp.accumulate(aid, og);
                  if (tp.nodes_[std::size_t(bid)].needs_grad) tp.accumulate(bid, og);
                },
                "add");
}

Value Tape::sub(Value a, Value b) {
  Tensor out = t_sub(val(a), val(b));
  bool ng = needs(a) || needs(b);
  int aid = a.id, bid = b.id;
  return record(std::move(out), ng,
                [aid, bid](Tape& tp, const Tensor& og) {
                  if (tp.nodes_[std::size_t(aid)].needs_grad) tp.accumulate(aid, og);
                  if (tp.nodes_[std::size_t(bid)].needs_grad)
                    tp.accumulate(bid, t_scale(og, -1.0));
                },
                "sub");
}

Value Tape::mul(Value a, Value b) {
  Tensor out = t_mul(val(a), val(b));
  bool ng = needs(a) || needs(b);
  int aid = a.id, bid = b.id;
  return record(std::move(out), ng,
                [aid, bid](Tape& tp, const Tensor& og) {
                  const Tensor& av = tp.nodes_[std::size_t(aid)].value;
                  const Tensor& bv = tp.nodes_[std::size_t(bid)].value;
                  if (tp.nodes_[std::size_t(aid)].needs_grad)
                    tp.accumulate(aid, t_mul(og, bv));
                  if (tp.nodes_[std::size_t(bid)].needs_grad)
                    tp.accumulate(bid, t_mul(og, av));
                },
                "mul");
}

Value Tape::scale(Value a, double c) {
  Tensor out = t_scale(val(a), c);
  int aid = a.id;
  return record(std::move(out), needs(a),
                [aid, c](Tape& tp, const Tensor& og) {
                  tp.accumulate(aid, t_scale(og, c));
                },
                "scale");
}

Value Tape::sigmoid(Value a) {
  Tensor out = t_sigmoid(val(a));
  int aid = a.id;
  Tensor s = out;  // backward reads the recorded output via its own node
  Value v = record(std::move(out), needs(a), nullptr, "sigmoid");
  if (needs(a)) {
    int oid = v.id;
    nodes_[std::size_t(v.id)].back = [aid, oid](Tape& tp, const Tensor& og) {
      const Tensor& sv = tp.nodes_[std::size_t(oid)].value;
      Tensor g = og;
      for (std::size_t i = 0; i < g.numel(); ++i)
        g.data[i] *= sv.data[i] * (1.0 - sv.data[i]);
      tp.accumulate(aid, g);
    };
  }
  return v;
}

Value Tape::silu(Value a) {
  Tensor out = t_silu(val(a));
  int aid = a.id;
  return record(std::move(out), needs(a),
                [aid](Tape& tp, const Tensor& og) {
                  const Tensor& x = tp.nodes_[std::size_t(aid)].value;
                  Tensor g = og;
                  for (std::size_t i = 0; i < g.numel(); ++i) {
                    double s = 1.0 / (1.0 + std::exp(-x.data[i]));
                    g.data[i] *= s * (1.0 + x.data[i] * (1.0 - s));
                  }
                  tp.accumulate(aid, g);
                },
                "silu");
}

Value Tape::transpose(Value a) {
  Tensor out = t_transpose(val(a));
  int aid = a.id;
  return record(std::move(out), needs(a),
                [aid](Tape& tp, const Tensor& og) {
                  tp.accumulate(aid, t_transpose(og));
                },
                "transpose");
}

Value Tape::softmax_causal(Value scores) {
  Tensor out = t_softmax_causal(val(scores));
  int sid = scores.id;
  Value v = record(std::move(out), needs(scores), nullptr, "softmax_causal");
  if (needs(scores)) {
    int oid = v.id;
    nodes_[std::size_t(v.id)].back = [sid, oid](Tape& tp, const Tensor& og) {
      const Tensor& y = tp.nodes_[std::size_t(oid)].value;
      std::size_t n = y.rows();
      Tensor g({n, n});
      for (std::size_t i = 0; i < n; ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j <= i; ++j) dot += og.at(i, j) * y.at(i, j);
        for (std::size_t j = 0; j <= i; ++j)
          g.at(i, j) = y.at(i, j) * (og.at(i, j) - dot);
      }
      tp.accumulate(sid, g);
    };
  }
  return v;
}

Value Tape::rmsnorm(Value x, Value gains) {
  Tensor out = t_rmsnorm(val(x), val(gains));
  bool ng = needs(x) || needs(gains);
  int xid = x.id, gid = gains.id;
  return record(
      std::move(out), ng,
      [xid, gid](Tape& tp, const Tensor& og) {
        const Tensor& xv = tp.nodes_[std::size_t(xid)].value;
        const Tensor& gv = tp.nodes_[std::size_t(gid)].value;
        std::size_t r = xv.rows(), c = xv.cols();
        bool wx = tp.nodes_[std::size_t(xid)].needs_grad;
        bool wg = tp.nodes_[std::size_t(gid)].needs_grad;
        Tensor gx({r, c});
        Tensor gg({c});
        for (std::size_t i = 0; i < r; ++i) {
          double ms = 0.0;
          for (std::size_t j = 0; j < c; ++j) ms += xv.at(i, j) * xv.at(i, j);
          double m2 = ms / static_cast<double>(c) + kRmsEps;
          double inv = 1.0 / std::sqrt(m2);
          double proj = 0.0;  // sum_j og_ij * g_j * x_ij
          for (std::size_t j = 0; j < c; ++j)
            proj += og.at(i, j) * gv[j] * xv.at(i, j);
          for (std::size_t j = 0; j < c; ++j) {
            if (wx)
              gx.at(i, j) =
                  inv * (og.at(i, j) * gv[j] -
                         xv.at(i, j) * proj / (static_cast<double>(c) * m2));
            if (wg) gg[j] += og.at(i, j) * xv.at(i, j) * inv;
          }
        }
        if (wx) tp.accumulate(xid, gx);
        if (wg) tp.accumulate(gid, gg);
      },
      "rmsnorm");
}

Value Tape::row_select(Value table, std::vector<int> ids) {
  Tensor out = t_row_select(val(table), ids);
  int tid = table.id;
  return record(std::move(out), needs(table),
                [tid, ids = std::move(ids)](Tape& tp, const Tensor& og) {
                  const Tensor& tv = tp.nodes_[std::size_t(tid)].value;
                  Tensor g({tv.rows(), tv.cols()});
                  for (std::size_t i = 0; i < ids.size(); ++i)
                    for (std::size_t j = 0; j < tv.cols(); ++j)
                      g.at(static_cast<std::size_t>(ids[i]), j) += og.at(i, j);
                  tp.accumulate(tid, g);
                },
                "row_select");
}

Value Tape::slice_rows(Value a, std::size_t start, std::size_t count) {
  Tensor out = t_slice_rows(val(a), start, count);
  int aid = a.id;
  return record(std::move(out), needs(a),
                [aid, start, count](Tape& tp, const Tensor& og) {
                  const Tensor& av = tp.nodes_[std::size_t(aid)].value;
                  Tensor g({av.rows(), av.cols()});
                  for (std::size_t i = 0; i < count; ++i)
                    for (std::size_t j = 0; j < av.cols(); ++j)
                      g.at(start + i, j) = og.at(i, j);
                  tp.accumulate(aid, g);
                },
                "slice_rows");
}

Value Tape::slice_cols(Value a, std::size_t start, std::size_t count) {
  Tensor out = t_slice_cols(val(a), start, count);
  int aid = a.id;
  return record(std::move(out), needs(a),
                [aid, start, count](Tape& tp, const Tensor& og) {
                  const Tensor& av = tp.nodes_[std::size_t(aid)].value;
                  Tensor g({av.rows(), av.cols()});
                  for (std::size_t i = 0; i < av.rows(); ++i)
                    for (std::size_t j = 0; j < count; ++j)
                      g.at(i, start + j) = og.at(i, j);
                  tp.accumulate(aid, g);
                },
                "slice_cols");
}

Value Tape::concat_cols(std::vector<Value> parts) {
  std::vector<Tensor> tensors;
  tensors.reserve(parts.size());
  bool ng = false;
  for (Value p : parts) {
    tensors.push_back(val(p));
    ng = ng || needs(p);
  }
  Tensor out = t_concat_cols(tensors);
  std::vector<int> pids;
  std::vector<std::size_t> widths;
  for (Value p : parts) {
    pids.push_back(p.id);
    widths.push_back(val(p).cols());
  }
  return record(std::move(out), ng,
                [pids, widths](Tape& tp, const Tensor& og) {
                  std::size_t off = 0;
                  for (std::size_t k = 0; k < pids.size(); ++k) {
                    if (tp.nodes_[std::size_t(pids[k])].needs_grad)
                      tp.accumulate(pids[k], t_slice_cols(og, off, widths[k]));
                    off += widths[k];
                  }
                },
                "concat_cols");
}

Value Tape::reshape(Value a, std::vector<std::size_t> shape) {
  Tensor out = t_reshape(val(a), shape);
  int aid = a.id;
  return record(std::move(out), needs(a),
                [aid](Tape& tp, const Tensor& og) {
                  const Tensor& av = tp.nodes_[std::size_t(aid)].value;
                  tp.accumulate(aid, t_reshape(og, av.shape));
                },
                "reshape");
}

Value Tape::sum(Value a) {
  Tensor out = Tensor::scalar(t_sum(val(a)));
  int aid = a.id;
  return record(std::move(out), needs(a),
                [aid](Tape& tp, const Tensor& og) {
                  const Tensor& av = tp.nodes_[std::size_t(aid)].value;
                  Tensor g = av;
                  for (double& v : g.data) v = og.data[0];
                  tp.accumulate(aid, g);
                },
                "sum");
}

Value Tape::cosine_distance(Value a, Value b) {
  Tensor out = Tensor::scalar(cosine_row_distance(val(a), val(b)));
  bool ng = needs(a) || needs(b);
  int aid = a.id, bid = b.id;
  return record(
      std::move(out), ng,
      [aid, bid](Tape& tp, const Tensor& og) {
        const Tensor& av = tp.nodes_[std::size_t(aid)].value;
        const Tensor& bv = tp.nodes_[std::size_t(bid)].value;
        std::size_t r = av.rows(), c = av.cols();
        double w = og.data[0] / static_cast<double>(r);
        bool wa = tp.nodes_[std::size_t(aid)].needs_grad;
        bool wb = tp.nodes_[std::size_t(bid)].needs_grad;
        Tensor ga({r, c}), gb({r, c});
        for (std::size_t i = 0; i < r; ++i) {
          double dot = 0.0, na = 0.0, nb = 0.0;
          for (std::size_t j = 0; j < c; ++j) {
            dot += av.at(i, j) * bv.at(i, j);
            na += av.at(i, j) * av.at(i, j);
            nb += bv.at(i, j) * bv.at(i, j);
          }
          if (na == 0.0 || nb == 0.0) continue;  // flat segment, zero grad
          double s = std::sqrt(na * nb);
          for (std::size_t j = 0; j < c; ++j) {
            if (wa)
              ga.at(i, j) =
                  -w * (bv.at(i, j) / s - dot * av.at(i, j) / (s * na));
            if (wb)
              gb.at(i, j) =
                  -w * (av.at(i, j) / s - dot * bv.at(i, j) / (s * nb));
          }
        }
        if (wa) tp.accumulate(aid, ga);
        if (wb) tp.accumulate(bid, gb);
      },
      "cosine_distance");
}

Value Tape::euclidean_distance(Value a, Value b) {
  Tensor out = Tensor::scalar(euclidean_row_distance(val(a), val(b)));
  bool ng = needs(a) || needs(b);
  int aid = a.id, bid = b.id;
  return record(std::move(out), ng,
                [aid, bid](Tape& tp, const Tensor& og) {
                  const Tensor& av = tp.nodes_[std::size_t(aid)].value;
                  const Tensor& bv = tp.nodes_[std::size_t(bid)].value;
                  double w = 2.0 * og.data[0] / static_cast<double>(av.rows());
                  Tensor d = t_scale(t_sub(av, bv), w);
                  if (tp.nodes_[std::size_t(aid)].needs_grad) tp.accumulate(aid, d);
                  if (tp.nodes_[std::size_t(bid)].needs_grad)
                    tp.accumulate(bid, t_scale(d, -1.0));
                },
                "euclidean_distance");
}

Value Tape::cross_entropy_next(Value logits, std::vector<int> targets) {
  const Tensor& lv = val(logits);
  std::size_t L = lv.rows(), V = lv.cols();
  require(targets.size() == L, "cross_entropy: target length mismatch");
  require(L >= 2, "cross_entropy: need at least two tokens");
  std::size_t n = L - 1;
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    int t = targets[i + 1];
    require(t >= 0 && static_cast<std::size_t>(t) < V,
            "cross_entropy: target out of range");
    double mx = lv.at(i, 0);
    for (std::size_t j = 1; j < V; ++j) mx = std::max(mx, lv.at(i, j));
    double denom = 0.0;
    for (std::size_t j = 0; j < V; ++j) denom += std::exp(lv.at(i, j) - mx);
    loss += mx + std::log(denom) - lv.at(i, static_cast<std::size_t>(t));
  }
  loss /= static_cast<double>(n);
  int lid = logits.id;
  return record(Tensor::scalar(loss), needs(logits),
                [lid, targets = std::move(targets)](Tape& tp, const Tensor& og) {
                  const Tensor& l = tp.nodes_[std::size_t(lid)].value;
                  std::size_t L2 = l.rows(), V2 = l.cols(), n2 = L2 - 1;
                  double w = og.data[0] / static_cast<double>(n2);
                  Tensor g({L2, V2});
                  for (std::size_t i = 0; i < n2; ++i) {
                    double mx = l.at(i, 0);
                    for (std::size_t j = 1; j < V2; ++j)
                      mx = std::max(mx, l.at(i, j));
                    double denom = 0.0;
                    for (std::size_t j = 0; j < V2; ++j)
                      denom += std::exp(l.at(i, j) - mx);
                    for (std::size_t j = 0; j < V2; ++j)
                      g.at(i, j) = w * std::exp(l.at(i, j) - mx) / denom;
                    g.at(i, static_cast<std::size_t>(targets[i + 1])) -= w;
                  }
                  tp.accumulate(lid, g);
                },
                "cross_entropy");
}

Value Tape::forward_op(OpKind kind, const std::vector<Value>& inputs,
                       const std::vector<int>& aux_ids,
                       const std::vector<std::size_t>& aux_shape,
                       double aux_scalar) {
  switch (kind) {
    case OpKind::Matmul:
      return matmul(inputs.at(0), inputs.at(1));
    case OpKind::Add:
      return add(inputs.at(0), inputs.at(1));
    case OpKind::Mul:
      return mul(inputs.at(0), inputs.at(1));
    case OpKind::Sigmoid:
      return sigmoid(inputs.at(0));
    case OpKind::SoftmaxCausal:
      return softmax_causal(inputs.at(0));
    case OpKind::RmsNorm:
      return rmsnorm(inputs.at(0), inputs.at(1));
    case OpKind::RowSelect:
      return row_select(inputs.at(0), aux_ids);
    case OpKind::Reshape:
      return reshape(inputs.at(0), aux_shape);
    case OpKind::Scale:
      return scale(inputs.at(0), aux_scalar);
    case OpKind::Sum:
      return sum(inputs.at(0));
    case OpKind::CosineDistance:
      return cosine_distance(inputs.at(0), inputs.at(1));
  }
  throw Error("forward_op: unknown primitive");
}

Tensor jacobian(const std::function<Value(Tape&, Value)>& f, const Tensor& z,
                std::size_t dim_cap) {
  Tape tape;
  Value zv = tape.leaf(z, true);
  Value out = f(tape, zv);
  std::size_t n = z.numel();
  std::size_t m = tape.val(out).numel();
  require(n <= dim_cap && m <= dim_cap, "jacobian: dimension cap exceeded");
  Tensor J({n, m});
  Tensor cot = tape.val(out);
  for (double& v : cot.data) v = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    cot.data[j] = 1.0;
    tape.backward_cotangent(out, cot);
    cot.data[j] = 0.0;
    const Tensor& g = tape.grad(zv);
    for (std::size_t i = 0; i < n; ++i) J.at(i, j) = g.data[i];
  }
  require_finite(J, "jacobian");
  return J;
}

}  // namespace splitlab
