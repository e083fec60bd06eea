#include "ilac/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ilac/errors.hpp"

namespace ilac {

namespace {

Tape& tape_of(Var v) {
  if (v.tape == nullptr) throw ContractError("variable is not attached to a tape");
  return *v.tape;
}

Tape& common_tape(Var a, Var b) {
  if (a.tape != b.tape) throw ContractError("operands recorded on different tapes");
  return tape_of(a);
}

bool is_scalar(const Tensor& t) { return t.rank() == 0; }

void require_matrix(const Tensor& t, const char* op) {
  if (t.rank() != 2) throw DimensionError(std::string(op) + " expects a matrix, got " + shape_string(t.shape()));
}

// Four independent accumulators so the loop vectorizes without reassociation flags.
double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <class Fwd, class Deriv>
Var unary(Var x, Fwd fwd, Deriv deriv_from_output) {
  Tape& tape = tape_of(x);
  const Tensor& in = x.value();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(in[i]);
  Tensor result(in.shape(), std::move(out));
  auto saved = result;
  return tape.record(std::move(result), {x.id}, [id = x.id, saved, deriv_from_output](auto g, GradSink& sink) {
    if (double* gx = sink(id)) {
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * deriv_from_output(saved[i]);
    }
  });
}

enum class BinaryKind { kAdd, kSub, kMul };

Var binary(Var a, Var b, BinaryKind kind, const char* name) {
  Tape& tape = common_tape(a, b);
  const Tensor& ta = a.value();
  const Tensor& tb = b.value();
  const bool a_scalar = is_scalar(ta) && !is_scalar(tb);
  const bool b_scalar = is_scalar(tb) && !is_scalar(ta);
  if (!a_scalar && !b_scalar && ta.shape() != tb.shape()) {
    throw DimensionError(std::string(name) + ": incompatible shapes " + shape_string(ta.shape()) + " and " +
                         shape_string(tb.shape()));
  }
  const Shape& out_shape = a_scalar ? tb.shape() : ta.shape();
  const std::size_t n = shape_size(out_shape);
  auto va = [&](std::size_t i) { return a_scalar ? ta[0] : ta[i]; };
  auto vb = [&](std::size_t i) { return b_scalar ? tb[0] : tb[i]; };
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    switch (kind) {
      case BinaryKind::kAdd: out[i] = va(i) + vb(i); break;
      case BinaryKind::kSub: out[i] = va(i) - vb(i); break;
      case BinaryKind::kMul: out[i] = va(i) * vb(i); break;
    }
  }
  return tape.record(Tensor(out_shape, std::move(out)), {a.id, b.id},
                     [ia = a.id, ib = b.id, ta, tb, a_scalar, b_scalar, kind](auto g, GradSink& sink) {
                       double* ga = sink(ia);
                       double* gb = sink(ib);
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         double da = 0, db = 0;
                         switch (kind) {
                           case BinaryKind::kAdd: da = g[i]; db = g[i]; break;
                           case BinaryKind::kSub: da = g[i]; db = -g[i]; break;
                           case BinaryKind::kMul:
                             da = g[i] * (b_scalar ? tb[0] : tb[i]);
                             db = g[i] * (a_scalar ? ta[0] : ta[i]);
                             break;
                         }
                         if (ga) ga[a_scalar ? 0 : i] += da;
                         if (gb) gb[b_scalar ? 0 : i] += db;
                       }
                     });
}

}  // namespace

// ---- Var / GradSink / Gradients --------------------------------------------

const Tensor& Var::value() const { return tape_of(*this).value(id); }

double* GradSink::operator()(std::size_t node_id) {
  if (!tape_.requires_grad(node_id)) return nullptr;
  auto& buf = grads_[node_id];
  if (buf.empty()) buf.assign(tape_.value(node_id).size(), 0.0);
  return buf.data();
}

Tensor Gradients::of(Var v) const {
  if (v.tape != tape_) throw ContractError("gradient requested for a value from another tape");
  const Tensor& value = tape_->value(v.id);
  if (v.id >= grads_.size() || grads_[v.id].empty()) return Tensor::zeros(value.shape());
  return Tensor(value.shape(), grads_[v.id]);
}

bool Gradients::has(Var v) const { return v.tape == tape_ && v.id < grads_.size() && !grads_[v.id].empty(); }

// ---- Tape --------------------------------------------------------------------

Var Tape::leaf(const Tensor& value) {
  nodes_.push_back(Node{value, {}, nullptr, value.requires_grad()});
  return Var{this, nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward) {
  bool needs = false;
  for (auto id : inputs) needs = needs || nodes_[id].requires_grad;
  nodes_.push_back(Node{std::move(value), std::move(inputs), needs ? std::move(backward) : nullptr, needs});
  return Var{this, nodes_.size() - 1};
}

Gradients Tape::backward(Var loss) const {
  if (loss.tape != this) throw ContractError("loss was not recorded on this tape");
  const Tensor& lv = value(loss.id);
  if (lv.size() != 1) throw ContractError("backward needs a scalar loss, got shape " + shape_string(lv.shape()));

  Gradients out;
  out.tape_ = this;
  out.grads_.resize(loss.id + 1);
  if (!nodes_[loss.id].requires_grad) return out;
  out.grads_[loss.id] = {1.0};

  GradSink sink(*this, out.grads_);
  for (std::size_t k = loss.id + 1; k-- > 0;) {
    const Node& node = nodes_[k];
    if (!node.backward || out.grads_[k].empty()) continue;
    // Inputs always precede k, so the sink never reallocates this buffer.
    node.backward(std::span<const double>(out.grads_[k]), sink);
  }
  // Only leaves keep their gradients; intermediates are released.
  for (std::size_t k = 0; k < out.grads_.size(); ++k) {
    if (nodes_[k].backward) std::vector<double>().swap(out.grads_[k]);
  }
  return out;
}

// ---- linear algebra --------------------------------------------------------

Var matmul(Var a, Var b) {
  Tape& tape = common_tape(a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  require_matrix(A, "matmul");
  require_matrix(B, "matmul");
  const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
  if (B.rows() != k) {
    throw DimensionError("matmul: inner dimensions disagree for " + shape_string(A.shape()) + " x " +
                         shape_string(B.shape()));
  }
  std::vector<double> out(m * n, 0.0);
  const double* pa = A.data().data();
  const double* pb = B.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) axpy(pa[i * k + p], pb + p * n, out.data() + i * n, n);
  }
  return tape.record(Tensor({m, n}, std::move(out)), {a.id, b.id}, [ia = a.id, ib = b.id, A, B, m, k, n](auto g, GradSink& sink) {
    const double* pa = A.data().data();
    const double* pb = B.data().data();
    if (double* ga = sink(ia)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) ga[i * k + p] += dot(g.data() + i * n, pb + p * n, n);
    }
    if (double* gb = sink(ib)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) axpy(pa[i * k + p], g.data() + i * n, gb + p * n, n);
    }
  });
}

namespace {

Var linear_impl(Var x, Var weight, const Var* bias) {
  Tape& tape = common_tape(x, weight);
  const Tensor& X = x.value();
  const Tensor& W = weight.value();
  require_matrix(X, "linear");
  require_matrix(W, "linear");
  const std::size_t m = X.rows(), in = X.cols(), out_dim = W.rows();
  if (W.cols() != in) {
    throw DimensionError("linear: input " + shape_string(X.shape()) + " does not fit weight " +
                         shape_string(W.shape()));
  }
  Tensor B;
  if (bias) {
    common_tape(x, *bias);
    B = bias->value();
    if (B.rank() != 1 || B.size() != out_dim) {
      throw DimensionError("linear: bias " + shape_string(B.shape()) + " does not fit weight " +
                           shape_string(W.shape()));
    }
  }
  std::vector<double> out(m * out_dim);
  const double* px = X.data().data();
  const double* pw = W.data().data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t o = 0; o < out_dim; ++o)
      out[i * out_dim + o] = dot(px + i * in, pw + o * in, in) + (bias ? B[o] : 0.0);

  std::vector<std::size_t> inputs{x.id, weight.id};
  if (bias) inputs.push_back(bias->id);
  const std::size_t ib = bias ? bias->id : 0;
  const bool has_bias = bias != nullptr;
  return tape.record(Tensor({m, out_dim}, std::move(out)), std::move(inputs),
                     [ix = x.id, iw = weight.id, ib, has_bias, X, W, m, in, out_dim](auto g, GradSink& sink) {
                       const double* px = X.data().data();
                       const double* pw = W.data().data();
                       if (double* gx = sink(ix)) {
                         for (std::size_t i = 0; i < m; ++i)
                           for (std::size_t o = 0; o < out_dim; ++o) axpy(g[i * out_dim + o], pw + o * in, gx + i * in, in);
                       }
                       if (double* gw = sink(iw)) {
                         for (std::size_t i = 0; i < m; ++i)
                           for (std::size_t o = 0; o < out_dim; ++o) axpy(g[i * out_dim + o], px + i * in, gw + o * in, in);
                       }
                       if (has_bias) {
                         if (double* gb = sink(ib)) {
                           for (std::size_t i = 0; i < m; ++i)
                             for (std::size_t o = 0; o < out_dim; ++o) gb[o] += g[i * out_dim + o];
                         }
                       }
                     });
}

}  // namespace

Var linear(Var x, Var weight) { return linear_impl(x, weight, nullptr); }
Var linear(Var x, Var weight, Var bias) { return linear_impl(x, weight, &bias); }

Var concat(std::initializer_list<Var> parts, std::size_t axis) {
  return concat(std::span<const Var>(parts.begin(), parts.size()), axis);
}

Var concat(std::span<const Var> parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat: no parts");
  Tape& tape = tape_of(parts[0]);
  const Shape& first = parts[0].shape();
  if (axis >= first.size()) throw DimensionError("concat: axis out of range for " + shape_string(first));
  for (const auto& p : parts) {
    common_tape(parts[0], p);
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t d = 0; ok && d < s.size(); ++d) ok = d == axis || s[d] == first[d];
    if (!ok) throw DimensionError("concat: part " + shape_string(s) + " does not match " + shape_string(first) +
                                  " off axis " + std::to_string(axis));
  }
  // View every tensor as [outer x (len_axis * inner)] and copy row blocks.
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= first[d];
  for (std::size_t d = axis + 1; d < first.size(); ++d) inner *= first[d];
  std::vector<std::size_t> widths;
  std::size_t total_axis = 0;
  for (const auto& p : parts) {
    widths.push_back(p.shape()[axis] * inner);
    total_axis += p.shape()[axis];
  }
  const std::size_t row_width = total_axis * inner;
  std::vector<double> out(outer * row_width);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const double* src = parts[k].value().data().data();
    for (std::size_t r = 0; r < outer; ++r)
      std::copy_n(src + r * widths[k], widths[k], out.data() + r * row_width + offset);
    offset += widths[k];
  }
  Shape shape = first;
  shape[axis] = total_axis;
  std::vector<std::size_t> ids;
  for (const auto& p : parts) ids.push_back(p.id);
  auto ids_copy = ids;
  return tape.record(Tensor(std::move(shape), std::move(out)), std::move(ids),
                     [ids = std::move(ids_copy), widths, outer, row_width](auto g, GradSink& sink) {
                       std::size_t offset = 0;
                       for (std::size_t k = 0; k < ids.size(); ++k) {
                         if (double* gp = sink(ids[k])) {
                           for (std::size_t r = 0; r < outer; ++r)
                             axpy(1.0, g.data() + r * row_width + offset, gp + r * widths[k], widths[k]);
                         }
                         offset += widths[k];
                       }
                     });
}

Var gather_rows(Var x, std::vector<std::size_t> rows) {
  Tape& tape = tape_of(x);
  const Tensor& X = x.value();
  require_matrix(X, "gather_rows");
  const std::size_t n = X.rows(), d = X.cols();
  if (rows.empty()) throw DimensionError("gather_rows: empty index list");
  std::vector<double> out(rows.size() * d);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k] >= n) throw IndexError("gather_rows: row " + std::to_string(rows[k]) + " out of " + std::to_string(n));
    std::copy_n(X.data().data() + rows[k] * d, d, out.data() + k * d);
  }
  const std::size_t m = rows.size();
  return tape.record(Tensor({m, d}, std::move(out)), {x.id}, [ix = x.id, rows = std::move(rows), d](auto g, GradSink& sink) {
    if (double* gx = sink(ix)) {
      for (std::size_t k = 0; k < rows.size(); ++k) axpy(1.0, g.data() + k * d, gx + rows[k] * d, d);
    }
  });
}

Var reshape(Var x, Shape shape) {
  Tape& tape = tape_of(x);
  Tensor out = x.value().reshaped(std::move(shape));
  return tape.record(std::move(out), {x.id}, [ix = x.id](auto g, GradSink& sink) {
    if (double* gx = sink(ix)) axpy(1.0, g.data(), gx, g.size());
  });
}

// ---- elementwise -----------------------------------------------------------

Var tanh(Var x) {
  return unary(x, [](double v) { return std::tanh(v); }, [](double y) { return 1.0 - y * y; });
}

Var sigmoid(Var x) {
  return unary(
      x,
      [](double v) {
        if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double y) { return y * (1.0 - y); });
}

Var add(Var a, Var b) { return binary(a, b, BinaryKind::kAdd, "add"); }
Var sub(Var a, Var b) { return binary(a, b, BinaryKind::kSub, "sub"); }
Var mul(Var a, Var b) { return binary(a, b, BinaryKind::kMul, "mul"); }

Var scale(Var x, double factor) {
  Tape& tape = tape_of(x);
  const Tensor& in = x.value();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = in[i] * factor;
  return tape.record(Tensor(in.shape(), std::move(out)), {x.id}, [ix = x.id, factor](auto g, GradSink& sink) {
    if (double* gx = sink(ix)) axpy(factor, g.data(), gx, g.size());
  });
}

Var sum(Var x) {
  Tape& tape = tape_of(x);
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  return tape.record(Tensor::scalar(s), {x.id}, [ix = x.id, n = x.value().size()](auto g, GradSink& sink) {
    if (double* gx = sink(ix))
      for (std::size_t i = 0; i < n; ++i) gx[i] += g[0];
  });
}

Var mean(Var x) { return scale(sum(x), 1.0 / static_cast<double>(x.value().size())); }

// ---- softmax / cross entropy ------------------------------------------------

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) throw DomainError("log_sum_exp of an empty vector");
  const double mx = *std::max_element(values.begin(), values.end());
  double s = 0.0;
  for (double v : values) s += std::exp(v - mx);
  return mx + std::log(s);
}

std::vector<double> softmax_values(std::span<const double> scores) {
  if (scores.empty()) throw DomainError("softmax of an empty vector");
  const double mx = *std::max_element(scores.begin(), scores.end());
  std::vector<double> out(scores.size());
  double s = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) s += (out[i] = std::exp(scores[i] - mx));
  for (double& v : out) v /= s;
  return out;
}

Var softmax(Var scores) {
  Tape& tape = tape_of(scores);
  const Tensor& in = scores.value();
  if (in.rank() != 1) throw DimensionError("softmax expects a vector, got " + shape_string(in.shape()));
  Tensor out(in.shape(), softmax_values(in.data()));
  auto saved = out;
  return tape.record(std::move(out), {scores.id}, [ix = scores.id, saved](auto g, GradSink& sink) {
    if (double* gx = sink(ix)) {
      double inner = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) inner += g[i] * saved[i];
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += saved[i] * (g[i] - inner);
    }
  });
}

Var cross_entropy(Var logits, std::size_t target) {
  if (logits.value().rank() != 1) {
    throw DimensionError("cross_entropy expects a vector, got " + shape_string(logits.shape()));
  }
  const std::size_t n = logits.value().size();
  std::vector<std::size_t> t{target};
  return cross_entropy_mean(reshape(logits, {1, n}), t);
}

Var cross_entropy_mean(Var logits, std::span<const std::size_t> targets) {
  Tape& tape = tape_of(logits);
  const Tensor& L = logits.value();
  require_matrix(L, "cross_entropy_mean");
  const std::size_t m = L.rows(), n = L.cols();
  if (targets.size() != m) {
    throw DimensionError("cross_entropy_mean: " + std::to_string(targets.size()) + " targets for " +
                         shape_string(L.shape()) + " logits");
  }
  std::vector<double> probs(m * n);
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    if (targets[i] >= n) {
      throw IndexError("cross_entropy target " + std::to_string(targets[i]) + " outside [0, " + std::to_string(n) + ")");
    }
    auto row = L.data().subspan(i * n, n);
    total += log_sum_exp(row) - row[targets[i]];
    auto p = softmax_values(row);
    std::copy(p.begin(), p.end(), probs.begin() + static_cast<std::ptrdiff_t>(i * n));
  }
  std::vector<std::size_t> tgt(targets.begin(), targets.end());
  return tape.record(Tensor::scalar(total / static_cast<double>(m)), {logits.id},
                     [ix = logits.id, probs = std::move(probs), tgt = std::move(tgt), m, n](auto g, GradSink& sink) {
                       if (double* gx = sink(ix)) {
                         const double w = g[0] / static_cast<double>(m);
                         for (std::size_t i = 0; i < m; ++i)
                           for (std::size_t c = 0; c < n; ++c)
                             gx[i * n + c] += w * (probs[i * n + c] - (c == tgt[i] ? 1.0 : 0.0));
                       }
                     });
}

// ---- finite differences -----------------------------------------------------

bool FiniteDiffReport::passed() const {
  return std::all_of(params.begin(), params.end(), [](const ParamCheck& p) { return p.passed; });
}

double FiniteDiffReport::max_rel_error() const {
  double worst = 0.0;
  for (const auto& p : params) worst = std::max(worst, p.max_rel_error);
  return worst;
}

FiniteDiffReport finite_diff_check(const Objective& objective, std::span<const NamedTensor> params, double h,
                                   double tol, FdStencil stencil) {
  // Value of the objective at `values`; fills `grads` with reverse-mode gradients when given.
  auto evaluate = [&](const std::vector<Tensor>& values, std::vector<Tensor>* grads) {
    Tape tape;
    std::vector<Var> vars;
    vars.reserve(values.size());
    for (const auto& v : values) vars.push_back(tape.leaf(v.with_requires_grad(grads != nullptr)));
    Var loss = objective(tape, vars);
    if (loss.tape != &tape || loss.value().size() != 1) {
      throw ContractError("finite_diff_check objective must return a scalar recorded on the supplied tape");
    }
    if (grads) {
      Gradients g = tape.backward(loss);
      grads->clear();
      for (const auto& v : vars) grads->push_back(g.of(v));
    }
    return loss.value().item();
  };

  std::vector<Tensor> base;
  for (const auto& p : params) base.push_back(p.value);

  std::vector<Tensor> analytic;
  const double f0 = evaluate(base, &analytic);
  const double f0_again = evaluate(base, nullptr);
  if (f0 != f0_again) {
    throw ContractError("objective is not deterministic: repeated evaluation gave " + std::to_string(f0) + " and " +
                        std::to_string(f0_again));
  }

  FiniteDiffReport report;
  report.step = h;
  report.tolerance = tol;
  for (std::size_t k = 0; k < params.size(); ++k) {
    ParamCheck check;
    check.name = params[k].name;
    std::vector<double> data(base[k].data().begin(), base[k].data().end());
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double orig = data[i];
      auto perturbed = base;
      auto at = [&](double offset) {
        data[i] = orig + offset;
        perturbed[k] = Tensor(base[k].shape(), data);
        return evaluate(perturbed, nullptr);
      };
      double numeric = 0.0;
      if (stencil == FdStencil::kThreePoint) {
        numeric = (at(h) - at(-h)) / (2.0 * h);
      } else {
        numeric = (-at(2.0 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2.0 * h)) / (12.0 * h);
      }
      data[i] = orig;

      const double ad = analytic[k][i];
      const double denom = std::max({std::abs(ad), std::abs(numeric), 1e-8});
      const double rel = std::abs(ad - numeric) / denom;
      if (i == 0 || rel > check.max_rel_error) {
        check.max_rel_error = rel;
        check.worst_index = i;
        check.autodiff = ad;
        check.numeric = numeric;
      }
    }
    check.passed = check.max_rel_error <= tol;
    report.params.push_back(std::move(check));
  }
  return report;
}

}  // namespace ilac
