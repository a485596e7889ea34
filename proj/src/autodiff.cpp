#include "wgsef/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "wgsef/errors.hpp"

namespace wgsef {

namespace {

[[noreturn]] void shape_error(const std::string& op, const std::string& what) {
  throw Error(Errc::ShapeMismatch, op + ": " + what);
}

void im2col(const double* x, std::size_t C, std::size_t H, std::size_t W, std::size_t kh,
            std::size_t kw, std::size_t stride, std::size_t pad, std::size_t Ho, std::size_t Wo,
            double* cols) {
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t i = 0; i < kh; ++i) {
      for (std::size_t j = 0; j < kw; ++j) {
        double* row = cols + ((c * kh + i) * kw + j) * Ho * Wo;
        for (std::size_t oy = 0; oy < Ho; ++oy) {
          const long y = static_cast<long>(oy * stride + i) - static_cast<long>(pad);
          for (std::size_t ox = 0; ox < Wo; ++ox) {
            const long xx = static_cast<long>(ox * stride + j) - static_cast<long>(pad);
            const bool inside = y >= 0 && y < static_cast<long>(H) && xx >= 0 && xx < static_cast<long>(W);
            row[oy * Wo + ox] = inside ? x[(c * H + static_cast<std::size_t>(y)) * W + static_cast<std::size_t>(xx)] : 0.0;
          }
        }
      }
    }
  }
}

void col2im(const double* cols, std::size_t C, std::size_t H, std::size_t W, std::size_t kh,
            std::size_t kw, std::size_t stride, std::size_t pad, std::size_t Ho, std::size_t Wo,
            double* dx) {
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t i = 0; i < kh; ++i) {
      for (std::size_t j = 0; j < kw; ++j) {
        const double* row = cols + ((c * kh + i) * kw + j) * Ho * Wo;
        for (std::size_t oy = 0; oy < Ho; ++oy) {
          const long y = static_cast<long>(oy * stride + i) - static_cast<long>(pad);
          if (y < 0 || y >= static_cast<long>(H)) continue;
          for (std::size_t ox = 0; ox < Wo; ++ox) {
            const long xx = static_cast<long>(ox * stride + j) - static_cast<long>(pad);
            if (xx < 0 || xx >= static_cast<long>(W)) continue;
            dx[(c * H + static_cast<std::size_t>(y)) * W + static_cast<std::size_t>(xx)] += row[oy * Wo + ox];
          }
        }
      }
    }
  }
}

}  // namespace

Var Tape::leaf(Tensor value, bool requires_grad) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Var Tape::push(Tensor value, std::vector<Var> inputs, std::function<void(Tape&, std::size_t)> back) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = std::any_of(inputs.begin(), inputs.end(),
                                [this](Var v) { return nodes_.at(v.id).requires_grad; });
  if (n.requires_grad) n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Tensor& Tape::grad_buffer(Var v) {
  Node& n = nodes_.at(v.id);
  if (n.grad.shape != n.value.shape) n.grad = Tensor(n.value.shape, 0.0);
  return n.grad;
}

const Tensor& Tape::grad(Var v) { return grad_buffer(v); }

void Tape::backward(Var loss) {
  if (nodes_.at(loss.id).value.size() != 1) {
    throw Error(Errc::NonScalarLoss, "loss has shape " + shape_string(nodes_[loss.id].value.shape));
  }
  for (auto& n : nodes_) n.grad = Tensor();
  grad_buffer(loss).data[0] = 1.0;
  for (std::size_t id = loss.id + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.requires_grad || !n.back || n.grad.shape != n.value.shape) continue;
    n.back(*this, id);
  }
}

Var matmul(Tape& tape, Var a, Var b, bool transpose_b) {
  const Tensor& A = tape.value(a);
  const Tensor& B = tape.value(b);
  if (A.rank() != 2 || B.rank() != 2) shape_error("matmul", "operands must be matrices");
  const std::size_t M = A.dim(0), K = A.dim(1);
  const std::size_t N = transpose_b ? B.dim(0) : B.dim(1);
  if ((transpose_b ? B.dim(1) : B.dim(0)) != K) {
    shape_error("matmul", shape_string(A.shape) + " x " + shape_string(B.shape) +
                              (transpose_b ? "^T" : ""));
  }
  Tensor out({M, N}, 0.0);
  if (transpose_b) {
    gemm_nt(M, N, K, A.data.data(), B.data.data(), out.data.data());
  } else {
    gemm_nn(M, N, K, A.data.data(), B.data.data(), out.data.data());
  }
  return tape.push(std::move(out), {a, b}, [a, b, M, N, K, transpose_b](Tape& t, std::size_t self) {
    const Tensor& G = t.grad_buffer(Var{self});
    if (t.requires_grad(a)) {
      // dA = G * B^T  (or G * B when B was transposed)
      Tensor& dA = t.grad_buffer(a);
      const double* Bp = t.value(b).data.data();
      if (transpose_b) {
        gemm_nn(M, K, N, G.data.data(), Bp, dA.data.data());
      } else {
        gemm_nt(M, K, N, G.data.data(), Bp, dA.data.data());
      }
    }
    if (t.requires_grad(b)) {
      Tensor& dB = t.grad_buffer(b);
      const double* Ap = t.value(a).data.data();
      if (transpose_b) {
        gemm_tn(N, K, M, G.data.data(), Ap, dB.data.data());  // dB[N,K] = G^T A
      } else {
        gemm_tn(K, N, M, Ap, G.data.data(), dB.data.data());  // dB[K,N] = A^T G
      }
    }
  });
}

Var conv2d(Tape& tape, Var x, Var w, std::size_t stride, std::size_t pad) {
  const Tensor& X = tape.value(x);
  const Tensor& Wt = tape.value(w);
  if (X.rank() != 4 || Wt.rank() != 4) shape_error("conv2d", "input and filters must be rank 4");
  if (stride == 0) shape_error("conv2d", "stride must be positive");
  const std::size_t B = X.dim(0), C = X.dim(1), H = X.dim(2), W = X.dim(3);
  const std::size_t O = Wt.dim(0), kh = Wt.dim(2), kw = Wt.dim(3);
  if (Wt.dim(1) != C) shape_error("conv2d", "filters expect " + std::to_string(Wt.dim(1)) +
                                                 " channels, input has " + std::to_string(C));
  if (H + 2 * pad < kh || W + 2 * pad < kw) shape_error("conv2d", "kernel larger than padded input");
  const std::size_t Ho = (H + 2 * pad - kh) / stride + 1;
  const std::size_t Wo = (W + 2 * pad - kw) / stride + 1;
  const std::size_t CK = C * kh * kw, P = Ho * Wo;

  auto cols = std::make_shared<std::vector<double>>(B * CK * P);
  Tensor out({B, O, Ho, Wo}, 0.0);
  for (std::size_t n = 0; n < B; ++n) {
    double* cn = cols->data() + n * CK * P;
    im2col(X.data.data() + n * C * H * W, C, H, W, kh, kw, stride, pad, Ho, Wo, cn);
    gemm_nn(O, P, CK, Wt.data.data(), cn, out.data.data() + n * O * P);
  }
  return tape.push(std::move(out), {x, w},
                   [=](Tape& t, std::size_t self) {
                     const Tensor& G = t.grad_buffer(Var{self});
                     if (t.requires_grad(w)) {
                       Tensor& dW = t.grad_buffer(w);
                       for (std::size_t n = 0; n < B; ++n) {
                         gemm_nt(O, CK, P, G.data.data() + n * O * P, cols->data() + n * CK * P,
                                 dW.data.data());
                       }
                     }
                     if (t.requires_grad(x)) {
                       Tensor& dX = t.grad_buffer(x);
                       const double* Wp = t.value(w).data.data();
                       std::vector<double> dcols(CK * P);
                       for (std::size_t n = 0; n < B; ++n) {
                         std::fill(dcols.begin(), dcols.end(), 0.0);
                         gemm_tn(CK, P, O, Wp, G.data.data() + n * O * P, dcols.data());
                         col2im(dcols.data(), C, H, W, kh, kw, stride, pad, Ho, Wo,
                                dX.data.data() + n * C * H * W);
                       }
                     }
                   });
}

Var max_pool2d(Tape& tape, Var x, std::size_t size, std::size_t stride) {
  const Tensor& X = tape.value(x);
  if (X.rank() != 4) shape_error("max_pool2d", "input must be rank 4");
  if (size == 0 || stride == 0) shape_error("max_pool2d", "size and stride must be positive");
  const std::size_t B = X.dim(0), C = X.dim(1), H = X.dim(2), W = X.dim(3);
  if (H < size || W < size) shape_error("max_pool2d", "window larger than input");
  const std::size_t Ho = (H - size) / stride + 1, Wo = (W - size) / stride + 1;
  Tensor out({B, C, Ho, Wo}, 0.0);
  auto arg = std::make_shared<std::vector<std::size_t>>(out.size());
  for (std::size_t bc = 0; bc < B * C; ++bc) {
    const double* xp = X.data.data() + bc * H * W;
    for (std::size_t oy = 0; oy < Ho; ++oy) {
      for (std::size_t ox = 0; ox < Wo; ++ox) {
        std::size_t best = (oy * stride) * W + ox * stride;
        for (std::size_t i = 0; i < size; ++i) {
          for (std::size_t j = 0; j < size; ++j) {
            const std::size_t idx = (oy * stride + i) * W + ox * stride + j;
            if (xp[idx] > xp[best]) best = idx;
          }
        }
        const std::size_t o = (bc * Ho + oy) * Wo + ox;
        out.data[o] = xp[best];
        (*arg)[o] = bc * H * W + best;
      }
    }
  }
  return tape.push(std::move(out), {x}, [x, arg](Tape& t, std::size_t self) {
    const Tensor& G = t.grad_buffer(Var{self});
    Tensor& dX = t.grad_buffer(x);
    for (std::size_t o = 0; o < G.size(); ++o) dX.data[(*arg)[o]] += G.data[o];
  });
}

Var relu(Tape& tape, Var x) {
  Tensor out = tape.value(x);
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  return tape.push(std::move(out), {x}, [x](Tape& t, std::size_t self) {
    const Tensor& G = t.grad_buffer(Var{self});
    const Tensor& X = t.value(x);
    Tensor& dX = t.grad_buffer(x);
    for (std::size_t i = 0; i < G.size(); ++i) {
      if (X.data[i] > 0.0) dX.data[i] += G.data[i];
    }
  });
}

Var add_bias(Tape& tape, Var x, Var bias) {
  const Tensor& X = tape.value(x);
  const Tensor& Bv = tape.value(bias);
  if (X.rank() < 2 || Bv.rank() != 1 || Bv.dim(0) != X.dim(1)) {
    shape_error("add_bias", "bias " + shape_string(Bv.shape) + " vs input " + shape_string(X.shape));
  }
  const std::size_t N = X.dim(0), C = X.dim(1), inner = X.size() / (N * C);
  Tensor out = X;
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t c = 0; c < C; ++c) {
      double* p = out.data.data() + (n * C + c) * inner;
      for (std::size_t i = 0; i < inner; ++i) p[i] += Bv.data[c];
    }
  }
  return tape.push(std::move(out), {x, bias}, [=](Tape& t, std::size_t self) {
    const Tensor& G = t.grad_buffer(Var{self});
    if (t.requires_grad(x)) {
      Tensor& dX = t.grad_buffer(x);
      for (std::size_t i = 0; i < G.size(); ++i) dX.data[i] += G.data[i];
    }
    if (t.requires_grad(bias)) {
      Tensor& dB = t.grad_buffer(bias);
      for (std::size_t n = 0; n < N; ++n) {
        for (std::size_t c = 0; c < C; ++c) {
          const double* g = G.data.data() + (n * C + c) * inner;
          double s = 0.0;
          for (std::size_t i = 0; i < inner; ++i) s += g[i];
          dB.data[c] += s;
        }
      }
    }
  });
}

Var flatten(Tape& tape, Var x) {
  const Tensor& X = tape.value(x);
  if (X.rank() < 1) shape_error("flatten", "scalar input");
  Tensor out({X.dim(0), X.size() / X.dim(0)}, X.data);
  return tape.push(std::move(out), {x}, [x](Tape& t, std::size_t self) {
    const Tensor& G = t.grad_buffer(Var{self});
    Tensor& dX = t.grad_buffer(x);
    for (std::size_t i = 0; i < G.size(); ++i) dX.data[i] += G.data[i];
  });
}

Var add(Tape& tape, Var a, Var b) {
  const Tensor& A = tape.value(a);
  const Tensor& B = tape.value(b);
  if (A.shape != B.shape) shape_error("add", shape_string(A.shape) + " vs " + shape_string(B.shape));
  Tensor out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += B.data[i];
  return tape.push(std::move(out), {a, b}, [a, b](Tape& t, std::size_t self) {
    const Tensor& G = t.grad_buffer(Var{self});
    for (Var v : {a, b}) {
      if (!t.requires_grad(v)) continue;
      Tensor& d = t.grad_buffer(v);
      for (std::size_t i = 0; i < G.size(); ++i) d.data[i] += G.data[i];
    }
  });
}

Var scale(Tape& tape, Var a, double c) {
  Tensor out = tape.value(a);
  for (double& v : out.data) v *= c;
  return tape.push(std::move(out), {a}, [a, c](Tape& t, std::size_t self) {
    const Tensor& G = t.grad_buffer(Var{self});
    Tensor& d = t.grad_buffer(a);
    for (std::size_t i = 0; i < G.size(); ++i) d.data[i] += c * G.data[i];
  });
}

Var softmax_cross_entropy(Tape& tape, Var logits, const std::vector<int>& labels) {
  const Tensor& L = tape.value(logits);
  if (L.rank() != 2) shape_error("softmax_cross_entropy", "logits must be [batch, classes]");
  const std::size_t N = L.dim(0), K = L.dim(1);
  if (labels.size() != N) shape_error("softmax_cross_entropy", "label count differs from batch");
  auto probs = std::make_shared<std::vector<double>>(N * K);
  double total = 0.0;
  for (std::size_t n = 0; n < N; ++n) {
    const int y = labels[n];
    if (y < 0 || static_cast<std::size_t>(y) >= K) {
      shape_error("softmax_cross_entropy", "label " + std::to_string(y) + " out of range");
    }
    const double* l = L.data.data() + n * K;
    const double mx = *std::max_element(l, l + K);
    double z = 0.0;
    for (std::size_t c = 0; c < K; ++c) z += std::exp(l[c] - mx);
    const double logz = mx + std::log(z);
    for (std::size_t c = 0; c < K; ++c) (*probs)[n * K + c] = std::exp(l[c] - logz);
    total += logz - l[static_cast<std::size_t>(y)];
  }
  return tape.push(Tensor({1}, {total / static_cast<double>(N)}), {logits},
                   [logits, probs, labels, N, K](Tape& t, std::size_t self) {
                     const double g = t.grad_buffer(Var{self}).data[0] / static_cast<double>(N);
                     Tensor& d = t.grad_buffer(logits);
                     for (std::size_t n = 0; n < N; ++n) {
                       for (std::size_t c = 0; c < K; ++c) {
                         double p = (*probs)[n * K + c];
                         if (c == static_cast<std::size_t>(labels[n])) p -= 1.0;
                         d.data[n * K + c] += g * p;
                       }
                     }
                   });
}

Var mse(Tape& tape, Var pred, const Tensor& target) {
  const Tensor& P = tape.value(pred);
  if (P.shape != target.shape || P.rank() < 1) {
    shape_error("mse", shape_string(P.shape) + " vs " + shape_string(target.shape));
  }
  const std::size_t N = P.dim(0);
  auto diff = std::make_shared<std::vector<double>>(P.size());
  double total = 0.0;
  for (std::size_t i = 0; i < P.size(); ++i) {
    (*diff)[i] = P.data[i] - target.data[i];
    total += (*diff)[i] * (*diff)[i];
  }
  return tape.push(Tensor({1}, {0.5 * total / static_cast<double>(N)}), {pred},
                   [pred, diff, N](Tape& t, std::size_t self) {
                     const double g = t.grad_buffer(Var{self}).data[0] / static_cast<double>(N);
                     Tensor& d = t.grad_buffer(pred);
                     for (std::size_t i = 0; i < diff->size(); ++i) d.data[i] += g * (*diff)[i];
                   });
}

}  // namespace wgsef
