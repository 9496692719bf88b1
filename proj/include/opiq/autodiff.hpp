// Copyright (c) the opiq project authors.
// SPDX-License-Identifier: Apache-2.0
//
// Reverse-mode automatic differentiation over dense double matrices. A Tape
// is built once per forward pass; backward() accumulates gradients into the
// Parameter objects bound to its leaves. Scalars are 1x1 matrices.

#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "opiq/error.hpp"

namespace opiq::ad {

using Mat = Eigen::MatrixXd;

// A trainable tensor. Gradients accumulate across backward passes until
// zero_grad(), which is what batch averaging relies on.
struct Parameter {
  std::string name;
  Mat value;
  Mat grad;

  Parameter() = default;
  Parameter(std::string param_name, Mat initial)
      : name(std::move(param_name)),
        value(std::move(initial)),
        grad(Mat::Zero(value.rows(), value.cols())) {}

  void zero_grad() { grad.setZero(); }
  Eigen::Index size() const { return value.size(); }
};

struct Var {
  int idx = -1;
};

class Tape {
 public:
  Var constant(Mat v) { return push(std::move(v), false, nullptr); }

  Var leaf(Parameter& p) {
    Var v = push(p.value, true, nullptr);
    node(v).param = &p;
    return v;
  }

  const Mat& value(Var v) const { return nodes_[check(v)].value; }

  Eigen::Index rows(Var v) const { return value(v).rows(); }
  Eigen::Index cols(Var v) const { return value(v).cols(); }

  // ---- elementwise and structural ops ----

  Var add(Var a, Var b) {
    require_same_shape(a, b, "add");
    Mat out = value(a) + value(b);
    return unary_or_binary(std::move(out), a, b, [](Tape& t, Var a2, Var b2, const Mat& g) {
      t.accum(a2, g);
      t.accum(b2, g);
    });
  }

  Var sub(Var a, Var b) {
    require_same_shape(a, b, "sub");
    Mat out = value(a) - value(b);
    return unary_or_binary(std::move(out), a, b, [](Tape& t, Var a2, Var b2, const Mat& g) {
      t.accum(a2, g);
      t.accum(b2, -g);
    });
  }

  Var scale(Var a, double c) {
    Mat out = value(a) * c;
    return unary(std::move(out), a, [c](Tape& t, Var a2, const Mat& g) {
      t.accum(a2, g * c);
    });
  }

  Var hadamard(Var a, Var b) {
    require_same_shape(a, b, "hadamard");
    Mat out = value(a).cwiseProduct(value(b));
    const Mat va = value(a);
    const Mat vb = value(b);
    return unary_or_binary(std::move(out), a, b,
                           [va, vb](Tape& t, Var a2, Var b2, const Mat& g) {
                             t.accum(a2, g.cwiseProduct(vb));
                             t.accum(b2, g.cwiseProduct(va));
                           });
  }

  Var matmul(Var a, Var b, bool trans_a = false, bool trans_b = false) {
    const Mat& va = value(a);
    const Mat& vb = value(b);
    Mat out;
    if (!trans_a && !trans_b) out = va * vb;
    else if (trans_a && !trans_b) out = va.transpose() * vb;
    else if (!trans_a && trans_b) out = va * vb.transpose();
    else out = va.transpose() * vb.transpose();
    const Mat ca = va;
    const Mat cb = vb;
    return unary_or_binary(
        std::move(out), a, b,
        [ca, cb, trans_a, trans_b](Tape& t, Var a2, Var b2, const Mat& g) {
          if (!trans_a && !trans_b) {
            t.accum(a2, g * cb.transpose());
            t.accum(b2, ca.transpose() * g);
          } else if (trans_a && !trans_b) {
            t.accum(a2, cb * g.transpose());
            t.accum(b2, ca * g);
          } else if (!trans_a && trans_b) {
            t.accum(a2, g * cb);
            t.accum(b2, g.transpose() * ca);
          } else {
            t.accum(a2, (g * cb).transpose());
            t.accum(b2, (ca * g).transpose());
          }
        });
  }

  Var relu(Var a) {
    Mat out = value(a).cwiseMax(0.0);
    const Mat va = value(a);
    return unary(std::move(out), a, [va](Tape& t, Var a2, const Mat& g) {
      Mat masked = g;
      for (Eigen::Index i = 0; i < masked.size(); ++i) {
        if (va(i) <= 0.0) masked(i) = 0.0;
      }
      t.accum(a2, masked);
    });
  }

  Var tanh_op(Var a) {
    Mat out = value(a).array().tanh().matrix();
    const Mat y = out;
    return unary(std::move(out), a, [y](Tape& t, Var a2, const Mat& g) {
      t.accum(a2, g.cwiseProduct((1.0 - y.array().square()).matrix()));
    });
  }

  Var sigmoid(Var a) {
    Mat out = (1.0 / (1.0 + (-value(a).array()).exp())).matrix();
    const Mat y = out;
    return unary(std::move(out), a, [y](Tape& t, Var a2, const Mat& g) {
      t.accum(a2, g.cwiseProduct((y.array() * (1.0 - y.array())).matrix()));
    });
  }

  Var abs_op(Var a) {
    Mat out = value(a).cwiseAbs();
    const Mat va = value(a);
    return unary(std::move(out), a, [va](Tape& t, Var a2, const Mat& g) {
      Mat signed_g = g;
      for (Eigen::Index i = 0; i < signed_g.size(); ++i) {
        if (va(i) < 0.0) signed_g(i) = -signed_g(i);
        else if (va(i) == 0.0) signed_g(i) = 0.0;
      }
      t.accum(a2, signed_g);
    });
  }

  Var sqrt_op(Var a) {
    Mat out = value(a).cwiseSqrt();
    const Mat y = out;
    return unary(std::move(out), a, [y](Tape& t, Var a2, const Mat& g) {
      Mat dx = g;
      for (Eigen::Index i = 0; i < dx.size(); ++i) {
        dx(i) = g(i) * 0.5 / std::max(y(i), 1e-300);
      }
      t.accum(a2, dx);
    });
  }

  // Column-vector softmax, numerically stabilized.
  Var softmax(Var a) {
    require(cols(a) == 1, ErrorKind::ShapeError, "softmax expects a column vector");
    const Mat& va = value(a);
    const double mx = va.maxCoeff();
    Mat e = (va.array() - mx).exp().matrix();
    Mat out = e / e.sum();
    const Mat y = out;
    return unary(std::move(out), a, [y](Tape& t, Var a2, const Mat& g) {
      const double inner = (y.array() * g.array()).sum();
      t.accum(a2, (y.array() * (g.array() - inner)).matrix());
    });
  }

  // Row-wise softmax (each row is a distribution), used by attention.
  Var softmax_rows(Var a) {
    const Mat& va = value(a);
    Mat out(va.rows(), va.cols());
    for (Eigen::Index r = 0; r < va.rows(); ++r) {
      const double mx = va.row(r).maxCoeff();
      Eigen::ArrayXd e = (va.row(r).array() - mx).exp();
      out.row(r) = (e / e.sum()).matrix();
    }
    const Mat y = out;
    return unary(std::move(out), a, [y](Tape& t, Var a2, const Mat& g) {
      Mat dx(y.rows(), y.cols());
      for (Eigen::Index r = 0; r < y.rows(); ++r) {
        const double inner = (y.row(r).array() * g.row(r).array()).sum();
        dx.row(r) = (y.row(r).array() * (g.row(r).array() - inner)).matrix();
      }
      t.accum(a2, dx);
    });
  }

  // Mean across columns for each row: m x n -> m x 1.
  Var rowwise_mean(Var a) {
    const Mat& va = value(a);
    const double inv_n = 1.0 / static_cast<double>(va.cols());
    Mat out = va.rowwise().mean();
    const Eigen::Index n = va.cols();
    return unary(std::move(out), a, [inv_n, n](Tape& t, Var a2, const Mat& g) {
      t.accum(a2, (g * inv_n).replicate(1, n));
    });
  }

  // Mean across rows for each column, returned as a column: m x n -> n x 1.
  Var colwise_mean(Var a) {
    const Mat& va = value(a);
    const double inv_m = 1.0 / static_cast<double>(va.rows());
    Mat out = va.colwise().mean().transpose();
    const Eigen::Index m = va.rows();
    return unary(std::move(out), a, [inv_m, m](Tape& t, Var a2, const Mat& g) {
      t.accum(a2, (g.transpose() * inv_m).replicate(m, 1));
    });
  }

  Var broadcast_cols(Var v, Eigen::Index n) {
    require(cols(v) == 1, ErrorKind::ShapeError,
            "broadcast_cols expects a column vector");
    Mat out = value(v).replicate(1, n);
    return unary(std::move(out), v, [](Tape& t, Var v2, const Mat& g) {
      t.accum(v2, g.rowwise().sum());
    });
  }

  Var vconcat(Var a, Var b) {
    require(cols(a) == cols(b), ErrorKind::ShapeError,
            "vconcat needs matching column counts");
    const Eigen::Index ra = rows(a);
    const Eigen::Index rb = rows(b);
    Mat out(ra + rb, cols(a));
    out.topRows(ra) = value(a);
    out.bottomRows(rb) = value(b);
    return unary_or_binary(std::move(out), a, b,
                           [ra, rb](Tape& t, Var a2, Var b2, const Mat& g) {
                             t.accum(a2, g.topRows(ra));
                             t.accum(b2, g.bottomRows(rb));
                           });
  }

  // Rows scaled to unit Euclidean norm (plus eps to stay finite at zero).
  Var row_l2_normalize(Var a, double eps = 1e-8) {
    const Mat& va = value(a);
    Mat out(va.rows(), va.cols());
    Eigen::VectorXd norms(va.rows());
    for (Eigen::Index r = 0; r < va.rows(); ++r) {
      norms(r) = va.row(r).norm();
      out.row(r) = va.row(r) / (norms(r) + eps);
    }
    const Mat ca = va;
    const Eigen::VectorXd cn = norms;
    return unary(std::move(out), a, [ca, cn, eps](Tape& t, Var a2, const Mat& g) {
      Mat dx(ca.rows(), ca.cols());
      for (Eigen::Index r = 0; r < ca.rows(); ++r) {
        const double denom = cn(r) + eps;
        const double xg = ca.row(r).dot(g.row(r));
        if (cn(r) > 0.0) {
          dx.row(r) = g.row(r) / denom -
                      ca.row(r) * (xg / (denom * denom * cn(r)));
        } else {
          dx.row(r) = g.row(r) / denom;
        }
      }
      t.accum(a2, dx);
    });
  }

  // Cumulative sum down a column vector.
  Var cumsum(Var a) {
    require(cols(a) == 1, ErrorKind::ShapeError, "cumsum expects a column vector");
    const Mat& va = value(a);
    Mat out(va.rows(), 1);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < va.rows(); ++i) {
      acc += va(i, 0);
      out(i, 0) = acc;
    }
    return unary(std::move(out), a, [](Tape& t, Var a2, const Mat& g) {
      Mat dx(g.rows(), 1);
      double acc2 = 0.0;
      for (Eigen::Index i = g.rows() - 1; i >= 0; --i) {
        acc2 += g(i, 0);
        dx(i, 0) = acc2;
      }
      t.accum(a2, dx);
    });
  }

  Var sum_all(Var a) {
    Mat out(1, 1);
    out(0, 0) = value(a).sum();
    const Eigen::Index r = rows(a);
    const Eigen::Index c = cols(a);
    return unary(std::move(out), a, [r, c](Tape& t, Var a2, const Mat& g) {
      t.accum(a2, Mat::Constant(r, c, g(0, 0)));
    });
  }

  Var mean_all(Var a) {
    const double inv = 1.0 / static_cast<double>(value(a).size());
    return scale(sum_all(a), inv);
  }

  // 1x1 scalar node times a fixed matrix.
  Var scalar_times(Var s, Mat fixed) {
    require(rows(s) == 1 && cols(s) == 1, ErrorKind::ShapeError,
            "scalar_times expects a 1x1 node");
    Mat out = value(s)(0, 0) * fixed;
    auto shared = std::make_shared<Mat>(std::move(fixed));
    return unary(std::move(out), s, [shared](Tape& t, Var s2, const Mat& g) {
      Mat ds(1, 1);
      ds(0, 0) = g.cwiseProduct(*shared).sum();
      t.accum(s2, ds);
    });
  }

  // Bias broadcast: (m x n) + (m x 1) over every column.
  Var add_colvec(Var a, Var b) {
    require(rows(a) == rows(b) && cols(b) == 1, ErrorKind::ShapeError,
            "add_colvec expects (m x n) + (m x 1)");
    Mat out = value(a).colwise() + Eigen::VectorXd(value(b).col(0));
    return unary_or_binary(std::move(out), a, b,
                           [](Tape& t, Var a2, Var b2, const Mat& g) {
                             t.accum(a2, g);
                             t.accum(b2, g.rowwise().sum());
                           });
  }

  // Patch extraction for convolution-as-matmul. Input is channels x (H*W)
  // row-major over y then x; output is (channels*k*k) x P with one column
  // per output position.
  Var im2col(Var a, int channels, int height, int width, int k, int stride) {
    require(rows(a) == channels && cols(a) == height * width,
            ErrorKind::ShapeError, "im2col input shape mismatch");
    require((height - k) % stride == 0 && (width - k) % stride == 0,
            ErrorKind::ShapeError, "im2col geometry does not tile the image");
    const int out_h = (height - k) / stride + 1;
    const int out_w = (width - k) / stride + 1;
    const int patches = out_h * out_w;
    const int patch_rows = channels * k * k;
    auto index = std::make_shared<std::vector<std::pair<int, int>>>();
    index->reserve(static_cast<std::size_t>(patch_rows) * patches);
    Mat out(patch_rows, patches);
    const Mat& va = value(a);
    for (int p = 0; p < patches; ++p) {
      const int py = p / out_w;
      const int px = p % out_w;
      int r = 0;
      for (int c = 0; c < channels; ++c) {
        for (int ky = 0; ky < k; ++ky) {
          for (int kx = 0; kx < k; ++kx, ++r) {
            const int y = py * stride + ky;
            const int x = px * stride + kx;
            const int src_col = y * width + x;
            out(r, p) = va(c, src_col);
            index->emplace_back(c, src_col);
          }
        }
      }
    }
    const Eigen::Index in_rows = va.rows();
    const Eigen::Index in_cols = va.cols();
    return unary(std::move(out), a,
                 [index, patch_rows, patches, in_rows, in_cols](
                     Tape& t, Var a2, const Mat& g) {
                   Mat dx = Mat::Zero(in_rows, in_cols);
                   std::size_t flat = 0;
                   for (int p = 0; p < patches; ++p) {
                     for (int r = 0; r < patch_rows; ++r, ++flat) {
                       const auto [c, src_col] = (*index)[flat];
                       dx(c, src_col) += g(r, p);
                     }
                   }
                   t.accum(a2, dx);
                 });
  }

  // ---- backward ----

  void backward(Var root) {
    require(rows(root) == 1 && cols(root) == 1, ErrorKind::ShapeError,
            "backward expects a scalar root");
    for (NodeData& n : nodes_) n.grad.resize(0, 0);
    accum(root, Mat::Ones(1, 1));
    for (int i = root.idx; i >= 0; --i) {
      NodeData& n = nodes_[static_cast<std::size_t>(i)];
      if (n.grad.size() == 0) continue;
      if (n.backward) n.backward(*this, n.grad);
      if (n.param != nullptr) n.param->grad += n.grad;
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct NodeData {
    Mat value;
    Mat grad;
    bool needs_grad = false;
    Parameter* param = nullptr;
    std::function<void(Tape&, const Mat&)> backward;
  };

  std::vector<NodeData> nodes_;

  int check(Var v) const {
    require(v.idx >= 0 && v.idx < static_cast<int>(nodes_.size()),
            ErrorKind::ShapeError, "use of an unbound tape variable");
    return v.idx;
  }

  NodeData& node(Var v) { return nodes_[static_cast<std::size_t>(check(v))]; }

  Var push(Mat v, bool needs_grad, Parameter* p) {
    NodeData n;
    n.value = std::move(v);
    n.needs_grad = needs_grad;
    n.param = p;
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  void accum(Var v, const Mat& g) {
    NodeData& n = node(v);
    if (!n.needs_grad) return;
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }

  template <typename Back>
  Var unary(Mat out, Var a, Back back) {
    const bool ng = node(a).needs_grad;
    Var r = push(std::move(out), ng, nullptr);
    if (ng) {
      node(r).backward = [a, back](Tape& t, const Mat& g) { back(t, a, g); };
    }
    return r;
  }

  template <typename Back>
  Var unary_or_binary(Mat out, Var a, Var b, Back back) {
    const bool ng = node(a).needs_grad || node(b).needs_grad;
    Var r = push(std::move(out), ng, nullptr);
    if (ng) {
      node(r).backward = [a, b, back](Tape& t, const Mat& g) { back(t, a, b, g); };
    }
    return r;
  }

  void require_same_shape(Var a, Var b, const char* what) {
    require(rows(a) == rows(b) && cols(a) == cols(b), ErrorKind::ShapeError,
            std::string(what) + ": shape mismatch");
  }
};

}  // namespace opiq::ad
