#include "core/tensor.hpp"

#include <cmath>
#include <stdexcept>

namespace amod::neural {

Tape::Ref Tape::make_leaf(Mat value, bool requires_grad) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  nodes_.push_back(std::move(node));
  return {static_cast<int>(nodes_.size()) - 1};
}

Tape::Ref Tape::make_node(Mat value, bool requires_grad, std::function<void()> pullback) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  if (requires_grad) node.pullback = std::move(pullback);
  nodes_.push_back(std::move(node));
  return {static_cast<int>(nodes_.size()) - 1};
}

Mat& Tape::grad_buffer(int id) {
  Node& node = nodes_[id];
  if (node.grad.size() == 0) {
    node.grad = Mat::Zero(node.value.rows(), node.value.cols());
  }
  return node.grad;
}

Tape::Ref Tape::matmul(Ref a, Ref b) {
  if (value(a).cols() != value(b).rows()) throw std::invalid_argument("matmul: shape mismatch");
  Mat out = value(a) * value(b);
  const bool rg = needs_grad(a) || needs_grad(b);
  Ref result{static_cast<int>(nodes_.size())};
  return make_node(std::move(out), rg, [this, a, b, result] {
    const Mat& g = nodes_[result.id].grad;
    if (needs_grad(a)) grad_buffer(a.id).noalias() += g * value(b).transpose();
    if (needs_grad(b)) grad_buffer(b.id).noalias() += value(a).transpose() * g;
  });
}

Tape::Ref Tape::add(Ref a, Ref b) {
  if (value(a).rows() != value(b).rows() || value(a).cols() != value(b).cols()) {
    throw std::invalid_argument("add: shape mismatch");
  }
  Ref result{static_cast<int>(nodes_.size())};
  return make_node(value(a) + value(b), needs_grad(a) || needs_grad(b),
                   [this, a, b, result] {
                     const Mat& g = nodes_[result.id].grad;
                     if (needs_grad(a)) grad_buffer(a.id) += g;
                     if (needs_grad(b)) grad_buffer(b.id) += g;
                   });
}

Tape::Ref Tape::sub(Ref a, Ref b) {
  if (value(a).rows() != value(b).rows() || value(a).cols() != value(b).cols()) {
    throw std::invalid_argument("sub: shape mismatch");
  }
  Ref result{static_cast<int>(nodes_.size())};
  return make_node(value(a) - value(b), needs_grad(a) || needs_grad(b),
                   [this, a, b, result] {
                     const Mat& g = nodes_[result.id].grad;
                     if (needs_grad(a)) grad_buffer(a.id) += g;
                     if (needs_grad(b)) grad_buffer(b.id) -= g;
                   });
}

Tape::Ref Tape::add_col_broadcast(Ref a, Ref bias) {
  if (value(bias).cols() != 1 || value(bias).rows() != value(a).rows()) {
    throw std::invalid_argument("add_col_broadcast: shape mismatch");
  }
  Mat out = value(a).colwise() + Eigen::VectorXd(value(bias).col(0));
  Ref result{static_cast<int>(nodes_.size())};
  return make_node(std::move(out), needs_grad(a) || needs_grad(bias),
                   [this, a, bias, result] {
                     const Mat& g = nodes_[result.id].grad;
                     if (needs_grad(a)) grad_buffer(a.id) += g;
                     if (needs_grad(bias)) grad_buffer(bias.id) += g.rowwise().sum();
                   });
}

Tape::Ref Tape::cmul(Ref a, Ref b) {
  if (value(a).rows() != value(b).rows() || value(a).cols() != value(b).cols()) {
    throw std::invalid_argument("cmul: shape mismatch");
  }
  Ref result{static_cast<int>(nodes_.size())};
  return make_node(value(a).cwiseProduct(value(b)), needs_grad(a) || needs_grad(b),
                   [this, a, b, result] {
                     const Mat& g = nodes_[result.id].grad;
                     if (needs_grad(a)) grad_buffer(a.id) += g.cwiseProduct(value(b));
                     if (needs_grad(b)) grad_buffer(b.id) += g.cwiseProduct(value(a));
                   });
}

Tape::Ref Tape::scale(Ref a, double factor) {
  Ref result{static_cast<int>(nodes_.size())};
  return make_node(value(a) * factor, needs_grad(a), [this, a, factor, result] {
    if (needs_grad(a)) grad_buffer(a.id) += factor * nodes_[result.id].grad;
  });
}

Tape::Ref Tape::add_const(Ref a, const Mat& constant) {
  if (value(a).rows() != constant.rows() || value(a).cols() != constant.cols()) {
    throw std::invalid_argument("add_const: shape mismatch");
  }
  Ref result{static_cast<int>(nodes_.size())};
  return make_node(value(a) + constant, needs_grad(a), [this, a, result] {
    if (needs_grad(a)) grad_buffer(a.id) += nodes_[result.id].grad;
  });
}

Tape::Ref Tape::relu(Ref a) {
  Ref result{static_cast<int>(nodes_.size())};
  return make_node(value(a).cwiseMax(0.0), needs_grad(a), [this, a, result] {
    if (!needs_grad(a)) return;
    const Mat mask = (value(a).array() > 0.0).cast<double>().matrix();
    grad_buffer(a.id) += nodes_[result.id].grad.cwiseProduct(mask);
  });
}

Tape::Ref Tape::tanh_op(Ref a) {
  Ref result{static_cast<int>(nodes_.size())};
  return make_node(value(a).array().tanh().matrix(), needs_grad(a), [this, a, result] {
    if (!needs_grad(a)) return;
    const Mat& y = nodes_[result.id].value;
    grad_buffer(a.id) +=
        nodes_[result.id].grad.cwiseProduct((1.0 - y.array().square()).matrix());
  });
}

Tape::Ref Tape::sigmoid(Ref a) {
  Mat out = (1.0 / (1.0 + (-value(a).array()).exp())).matrix();
  Ref result{static_cast<int>(nodes_.size())};
  return make_node(std::move(out), needs_grad(a), [this, a, result] {
    if (!needs_grad(a)) return;
    const Mat& y = nodes_[result.id].value;
    grad_buffer(a.id) +=
        nodes_[result.id].grad.cwiseProduct((y.array() * (1.0 - y.array())).matrix());
  });
}

Tape::Ref Tape::softmax_cols(Ref a) {
  Mat out = value(a);
  for (Eigen::Index c = 0; c < out.cols(); ++c) {
    const double peak = out.col(c).maxCoeff();
    out.col(c) = (out.col(c).array() - peak).exp();
    out.col(c) /= out.col(c).sum();
  }
  Ref result{static_cast<int>(nodes_.size())};
  return make_node(std::move(out), needs_grad(a), [this, a, result] {
    if (!needs_grad(a)) return;
    const Mat& y = nodes_[result.id].value;
    const Mat& g = nodes_[result.id].grad;
    Mat& da = grad_buffer(a.id);
    for (Eigen::Index c = 0; c < y.cols(); ++c) {
      const double inner = y.col(c).dot(g.col(c));
      da.col(c) += y.col(c).cwiseProduct(g.col(c)) - inner * y.col(c);
    }
  });
}

Tape::Ref Tape::log_op(Ref a) {
  Ref result{static_cast<int>(nodes_.size())};
  return make_node(value(a).array().log().matrix(), needs_grad(a), [this, a, result] {
    if (!needs_grad(a)) return;
    grad_buffer(a.id) +=
        nodes_[result.id].grad.cwiseQuotient(nodes_[a.id].value);
  });
}

Tape::Ref Tape::transpose(Ref a) {
  Ref result{static_cast<int>(nodes_.size())};
  return make_node(value(a).transpose(), needs_grad(a), [this, a, result] {
    if (needs_grad(a)) grad_buffer(a.id) += nodes_[result.id].grad.transpose();
  });
}

Tape::Ref Tape::vconcat(std::span<const Ref> parts) {
  if (parts.empty()) throw std::invalid_argument("vconcat: no parts");
  Eigen::Index rows = 0;
  const Eigen::Index cols = value(parts[0]).cols();
  bool rg = false;
  for (const Ref part : parts) {
    if (value(part).cols() != cols) throw std::invalid_argument("vconcat: column mismatch");
    rows += value(part).rows();
    rg = rg || needs_grad(part);
  }
  Mat out(rows, cols);
  Eigen::Index offset = 0;
  for (const Ref part : parts) {
    out.middleRows(offset, value(part).rows()) = value(part);
    offset += value(part).rows();
  }
  std::vector<Ref> owned(parts.begin(), parts.end());
  Ref result{static_cast<int>(nodes_.size())};
  return make_node(std::move(out), rg, [this, owned, result] {
    const Mat& g = nodes_[result.id].grad;
    Eigen::Index at = 0;
    for (const Ref part : owned) {
      const Eigen::Index n = value(part).rows();
      if (needs_grad(part)) grad_buffer(part.id) += g.middleRows(at, n);
      at += n;
    }
  });
}

Tape::Ref Tape::repeat_cols(Ref a, int n) {
  if (value(a).cols() != 1) throw std::invalid_argument("repeat_cols: need a column vector");
  Mat out = value(a).replicate(1, n);
  Ref result{static_cast<int>(nodes_.size())};
  return make_node(std::move(out), needs_grad(a), [this, a, result] {
    if (needs_grad(a)) grad_buffer(a.id) += nodes_[result.id].grad.rowwise().sum();
  });
}

Tape::Ref Tape::gather_cols(Ref a, std::vector<int> indices) {
  const Mat& src = value(a);
  for (int idx : indices) {
    if (idx < 0 || idx >= src.cols()) throw std::invalid_argument("gather_cols: index out of range");
  }
  Mat out(src.rows(), static_cast<Eigen::Index>(indices.size()));
  for (std::size_t c = 0; c < indices.size(); ++c) {
    out.col(static_cast<Eigen::Index>(c)) = src.col(indices[c]);
  }
  Ref result{static_cast<int>(nodes_.size())};
  return make_node(std::move(out), needs_grad(a),
                   [this, a, indices = std::move(indices), result] {
                     if (!needs_grad(a)) return;
                     const Mat& g = nodes_[result.id].grad;
                     Mat& da = grad_buffer(a.id);
                     for (std::size_t c = 0; c < indices.size(); ++c) {
                       da.col(indices[c]) += g.col(static_cast<Eigen::Index>(c));
                     }
                   });
}

Tape::Ref Tape::scale_cols(Ref a, Ref s) {
  if (value(s).rows() != 1 || value(s).cols() != value(a).cols()) {
    throw std::invalid_argument("scale_cols: shape mismatch");
  }
  Mat out = value(a).array().rowwise() * value(s).row(0).array();
  Ref result{static_cast<int>(nodes_.size())};
  return make_node(std::move(out), needs_grad(a) || needs_grad(s),
                   [this, a, s, result] {
                     const Mat& g = nodes_[result.id].grad;
                     if (needs_grad(a)) {
                       grad_buffer(a.id).array() += g.array().rowwise() * value(s).row(0).array();
                     }
                     if (needs_grad(s)) {
                       grad_buffer(s.id) += g.cwiseProduct(value(a)).colwise().sum();
                     }
                   });
}

Tape::Ref Tape::rowsum(Ref a) {
  Ref result{static_cast<int>(nodes_.size())};
  return make_node(value(a).rowwise().sum(), needs_grad(a), [this, a, result] {
    if (!needs_grad(a)) return;
    grad_buffer(a.id) += nodes_[result.id].grad * Mat::Ones(1, value(a).cols());
  });
}

Tape::Ref Tape::colsum(Ref a) {
  Ref result{static_cast<int>(nodes_.size())};
  return make_node(value(a).colwise().sum(), needs_grad(a), [this, a, result] {
    if (!needs_grad(a)) return;
    const Mat& g = nodes_[result.id].grad;
    grad_buffer(a.id) += Mat::Ones(value(a).rows(), 1) * g;
  });
}

Tape::Ref Tape::sum(Ref a) {
  Mat out(1, 1);
  out(0, 0) = value(a).sum();
  Ref result{static_cast<int>(nodes_.size())};
  return make_node(std::move(out), needs_grad(a), [this, a, result] {
    if (!needs_grad(a)) return;
    grad_buffer(a.id).array() += nodes_[result.id].grad(0, 0);
  });
}

Tape::Ref Tape::sumsq(Ref a) {
  Mat out(1, 1);
  out(0, 0) = value(a).squaredNorm();
  Ref result{static_cast<int>(nodes_.size())};
  return make_node(std::move(out), needs_grad(a), [this, a, result] {
    if (!needs_grad(a)) return;
    grad_buffer(a.id) += 2.0 * nodes_[result.id].grad(0, 0) * value(a);
  });
}

Tape::Ref Tape::huber_sum(Ref err, double delta) {
  const Mat& e = value(err);
  double total = 0.0;
  for (Eigen::Index i = 0; i < e.size(); ++i) {
    const double x = std::abs(e(i));
    total += x <= delta ? 0.5 * x * x : delta * (x - 0.5 * delta);
  }
  Mat out(1, 1);
  out(0, 0) = total;
  Ref result{static_cast<int>(nodes_.size())};
  return make_node(std::move(out), needs_grad(err), [this, err, delta, result] {
    if (!needs_grad(err)) return;
    const double g = nodes_[result.id].grad(0, 0);
    const Mat& e = nodes_[err.id].value;
    Mat& de = grad_buffer(err.id);
    for (Eigen::Index i = 0; i < e.size(); ++i) {
      const double x = e(i);
      de(i) += g * (std::abs(x) <= delta ? x : (x > 0.0 ? delta : -delta));
    }
  });
}

void Tape::backward(Ref root) {
  if (value(root).rows() != 1 || value(root).cols() != 1) {
    throw std::invalid_argument("backward: root must be scalar");
  }
  grad_buffer(root.id)(0, 0) = 1.0;
  for (int id = root.id; id >= 0; --id) {
    Node& node = nodes_[id];
    if (node.pullback && node.grad.size() != 0) node.pullback();
  }
}

}  // namespace amod::neural
