#pragma once

#include <functional>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace amod::neural {

using Mat = Eigen::MatrixXd;

// Reverse-mode differentiation tape over dense matrices. Nodes are created in
// forward order; backward() replays the recorded pullbacks in reverse. One
// tape per loss evaluation; parameters enter as `param` leaves and their
// gradients are read back after backward().
class Tape {
 public:
  struct Ref {
    int id = -1;
    bool valid() const { return id >= 0; }
  };

  Ref input(Mat value) { return make_leaf(std::move(value), false); }
  Ref param(Mat value) { return make_leaf(std::move(value), true); }

  Ref matmul(Ref a, Ref b);
  Ref add(Ref a, Ref b);
  Ref sub(Ref a, Ref b);
  Ref add_col_broadcast(Ref a, Ref bias);  // bias column added to every column
  Ref cmul(Ref a, Ref b);
  Ref scale(Ref a, double factor);
  Ref add_const(Ref a, const Mat& constant);
  Ref relu(Ref a);
  Ref tanh_op(Ref a);
  Ref sigmoid(Ref a);
  Ref softmax_cols(Ref a);  // log-sum-exp stabilized, per column
  Ref log_op(Ref a);
  Ref transpose(Ref a);
  Ref vconcat(std::span<const Ref> parts);
  Ref repeat_cols(Ref a, int n);                       // m x 1 -> m x n
  Ref gather_cols(Ref a, std::vector<int> indices);    // select columns, with repeats
  Ref scale_cols(Ref a, Ref s);                        // s is 1 x n, scales column j by s(j)
  Ref rowsum(Ref a);                                   // m x n -> m x 1
  Ref colsum(Ref a);  // m x n -> 1 x n
  Ref sum(Ref a);     // -> 1 x 1
  Ref sumsq(Ref a);   // -> 1 x 1, sum of squares
  Ref huber_sum(Ref err, double delta);  // -> 1 x 1

  const Mat& value(Ref ref) const { return nodes_[ref.id].value; }
  const Mat& grad(Ref ref) const { return nodes_[ref.id].grad; }

  // Seeds the (1x1) root with 1 and accumulates gradients into every node
  // reachable from it.
  void backward(Ref root);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    Mat grad;
    bool requires_grad = false;
    std::function<void()> pullback;  // empty for leaves
  };

  Ref make_leaf(Mat value, bool requires_grad);
  Ref make_node(Mat value, bool requires_grad, std::function<void()> pullback);
  Mat& grad_buffer(int id);
  bool needs_grad(Ref ref) const { return nodes_[ref.id].requires_grad; }

  std::vector<Node> nodes_;
};

}  // namespace amod::neural
