#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

// Minimal reverse-mode autodiff over Eigen matrices. Graphs are built fresh
// per forward pass; parameter nodes are persistent leaves whose gradients
// accumulate until the optimizer clears them.
namespace etp::nn {

using Mat = Eigen::MatrixXd;

struct Node {
    std::string name; // set for parameters, empty otherwise
    Mat value;
    Mat grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> inputs;
    std::function<void()> backward_fn;
};

using NodePtr = std::shared_ptr<Node>;

NodePtr make_param(std::string name, Mat value);

struct Var {
    NodePtr node;
    const Mat& value() const { return node->value; }
    Eigen::Index rows() const { return node->value.rows(); }
    Eigen::Index cols() const { return node->value.cols(); }
};

Var constant(Mat value);
Var from_param(const NodePtr& p);

Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var cmul(const Var& a, const Var& b);
Var scalar_mul(const Var& a, double s);
Var add_rowvec(const Var& m, const Var& row);
Var relu(const Var& a);
Var sigmoid(const Var& a);
Var row_softmax(const Var& a);
Var transpose(const Var& a);
Var gather_rows(const Var& a, std::vector<int> indices);
Var concat_cols(const Var& a, const Var& b);
Var mean_all(const Var& a);
Var layer_norm_rows(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);
Var dropout(const Var& a, double rate, std::mt19937_64& rng, bool train_mode);

// Mean over elements of -[t*log(p) + (1-t)*log(1-p)] with p clamped to
// [eps, 1-eps]; clamped elements get zero gradient.
Var binary_cross_entropy_mean(const Var& probs, const Mat& targets, double eps = 1e-7);

// -log softmax(logits)[target] for a single 1xC logit row.
Var softmax_cross_entropy(const Var& logits, int target);

double scalar(const Var& v);

// Backpropagates from a 1x1 root. Gradients accumulate into every
// requires_grad node reachable from the root.
void backward(const Var& root);

// ---------------------------------------------------------------------------
// Optimization
// ---------------------------------------------------------------------------

struct AdamWConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

class AdamW {
public:
    AdamW(std::vector<NodePtr> params, AdamWConfig cfg);

    void zero_grad();
    // Scales all gradients so their global L2 norm is at most max_norm.
    // Returns the norm before clipping.
    double clip_grad_norm(double max_norm);
    // lr_scale multiplies the base rate (warm-up schedules pass < 1).
    void step(double lr_scale = 1.0);

    const std::vector<NodePtr>& params() const { return params_; }

private:
    std::vector<NodePtr> params_;
    AdamWConfig cfg_;
    std::vector<Mat> m_;
    std::vector<Mat> v_;
    long t_ = 0;
};

// Uniform(-limit, limit) init with limit = sqrt(6 / (fan_in + fan_out)).
Mat glorot_uniform(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng);

} // namespace etp::nn
