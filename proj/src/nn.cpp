#include "etp/nn.hpp"

#include "etp/errors.hpp"

#include <cmath>
#include <unordered_set>

namespace etp::nn {

namespace {

NodePtr new_node(Mat value, std::vector<NodePtr> inputs) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->grad = Mat::Zero(n->value.rows(), n->value.cols());
    n->inputs = std::move(inputs);
    for (const auto& in : n->inputs) {
        if (in->requires_grad) {
            n->requires_grad = true;
            break;
        }
    }
    return n;
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw BackendError(std::string(op) + ": shape mismatch (" +
                           std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                           " vs " + std::to_string(b.rows()) + "x" +
                           std::to_string(b.cols()) + ")");
    }
}

} // namespace

NodePtr make_param(std::string name, Mat value) {
    auto n = std::make_shared<Node>();
    n->name = std::move(name);
    n->value = std::move(value);
    n->grad = Mat::Zero(n->value.rows(), n->value.cols());
    n->requires_grad = true;
    return n;
}

Var constant(Mat value) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = false;
    return Var{n};
}

Var from_param(const NodePtr& p) { return Var{p}; }

Var matmul(const Var& a, const Var& b) {
    if (a.cols() != b.rows()) throw BackendError("matmul: inner dimension mismatch");
    auto n = new_node(a.value() * b.value(), {a.node, b.node});
    Node* self = n.get();
    Node* na = a.node.get();
    Node* nb = b.node.get();
    n->backward_fn = [self, na, nb]() {
        if (na->requires_grad) na->grad.noalias() += self->grad * nb->value.transpose();
        if (nb->requires_grad) nb->grad.noalias() += na->value.transpose() * self->grad;
    };
    return Var{n};
}

Var add(const Var& a, const Var& b) {
    check_same_shape(a, b, "add");
    auto n = new_node(a.value() + b.value(), {a.node, b.node});
    Node* self = n.get();
    Node* na = a.node.get();
    Node* nb = b.node.get();
    n->backward_fn = [self, na, nb]() {
        if (na->requires_grad) na->grad += self->grad;
        if (nb->requires_grad) nb->grad += self->grad;
    };
    return Var{n};
}

Var sub(const Var& a, const Var& b) {
    check_same_shape(a, b, "sub");
    auto n = new_node(a.value() - b.value(), {a.node, b.node});
    Node* self = n.get();
    Node* na = a.node.get();
    Node* nb = b.node.get();
    n->backward_fn = [self, na, nb]() {
        if (na->requires_grad) na->grad += self->grad;
        if (nb->requires_grad) nb->grad -= self->grad;
    };
    return Var{n};
}

Var cmul(const Var& a, const Var& b) {
    check_same_shape(a, b, "cmul");
    auto n = new_node(a.value().cwiseProduct(b.value()), {a.node, b.node});
    Node* self = n.get();
    Node* na = a.node.get();
    Node* nb = b.node.get();
    n->backward_fn = [self, na, nb]() {
        if (na->requires_grad) na->grad += self->grad.cwiseProduct(nb->value);
        if (nb->requires_grad) nb->grad += self->grad.cwiseProduct(na->value);
    };
    return Var{n};
}

Var scalar_mul(const Var& a, double s) {
    auto n = new_node(a.value() * s, {a.node});
    Node* self = n.get();
    Node* na = a.node.get();
    n->backward_fn = [self, na, s]() {
        if (na->requires_grad) na->grad += self->grad * s;
    };
    return Var{n};
}

Var add_rowvec(const Var& m, const Var& row) {
    if (row.rows() != 1 || row.cols() != m.cols()) {
        throw BackendError("add_rowvec: bias must be 1x" + std::to_string(m.cols()));
    }
    Mat out = m.value();
    out.rowwise() += row.value().row(0);
    auto n = new_node(std::move(out), {m.node, row.node});
    Node* self = n.get();
    Node* nm = m.node.get();
    Node* nr = row.node.get();
    n->backward_fn = [self, nm, nr]() {
        if (nm->requires_grad) nm->grad += self->grad;
        if (nr->requires_grad) nr->grad.row(0) += self->grad.colwise().sum();
    };
    return Var{n};
}

Var relu(const Var& a) {
    auto n = new_node(a.value().cwiseMax(0.0), {a.node});
    Node* self = n.get();
    Node* na = a.node.get();
    n->backward_fn = [self, na]() {
        if (!na->requires_grad) return;
        na->grad += self->grad.cwiseProduct(
            (na->value.array() > 0.0).cast<double>().matrix());
    };
    return Var{n};
}

Var sigmoid(const Var& a) {
    Mat y = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
    auto n = new_node(std::move(y), {a.node});
    Node* self = n.get();
    Node* na = a.node.get();
    n->backward_fn = [self, na]() {
        if (!na->requires_grad) return;
        Eigen::ArrayXXd y = self->value.array();
        na->grad += self->grad.cwiseProduct((y * (1.0 - y)).matrix());
    };
    return Var{n};
}

Var row_softmax(const Var& a) {
    Mat y = a.value();
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
        double m = y.row(i).maxCoeff();
        Eigen::ArrayXd e = (y.row(i).array() - m).exp();
        y.row(i) = (e / e.sum()).matrix();
    }
    auto n = new_node(std::move(y), {a.node});
    Node* self = n.get();
    Node* na = a.node.get();
    n->backward_fn = [self, na]() {
        if (!na->requires_grad) return;
        for (Eigen::Index i = 0; i < self->value.rows(); ++i) {
            double dot = self->grad.row(i).dot(self->value.row(i));
            na->grad.row(i) += ((self->grad.row(i).array() - dot) *
                                self->value.row(i).array())
                                   .matrix();
        }
    };
    return Var{n};
}

Var transpose(const Var& a) {
    auto n = new_node(a.value().transpose(), {a.node});
    Node* self = n.get();
    Node* na = a.node.get();
    n->backward_fn = [self, na]() {
        if (na->requires_grad) na->grad += self->grad.transpose();
    };
    return Var{n};
}

Var gather_rows(const Var& a, std::vector<int> indices) {
    Mat out(static_cast<Eigen::Index>(indices.size()), a.cols());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        int idx = indices[i];
        if (idx < 0 || idx >= a.rows()) {
            throw BackendError("gather_rows: index " + std::to_string(idx) +
                               " out of range for " + std::to_string(a.rows()) + " rows");
        }
        out.row(static_cast<Eigen::Index>(i)) = a.value().row(idx);
    }
    auto n = new_node(std::move(out), {a.node});
    Node* self = n.get();
    Node* na = a.node.get();
    auto idx = std::make_shared<std::vector<int>>(std::move(indices));
    n->backward_fn = [self, na, idx]() {
        if (!na->requires_grad) return;
        for (std::size_t i = 0; i < idx->size(); ++i) {
            na->grad.row((*idx)[i]) += self->grad.row(static_cast<Eigen::Index>(i));
        }
    };
    return Var{n};
}

Var concat_cols(const Var& a, const Var& b) {
    if (a.rows() != b.rows()) throw BackendError("concat_cols: row count mismatch");
    Mat out(a.rows(), a.cols() + b.cols());
    out.leftCols(a.cols()) = a.value();
    out.rightCols(b.cols()) = b.value();
    auto n = new_node(std::move(out), {a.node, b.node});
    Node* self = n.get();
    Node* na = a.node.get();
    Node* nb = b.node.get();
    n->backward_fn = [self, na, nb]() {
        if (na->requires_grad) na->grad += self->grad.leftCols(na->value.cols());
        if (nb->requires_grad) nb->grad += self->grad.rightCols(nb->value.cols());
    };
    return Var{n};
}

Var mean_all(const Var& a) {
    Mat out(1, 1);
    out(0, 0) = a.value().mean();
    auto n = new_node(std::move(out), {a.node});
    Node* self = n.get();
    Node* na = a.node.get();
    n->backward_fn = [self, na]() {
        if (!na->requires_grad) return;
        double scale = self->grad(0, 0) /
                       static_cast<double>(na->value.rows() * na->value.cols());
        na->grad.array() += scale;
    };
    return Var{n};
}

Var layer_norm_rows(const Var& x, const Var& gamma, const Var& beta, double eps) {
    const Eigen::Index rows = x.rows();
    const Eigen::Index cols = x.cols();
    if (gamma.rows() != 1 || gamma.cols() != cols || beta.rows() != 1 || beta.cols() != cols) {
        throw BackendError("layer_norm_rows: gamma/beta must be 1x" + std::to_string(cols));
    }
    using RowArray = Eigen::Array<double, 1, Eigen::Dynamic>;
    Mat xhat(rows, cols);
    Eigen::VectorXd inv_std(rows);
    for (Eigen::Index i = 0; i < rows; ++i) {
        double mu = x.value().row(i).mean();
        RowArray centered = x.value().row(i).array() - mu;
        double var = centered.square().mean();
        double istd = 1.0 / std::sqrt(var + eps);
        inv_std(i) = istd;
        xhat.row(i) = (centered * istd).matrix();
    }
    Mat out(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        out.row(i) = (xhat.row(i).array() * gamma.value().row(0).array() +
                      beta.value().row(0).array())
                         .matrix();
    }
    auto n = new_node(std::move(out), {x.node, gamma.node, beta.node});
    Node* self = n.get();
    Node* nx = x.node.get();
    Node* ng = gamma.node.get();
    Node* nb = beta.node.get();
    auto xh = std::make_shared<Mat>(std::move(xhat));
    auto istd = std::make_shared<Eigen::VectorXd>(std::move(inv_std));
    n->backward_fn = [self, nx, ng, nb, xh, istd]() {
        const Eigen::Index rows = self->value.rows();
        for (Eigen::Index i = 0; i < rows; ++i) {
            RowArray g = self->grad.row(i).array();
            RowArray xr = xh->row(i).array();
            if (nb->requires_grad) nb->grad.row(0) += g.matrix();
            if (ng->requires_grad) ng->grad.row(0) += (g * xr).matrix();
            if (nx->requires_grad) {
                RowArray gh = g * ng->value.row(0).array();
                double mean_gh = gh.mean();
                double mean_ghx = (gh * xr).mean();
                nx->grad.row(i) +=
                    (((gh - mean_gh) - xr * mean_ghx) * (*istd)(i)).matrix();
            }
        }
    };
    return Var{n};
}

Var dropout(const Var& a, double rate, std::mt19937_64& rng, bool train_mode) {
    if (!train_mode || rate <= 0.0) return a;
    if (rate >= 1.0) throw BackendError("dropout rate must be < 1");
    double scale = 1.0 / (1.0 - rate);
    std::bernoulli_distribution keep(1.0 - rate);
    Mat mask(a.rows(), a.cols());
    for (Eigen::Index i = 0; i < mask.rows(); ++i) {
        for (Eigen::Index j = 0; j < mask.cols(); ++j) {
            mask(i, j) = keep(rng) ? scale : 0.0;
        }
    }
    auto n = new_node(a.value().cwiseProduct(mask), {a.node});
    Node* self = n.get();
    Node* na = a.node.get();
    auto msk = std::make_shared<Mat>(std::move(mask));
    n->backward_fn = [self, na, msk]() {
        if (na->requires_grad) na->grad += self->grad.cwiseProduct(*msk);
    };
    return Var{n};
}

Var binary_cross_entropy_mean(const Var& probs, const Mat& targets, double eps) {
    if (probs.rows() != targets.rows() || probs.cols() != targets.cols()) {
        throw BackendError("binary_cross_entropy_mean: shape mismatch");
    }
    const Eigen::Index count = probs.rows() * probs.cols();
    double total = 0.0;
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
        for (Eigen::Index j = 0; j < probs.cols(); ++j) {
            double p = probs.value()(i, j);
            double t = targets(i, j);
            double term = 0.0;
            // Clamp inside the log so a perfect hard fit is exactly zero.
            if (t != 0.0) term -= t * std::log(std::max(p, eps));
            if (t != 1.0) term -= (1.0 - t) * std::log(std::max(1.0 - p, eps));
            total += term;
        }
    }
    Mat out(1, 1);
    out(0, 0) = total / static_cast<double>(count);
    auto n = new_node(std::move(out), {probs.node});
    Node* self = n.get();
    Node* np = probs.node.get();
    auto tgt = std::make_shared<Mat>(targets);
    n->backward_fn = [self, np, tgt, eps, count]() {
        if (!np->requires_grad) return;
        double g = self->grad(0, 0) / static_cast<double>(count);
        for (Eigen::Index i = 0; i < np->value.rows(); ++i) {
            for (Eigen::Index j = 0; j < np->value.cols(); ++j) {
                double p = np->value(i, j);
                if (p <= eps || p >= 1.0 - eps) continue; // clamped region
                double t = (*tgt)(i, j);
                np->grad(i, j) += g * (p - t) / (p * (1.0 - p));
            }
        }
    };
    return Var{n};
}

Var softmax_cross_entropy(const Var& logits, int target) {
    if (logits.rows() != 1) throw BackendError("softmax_cross_entropy: expected 1xC logits");
    if (target < 0 || target >= logits.cols()) {
        throw BackendError("softmax_cross_entropy: target out of range");
    }
    double m = logits.value().row(0).maxCoeff();
    Eigen::ArrayXd e = (logits.value().row(0).array() - m).exp();
    double lse = m + std::log(e.sum());
    Mat out(1, 1);
    out(0, 0) = lse - logits.value()(0, target);
    Eigen::ArrayXd probs = e / e.sum();
    auto n = new_node(std::move(out), {logits.node});
    Node* self = n.get();
    Node* nl = logits.node.get();
    auto p = std::make_shared<Eigen::ArrayXd>(std::move(probs));
    n->backward_fn = [self, nl, p, target]() {
        if (!nl->requires_grad) return;
        double g = self->grad(0, 0);
        nl->grad.row(0) += (g * (*p)).matrix().transpose();
        nl->grad(0, target) -= g;
    };
    return Var{n};
}

double scalar(const Var& v) {
    if (v.rows() != 1 || v.cols() != 1) throw BackendError("scalar: Var is not 1x1");
    return v.value()(0, 0);
}

void backward(const Var& root) {
    if (root.rows() != 1 || root.cols() != 1) {
        throw BackendError("backward: root must be a 1x1 scalar");
    }
    // Iterative post-order topological sort.
    std::vector<Node*> topo;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(root.node.get(), 0);
    visited.insert(root.node.get());
    while (!stack.empty()) {
        auto& [node, child] = stack.back();
        if (child < node->inputs.size()) {
            Node* next = node->inputs[child].get();
            ++child;
            if (next->requires_grad && !visited.count(next)) {
                visited.insert(next);
                stack.emplace_back(next, 0);
            }
        } else {
            topo.push_back(node);
            stack.pop_back();
        }
    }
    root.node->grad(0, 0) = 1.0;
    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
        if ((*it)->backward_fn && (*it)->requires_grad) (*it)->backward_fn();
    }
}

AdamW::AdamW(std::vector<NodePtr> params, AdamWConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
    for (const auto& p : params_) {
        m_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
        v_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
    }
}

void AdamW::zero_grad() {
    for (auto& p : params_) p->grad.setZero();
}

double AdamW::clip_grad_norm(double max_norm) {
    double sq = 0.0;
    for (const auto& p : params_) sq += p->grad.squaredNorm();
    double norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm) {
        double scale = max_norm / (norm + 1e-12);
        for (auto& p : params_) p->grad *= scale;
    }
    return norm;
}

void AdamW::step(double lr_scale) {
    ++t_;
    double lr = cfg_.lr * lr_scale;
    double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Node& p = *params_[i];
        m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * p.grad;
        v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * p.grad.cwiseProduct(p.grad);
        Mat mhat = m_[i] / bc1;
        Mat vhat = v_[i] / bc2;
        if (cfg_.weight_decay > 0.0) p.value -= lr * cfg_.weight_decay * p.value;
        p.value.array() -= lr * mhat.array() / (vhat.array().sqrt() + cfg_.eps);
    }
}

Mat glorot_uniform(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
    double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
    }
    return m;
}

} // namespace etp::nn
