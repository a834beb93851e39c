#include <doctest.h>

#include "etp/errors.hpp"
#include "etp/nn.hpp"

#include <cmath>
#include <functional>
#include <random>

using namespace etp;
using nn::Mat;
using nn::Var;

namespace {

Mat random_mat(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double scale = 1.0) {
    std::uniform_real_distribution<double> dist(-scale, scale);
    Mat m(r, c);
    for (Eigen::Index i = 0; i < r; ++i) {
        for (Eigen::Index j = 0; j < c; ++j) m(i, j) = dist(rng);
    }
    return m;
}

// Central finite differences over every coordinate of every param.
void check_gradients(const std::vector<nn::NodePtr>& params,
                     const std::function<Var()>& build_loss, double tol = 1e-6,
                     double h = 1e-6) {
    Var loss = build_loss();
    for (const auto& p : params) p->grad.setZero();
    nn::backward(loss);

    for (const auto& p : params) {
        for (Eigen::Index i = 0; i < p->value.rows(); ++i) {
            for (Eigen::Index j = 0; j < p->value.cols(); ++j) {
                double orig = p->value(i, j);
                p->value(i, j) = orig + h;
                double up = nn::scalar(build_loss());
                p->value(i, j) = orig - h;
                double down = nn::scalar(build_loss());
                p->value(i, j) = orig;
                double fd = (up - down) / (2.0 * h);
                double ad = p->grad(i, j);
                double denom = std::max({std::abs(fd), std::abs(ad), 1e-4});
                CHECK(std::abs(fd - ad) / denom < tol);
            }
        }
    }
}

} // namespace

TEST_CASE("matmul + add_rowvec + relu gradients match finite differences") {
    std::mt19937_64 rng(1);
    auto w = nn::make_param("w", random_mat(4, 3, rng));
    auto b = nn::make_param("b", random_mat(1, 3, rng));
    Mat x = random_mat(5, 4, rng);
    check_gradients({w, b}, [&]() {
        Var h = nn::relu(nn::add_rowvec(nn::matmul(nn::constant(x), nn::from_param(w)),
                                        nn::from_param(b)));
        return nn::mean_all(nn::cmul(h, h));
    });
}

TEST_CASE("sigmoid and row_softmax gradients") {
    std::mt19937_64 rng(2);
    auto w = nn::make_param("w", random_mat(3, 4, rng));
    Mat target = random_mat(3, 4, rng, 0.4);
    check_gradients({w}, [&]() {
        Var s = nn::sigmoid(nn::from_param(w));
        Var sm = nn::row_softmax(nn::from_param(w));
        return nn::mean_all(nn::add(nn::cmul(s, s), nn::cmul(sm, nn::constant(target))));
    });
}

TEST_CASE("transpose, concat_cols, gather_rows gradients") {
    std::mt19937_64 rng(3);
    auto a = nn::make_param("a", random_mat(4, 3, rng));
    auto b = nn::make_param("b", random_mat(4, 2, rng));
    check_gradients({a, b}, [&]() {
        Var cat = nn::concat_cols(nn::from_param(a), nn::from_param(b));      // 4x5
        Var g = nn::gather_rows(cat, {0, 2, 2, 3});                           // 4x5, dup row
        Var t = nn::transpose(g);                                             // 5x4
        return nn::mean_all(nn::cmul(t, t));
    });
}

TEST_CASE("layer_norm_rows gradients") {
    std::mt19937_64 rng(4);
    auto x = nn::make_param("x", random_mat(3, 6, rng));
    auto g = nn::make_param("g", Mat::Ones(1, 6) + 0.1 * random_mat(1, 6, rng));
    auto be = nn::make_param("be", random_mat(1, 6, rng, 0.2));
    Mat probe = random_mat(3, 6, rng);
    check_gradients({x, g, be}, [&]() {
        Var y = nn::layer_norm_rows(nn::from_param(x), nn::from_param(g), nn::from_param(be));
        return nn::mean_all(nn::cmul(y, nn::constant(probe)));
    }, 1e-5);
}

TEST_CASE("binary_cross_entropy_mean value and gradient") {
    // Probs 0.5 everywhere on balanced targets give exactly ln 2.
    auto half = nn::constant(Mat::Constant(4, 1, 0.5));
    Mat targets(4, 1);
    targets << 1, 0, 1, 0;
    Var loss = nn::binary_cross_entropy_mean(half, targets);
    CHECK(nn::scalar(loss) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    // Perfect fit at hard probabilities is exactly zero.
    Mat hard(2, 1);
    hard << 1.0, 0.0;
    Mat hard_t(2, 1);
    hard_t << 1.0, 0.0;
    CHECK(nn::scalar(nn::binary_cross_entropy_mean(nn::constant(hard), hard_t)) == 0.0);

    std::mt19937_64 rng(5);
    auto w = nn::make_param("w", random_mat(5, 1, rng));
    Mat t(5, 1);
    t << 1, 0, 1, 1, 0;
    check_gradients({w}, [&]() {
        return nn::binary_cross_entropy_mean(nn::sigmoid(nn::from_param(w)), t);
    });
}

TEST_CASE("softmax_cross_entropy value and gradient") {
    Mat logits(1, 2);
    logits << 0.0, 0.0;
    CHECK(nn::scalar(nn::softmax_cross_entropy(nn::constant(logits), 0)) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-12));

    std::mt19937_64 rng(6);
    auto w = nn::make_param("w", random_mat(1, 3, rng));
    check_gradients({w}, [&]() { return nn::softmax_cross_entropy(nn::from_param(w), 1); });
}

TEST_CASE("dropout is identity in eval mode and rescales in train mode") {
    std::mt19937_64 rng(7);
    Mat x = Mat::Ones(200, 10);
    Var v = nn::constant(x);
    Var eval_out = nn::dropout(v, 0.5, rng, false);
    CHECK(eval_out.value() == x);

    Var train_out = nn::dropout(v, 0.5, rng, true);
    double mean = train_out.value().mean();
    CHECK(mean == doctest::Approx(1.0).epsilon(0.1)); // kept entries scaled by 2
    for (Eigen::Index i = 0; i < 5; ++i) {
        double val = train_out.value()(i, 0);
        CHECK((val == 0.0 || val == 2.0));
    }
}

TEST_CASE("gradients accumulate across shared subexpressions") {
    auto w = nn::make_param("w", Mat::Constant(1, 1, 3.0));
    Var x = nn::from_param(w);
    Var y = nn::add(nn::cmul(x, x), x); // y = w^2 + w, dy/dw = 2w + 1 = 7
    w->grad.setZero();
    nn::backward(y);
    CHECK(w->grad(0, 0) == doctest::Approx(7.0).epsilon(1e-12));
}

TEST_CASE("backward requires a scalar root") {
    auto w = nn::make_param("w", Mat::Ones(2, 2));
    CHECK_THROWS_AS(nn::backward(nn::from_param(w)), BackendError);
}

TEST_CASE("AdamW reduces a quadratic and respects zero_grad") {
    auto w = nn::make_param("w", Mat::Constant(1, 1, 5.0));
    nn::AdamWConfig cfg;
    cfg.lr = 0.1;
    nn::AdamW opt({w}, cfg);
    for (int i = 0; i < 200; ++i) {
        opt.zero_grad();
        Var loss = nn::mean_all(nn::cmul(nn::from_param(w), nn::from_param(w)));
        nn::backward(loss);
        opt.step();
    }
    CHECK(std::abs(w->value(0, 0)) < 0.05);
}

TEST_CASE("clip_grad_norm caps the global norm") {
    auto a = nn::make_param("a", Mat::Zero(1, 1));
    auto b = nn::make_param("b", Mat::Zero(1, 1));
    a->grad(0, 0) = 3.0;
    b->grad(0, 0) = 4.0;
    nn::AdamW opt({a, b}, {});
    double norm = opt.clip_grad_norm(1.0);
    CHECK(norm == doctest::Approx(5.0));
    double after = std::sqrt(a->grad.squaredNorm() + b->grad.squaredNorm());
    CHECK(after == doctest::Approx(1.0).epsilon(1e-9));
}
