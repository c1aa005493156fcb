#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>

#include "doctest.h"
#include "helpers.hpp"
#include "subgroupte/layers.hpp"

using namespace subgroupte;
using testutil::fill_uniform;
using testutil::random_matrix;
using testutil::rel_err;

namespace {

double weighted_output_sum(const ParameterStore& params, const std::string& layer,
                           const Matrix& input, Activation act, const Matrix& coef) {
    DenseCache cache;
    const Matrix out = dense_forward(params, layer, input, act, cache);
    double loss = 0.0;
    for (std::size_t i = 0; i < out.rows() * out.cols(); ++i)
        loss += coef.at_flat(i) * out.at_flat(i);
    return loss;
}

double central_diff(double& slot, const std::function<double()>& f, double eps = 1e-5) {
    const double saved = slot;
    slot = saved + eps;
    const double up = f();
    slot = saved - eps;
    const double down = f();
    slot = saved;
    return (up - down) / (2.0 * eps);
}

}  // namespace

TEST_SUITE("layers") {

TEST_CASE("identity layer passes input through") {
    ParameterStore params;
    Rng rng = make_rng(1);
    add_dense(params, "lin", 2, 2, Activation::identity, rng);
    params.value("lin.w") = Matrix::identity(2);
    params.value("lin.b") = Matrix(1, 2, 0.0);

    DenseCache cache;
    const Matrix out =
        dense_forward(params, "lin", Matrix::from_rows({{1.0, 2.0}}), Activation::identity, cache);
    CHECK(out(0, 0) == 1.0);
    CHECK(out(0, 1) == 2.0);
}

TEST_CASE("relu clips negative pre-activations") {
    ParameterStore params;
    Rng rng = make_rng(1);
    add_dense(params, "r", 2, 1, Activation::relu, rng);
    params.value("r.w") = Matrix::from_rows({{1.0}, {1.0}});
    params.value("r.b") = Matrix::from_rows({{-3.0}});

    DenseCache cache;
    const Matrix out =
        dense_forward(params, "r", Matrix::from_rows({{1.0, 1.0}}), Activation::relu, cache);
    CHECK(out(0, 0) == 0.0);
    CHECK(cache.pre(0, 0) == -1.0);
}

TEST_CASE("random layer matches a straight-loop oracle") {
    ParameterStore params;
    Rng rng = make_rng(55);
    add_dense(params, "d", 4, 3, Activation::sigmoid, rng);
    const Matrix input = random_matrix(5, 4, rng);

    DenseCache cache;
    const Matrix out = dense_forward(params, "d", input, Activation::sigmoid, cache);

    const Matrix& w = params.value("d.w");
    const Matrix& b = params.value("d.b");
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
            double pre = b(0, j);
            for (std::size_t k = 0; k < 4; ++k) pre += input(i, k) * w(k, j);
            CHECK(std::fabs(out(i, j) - 1.0 / (1.0 + std::exp(-pre))) < 1e-12);
        }
}

TEST_CASE("identity backward returns grad_out and input^T grad") {
    ParameterStore params;
    Rng rng = make_rng(9);
    add_dense(params, "lin", 3, 2, Activation::identity, rng);
    const Matrix input = random_matrix(4, 3, rng);

    DenseCache cache;
    dense_forward(params, "lin", input, Activation::identity, cache);
    const Matrix g = random_matrix(4, 2, rng);
    const Matrix grad_in = dense_backward(params, cache, g);

    CHECK(max_abs_diff(grad_in, matmul_a_bt(g, params.value("lin.w"))) < 1e-15);
    CHECK(max_abs_diff(params.grad("lin.w"), matmul_at_b(input, g)) < 1e-15);
    CHECK(max_abs_diff(params.grad("lin.b"), column_sums(g)) < 1e-15);
}

TEST_CASE("dead relu units give zero gradient") {
    ParameterStore params;
    Rng rng = make_rng(2);
    add_dense(params, "r", 1, 1, Activation::relu, rng);
    params.value("r.w") = Matrix::from_rows({{1.0}});
    params.value("r.b") = Matrix::from_rows({{-5.0}});

    DenseCache cache;
    dense_forward(params, "r", Matrix::from_rows({{1.0}}), Activation::relu, cache);
    const Matrix grad_in = dense_backward(params, cache, Matrix::from_rows({{3.0}}));
    CHECK(grad_in(0, 0) == 0.0);
    CHECK(params.grad("r.w")(0, 0) == 0.0);
    CHECK(params.grad("r.b")(0, 0) == 0.0);
}

TEST_CASE("analytic gradients match central finite differences, 100 trials") {
    Rng rng = make_rng(1234);
    const Activation acts[] = {Activation::identity, Activation::relu, Activation::sigmoid};
    int done = 0;
    int attempts = 0;
    while (done < 100 && attempts < 400) {
        ++attempts;
        const Activation act = acts[attempts % 3];
        ParameterStore params;
        add_dense(params, "d", 3, 2, act, rng);
        Matrix input = random_matrix(2, 3, rng);
        const Matrix coef = random_matrix(2, 2, rng, 0.5, 1.5);

        DenseCache cache;
        dense_forward(params, "d", input, act, cache);
        if (act == Activation::relu) {
            bool near_kink = false;
            for (std::size_t i = 0; i < cache.pre.rows() * cache.pre.cols(); ++i)
                if (std::fabs(cache.pre.at_flat(i)) < 1e-3) near_kink = true;
            if (near_kink) continue;
        }

        params.zero_grads();
        dense_forward(params, "d", input, act, cache);
        const Matrix grad_in = dense_backward(params, cache, coef);

        const auto loss = [&] { return weighted_output_sum(params, "d", input, act, coef); };
        double worst = 0.0;
        for (const char* name : {"d.w", "d.b"}) {
            Matrix& w = params.value(name);
            const Matrix& g = params.grad(name);
            for (std::size_t i = 0; i < w.rows() * w.cols(); ++i)
                worst = std::max(worst, rel_err(g.at_flat(i), central_diff(w.at_flat(i), loss)));
        }
        for (std::size_t i = 0; i < input.rows() * input.cols(); ++i)
            worst =
                std::max(worst, rel_err(grad_in.at_flat(i), central_diff(input.at_flat(i), loss)));

        CHECK(worst < 1e-4);
        ++done;
    }
    CHECK(done == 100);
}

TEST_CASE("sgd with lr=0 is the identity") {
    ParameterStore params;
    Rng rng = make_rng(5);
    add_dense(params, "d", 2, 2, Activation::identity, rng);
    const Matrix before = params.value("d.w");
    fill_uniform(params.grad("d.w"), rng);
    params.sgd_update(0.0);
    CHECK(max_abs_diff(params.value("d.w"), before) == 0.0);
}

TEST_CASE("sgd one-step arithmetic") {
    ParameterStore params;
    params.add("w", 1, 1)(0, 0) = 1.0;
    params.grad("w")(0, 0) = 2.0;
    params.sgd_update(0.1);
    CHECK(params.value("w")(0, 0) == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(params.grad("w")(0, 0) == 0.0);
}

TEST_CASE("two updates match a scalar hand-trace") {
    ParameterStore params;
    params.add("w", 1, 1)(0, 0) = 1.0;
    params.grad("w")(0, 0) = 0.3;
    params.sgd_update(0.1);
    params.grad("w")(0, 0) = -0.2;
    params.sgd_update(0.1);
    // 1.0 - 0.1*0.3 = 0.97; 0.97 + 0.1*0.2 = 0.99
    CHECK(std::fabs(params.value("w")(0, 0) - 0.99) < 1e-15);
}

TEST_CASE("non-finite gradient aborts naming the parameter") {
    ParameterStore params;
    params.add("fine", 1, 1);
    params.add("poisoned", 1, 1);
    params.grad("poisoned")(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_WITH_AS(params.sgd_update(0.1),
                         doctest::Contains("poisoned"), std::runtime_error);
}

TEST_CASE("width mismatch names the layer") {
    ParameterStore params;
    Rng rng = make_rng(5);
    add_dense(params, "named", 3, 2, Activation::identity, rng);
    DenseCache cache;
    CHECK_THROWS_WITH_AS(
        dense_forward(params, "named", Matrix(1, 4), Activation::identity, cache),
        doctest::Contains("named"), std::invalid_argument);
}

TEST_CASE("duplicate registration rejected") {
    ParameterStore params;
    params.add("w", 1, 1);
    CHECK_THROWS_AS(params.add("w", 2, 2), std::invalid_argument);
}

}  // TEST_SUITE
