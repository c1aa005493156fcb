#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "subgroupte/model.hpp"

using namespace subgroupte;
using testutil::random_matrix;

namespace {

NetSpec encoder_spec(std::size_t p = 5, std::size_t hidden = 8) {
    NetSpec spec;
    spec.input_dim = p;
    spec.hidden_dim = hidden;
    spec.encoder.token_dim = 4;
    spec.encoder.n_heads = 2;
    return spec;
}

NetSpec mlp_spec(std::size_t p = 5, std::size_t hidden = 8) {
    NetSpec spec = encoder_spec(p, hidden);
    spec.encoder.use_encoder = false;
    return spec;
}

SubgroupTEModel ready_model(const NetSpec& spec, std::size_t K, std::uint64_t seed,
                            std::vector<double> mu) {
    SubgroupTEModel m = SubgroupTEModel::create(spec, K, seed);
    m.set_centroids(Centroids{std::move(mu), 0.5});
    return m;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("identical rows map to identical representations") {
    const SubgroupTEModel m = SubgroupTEModel::create(encoder_spec(), 2, 3);
    Matrix X(3, 5);
    Rng rng = make_rng(8);
    const std::vector<double> row = testutil::random_vector(5, rng);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 5; ++j) X(i, j) = row[j];

    ForwardCache cache;
    const Matrix z = represent(m, X, cache);
    for (std::size_t i = 1; i < 3; ++i)
        for (std::size_t j = 0; j < z.cols(); ++j) CHECK(z(i, j) == z(0, j));
}

TEST_CASE("mlp fallback with zeroed output weights yields the bias row") {
    SubgroupTEModel m = SubgroupTEModel::create(mlp_spec(), 2, 3);
    m.params.value("mlp.l2.w") = Matrix(8, 8, 0.0);
    Matrix& bias = m.params.value("mlp.l2.b");
    for (std::size_t j = 0; j < 8; ++j) bias(0, j) = 0.1 * static_cast<double>(j + 1);

    Rng rng = make_rng(9);
    ForwardCache cache;
    const Matrix z = represent(m, random_matrix(4, 5, rng), cache);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 8; ++j) CHECK(z(i, j) == bias(0, j));
}

TEST_CASE("permuting batch rows permutes representations") {
    const SubgroupTEModel m = SubgroupTEModel::create(encoder_spec(), 2, 4);
    Rng rng = make_rng(10);
    const Matrix X = random_matrix(2, 5, rng);
    Matrix Xswap(2, 5);
    for (std::size_t j = 0; j < 5; ++j) {
        Xswap(0, j) = X(1, j);
        Xswap(1, j) = X(0, j);
    }

    ForwardCache c1, c2;
    const Matrix z = represent(m, X, c1);
    const Matrix zswap = represent(m, Xswap, c2);
    for (std::size_t j = 0; j < z.cols(); ++j) {
        CHECK(z(0, j) == zswap(1, j));
        CHECK(z(1, j) == zswap(0, j));
    }
}

TEST_CASE("equal pre-estimation heads give zero te_pre") {
    SubgroupTEModel m = SubgroupTEModel::create(mlp_spec(), 2, 5);
    m.params.value("p1.w") = m.params.value("p0.w");
    m.params.value("p1.b") = m.params.value("p0.b");

    Rng rng = make_rng(11);
    ForwardCache cache;
    const Matrix z = represent(m, random_matrix(6, 5, rng), cache);
    std::vector<double> y0p, y1p, tep;
    pre_estimate(m, z, cache, y0p, y1p, tep);
    for (double v : tep) CHECK(v == 0.0);
}

TEST_CASE("pre-estimation bias offset shifts te_pre uniformly") {
    SubgroupTEModel m = SubgroupTEModel::create(mlp_spec(), 2, 5);
    m.params.value("p1.w") = m.params.value("p0.w");
    m.params.value("p1.b") = m.params.value("p0.b");
    m.params.value("p1.b")(0, 0) += 5.0;

    Rng rng = make_rng(12);
    ForwardCache cache;
    const Matrix z = represent(m, random_matrix(4, 5, rng), cache);
    std::vector<double> y0p, y1p, tep;
    pre_estimate(m, z, cache, y0p, y1p, tep);
    for (double v : tep) CHECK(v == doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("pre-estimation matches a straight-loop oracle") {
    SubgroupTEModel m = SubgroupTEModel::create(mlp_spec(), 2, 13);
    Rng rng = make_rng(13);
    ForwardCache cache;
    const Matrix z = represent(m, random_matrix(5, 5, rng), cache);
    std::vector<double> y0p, y1p, tep;
    pre_estimate(m, z, cache, y0p, y1p, tep);

    const Matrix& w0 = m.params.value("p0.w");
    const Matrix& w1 = m.params.value("p1.w");
    for (std::size_t i = 0; i < 5; ++i) {
        double a = m.params.value("p0.b")(0, 0);
        double b = m.params.value("p1.b")(0, 0);
        for (std::size_t j = 0; j < z.cols(); ++j) {
            a += z(i, j) * w0(j, 0);
            b += z(i, j) * w1(j, 0);
        }
        CHECK(std::fabs(y0p[i] - a) < 1e-12);
        CHECK(std::fabs(y1p[i] - b) < 1e-12);
        CHECK(std::fabs(tep[i] - (b - a)) < 1e-12);
    }
}

TEST_CASE("single subgroup collapses v to one") {
    const std::vector<double> te = {-2.0, 0.0, 3.5};
    const Matrix v = subgroup_probs(te, Centroids{{1.0}, 0.5});
    for (std::size_t i = 0; i < 3; ++i) CHECK(v(i, 0) == 1.0);
}

TEST_CASE("equidistant centroids split evenly") {
    const std::vector<double> te = {2.0};
    const Matrix v = subgroup_probs(te, Centroids{{1.0, 3.0}, 0.5});
    CHECK(std::fabs(v(0, 0) - 0.5) < 1e-15);
    CHECK(std::fabs(v(0, 1) - 0.5) < 1e-15);
}

TEST_CASE("subgroup probabilities match the direct softmax value") {
    const std::vector<double> te = {1.0};
    const Matrix v = subgroup_probs(te, Centroids{{1.0, 3.0}, 0.5});
    // distances {0, 2}: e^0/(e^0+e^-2), e^-2/(e^0+e^-2)
    CHECK(std::fabs(v(0, 0) - 0.88079707797788243) < 1e-12);
    CHECK(std::fabs(v(0, 1) - 0.11920292202211757) < 1e-12);
}

TEST_CASE("subgroup probabilities live on the simplex") {
    Rng rng = make_rng(14);
    const std::vector<double> te = testutil::random_vector(40, rng, -8.0, 8.0);
    const Matrix v = subgroup_probs(te, Centroids{{-3.0, -0.5, 1.0, 4.0}, 0.5});
    for (std::size_t i = 0; i < v.rows(); ++i) {
        double sum = 0.0;
        for (std::size_t k = 0; k < v.cols(); ++k) {
            CHECK(v(i, k) >= 0.0);
            CHECK(v(i, k) <= 1.0);
            sum += v(i, k);
        }
        CHECK(std::fabs(sum - 1.0) < 1e-9);
    }
}

TEST_CASE("subgroup probabilities are translation equivariant") {
    Rng rng = make_rng(15);
    const std::vector<double> te = testutil::random_vector(20, rng, -4.0, 4.0);
    const double shift = 1.37;
    std::vector<double> te_shift = te;
    for (double& v : te_shift) v += shift;

    const Matrix a = subgroup_probs(te, Centroids{{-1.0, 0.5, 2.0}, 0.5});
    const Matrix b = subgroup_probs(te_shift, Centroids{{-1.0 + shift, 0.5 + shift, 2.0 + shift}, 0.5});
    CHECK(max_abs_diff(a, b) < 1e-12);
}

TEST_CASE("shrinking a centroid distance strictly raises its probability") {
    const std::vector<double> te = {0.0};
    const Matrix far = subgroup_probs(te, Centroids{{1.0, 2.0}, 0.5});
    const Matrix near = subgroup_probs(te, Centroids{{0.5, 2.0}, 0.5});
    CHECK(near(0, 0) > far(0, 0));
}

TEST_CASE("zeroed treatment head gives one half") {
    SubgroupTEModel m = ready_model(mlp_spec(), 2, 16, {-1.0, 1.0});
    m.params.value("ft.l2.w") = Matrix(8, 1, 0.0);
    m.params.value("ft.l2.b") = Matrix(1, 1, 0.0);

    Rng rng = make_rng(16);
    ForwardCache cache;
    const ModelOutput out = forward_full(m, random_matrix(5, 5, rng), cache);
    for (double p : out.t_hat) CHECK(p == 0.5);
}

TEST_CASE("subgroup-informed heads respond to v, hand-traced") {
    NetSpec spec = mlp_spec(1, 1);
    SubgroupTEModel m = SubgroupTEModel::create(spec, 2, 17);
    // u = (z, v0, v1); one relu unit then a linear readout
    m.params.value("f0.l1.w") = Matrix::from_rows({{1.0}, {2.0}, {0.5}});
    m.params.value("f0.l1.b") = Matrix(1, 1, 0.0);
    m.params.value("f0.l2.w") = Matrix::from_rows({{1.0}});
    m.params.value("f0.l2.b") = Matrix(1, 1, 0.0);

    const Matrix z(1, 1, 0.3);
    ForwardCache cache;
    std::vector<double> y0, y1, t_hat;

    Matrix v1(1, 2);
    v1(0, 0) = 0.6;
    v1(0, 1) = 0.4;
    predict_heads(m, z, v1, cache, y0, y1, t_hat);
    CHECK(y0[0] == doctest::Approx(0.3 + 1.2 + 0.2).epsilon(1e-12));

    Matrix v2(1, 2);
    v2(0, 0) = 0.4;
    v2(0, 1) = 0.6;
    predict_heads(m, z, v2, cache, y0, y1, t_hat);
    CHECK(y0[0] == doctest::Approx(0.3 + 0.8 + 0.3).epsilon(1e-12));
}

TEST_CASE("full forward output satisfies the invariants") {
    const SubgroupTEModel m = ready_model(encoder_spec(), 3, 18, {-2.0, 0.0, 2.0});
    Rng rng = make_rng(18);
    ForwardCache cache;
    const ModelOutput out = forward_full(m, random_matrix(7, 5, rng), cache);
    CHECK_NOTHROW(out.validate());
    for (std::size_t i = 0; i < 7; ++i) {
        CHECK(out.te_pre[i] == out.y1_pre[i] - out.y0_pre[i]);
        CHECK(out.t_hat[i] > 0.0);
        CHECK(out.t_hat[i] < 1.0);
    }
}

TEST_CASE("corrupted output fails validation") {
    const SubgroupTEModel m = ready_model(mlp_spec(), 2, 19, {-1.0, 1.0});
    Rng rng = make_rng(19);
    ForwardCache cache;
    ModelOutput out = forward_full(m, random_matrix(3, 5, rng), cache);
    out.te_pre[1] += 0.25;
    CHECK_THROWS_AS(out.validate(), std::logic_error);
}

TEST_CASE("K=1 gives a constant unit v column") {
    const SubgroupTEModel m = ready_model(encoder_spec(), 1, 20, {0.0});
    Rng rng = make_rng(20);
    ForwardCache cache;
    const ModelOutput out = forward_full(m, random_matrix(4, 5, rng), cache);
    for (std::size_t i = 0; i < 4; ++i) CHECK(out.v(i, 0) == 1.0);
}

TEST_CASE("forward_full equals the manual stage composition bitwise") {
    const SubgroupTEModel m = ready_model(encoder_spec(), 3, 21, {-1.5, 0.0, 1.5});
    Rng rng = make_rng(21);
    const Matrix X = random_matrix(6, 5, rng);

    ForwardCache cache;
    const ModelOutput out = forward_full(m, X, cache);

    ForwardCache manual;
    const Matrix z = represent(m, X, manual);
    std::vector<double> y0p, y1p, tep;
    pre_estimate(m, z, manual, y0p, y1p, tep);
    const Matrix v = subgroup_probs(tep, m.centroids);
    std::vector<double> y0, y1, t_hat;
    predict_heads(m, z, v, manual, y0, y1, t_hat);

    CHECK(max_abs_diff(out.z, z) == 0.0);
    CHECK(max_abs_diff(out.v, v) == 0.0);
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(out.y0_pre[i] == y0p[i]);
        CHECK(out.y1_pre[i] == y1p[i]);
        CHECK(out.te_pre[i] == tep[i]);
        CHECK(out.y0[i] == y0[i]);
        CHECK(out.y1[i] == y1[i]);
        CHECK(out.t_hat[i] == t_hat[i]);
    }
}

TEST_CASE("forward before centroid initialization is a state error") {
    const SubgroupTEModel m = SubgroupTEModel::create(encoder_spec(), 2, 22);
    Rng rng = make_rng(22);
    ForwardCache cache;
    CHECK_THROWS_AS(forward_full(m, random_matrix(2, 5, rng), cache), std::logic_error);
}

TEST_CASE("wrong covariate width is a dimension error") {
    const SubgroupTEModel m = ready_model(encoder_spec(), 2, 23, {-1.0, 1.0});
    Rng rng = make_rng(23);
    ForwardCache cache;
    CHECK_THROWS_AS(forward_full(m, random_matrix(2, 7, rng), cache), std::invalid_argument);
}

}  // TEST_SUITE
