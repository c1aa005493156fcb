#include "subgroupte/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace subgroupte {

std::string activation_name(Activation a) {
    switch (a) {
        case Activation::identity: return "identity";
        case Activation::relu: return "relu";
        case Activation::sigmoid: return "sigmoid";
    }
    throw std::logic_error("activation_name: unknown enum value");
}

Activation activation_from_name(const std::string& name) {
    if (name == "identity") return Activation::identity;
    if (name == "relu") return Activation::relu;
    if (name == "sigmoid") return Activation::sigmoid;
    throw std::invalid_argument("unknown activation '" + name + "'");
}

double apply_activation(Activation act, double x) {
    switch (act) {
        case Activation::identity: return x;
        case Activation::relu: return x > 0.0 ? x : 0.0;
        case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-x));
    }
    throw std::logic_error("apply_activation: unknown enum value");
}

double activation_grad(Activation act, double pre) {
    switch (act) {
        case Activation::identity: return 1.0;
        case Activation::relu: return pre > 0.0 ? 1.0 : 0.0;
        case Activation::sigmoid: {
            const double s = 1.0 / (1.0 + std::exp(-pre));
            return s * (1.0 - s);
        }
    }
    throw std::logic_error("activation_grad: unknown enum value");
}

void add_dense(ParameterStore& params, const std::string& layer, std::size_t in, std::size_t out,
               Activation act, Rng& rng) {
    Matrix& w = params.add(layer + ".w", in, out);
    params.add(layer + ".b", 1, out);
    const double bound = act == Activation::relu
                             ? std::sqrt(6.0 / static_cast<double>(in))
                             : std::sqrt(6.0 / static_cast<double>(in + out));
    for (std::size_t i = 0; i < w.size(); ++i) w.at_flat(i) = uniform_in(rng, -bound, bound);
}

Matrix dense_forward(const ParameterStore& params, const std::string& layer, const Matrix& input,
                     Activation act, DenseCache& cache) {
    const Matrix& w = params.value(layer + ".w");
    const Matrix& b = params.value(layer + ".b");
    if (input.cols() != w.rows())
        throw std::invalid_argument("dense_forward: layer '" + layer + "' expects input width " +
                                    std::to_string(w.rows()) + ", got " +
                                    std::to_string(input.cols()));

    Matrix pre = matmul(input, w);
    add_row_broadcast(pre, b);

    cache.layer = layer;
    cache.act = act;
    cache.input = input;
    cache.pre = pre;

    Matrix out = pre;
    if (act != Activation::identity)
        for (std::size_t i = 0; i < out.size(); ++i)
            out.at_flat(i) = apply_activation(act, out.at_flat(i));
    return out;
}

Matrix dense_backward(ParameterStore& params, const DenseCache& cache, const Matrix& grad_out) {
    const Matrix& w = params.value(cache.layer + ".w");
    if (cache.input.cols() != w.rows() || cache.pre.cols() != w.cols())
        throw std::runtime_error("dense_backward: cache for layer '" + cache.layer +
                                 "' does not match current parameter shapes");
    if (!grad_out.same_shape(cache.pre))
        throw std::runtime_error("dense_backward: grad_out shape " + grad_out.shape_str() +
                                 " does not match cached pre-activation " + cache.pre.shape_str() +
                                 " for layer '" + cache.layer + "'");

    Matrix dpre = grad_out;
    if (cache.act != Activation::identity)
        for (std::size_t i = 0; i < dpre.size(); ++i)
            dpre.at_flat(i) *= activation_grad(cache.act, cache.pre.at_flat(i));

    add_inplace(params.grad(cache.layer + ".w"), matmul_at_b(cache.input, dpre));
    add_inplace(params.grad(cache.layer + ".b"), column_sums(dpre));
    return matmul_a_bt(dpre, w);
}

}  // namespace subgroupte
