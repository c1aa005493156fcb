#pragma once

#include <string>

#include "subgroupte/matrix.hpp"
#include "subgroupte/netspec.hpp"
#include "subgroupte/params.hpp"
#include "subgroupte/rng.hpp"

namespace subgroupte {

double apply_activation(Activation act, double x);
// derivative wrt pre-activation, evaluated from the pre-activation value
double activation_grad(Activation act, double pre);

// Activations and inputs retained by dense_forward for the matching backward.
struct DenseCache {
    std::string layer;
    Activation act = Activation::identity;
    Matrix input;  // batch x in
    Matrix pre;    // batch x out, before the activation
};

// Registers `layer.w` (in x out) and `layer.b` (1 x out). Weights are
// Kaiming-uniform for relu layers and Xavier-uniform otherwise; biases zero.
void add_dense(ParameterStore& params, const std::string& layer, std::size_t in, std::size_t out,
               Activation act, Rng& rng);

// output = act(input * W + b). The cache retains what backward needs.
Matrix dense_forward(const ParameterStore& params, const std::string& layer, const Matrix& input,
                     Activation act, DenseCache& cache);

// Accumulates dL/dW and dL/db into the gradient buffers; returns dL/dinput.
// Throws if the cache does not match the layer's current shapes.
Matrix dense_backward(ParameterStore& params, const DenseCache& cache, const Matrix& grad_out);

}  // namespace subgroupte
