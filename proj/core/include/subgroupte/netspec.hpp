#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace subgroupte {

enum class Activation { identity, relu, sigmoid };

std::string activation_name(Activation a);
Activation activation_from_name(const std::string& name);

struct EncoderSpec {
    std::size_t token_dim = 16;
    std::size_t n_heads = 2;
    bool use_encoder = true;
};

// Shape of the feature-representation substrate. One attention block;
// the feedforward sublayer inside it is 2x token_dim wide.
struct NetSpec {
    std::size_t input_dim = 0;
    std::size_t hidden_dim = 0;
    EncoderSpec encoder;
    Activation activation = Activation::relu;

    std::size_t ffn_dim() const { return 2 * encoder.token_dim; }

    void validate() const {
        if (input_dim == 0) throw std::invalid_argument("NetSpec: input_dim must be > 0");
        if (hidden_dim == 0) throw std::invalid_argument("NetSpec: hidden_dim must be > 0");
        if (encoder.use_encoder) {
            if (encoder.n_heads == 0)
                throw std::invalid_argument("NetSpec: n_heads must be > 0");
            if (encoder.token_dim % encoder.n_heads != 0)
                throw std::invalid_argument(
                    "NetSpec: token_dim (" + std::to_string(encoder.token_dim) +
                    ") must be divisible by n_heads (" + std::to_string(encoder.n_heads) + ")");
        }
    }
};

}  // namespace subgroupte
