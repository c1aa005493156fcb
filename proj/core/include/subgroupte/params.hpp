#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "subgroupte/matrix.hpp"

namespace subgroupte {

// Named parameter tensors with same-shaped gradient buffers. Iteration is in
// name order (std::map) so every pass over the store is deterministic.
class ParameterStore {
public:
    struct Entry {
        Matrix value;
        Matrix grad;
    };

    Matrix& add(const std::string& name, std::size_t rows, std::size_t cols);

    bool contains(const std::string& name) const { return entries_.count(name) != 0; }

    Matrix& value(const std::string& name);
    const Matrix& value(const std::string& name) const;
    Matrix& grad(const std::string& name);
    const Matrix& grad(const std::string& name) const;

    void zero_grads();

    // w <- w - lr * dw for every entry, then zeroes all gradient buffers.
    // Throws std::runtime_error naming the parameter on a non-finite gradient.
    void sgd_update(double lr);

    std::vector<std::string> names() const;
    std::size_t entry_count() const { return entries_.size(); }
    std::size_t parameter_count() const;

    const std::map<std::string, Entry>& entries() const { return entries_; }
    std::map<std::string, Entry>& entries() { return entries_; }

private:
    std::map<std::string, Entry> entries_;
};

}  // namespace subgroupte
