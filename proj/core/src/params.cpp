#include "subgroupte/params.hpp"

#include <cmath>
#include <stdexcept>

namespace subgroupte {

Matrix& ParameterStore::add(const std::string& name, std::size_t rows, std::size_t cols) {
    if (contains(name)) throw std::invalid_argument("ParameterStore: duplicate entry '" + name + "'");
    Entry e;
    e.value = Matrix(rows, cols);
    e.grad = Matrix(rows, cols);
    auto [it, ok] = entries_.emplace(name, std::move(e));
    (void)ok;
    return it->second.value;
}

namespace {
[[noreturn]] void missing(const std::string& name) {
    throw std::invalid_argument("ParameterStore: no entry named '" + name + "'");
}
}  // namespace

Matrix& ParameterStore::value(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end()) missing(name);
    return it->second.value;
}

const Matrix& ParameterStore::value(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) missing(name);
    return it->second.value;
}

Matrix& ParameterStore::grad(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end()) missing(name);
    return it->second.grad;
}

const Matrix& ParameterStore::grad(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) missing(name);
    return it->second.grad;
}

void ParameterStore::zero_grads() {
    for (auto& [name, e] : entries_) e.grad.zero();
}

void ParameterStore::sgd_update(double lr) {
    if (!(lr >= 0.0) || !std::isfinite(lr))
        throw std::invalid_argument("sgd_update: learning rate must be finite and >= 0");
    for (auto& [name, e] : entries_) {
        for (std::size_t i = 0; i < e.grad.size(); ++i) {
            if (!std::isfinite(e.grad.at_flat(i)))
                throw std::runtime_error("sgd_update: non-finite gradient in parameter '" + name +
                                         "'");
        }
    }
    for (auto& [name, e] : entries_) {
        for (std::size_t i = 0; i < e.value.size(); ++i)
            e.value.at_flat(i) -= lr * e.grad.at_flat(i);
        e.grad.zero();
    }
}

std::vector<std::string> ParameterStore::names() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& [name, e] : entries_) out.push_back(name);
    return out;
}

std::size_t ParameterStore::parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, e] : entries_) n += e.value.size();
    return n;
}

}  // namespace subgroupte
