#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "chive/errors.hpp"

namespace chive {

// Rank <= 2, 64-bit values. Vectors are rows x 1.
struct Tensor {
    std::uint32_t rows = 0;
    std::uint32_t cols = 1;
    std::vector<double> values;
};

struct ParamEntry {
    std::string name;
    std::uint32_t rows = 0;
    std::uint32_t cols = 1;
    std::size_t offset = 0;

    std::size_t size() const { return static_cast<std::size_t>(rows) * cols; }
};

// Named parameter tensors in one flat buffer, iterated in registration
// order. Registration happens at model construction only; spans returned by
// values() stay valid afterwards.
class ParameterStore {
public:
    std::size_t add(const std::string& name, std::uint32_t rows, std::uint32_t cols = 1) {
        if (by_name_.count(name)) throw ShapeError("duplicate parameter: " + name);
        ParamEntry entry{name, rows, cols, data_.size()};
        data_.resize(data_.size() + entry.size(), 0.0);
        by_name_.emplace(name, entries_.size());
        entries_.push_back(std::move(entry));
        return entries_.size() - 1;
    }

    std::size_t index(const std::string& name) const {
        auto it = by_name_.find(name);
        if (it == by_name_.end()) throw ShapeError("unknown parameter: " + name);
        return it->second;
    }

    bool contains(const std::string& name) const { return by_name_.count(name) != 0; }

    std::size_t count() const { return entries_.size(); }
    const ParamEntry& entry(std::size_t i) const { return entries_[i]; }

    std::span<double> values(std::size_t i) {
        const ParamEntry& e = entries_[i];
        return {data_.data() + e.offset, e.size()};
    }
    std::span<const double> values(std::size_t i) const {
        const ParamEntry& e = entries_[i];
        return {data_.data() + e.offset, e.size()};
    }

    std::span<double> flat() { return {data_.data(), data_.size()}; }
    std::span<const double> flat() const { return {data_.data(), data_.size()}; }

    std::size_t total_size() const { return data_.size(); }

private:
    std::vector<ParamEntry> entries_;
    std::unordered_map<std::string, std::size_t> by_name_;
    std::vector<double> data_;
};

}  // namespace chive
