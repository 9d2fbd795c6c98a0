#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "iil/matrix.hpp"

namespace iil {

struct Sample {
    std::vector<double> features;
    std::size_t label = 0;

    bool operator==(const Sample&) const = default;
};

struct Dataset {
    std::size_t dim = 0;
    std::vector<Sample> samples;

    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }
    void push_back(Sample s);
    void append(const Dataset& other);

    bool operator==(const Dataset&) const = default;
};

Matrix feature_matrix(const Dataset& data);
Matrix feature_matrix(const Dataset& data, std::span<const std::size_t> indices);
std::vector<std::size_t> labels_of(const Dataset& data);

// Population per-feature mean and standard deviation.
struct NormStats {
    std::vector<double> mean;
    std::vector<double> stddev;

    std::size_t dim() const { return mean.size(); }
    bool operator==(const NormStats&) const = default;
};

inline constexpr double kStdFloor = 1e-8;

// Standardizes with frozen statistics. A non-positive std is replaced by 1
// with a warning on stderr.
Matrix normalize(const Matrix& batch, const NormStats& stats);
Dataset normalize(const Dataset& data, const NormStats& stats);

}  // namespace iil
