#include "iil/data.hpp"

#include <iostream>
#include <stdexcept>

namespace iil {

void Dataset::push_back(Sample s) {
    if (dim == 0 && samples.empty()) dim = s.features.size();
    if (s.features.size() != dim) throw std::invalid_argument("sample dimension mismatch");
    samples.push_back(std::move(s));
}

void Dataset::append(const Dataset& other) {
    for (const auto& s : other.samples) push_back(s);
}

Matrix feature_matrix(const Dataset& data) {
    Matrix m(data.size(), data.dim);
    for (std::size_t r = 0; r < data.size(); ++r)
        for (std::size_t c = 0; c < data.dim; ++c) m(r, c) = data.samples[r].features[c];
    return m;
}

Matrix feature_matrix(const Dataset& data, std::span<const std::size_t> indices) {
    Matrix m(indices.size(), data.dim);
    for (std::size_t r = 0; r < indices.size(); ++r) {
        const auto& f = data.samples.at(indices[r]).features;
        for (std::size_t c = 0; c < data.dim; ++c) m(r, c) = f[c];
    }
    return m;
}

std::vector<std::size_t> labels_of(const Dataset& data) {
    std::vector<std::size_t> out;
    out.reserve(data.size());
    for (const auto& s : data.samples) out.push_back(s.label);
    return out;
}

Matrix normalize(const Matrix& batch, const NormStats& stats) {
    if (batch.cols() != stats.dim()) throw std::invalid_argument("batch width does not match normalization stats");
    std::vector<double> sd = stats.stddev;
    for (std::size_t c = 0; c < sd.size(); ++c) {
        if (!(sd[c] > 0.0)) {
            std::cerr << "warning: zero std for feature " << c << ", using 1\n";
            sd[c] = 1.0;
        }
    }
    Matrix out(batch.rows(), batch.cols());
    for (std::size_t r = 0; r < batch.rows(); ++r)
        for (std::size_t c = 0; c < batch.cols(); ++c) out(r, c) = (batch(r, c) - stats.mean[c]) / sd[c];
    return out;
}

Dataset normalize(const Dataset& data, const NormStats& stats) {
    const Matrix m = normalize(feature_matrix(data), stats);
    Dataset out;
    out.dim = data.dim;
    out.samples.reserve(data.size());
    for (std::size_t r = 0; r < data.size(); ++r) {
        const auto row = m.row(r);
        out.samples.push_back({std::vector<double>(row.begin(), row.end()), data.samples[r].label});
    }
    return out;
}

}  // namespace iil
