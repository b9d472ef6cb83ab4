#pragma once

#include <span>
#include <vector>

#include <Eigen/SparseCore>

#include "rcto/domain.hpp"

namespace rcto {

/// Linear-decay density filter: weight max(0, R - |c_e - c_i|) between
/// element centres, rows normalized to sum to one.
class DensityFilter
{
public:
    DensityFilter(const Mesh& mesh, double radius);

    std::vector<double> apply(std::span<const double> x) const;
    std::vector<double> apply_transpose(std::span<const double> y) const;

    /// Row-normalized filter matrix.
    const Eigen::SparseMatrix<double, Eigen::RowMajor>& matrix() const { return H_; }
    double radius() const { return radius_; }

private:
    double radius_;
    Eigen::SparseMatrix<double, Eigen::RowMajor> H_;
};

/// Projection 1 - exp(-beta r) + r exp(-beta); identity at beta = 0 and
/// fixes r = 0 and r = 1 for every beta.
double heaviside_project(double filtered, double beta);
double heaviside_derivative(double filtered, double beta);

/// Design variables -> physical densities: density filter, optionally
/// followed by the Heaviside projection. The forward pass is cached and
/// back-propagation refuses to run against a stale or missing cache.
class FilterChain
{
public:
    FilterChain(const Mesh& mesh, double radius, bool projection);

    const std::vector<double>& forward(std::span<const double> x, double beta);
    std::vector<double> backprop(std::span<const double> d_physical) const;

    /// Drops the cached forward pass.
    void invalidate() { valid_ = false; }

    bool projection() const { return projection_; }
    const std::vector<double>& filtered() const { return filtered_; }
    const std::vector<double>& physical() const { return physical_; }
    const DensityFilter& density_filter() const { return filter_; }

private:
    DensityFilter filter_;
    bool projection_;
    bool valid_ = false;
    double beta_ = 0.0;
    std::vector<double> filtered_;
    std::vector<double> physical_;
};

} // namespace rcto
