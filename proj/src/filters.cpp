#include "rcto/filters.hpp"

#include <algorithm>
#include <cmath>

#include "rcto/errors.hpp"

namespace rcto {

DensityFilter::DensityFilter(const Mesh& mesh, double radius) : radius_(radius)
{
    const int n = mesh.element_count();
    const double h = mesh.element_size;
    const int reach = static_cast<int>(std::ceil(radius / h));
    std::vector<Eigen::Triplet<double>> t;
    for (int i = 0; i < mesh.nx; ++i) {
        for (int j = 0; j < mesh.ny; ++j) {
            const int e = mesh.element_id(i, j);
            std::vector<Eigen::Triplet<double>> row;
            double sum = 0.0;
            for (int i2 = std::max(0, i - reach); i2 <= std::min(mesh.nx - 1, i + reach); ++i2) {
                for (int j2 = std::max(0, j - reach); j2 <= std::min(mesh.ny - 1, j + reach); ++j2) {
                    const double dist = h * std::hypot(double(i - i2), double(j - j2));
                    const double w = radius - dist;
                    if (w <= 0.0) continue;
                    row.emplace_back(e, mesh.element_id(i2, j2), w);
                    sum += w;
                }
            }
            if (row.empty()) row.emplace_back(e, e, sum = 1.0);
            for (const auto& r : row) t.emplace_back(r.row(), r.col(), r.value() / sum);
        }
    }
    H_.resize(n, n);
    H_.setFromTriplets(t.begin(), t.end());
}

std::vector<double> DensityFilter::apply(std::span<const double> x) const
{
    Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(x.size()));
    const Eigen::VectorXd y = H_ * xv;
    return {y.data(), y.data() + y.size()};
}

std::vector<double> DensityFilter::apply_transpose(std::span<const double> y) const
{
    Eigen::Map<const Eigen::VectorXd> yv(y.data(), static_cast<Eigen::Index>(y.size()));
    const Eigen::VectorXd x = H_.transpose() * yv;
    return {x.data(), x.data() + x.size()};
}

double heaviside_project(double r, double beta)
{
    if (beta == 0.0) return r;
    return 1.0 - std::exp(-beta * r) + r * std::exp(-beta);
}

double heaviside_derivative(double r, double beta)
{
    if (beta == 0.0) return 1.0;
    return beta * std::exp(-beta * r) + std::exp(-beta);
}

FilterChain::FilterChain(const Mesh& mesh, double radius, bool projection)
    : filter_(mesh, radius), projection_(projection)
{
}

const std::vector<double>& FilterChain::forward(std::span<const double> x, double beta)
{
    filtered_ = filter_.apply(x);
    beta_ = projection_ ? beta : 0.0;
    physical_.resize(filtered_.size());
    for (std::size_t k = 0; k < filtered_.size(); ++k) {
        physical_[k] = projection_ ? heaviside_project(filtered_[k], beta_) : filtered_[k];
    }
    valid_ = true;
    return physical_;
}

std::vector<double> FilterChain::backprop(std::span<const double> d_physical) const
{
    if (!valid_) throw Error("stale-cache", "filter back-propagation requested without a current forward pass");
    if (d_physical.size() != physical_.size())
        throw Error("stale-cache", "sensitivity length does not match the cached forward pass");
    std::vector<double> d_filtered(d_physical.begin(), d_physical.end());
    if (projection_) {
        for (std::size_t k = 0; k < d_filtered.size(); ++k)
            d_filtered[k] *= heaviside_derivative(filtered_[k], beta_);
    }
    return filter_.apply_transpose(d_filtered);
}

} // namespace rcto
