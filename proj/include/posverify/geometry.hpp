#pragma once

#include <cmath>
#include <stdexcept>

#include <Eigen/Core>

namespace posverify {

template <typename Scalar>
using Point = Eigen::Matrix<Scalar, 2, 1>;

/// Column j holds the coordinates of point j.
template <typename Scalar>
using PointSet = Eigen::Matrix<Scalar, 2, Eigen::Dynamic>;

using Point2d = Point<double>;
using PointSet2d = PointSet<double>;

/// Axis-aligned deployment rectangle.
template <typename Scalar>
struct Region {
    Scalar x_min = Scalar(0);
    Scalar x_max = Scalar(100);
    Scalar y_min = Scalar(0);
    Scalar y_max = Scalar(100);

    static Region make(Scalar x_min, Scalar x_max, Scalar y_min, Scalar y_max)
    {
        Region r{x_min, x_max, y_min, y_max};
        r.validate();
        return r;
    }

    void validate() const
    {
        if (!(x_min < x_max) || !(y_min < y_max)) {
            throw std::domain_error("Region: degenerate bounds");
        }
    }

    Scalar width() const { return x_max - x_min; }
    Scalar height() const { return y_max - y_min; }
    Scalar diagonal() const { return std::hypot(width(), height()); }

    bool contains(const Point<Scalar>& p) const
    {
        return p.x() >= x_min && p.x() <= x_max && p.y() >= y_min && p.y() <= y_max;
    }

    /// Largest distance from p to any point of the region (attained at a corner).
    Scalar farthest_distance(const Point<Scalar>& p) const
    {
        using std::max;
        const Scalar dx = max(p.x() - x_min, x_max - p.x());
        const Scalar dy = max(p.y() - y_min, y_max - p.y());
        return std::hypot(dx, dy);
    }
};

using Regiond = Region<double>;

} // namespace posverify
