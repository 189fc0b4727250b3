#pragma once

#include <array>
#include <cmath>

namespace spatlog {

/// A point or displacement in d ≤ 2 dimensions; unused coordinates stay 0.
using Point = std::array<double, 2>;

/// Minimum-image component of a displacement on a circle of circumference L.
inline double min_image(double dx, double L) {
    dx = std::fmod(dx, L);
    if (dx > 0.5 * L) dx -= L;
    if (dx < -0.5 * L) dx += L;
    return dx;
}

/// Wrap a coordinate into [0, L).
inline double wrap(double x, double L) {
    double y = std::fmod(x, L);
    if (y < 0) y += L;
    if (y >= L) y = 0.0;  // fmod of tiny negatives rounds up to L
    return y;
}

inline double norm(const Point& p, int d) {
    return d == 1 ? std::abs(p[0]) : std::hypot(p[0], p[1]);
}

/// Minimum-image displacement b - a on the torus [0,L)^d.
inline Point torus_displacement(const Point& a, const Point& b, double L, int d) {
    Point r{0.0, 0.0};
    for (int k = 0; k < d; ++k) r[k] = min_image(b[k] - a[k], L);
    return r;
}

inline double torus_distance(const Point& a, const Point& b, double L, int d) {
    return norm(torus_displacement(a, b, L, d), d);
}

/// Volume of the d-ball of radius r (d = 1: 2r, d = 2: πr²).
inline double ball_volume(double r, int d) {
    return d == 1 ? 2.0 * r : M_PI * r * r;
}

}  // namespace spatlog
