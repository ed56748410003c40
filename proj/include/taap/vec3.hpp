#pragma once

#include <cmath>

namespace taap {

struct PositionTag {};
struct FieldTag {};
struct VelocityTag {};

// Role-tagged 3-vector: positions (m), fields (T) and velocities (m/s) do not mix.
template <class Tag>
struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    constexpr Vec3() = default;
    constexpr Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

    constexpr Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    constexpr Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
    constexpr Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }

    friend constexpr Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
    friend constexpr Vec3 operator-(Vec3 a, const Vec3& b) { return a -= b; }
    friend constexpr Vec3 operator*(Vec3 a, double s) { return a *= s; }
    friend constexpr Vec3 operator*(double s, Vec3 a) { return a *= s; }
    friend constexpr bool operator==(const Vec3&, const Vec3&) = default;

    constexpr double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    double norm() const { return std::sqrt(dot(*this)); }
    double rho() const { return std::hypot(x, y); }
    bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

using Position = Vec3<PositionTag>;
using Field = Vec3<FieldTag>;
using Velocity = Vec3<VelocityTag>;

inline Position cylindrical(double rho, double phi, double z) {
    return {rho * std::cos(phi), rho * std::sin(phi), z};
}

}  // namespace taap
