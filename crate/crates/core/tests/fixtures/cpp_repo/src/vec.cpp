#include "geo/vec.h"

#include <cmath>

namespace geo {

double Vec2::norm() const {
    return std::sqrt(dot(*this, *this));
}

Vec2 add(const Vec2& a, const Vec2& b) {
    return Vec2{a.x + b.x, a.y + b.y};
}

Vec2 scale(const Vec2& v, double k) {
    return Vec2{v.x * k, v.y * k};
}

double dot(const Vec2& a, const Vec2& b) {
    return a.x * b.x + a.y * b.y;
}

}  // namespace geo
