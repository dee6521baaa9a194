#pragma once

#include <vector>

#include "geo/vec.h"

namespace geo {

double mean(const std::vector<double>& xs);
Vec2 centroid(const std::vector<Vec2>& pts);

}  // namespace geo
