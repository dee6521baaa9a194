#pragma once

namespace geo {

extern const double kPi;
extern int precision;

}  // namespace geo
