#include "geo/constants.h"

namespace geo {

const double kPi = 3.14159265358979;
int precision = 6;

}  // namespace geo
