#ifndef PARTSDET_SCHEDULE_HPP
#define PARTSDET_SCHEDULE_HPP

#include <cmath>
#include <cstdint>

namespace partsdet {

// Step decay: lr0 * factor^(-floor(step / drop_every)).
inline double lr_schedule(int64_t step, double lr0, int64_t drop_every,
                          double drop_factor) {
  const int64_t drops = step / drop_every;
  return lr0 * std::pow(drop_factor, -double(drops));
}

}  // namespace partsdet

#endif
