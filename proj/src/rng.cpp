#include "dmorse/rng.hpp"

namespace dmorse {

static_assert(Rng::min() == 0);

}  // namespace dmorse
