#pragma once

// Hidden ground truth of a dataset. Only evaluation code (metrics, RP bookkeeping, tests)
// includes this header; training code works from RegionSample::label alone.

#include <span>

#include "aglrls/synthdata.hpp"

namespace aglrls {

struct EvaluationAccess {
    static std::span<const int> truth(const Dataset& d) { return d.truth_; }
};

}  // namespace aglrls
