#pragma once

#include <ostream>

namespace cavsense {

struct VerifyOptions {
    // Doubles the analytic conv2 gradients before the gradient check.
    bool corrupt_gradient = false;
};

// Fast invariant checks; prints one row per check and returns true when all
// pass.
bool run_verify(std::ostream& out, const VerifyOptions& options = {});

}  // namespace cavsense
