#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace pointkan {

struct GradCheckEntry {
    std::string component;
    double max_error = 0.0;
};

// Finite-difference validation of every hand-written backward pass: basis
// derivatives, linear and KAN layers over all basis families and degrees
// 1..4, edge features, the pooling reductions, softmax cross-entropy, and a
// tiny end-to-end model of each kind. Deterministic per seed.
std::vector<GradCheckEntry> run_gradcheck_suite(std::uint64_t seed);

}  // namespace pointkan
