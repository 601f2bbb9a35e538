#pragma once

#include <cstdint>
#include <vector>

#include "varscore/graph.hpp"

namespace varscore {

// Balanced 20-class dataset of masked local environments. The label is a
// deterministic, rotation-invariant function of the neighborhood: one of
// five elements placed in one of four distance bands around the target
// alpha carbon (band b holds 2+b copies). Same seed, same bytes.
std::vector<MaskedGraph> generate_synthetic_res(int n_samples, std::uint64_t seed);

// Recovers the label from geometry and elements alone (no residue types):
// neighbor count and element mix within the graph cutoff of the target.
// Throws ValidationError when the environment matches no class.
int decode_synthetic_label(const MaskedGraph& sample);

}  // namespace varscore
