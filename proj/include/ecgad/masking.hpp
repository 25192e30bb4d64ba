#pragma once

#include <vector>

#include "ecgad/rng.hpp"
#include "ecgad/signal.hpp"

namespace ecgad {

enum class MaskKind { ScatteredGlobal, ContiguousLocal };

struct MaskDescriptor {
    MaskKind kind = MaskKind::ScatteredGlobal;
    std::vector<int> masked_indices;  // sorted
    double mask_ratio = 0.0;
};

// Masked training input: the pair fed to the cross-restoration model plus
// the clean originals used as restoration targets.
struct GlobalLocalPair {
    GlobalSignal global;
    LocalBeat local;
    MaskDescriptor global_mask;
    MaskDescriptor local_mask;
    GlobalSignal global_clean;
    LocalBeat local_clean;
};

inline constexpr double kMaskFill = 0.0;

struct MaskConfig {
    double global_ratio = 0.3;
    double local_ratio = 0.5;
    int patch_len = 50;
};

// ceil(ratio*D/patch_len) non-overlapping fixed-length patches at
// uniform-random starts, values replaced by the fill value.
std::pair<GlobalSignal, MaskDescriptor> mask_global(const GlobalSignal& signal, double ratio,
                                                    int patch_len, Rng& rng);

// One contiguous span of ceil(ratio*d) samples at a uniform-random start.
std::pair<LocalBeat, MaskDescriptor> mask_local(const LocalBeat& beat, double ratio, Rng& rng);

// Uniform pick for training; test-time scoring iterates all beats instead.
const LocalBeat& select_training_beat(const std::vector<LocalBeat>& beats, Rng& rng);

GlobalLocalPair make_training_pair(const GlobalSignal& signal, const std::vector<LocalBeat>& beats,
                                   const MaskConfig& cfg, Rng& rng);

}  // namespace ecgad
