#include "ecgad/masking.hpp"

#include <algorithm>
#include <cmath>

#include "ecgad/errors.hpp"

namespace ecgad {

std::pair<GlobalSignal, MaskDescriptor> mask_global(const GlobalSignal& signal, double ratio,
                                                    int patch_len, Rng& rng) {
    const int n = signal.length();
    require(ratio > 0.0 && ratio < 1.0, "mask_global: ratio must be in (0,1)");
    require(patch_len >= 1 && patch_len < n, "mask_global: bad patch length");
    if (ratio * n < patch_len)
        throw ConfigError("mask_global: ratio*D smaller than one patch");

    const int n_patches = static_cast<int>(std::ceil(ratio * n / patch_len));
    const int free_space = n - n_patches * patch_len;
    require(free_space >= 0, "mask_global: patches exceed signal length");

    // Uniform non-overlapping placement: drop n_patches sorted offsets into
    // the free space, then shift each by the patches laid before it.
    std::vector<int> offsets(n_patches);
    for (int& o : offsets) o = rng.uniform_int(0, free_space);
    std::sort(offsets.begin(), offsets.end());

    GlobalSignal masked = signal;
    MaskDescriptor desc;
    desc.kind = MaskKind::ScatteredGlobal;
    desc.mask_ratio = ratio;
    desc.masked_indices.reserve(static_cast<size_t>(n_patches) * patch_len);
    for (int p = 0; p < n_patches; ++p) {
        const int start = offsets[p] + p * patch_len;
        for (int i = 0; i < patch_len; ++i) {
            masked.values[start + i] = kMaskFill;
            desc.masked_indices.push_back(start + i);
        }
    }
    return {std::move(masked), std::move(desc)};
}

std::pair<LocalBeat, MaskDescriptor> mask_local(const LocalBeat& beat, double ratio, Rng& rng) {
    const int n = beat.length();
    require(ratio > 0.0 && ratio < 1.0, "mask_local: ratio must be in (0,1)");
    const int span = std::min(n, static_cast<int>(std::ceil(ratio * n)));
    const int start = rng.uniform_int(0, n - span);

    LocalBeat masked = beat;
    MaskDescriptor desc;
    desc.kind = MaskKind::ContiguousLocal;
    desc.mask_ratio = ratio;
    desc.masked_indices.reserve(span);
    for (int i = start; i < start + span; ++i) {
        masked.values[i] = kMaskFill;
        desc.masked_indices.push_back(i);
    }
    return {std::move(masked), std::move(desc)};
}

const LocalBeat& select_training_beat(const std::vector<LocalBeat>& beats, Rng& rng) {
    require(!beats.empty(), "select_training_beat: empty beat list");
    return beats[rng.uniform_int(0, static_cast<int>(beats.size()) - 1)];
}

GlobalLocalPair make_training_pair(const GlobalSignal& signal, const std::vector<LocalBeat>& beats,
                                   const MaskConfig& cfg, Rng& rng) {
    GlobalLocalPair pair;
    pair.global_clean = signal;
    pair.local_clean = select_training_beat(beats, rng);
    std::tie(pair.global, pair.global_mask) = mask_global(signal, cfg.global_ratio, cfg.patch_len, rng);
    std::tie(pair.local, pair.local_mask) = mask_local(pair.local_clean, cfg.local_ratio, rng);
    return pair;
}

}  // namespace ecgad
