#pragma once

#include "mvkid/session.hpp"
#include "mvkid/tensor.hpp"

#include <array>
#include <cstdint>
#include <string>

namespace mvkid {

inline constexpr std::array<std::size_t, kNumViews> kViewFeatures{3, 10, 3};

inline constexpr std::size_t feature_count(ViewKind v) { return kViewFeatures[index_of(v)]; }

using MaxLens = std::array<std::size_t, kNumViews>;

inline constexpr MaxLens kDefaultMaxLens{128, 32, 256};

/// Replaces every undefined gap/distance with 0; everything else is untouched.
Session impute_missing(const Session& s);

/// Raw (unnormalized) feature rows of one view. Symbol rows are the one-hot
/// category in columns [0, 8) followed by duration and gap.
Matrix raw_view_features(const Session& s, ViewKind v);

/// Per-feature min/max learned from training sessions.
struct Normalizer {
    std::array<Vector, kNumViews> min;
    std::array<Vector, kNumViews> max;

    double scale(ViewKind v, std::size_t f, double x) const;
    bool operator==(const Normalizer&) const = default;
};

/// Fit over every timestep of every (imputed) training session.
/// A constant feature gets max = min + 1.
Normalizer fit_normalizer(const Dataset& train);

/// Padded T x F values; only the first true_length rows are real.
struct EncodedView {
    Matrix values;
    std::vector<std::uint8_t> mask;
    std::size_t true_length = 0;

    std::size_t features() const { return values.cols; }
    std::size_t padded_length() const { return values.rows; }
};

using EncodedSession = std::array<EncodedView, kNumViews>;

/// Keeps the LAST max_len timesteps; shorter views are zero-padded.
EncodedView encode_view(const Normalizer& nz, const Session& imputed, ViewKind v, std::size_t max_len);

/// Imputes, normalizes (clamped to [0, 1]) and pads all three views.
EncodedSession apply_normalizer(const Normalizer& nz, const Session& s, const MaxLens& max_len = kDefaultMaxLens);

} // namespace mvkid
