#pragma once

#include "mvkid/rng.hpp"
#include "mvkid/session.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace mvkid {

/// Generative parameters of one synthetic user.
struct UserProfile {
    double dwell_mean = 0.10;
    double dwell_std = 0.03;
    double gap_shape = 2.0;
    double gap_scale = 0.12;
    double dist_mean = 0.35;
    double dist_std = 0.10;
    std::array<double, kNumSymbolCategories> category_weights{0.35, 0.15, 0.08, 0.10, 0.12, 0.05, 0.10, 0.05};
    std::array<double, 3> accel_base{0.3, 0.5, 9.6};
    std::array<double, 3> accel_amp{0.6, 0.6, 0.6};
    double accel_freq = 0.3;
    double accel_noise_std = 0.4;
    double keys_per_session_mean = 40.0;
    double symbol_rate = 0.25;

    void validate() const;
};

struct GenConfig {
    std::size_t n_users = 5;
    std::size_t sessions_per_user = 100;
    double separation = 2.0;
    std::uint64_t seed = 1;
    /// In [0, 1]: per view, users are paired and each pair's anchors are pulled
    /// towards their midpoint by this fraction (1 makes the pair coincide in that view).
    /// Pairings differ between views.
    double view_overlap = 0.0;
    double keys_per_session = 40.0;

    void validate() const;
};

/// Dimension of the latent anchor each profile is derived from.
/// Blocks: alphabet [0,3), symbol [3,12), accel [12,19).
inline constexpr std::size_t kLatentDim = 19;

using Anchor = std::array<double, kLatentDim>;

/// Latent anchors (center + separation * direction_u), overlap already applied.
std::vector<Anchor> make_anchors(const GenConfig& cfg);

UserProfile profile_from_anchor(const Anchor& a, double keys_per_session);

std::vector<UserProfile> make_profiles(const GenConfig& cfg);

/// Session views only; caller attaches user/session ids.
Session generate_session(const UserProfile& p, Rng& rng);

std::string synthetic_user_id(std::size_t user, std::size_t n_users);
std::string synthetic_session_id(const std::string& user_id, std::size_t session);

/// Each (user, session) draws from its own counter-keyed stream, so the
/// parallel and sequential paths produce identical datasets.
Dataset generate_dataset(const GenConfig& cfg, bool parallel = true);

} // namespace mvkid
