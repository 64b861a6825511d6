#include "mvkid/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

namespace mvkid {

namespace {

constexpr std::size_t kAlphaBlock = 0;
constexpr std::size_t kSymbolBlock = 3;
constexpr std::size_t kAccelBlock = 12;
constexpr std::array<std::size_t, kNumViews + 1> kBlockBounds{kAlphaBlock, kSymbolBlock, kAccelBlock, kLatentDim};

constexpr std::array<double, kNumSymbolCategories> kBaseCategoryWeights{0.35, 0.15, 0.08, 0.10,
                                                                        0.12, 0.05, 0.10, 0.05};

constexpr std::size_t kAccelPerKeystroke = 10;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Partner of `user` in the pairing for `view`: users are rotated by the view
// index and paired consecutively; with an odd count one user stays unpaired.
std::size_t partner(std::size_t user, std::size_t view, std::size_t n)
{
    const std::size_t pos = (user + n - view % n) % n;
    const std::size_t mate = pos ^ 1U;
    if (mate >= n)
        return user;
    return (mate + view) % n;
}

} // namespace

void UserProfile::validate() const
{
    if (!(dwell_std >= 0.0 && dist_std >= 0.0 && accel_noise_std >= 0.0))
        throw std::invalid_argument("UserProfile: standard deviations must be non-negative");
    if (!(gap_shape > 0.0 && gap_scale > 0.0))
        throw std::invalid_argument("UserProfile: gamma parameters must be positive");
    double sum = 0.0;
    for (double w : category_weights) {
        if (!(w >= 0.0))
            throw std::invalid_argument("UserProfile: category weights must be non-negative");
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("UserProfile: category weights must sum to 1");
    if (!(symbol_rate >= 0.0 && symbol_rate <= 1.0))
        throw std::invalid_argument("UserProfile: symbol_rate must lie in [0, 1]");
    if (!(keys_per_session_mean >= 0.0))
        throw std::invalid_argument("UserProfile: keys_per_session_mean must be non-negative");
}

void GenConfig::validate() const
{
    if (n_users < 2)
        throw std::invalid_argument("GenConfig: n_users must be >= 2");
    if (sessions_per_user < 2)
        throw std::invalid_argument("GenConfig: sessions_per_user must be >= 2");
    if (!(separation >= 0.0))
        throw std::invalid_argument("GenConfig: separation must be >= 0");
    if (!(view_overlap >= 0.0 && view_overlap <= 1.0))
        throw std::invalid_argument("GenConfig: view_overlap must lie in [0, 1]");
    if (!(keys_per_session > 0.0))
        throw std::invalid_argument("GenConfig: keys_per_session must be > 0");
}

std::vector<Anchor> make_anchors(const GenConfig& cfg)
{
    cfg.validate();
    const std::size_t n = cfg.n_users;
    std::vector<Anchor> dirs(n);
    for (std::size_t u = 0; u < n; ++u) {
        Rng rng = make_rng(stream_key(hash64(cfg.seed, "profiles"), u));
        std::normal_distribution<double> normal(0.0, 1.0);
        for (auto& d : dirs[u])
            d = normal(rng);
    }

    std::vector<Anchor> anchors(n);
    for (std::size_t u = 0; u < n; ++u)
        for (std::size_t i = 0; i < kLatentDim; ++i)
            anchors[u][i] = cfg.separation * dirs[u][i];

    if (cfg.view_overlap > 0.0) {
        const auto base = anchors;
        for (std::size_t v = 0; v < kNumViews; ++v) {
            for (std::size_t u = 0; u < n; ++u) {
                const std::size_t mate = partner(u, v, n);
                for (std::size_t i = kBlockBounds[v]; i < kBlockBounds[v + 1]; ++i) {
                    const double mid = 0.5 * (base[u][i] + base[mate][i]);
                    anchors[u][i] = (1.0 - cfg.view_overlap) * base[u][i] + cfg.view_overlap * mid;
                }
            }
        }
    }
    return anchors;
}

UserProfile profile_from_anchor(const Anchor& a, double keys_per_session)
{
    UserProfile p;
    p.dwell_mean = 0.10 * std::exp(0.25 * a[kAlphaBlock + 0]);
    p.dwell_std = 0.03;
    p.gap_shape = 2.0;
    p.gap_scale = 0.12 * std::exp(0.25 * a[kAlphaBlock + 1]);
    p.dist_mean = 0.35 * std::exp(0.20 * a[kAlphaBlock + 2]);
    p.dist_std = 0.10;

    std::array<double, kNumSymbolCategories> w{};
    double total = 0.0;
    for (std::size_t c = 0; c < kNumSymbolCategories; ++c) {
        w[c] = kBaseCategoryWeights[c] * std::exp(0.5 * a[kSymbolBlock + c]);
        total += w[c];
    }
    for (std::size_t c = 0; c < kNumSymbolCategories; ++c)
        p.category_weights[c] = w[c] / total;
    p.symbol_rate = sigmoid(std::log(0.25 / 0.75) + 0.3 * a[kSymbolBlock + 8]);

    constexpr std::array<double, 3> base{0.3, 0.5, 9.6};
    for (std::size_t k = 0; k < 3; ++k) {
        p.accel_base[k] = base[k] + 0.4 * a[kAccelBlock + k];
        p.accel_amp[k] = 0.6 * std::exp(0.25 * a[kAccelBlock + 3 + k]);
    }
    p.accel_freq = 0.3 * std::exp(0.2 * a[kAccelBlock + 6]);
    p.accel_noise_std = 0.4;
    p.keys_per_session_mean = keys_per_session;
    return p;
}

std::vector<UserProfile> make_profiles(const GenConfig& cfg)
{
    std::vector<UserProfile> out;
    for (const auto& a : make_anchors(cfg))
        out.push_back(profile_from_anchor(a, cfg.keys_per_session));
    return out;
}

Session generate_session(const UserProfile& p, Rng& rng)
{
    const double keys = p.keys_per_session_mean;
    const double alpha_mean = keys * (1.0 - p.symbol_rate);
    const double symbol_mean = keys * p.symbol_rate;

    std::size_t n_alpha = 0;
    if (alpha_mean > 0.0)
        n_alpha = std::poisson_distribution<std::size_t>(alpha_mean)(rng);
    n_alpha = std::max<std::size_t>(n_alpha, 1);
    std::size_t n_symbol = 0;
    if (symbol_mean > 0.0)
        n_symbol = std::poisson_distribution<std::size_t>(symbol_mean)(rng);

    std::normal_distribution<double> dwell(p.dwell_mean, p.dwell_std);
    std::gamma_distribution<double> gap(p.gap_shape, p.gap_scale);
    std::normal_distribution<double> dist(p.dist_mean, p.dist_std);
    std::discrete_distribution<int> category(p.category_weights.begin(), p.category_weights.end());

    Session s;
    s.alphabet_view.reserve(n_alpha);
    for (std::size_t i = 0; i < n_alpha; ++i) {
        AlphabetEvent e;
        e.duration = std::max(0.0, dwell(rng));
        const double g = gap(rng);
        const double d = std::max(0.0, dist(rng));
        // The first key has no predecessor.
        e.time_since_last_key = i == 0 ? kMissing : g;
        e.distance_from_last_key = i == 0 ? kMissing : d;
        s.alphabet_view.push_back(e);
    }
    s.symbol_view.reserve(n_symbol);
    for (std::size_t i = 0; i < n_symbol; ++i) {
        SymbolEvent e;
        e.category = static_cast<SymbolCategory>(category(rng));
        e.duration = std::max(0.0, dwell(rng));
        const double g = gap(rng);
        e.time_since_last_key = i == 0 ? kMissing : g;
        s.symbol_view.push_back(e);
    }

    const std::size_t n_accel = kAccelPerKeystroke * (n_alpha + n_symbol);
    s.accel_view.reserve(n_accel);
    const bool noisy = p.accel_noise_std > 0.0;
    std::normal_distribution<double> noise(0.0, noisy ? p.accel_noise_std : 1.0);
    for (std::size_t t = 0; t < n_accel; ++t) {
        const double phase = std::sin(p.accel_freq * static_cast<double>(t));
        std::array<double, 3> v{};
        for (std::size_t k = 0; k < 3; ++k) {
            v[k] = p.accel_base[k] + p.accel_amp[k] * phase;
            if (noisy)
                v[k] += noise(rng);
        }
        s.accel_view.push_back({v[0], v[1], v[2]});
    }
    return s;
}

std::string synthetic_user_id(std::size_t user, std::size_t n_users)
{
    const int width = std::max(2, static_cast<int>(std::to_string(n_users).size()));
    char buf[32];
    std::snprintf(buf, sizeof buf, "u%0*zu", width, user + 1);
    return buf;
}

std::string synthetic_session_id(const std::string& user_id, std::size_t session)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "-%04zu", session + 1);
    return user_id + buf;
}

Dataset generate_dataset(const GenConfig& cfg, bool parallel)
{
    const auto profiles = make_profiles(cfg);
    const std::size_t n = cfg.n_users * cfg.sessions_per_user;
    const std::uint64_t key = hash64(cfg.seed, "sessions");
    std::vector<Session> sessions(n);

    auto make = [&](std::size_t i) {
        const std::size_t u = i / cfg.sessions_per_user;
        const std::size_t j = i % cfg.sessions_per_user;
        Rng rng = make_rng(stream_key(key, u, j));
        Session s = generate_session(profiles[u], rng);
        s.user_id = synthetic_user_id(u, cfg.n_users);
        s.session_id = synthetic_session_id(s.user_id, j);
        sessions[i] = std::move(s);
    };

    if (parallel) {
#pragma omp parallel for schedule(dynamic, 16)
        for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i)
            make(static_cast<std::size_t>(i));
    } else {
        for (std::size_t i = 0; i < n; ++i)
            make(i);
    }

    std::vector<std::string> labels;
    for (std::size_t u = 0; u < cfg.n_users; ++u)
        labels.push_back(synthetic_user_id(u, cfg.n_users));
    return Dataset(std::move(sessions), std::move(labels));
}

} // namespace mvkid
