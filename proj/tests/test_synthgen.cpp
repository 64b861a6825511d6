#include "mvkid/synthgen.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace mvkid;

namespace {

double anchor_distance(const Anchor& a, const Anchor& b)
{
    double s = 0.0;
    for (std::size_t i = 0; i < kLatentDim; ++i)
        s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

// Per-view means: dwell, gap, distance; symbol category frequencies; mean acceleration.
std::vector<double> centroid_features(const Session& s)
{
    std::vector<double> f(3 + kNumSymbolCategories + 3, 0.0);
    std::size_t gaps = 0, dists = 0;
    for (const auto& e : s.alphabet_view) {
        f[0] += e.duration;
        if (!is_missing(e.time_since_last_key)) {
            f[1] += e.time_since_last_key;
            ++gaps;
        }
        if (!is_missing(e.distance_from_last_key)) {
            f[2] += e.distance_from_last_key;
            ++dists;
        }
    }
    if (!s.alphabet_view.empty())
        f[0] /= static_cast<double>(s.alphabet_view.size());
    if (gaps)
        f[1] /= static_cast<double>(gaps);
    if (dists)
        f[2] /= static_cast<double>(dists);
    for (const auto& e : s.symbol_view)
        f[3 + static_cast<std::size_t>(e.category)] += 1.0 / static_cast<double>(s.symbol_view.size());
    for (const auto& a : s.accel_view) {
        f[11] += a.ax / static_cast<double>(s.accel_view.size());
        f[12] += a.ay / static_cast<double>(s.accel_view.size());
        f[13] += a.az / static_cast<double>(s.accel_view.size());
    }
    return f;
}

} // namespace

TEST_CASE("zero separation puts every user on one anchor")
{
    GenConfig cfg;
    cfg.separation = 0.0;
    const auto a = make_anchors(cfg);
    for (const auto& x : a)
        CHECK(x == a[0]);
}

TEST_CASE("profiles are deterministic and spread with separation")
{
    GenConfig cfg;
    cfg.seed = 7;
    const auto p1 = make_anchors(cfg), p2 = make_anchors(cfg);
    CHECK(p1 == p2);

    GenConfig tight = cfg;
    tight.separation = 0.5;
    const auto near = make_anchors(tight);
    for (std::size_t a = 0; a < 5; ++a)
        for (std::size_t b = a + 1; b < 5; ++b)
            CHECK(anchor_distance(p1[a], p1[b]) > anchor_distance(near[a], near[b]));
}

TEST_CASE("full overlap makes paired users coincide in one view only")
{
    GenConfig cfg;
    cfg.n_users = 4;
    cfg.view_overlap = 1.0;
    const auto a = make_anchors(cfg);
    // View 0 pairs users (0,1) and (2,3): equal alphabet block, different elsewhere.
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(a[0][i] == a[1][i]);
    bool differs = false;
    for (std::size_t i = 3; i < kLatentDim; ++i)
        differs = differs || a[0][i] != a[1][i];
    CHECK(differs);
    for (std::size_t u = 0; u < 4; ++u)
        for (std::size_t w = u + 1; w < 4; ++w)
            CHECK(a[u] != a[w]);
}

TEST_CASE("symbol rate zero gives an empty symbol view")
{
    UserProfile p;
    p.symbol_rate = 0.0;
    Rng rng(1);
    for (int i = 0; i < 20; ++i) {
        const Session s = generate_session(p, rng);
        CHECK(s.symbol_view.empty());
        CHECK(s.accel_view.size() == 10 * s.alphabet_view.size());
    }
}

TEST_CASE("noise-free flat acceleration equals the base")
{
    UserProfile p;
    p.accel_noise_std = 0.0;
    p.accel_amp = {0.0, 0.0, 0.0};
    Rng rng(2);
    const Session s = generate_session(p, rng);
    REQUIRE(!s.accel_view.empty());
    for (const auto& a : s.accel_view) {
        CHECK(a.ax == p.accel_base[0]);
        CHECK(a.ay == p.accel_base[1]);
        CHECK(a.az == p.accel_base[2]);
    }
}

TEST_CASE("mean dwell recovers the profile within three standard errors")
{
    UserProfile p;
    Rng rng(1);
    double sum = 0.0;
    std::size_t n = 0;
    for (int i = 0; i < 200; ++i) {
        const Session s = generate_session(p, rng);
        for (const auto& e : s.alphabet_view) {
            sum += e.duration;
            ++n;
        }
        CHECK(is_missing(s.alphabet_view.front().time_since_last_key));
    }
    const double mean = sum / static_cast<double>(n);
    CHECK(std::abs(mean - p.dwell_mean) < 3.0 * p.dwell_std / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("dataset counts, ids and determinism")
{
    GenConfig cfg;
    cfg.n_users = 2;
    cfg.sessions_per_user = 2;
    const Dataset ds = generate_dataset(cfg);
    CHECK(ds.size() == 4);
    CHECK(ds.num_classes() == 2);
    CHECK(ds.labels() == std::vector<std::string>{"u01", "u02"});
    CHECK(ds.sessions()[1].session_id == "u01-0002");

    GenConfig big;
    big.sessions_per_user = 20;
    const Dataset a = generate_dataset(big, true), b = generate_dataset(big, false);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        CHECK(session_to_json_line(a.sessions()[i]) == session_to_json_line(b.sessions()[i]));
}

TEST_CASE("nearest-centroid oracle separates five users")
{
    GenConfig cfg;
    cfg.n_users = 5;
    cfg.sessions_per_user = 200;
    cfg.separation = 2.0;
    const Dataset ds = generate_dataset(cfg);

    std::vector<std::vector<double>> feats;
    for (const auto& s : ds.sessions())
        feats.push_back(centroid_features(s));
    const std::size_t d = feats[0].size();

    // Standardize with statistics of the even-indexed (training) sessions.
    std::vector<double> mu(d, 0.0), sd(d, 0.0);
    std::size_t n_train = 0;
    for (std::size_t i = 0; i < feats.size(); i += 2, ++n_train)
        for (std::size_t k = 0; k < d; ++k)
            mu[k] += feats[i][k];
    for (auto& m : mu)
        m /= static_cast<double>(n_train);
    for (std::size_t i = 0; i < feats.size(); i += 2)
        for (std::size_t k = 0; k < d; ++k)
            sd[k] += (feats[i][k] - mu[k]) * (feats[i][k] - mu[k]);
    for (auto& s : sd)
        s = std::sqrt(s / static_cast<double>(n_train)) + 1e-12;
    for (auto& f : feats)
        for (std::size_t k = 0; k < d; ++k)
            f[k] = (f[k] - mu[k]) / sd[k];

    std::vector<std::vector<double>> centroid(5, std::vector<double>(d, 0.0));
    std::vector<double> count(5, 0.0);
    for (std::size_t i = 0; i < feats.size(); i += 2) {
        for (std::size_t k = 0; k < d; ++k)
            centroid[ds.label(i)][k] += feats[i][k];
        count[ds.label(i)] += 1.0;
    }
    for (std::size_t c = 0; c < 5; ++c)
        for (auto& x : centroid[c])
            x /= count[c];

    std::size_t hits = 0, total = 0;
    for (std::size_t i = 1; i < feats.size(); i += 2, ++total) {
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < 5; ++c) {
            double dd = 0.0;
            for (std::size_t k = 0; k < d; ++k)
                dd += (feats[i][k] - centroid[c][k]) * (feats[i][k] - centroid[c][k]);
            if (dd < best_d) {
                best_d = dd;
                best = c;
            }
        }
        hits += best == ds.label(i) ? 1 : 0;
    }
    const double acc = static_cast<double>(hits) / static_cast<double>(total);
    INFO("nearest-centroid accuracy " << acc);
    CHECK(acc > 0.70);
}

TEST_CASE("invalid generator configs are rejected")
{
    GenConfig cfg;
    cfg.n_users = 1;
    CHECK_THROWS_AS(generate_dataset(cfg), std::invalid_argument);
    cfg = {};
    cfg.view_overlap = 1.5;
    CHECK_THROWS_AS(make_anchors(cfg), std::invalid_argument);
}
