#pragma once

#include "mvkid/preprocess.hpp"
#include "mvkid/rng.hpp"

#include <initializer_list>
#include <random>

namespace mvkid::test {

/// Encoded view with `rows` valid rows followed by `pad` zero rows.
inline EncodedView make_view(std::initializer_list<std::initializer_list<double>> rows, std::size_t features,
                             std::size_t pad = 0)
{
    EncodedView v;
    v.values = Matrix(rows.size() + pad, features);
    v.mask.assign(rows.size() + pad, 0);
    std::size_t t = 0;
    for (const auto& r : rows) {
        std::size_t f = 0;
        for (double x : r)
            v.values(t, f++) = x;
        v.mask[t++] = 1;
    }
    v.true_length = rows.size();
    return v;
}

inline EncodedView random_view(std::size_t len, std::size_t features, std::size_t pad, Rng& rng)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    EncodedView v;
    v.values = Matrix(len + pad, features);
    v.mask.assign(len + pad, 0);
    for (std::size_t t = 0; t < len; ++t) {
        for (std::size_t f = 0; f < features; ++f)
            v.values(t, f) = u(rng);
        v.mask[t] = 1;
    }
    v.true_length = len;
    return v;
}

inline EncodedSession random_session(Rng& rng, std::size_t max_len = 6)
{
    std::uniform_int_distribution<std::size_t> len(1, max_len);
    EncodedSession s;
    for (auto v : kAllViews)
        s[index_of(v)] = random_view(len(rng), feature_count(v), 2, rng);
    return s;
}

} // namespace mvkid::test
