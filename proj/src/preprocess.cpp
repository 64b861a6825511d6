#include "mvkid/preprocess.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace mvkid {

namespace {

double or_zero(double x) { return is_missing(x) ? 0.0 : x; }

} // namespace

Session impute_missing(const Session& s)
{
    Session out = s;
    for (auto& e : out.alphabet_view) {
        e.time_since_last_key = or_zero(e.time_since_last_key);
        e.distance_from_last_key = or_zero(e.distance_from_last_key);
    }
    for (auto& e : out.symbol_view)
        e.time_since_last_key = or_zero(e.time_since_last_key);
    return out;
}

Matrix raw_view_features(const Session& s, ViewKind v)
{
    Matrix m(s.view_length(v), feature_count(v));
    switch (v) {
    case ViewKind::Alphabet:
        for (std::size_t t = 0; t < m.rows; ++t) {
            const auto& e = s.alphabet_view[t];
            m(t, 0) = e.duration;
            m(t, 1) = e.time_since_last_key;
            m(t, 2) = e.distance_from_last_key;
        }
        break;
    case ViewKind::Symbol:
        for (std::size_t t = 0; t < m.rows; ++t) {
            const auto& e = s.symbol_view[t];
            m(t, static_cast<std::size_t>(e.category)) = 1.0;
            m(t, kNumSymbolCategories) = e.duration;
            m(t, kNumSymbolCategories + 1) = e.time_since_last_key;
        }
        break;
    case ViewKind::Accel:
        for (std::size_t t = 0; t < m.rows; ++t) {
            const auto& a = s.accel_view[t];
            m(t, 0) = a.ax;
            m(t, 1) = a.ay;
            m(t, 2) = a.az;
        }
        break;
    }
    return m;
}

double Normalizer::scale(ViewKind v, std::size_t f, double x) const
{
    const std::size_t i = index_of(v);
    const double lo = min[i][f];
    const double hi = max[i][f];
    return std::clamp((x - lo) / (hi - lo), 0.0, 1.0);
}

Normalizer fit_normalizer(const Dataset& train)
{
    if (train.empty())
        throw std::invalid_argument("fit_normalizer: empty dataset");
    Normalizer nz;
    std::array<bool, kNumViews> seen{};
    for (auto v : kAllViews) {
        const auto i = index_of(v);
        nz.min[i].assign(feature_count(v), std::numeric_limits<double>::infinity());
        nz.max[i].assign(feature_count(v), -std::numeric_limits<double>::infinity());
    }
    for (const auto& raw : train.sessions()) {
        const Session s = impute_missing(raw);
        for (auto v : kAllViews) {
            const auto i = index_of(v);
            const Matrix m = raw_view_features(s, v);
            seen[i] = seen[i] || m.rows > 0;
            for (std::size_t t = 0; t < m.rows; ++t)
                for (std::size_t f = 0; f < m.cols; ++f) {
                    nz.min[i][f] = std::min(nz.min[i][f], m(t, f));
                    nz.max[i][f] = std::max(nz.max[i][f], m(t, f));
                }
        }
    }
    for (auto v : kAllViews) {
        const auto i = index_of(v);
        for (std::size_t f = 0; f < feature_count(v); ++f) {
            if (!seen[i]) {
                // No training data at all for this view: identity on [0, 1].
                nz.min[i][f] = 0.0;
                nz.max[i][f] = 1.0;
            } else if (!(nz.max[i][f] > nz.min[i][f])) {
                nz.max[i][f] = nz.min[i][f] + 1.0;
            }
        }
    }
    return nz;
}

EncodedView encode_view(const Normalizer& nz, const Session& imputed, ViewKind v, std::size_t max_len)
{
    const Matrix raw = raw_view_features(imputed, v);
    EncodedView ev;
    ev.values = Matrix(max_len, raw.cols);
    ev.mask.assign(max_len, 0);
    ev.true_length = std::min(raw.rows, max_len);
    const std::size_t skip = raw.rows - ev.true_length;
    for (std::size_t t = 0; t < ev.true_length; ++t) {
        for (std::size_t f = 0; f < raw.cols; ++f)
            ev.values(t, f) = nz.scale(v, f, raw(skip + t, f));
        ev.mask[t] = 1;
    }
    return ev;
}

EncodedSession apply_normalizer(const Normalizer& nz, const Session& s, const MaxLens& max_len)
{
    const Session imputed = impute_missing(s);
    EncodedSession out;
    for (auto v : kAllViews)
        out[index_of(v)] = encode_view(nz, imputed, v, max_len[index_of(v)]);
    return out;
}

} // namespace mvkid
