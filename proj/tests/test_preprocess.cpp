#include "mvkid/preprocess.hpp"

#include <doctest.h>

using namespace mvkid;

namespace {

Session alpha_session(const std::string& id, std::initializer_list<double> durations)
{
    Session s;
    s.user_id = "a";
    s.session_id = id;
    bool first = true;
    for (double d : durations) {
        s.alphabet_view.push_back({d, first ? kMissing : 0.1, first ? kMissing : 0.2});
        first = false;
    }
    return s;
}

} // namespace

TEST_CASE("imputation fills only undefined gaps and distances")
{
    Session s = alpha_session("s", {0.1, 0.2});
    s.symbol_view = {{SymbolCategory::Enter, 0.05, kMissing}, {SymbolCategory::Space, 0.07, 0.3}};
    const Session out = impute_missing(s);
    CHECK(out.alphabet_view[0].time_since_last_key == 0.0);
    CHECK(out.alphabet_view[0].distance_from_last_key == 0.0);
    CHECK(out.alphabet_view[1].time_since_last_key == 0.1);
    CHECK(out.symbol_view[0].time_since_last_key == 0.0);
    CHECK(out.symbol_view[1].time_since_last_key == 0.3);

    const Session clean = impute_missing(out);
    CHECK(session_to_json_line(clean) == session_to_json_line(out));
}

TEST_CASE("symbol rows are one-hot category then duration and gap")
{
    Session s;
    s.symbol_view = {{SymbolCategory::Number, 0.05, 0.3}};
    const Matrix m = raw_view_features(s, ViewKind::Symbol);
    REQUIRE(m.cols == 10);
    for (std::size_t c = 0; c < 8; ++c)
        CHECK(m(0, c) == (c == 3 ? 1.0 : 0.0));
    CHECK(m(0, 8) == 0.05);
    CHECK(m(0, 9) == 0.3);
}

TEST_CASE("normalizer min/max, constant features and clamping")
{
    const Dataset train({alpha_session("s1", {0.2, 0.6}), alpha_session("s2", {1.0})});
    const Normalizer nz = fit_normalizer(train);
    CHECK(nz.min[0][0] == 0.2);
    CHECK(nz.max[0][0] == 1.0);
    CHECK(nz.scale(ViewKind::Alphabet, 0, 0.2) == 0.0);
    CHECK(nz.scale(ViewKind::Alphabet, 0, 1.0) == 1.0);
    CHECK(nz.scale(ViewKind::Alphabet, 0, 0.0) == 0.0);
    CHECK(nz.scale(ViewKind::Alphabet, 0, 3.0) == 1.0);
    // Gap column holds {0 (imputed), 0.1, 0 (imputed)}.
    CHECK(nz.max[0][1] == 0.1);

    Session c1, c2;
    c1.session_id = "c1";
    c2.session_id = "c2";
    c1.user_id = c2.user_id = "a";
    c1.accel_view = {{5.0, 1.0, 2.0}};
    c2.accel_view = {{5.0, 3.0, 2.0}};
    const Normalizer cz = fit_normalizer(Dataset({c1, c2}));
    CHECK(cz.min[2][0] == 5.0);
    CHECK(cz.max[2][0] == 6.0);
    const EncodedSession e = apply_normalizer(cz, c1);
    CHECK(e[2].values(0, 0) == 0.0);
}

TEST_CASE("one-hot columns span [0, 1] once two categories appear")
{
    Session s;
    s.user_id = "a";
    s.session_id = "x";
    s.symbol_view = {{SymbolCategory::Space, 0.1, 0.2}, {SymbolCategory::Shift, 0.1, 0.3}};
    const Normalizer nz = fit_normalizer(Dataset({s}));
    CHECK(nz.min[1][0] == 0.0);
    CHECK(nz.max[1][0] == 1.0);
    CHECK(nz.min[1][6] == 0.0);
    CHECK(nz.max[1][6] == 1.0);
}

TEST_CASE("encoding keeps the last timesteps and pads with a false mask")
{
    const Session s = impute_missing(alpha_session("s", {0.1, 0.2, 0.3, 0.4, 0.5}));
    Normalizer nz;
    for (auto v : kAllViews) {
        nz.min[index_of(v)].assign(feature_count(v), 0.0);
        nz.max[index_of(v)].assign(feature_count(v), 1.0);
    }
    const EncodedView tail = encode_view(nz, s, ViewKind::Alphabet, 3);
    CHECK(tail.true_length == 3);
    CHECK(tail.values(0, 0) == 0.3);
    CHECK(tail.values(2, 0) == 0.5);

    const EncodedView padded = encode_view(nz, s, ViewKind::Alphabet, 8);
    CHECK(padded.true_length == 5);
    CHECK(padded.mask == std::vector<std::uint8_t>{1, 1, 1, 1, 1, 0, 0, 0});
    CHECK(padded.values(7, 0) == 0.0);

    const EncodedView empty = encode_view(nz, s, ViewKind::Accel, 4);
    CHECK(empty.true_length == 0);
    CHECK(empty.mask == std::vector<std::uint8_t>(4, 0));
}

TEST_CASE("a view absent from training maps through the unit range")
{
    const Normalizer nz = fit_normalizer(Dataset({alpha_session("s", {0.1, 0.3})}));
    CHECK(nz.min[2] == Vector{0.0, 0.0, 0.0});
    CHECK(nz.max[2] == Vector{1.0, 1.0, 1.0});
    CHECK_THROWS_AS(fit_normalizer(Dataset()), std::invalid_argument);
}
