#include "mvkid/session.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

using namespace mvkid;

namespace {

Session tiny(const std::string& user, const std::string& id)
{
    Session s;
    s.user_id = user;
    s.session_id = id;
    s.alphabet_view = {{0.1, kMissing, kMissing}, {0.12, 0.2, 0.3}};
    s.symbol_view = {{SymbolCategory::Space, 0.08, 0.15}};
    s.accel_view = {{0.1, 0.2, 9.8}};
    return s;
}

Dataset with_counts(std::initializer_list<std::pair<const char*, int>> counts)
{
    std::vector<Session> v;
    for (auto [user, n] : counts)
        for (int i = 0; i < n; ++i)
            v.push_back(tiny(user, std::string(user) + "-" + std::to_string(i)));
    return Dataset(std::move(v));
}

std::filesystem::path temp_file(const std::string& name, const std::string& text)
{
    auto p = std::filesystem::temp_directory_path() / ("mvkid_test_" + name);
    std::ofstream(p) << text;
    return p;
}

} // namespace

TEST_CASE("json line round trip keeps missing values as null")
{
    const Session s = tiny("a", "a-0");
    const std::string line = session_to_json_line(s);
    CHECK(line.find("\"gap\":null") != std::string::npos);
    CHECK(line.rfind("{\"user_id\":\"a\",\"session_id\":\"a-0\",\"alphabet\"", 0) == 0);
    const Session back = session_from_json_line(line, 1);
    CHECK(back.user_id == "a");
    REQUIRE(back.alphabet_view.size() == 2);
    CHECK(is_missing(back.alphabet_view[0].time_since_last_key));
    CHECK(back.alphabet_view[1].distance_from_last_key == 0.3);
    CHECK(back.symbol_view[0].category == SymbolCategory::Space);
    CHECK(session_to_json_line(back) == line);
}

TEST_CASE("empty file is an empty dataset error")
{
    const auto p = temp_file("empty.jsonl", "");
    CHECK_THROWS_WITH_AS(load_dataset(p), "empty dataset", DatasetError);
}

TEST_CASE("labels follow first appearance")
{
    const std::string text = session_to_json_line(tiny("b", "s1")) + "\n" + session_to_json_line(tiny("a", "s2")) + "\n";
    const Dataset ds = load_dataset(temp_file("two.jsonl", text));
    REQUIRE(ds.num_classes() == 2);
    CHECK(ds.class_of("b") == 0);
    CHECK(ds.class_of("a") == 1);
}

TEST_CASE("unknown category names line and field")
{
    const std::string line =
        R"({"user_id":"a","session_id":"x","alphabet":[],"symbol":[{"cat":"tab","dur":0.1,"gap":0.2}],"accel":[]})";
    try {
        session_from_json_line(line, 1);
        FAIL("expected a schema error");
    } catch (const DatasetError& e) {
        const std::string what = e.what();
        CHECK(what.find("line 1") != std::string::npos);
        CHECK(what.find("\"category\"") != std::string::npos);
    }
}

TEST_CASE("loader rejects malformed records")
{
    CHECK_THROWS_AS(session_from_json_line("{not json", 3), DatasetError);
    CHECK_THROWS_AS(session_from_json_line(R"({"user_id":"a","session_id":"x","alphabet":[{"dur":-1}]})", 1),
                    DatasetError);
    CHECK_THROWS_AS(session_from_json_line(R"({"user_id":"","session_id":"x","accel":[{"ax":0,"ay":0,"az":0}]})", 1),
                    DatasetError);
    CHECK_THROWS_AS(session_from_json_line(R"({"user_id":"a","session_id":"x"})", 1), DatasetError);
    CHECK_THROWS_AS(Dataset({tiny("a", "same"), tiny("b", "same")}), DatasetError);
}

TEST_CASE("save and load reproduce the same bytes")
{
    const Dataset ds = with_counts({{"a", 3}, {"b", 2}});
    const auto p = std::filesystem::temp_directory_path() / "mvkid_test_rt.jsonl";
    save_dataset(ds, p);
    const Dataset back = load_dataset(p);
    CHECK(back.size() == 5);
    CHECK(back.labels() == ds.labels());
    const auto p2 = std::filesystem::temp_directory_path() / "mvkid_test_rt2.jsonl";
    save_dataset(back, p2);
    std::ifstream a(p), b(p2);
    CHECK(std::string(std::istreambuf_iterator<char>(a), {}) == std::string(std::istreambuf_iterator<char>(b), {}));
}

TEST_CASE("stratified split sizes, determinism and preconditions")
{
    const Dataset ds = with_counts({{"a", 10}, {"b", 7}});
    const auto [train, test] = stratified_split(ds, 0.2, 42);
    CHECK(test.sessions_per_class() == std::vector<std::size_t>{2, 2});
    CHECK(train.sessions_per_class() == std::vector<std::size_t>{8, 5});
    CHECK(train.labels() == ds.labels());

    const auto again = stratified_split(ds, 0.2, 42);
    REQUIRE(again.second.size() == test.size());
    for (std::size_t i = 0; i < test.size(); ++i)
        CHECK(again.second.sessions()[i].session_id == test.sessions()[i].session_id);

    CHECK_THROWS_AS(stratified_split(with_counts({{"a", 3}, {"b", 1}}), 0.2, 1), DatasetError);
    CHECK_THROWS_AS(stratified_split(ds, 0.0, 1), std::invalid_argument);
}

TEST_CASE("split partitions the sessions")
{
    const Dataset ds = with_counts({{"a", 9}, {"b", 4}, {"c", 6}});
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto [train, test] = stratified_split(ds, 0.3, seed);
        std::multiset<std::string> ids;
        for (const auto& s : train.sessions())
            ids.insert(s.session_id);
        for (const auto& s : test.sessions())
            ids.insert(s.session_id);
        CHECK(ids.size() == ds.size());
        CHECK(std::set<std::string>(ids.begin(), ids.end()).size() == ds.size());
    }
}

TEST_CASE("filter keeps the most active users with lexical tie-break")
{
    const Dataset ds = with_counts({{"c", 3}, {"a", 5}, {"b", 3}});
    const Dataset two = filter_users(ds, 2);
    CHECK(two.num_classes() == 2);
    CHECK(two.size() == 8);
    std::set<std::string> users(two.labels().begin(), two.labels().end());
    CHECK(users == std::set<std::string>{"a", "b"});

    const Dataset all = filter_users(ds, 3);
    CHECK(std::set<std::string>(all.labels().begin(), all.labels().end())
          == std::set<std::string>{"a", "b", "c"});
    CHECK(all.size() == ds.size());
    CHECK_THROWS(filter_users(ds, 4));
}

TEST_CASE("view names parse both ways")
{
    for (auto v : kAllViews)
        CHECK(parse_view(view_name(v)) == v);
    CHECK_FALSE(parse_view("gyro").has_value());
    for (std::size_t c = 0; c < kNumSymbolCategories; ++c) {
        const auto cat = static_cast<SymbolCategory>(c);
        CHECK(parse_category(category_name(cat)) == cat);
    }
}
