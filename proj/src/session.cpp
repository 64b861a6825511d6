#include "mvkid/session.hpp"

#include "mvkid/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace mvkid {

namespace {

constexpr std::array<std::string_view, kNumViews> kViewNames{"alphabet", "symbol", "accel"};

constexpr std::array<std::string_view, kNumSymbolCategories> kCategoryNames{
    "space", "backspace", "auto_correct", "number", "punctuation", "enter", "shift", "other_symbol"};

class SchemaError : public DatasetError {
public:
    SchemaError(std::size_t line, std::string_view field, std::string_view what)
        : DatasetError("line " + std::to_string(line) + ": field \"" + std::string(field) + "\": " + std::string(what))
    {
    }
};

using nlohmann::json;
using nlohmann::ordered_json;

double read_non_negative(const json& obj, std::string_view key, std::string_view field, std::size_t line, bool nullable)
{
    auto it = obj.find(key);
    if (it == obj.end()) {
        if (nullable)
            return kMissing;
        throw SchemaError(line, field, "missing");
    }
    if (it->is_null()) {
        if (nullable)
            return kMissing;
        throw SchemaError(line, field, "must not be null");
    }
    if (!it->is_number())
        throw SchemaError(line, field, "expected a number");
    const double x = it->get<double>();
    if (!std::isfinite(x) || x < 0.0)
        throw SchemaError(line, field, "must be finite and non-negative");
    return x;
}

double read_finite(const json& obj, std::string_view key, std::size_t line)
{
    auto it = obj.find(key);
    if (it == obj.end())
        throw SchemaError(line, key, "missing");
    if (!it->is_number())
        throw SchemaError(line, key, "expected a number");
    const double x = it->get<double>();
    if (!std::isfinite(x))
        throw SchemaError(line, key, "must be finite");
    return x;
}

const json& read_array(const json& obj, std::string_view key, std::size_t line)
{
    static const json empty = json::array();
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null())
        return empty;
    if (!it->is_array())
        throw SchemaError(line, key, "expected an array");
    return *it;
}

ordered_json number_or_null(double x)
{
    if (is_missing(x))
        return nullptr;
    return x;
}

bool non_negative_or_missing(double x) { return is_missing(x) || (std::isfinite(x) && x >= 0.0); }

} // namespace

std::string_view view_name(ViewKind v) { return kViewNames[index_of(v)]; }

std::optional<ViewKind> parse_view(std::string_view name)
{
    for (std::size_t i = 0; i < kNumViews; ++i)
        if (kViewNames[i] == name)
            return kAllViews[i];
    return std::nullopt;
}

std::string_view category_name(SymbolCategory c) { return kCategoryNames[static_cast<std::size_t>(c)]; }

std::optional<SymbolCategory> parse_category(std::string_view name)
{
    for (std::size_t i = 0; i < kNumSymbolCategories; ++i)
        if (kCategoryNames[i] == name)
            return static_cast<SymbolCategory>(i);
    return std::nullopt;
}

std::size_t Session::view_length(ViewKind v) const
{
    switch (v) {
    case ViewKind::Alphabet:
        return alphabet_view.size();
    case ViewKind::Symbol:
        return symbol_view.size();
    case ViewKind::Accel:
        return accel_view.size();
    }
    return 0;
}

void validate_session(const Session& s)
{
    if (s.empty())
        throw std::invalid_argument("session " + s.session_id + ": all three views are empty");
    for (const auto& e : s.alphabet_view) {
        if (!std::isfinite(e.duration) || e.duration < 0.0 || !non_negative_or_missing(e.time_since_last_key)
            || !non_negative_or_missing(e.distance_from_last_key))
            throw std::invalid_argument("session " + s.session_id + ": invalid alphabet event");
    }
    for (const auto& e : s.symbol_view) {
        if (static_cast<std::size_t>(e.category) >= kNumSymbolCategories)
            throw std::invalid_argument("session " + s.session_id + ": invalid symbol category");
        if (!std::isfinite(e.duration) || e.duration < 0.0 || !non_negative_or_missing(e.time_since_last_key))
            throw std::invalid_argument("session " + s.session_id + ": invalid symbol event");
    }
    for (const auto& a : s.accel_view) {
        if (!std::isfinite(a.ax) || !std::isfinite(a.ay) || !std::isfinite(a.az))
            throw std::invalid_argument("session " + s.session_id + ": non-finite acceleration");
    }
}

Dataset::Dataset(std::vector<Session> sessions) : sessions_(std::move(sessions))
{
    for (const auto& s : sessions_) {
        if (label_of_.find(s.user_id) == label_of_.end()) {
            label_of_.emplace(s.user_id, labels_.size());
            labels_.push_back(s.user_id);
        }
    }
    index();
}

Dataset::Dataset(std::vector<Session> sessions, std::vector<std::string> labels)
    : sessions_(std::move(sessions)), labels_(std::move(labels))
{
    for (std::size_t i = 0; i < labels_.size(); ++i)
        if (!label_of_.emplace(labels_[i], i).second)
            throw DatasetError("duplicate label \"" + labels_[i] + "\"");
    index();
}

void Dataset::index()
{
    std::set<std::string_view> ids;
    session_labels_.clear();
    session_labels_.reserve(sessions_.size());
    for (const auto& s : sessions_) {
        auto it = label_of_.find(s.user_id);
        if (it == label_of_.end())
            throw DatasetError("session " + s.session_id + ": user \"" + s.user_id + "\" missing from label index");
        if (!ids.insert(s.session_id).second)
            throw DatasetError("duplicate session_id \"" + s.session_id + "\"");
        session_labels_.push_back(it->second);
    }
}

std::size_t Dataset::class_of(std::string_view user_id) const
{
    auto it = label_of_.find(user_id);
    if (it == label_of_.end())
        throw DatasetError("unknown user \"" + std::string(user_id) + "\"");
    return it->second;
}

std::vector<std::size_t> Dataset::sessions_per_class() const
{
    std::vector<std::size_t> counts(labels_.size(), 0);
    for (auto c : session_labels_)
        ++counts[c];
    return counts;
}

std::string session_to_json_line(const Session& s)
{
    ordered_json j;
    j["user_id"] = s.user_id;
    j["session_id"] = s.session_id;
    auto& alpha = j["alphabet"] = ordered_json::array();
    for (const auto& e : s.alphabet_view)
        alpha.push_back(ordered_json{{"dur", e.duration},
                                     {"gap", number_or_null(e.time_since_last_key)},
                                     {"dist", number_or_null(e.distance_from_last_key)}});
    auto& sym = j["symbol"] = ordered_json::array();
    for (const auto& e : s.symbol_view)
        sym.push_back(ordered_json{{"cat", std::string(category_name(e.category))},
                                   {"dur", e.duration},
                                   {"gap", number_or_null(e.time_since_last_key)}});
    auto& acc = j["accel"] = ordered_json::array();
    for (const auto& a : s.accel_view)
        acc.push_back(ordered_json{{"ax", a.ax}, {"ay", a.ay}, {"az", a.az}});
    return j.dump();
}

Session session_from_json_line(std::string_view line, std::size_t line_no)
{
    json j;
    try {
        j = json::parse(line);
    } catch (const json::parse_error& e) {
        throw DatasetError("line " + std::to_string(line_no) + ": malformed JSON: " + e.what());
    }
    if (!j.is_object())
        throw DatasetError("line " + std::to_string(line_no) + ": expected a JSON object");

    Session s;
    for (std::string_view key : {"user_id", "session_id"}) {
        auto it = j.find(key);
        if (it == j.end() || !it->is_string() || it->get_ref<const std::string&>().empty())
            throw SchemaError(line_no, key, "expected a non-empty string");
    }
    s.user_id = j["user_id"].get<std::string>();
    s.session_id = j["session_id"].get<std::string>();

    for (const auto& e : read_array(j, "alphabet", line_no)) {
        if (!e.is_object())
            throw SchemaError(line_no, "alphabet", "expected an array of objects");
        s.alphabet_view.push_back({read_non_negative(e, "dur", "dur", line_no, false),
                                   read_non_negative(e, "gap", "gap", line_no, true),
                                   read_non_negative(e, "dist", "dist", line_no, true)});
    }
    for (const auto& e : read_array(j, "symbol", line_no)) {
        if (!e.is_object())
            throw SchemaError(line_no, "symbol", "expected an array of objects");
        auto cat = e.find("cat");
        if (cat == e.end() || !cat->is_string())
            throw SchemaError(line_no, "category", "\"cat\" must be a string");
        auto parsed = parse_category(cat->get_ref<const std::string&>());
        if (!parsed)
            throw SchemaError(line_no, "category",
                              "unknown symbol category \"" + cat->get<std::string>() + "\" in \"cat\"");
        s.symbol_view.push_back({*parsed, read_non_negative(e, "dur", "dur", line_no, false),
                                 read_non_negative(e, "gap", "gap", line_no, true)});
    }
    for (const auto& e : read_array(j, "accel", line_no)) {
        if (!e.is_object())
            throw SchemaError(line_no, "accel", "expected an array of objects");
        s.accel_view.push_back({read_finite(e, "ax", line_no), read_finite(e, "ay", line_no),
                                read_finite(e, "az", line_no)});
    }
    if (s.empty())
        throw SchemaError(line_no, "alphabet/symbol/accel", "at least one view must be non-empty");
    return s;
}

Dataset load_dataset(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw DatasetError("cannot open " + path.string());
    std::vector<Session> sessions;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        sessions.push_back(session_from_json_line(line, line_no));
    }
    if (in.bad())
        throw DatasetError("read failure on " + path.string());
    if (sessions.empty())
        throw DatasetError("empty dataset");
    return Dataset(std::move(sessions));
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw DatasetError("cannot write " + path.string());
    for (const auto& s : ds.sessions())
        out << session_to_json_line(s) << '\n';
    if (!out)
        throw DatasetError("write failure on " + path.string());
}

std::pair<Dataset, Dataset> stratified_split(const Dataset& ds, double test_fraction, std::uint64_t seed)
{
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw std::invalid_argument("test_fraction must lie in (0, 1)");

    const std::size_t k = ds.num_classes();
    std::vector<std::vector<std::size_t>> members(k);
    for (std::size_t i = 0; i < ds.size(); ++i)
        members[ds.label(i)].push_back(i);

    std::vector<char> is_test(ds.size(), 0);
    for (std::size_t c = 0; c < k; ++c) {
        auto& idx = members[c];
        if (idx.empty())
            continue;
        if (idx.size() < 2)
            throw DatasetError("user \"" + ds.labels()[c] + "\" has a single session; cannot split");
        Rng rng = make_rng(stream_key(seed, c));
        std::shuffle(idx.begin(), idx.end(), rng);
        const double raw = std::ceil(test_fraction * static_cast<double>(idx.size()) - 1e-9);
        const auto n_test = std::clamp<std::size_t>(static_cast<std::size_t>(raw), 1, idx.size() - 1);
        for (std::size_t i = 0; i < n_test; ++i)
            is_test[idx[i]] = 1;
    }

    std::vector<Session> train, test;
    for (std::size_t i = 0; i < ds.size(); ++i)
        (is_test[i] ? test : train).push_back(ds.sessions()[i]);
    return {Dataset(std::move(train), ds.labels()), Dataset(std::move(test), ds.labels())};
}

Dataset filter_users(const Dataset& ds, std::size_t n, FilterPolicy policy)
{
    (void)policy; // MostActive is the only policy
    const std::size_t k = ds.num_classes();
    if (n > k)
        throw std::invalid_argument("filter_users: requested " + std::to_string(n) + " users but dataset has "
                                    + std::to_string(k));
    const auto counts = ds.sessions_per_class();
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (counts[a] != counts[b])
            return counts[a] > counts[b];
        return ds.labels()[a] < ds.labels()[b];
    });
    order.resize(n);
    // Kept users retain their original relative label order.
    std::sort(order.begin(), order.end());

    std::vector<char> keep(k, 0);
    std::vector<std::string> labels;
    for (auto c : order) {
        keep[c] = 1;
        labels.push_back(ds.labels()[c]);
    }
    std::vector<Session> sessions;
    for (std::size_t i = 0; i < ds.size(); ++i)
        if (keep[ds.label(i)])
            sessions.push_back(ds.sessions()[i]);
    return Dataset(std::move(sessions), std::move(labels));
}

} // namespace mvkid
