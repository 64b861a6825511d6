#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mvkid {

/// Sentinel for an undefined gap/distance (e.g. the first keystroke of a session).
inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

inline bool is_missing(double x) { return x != x; }

enum class ViewKind : std::uint8_t { Alphabet = 0, Symbol = 1, Accel = 2 };

inline constexpr std::size_t kNumViews = 3;
inline constexpr std::array<ViewKind, kNumViews> kAllViews{ViewKind::Alphabet, ViewKind::Symbol, ViewKind::Accel};

std::string_view view_name(ViewKind v);
std::optional<ViewKind> parse_view(std::string_view name);

inline constexpr std::size_t index_of(ViewKind v) { return static_cast<std::size_t>(v); }

// Only the category of a non-letter key is recorded, never the character.
enum class SymbolCategory : std::uint8_t {
    Space = 0,
    Backspace,
    AutoCorrect,
    Number,
    Punctuation,
    Enter,
    Shift,
    OtherSymbol,
};

inline constexpr std::size_t kNumSymbolCategories = 8;

std::string_view category_name(SymbolCategory c);
std::optional<SymbolCategory> parse_category(std::string_view name);

struct AlphabetEvent {
    double duration = 0.0;
    double time_since_last_key = kMissing;
    double distance_from_last_key = kMissing;
};

struct SymbolEvent {
    SymbolCategory category = SymbolCategory::Space;
    double duration = 0.0;
    double time_since_last_key = kMissing;
};

struct AccelSample {
    double ax = 0.0;
    double ay = 0.0;
    double az = 0.0;
};

struct Session {
    std::string user_id;
    std::string session_id;
    std::vector<AlphabetEvent> alphabet_view;
    std::vector<SymbolEvent> symbol_view;
    std::vector<AccelSample> accel_view;

    std::size_t view_length(ViewKind v) const;
    bool empty() const { return alphabet_view.empty() && symbol_view.empty() && accel_view.empty(); }
};

/// Throws std::invalid_argument naming the violated invariant.
void validate_session(const Session& s);

class DatasetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Sessions plus the user_id <-> class index bijection.
class Dataset {
public:
    Dataset() = default;

    /// Label index is assigned by first appearance of each user_id.
    explicit Dataset(std::vector<Session> sessions);

    /// Uses the given label order; every session's user must be listed.
    Dataset(std::vector<Session> sessions, std::vector<std::string> labels);

    const std::vector<Session>& sessions() const { return sessions_; }
    const std::vector<std::string>& labels() const { return labels_; }
    std::size_t size() const { return sessions_.size(); }
    std::size_t num_classes() const { return labels_.size(); }
    bool empty() const { return sessions_.empty(); }

    std::size_t class_of(std::string_view user_id) const;
    std::size_t label(std::size_t session_index) const { return session_labels_[session_index]; }
    std::vector<std::size_t> sessions_per_class() const;

private:
    void index();

    std::vector<Session> sessions_;
    std::vector<std::string> labels_;
    std::map<std::string, std::size_t, std::less<>> label_of_;
    std::vector<std::size_t> session_labels_;
};

std::string session_to_json_line(const Session& s);
Session session_from_json_line(std::string_view line, std::size_t line_no);

Dataset load_dataset(const std::filesystem::path& path);
void save_dataset(const Dataset& ds, const std::filesystem::path& path);

std::pair<Dataset, Dataset> stratified_split(const Dataset& ds, double test_fraction, std::uint64_t seed);

enum class FilterPolicy { MostActive };

Dataset filter_users(const Dataset& ds, std::size_t n, FilterPolicy policy = FilterPolicy::MostActive);

} // namespace mvkid
