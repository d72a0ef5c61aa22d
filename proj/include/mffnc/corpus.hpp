#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mffnc {

// Naive local wall-clock time with second precision, stored as seconds since
// 1970-01-01 00:00:00 on the proleptic Gregorian calendar. No time zone.
class Timestamp {
public:
    constexpr Timestamp() = default;
    constexpr explicit Timestamp(std::int64_t seconds) : seconds_(seconds) {}

    // Strict "YYYY-MM-DD HH:MM:SS"; returns nullopt on any deviation
    // (wrong width, out-of-range field, invalid calendar date).
    static std::optional<Timestamp> parse(std::string_view text);
    static Timestamp from_civil(int year, unsigned month, unsigned day, unsigned hour,
                                unsigned minute, unsigned second);

    std::string to_string() const;

    constexpr std::int64_t seconds() const { return seconds_; }

    // Seconds elapsed since local midnight, in [0, 86400).
    std::int64_t seconds_of_day() const;

    // Time of day as fractional minutes since midnight, in [0, 1440).
    double minutes_of_day() const { return static_cast<double>(seconds_of_day()) / 60.0; }

    friend constexpr auto operator<=>(const Timestamp&, const Timestamp&) = default;

private:
    std::int64_t seconds_ = 0;
};

enum class Gender { male, female, unknown };
enum class Label : int { normal = 0, depressed = 1 };

std::string_view to_string(Gender g);

struct Tweet {
    std::string text;
    Timestamp posting_time;
    bool has_images = false;
    std::int64_t num_likes = 0;
    std::int64_t num_forwards = 0;
    std::int64_t num_comments = 0;
    bool is_original = true;

    friend bool operator==(const Tweet&, const Tweet&) = default;
};

struct UserRecord {
    std::string user_id;
    std::string nickname;
    Gender gender = Gender::unknown;
    std::string profile;
    std::optional<std::string> birthday;
    std::int64_t num_followers = 0;
    std::int64_t num_followings = 0;
    Label label = Label::normal;
    std::vector<Tweet> tweets;

    friend bool operator==(const UserRecord&, const UserRecord&) = default;
};

struct ParseIssue {
    std::size_t line = 0;  // 1-based
    std::string reason;
};

struct ParseResult {
    std::vector<UserRecord> records;
    std::vector<ParseIssue> issues;
};

// Validates one JSON Lines record. On failure the returned string is the
// reason, e.g. "missing field: label". Tweets come back sorted by time.
std::pair<std::optional<UserRecord>, std::string> parse_user_line(std::string_view line);

// Parses a whole JSONL stream. Malformed lines and later duplicates of a
// user_id are reported and skipped; records keep file order. Blank lines are
// ignored. Throws IoError if the stream cannot be read.
ParseResult parse_corpus(std::istream& source);
ParseResult parse_corpus_file(const std::string& path);

// One compact JSON object, field order as in the corpus schema, no newline.
std::string serialize_user(const UserRecord& user);
void write_corpus(std::ostream& out, const std::vector<UserRecord>& users);
void write_corpus_file(const std::string& path, const std::vector<UserRecord>& users);

// Stable sort of tweets by posting time (ties keep input order).
void sort_tweets(UserRecord& user);

struct SplitSpec {
    double ratio = 0.8;
    std::uint64_t seed = 0;
};

struct Split {
    std::vector<UserRecord> train;
    std::vector<UserRecord> validation;
};

// Stratified seeded split: each label class is shuffled independently and
// cut at floor(ratio * class_size); train and validation are the per-class
// pieces concatenated in label order (normal first).
Split split_dataset(const std::vector<UserRecord>& records, const SplitSpec& spec);

// Index-level form of split_dataset, useful when callers keep parallel arrays.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    const std::vector<Label>& labels, const SplitSpec& spec);

}  // namespace mffnc
