#include "mffnc/corpus.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_set>

#include <json.hpp>

#include "mffnc/error.hpp"
#include "mffnc/rng.hpp"

namespace mffnc {

namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

constexpr std::int64_t kSecondsPerDay = 86400;

bool parse_digits(std::string_view text, std::size_t pos, std::size_t width, unsigned& out) {
    out = 0;
    for (std::size_t i = pos; i < pos + width; ++i) {
        const char c = text[i];
        if (c < '0' || c > '9') return false;
        out = out * 10 + static_cast<unsigned>(c - '0');
    }
    return true;
}

const json* find_field(const json& obj, const char* key, std::string& reason, const std::string& prefix) {
    auto it = obj.find(key);
    if (it == obj.end()) {
        reason = "missing field: " + prefix + key;
        return nullptr;
    }
    return &*it;
}

bool get_string(const json& obj, const char* key, std::string& out, std::string& reason,
                const std::string& prefix = {}) {
    const json* v = find_field(obj, key, reason, prefix);
    if (!v) return false;
    if (!v->is_string()) {
        reason = "field " + prefix + key + " must be a string";
        return false;
    }
    out = v->get<std::string>();
    return true;
}

bool get_bool(const json& obj, const char* key, bool& out, std::string& reason,
              const std::string& prefix = {}) {
    const json* v = find_field(obj, key, reason, prefix);
    if (!v) return false;
    if (!v->is_boolean()) {
        reason = "field " + prefix + key + " must be a boolean";
        return false;
    }
    out = v->get<bool>();
    return true;
}

bool get_count(const json& obj, const char* key, std::int64_t& out, std::string& reason,
               const std::string& prefix = {}) {
    const json* v = find_field(obj, key, reason, prefix);
    if (!v) return false;
    if (v->is_number_unsigned()) {
        const auto u = v->get<std::uint64_t>();
        if (u > static_cast<std::uint64_t>(INT64_MAX)) {
            reason = "field " + prefix + key + " out of range";
            return false;
        }
        out = static_cast<std::int64_t>(u);
        return true;
    }
    if (!v->is_number_integer()) {
        reason = "field " + prefix + key + " must be an integer";
        return false;
    }
    out = v->get<std::int64_t>();
    if (out < 0) {
        reason = "field " + prefix + key + " must be non-negative";
        return false;
    }
    return true;
}

bool parse_tweet(const json& t, std::size_t index, Tweet& tweet, std::string& reason) {
    const std::string prefix = "tweets[" + std::to_string(index) + "].";
    if (!t.is_object()) {
        reason = "tweets[" + std::to_string(index) + "] must be an object";
        return false;
    }
    std::string when;
    if (!get_string(t, "text", tweet.text, reason, prefix)) return false;
    if (!get_string(t, "posting_time", when, reason, prefix)) return false;
    auto ts = Timestamp::parse(when);
    if (!ts) {
        reason = "invalid " + prefix + "posting_time: \"" + when + "\"";
        return false;
    }
    tweet.posting_time = *ts;
    if (!get_bool(t, "has_images", tweet.has_images, reason, prefix)) return false;
    if (!get_count(t, "num_likes", tweet.num_likes, reason, prefix)) return false;
    if (!get_count(t, "num_forwards", tweet.num_forwards, reason, prefix)) return false;
    if (!get_count(t, "num_comments", tweet.num_comments, reason, prefix)) return false;
    if (!get_bool(t, "is_original", tweet.is_original, reason, prefix)) return false;
    if (tweet.text.empty() && !tweet.has_images) {
        reason = prefix + "text is empty but has_images is false";
        return false;
    }
    return true;
}

}  // namespace

std::optional<Timestamp> Timestamp::parse(std::string_view text) {
    // YYYY-MM-DD HH:MM:SS
    if (text.size() != 19 || text[4] != '-' || text[7] != '-' || text[10] != ' ' ||
        text[13] != ':' || text[16] != ':')
        return std::nullopt;
    unsigned year = 0, month = 0, day = 0, hour = 0, minute = 0, second = 0;
    if (!parse_digits(text, 0, 4, year) || !parse_digits(text, 5, 2, month) ||
        !parse_digits(text, 8, 2, day) || !parse_digits(text, 11, 2, hour) ||
        !parse_digits(text, 14, 2, minute) || !parse_digits(text, 17, 2, second))
        return std::nullopt;
    const std::chrono::year_month_day ymd{std::chrono::year{static_cast<int>(year)},
                                          std::chrono::month{month}, std::chrono::day{day}};
    if (!ymd.ok() || hour > 23 || minute > 59 || second > 59) return std::nullopt;
    return from_civil(static_cast<int>(year), month, day, hour, minute, second);
}

Timestamp Timestamp::from_civil(int year, unsigned month, unsigned day, unsigned hour,
                                unsigned minute, unsigned second) {
    const std::chrono::sys_days days{std::chrono::year{year} / std::chrono::month{month} /
                                     std::chrono::day{day}};
    return Timestamp{static_cast<std::int64_t>(days.time_since_epoch().count()) * kSecondsPerDay +
                     hour * 3600 + minute * 60 + second};
}

std::int64_t Timestamp::seconds_of_day() const {
    const std::int64_t r = seconds_ % kSecondsPerDay;
    return r < 0 ? r + kSecondsPerDay : r;
}

std::string Timestamp::to_string() const {
    const std::int64_t sod = seconds_of_day();
    const std::int64_t days = (seconds_ - sod) / kSecondsPerDay;
    const std::chrono::year_month_day ymd{std::chrono::sys_days{std::chrono::days{days}}};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u %02d:%02d:%02d", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<int>(sod / 3600), static_cast<int>(sod / 60 % 60),
                  static_cast<int>(sod % 60));
    return buf;
}

std::string_view to_string(Gender g) {
    switch (g) {
        case Gender::male: return "m";
        case Gender::female: return "f";
        case Gender::unknown: break;
    }
    return "unknown";
}

void sort_tweets(UserRecord& user) {
    std::stable_sort(user.tweets.begin(), user.tweets.end(),
                     [](const Tweet& a, const Tweet& b) { return a.posting_time < b.posting_time; });
}

std::pair<std::optional<UserRecord>, std::string> parse_user_line(std::string_view line) {
    const json doc = json::parse(line.begin(), line.end(), nullptr, /*allow_exceptions=*/false);
    if (doc.is_discarded()) return {std::nullopt, "invalid JSON"};
    if (!doc.is_object()) return {std::nullopt, "record must be a JSON object"};

    UserRecord user;
    std::string reason;
    std::string gender;
    if (!get_string(doc, "user_id", user.user_id, reason)) return {std::nullopt, reason};
    if (user.user_id.empty()) return {std::nullopt, "field user_id must be non-empty"};
    if (!get_string(doc, "nickname", user.nickname, reason)) return {std::nullopt, reason};
    if (!get_string(doc, "gender", gender, reason)) return {std::nullopt, reason};
    if (gender == "m")
        user.gender = Gender::male;
    else if (gender == "f")
        user.gender = Gender::female;
    else if (gender == "unknown")
        user.gender = Gender::unknown;
    else
        return {std::nullopt, "invalid gender: \"" + gender + "\""};
    if (!get_string(doc, "profile", user.profile, reason)) return {std::nullopt, reason};

    const json* birthday = find_field(doc, "birthday", reason, {});
    if (!birthday) return {std::nullopt, reason};
    if (birthday->is_string())
        user.birthday = birthday->get<std::string>();
    else if (!birthday->is_null())
        return {std::nullopt, "field birthday must be a string or null"};

    if (!get_count(doc, "num_followers", user.num_followers, reason)) return {std::nullopt, reason};
    if (!get_count(doc, "num_followings", user.num_followings, reason)) return {std::nullopt, reason};

    const json* label = find_field(doc, "label", reason, {});
    if (!label) return {std::nullopt, reason};
    if (!label->is_number_integer() || (label->get<std::int64_t>() != 0 && label->get<std::int64_t>() != 1))
        return {std::nullopt, "field label must be 0 or 1"};
    user.label = static_cast<Label>(label->get<int>());

    const json* tweets = find_field(doc, "tweets", reason, {});
    if (!tweets) return {std::nullopt, reason};
    if (!tweets->is_array()) return {std::nullopt, "field tweets must be an array"};
    user.tweets.reserve(tweets->size());
    for (std::size_t i = 0; i < tweets->size(); ++i) {
        Tweet tweet;
        if (!parse_tweet((*tweets)[i], i, tweet, reason)) return {std::nullopt, reason};
        user.tweets.push_back(std::move(tweet));
    }
    sort_tweets(user);
    return {std::move(user), {}};
}

ParseResult parse_corpus(std::istream& source) {
    if (!source) throw IoError("corpus stream is not readable");
    std::vector<std::string> lines;
    for (std::string line; std::getline(source, line);) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(std::move(line));
    }
    if (source.bad()) throw IoError("error while reading corpus stream");

    const auto n = static_cast<std::ptrdiff_t>(lines.size());
    std::vector<std::pair<std::optional<UserRecord>, std::string>> parsed(lines.size());
    // Lines validate independently; results are gathered back in file order.
#pragma omp parallel for schedule(dynamic, 16)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const std::string& line = lines[static_cast<std::size_t>(i)];
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        parsed[static_cast<std::size_t>(i)] = parse_user_line(line);
    }

    ParseResult result;
    std::unordered_set<std::string> seen;
    for (std::size_t i = 0; i < parsed.size(); ++i) {
        auto& [record, reason] = parsed[i];
        if (!record) {
            if (!reason.empty()) result.issues.push_back({i + 1, std::move(reason)});
            continue;
        }
        if (!seen.insert(record->user_id).second) {
            result.issues.push_back({i + 1, "duplicate user_id: " + record->user_id});
            continue;
        }
        result.records.push_back(std::move(*record));
    }
    return result;
}

ParseResult parse_corpus_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open corpus file: " + path);
    return parse_corpus(in);
}

std::string serialize_user(const UserRecord& user) {
    ordered_json tweets = ordered_json::array();
    for (const Tweet& t : user.tweets) {
        ordered_json jt;
        jt["text"] = t.text;
        jt["posting_time"] = t.posting_time.to_string();
        jt["has_images"] = t.has_images;
        jt["num_likes"] = t.num_likes;
        jt["num_forwards"] = t.num_forwards;
        jt["num_comments"] = t.num_comments;
        jt["is_original"] = t.is_original;
        tweets.push_back(std::move(jt));
    }
    ordered_json j;
    j["user_id"] = user.user_id;
    j["nickname"] = user.nickname;
    j["gender"] = std::string(to_string(user.gender));
    j["profile"] = user.profile;
    j["birthday"] = user.birthday ? ordered_json(*user.birthday) : ordered_json(nullptr);
    j["num_followers"] = user.num_followers;
    j["num_followings"] = user.num_followings;
    j["label"] = static_cast<int>(user.label);
    j["tweets"] = std::move(tweets);
    return j.dump();
}

void write_corpus(std::ostream& out, const std::vector<UserRecord>& users) {
    for (const UserRecord& u : users) out << serialize_user(u) << '\n';
}

void write_corpus_file(const std::string& path, const std::vector<UserRecord>& users) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write corpus file: " + path);
    write_corpus(out, users);
    out.flush();
    if (!out) throw IoError("error while writing corpus file: " + path);
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    const std::vector<Label>& labels, const SplitSpec& spec) {
    if (!(spec.ratio > 0.0 && spec.ratio < 1.0))
        throw ConfigError("split ratio must lie in (0, 1), got " + std::to_string(spec.ratio));
    if (labels.empty()) throw ConfigError("cannot split an empty dataset");

    Rng rng(derive_seed(spec.seed, 0x5011D));
    std::pair<std::vector<std::size_t>, std::vector<std::size_t>> out;
    for (Label cls : {Label::normal, Label::depressed}) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == cls) members.push_back(i);
        rng.shuffle(std::span<std::size_t>(members));
        // The epsilon keeps exact products such as 0.29 * 100 from flooring low.
        const auto cut = std::min(
            members.size(),
            static_cast<std::size_t>(std::floor(spec.ratio * static_cast<double>(members.size()) + 1e-9)));
        out.first.insert(out.first.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(cut));
        out.second.insert(out.second.end(), members.begin() + static_cast<std::ptrdiff_t>(cut), members.end());
    }
    return out;
}

Split split_dataset(const std::vector<UserRecord>& records, const SplitSpec& spec) {
    std::vector<Label> labels;
    labels.reserve(records.size());
    for (const auto& r : records) labels.push_back(r.label);
    const auto [train_idx, val_idx] = split_indices(labels, spec);
    Split split;
    split.train.reserve(train_idx.size());
    split.validation.reserve(val_idx.size());
    for (std::size_t i : train_idx) split.train.push_back(records[i]);
    for (std::size_t i : val_idx) split.validation.push_back(records[i]);
    return split;
}

}  // namespace mffnc
