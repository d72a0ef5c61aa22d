#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mffnc/corpus.hpp"

namespace fx {

inline mffnc::Tweet tweet(const char* when, std::string text = "hello", bool original = true, bool images = false) {
    mffnc::Tweet t;
    t.text = std::move(text);
    t.posting_time = *mffnc::Timestamp::parse(when);
    t.is_original = original;
    t.has_images = images;
    return t;
}

inline mffnc::UserRecord user(std::string id, mffnc::Label label, std::vector<mffnc::Tweet> tweets = {}) {
    mffnc::UserRecord u;
    u.user_id = std::move(id);
    u.nickname = "nick";
    u.label = label;
    u.tweets = std::move(tweets);
    return u;
}

inline std::vector<mffnc::UserRecord> balanced(std::size_t per_class) {
    std::vector<mffnc::UserRecord> out;
    for (std::size_t i = 0; i < 2 * per_class; ++i)
        out.push_back(user("u" + std::to_string(i), i % 2 ? mffnc::Label::depressed : mffnc::Label::normal));
    return out;
}

// Minimal valid corpus line.
inline std::string line(const std::string& id, int label = 0) {
    return R"({"user_id":")" + id +
           R"(","nickname":"n","gender":"m","profile":"","birthday":null,"num_followers":1,"num_followings":2,"label":)" +
           std::to_string(label) +
           R"(,"tweets":[{"text":"hi","posting_time":"2020-03-01 10:00:00","has_images":false,"num_likes":0,"num_forwards":0,"num_comments":0,"is_original":true}]})";
}

}  // namespace fx
