#include "mffnc/text.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "mffnc/error.hpp"

namespace mffnc {

namespace {

struct Decoded {
    char32_t cp;
    std::size_t len;
    bool valid;
};

// Minimal UTF-8 decoder; malformed sequences decode as one invalid byte.
Decoded decode_utf8(std::string_view s, std::size_t pos) {
    const auto b0 = static_cast<unsigned char>(s[pos]);
    if (b0 < 0x80) return {b0, 1, true};
    std::size_t len = 0;
    char32_t cp = 0;
    if ((b0 & 0xE0) == 0xC0) {
        len = 2;
        cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
        len = 3;
        cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
        len = 4;
        cp = b0 & 0x07;
    } else {
        return {0, 1, false};
    }
    if (pos + len > s.size()) return {0, 1, false};
    for (std::size_t i = 1; i < len; ++i) {
        const auto b = static_cast<unsigned char>(s[pos + i]);
        if ((b & 0xC0) != 0x80) return {0, 1, false};
        cp = (cp << 6) | (b & 0x3F);
    }
    return {cp, len, true};
}

bool is_space(char32_t cp) {
    return cp == U' ' || cp == U'\t' || cp == U'\n' || cp == U'\r' || cp == U'\v' || cp == U'\f' ||
           cp == 0x3000;
}

void flush(std::string& run, std::vector<std::string>& out) {
    if (run.empty()) return;
    out.push_back(std::move(run));
    run.clear();
}

}  // namespace

bool is_cjk(char32_t cp) {
    return (cp >= 0x4E00 && cp <= 0x9FFF) || (cp >= 0x3400 && cp <= 0x4DBF) ||
           (cp >= 0x20000 && cp <= 0x2A6DF) || (cp >= 0x2A700 && cp <= 0x2CEAF) ||
           (cp >= 0xF900 && cp <= 0xFAFF) || (cp >= 0x2F800 && cp <= 0x2FA1F);
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string run;
    for (std::size_t pos = 0; pos < text.size();) {
        const Decoded d = decode_utf8(text, pos);
        if (d.valid && is_space(d.cp)) {
            flush(run, tokens);
        } else if (d.valid && is_cjk(d.cp)) {
            flush(run, tokens);
            tokens.emplace_back(text.substr(pos, d.len));
        } else if (d.len == 1) {
            const char c = text[pos];
            run.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : c);
        } else {
            run.append(text.substr(pos, d.len));
        }
        pos += d.len;
    }
    flush(run, tokens);
    return tokens;
}

Vocab::Vocab() : tokens_{"[PAD]", "[UNK]", "[CLS]", "[SEP]"} {
    for (std::size_t i = 0; i < tokens_.size(); ++i) index_.emplace(tokens_[i], i);
}

Vocab Vocab::from_tokens(std::vector<std::string> tokens, std::size_t min_freq) {
    Vocab v;
    if (tokens.size() < kNumSpecials || !std::equal(v.tokens_.begin(), v.tokens_.end(), tokens.begin()))
        throw FormatError("vocabulary must start with the four special tokens");
    v.tokens_ = std::move(tokens);
    v.index_.clear();
    for (std::size_t i = 0; i < v.tokens_.size(); ++i)
        if (!v.index_.emplace(v.tokens_[i], i).second)
            throw FormatError("duplicate vocabulary token: " + v.tokens_[i]);
    v.min_freq_ = min_freq;
    return v;
}

std::size_t Vocab::encode(std::string_view token) const {
    auto it = index_.find(std::string(token));
    if (it == index_.end() || it->second < kNumSpecials) return kUnk;
    return it->second;
}

const std::string& Vocab::decode(std::size_t id) const {
    if (id >= tokens_.size()) throw UsageError("token id " + std::to_string(id) + " out of vocabulary range");
    return tokens_[id];
}

std::uint64_t Vocab::hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](unsigned char c) {
        h ^= c;
        h *= 0x100000001b3ULL;
    };
    for (const std::string& t : tokens_) {
        for (char c : t) mix(static_cast<unsigned char>(c));
        mix(0);
    }
    return h;
}

Vocab build_vocab(const std::vector<UserRecord>& records, std::size_t min_freq) {
    if (min_freq < 1) throw ConfigError("min_freq must be at least 1");
    std::unordered_map<std::string, std::size_t> counts;
    auto count = [&counts](std::string_view text) {
        for (auto& t : tokenize(text)) ++counts[std::move(t)];
    };
    for (const UserRecord& u : records) {
        count(u.nickname);
        count(u.profile);
        for (const Tweet& t : u.tweets) count(t.text);
    }
    std::vector<std::pair<std::string, std::size_t>> kept;
    for (auto& [tok, n] : counts)
        if (n >= min_freq) kept.emplace_back(tok, n);
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    std::vector<std::string> tokens = Vocab().tokens();
    for (auto& [tok, n] : kept) {
        // A literal "[PAD]" in user text must not shadow the special.
        if (tok.size() > 2 && tok.front() == '[' && tok.back() == ']' &&
            std::find(tokens.begin(), tokens.begin() + Vocab::kNumSpecials, tok) !=
                tokens.begin() + Vocab::kNumSpecials)
            continue;
        tokens.push_back(std::move(tok));
    }
    return Vocab::from_tokens(std::move(tokens), min_freq);
}

TokenSequence build_user_sequence(const UserRecord& user, const Vocab& vocab, std::size_t max_len) {
    if (max_len < 8) throw ConfigError("max_len must be at least 8, got " + std::to_string(max_len));
    TokenSequence seq;
    seq.ids.reserve(max_len);
    auto push = [&](std::size_t id) {
        if (seq.ids.size() < max_len) seq.ids.push_back(id);
    };
    auto push_text = [&](std::string_view text) {
        for (const auto& t : tokenize(text)) {
            if (seq.ids.size() >= max_len) return;
            push(vocab.encode(t));
        }
    };
    push(Vocab::kCls);
    push_text(user.nickname);
    push(Vocab::kSep);
    push_text(user.profile);
    push(Vocab::kSep);
    for (std::size_t i = 0; i < user.tweets.size() && seq.ids.size() < max_len; ++i) {
        if (i > 0) push(Vocab::kSep);
        push_text(user.tweets[i].text);
    }
    seq.true_len = seq.ids.size();
    seq.ids.resize(max_len, Vocab::kPad);
    return seq;
}

PrecomputedEmbeddings load_precomputed(std::istream& in) {
    PrecomputedEmbeddings out;
    std::string line;
    std::size_t line_no = 0;
    auto next_nonblank = [&](std::string& dst) {
        while (std::getline(in, dst)) {
            ++line_no;
            if (dst.find_first_not_of(" \t\r") != std::string::npos) return true;
        }
        return false;
    };
    auto fail = [&](const std::string& what) {
        throw FormatError("embeddings line " + std::to_string(line_no) + ": " + what);
    };

    while (next_nonblank(line)) {
        std::istringstream header(line);
        std::string user;
        long long width = 0, length = 0;
        std::string extra;
        if (!(header >> user >> width >> length) || (header >> extra))
            fail("expected header \"user_id d1 L\"");
        if (width <= 0 || length <= 0) fail("d1 and L must be positive for user " + user);
        if (out.width != 0 && static_cast<std::size_t>(width) != out.width)
            fail("user " + user + " has d1=" + std::to_string(width) + " but earlier users have d1=" +
                 std::to_string(out.width));
        if (out.by_user.contains(user)) fail("duplicate user " + user);
        out.width = static_cast<std::size_t>(width);

        Matrix m(static_cast<std::size_t>(length), out.width);
        for (std::size_t r = 0; r < m.rows; ++r) {
            if (!std::getline(in, line)) fail("unexpected end of file in user " + user);
            ++line_no;
            std::size_t c = 0;
            const char* p = line.data();
            const char* end = line.data() + line.size();
            while (true) {
                while (p < end && (*p == ' ' || *p == '\t' || *p == '\r')) ++p;
                if (p == end) break;
                double v = 0.0;
                auto [next, ec] = std::from_chars(p, end, v);
                if (ec != std::errc{}) fail("malformed number in user " + user);
                if (!std::isfinite(v)) fail("non-finite value in user " + user);
                if (c >= m.cols) fail("too many values in a row of user " + user);
                m(r, c++) = v;
                p = next;
            }
            if (c != m.cols)
                fail("row of user " + user + " has " + std::to_string(c) + " values, expected " +
                     std::to_string(m.cols));
        }
        out.by_user.emplace(user, std::move(m));
    }
    if (in.bad()) throw IoError("error while reading embeddings");
    if (out.by_user.empty()) out.warnings.push_back("embedding file contains no users");
    return out;
}

PrecomputedEmbeddings load_precomputed_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open embeddings file: " + path);
    return load_precomputed(in);
}

}  // namespace mffnc
