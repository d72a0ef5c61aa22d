#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mffnc/corpus.hpp"
#include "mffnc/matrix.hpp"

namespace mffnc {

// Splits on whitespace (ASCII and U+3000). Inside a whitespace-delimited
// chunk every CJK codepoint becomes its own token and runs of other
// characters stay together, ASCII-lowercased. Invalid UTF-8 bytes are kept
// as part of the surrounding non-CJK run.
std::vector<std::string> tokenize(std::string_view text);

bool is_cjk(char32_t cp);

class Vocab {
public:
    static constexpr std::size_t kPad = 0;
    static constexpr std::size_t kUnk = 1;
    static constexpr std::size_t kCls = 2;
    static constexpr std::size_t kSep = 3;
    static constexpr std::size_t kNumSpecials = 4;

    // Specials only.
    Vocab();
    // Restores a vocabulary from its id-ordered token list (specials included).
    static Vocab from_tokens(std::vector<std::string> tokens, std::size_t min_freq);

    std::size_t size() const { return tokens_.size(); }
    std::size_t min_freq() const { return min_freq_; }
    std::size_t encode(std::string_view token) const;  // UNK when absent
    const std::string& decode(std::size_t id) const;
    const std::vector<std::string>& tokens() const { return tokens_; }

    // FNV-1a over the id-ordered token list; identifies a vocabulary.
    std::uint64_t hash() const;

    friend bool operator==(const Vocab& a, const Vocab& b) {
        return a.tokens_ == b.tokens_ && a.min_freq_ == b.min_freq_;
    }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, std::size_t> index_;
    std::size_t min_freq_ = 1;
};

// Tokens with corpus frequency >= min_freq receive ids from 4 upward in order
// of descending frequency, ties broken by byte-wise lexicographic order.
// Counts cover nicknames, profiles and tweet texts.
Vocab build_vocab(const std::vector<UserRecord>& records, std::size_t min_freq);

struct TokenSequence {
    std::vector<std::size_t> ids;  // exactly max_len entries, PAD-filled
    std::size_t true_len = 0;

    friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

// CLS nickname SEP profile SEP tweet_1 SEP tweet_2 ... (chronological),
// truncated to max_len and padded with PAD. Throws ConfigError if max_len < 8.
TokenSequence build_user_sequence(const UserRecord& user, const Vocab& vocab, std::size_t max_len);

// Per-user token-embedding matrices produced by an external encoder.
struct PrecomputedEmbeddings {
    std::size_t width = 0;  // d1; 0 when empty
    std::map<std::string, Matrix> by_user;
    std::vector<std::string> warnings;
};

// Format: repeated blocks of a header line "user_id d1 L" followed by L rows
// of d1 whitespace-separated decimals. Blank lines between blocks are ignored.
// Throws FormatError on malformed input, width mismatch across users,
// duplicate users or non-finite values.
PrecomputedEmbeddings load_precomputed(std::istream& in);
PrecomputedEmbeddings load_precomputed_file(const std::string& path);

}  // namespace mffnc
