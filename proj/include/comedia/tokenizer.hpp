#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace comedia {

inline constexpr int kPadId = 0;
inline constexpr int kUnkId = 1;
inline constexpr int kNameId = 2;
inline constexpr int kMaskId = 3;
inline constexpr std::size_t kSpecialCount = 4;
inline constexpr std::size_t kDefaultMaxLen = 512;
inline constexpr std::size_t kDefaultVocabSize = 8000;

/// Fixed-length id sequence: the first `attention_len` ids are content,
/// the rest are PAD.
struct TokenSeq {
    std::vector<int> ids;
    std::size_t attention_len = 0;

    std::span<const int> content() const { return {ids.data(), attention_len}; }
};

/// Subword vocabulary. Word-initial pieces are bare; pieces that continue a
/// word carry a "##" prefix. Ids 0..3 are PAD, UNK, NAME, MASK.
class Vocab {
public:
    Vocab();

    std::size_t size() const { return id_to_token_.size(); }
    const std::string& token(int id) const;
    std::optional<int> find(std::string_view token) const;
    const std::vector<std::pair<std::string, std::string>>& merges() const { return merges_; }
    std::size_t max_piece_code_points() const { return max_piece_len_; }

    /// Returns the existing id if the token is already present.
    int add(const std::string& token);
    void add_merge(std::string left, std::string right) { merges_.emplace_back(std::move(left), std::move(right)); }

    std::string vocab_text() const;
    std::string merges_text() const;
    /// sha256 over the vocabulary and merge files.
    std::string digest() const;

    /// Writes <dir>/vocab.txt and <dir>/merges.txt.
    void save(const std::filesystem::path& dir) const;
    static Vocab load(const std::filesystem::path& dir);

    bool operator==(const Vocab& other) const {
        return id_to_token_ == other.id_to_token_ && merges_ == other.merges_;
    }

private:
    std::vector<std::string> id_to_token_;
    std::unordered_map<std::string, int> token_to_id_;
    std::vector<std::pair<std::string, std::string>> merges_;
    std::size_t max_piece_len_ = 1;
};

/// Greedy BPE over whitespace words of `texts`. Stops at `vocab_size` entries
/// or when no adjacent pair occurs at least twice. Ties go to the pair whose
/// pieces sort first by (surface text, continuation flag).
Vocab train_bpe(const std::vector<std::string>& texts, std::size_t vocab_size = kDefaultVocabSize);

/// Greedy longest-match per word; unknown code points become UNK; truncated
/// to `max_len` and padded with PAD to exactly `max_len`.
TokenSeq encode(std::string_view text, const Vocab& vocab, std::size_t max_len = kDefaultMaxLen);

std::string decode(std::span<const int> ids, const Vocab& vocab);

}  // namespace comedia
