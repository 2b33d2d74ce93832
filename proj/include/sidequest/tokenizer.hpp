#pragma once

#include <cstddef>
#include <memory>
#include <string_view>
#include <vector>

namespace sidequest {

// Byte range of one token inside the source text.
struct TokenPiece {
    std::size_t offset = 0;
    std::size_t length = 0;
};

class Tokenizer {
public:
    virtual ~Tokenizer() = default;

    virtual std::vector<TokenPiece> split(std::string_view text) const = 0;

    virtual std::size_t count(std::string_view text) const { return split(text).size(); }
};

// Deterministic stand-in for a model tokenizer: every maximal run of word
// characters (ASCII alphanumerics, '_' and any byte >= 0x80) is one token,
// every other non-whitespace byte is a token of its own, whitespace is
// dropped. Concatenating two strings at a non-word boundary therefore adds
// their counts exactly.
class WordPunctTokenizer final : public Tokenizer {
public:
    std::vector<TokenPiece> split(std::string_view text) const override;
    std::size_t count(std::string_view text) const override;
};

std::shared_ptr<const Tokenizer> default_tokenizer();

} // namespace sidequest
