#include "sidequest/tokenizer.hpp"

namespace sidequest {

namespace {

bool is_word_byte(unsigned char c) {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' ||
           c >= 0x80;
}

bool is_space_byte(unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

template <typename Sink>
void scan(std::string_view text, Sink&& sink) {
    std::size_t i = 0;
    const std::size_t n = text.size();
    while (i < n) {
        const auto c = static_cast<unsigned char>(text[i]);
        if (is_space_byte(c)) {
            ++i;
        } else if (is_word_byte(c)) {
            std::size_t j = i + 1;
            while (j < n && is_word_byte(static_cast<unsigned char>(text[j]))) ++j;
            sink(i, j - i);
            i = j;
        } else {
            sink(i, 1);
            ++i;
        }
    }
}

} // namespace

std::vector<TokenPiece> WordPunctTokenizer::split(std::string_view text) const {
    std::vector<TokenPiece> out;
    scan(text, [&](std::size_t off, std::size_t len) { out.push_back({off, len}); });
    return out;
}

std::size_t WordPunctTokenizer::count(std::string_view text) const {
    std::size_t n = 0;
    scan(text, [&](std::size_t, std::size_t) { ++n; });
    return n;
}

std::shared_ptr<const Tokenizer> default_tokenizer() {
    static const auto instance = std::make_shared<const WordPunctTokenizer>();
    return instance;
}

} // namespace sidequest
