#pragma once

#include "sidequest/ledger.hpp"

#include <filesystem>
#include <random>
#include <string>

namespace sqtest {

// n single-letter words: exactly n tokens under the word/punct tokenizer.
inline std::string words(std::size_t n, char c = 'w') {
    std::string s;
    for (std::size_t i = 0; i < n; ++i) {
        if (i) s += ' ';
        s += c;
    }
    return s;
}

// Tool response text of exactly n tokens, header included (n >= 4).
inline std::string response(sidequest::CursorId id, std::size_t n) {
    std::string head = sidequest::cursor_tag(id);  // [ Cursor N ] = 4 tokens
    return n > 4 ? head + " " + words(n - 4, 'r') : head;
}

inline std::filesystem::path temp_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("sidequest_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace sqtest
