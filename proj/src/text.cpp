#include "proofgate/text.hpp"

#include <algorithm>

namespace proofgate {

namespace {

bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

// Walks [begin, end) classifying each byte as trivia or content. Calls
// on_content(offset, length) for every content code unit run.
template <typename OnContent>
void scan_trivia(std::string_view text, std::size_t begin, std::size_t end, OnContent on_content) {
    std::size_t i = begin;
    while (i < end) {
        const char c = text[i];
        if (is_space(c)) {
            ++i;
        } else if (text.compare(i, 2, "--") == 0 && i + 1 < end) {
            while (i < end && text[i] != '\n') {
                ++i;
            }
        } else if (text.compare(i, 2, "/-") == 0 && i + 1 < end) {
            int depth = 1;
            i += 2;
            while (i < end && depth > 0) {
                if (text.compare(i, 2, "-/") == 0 && i + 1 < end) {
                    --depth;
                    i += 2;
                } else if (text.compare(i, 2, "/-") == 0 && i + 1 < end) {
                    ++depth;
                    i += 2;
                } else {
                    ++i;
                }
            }
        } else {
            const auto len = std::min(utf8_sequence_length(static_cast<unsigned char>(c)), end - i);
            on_content(i, len);
            i += len;
        }
    }
}

}  // namespace

std::string_view trim_left(std::string_view s) {
    std::size_t i = 0;
    while (i < s.size() && is_space(s[i])) {
        ++i;
    }
    return s.substr(i);
}

std::string_view trim_right(std::string_view s) {
    std::size_t n = s.size();
    while (n > 0 && is_space(s[n - 1])) {
        --n;
    }
    return s.substr(0, n);
}

std::string_view trim(std::string_view s) {
    return trim_right(trim_left(s));
}

std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const auto newline = text.find('\n', pos);
        const auto end = newline == std::string_view::npos ? text.size() : newline + 1;
        lines.push_back(text.substr(pos, end - pos));
        pos = end;
    }
    return lines;
}

std::size_t utf8_sequence_length(unsigned char lead) {
    if (lead < 0x80) return 1;
    if ((lead & 0xE0) == 0xC0) return 2;
    if ((lead & 0xF0) == 0xE0) return 3;
    if ((lead & 0xF8) == 0xF0) return 4;
    return 1;
}

std::size_t byte_offset(std::string_view text, int line, int column) {
    std::size_t pos = 0;
    for (int l = 1; l < line; ++l) {
        const auto newline = text.find('\n', pos);
        if (newline == std::string_view::npos) {
            // Past the last line: every missing line counts as one byte.
            return text.size() + static_cast<std::size_t>(line - l) + static_cast<std::size_t>(std::max(column, 0));
        }
        pos = newline + 1;
    }
    for (int c = 0; c < column; ++c) {
        if (pos >= text.size()) {
            return text.size() + static_cast<std::size_t>(column - c);
        }
        pos += utf8_sequence_length(static_cast<unsigned char>(text[pos]));
    }
    return std::min(pos, text.size());
}

LineColumn line_column(std::string_view text, std::size_t offset) {
    LineColumn lc{1, 0};
    std::size_t i = 0;
    while (i < offset && i < text.size()) {
        if (text[i] == '\n') {
            ++lc.line;
            lc.column = 0;
            ++i;
        } else {
            ++lc.column;
            i += utf8_sequence_length(static_cast<unsigned char>(text[i]));
        }
    }
    return lc;
}

std::size_t end_of_content(std::string_view text, std::size_t begin, std::size_t end) {
    std::size_t last = begin;
    scan_trivia(text, begin, end, [&](std::size_t at, std::size_t len) { last = at + len; });
    return last;
}

std::size_t start_of_content(std::string_view text, std::size_t begin, std::size_t end) {
    std::size_t first = end;
    bool found = false;
    scan_trivia(text, begin, end, [&](std::size_t at, std::size_t) {
        if (!found) {
            first = at;
            found = true;
        }
    });
    return first;
}

bool is_trivia(std::string_view text) {
    return start_of_content(text, 0, text.size()) == text.size();
}

}  // namespace proofgate
