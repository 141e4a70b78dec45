#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace proofgate {

std::string_view trim_left(std::string_view s);
std::string_view trim_right(std::string_view s);
std::string_view trim(std::string_view s);

/// Lines including their terminating '\n' (the last one may lack it).
std::vector<std::string_view> split_lines(std::string_view text);

/// Byte length of the UTF-8 sequence starting with `lead`; 1 for invalid bytes.
std::size_t utf8_sequence_length(unsigned char lead);

/// Byte offset of (1-based line, 0-based codepoint column) in `text`.
/// Positions past the end of a line continue into the following bytes; positions
/// past the end of the text extrapolate one byte per column, so out-of-range
/// coordinates stay detectable instead of being silently clamped.
std::size_t byte_offset(std::string_view text, int line, int column);

/// Inverse of byte_offset for offsets inside `text`.
struct LineColumn {
    int line;
    int column;
};
LineColumn line_column(std::string_view text, std::size_t offset);

/// Source trivia is whitespace plus `--` line comments and nested `/- -/` blocks.
/// Returns the offset just past the last non-trivia byte in [begin, end), or
/// `begin` when the range is all trivia.
std::size_t end_of_content(std::string_view text, std::size_t begin, std::size_t end);

/// Offset of the first non-trivia byte in [begin, end), or `end`.
std::size_t start_of_content(std::string_view text, std::size_t begin, std::size_t end);

bool is_trivia(std::string_view text);

}  // namespace proofgate
