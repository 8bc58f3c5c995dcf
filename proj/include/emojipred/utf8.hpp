#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace emojipred {

// Decodes a UTF-8 string into codepoints. Invalid bytes decode as U+FFFD.
std::vector<char32_t> utf8_decode(const std::string& s);

std::string utf8_encode(const std::vector<char32_t>& cps);
std::string utf8_encode(char32_t cp);

}  // namespace emojipred
