#pragma once

#include <string>
#include <vector>

namespace emojipred {

// The twenty most frequent emoji labels in typical photo-sharing corpora,
// ordered by frequency. Used as the default label alphabet for synthetic
// corpora and shipped as part of the recognizable-emoji table.
const std::vector<std::string>& default_emoji_labels();

// True if the codepoint starts an emoji (pictograph blocks, regional
// indicators, a few singletons like the heavy black heart).
bool is_emoji_base(char32_t cp);

bool is_regional_indicator(char32_t cp);
bool is_skin_tone_modifier(char32_t cp);

// Length in codepoints of the emoji sequence starting at cps[i], or 0 if
// none. Longest match: a regional-indicator pair counts as one emoji, and
// a base emoji greedily absorbs variation selectors (FE0F), skin tones and
// ZWJ-joined continuations.
size_t match_emoji(const std::vector<char32_t>& cps, size_t i);

// Spans (offset, length in codepoints) of all emoji in the text.
std::vector<std::pair<size_t, size_t>> find_emoji(const std::vector<char32_t>& cps);

}  // namespace emojipred
