#include "emojipred/emoji.hpp"

#include "emojipred/utf8.hpp"

namespace emojipred {

const std::vector<std::string>& default_emoji_labels() {
    static const std::vector<std::string> labels = {
        "❤",                    // heavy black heart
        "\U0001F602",                // face with tears of joy
        "\U0001F60D",                // heart eyes
        "\U0001F495",                // two hearts
        "\U0001F525",                // fire
        "\U0001F60A",                // smiling face
        "\U0001F1FA\U0001F1F8",      // US flag
        "☀",                    // sun
        "\U0001F60E",                // sunglasses
        "\U0001F64C",                // raising hands
        "\U0001F485",                // nail polish
        "\U0001F4AF",                // hundred points
        "\U0001F618",                // face blowing a kiss
        "\U0001F389",                // party popper
        "\U0001F4AA",                // flexed biceps
        "\U0001F609",                // winking face
        "\U0001F44C",                // OK hand
        "\U0001F62D",                // loudly crying face
        "\U0001F64F",                // folded hands
        "\U0001F436",                // dog face
    };
    return labels;
}

bool is_regional_indicator(char32_t cp) {
    return cp >= 0x1F1E6 && cp <= 0x1F1FF;
}

bool is_skin_tone_modifier(char32_t cp) {
    return cp >= 0x1F3FB && cp <= 0x1F3FF;
}

bool is_emoji_base(char32_t cp) {
    if (is_regional_indicator(cp)) return true;
    if (cp >= 0x1F300 && cp <= 0x1F5FF) return true;  // misc symbols & pictographs
    if (cp >= 0x1F600 && cp <= 0x1F64F) return true;  // emoticons
    if (cp >= 0x1F680 && cp <= 0x1F6FF) return true;  // transport
    if (cp >= 0x1F900 && cp <= 0x1F9FF) return true;  // supplemental symbols
    if (cp >= 0x1FA70 && cp <= 0x1FAFF) return true;  // symbols extended-A
    if (cp >= 0x2600 && cp <= 0x26FF) return true;    // misc symbols
    if (cp >= 0x2700 && cp <= 0x27BF) return true;    // dingbats (includes 2764)
    switch (cp) {
        case 0x2B50:  // star
        case 0x2B55:  // heavy circle
        case 0x203C:  // double exclamation
        case 0x2049:  // exclamation question
        case 0x2122:  // trade mark
        case 0x3030:  // wavy dash
            return true;
        default:
            return false;
    }
}

size_t match_emoji(const std::vector<char32_t>& cps, size_t i) {
    const size_t n = cps.size();
    if (i >= n || !is_emoji_base(cps[i])) return 0;

    // Regional-indicator pair (flag) is one emoji; a lone indicator still
    // counts as one.
    if (is_regional_indicator(cps[i])) {
        if (i + 1 < n && is_regional_indicator(cps[i + 1])) return 2;
        return 1;
    }

    size_t len = 1;
    auto absorb_trailers = [&]() {
        while (i + len < n &&
               (cps[i + len] == 0xFE0F || is_skin_tone_modifier(cps[i + len]))) {
            ++len;
        }
    };
    absorb_trailers();
    // ZWJ-joined continuations (family, profession sequences) are one emoji.
    while (i + len + 1 < n && cps[i + len] == 0x200D &&
           is_emoji_base(cps[i + len + 1])) {
        len += 2;
        absorb_trailers();
    }
    return len;
}

std::vector<std::pair<size_t, size_t>> find_emoji(const std::vector<char32_t>& cps) {
    std::vector<std::pair<size_t, size_t>> spans;
    size_t i = 0;
    while (i < cps.size()) {
        size_t len = match_emoji(cps, i);
        if (len > 0) {
            spans.emplace_back(i, len);
            i += len;
        } else {
            ++i;
        }
    }
    return spans;
}

}  // namespace emojipred
