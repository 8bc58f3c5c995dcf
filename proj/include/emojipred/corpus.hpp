#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace emojipred::corpus {

// One social-media item. `text` holds the description with the label emoji
// already removed; `label` is the emoji codepoint sequence.
struct Post {
    std::string id;
    std::string text;
    std::string label;
    std::optional<std::string> image_ref;
    std::optional<std::vector<double>> visual_vec;
};

// Ordered top-k emoji set with training-set counts, sorted by descending
// count with ties broken by ascending codepoint sequence.
struct LabelVocabulary {
    std::vector<std::string> labels;
    std::vector<long long> counts;

    int k() const { return static_cast<int>(labels.size()); }
    // Index of a label, or -1.
    int index_of(const std::string& label) const;
};

struct DatasetSplit {
    std::vector<Post> train, dev, test;
    uint64_t seed = 0;
};

struct SyntheticSpec {
    int k = 0;
    int n = 0;
    std::vector<int> text_signal_classes;
    std::vector<int> image_signal_classes;
    double noise_rate = 0.0;
    uint64_t seed = 0;
};

enum class FilterReject { NoEmoji, MultipleEmoji, TooShort };

const char* to_string(FilterReject r);

struct ExtractResult {
    bool accepted = false;
    FilterReject reason = FilterReject::NoEmoji;
    std::string clean_text;
    std::string emoji;
};

// Applies the corpus filters: exactly one emoji, >= 4 words after its
// removal. On acceptance returns the emoji and the whitespace-collapsed
// remaining text.
ExtractResult extract_label(const std::string& raw_text);

// Top-k labels by frequency over labeled posts. Throws if k exceeds the
// number of distinct labels.
LabelVocabulary build_label_vocab(const std::vector<Post>& posts, int k);

// Posts whose label is in the vocabulary, input order preserved.
std::vector<Post> filter_topk(const std::vector<Post>& posts,
                              const LabelVocabulary& vocab);

// Seeded shuffle, then floor(0.8n) train / floor(0.1n) dev / remainder test.
// Throws if n < 10.
DatasetSplit split(const std::vector<Post>& posts, uint64_t seed);

// Desk-scale corpus: class-cue tokens in the text for text-signaled classes,
// a class-distinct color-signature visual vector for image-signaled classes,
// neutral filler otherwise. With probability noise_rate a cue is swapped for
// a random other class's cue.
std::vector<Post> generate_synthetic(const SyntheticSpec& spec);

// JSONL round-trip. load throws on a malformed line, naming its number.
std::vector<Post> load_posts(const std::string& path);
void save_posts(const std::vector<Post>& posts, const std::string& path);

void save_vocab(const LabelVocabulary& vocab, const std::string& path);
LabelVocabulary load_vocab(const std::string& path);

}  // namespace emojipred::corpus
