#pragma once

#include "f0dbn/numerics.hpp"

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace f0dbn {

inline constexpr std::size_t kNumConsonants = 30;
inline constexpr std::size_t kNumVowels = 16;
inline constexpr std::size_t kNumPhonemes = kNumConsonants + kNumVowels;
inline constexpr std::size_t kMaxSyllablePhonemes = 6;
inline constexpr std::size_t kMaxWordSyllables = 10;

/// Widths of the seven one-of-N feature groups, in encoding order:
/// phoneme identity (prev/cur/next), syllables in word, phoneme position in
/// syllable (fwd/bwd), syllable position in word (fwd/bwd), phonemes per
/// syllable (prev/cur/next), vowel position in syllable, vowel identity.
inline constexpr std::array<std::size_t, 7> kFeatureGroupWidths = {
    3 * kNumPhonemes,         kMaxWordSyllables,        2 * kMaxSyllablePhonemes,
    2 * kMaxWordSyllables,    3 * kMaxSyllablePhonemes, kMaxSyllablePhonemes,
    kNumVowels};

/// Sub-blocks per group (e.g. previous/current/next).
inline constexpr std::array<std::size_t, 7> kFeatureGroupBlocks = {3, 1, 2, 2, 3, 1, 1};

inline constexpr std::size_t kFeatureDim = 220;

/// Offset of group g in the feature vector.
constexpr std::size_t feature_group_offset(std::size_t group)
{
    std::size_t off = 0;
    for (std::size_t g = 0; g < group; ++g) {
        off += kFeatureGroupWidths[g];
    }
    return off;
}

static_assert(feature_group_offset(kFeatureGroupWidths.size()) == kFeatureDim);

/// Ordered consonant and vowel symbols. Consonants take indices 0..29,
/// vowels 30..45; the order is part of the encoding.
class PhonemeInventory {
public:
    static constexpr int kFormatVersion = 1;

    PhonemeInventory(std::vector<std::string> consonants, std::vector<std::string> vowels);

    /// Built-in 46-symbol Bengali-like inventory.
    static const PhonemeInventory& default_inventory();

    /// Parses the versioned inventory text format (see data/inventory.txt).
    static PhonemeInventory parse(std::string_view text);
    static PhonemeInventory load(const std::string& path);
    std::string serialize() const;

    const std::vector<std::string>& consonants() const noexcept { return consonants_; }
    const std::vector<std::string>& vowels() const noexcept { return vowels_; }

    /// Index in [0, 46). Throws std::invalid_argument for unknown symbols.
    std::size_t index_of(std::string_view symbol) const;
    bool contains(std::string_view symbol) const;
    bool is_vowel(std::string_view symbol) const;
    const std::string& symbol(std::size_t index) const;

    /// Index among vowels in [0, 16), or nullopt for consonants.
    std::optional<std::size_t> vowel_index(std::string_view symbol) const;

private:
    std::vector<std::string> consonants_;
    std::vector<std::string> vowels_;
    std::unordered_map<std::string, std::size_t> index_;
};

struct Syllable {
    std::vector<std::string> phonemes;

    friend bool operator==(const Syllable&, const Syllable&) = default;
};

struct Word {
    std::vector<Syllable> syllables;

    friend bool operator==(const Word&, const Word&) = default;
};

struct UtteranceAnnotation {
    std::vector<Word> words;

    std::size_t phoneme_count() const noexcept;

    /// Throws std::invalid_argument for empty words/syllables, bound
    /// violations, or symbols missing from the inventory.
    void validate(const PhonemeInventory& inventory) const;

    friend bool operator==(const UtteranceAnnotation&, const UtteranceAnnotation&) = default;
};

/// Marker for a one-of-N group with no defined value.
inline constexpr std::optional<std::size_t> kAbsent = std::nullopt;

/// Length-n vector with bit `index` set, or all zeros when index is absent.
/// Throws std::invalid_argument when index >= n.
Vector one_of_n(std::optional<std::size_t> index, std::size_t n);

/// 220-bit context vector for the phoneme at `phoneme_index` in utterance order.
Vector encode(const UtteranceAnnotation& annotation, std::size_t phoneme_index,
              const PhonemeInventory& inventory);

/// One vector per phoneme, in order.
std::vector<Vector> encode_utterance(const UtteranceAnnotation& annotation, const PhonemeInventory& inventory);

/// Active index within group g's segment (or within a sub-block of it,
/// e.g. block 1 of group 0 is the current phoneme), nullopt if none set.
/// Throws std::invalid_argument if the block has more than one bit set.
std::optional<std::size_t> decode_block(std::span<const double> features, std::size_t group,
                                        std::size_t block = 0);

} // namespace f0dbn
