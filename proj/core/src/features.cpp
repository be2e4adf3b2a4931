#include "f0dbn/features.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace f0dbn {

PhonemeInventory::PhonemeInventory(std::vector<std::string> consonants, std::vector<std::string> vowels)
    : consonants_(std::move(consonants)), vowels_(std::move(vowels))
{
    if (consonants_.size() != kNumConsonants || vowels_.size() != kNumVowels) {
        throw std::invalid_argument("PhonemeInventory: expected " + std::to_string(kNumConsonants)
                                    + " consonants and " + std::to_string(kNumVowels) + " vowels, got "
                                    + std::to_string(consonants_.size()) + " and "
                                    + std::to_string(vowels_.size()));
    }
    std::size_t k = 0;
    for (const auto* list : {&consonants_, &vowels_}) {
        for (const auto& s : *list) {
            if (s.empty() || s.find_first_of(" \t|\n") != std::string::npos) {
                throw std::invalid_argument("PhonemeInventory: invalid symbol '" + s + "'");
            }
            if (!index_.emplace(s, k++).second) {
                throw std::invalid_argument("PhonemeInventory: duplicate symbol '" + s + "'");
            }
        }
    }
}

const PhonemeInventory& PhonemeInventory::default_inventory()
{
    static const PhonemeInventory inv(
        {"k", "kh", "g", "gh", "ng", "c", "ch", "j", "jh", "T", "Th", "D", "Dh", "t", "th",
         "d", "dh", "n", "p", "ph", "b", "bh", "m", "r", "l", "sh", "s", "h", "R", "Rh"},
        {"a", "A", "i", "u", "e", "E", "o", "O", "a~", "A~", "i~", "u~", "e~", "E~", "o~", "O~"});
    return inv;
}

PhonemeInventory PhonemeInventory::parse(std::string_view text)
{
    std::istringstream in{std::string(text)};
    std::string line;
    std::optional<int> version;
    std::optional<std::vector<std::string>> consonants;
    std::optional<std::vector<std::string>> vowels;
    while (std::getline(in, line)) {
        if (line.empty() || line.front() == '#') {
            continue;
        }
        std::istringstream fields(line);
        std::string key;
        fields >> key;
        if (key == "version") {
            int v = 0;
            if (!(fields >> v)) {
                throw std::invalid_argument("inventory: malformed version line");
            }
            version = v;
        } else if (key == "consonants" || key == "vowels") {
            std::vector<std::string> symbols;
            for (std::string s; fields >> s;) {
                symbols.push_back(s);
            }
            (key == "consonants" ? consonants : vowels) = std::move(symbols);
        } else {
            throw std::invalid_argument("inventory: unknown key '" + key + "'");
        }
    }
    if (!version) {
        throw std::invalid_argument("inventory: missing version line");
    }
    if (*version != kFormatVersion) {
        throw std::invalid_argument("inventory: unsupported version " + std::to_string(*version));
    }
    if (!consonants || !vowels) {
        throw std::invalid_argument("inventory: both 'consonants' and 'vowels' lines are required");
    }
    return PhonemeInventory(std::move(*consonants), std::move(*vowels));
}

PhonemeInventory PhonemeInventory::load(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open inventory file " + path);
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

std::string PhonemeInventory::serialize() const
{
    std::string out = "# phoneme inventory: consonant indices 0-29, vowel indices 30-45\n";
    out += "version " + std::to_string(kFormatVersion) + "\nconsonants";
    for (const auto& c : consonants_) {
        out += ' ' + c;
    }
    out += "\nvowels";
    for (const auto& v : vowels_) {
        out += ' ' + v;
    }
    out += '\n';
    return out;
}

std::size_t PhonemeInventory::index_of(std::string_view symbol) const
{
    const auto it = index_.find(std::string(symbol));
    if (it == index_.end()) {
        throw std::invalid_argument("unknown phoneme symbol '" + std::string(symbol) + "'");
    }
    return it->second;
}

bool PhonemeInventory::contains(std::string_view symbol) const
{
    return index_.contains(std::string(symbol));
}

bool PhonemeInventory::is_vowel(std::string_view symbol) const
{
    return index_of(symbol) >= kNumConsonants;
}

const std::string& PhonemeInventory::symbol(std::size_t index) const
{
    if (index >= kNumPhonemes) {
        throw std::invalid_argument("phoneme index out of range");
    }
    return index < kNumConsonants ? consonants_[index] : vowels_[index - kNumConsonants];
}

std::optional<std::size_t> PhonemeInventory::vowel_index(std::string_view symbol) const
{
    const std::size_t k = index_of(symbol);
    if (k < kNumConsonants) {
        return std::nullopt;
    }
    return k - kNumConsonants;
}

std::size_t UtteranceAnnotation::phoneme_count() const noexcept
{
    std::size_t n = 0;
    for (const auto& w : words) {
        for (const auto& s : w.syllables) {
            n += s.phonemes.size();
        }
    }
    return n;
}

void UtteranceAnnotation::validate(const PhonemeInventory& inventory) const
{
    for (std::size_t wi = 0; wi < words.size(); ++wi) {
        const auto& w = words[wi];
        if (w.syllables.empty()) {
            throw std::invalid_argument("annotation: word " + std::to_string(wi) + " has no syllables");
        }
        if (w.syllables.size() > kMaxWordSyllables) {
            throw std::invalid_argument("annotation: word " + std::to_string(wi) + " has "
                                        + std::to_string(w.syllables.size()) + " syllables (max "
                                        + std::to_string(kMaxWordSyllables) + ")");
        }
        for (const auto& s : w.syllables) {
            if (s.phonemes.empty()) {
                throw std::invalid_argument("annotation: empty syllable in word " + std::to_string(wi));
            }
            if (s.phonemes.size() > kMaxSyllablePhonemes) {
                throw std::invalid_argument("annotation: syllable with " + std::to_string(s.phonemes.size())
                                            + " phonemes in word " + std::to_string(wi) + " (max "
                                            + std::to_string(kMaxSyllablePhonemes) + ")");
            }
            for (const auto& p : s.phonemes) {
                inventory.index_of(p);
            }
        }
    }
}

Vector one_of_n(std::optional<std::size_t> index, std::size_t n)
{
    Vector v(n, 0.0);
    if (index) {
        if (*index >= n) {
            throw std::invalid_argument("one_of_n: index " + std::to_string(*index) + " out of range for n = "
                                        + std::to_string(n));
        }
        v[*index] = 1.0;
    }
    return v;
}

namespace {

struct PhonemeSlot {
    std::size_t word;
    std::size_t syllable;        // within word
    std::size_t global_syllable; // within utterance
    std::size_t position;        // within syllable
};

struct Layout {
    std::vector<PhonemeSlot> phonemes;
    std::vector<const Syllable*> syllables;
};

Layout layout_of(const UtteranceAnnotation& a)
{
    Layout l;
    for (std::size_t wi = 0; wi < a.words.size(); ++wi) {
        const auto& w = a.words[wi];
        for (std::size_t si = 0; si < w.syllables.size(); ++si) {
            const std::size_t g = l.syllables.size();
            l.syllables.push_back(&w.syllables[si]);
            for (std::size_t pi = 0; pi < w.syllables[si].phonemes.size(); ++pi) {
                l.phonemes.push_back({wi, si, g, pi});
            }
        }
    }
    return l;
}

class Writer {
public:
    explicit Writer(Vector& out) : out_(out) {}

    void put(std::size_t group, std::size_t block, std::optional<std::size_t> index)
    {
        const std::size_t width = kFeatureGroupWidths[group] / kFeatureGroupBlocks[group];
        if (!index) {
            return;
        }
        if (*index >= width) {
            throw std::invalid_argument("encode: value " + std::to_string(*index) + " exceeds group width");
        }
        out_[feature_group_offset(group) + block * width + *index] = 1.0;
    }

private:
    Vector& out_;
};

Vector encode_with_layout(const UtteranceAnnotation& annotation, const Layout& layout, std::size_t index,
                          const PhonemeInventory& inventory)
{
    if (index >= layout.phonemes.size()) {
        throw std::invalid_argument("encode: phoneme index " + std::to_string(index) + " out of range ("
                                    + std::to_string(layout.phonemes.size()) + " phonemes)");
    }
    const PhonemeSlot& slot = layout.phonemes[index];
    const Word& word = annotation.words[slot.word];
    const Syllable& syl = word.syllables[slot.syllable];

    auto phoneme_at = [&](std::size_t k) -> const std::string& {
        const PhonemeSlot& s = layout.phonemes[k];
        return layout.syllables[s.global_syllable]->phonemes[s.position];
    };

    Vector out(kFeatureDim, 0.0);
    Writer w(out);

    // Phoneme identity: previous, current, next (across word boundaries).
    if (index > 0) {
        w.put(0, 0, inventory.index_of(phoneme_at(index - 1)));
    }
    w.put(0, 1, inventory.index_of(phoneme_at(index)));
    if (index + 1 < layout.phonemes.size()) {
        w.put(0, 2, inventory.index_of(phoneme_at(index + 1)));
    }

    w.put(1, 0, word.syllables.size() - 1);

    w.put(2, 0, slot.position);
    w.put(2, 1, syl.phonemes.size() - 1 - slot.position);

    w.put(3, 0, slot.syllable);
    w.put(3, 1, word.syllables.size() - 1 - slot.syllable);

    if (slot.global_syllable > 0) {
        w.put(4, 0, layout.syllables[slot.global_syllable - 1]->phonemes.size() - 1);
    }
    w.put(4, 1, syl.phonemes.size() - 1);
    if (slot.global_syllable + 1 < layout.syllables.size()) {
        w.put(4, 2, layout.syllables[slot.global_syllable + 1]->phonemes.size() - 1);
    }

    for (std::size_t p = 0; p < syl.phonemes.size(); ++p) {
        if (const auto v = inventory.vowel_index(syl.phonemes[p])) {
            w.put(5, 0, p);
            w.put(6, 0, *v);
            break;
        }
    }
    return out;
}

} // namespace

Vector encode(const UtteranceAnnotation& annotation, std::size_t phoneme_index, const PhonemeInventory& inventory)
{
    annotation.validate(inventory);
    return encode_with_layout(annotation, layout_of(annotation), phoneme_index, inventory);
}

std::vector<Vector> encode_utterance(const UtteranceAnnotation& annotation, const PhonemeInventory& inventory)
{
    annotation.validate(inventory);
    const Layout layout = layout_of(annotation);
    std::vector<Vector> out;
    out.reserve(layout.phonemes.size());
    for (std::size_t k = 0; k < layout.phonemes.size(); ++k) {
        out.push_back(encode_with_layout(annotation, layout, k, inventory));
    }
    return out;
}

std::optional<std::size_t> decode_block(std::span<const double> features, std::size_t group, std::size_t block)
{
    if (features.size() != kFeatureDim) {
        throw std::invalid_argument("decode_block: expected a " + std::to_string(kFeatureDim) + "-bit vector");
    }
    if (group >= kFeatureGroupWidths.size() || block >= kFeatureGroupBlocks[group]) {
        throw std::invalid_argument("decode_block: no such group/block");
    }
    const std::size_t width = kFeatureGroupWidths[group] / kFeatureGroupBlocks[group];
    const std::size_t base = feature_group_offset(group) + block * width;
    std::optional<std::size_t> found;
    for (std::size_t k = 0; k < width; ++k) {
        if (features[base + k] != 0.0) {
            if (found) {
                throw std::invalid_argument("decode_block: more than one bit set in group "
                                            + std::to_string(group));
            }
            found = k;
        }
    }
    return found;
}

} // namespace f0dbn
