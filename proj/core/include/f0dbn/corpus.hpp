#pragma once

#include "f0dbn/contour.hpp"
#include "f0dbn/features.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace f0dbn {

/// Failure while reading a corpus, tagged with the offending utterance.
class CorpusError : public std::runtime_error {
public:
    enum class Kind { MissingFile, Parse, Alignment, DuplicateId };

    CorpusError(Kind kind, std::string utterance, const std::string& message);

    Kind kind() const noexcept { return kind_; }
    const std::string& utterance() const noexcept { return utterance_; }

private:
    Kind kind_;
    std::string utterance_;
};

/// One manifest entry. track and durations are absent for pretraining-only
/// utterances.
struct Utterance {
    std::string id;
    UtteranceAnnotation annotation;
    std::optional<F0Track> track;
    std::optional<StateDurations> durations;

    bool labeled() const noexcept { return track.has_value() && durations.has_value(); }

    friend bool operator==(const Utterance&, const Utterance&) = default;
};

struct Corpus {
    std::vector<Utterance> utterances;

    /// Throws std::out_of_range for an unknown id.
    const Utterance& at(std::string_view id) const;
    std::vector<std::string> ids() const;

    friend bool operator==(const Corpus&, const Corpus&) = default;
};

// Line formats. Each parse_* throws std::invalid_argument with a line number.

/// Words on lines, syllables separated by '|', phonemes by whitespace.
UtteranceAnnotation parse_annotation(std::string_view text);
std::string format_annotation(const UtteranceAnnotation& annotation);

/// One Hz value per line, 0 for unvoiced.
F0Track parse_track(std::string_view text, double frame_period = kDefaultFramePeriod);
std::string format_track(std::span<const double> values);

/// One line per phoneme with kStatesPerPhoneme frame counts.
StateDurations parse_durations(std::string_view text);
std::string format_durations(const StateDurations& durations);

/// Shortest decimal text that parses back to exactly `value`.
std::string format_real(double value);

std::string read_text_file(const std::filesystem::path& path);

/// Writes to a sibling temporary file, then renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

/// Reads `id<TAB>annotation<TAB>f0<TAB>durations` lines; paths are relative
/// to the manifest's directory and '-' marks an absent track/durations file.
/// Validates annotations against the inventory and checks that the track length
/// equals the total duration and that there is one duration row per phoneme.
Corpus load_corpus(const std::filesystem::path& manifest,
                   const PhonemeInventory& inventory = PhonemeInventory::default_inventory());

/// Writes manifest.tsv plus ann/, f0/ and dur/ files under `dir`.
/// Returns the manifest path.
std::filesystem::path save_corpus(const Corpus& corpus, const std::filesystem::path& dir);

struct SplitCounts {
    std::size_t train = 0;
    std::size_t cv = 0;
    std::size_t test = 0;
};

struct DatasetSplit {
    std::vector<std::string> train;
    std::vector<std::string> cv;
    std::vector<std::string> test;

    friend bool operator==(const DatasetSplit&, const DatasetSplit&) = default;
};

/// Parses "a,b,c". Throws std::invalid_argument.
SplitCounts parse_split_counts(std::string_view text);

/// Scales train:cv:test ratios to n items; remainders go to train.
SplitCounts counts_from_ratios(std::size_t n, double train, double cv, double test);

/// Seeded shuffle of the ids, then consecutive train/cv/test partitions.
/// Throws std::invalid_argument when the counts exceed the number of ids.
DatasetSplit split(std::span<const std::string> ids, const SplitCounts& counts, std::uint64_t seed);
DatasetSplit split(const Corpus& corpus, const SplitCounts& counts, std::uint64_t seed);

/// Ground-truth state log-F0 for the synthetic corpus: a seeded linear map of
/// the feature bits into a phoneme level and a within-phoneme slope, plus a
/// fixed rise-fall offset per state.
class SyntheticTarget {
public:
    static constexpr double kBaseHz = 120.0;
    static constexpr double kLevelScale = 0.08;
    static constexpr double kSlopeScale = 0.03;
    static constexpr std::array<double, kStatesPerPhoneme> kStateOffsets = {-0.02, 0.01, 0.02, 0.01, -0.01};

    explicit SyntheticTarget(std::uint64_t seed);

    PhonemeStateF0 operator()(std::span<const double> features) const;

private:
    Vector level_;
    Vector slope_;
};

struct SyntheticCorpusConfig {
    std::size_t utterances = 50;
    std::uint64_t seed = 0;
    /// Gaussian noise (log-Hz) added to each state before rendering the track.
    double noise_std = 0.0;
    /// Probability that a consonant's frames are marked unvoiced in the track.
    double unvoiced_consonant_prob = 0.0;
    double frame_period = kDefaultFramePeriod;
};

/// Random annotations within the structural bounds, durations of 1-6 frames
/// per state, and tracks rendered with spline_expand from SyntheticTarget, with
/// the knots adjusted so extract_state_f0 recovers the target states.
Corpus generate_synthetic_corpus(const SyntheticCorpusConfig& config,
                                 const PhonemeInventory& inventory = PhonemeInventory::default_inventory());

/// generate_synthetic_corpus + save_corpus; also writes inventory.txt.
std::filesystem::path write_synthetic_corpus(const std::filesystem::path& dir, const SyntheticCorpusConfig& config,
                                             const PhonemeInventory& inventory = PhonemeInventory::default_inventory());

} // namespace f0dbn
