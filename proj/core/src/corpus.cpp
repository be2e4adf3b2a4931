#include "f0dbn/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <system_error>

namespace f0dbn {

namespace fs = std::filesystem;

CorpusError::CorpusError(Kind kind, std::string utterance, const std::string& message)
    : std::runtime_error(utterance.empty() ? message : "utterance '" + utterance + "': " + message),
      kind_(kind), utterance_(std::move(utterance))
{
}

const Utterance& Corpus::at(std::string_view id) const
{
    for (const auto& u : utterances) {
        if (u.id == id) {
            return u;
        }
    }
    throw std::out_of_range("corpus has no utterance '" + std::string(id) + "'");
}

std::vector<std::string> Corpus::ids() const
{
    std::vector<std::string> out;
    out.reserve(utterances.size());
    for (const auto& u : utterances) {
        out.push_back(u.id);
    }
    return out;
}

namespace {

std::vector<std::string> split_lines(std::string_view text)
{
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) {
            end = text.size();
        }
        std::string line(text.substr(start, end - start));
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        lines.push_back(std::move(line));
        start = end + 1;
    }
    return lines;
}

std::vector<std::string> split_ws(std::string_view s)
{
    std::vector<std::string> out;
    std::istringstream in{std::string(s)};
    for (std::string tok; in >> tok;) {
        out.push_back(tok);
    }
    return out;
}

bool blank(std::string_view s)
{
    return s.find_first_not_of(" \t") == std::string_view::npos;
}

double parse_double(std::string_view s, std::size_t line)
{
    double v = 0.0;
    const auto* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || ptr != end) {
        throw std::invalid_argument("line " + std::to_string(line) + ": cannot parse number '" + std::string(s) + "'");
    }
    return v;
}

std::size_t parse_count(std::string_view s, std::size_t line)
{
    std::size_t v = 0;
    const auto* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || ptr != end) {
        throw std::invalid_argument("line " + std::to_string(line) + ": cannot parse count '" + std::string(s) + "'");
    }
    return v;
}

std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string_view::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t");
    return std::string(s.substr(b, e - b + 1));
}

} // namespace

UtteranceAnnotation parse_annotation(std::string_view text)
{
    UtteranceAnnotation a;
    const auto lines = split_lines(text);
    for (std::size_t ln = 0; ln < lines.size(); ++ln) {
        if (blank(lines[ln])) {
            continue;
        }
        Word w;
        std::string_view rest = lines[ln];
        while (true) {
            const auto bar = rest.find('|');
            Syllable s{split_ws(rest.substr(0, bar))};
            if (s.phonemes.empty()) {
                throw std::invalid_argument("line " + std::to_string(ln + 1) + ": empty syllable");
            }
            w.syllables.push_back(std::move(s));
            if (bar == std::string_view::npos) {
                break;
            }
            rest = rest.substr(bar + 1);
        }
        a.words.push_back(std::move(w));
    }
    return a;
}

std::string format_annotation(const UtteranceAnnotation& annotation)
{
    std::string out;
    for (const auto& w : annotation.words) {
        for (std::size_t s = 0; s < w.syllables.size(); ++s) {
            if (s > 0) {
                out += " | ";
            }
            const auto& ph = w.syllables[s].phonemes;
            for (std::size_t p = 0; p < ph.size(); ++p) {
                if (p > 0) {
                    out += ' ';
                }
                out += ph[p];
            }
        }
        out += '\n';
    }
    return out;
}

F0Track parse_track(std::string_view text, double frame_period)
{
    F0Track t;
    t.frame_period = frame_period;
    const auto lines = split_lines(text);
    for (std::size_t ln = 0; ln < lines.size(); ++ln) {
        const std::string v = trim(lines[ln]);
        if (v.empty()) {
            continue;
        }
        t.values.push_back(parse_double(v, ln + 1));
    }
    t.validate();
    return t;
}

std::string format_real(double value)
{
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    if (ec != std::errc()) {
        throw std::runtime_error("format_real: conversion failed");
    }
    return std::string(buf, ptr);
}

std::string format_track(std::span<const double> values)
{
    std::string out;
    for (double v : values) {
        out += format_real(v);
        out += '\n';
    }
    return out;
}

StateDurations parse_durations(std::string_view text)
{
    StateDurations d;
    const auto lines = split_lines(text);
    for (std::size_t ln = 0; ln < lines.size(); ++ln) {
        if (blank(lines[ln])) {
            continue;
        }
        const auto fields = split_ws(lines[ln]);
        if (fields.size() != kStatesPerPhoneme) {
            throw std::invalid_argument("line " + std::to_string(ln + 1) + ": expected "
                                        + std::to_string(kStatesPerPhoneme) + " state durations, got "
                                        + std::to_string(fields.size()));
        }
        PhonemeDurations row{};
        for (std::size_t s = 0; s < kStatesPerPhoneme; ++s) {
            row[s] = parse_count(fields[s], ln + 1);
        }
        d.push_back(row);
    }
    validate_durations(d);
    return d;
}

std::string format_durations(const StateDurations& durations)
{
    std::string out;
    for (const auto& row : durations) {
        for (std::size_t s = 0; s < row.size(); ++s) {
            if (s > 0) {
                out += ' ';
            }
            out += std::to_string(row[s]);
        }
        out += '\n';
    }
    return out;
}

std::string read_text_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_atomic(const fs::path& path, std::string_view bytes)
{
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw std::runtime_error("cannot write " + tmp.string());
        }
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) {
            throw std::runtime_error("write failed for " + tmp.string());
        }
    }
    fs::rename(tmp, path);
}

Corpus load_corpus(const fs::path& manifest, const PhonemeInventory& inventory)
{
    using Kind = CorpusError::Kind;
    if (!fs::exists(manifest)) {
        throw CorpusError(Kind::MissingFile, "", "manifest " + manifest.string() + " does not exist");
    }
    const fs::path base = manifest.parent_path();
    const auto lines = split_lines(read_text_file(manifest));

    Corpus corpus;
    std::set<std::string> seen;
    for (std::size_t ln = 0; ln < lines.size(); ++ln) {
        if (blank(lines[ln]) || lines[ln].front() == '#') {
            continue;
        }
        std::vector<std::string> fields;
        std::string_view rest = lines[ln];
        while (true) {
            const auto tab = rest.find('\t');
            fields.push_back(std::string(rest.substr(0, tab)));
            if (tab == std::string_view::npos) {
                break;
            }
            rest = rest.substr(tab + 1);
        }
        if (fields.size() != 4 && fields.size() != 2) {
            throw CorpusError(Kind::Parse, fields.front(),
                              "manifest line " + std::to_string(ln + 1) + " must have 2 or 4 tab-separated fields");
        }
        Utterance u;
        u.id = fields[0];
        if (u.id.empty()) {
            throw CorpusError(Kind::Parse, "", "manifest line " + std::to_string(ln + 1) + " has an empty id");
        }
        if (!seen.insert(u.id).second) {
            throw CorpusError(Kind::DuplicateId, u.id, "duplicate utterance id");
        }

        auto read = [&](const std::string& rel) {
            const fs::path p = base / rel;
            if (!fs::exists(p)) {
                throw CorpusError(Kind::MissingFile, u.id, "missing file " + p.string());
            }
            return read_text_file(p);
        };
        auto parse = [&](auto&& fn, const std::string& rel) {
            const std::string text = read(rel);
            try {
                return fn(text);
            } catch (const std::invalid_argument& e) {
                throw CorpusError(Kind::Parse, u.id, rel + ": " + e.what());
            }
        };

        u.annotation = parse([](const std::string& t) { return parse_annotation(t); }, fields[1]);
        try {
            u.annotation.validate(inventory);
        } catch (const std::invalid_argument& e) {
            throw CorpusError(Kind::Parse, u.id, fields[1] + ": " + e.what());
        }
        const bool has_track = fields.size() == 4 && fields[2] != "-";
        const bool has_durations = fields.size() == 4 && fields[3] != "-";
        if (has_track) {
            u.track = parse([](const std::string& t) { return parse_track(t); }, fields[2]);
        }
        if (has_durations) {
            u.durations = parse([](const std::string& t) { return parse_durations(t); }, fields[3]);
            if (u.durations->size() != u.annotation.phoneme_count()) {
                throw CorpusError(Kind::Alignment, u.id,
                                  std::to_string(u.durations->size()) + " duration rows for "
                                      + std::to_string(u.annotation.phoneme_count()) + " phonemes");
            }
        }
        if (has_track && has_durations && u.track->values.size() != total_frames(*u.durations)) {
            throw CorpusError(Kind::Alignment, u.id,
                              "F0 track has " + std::to_string(u.track->values.size())
                                  + " frames but durations total " + std::to_string(total_frames(*u.durations)));
        }
        corpus.utterances.push_back(std::move(u));
    }
    return corpus;
}

fs::path save_corpus(const Corpus& corpus, const fs::path& dir)
{
    fs::create_directories(dir);
    std::string manifest;
    for (const auto& u : corpus.utterances) {
        const std::string ann = "ann/" + u.id + ".txt";
        write_file_atomic(dir / ann, format_annotation(u.annotation));
        std::string f0 = "-";
        std::string dur = "-";
        if (u.track) {
            f0 = "f0/" + u.id + ".f0";
            write_file_atomic(dir / f0, format_track(u.track->values));
        }
        if (u.durations) {
            dur = "dur/" + u.id + ".dur";
            write_file_atomic(dir / dur, format_durations(*u.durations));
        }
        manifest += u.id + '\t' + ann + '\t' + f0 + '\t' + dur + '\n';
    }
    const fs::path path = dir / "manifest.tsv";
    write_file_atomic(path, manifest);
    return path;
}

SplitCounts parse_split_counts(std::string_view text)
{
    std::vector<std::size_t> parts;
    std::size_t start = 0;
    while (true) {
        const auto comma = text.find(',', start);
        const std::string field = trim(text.substr(start, comma == std::string_view::npos ? text.npos : comma - start));
        parts.push_back(parse_count(field, 1));
        if (comma == std::string_view::npos) {
            break;
        }
        start = comma + 1;
    }
    if (parts.size() != 3) {
        throw std::invalid_argument("split must be 'train,cv,test'");
    }
    return {parts[0], parts[1], parts[2]};
}

SplitCounts counts_from_ratios(std::size_t n, double train, double cv, double test)
{
    const double total = train + cv + test;
    if (!(train >= 0.0 && cv >= 0.0 && test >= 0.0 && total > 0.0)) {
        throw std::invalid_argument("counts_from_ratios: ratios must be non-negative and not all zero");
    }
    SplitCounts c;
    c.cv = static_cast<std::size_t>(std::floor(static_cast<double>(n) * cv / total));
    c.test = static_cast<std::size_t>(std::floor(static_cast<double>(n) * test / total));
    c.train = n - c.cv - c.test;
    return c;
}

DatasetSplit split(std::span<const std::string> ids, const SplitCounts& counts, std::uint64_t seed)
{
    const std::size_t needed = counts.train + counts.cv + counts.test;
    if (needed > ids.size()) {
        throw std::invalid_argument("split: requested " + std::to_string(needed) + " utterances but only "
                                    + std::to_string(ids.size()) + " available");
    }
    std::vector<std::string> shuffled(ids.begin(), ids.end());
    Rng rng(seed);
    rng.shuffle(shuffled);
    DatasetSplit s;
    auto it = shuffled.begin();
    s.train.assign(it, it + static_cast<std::ptrdiff_t>(counts.train));
    it += static_cast<std::ptrdiff_t>(counts.train);
    s.cv.assign(it, it + static_cast<std::ptrdiff_t>(counts.cv));
    it += static_cast<std::ptrdiff_t>(counts.cv);
    s.test.assign(it, it + static_cast<std::ptrdiff_t>(counts.test));
    return s;
}

DatasetSplit split(const Corpus& corpus, const SplitCounts& counts, std::uint64_t seed)
{
    const auto ids = corpus.ids();
    return split(ids, counts, seed);
}

SyntheticTarget::SyntheticTarget(std::uint64_t seed) : level_(kFeatureDim), slope_(kFeatureDim)
{
    // Roughly 13 bits are active per vector, so this keeps unit variance per map.
    const double scale = 1.0 / std::sqrt(13.0);
    Rng rng = Rng::derive(seed, 0x7a26e7);
    for (double& c : level_) {
        c = scale * rng.normal();
    }
    for (double& c : slope_) {
        c = scale * rng.normal();
    }
}

PhonemeStateF0 SyntheticTarget::operator()(std::span<const double> features) const
{
    if (features.size() != kFeatureDim) {
        throw std::invalid_argument("SyntheticTarget: expected a " + std::to_string(kFeatureDim) + "-bit vector");
    }
    const double level = kLevelScale * dot(level_, features);
    const double slope = kSlopeScale * dot(slope_, features);
    PhonemeStateF0 out{};
    for (std::size_t s = 0; s < kStatesPerPhoneme; ++s) {
        const double position = (static_cast<double>(s) - 2.0) / 2.0;
        out[s] = std::log(kBaseHz) + level + slope * position + kStateOffsets[s];
    }
    return out;
}

namespace {

Syllable random_syllable(Rng& rng, const PhonemeInventory& inv)
{
    auto consonant = [&] { return inv.consonants()[rng.below(kNumConsonants)]; };
    auto vowel = [&] { return inv.vowels()[rng.below(kNumVowels)]; };
    static constexpr const char* kShapes[] = {"V", "CV", "CV", "CV", "CVC", "CVC", "CCV", "VC", "CVCC", "CCVCC", "CCVCCC"};
    Syllable s;
    if (rng.uniform() < 0.03) {
        // Vowel-less syllable.
        for (std::size_t k = 0, n = 1 + rng.below(2); k < n; ++k) {
            s.phonemes.push_back(consonant());
        }
        return s;
    }
    const std::string_view shape = kShapes[rng.below(std::size(kShapes))];
    for (char c : shape) {
        s.phonemes.push_back(c == 'C' ? consonant() : vowel());
    }
    return s;
}

// Adjusts the spline knots until per-state averaging of the rendered contour
// returns `states`, so extraction recovers the ground truth.
ContinuousContour render_states(const StateF0& states, const StateDurations& durations, double frame_period)
{
    StateF0 knots = states;
    ContinuousContour contour = spline_expand(knots, durations, frame_period);
    for (int iter = 0; iter < 100; ++iter) {
        const StateF0 back = extract_state_f0(contour, durations);
        double residual = 0.0;
        for (std::size_t p = 0; p < states.size(); ++p) {
            for (std::size_t s = 0; s < kStatesPerPhoneme; ++s) {
                const double e = states[p][s] - back[p][s];
                residual = std::max(residual, std::abs(e));
                knots[p][s] += e;
            }
        }
        if (residual < 1e-12) {
            break;
        }
        contour = spline_expand(knots, durations, frame_period);
    }
    return contour;
}

std::size_t random_word_length(Rng& rng)
{
    if (rng.uniform() < 0.05) {
        return 5 + rng.below(kMaxWordSyllables - 4);
    }
    return 1 + rng.below(4);
}

} // namespace

Corpus generate_synthetic_corpus(const SyntheticCorpusConfig& config, const PhonemeInventory& inventory)
{
    if (config.utterances < 1) {
        throw std::invalid_argument("generate_synthetic_corpus: at least one utterance required");
    }
    if (!(config.noise_std >= 0.0) || !(config.unvoiced_consonant_prob >= 0.0 && config.unvoiced_consonant_prob <= 1.0)) {
        throw std::invalid_argument("generate_synthetic_corpus: invalid noise or unvoiced probability");
    }
    const SyntheticTarget target(config.seed);
    Rng rng = Rng::derive(config.seed, 1);
    const std::size_t width = std::to_string(config.utterances).size() < 4 ? 4 : std::to_string(config.utterances).size();

    Corpus corpus;
    for (std::size_t n = 0; n < config.utterances; ++n) {
        Utterance u;
        std::string num = std::to_string(n + 1);
        u.id = "utt" + std::string(width - num.size(), '0') + num;

        const std::size_t words = 2 + rng.below(5);
        for (std::size_t w = 0; w < words; ++w) {
            Word word;
            for (std::size_t s = 0, len = random_word_length(rng); s < len; ++s) {
                word.syllables.push_back(random_syllable(rng, inventory));
            }
            u.annotation.words.push_back(std::move(word));
        }

        const auto features = encode_utterance(u.annotation, inventory);
        StateDurations durations;
        StateF0 states;
        std::vector<bool> is_vowel;
        for (const auto& w : u.annotation.words) {
            for (const auto& s : w.syllables) {
                for (const auto& p : s.phonemes) {
                    is_vowel.push_back(inventory.is_vowel(p));
                }
            }
        }
        for (std::size_t p = 0; p < features.size(); ++p) {
            PhonemeDurations d{};
            for (auto& x : d) {
                x = 1 + rng.below(is_vowel[p] ? 6 : 4);
            }
            durations.push_back(d);
            PhonemeStateF0 st = target(features[p]);
            if (config.noise_std > 0.0) {
                for (double& v : st) {
                    v += rng.normal(0.0, config.noise_std);
                }
            }
            states.push_back(st);
        }

        ContinuousContour contour = render_states(states, durations, config.frame_period);
        F0Track track{config.frame_period, std::move(contour.values)};
        if (config.unvoiced_consonant_prob > 0.0) {
            std::vector<double> voiced = track.values;
            std::size_t frame = 0;
            for (std::size_t p = 0; p < durations.size(); ++p) {
                std::size_t len = 0;
                for (std::size_t x : durations[p]) {
                    len += x;
                }
                if (!is_vowel[p] && rng.uniform() < config.unvoiced_consonant_prob) {
                    std::fill(track.values.begin() + static_cast<std::ptrdiff_t>(frame),
                              track.values.begin() + static_cast<std::ptrdiff_t>(frame + len), 0.0);
                }
                frame += len;
            }
            if (track.voiced_count() < 2) {
                track.values = std::move(voiced);
            }
        }
        u.track = std::move(track);
        u.durations = std::move(durations);
        corpus.utterances.push_back(std::move(u));
    }
    return corpus;
}

fs::path write_synthetic_corpus(const fs::path& dir, const SyntheticCorpusConfig& config,
                                const PhonemeInventory& inventory)
{
    const Corpus corpus = generate_synthetic_corpus(config, inventory);
    const fs::path manifest = save_corpus(corpus, dir);
    write_file_atomic(dir / "inventory.txt", inventory.serialize());
    return manifest;
}

} // namespace f0dbn
