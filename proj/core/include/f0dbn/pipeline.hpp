#pragma once

#include "f0dbn/corpus.hpp"
#include "f0dbn/dbn.hpp"
#include "f0dbn/dnn.hpp"
#include "f0dbn/eval.hpp"

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace f0dbn {

/// Feature vectors of every phoneme of the listed utterances (labeled or not).
std::vector<Vector> feature_vectors(const Corpus& corpus, std::span<const std::string> ids,
                                    const PhonemeInventory& inventory);

/// One sample per phoneme with log-Hz state targets extracted from the
/// continuized track. Throws std::invalid_argument for unlabeled utterances.
std::vector<TrainSample> build_samples(const Corpus& corpus, std::span<const std::string> ids,
                                       const PhonemeInventory& inventory);

/// Frame-pooled evaluation over the listed utterances.
EvalResult evaluate_set(const DnnModel& model, const Corpus& corpus, std::span<const std::string> ids,
                        const PhonemeInventory& inventory, const EvalOptions& options = {});

struct SystemConfig {
    std::vector<std::size_t> hidden_sizes;
    RbmTrainConfig pretrain;
    FinetuneConfig finetune;
    std::uint64_t seed = 0;
};

struct TrainedSystem {
    DbnModel dbn;
    FinetuneResult finetuned;
};

/// Greedy DBN pretraining on train-set features, init_from_dbn, finetune on
/// train/cv. Seeds for the three stages derive from config.seed.
TrainedSystem train_system(const Corpus& corpus, const DatasetSplit& split, const SystemConfig& config,
                           const PhonemeInventory& inventory);

struct SweepSpec {
    std::vector<std::size_t> layer_counts{4, 5, 6, 7};
    std::vector<std::size_t> unit_counts{40, 80, 120, 160, 200};
    RbmTrainConfig pretrain;
    FinetuneConfig finetune;
    std::uint64_t seed = 0;
    EvalOptions eval;
};

struct SweepRow {
    std::size_t layers = 0;
    std::size_t units = 0;
    EvalResult test;
};

struct SweepTable {
    std::vector<SweepRow> rows; // layer-major, in grid order
    std::size_t best = 0;
};

/// Index of the row with the highest test xcorr, ties broken by lower rmse,
/// then by grid order. NaN xcorr ranks last.
std::size_t best_row(std::span<const SweepRow> rows);

/// Trains and evaluates every (layers, units) cell with the same seed, so each
/// row equals a direct train_system + evaluate_set run for that architecture.
SweepTable run_sweep(const Corpus& corpus, const DatasetSplit& split, const SweepSpec& spec,
                     const PhonemeInventory& inventory);

/// Tab-separated `layers units rmse_hz xcorr n_frames` with a header line.
void write_sweep_table(std::ostream& out, const SweepTable& table);

/// gnuplot data: one block per layer count, blank-line separated, columns
/// `units rmse_hz xcorr`.
void write_sweep_plot(std::ostream& out, const SweepTable& table);

} // namespace f0dbn
