#include "f0dbn/pipeline.hpp"

#include <cmath>
#include <stdexcept>

namespace f0dbn {

std::vector<Vector> feature_vectors(const Corpus& corpus, std::span<const std::string> ids,
                                    const PhonemeInventory& inventory)
{
    std::vector<Vector> out;
    for (const auto& id : ids) {
        auto f = encode_utterance(corpus.at(id).annotation, inventory);
        out.insert(out.end(), std::make_move_iterator(f.begin()), std::make_move_iterator(f.end()));
    }
    return out;
}

std::vector<TrainSample> build_samples(const Corpus& corpus, std::span<const std::string> ids,
                                       const PhonemeInventory& inventory)
{
    std::vector<TrainSample> out;
    for (const auto& id : ids) {
        const Utterance& u = corpus.at(id);
        if (!u.labeled()) {
            throw std::invalid_argument("build_samples: utterance '" + id + "' has no F0 track or durations");
        }
        const auto features = encode_utterance(u.annotation, inventory);
        const StateF0 states = extract_state_f0(continuize(*u.track), *u.durations);
        for (std::size_t p = 0; p < features.size(); ++p) {
            out.push_back({features[p], Vector(states[p].begin(), states[p].end())});
        }
    }
    return out;
}

EvalResult evaluate_set(const DnnModel& model, const Corpus& corpus, std::span<const std::string> ids,
                        const PhonemeInventory& inventory, const EvalOptions& options)
{
    FrameStats pooled;
    for (const auto& id : ids) {
        const Utterance& u = corpus.at(id);
        if (!u.labeled()) {
            throw std::invalid_argument("evaluate_set: utterance '" + id + "' has no reference");
        }
        pooled.merge(evaluate_utterance(model, u.annotation, *u.durations, *u.track, inventory, options).stats);
    }
    return pooled.result();
}

TrainedSystem train_system(const Corpus& corpus, const DatasetSplit& split, const SystemConfig& config,
                           const PhonemeInventory& inventory)
{
    RbmTrainConfig pre = config.pretrain;
    pre.seed = config.seed;
    FinetuneConfig fine = config.finetune;
    fine.seed = Rng::derive(config.seed, 1).next_u64();
    const std::uint64_t head_seed = Rng::derive(config.seed, 2).next_u64();

    const auto inputs = feature_vectors(corpus, split.train, inventory);
    DbnModel dbn = greedy_train(inputs, config.hidden_sizes, pre);
    const DnnModel init = init_from_dbn(dbn, kStatesPerPhoneme, head_seed);
    const auto train = build_samples(corpus, split.train, inventory);
    const auto cv = build_samples(corpus, split.cv, inventory);
    FinetuneResult tuned = finetune(init, train, cv, fine);
    return {std::move(dbn), std::move(tuned)};
}

std::size_t best_row(std::span<const SweepRow> rows)
{
    if (rows.empty()) {
        throw std::invalid_argument("best_row: empty table");
    }
    std::size_t best = 0;
    auto better = [](const EvalResult& a, const EvalResult& b) {
        if (std::isnan(b.xcorr)) {
            return !std::isnan(a.xcorr) || a.rmse < b.rmse;
        }
        if (std::isnan(a.xcorr)) {
            return false;
        }
        if (a.xcorr != b.xcorr) {
            return a.xcorr > b.xcorr;
        }
        return a.rmse < b.rmse;
    };
    for (std::size_t k = 1; k < rows.size(); ++k) {
        if (better(rows[k].test, rows[best].test)) {
            best = k;
        }
    }
    return best;
}

SweepTable run_sweep(const Corpus& corpus, const DatasetSplit& split, const SweepSpec& spec,
                     const PhonemeInventory& inventory)
{
    if (spec.layer_counts.empty() || spec.unit_counts.empty()) {
        throw std::invalid_argument("run_sweep: layer and unit grids must be non-empty");
    }
    SweepTable table;
    for (std::size_t layers : spec.layer_counts) {
        for (std::size_t units : spec.unit_counts) {
            if (layers == 0 || units == 0) {
                throw std::invalid_argument("run_sweep: layer and unit counts must be positive");
            }
            SystemConfig cfg;
            cfg.hidden_sizes.assign(layers, units);
            cfg.pretrain = spec.pretrain;
            cfg.finetune = spec.finetune;
            cfg.seed = spec.seed;
            const TrainedSystem sys = train_system(corpus, split, cfg, inventory);
            table.rows.push_back({layers, units, evaluate_set(sys.finetuned.model, corpus, split.test, inventory, spec.eval)});
        }
    }
    table.best = best_row(table.rows);
    return table;
}

void write_sweep_table(std::ostream& out, const SweepTable& table)
{
    out << "layers\tunits\trmse_hz\txcorr\tn_frames\n";
    for (const auto& r : table.rows) {
        out << r.layers << '\t' << r.units << '\t' << format_real(r.test.rmse) << '\t' << format_real(r.test.xcorr)
            << '\t' << r.test.n_frames << '\n';
    }
}

void write_sweep_plot(std::ostream& out, const SweepTable& table)
{
    out << "# units rmse_hz xcorr; one block per hidden-layer count\n";
    std::size_t current = 0;
    bool first = true;
    for (const auto& r : table.rows) {
        if (first || r.layers != current) {
            if (!first) {
                out << "\n\n";
            }
            out << "# layers=" << r.layers << '\n';
            current = r.layers;
            first = false;
        }
        out << r.units << ' ' << format_real(r.test.rmse) << ' ' << format_real(r.test.xcorr) << '\n';
    }
}

} // namespace f0dbn
