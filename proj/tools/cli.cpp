#include "cli.hpp"

#include "f0dbn/corpus.hpp"
#include "f0dbn/dbn.hpp"
#include "f0dbn/dnn.hpp"
#include "f0dbn/eval.hpp"
#include "f0dbn/model_io.hpp"
#include "f0dbn/pipeline.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <stdexcept>

namespace f0dbn::cli {

namespace {

namespace fs = std::filesystem;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void check_usage(const std::function<void()>& check)
{
    try {
        check();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
}

std::string join(std::span<const std::size_t> xs)
{
    std::string s;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        s += (k ? "," : "") + std::to_string(xs[k]);
    }
    return s;
}

struct CommonPaths {
    std::string inventory;

    PhonemeInventory load_inventory() const
    {
        return inventory.empty() ? PhonemeInventory::default_inventory() : PhonemeInventory::load(inventory);
    }
};

struct SplitArg {
    std::vector<double> ratios{5, 2, 3};

    void add(CLI::App* app)
    {
        app->add_option("--split", ratios, "train,cv,test ratios, scaled to the corpus size")
            ->delimiter(',')
            ->capture_default_str();
    }

    void check() const
    {
        if (ratios.size() != 3) {
            throw UsageError("--split needs exactly three comma-separated values");
        }
        check_usage([&] { counts_from_ratios(1, ratios[0], ratios[1], ratios[2]); });
    }

    DatasetSplit apply(const Corpus& corpus, std::uint64_t seed) const
    {
        return split(corpus, counts_from_ratios(corpus.utterances.size(), ratios[0], ratios[1], ratios[2]), seed);
    }
};

void add_pretrain_flags(CLI::App* app, RbmTrainConfig& c)
{
    app->add_option("--epochs", c.epochs, "RBM training epochs per layer")->capture_default_str();
    app->add_option("--lr", c.learning_rate, "RBM learning rate")->capture_default_str();
    app->add_option("--momentum", c.momentum, "RBM momentum")->capture_default_str();
    app->add_option("--batch", c.minibatch_size, "RBM minibatch size")->capture_default_str();
    app->add_option("--cd-steps", c.cd_steps, "Gibbs steps per CD update")->capture_default_str();
}

void add_finetune_flags(CLI::App* app, FinetuneConfig& c, bool prefixed)
{
    const std::string p = prefixed ? "--ft-" : "--";
    app->add_option(p + "lr", c.initial_learning_rate, "initial fine-tuning learning rate")->capture_default_str();
    app->add_option(p + "batch", c.minibatch_phonemes, "phonemes per minibatch (5 states each)")->capture_default_str();
    app->add_option(p + "epochs", c.max_epochs, "fine-tuning epochs")->capture_default_str();
    app->add_option("--weight-decay", c.weight_decay, "L2 penalty on weights")->capture_default_str();
    app->add_option("--sparsity-target", c.sparsity_target, "target mean hidden activation")->capture_default_str();
    app->add_option("--sparsity-weight", c.sparsity_weight, "weight of the sparsity KL term")->capture_default_str();
    app->add_option("--patience", c.patience_epochs, "epochs between cv comparisons")->capture_default_str();
    app->add_option("--decay", c.lr_decay_factor, "learning-rate factor applied when cv loss rises")
        ->capture_default_str();
}

std::vector<std::pair<std::string, std::string>> pretrain_metadata(const RbmTrainConfig& c,
                                                                   std::span<const std::size_t> sizes)
{
    return {{"tool", "f0dbn pretrain"},
            {"layer_sizes", join(sizes)},
            {"epochs", std::to_string(c.epochs)},
            {"learning_rate", format_real(c.learning_rate)},
            {"momentum", format_real(c.momentum)},
            {"minibatch_size", std::to_string(c.minibatch_size)},
            {"cd_steps", std::to_string(c.cd_steps)}};
}

void write_history(const fs::path& path, const FinetuneResult& r)
{
    std::ostringstream s;
    s << "epoch\tlearning_rate\ttrain_loss\ttrain_mse\tcv_mse\tlr_halved\n";
    for (const auto& e : r.history) {
        s << e.epoch << '\t' << format_real(e.learning_rate) << '\t' << format_real(e.train_loss) << '\t'
          << format_real(e.train_mse) << '\t' << format_real(e.cv_mse) << '\t' << (e.lr_halved ? 1 : 0) << '\n';
    }
    write_file_atomic(path, s.str());
}

const std::vector<std::string>& pick_set(const DatasetSplit& s, const std::string& name, std::vector<std::string>& all)
{
    if (name == "train") {
        return s.train;
    }
    if (name == "cv") {
        return s.cv;
    }
    if (name == "test") {
        return s.test;
    }
    all = s.train;
    all.insert(all.end(), s.cv.begin(), s.cv.end());
    all.insert(all.end(), s.test.begin(), s.test.end());
    return all;
}

void print_result(std::ostream& out, const EvalResult& r)
{
    out << "rmse_hz=" << format_real(r.rmse) << " xcorr=" << format_real(r.xcorr) << " n_frames=" << r.n_frames
        << '\n';
}

DnnModel load_dnn(const fs::path& path)
{
    ModelFile f = load_model(path);
    if (f.kind() != ModelKind::Dnn) {
        throw std::runtime_error(path.string() + ": expected a fine-tuned DNN model, found a DBN");
    }
    return std::get<DnnModel>(std::move(f.model));
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"F0 contour prediction with DBN-initialized deep networks", "f0dbn"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "help for every subcommand");

    // gen
    auto* gen = app.add_subcommand("gen", "write a synthetic labeled corpus");
    SyntheticCorpusConfig gen_cfg;
    std::string gen_out;
    gen->add_option("--utterances", gen_cfg.utterances, "number of utterances")->capture_default_str();
    gen->add_option("--seed", gen_cfg.seed, "generator seed")->capture_default_str();
    gen->add_option("--noise", gen_cfg.noise_std, "log-Hz noise added to voiced frames")->capture_default_str();
    gen->add_option("--unvoiced-prob", gen_cfg.unvoiced_consonant_prob, "probability a consonant is unvoiced")
        ->capture_default_str();
    gen->add_option("--out", gen_out, "output directory")->required();

    // pretrain
    auto* pre = app.add_subcommand("pretrain", "greedy layer-wise DBN training on corpus features");
    RbmTrainConfig pre_cfg;
    std::vector<std::size_t> pre_layers(7, 120);
    std::string pre_corpus, pre_out, pre_log;
    CommonPaths pre_paths;
    SplitArg pre_split;
    std::uint64_t pre_seed = 0;
    pre->add_option("--corpus", pre_corpus, "corpus manifest")->required();
    pre->add_option("--layers", pre_layers, "hidden layer sizes")->delimiter(',')->capture_default_str();
    add_pretrain_flags(pre, pre_cfg);
    pre->add_option("--seed", pre_seed, "seed for layer init, sampling and the split")->capture_default_str();
    auto* pre_split_opt = pre->add_option("--split", pre_split.ratios,
                                          "train only on the train part of this train,cv,test split")
                              ->delimiter(',');
    pre->add_option("--inventory", pre_paths.inventory, "phoneme inventory file");
    pre->add_option("--out", pre_out, "output DBN model file")->required();
    pre->add_option("--log", pre_log, "per-epoch reconstruction log (default stdout)");

    // finetune
    auto* fine = app.add_subcommand("finetune", "initialize a DNN from a DBN and fine-tune on the corpus");
    FinetuneConfig fine_cfg;
    std::string fine_dbn, fine_corpus, fine_out, fine_history;
    CommonPaths fine_paths;
    SplitArg fine_split;
    std::uint64_t fine_seed = 0;
    fine->add_option("--dbn", fine_dbn, "DBN model from pretrain")->required();
    fine->add_option("--corpus", fine_corpus, "labeled corpus manifest")->required();
    fine_split.add(fine);
    fine->add_option("--seed", fine_seed, "seed for the split, the output layer and minibatch order")
        ->capture_default_str();
    add_finetune_flags(fine, fine_cfg, false);
    fine->add_option("--inventory", fine_paths.inventory, "phoneme inventory file");
    fine->add_option("--out", fine_out, "output DNN model file")->required();
    fine->add_option("--history", fine_history, "per-epoch history TSV");

    // predict
    auto* pred = app.add_subcommand("predict", "predict a frame-level F0 track");
    std::string pred_model, pred_ann, pred_dur, pred_out;
    CommonPaths pred_paths;
    pred->add_option("--model", pred_model, "DNN model file")->required();
    pred->add_option("--annotation", pred_ann, "annotation file")->required();
    pred->add_option("--durations", pred_dur, "state durations file")->required();
    pred->add_option("--inventory", pred_paths.inventory, "phoneme inventory file");
    pred->add_option("--out", pred_out, "output track file")->required();

    // eval
    auto* ev = app.add_subcommand("eval", "RMSE and correlation against reference contours");
    std::string ev_model, ev_corpus, ev_pred, ev_ref, ev_out, ev_set = "test";
    CommonPaths ev_paths;
    SplitArg ev_split;
    std::uint64_t ev_seed = 0;
    EvalOptions ev_opts;
    ev->add_option("--model", ev_model, "DNN model file (corpus mode)");
    ev->add_option("--corpus", ev_corpus, "labeled corpus manifest (corpus mode)");
    ev_split.add(ev);
    ev->add_option("--seed", ev_seed, "split seed")->capture_default_str();
    ev->add_option("--set", ev_set, "which part of the split to score")
        ->check(CLI::IsMember({"train", "cv", "test", "all"}))
        ->capture_default_str();
    ev->add_option("--pred", ev_pred, "predicted track file (file mode)");
    ev->add_option("--ref", ev_ref, "reference track file (file mode)");
    ev->add_flag("--voiced-only", ev_opts.voiced_only, "score only frames voiced in the reference");
    ev->add_option("--inventory", ev_paths.inventory, "phoneme inventory file");
    ev->add_option("--out", ev_out, "write the result as a TSV table");

    // sweep
    auto* sw = app.add_subcommand("sweep", "train and score a grid of depths and widths");
    SweepSpec sw_spec;
    std::string sw_corpus, sw_out, sw_plot;
    CommonPaths sw_paths;
    SplitArg sw_split;
    sw->add_option("--corpus", sw_corpus, "labeled corpus manifest")->required();
    sw_split.add(sw);
    sw->add_option("--seed", sw_spec.seed, "seed shared by every cell")->capture_default_str();
    sw->add_option("--layers", sw_spec.layer_counts, "hidden layer counts")->delimiter(',')->capture_default_str();
    sw->add_option("--units", sw_spec.unit_counts, "units per hidden layer")->delimiter(',')->capture_default_str();
    add_pretrain_flags(sw, sw_spec.pretrain);
    add_finetune_flags(sw, sw_spec.finetune, true);
    sw->add_flag("--voiced-only", sw_spec.eval.voiced_only, "score only voiced reference frames");
    sw->add_option("--inventory", sw_paths.inventory, "phoneme inventory file");
    sw->add_option("--out", sw_out, "output table TSV")->required();
    sw->add_option("--plot", sw_plot, "gnuplot data file");

    // inspect
    auto* ins = app.add_subcommand("inspect", "print model file metadata");
    std::string ins_model;
    ins->add_option("--model", ins_model, "model file")->required();

    std::vector<const char*> argv;
    for (const auto& a : args) {
        argv.push_back(a.c_str());
    }
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kExitUsage;
    }

    try {
        if (gen->parsed()) {
            check_usage([&] {
                if (gen_cfg.utterances == 0) {
                    throw std::invalid_argument("--utterances must be positive");
                }
                if (!(gen_cfg.noise_std >= 0.0)) {
                    throw std::invalid_argument("--noise must be non-negative");
                }
                if (!(gen_cfg.unvoiced_consonant_prob >= 0.0 && gen_cfg.unvoiced_consonant_prob <= 1.0)) {
                    throw std::invalid_argument("--unvoiced-prob must lie in [0, 1]");
                }
            });
            const fs::path manifest = write_synthetic_corpus(gen_out, gen_cfg);
            const Corpus c = load_corpus(manifest);
            std::size_t phonemes = 0;
            std::size_t frames = 0;
            for (const auto& u : c.utterances) {
                phonemes += u.annotation.phoneme_count();
                frames += u.track->values.size();
            }
            out << "utterances=" << c.utterances.size() << " phonemes=" << phonemes << " frames=" << frames
                << " manifest=" << manifest.string() << '\n';
        } else if (pre->parsed()) {
            check_usage([&] {
                pre_cfg.validate();
                if (pre_layers.empty() || std::find(pre_layers.begin(), pre_layers.end(), 0U) != pre_layers.end()) {
                    throw std::invalid_argument("--layers needs positive sizes");
                }
            });
            if (*pre_split_opt) {
                pre_split.check();
            }
            pre_cfg.seed = pre_seed;
            const PhonemeInventory inv = pre_paths.load_inventory();
            const Corpus c = load_corpus(pre_corpus, inv);
            std::vector<std::string> ids = *pre_split_opt ? pre_split.apply(c, pre_seed).train : c.ids();
            const auto data = feature_vectors(c, ids, inv);

            std::ostringstream log;
            const DbnModel dbn = greedy_train(data, pre_layers, pre_cfg, [&](std::size_t l, std::size_t e, double r) {
                log << "layer=" << l + 1 << " epoch=" << e << " recon_error=" << format_real(r) << '\n';
            });
            if (pre_log.empty()) {
                out << log.str();
            } else {
                write_file_atomic(pre_log, log.str());
            }
            ModelFile f{dbn, pre_seed, pretrain_metadata(pre_cfg, dbn.layer_sizes())};
            f.metadata.emplace_back("training_vectors", std::to_string(data.size()));
            save_model(f, pre_out);
            out << "model=" << pre_out << " layers=" << dbn.num_layers() << " sizes=" << join(dbn.layer_sizes())
                << " vectors=" << data.size() << '\n';
        } else if (fine->parsed()) {
            check_usage([&] { fine_cfg.validate(); });
            fine_split.check();
            const PhonemeInventory inv = fine_paths.load_inventory();
            ModelFile dbn_file = load_model(fine_dbn);
            if (dbn_file.kind() != ModelKind::Dbn) {
                throw std::runtime_error(fine_dbn + ": expected a DBN model");
            }
            const auto& dbn = std::get<DbnModel>(dbn_file.model);
            const Corpus c = load_corpus(fine_corpus, inv);
            const DatasetSplit s = fine_split.apply(c, fine_seed);
            fine_cfg.seed = Rng::derive(fine_seed, 1).next_u64();
            const DnnModel init = init_from_dbn(dbn, kStatesPerPhoneme, Rng::derive(fine_seed, 2).next_u64());
            const auto train = build_samples(c, s.train, inv);
            const auto cv = build_samples(c, s.cv, inv);
            const FinetuneResult r = finetune(init, train, cv, fine_cfg);
            for (const auto& e : r.history) {
                out << "epoch=" << e.epoch << " lr=" << format_real(e.learning_rate)
                    << " train_mse=" << format_real(e.train_mse) << " cv_mse=" << format_real(e.cv_mse)
                    << " lr_halved=" << (e.lr_halved ? 1 : 0) << '\n';
            }
            if (!fine_history.empty()) {
                write_history(fine_history, r);
            }
            ModelFile f{r.model, fine_seed, {}};
            f.metadata = {{"tool", "f0dbn finetune"},
                          {"layer_sizes", join(dbn.layer_sizes()) + "," + std::to_string(kStatesPerPhoneme)},
                          {"initial_learning_rate", format_real(fine_cfg.initial_learning_rate)},
                          {"epochs", std::to_string(fine_cfg.max_epochs)},
                          {"best_epoch", std::to_string(r.best_epoch)},
                          {"train_utterances", std::to_string(s.train.size())},
                          {"cv_utterances", std::to_string(s.cv.size())}};
            save_model(f, fine_out);
            out << "model=" << fine_out << " best_epoch=" << r.best_epoch
                << " best_cv_mse=" << format_real(r.history[r.best_epoch].cv_mse) << '\n';
        } else if (pred->parsed()) {
            const PhonemeInventory inv = pred_paths.load_inventory();
            const DnnModel model = load_dnn(pred_model);
            const UtteranceAnnotation ann = parse_annotation(read_text_file(pred_ann));
            ann.validate(inv);
            const StateDurations dur = parse_durations(read_text_file(pred_dur));
            const ContinuousContour contour = predict_contour(model, ann, dur, inv);
            write_file_atomic(pred_out, format_track(contour.values));
            out << "track=" << pred_out << " frames=" << contour.values.size() << '\n';
        } else if (ev->parsed()) {
            const bool file_mode = !ev_pred.empty() || !ev_ref.empty();
            EvalResult result;
            if (file_mode) {
                if (ev_pred.empty() || ev_ref.empty() || !ev_model.empty() || !ev_corpus.empty()) {
                    throw UsageError("file mode needs both --pred and --ref and no --model/--corpus");
                }
                const F0Track p = parse_track(read_text_file(ev_pred));
                const F0Track r = parse_track(read_text_file(ev_ref));
                const ContinuousContour pc = continuize(p);
                const ContinuousContour rc = continuize(r);
                if (pc.values.size() != rc.values.size()) {
                    throw std::runtime_error("eval: predicted track has " + std::to_string(pc.values.size())
                                             + " frames, reference has " + std::to_string(rc.values.size()));
                }
                FrameStats st;
                for (std::size_t i = 0; i < rc.values.size(); ++i) {
                    if (!ev_opts.voiced_only || r.values[i] > 0.0) {
                        st.add(pc.values[i], rc.values[i]);
                    }
                }
                result = st.result();
            } else {
                if (ev_model.empty() || ev_corpus.empty()) {
                    throw UsageError("eval needs --model and --corpus, or --pred and --ref");
                }
                ev_split.check();
                const PhonemeInventory inv = ev_paths.load_inventory();
                const DnnModel model = load_dnn(ev_model);
                const Corpus c = load_corpus(ev_corpus, inv);
                const DatasetSplit s = ev_split.apply(c, ev_seed);
                std::vector<std::string> all;
                result = evaluate_set(model, c, pick_set(s, ev_set, all), inv, ev_opts);
            }
            print_result(out, result);
            if (!ev_out.empty()) {
                write_file_atomic(ev_out, "rmse_hz\txcorr\tn_frames\n" + format_real(result.rmse) + '\t'
                                              + format_real(result.xcorr) + '\t' + std::to_string(result.n_frames)
                                              + '\n');
            }
        } else if (sw->parsed()) {
            check_usage([&] {
                sw_spec.pretrain.validate();
                sw_spec.finetune.validate();
                for (auto v : sw_spec.layer_counts) {
                    if (v == 0) {
                        throw std::invalid_argument("--layers needs positive counts");
                    }
                }
                for (auto v : sw_spec.unit_counts) {
                    if (v == 0) {
                        throw std::invalid_argument("--units needs positive counts");
                    }
                }
            });
            sw_split.check();
            const PhonemeInventory inv = sw_paths.load_inventory();
            const Corpus c = load_corpus(sw_corpus, inv);
            const DatasetSplit s = sw_split.apply(c, sw_spec.seed);
            const SweepTable t = run_sweep(c, s, sw_spec, inv);
            std::ostringstream table;
            write_sweep_table(table, t);
            write_file_atomic(sw_out, table.str());
            if (!sw_plot.empty()) {
                std::ostringstream plot;
                write_sweep_plot(plot, t);
                write_file_atomic(sw_plot, plot.str());
            }
            for (const auto& r : t.rows) {
                out << "layers=" << r.layers << " units=" << r.units << ' ';
                print_result(out, r.test);
            }
            const auto& b = t.rows[t.best];
            out << "best layers=" << b.layers << " units=" << b.units << " xcorr=" << format_real(b.test.xcorr)
                << " rmse_hz=" << format_real(b.test.rmse) << '\n';
        } else if (ins->parsed()) {
            const ModelFile f = load_model(ins_model);
            out << "kind=" << (f.kind() == ModelKind::Dbn ? "dbn" : "dnn") << '\n';
            out << "format_version=" << ModelFile::kFormatVersion << '\n';
            out << "seed=" << f.seed << '\n';
            if (const auto* dbn = std::get_if<DbnModel>(&f.model)) {
                out << "layer_sizes=" << join(dbn->layer_sizes()) << '\n';
            } else {
                const auto& dnn = std::get<DnnModel>(f.model);
                std::vector<std::size_t> sizes{dnn.input_dim()};
                for (const auto& l : dnn.hidden) {
                    sizes.push_back(l.fan_out());
                }
                sizes.push_back(dnn.output_dim());
                out << "layer_sizes=" << join(sizes) << '\n';
                if (dnn.normalization) {
                    out << "target_mean=" << format_real(dnn.normalization->mean) << '\n';
                    out << "target_std=" << format_real(dnn.normalization->stddev) << '\n';
                }
            }
            for (const auto& [k, v] : f.metadata) {
                out << "meta." << k << '=' << v << '\n';
            }
        }
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitOk;
}

} // namespace f0dbn::cli
