// icfnade: command-line driver for the implicit-feedback NADE recommender,
// the weighted-ALS baseline and MPR evaluation.

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "CLI11.hpp"
#include "icf/data.hpp"
#include "icf/errors.hpp"
#include "icf/eval.hpp"
#include "icf/imf.hpp"
#include "icf/nade.hpp"
#include "icf/synth.hpp"

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kIo = 3 };

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw icf::IoError("cannot open '" + path + "' for reading");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw icf::IoError("cannot open '" + path + "' for writing");
    out << bytes;
    if (!out.flush()) throw icf::IoError("write to '" + path + "' failed");
}

icf::RatingTable load_ratings(const std::string& path) {
    std::istringstream in(read_file(path));
    return icf::read_ratings(in);
}

using AnyModel = std::variant<icf::NadeModel, icf::ImfModel>;

AnyModel load_any_model(const std::string& path) {
    const std::string bytes = read_file(path);
    if (bytes.starts_with("IMFCF001")) return icf::load_imf(bytes);
    return icf::load_model(bytes);
}

// Builds a scorer for `model` against the id universe of `train`.
icf::Scorer make_scorer(const AnyModel& model, const icf::RatingTable& train) {
    if (const auto* nade = std::get_if<icf::NadeModel>(&model)) {
        if (nade->items() != train.item_count()) {
            throw icf::ValidationError("model has " + std::to_string(nade->items()) + " items, data has " +
                                       std::to_string(train.item_count()));
        }
        return [nade](std::size_t, const icf::UserFeedback& fb) { return icf::predict_all(*nade, fb); };
    }
    const auto& imf = std::get<icf::ImfModel>(model);
    if (imf.items() != train.item_count() || imf.users() != train.user_count()) {
        throw icf::ValidationError("IMF model dimensions do not match the data");
    }
    return [&imf](std::size_t user, const icf::UserFeedback&) { return icf::imf_predict(imf, user); };
}

struct NadeFlags {
    icf::TrainConfig config;
    std::size_t hidden = 256;
    std::string activation = "tanh";
};

struct ImfFlags {
    std::size_t factors = 256;
    double lambda = 0.1;
    std::size_t iterations = 15;
};

void add_nade_flags(CLI::App* cmd, NadeFlags& f) {
    cmd->add_option("--lr", f.config.learning_rate, "SGD learning rate")->capture_default_str()->check(CLI::NonNegativeNumber);
    cmd->add_option("--batch", f.config.batch_size, "users per minibatch")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--decay", f.config.weight_decay, "L2 weight decay on W, A, V")->capture_default_str()->check(CLI::NonNegativeNumber);
    cmd->add_option("--hidden", f.hidden, "hidden units H")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--epochs", f.config.epochs, "training epochs")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--init-scale", f.config.init_scale, "uniform init half-width")->capture_default_str()->check(CLI::NonNegativeNumber);
    cmd->add_option("--activation", f.activation, "hidden activation")->capture_default_str()->check(CLI::IsMember({"tanh", "identity"}));
}

void add_imf_flags(CLI::App* cmd, ImfFlags& f) {
    cmd->add_option("--factors", f.factors, "IMF latent factors F")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--lambda", f.lambda, "IMF L2 regularization")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--iterations", f.iterations, "IMF alternations")->capture_default_str()->check(CLI::PositiveNumber);
}

const CLI::Validator kOpenUnit =
    CLI::Validator([](std::string& s) -> std::string {
        double v = 0.0;
        if (!CLI::detail::lexical_cast(s, v) || !(v > 0.0 && v < 1.0)) return "value must lie strictly between 0 and 1";
        return {};
    }, "(0,1)");

struct TrainedModel {
    AnyModel model;
    std::string trace_csv;
};

TrainedModel train_nade(const icf::RatingTable& train, double alpha, const NadeFlags& f, std::uint64_t seed) {
    icf::TrainConfig config = f.config;
    config.seed = seed;
    std::clog << "train nade: lr=" << config.learning_rate << " batch=" << config.batch_size
              << " decay=" << config.weight_decay << " H=" << f.hidden << " epochs=" << config.epochs
              << " alpha=" << alpha << " seed=" << seed << '\n';
    const auto data = icf::build_all_feedback(train, alpha);
    auto init = icf::init_model(train.item_count(), f.hidden, icf::parse_activation(f.activation), seed, config.init_scale);
    auto result = icf::train(std::move(init), data, config);
    std::ostringstream trace;
    trace << "epoch,loss\n";
    for (std::size_t e = 0; e < result.loss_trace.size(); ++e) trace << e + 1 << ',' << icf::format_real(result.loss_trace[e]) << '\n';
    return {std::move(result.model), trace.str()};
}

TrainedModel train_imf(const icf::RatingTable& train, double alpha, const ImfFlags& f, std::uint64_t seed,
                       std::size_t threads) {
    icf::ImfConfig config{alpha, f.factors, f.lambda, f.iterations, seed, threads};
    std::clog << "train imf: F=" << f.factors << " lambda=" << f.lambda << " iterations=" << f.iterations
              << " alpha=" << alpha << " seed=" << seed << '\n';
    auto result = icf::imf_train(train, config);
    std::ostringstream trace;
    trace << "half_sweep,objective\n";
    for (std::size_t k = 0; k < result.objective_trace.size(); ++k) trace << k << ',' << icf::format_real(result.objective_trace[k]) << '\n';
    return {std::move(result.model), trace.str()};
}

std::string serialize(const AnyModel& model) {
    if (const auto* nade = std::get_if<icf::NadeModel>(&model)) return icf::save_model(*nade);
    return icf::save_imf(std::get<icf::ImfModel>(model));
}

icf::SplitPair load_split(const std::string& train_path, const std::string& test_path) {
    icf::SplitPair split;
    split.train = load_ratings(train_path);
    split.test = load_ratings(test_path);
    return split;
}

int run(int argc, char** argv) {
    CLI::App app{"Implicit-feedback autoregressive recommender toolkit"};
    app.require_subcommand(1);
    app.set_config("--config", "", "key=value configuration file (flags override it)");

    std::uint64_t seed = 0;
    std::size_t threads = 1;
    double alpha = 100.0;

    // ingest
    std::string in_path, out_path, format = "events";
    auto* ingest = app.add_subcommand("ingest", "aggregate an event log into a count table");
    ingest->add_option("--input", in_path, "event log")->required();
    ingest->add_option("--format", format, "events (user,item) or aggregated (user,item,count)")
        ->capture_default_str()->check(CLI::IsMember({"events", "aggregated"}));
    ingest->add_option("--output", out_path, "count table")->required();

    // ratings
    auto* ratings = app.add_subcommand("ratings", "convert a count table to relative ratings");
    ratings->add_option("--input", in_path, "count table (user,item,count)")->required();
    ratings->add_option("--output", out_path, "relative rating table")->required();

    // split
    double fraction = 0.1;
    std::string train_path, test_path, meta_path;
    auto* split_cmd = app.add_subcommand("split", "per-user random hold-out split");
    split_cmd->add_option("--input", in_path, "relative rating table")->required();
    split_cmd->add_option("--fraction", fraction, "held-out fraction per user")->capture_default_str()->check(kOpenUnit);
    split_cmd->add_option("--seed", seed, "random seed")->capture_default_str();
    split_cmd->add_option("--train-out", train_path, "training table")->required();
    split_cmd->add_option("--test-out", test_path, "held-out table")->required();
    split_cmd->add_option("--meta-out", meta_path, "metadata sidecar (default <test-out>.meta.json)");

    // train
    std::string model_kind = "nade", model_path, trace_path;
    NadeFlags nade_flags;
    ImfFlags imf_flags;
    auto* train_cmd = app.add_subcommand("train", "train a NADE or IMF model");
    train_cmd->add_option("--model", model_kind, "nade or imf")->capture_default_str()->check(CLI::IsMember({"nade", "imf"}));
    train_cmd->add_option("--train", train_path, "training table")->required();
    train_cmd->add_option("--out", model_path, "model file")->required();
    train_cmd->add_option("--trace", trace_path, "loss trace CSV (default <out>.trace.csv)");
    train_cmd->add_option("--alpha", alpha, "confidence rate")->capture_default_str()->check(CLI::NonNegativeNumber);
    train_cmd->add_option("--seed", seed, "random seed")->capture_default_str();
    train_cmd->add_option("--threads", threads, "worker threads for IMF sweeps")->capture_default_str()->check(CLI::PositiveNumber);
    add_nade_flags(train_cmd, nade_flags);
    add_imf_flags(train_cmd, imf_flags);

    // evaluate
    std::string report_path, summary_path;
    bool include_train = false;
    auto* eval_cmd = app.add_subcommand("evaluate", "mean percentage ranking on a held-out split");
    eval_cmd->add_option("--model", model_path, "model file")->required();
    eval_cmd->add_option("--train", train_path, "training table")->required();
    eval_cmd->add_option("--test", test_path, "held-out table")->required();
    eval_cmd->add_option("--alpha", alpha, "confidence rate for the input feedback")->capture_default_str()->check(CLI::NonNegativeNumber);
    eval_cmd->add_option("--report", report_path, "per-pair report")->required();
    eval_cmd->add_option("--summary", summary_path, "JSON summary (default <report>.json)");
    eval_cmd->add_flag("--include-train-items", include_train, "rank against training items too");
    eval_cmd->add_option("--threads", threads, "worker threads")->capture_default_str()->check(CLI::PositiveNumber);

    // sweep
    std::vector<double> alphas;
    std::string sweep_models = "both", csv_path;
    auto* sweep_cmd = app.add_subcommand("sweep", "retrain and evaluate for each alpha");
    sweep_cmd->add_option("--train", train_path, "training table")->required();
    sweep_cmd->add_option("--test", test_path, "held-out table")->required();
    sweep_cmd->add_option("--alphas", alphas, "comma-separated alpha values")->required()->delimiter(',')
        ->check(CLI::NonNegativeNumber);
    sweep_cmd->add_option("--model", sweep_models, "nade, imf or both")->capture_default_str()
        ->check(CLI::IsMember({"nade", "imf", "both"}));
    sweep_cmd->add_option("--out", csv_path, "CSV with columns model,alpha,mpr")->required();
    sweep_cmd->add_option("--seed", seed, "random seed")->capture_default_str();
    sweep_cmd->add_option("--threads", threads, "worker threads")->capture_default_str()->check(CLI::PositiveNumber);
    add_nade_flags(sweep_cmd, nade_flags);
    add_imf_flags(sweep_cmd, imf_flags);

    // predict
    std::string user_id;
    std::size_t top_k = 10;
    auto* predict_cmd = app.add_subcommand("predict", "top-K recommendations for one user");
    predict_cmd->add_option("--model", model_path, "model file")->required();
    predict_cmd->add_option("--train", train_path, "training table")->required();
    predict_cmd->add_option("--user", user_id, "user id")->required();
    predict_cmd->add_option("-k,--top", top_k, "list length")->capture_default_str()->check(CLI::PositiveNumber);
    predict_cmd->add_option("--alpha", alpha, "confidence rate for the input feedback")->capture_default_str()->check(CLI::NonNegativeNumber);

    // synth
    icf::SynthConfig synth_config;
    auto* synth_cmd = app.add_subcommand("synth", "generate a planted latent-factor watch log");
    synth_cmd->add_option("--users", synth_config.users, "users U")->capture_default_str();
    synth_cmd->add_option("--items", synth_config.items, "items M")->capture_default_str();
    synth_cmd->add_option("--factors", synth_config.factors, "latent dimensions")->capture_default_str()->check(CLI::PositiveNumber);
    synth_cmd->add_option("--density", synth_config.density, "expected watched fraction per user")->capture_default_str()
        ->check(CLI::Range(0.0, 1.0));
    synth_cmd->add_option("--seed", seed, "random seed")->capture_default_str();
    synth_cmd->add_option("--out", out_path, "pre-aggregated event log")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    if (*ingest) {
        std::istringstream in(read_file(in_path));
        const auto table = icf::ingest(in, format == "events" ? icf::EventFormat::EventPerLine : icf::EventFormat::PreAggregated);
        std::ostringstream out;
        icf::write_counts(out, table);
        write_file(out_path, out.str());
        std::clog << "ingest: " << table.user_count() << " users, " << table.item_count() << " items, "
                  << table.nnz() << " entries\n";
    } else if (*ratings) {
        std::istringstream in(read_file(in_path));
        const auto table = icf::relative_ratings(icf::ingest(in, icf::EventFormat::PreAggregated));
        std::ostringstream out;
        icf::write_ratings(out, table);
        write_file(out_path, out.str());
    } else if (*split_cmd) {
        const auto split = icf::holdout_split(load_ratings(in_path), fraction, seed);
        std::ostringstream train_out, test_out;
        icf::write_ratings(train_out, split.train);
        icf::write_ratings(test_out, split.test);
        write_file(train_path, train_out.str());
        write_file(test_path, test_out.str());
        write_file(meta_path.empty() ? test_path + ".meta.json" : meta_path, icf::split_metadata_json(split));
        std::clog << "split: " << split.train.nnz() << " train, " << split.test.nnz() << " test entries\n";
    } else if (*train_cmd) {
        const auto train = load_ratings(train_path);
        auto trained = model_kind == "nade" ? train_nade(train, alpha, nade_flags, seed)
                                            : train_imf(train, alpha, imf_flags, seed, threads);
        write_file(model_path, serialize(trained.model));
        write_file(trace_path.empty() ? model_path + ".trace.csv" : trace_path, trained.trace_csv);
    } else if (*eval_cmd) {
        const auto model = load_any_model(model_path);
        const auto split = load_split(train_path, test_path);
        const auto result = icf::mpr(make_scorer(model, split.train), split, alpha, {include_train, threads});
        std::ostringstream report;
        icf::write_report(report, result, split.train);
        write_file(report_path, report.str());
        write_file(summary_path.empty() ? report_path + ".json" : summary_path, icf::summary_json(result));
        if (result.n_skipped > 0) std::clog << "evaluate: skipped " << result.n_skipped << " users\n";
        std::cout << "MPR," << icf::format_real(result.mpr) << '\n';
    } else if (*sweep_cmd) {
        if (alphas.empty()) throw UsageError("--alphas needs at least one value");
        const auto split = load_split(train_path, test_path);
        std::ostringstream csv;
        csv << "model,alpha,mpr\n";
        for (const std::string kind : {"nade", "imf"}) {
            if (sweep_models != "both" && sweep_models != kind) continue;
            for (double a : alphas) {
                const auto trained = kind == "nade" ? train_nade(split.train, a, nade_flags, seed)
                                                    : train_imf(split.train, a, imf_flags, seed, threads);
                const auto result = icf::mpr(make_scorer(trained.model, split.train), split, a, {false, threads});
                csv << kind << ',' << icf::format_real(a) << ',' << icf::format_real(result.mpr) << '\n';
                std::clog << "sweep: " << kind << " alpha=" << a << " MPR=" << result.mpr << '\n';
            }
        }
        write_file(csv_path, csv.str());
    } else if (*predict_cmd) {
        const auto model = load_any_model(model_path);
        const auto train = load_ratings(train_path);
        const auto user = train.users.find(user_id);
        if (!user) throw icf::ValidationError("unknown user id '" + user_id + "'");
        const auto feedback = icf::build_feedback(train.rows[*user], alpha, train.item_count());
        const Eigen::VectorXd scores = make_scorer(model, train)(*user, feedback);

        std::vector<std::size_t> candidates;
        for (std::size_t i = 0; i < train.item_count(); ++i) {
            if (!std::binary_search(feedback.observed.begin(), feedback.observed.end(), i)) candidates.push_back(i);
        }
        std::sort(candidates.begin(), candidates.end(), [&](std::size_t a, std::size_t b) {
            const double sa = scores[static_cast<Eigen::Index>(a)];
            const double sb = scores[static_cast<Eigen::Index>(b)];
            if (sa != sb) return sa > sb;
            return train.items.id(a) < train.items.id(b);
        });
        if (candidates.size() > top_k) candidates.resize(top_k);
        for (std::size_t i : candidates) std::cout << train.items.id(i) << ',' << icf::format_real(scores[static_cast<Eigen::Index>(i)]) << '\n';
    } else if (*synth_cmd) {
        synth_config.seed = seed;
        const auto data = icf::synthesize(synth_config);
        std::ostringstream out;
        icf::write_event_log(out, data.counts);
        write_file(out_path, out.str());
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kUsage;
    } catch (const icf::IoError& e) {
        std::cerr << "I/O error: " << e.what() << '\n';
        return kIo;
    } catch (const icf::ParseError& e) {
        std::cerr << "parse error: " << e.what() << '\n';
        return kData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kData;
    }
}
