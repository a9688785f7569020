// aemu: train, constrain, evaluate and benchmark neural-network emulators of
// an aerosol-microphysics timestep against the built-in synthetic reference
// model.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "aemu/bench.hpp"
#include "aemu/classifier.hpp"
#include "aemu/dataset_io.hpp"
#include "aemu/errors.hpp"
#include "aemu/evaluation.hpp"
#include "aemu/model.hpp"
#include "aemu/refmodel.hpp"
#include "aemu/training.hpp"

namespace {

using aemu::ConfigError;
using aemu::DataError;
using aemu::NumericError;
using aemu::UsageError;

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw DataError("write failed for '" + path.string() + "'");
}

aemu::TrainConfig parse_train_config(const std::string& text, const std::string& context) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(context + ": " + e.what());
    }
    aemu::TrainConfig cfg;
    try {
        cfg.seed = j.value("seed", cfg.seed);
        cfg.epochs = j.value("epochs", cfg.epochs);
        cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
        cfg.weight_decay = j.value("weight_decay", cfg.weight_decay);
        cfg.decoupled_weight_decay =
            j.value("decoupled_weight_decay", cfg.decoupled_weight_decay);
        cfg.batch_size = j.value("batch_size", cfg.batch_size);
        cfg.lambda_mass = j.value("lambda_mass", cfg.lambda_mass);
        cfg.mu_pos = j.value("mu_pos", cfg.mu_pos);
        if (j.contains("alpha")) {
            auto a = j.at("alpha");
            if (!a.is_array() || a.size() != 4) throw ConfigError(context + ": alpha needs 4 entries");
            for (int i = 0; i < 4; ++i) cfg.alpha[i] = a[i].get<double>();
        }
        if (j.contains("beta")) {
            auto b = j.at("beta");
            if (!b.is_array() || b.size() != 6) throw ConfigError(context + ": beta needs 6 entries");
            for (int i = 0; i < 6; ++i) cfg.beta[i] = b[i].get<double>();
        }
        if (j.contains("transform"))
            cfg.transform = aemu::transform_from_name(j.at("transform").get<std::string>());
        if (j.contains("activation"))
            cfg.activation = aemu::activation_from_name(j.at("activation").get<std::string>());
        if (j.contains("arch")) cfg.arch = j.at("arch").get<std::vector<int>>();
        if (j.contains("constraint_mode"))
            cfg.constraint_mode =
                aemu::constraint_mode_from_name(j.at("constraint_mode").get<std::string>());
        cfg.constrain_during_training =
            j.value("constrain_during_training", cfg.constrain_during_training);
        cfg.val_fraction = j.value("val_fraction", cfg.val_fraction);
        cfg.log_eps = j.value("log_eps", cfg.log_eps);
        cfg.threads = j.value("threads", cfg.threads);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(context + ": " + e.what());
    }
    return cfg;
}

int run(int argc, char** argv) {
    CLI::App app{"aerosol microphysics emulator toolchain"};
    app.require_subcommand(1);

    // --- gen ---
    auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
    std::size_t gen_n = 0;
    std::uint64_t gen_seed = 0;
    std::string gen_out, gen_params_file;
    gen->add_option("--n", gen_n, "number of rows")->required();
    gen->add_option("--seed", gen_seed, "RNG seed")->default_val(0);
    gen->add_option("--out", gen_out, "output file (.csv for CSV, else binary)")->required();
    gen->add_option("--params", gen_params_file, "generator params JSON file");

    // --- train ---
    auto* train = app.add_subcommand("train", "train an emulator");
    std::string train_config_file, train_file, val_file, train_out, train_log;
    std::uint64_t train_seed = 0;
    int train_epochs = -1, train_threads = 0;
    std::string train_transform, train_constraint;
    double train_lambda = -1.0, train_mu = -1.0;
    bool train_linear = false;
    train->add_option("--config", train_config_file, "TrainConfig JSON file");
    train->add_option("--train", train_file, "training dataset")->required();
    train->add_option("--val", val_file, "explicit validation dataset");
    train->add_option("--out", train_out,
                      "checkpoint path (a directory is created for the log pipeline)")
        ->required();
    train->add_option("--log", train_log, "epoch log CSV path");
    auto* seed_opt = train->add_option("--seed", train_seed, "override config seed");
    train->add_option("--epochs", train_epochs, "override config epochs");
    train->add_option("--transform", train_transform, "override transform (standard|log)");
    train->add_option("--constraint", train_constraint, "override recorded constraint mode");
    train->add_option("--lambda", train_lambda, "override mass regularizer switch (0|1)");
    train->add_option("--mu", train_mu, "override positivity regularizer switch (0|1)");
    train->add_option("--threads", train_threads, "override worker count");
    train->add_flag("--linear", train_linear,
                    "fit the least-squares linear baseline instead of training");

    // --- eval ---
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    std::string eval_ckpt, eval_data, eval_constraint, eval_out, eval_vars_out, eval_csv_out;
    int eval_threads = 1;
    eval->add_option("--ckpt", eval_ckpt, "checkpoint file or bundle directory")->required();
    eval->add_option("--data", eval_data, "evaluation dataset")->required();
    eval->add_option("--constraint", eval_constraint,
                     "override constraint mode (none|correct|complete|correct_then_complete)");
    eval->add_option("--out", eval_out, "metrics JSON path (stdout otherwise)");
    eval->add_option("--vars-out", eval_vars_out, "per-variable CSV path");
    eval->add_option("--csv-out", eval_csv_out, "flat CSV row path");
    eval->add_option("--threads", eval_threads, "worker count")->default_val(1);

    // --- predict ---
    auto* predict = app.add_subcommand("predict", "write truth/prediction pairs");
    std::string pred_ckpt, pred_in, pred_out, pred_constraint;
    int pred_threads = 1;
    predict->add_option("--ckpt", pred_ckpt, "checkpoint file or bundle directory")->required();
    predict->add_option("--in", pred_in, "input dataset")->required();
    predict->add_option("--out", pred_out, "output CSV")->required();
    predict->add_option("--constraint", pred_constraint, "override constraint mode");
    predict->add_option("--threads", pred_threads, "worker count")->default_val(1);

    // --- bench ---
    auto* bench = app.add_subcommand("bench", "runtime comparison against the reference model");
    aemu::BenchConfig bench_cfg;
    std::string bench_ckpt, bench_out;
    bench->add_option("--ckpt", bench_ckpt, "checkpoint file (default-architecture net otherwise)");
    bench->add_option("--n", bench_cfg.n, "rows per timed pass")->default_val(571392);
    bench->add_option("--threads", bench_cfg.threads, "emulator worker count")->default_val(1);
    bench->add_flag("--float32", bench_cfg.float32, "run the emulator path in 32-bit floats");
    bench->add_option("--seed", bench_cfg.seed, "sampling seed")->default_val(0);
    bench->add_option("--repeats", bench_cfg.repeats, "timed repetitions (median reported)")
        ->default_val(5);
    bench->add_option("--out", bench_out, "report JSON path (stdout otherwise)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    if (gen->parsed()) {
        aemu::GeneratorParams params;
        if (!gen_params_file.empty())
            params = aemu::GeneratorParams::from_json(read_file(gen_params_file));
        const aemu::Dataset ds = aemu::generate_dataset(gen_n, gen_seed, params);
        aemu::save_dataset(ds, gen_out);
        std::cerr << "wrote " << ds.rows() << " rows to " << gen_out << "\n";
        return 0;
    }

    if (train->parsed()) {
        aemu::TrainConfig cfg;
        if (!train_config_file.empty())
            cfg = parse_train_config(read_file(train_config_file), train_config_file);
        if (seed_opt->count()) cfg.seed = train_seed;
        if (train_epochs >= 0) cfg.epochs = train_epochs;
        if (!train_transform.empty()) cfg.transform = aemu::transform_from_name(train_transform);
        if (!train_constraint.empty())
            cfg.constraint_mode = aemu::constraint_mode_from_name(train_constraint);
        if (train_lambda >= 0.0) cfg.lambda_mass = train_lambda;
        if (train_mu >= 0.0) cfg.mu_pos = train_mu;
        if (train_threads > 0) cfg.threads = train_threads;

        const aemu::Dataset train_set = aemu::load_dataset(train_file);
        std::optional<aemu::Dataset> val_set;
        if (!val_file.empty()) val_set = aemu::load_dataset(val_file);

        if (train_linear) {
            const aemu::NormStats stats = aemu::fit_stats(train_set);
            aemu::Checkpoint ckpt = aemu::fit_linear_baseline(train_set, stats);
            aemu::save_checkpoint(ckpt, train_out);
            std::cerr << "wrote linear baseline checkpoint to " << train_out << "\n";
            return 0;
        }

        if (cfg.transform == aemu::Transform::Log) {
            // log pipeline: magnitude regressor + sign classifier as a bundle
            const std::filesystem::path dir = train_out;
            aemu::TrainResult mag =
                aemu::train(cfg, train_set, val_set ? &*val_set : nullptr);
            aemu::TrainConfig ccfg = cfg;
            ccfg.seed = cfg.seed + 1; // classifier gets its own stream
            aemu::ClassifierTrainResult cls =
                aemu::train_classifier(ccfg, train_set, val_set ? &*val_set : nullptr);
            aemu::LogPipelineBundle bundle{std::move(mag.checkpoint),
                                           std::move(cls.checkpoint)};
            aemu::save_bundle(bundle, dir);
            write_file(dir / "magnitude.epochs.csv", aemu::epoch_log_csv(mag.log));
            write_file(dir / "classifier.epochs.csv",
                       aemu::classifier_epoch_log_csv(cls.log));
            std::cerr << "wrote log-pipeline bundle to " << dir.string() << "\n";
            return 0;
        }

        aemu::TrainResult res = aemu::train(cfg, train_set, val_set ? &*val_set : nullptr);
        aemu::save_checkpoint(res.checkpoint, train_out);
        const std::string log_path = train_log.empty() ? train_out + ".epochs.csv" : train_log;
        write_file(log_path, aemu::epoch_log_csv(res.log));
        std::cerr << "wrote checkpoint to " << train_out << " (epoch log: " << log_path << ")\n";
        return 0;
    }

    if (eval->parsed()) {
        std::optional<aemu::ConstraintMode> override_mode;
        if (!eval_constraint.empty())
            override_mode = aemu::constraint_mode_from_name(eval_constraint);
        const aemu::Dataset data = aemu::load_dataset(eval_data);
        aemu::MetricsReport rep;
        if (aemu::is_bundle_dir(eval_ckpt)) {
            rep = aemu::evaluate_bundle(aemu::load_bundle(eval_ckpt), data, override_mode,
                                        eval_threads);
        } else {
            rep = aemu::evaluate(aemu::load_checkpoint(eval_ckpt), data, override_mode,
                                 eval_threads);
        }
        const std::string json_text = rep.to_json();
        if (eval_out.empty())
            std::cout << json_text;
        else
            write_file(eval_out, json_text);
        if (!eval_vars_out.empty()) write_file(eval_vars_out, rep.per_variable_csv());
        if (!eval_csv_out.empty()) write_file(eval_csv_out, rep.to_csv_row());
        return 0;
    }

    if (predict->parsed()) {
        const aemu::Dataset data = aemu::load_dataset(pred_in);
        std::optional<aemu::ConstraintMode> override_mode;
        if (!pred_constraint.empty())
            override_mode = aemu::constraint_mode_from_name(pred_constraint);

        aemu::Mat pred_orig;
        if (aemu::is_bundle_dir(pred_ckpt)) {
            const aemu::LogPipelineBundle bundle = aemu::load_bundle(pred_ckpt);
            aemu::ConstraintConfig cc = bundle.magnitude.constraint;
            if (override_mode) cc.mode = *override_mode;
            pred_orig = aemu::predict_tendencies(bundle, data.inputs, pred_threads);
            aemu::apply_constraints_original(pred_orig, data.inputs, cc);
        } else {
            const aemu::Checkpoint ckpt = aemu::load_checkpoint(pred_ckpt);
            if (ckpt.params.transform != aemu::Transform::Standard)
                throw DataError("predict: a lone log-magnitude checkpoint cannot decode "
                                "tendencies; use its bundle directory");
            aemu::ConstraintConfig cc = ckpt.constraint;
            if (override_mode) cc.mode = *override_mode;
            aemu::Mat x_std, pred_std;
            aemu::standardize_inputs(data.inputs, ckpt.stats, x_std);
            aemu::forward_inference(ckpt.params, x_std, pred_std, pred_threads);
            aemu::back_transform_outputs(pred_std, ckpt.stats, pred_orig);
            aemu::apply_constraints_original(pred_orig, data.inputs, cc);
        }

        std::string text;
        const auto& schema = aemu::variable_schema();
        for (int k = 0; k < aemu::kNumOutputs; ++k) {
            if (k) text += ',';
            text += "true_";
            text += schema.output_names[k];
        }
        for (int k = 0; k < aemu::kNumOutputs; ++k) {
            text += ",pred_";
            text += schema.output_names[k];
        }
        text += '\n';
        char buf[32];
        for (std::size_t i = 0; i < data.rows(); ++i) {
            const double* t = data.targets.row(i);
            const double* p = pred_orig.row(i);
            for (int k = 0; k < aemu::kNumOutputs; ++k) {
                if (k) text += ',';
                std::snprintf(buf, sizeof(buf), "%.17g", t[k]);
                text += buf;
            }
            for (int k = 0; k < aemu::kNumOutputs; ++k) {
                std::snprintf(buf, sizeof(buf), ",%.17g", p[k]);
                text += buf;
            }
            text += '\n';
        }
        write_file(pred_out, text);
        std::cerr << "wrote " << data.rows() << " prediction rows to " << pred_out << "\n";
        return 0;
    }

    if (bench->parsed()) {
        if (!bench_ckpt.empty())
            bench_cfg.checkpoint = aemu::load_checkpoint(bench_ckpt);
        const auto reports = aemu::run_benchmark(bench_cfg);
        const std::string text = aemu::bench_reports_json(reports);
        if (bench_out.empty())
            std::cout << text;
        else
            write_file(bench_out, text);
        return 0;
    }

    return 1;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const NumericError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
