// mcnet command-line front end: generate, train, calibrate, evaluate, compare.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mcnet/calibrator.hpp"
#include "mcnet/error.hpp"
#include "mcnet/experiment.hpp"
#include "mcnet/format.hpp"
#include "mcnet/metrics.hpp"
#include "mcnet/synthetic.hpp"

using namespace mcnet;

namespace {

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    out << text;
    if (!out) throw Error("write failed for " + path);
}

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> parts;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, sep)) parts.push_back(item);
    return parts;
}

// Each TrainConfig field as an optional flag; unset flags keep the profile's value.
struct TrainFlags {
    std::string profile = "default";
    std::optional<int> bins, steps, batch_size, epochs, embedding_dim;
    std::optional<double> learning_rate, beta, alpha, clamp, logit_margin;
    std::optional<std::vector<int>> hidden, aux_hidden;
    std::optional<std::string> context, space, origin, diff_norm;
    std::optional<bool> aux;

    void add(CLI::App* app) {
        app->add_option("--profile", profile, "starting hyperparameters: default or desk")
            ->check(CLI::IsMember({"default", "desk"}));
        app->add_option("--bins", bins, "number of equal-frequency bins K");
        app->add_option("--steps", steps, "quadrature nodes T");
        app->add_option("--learning_rate", learning_rate, "Adam step size");
        app->add_option("--batch_size", batch_size);
        app->add_option("--epochs", epochs);
        app->add_option("--beta", beta, "order-preserving weight");
        app->add_option("--alpha", alpha, "field-balance weight");
        app->add_option("--embedding_dim", embedding_dim);
        app->add_option("--hidden", hidden, "hidden widths, e.g. 16,16")->delimiter(',');
        app->add_option("--context", context, "none or field");
        app->add_option("--space", space, "probability or logit");
        app->add_option("--origin", origin, "zero or bin_left");
        app->add_option("--aux", aux, "enable the auxiliary feature network");
        app->add_option("--aux_hidden", aux_hidden)->delimiter(',');
        app->add_option("--clamp", clamp, "probability clamp epsilon");
        app->add_option("--diff_norm", diff_norm, "total or per_field");
        app->add_option("--logit_margin", logit_margin);
    }

    TrainConfig build(std::uint64_t seed) const {
        TrainConfig c = profile == "desk" ? TrainConfig::desk_profile() : TrainConfig{};
        if (bins) c.bins = *bins;
        if (steps) c.steps = *steps;
        if (learning_rate) c.learning_rate = *learning_rate;
        if (batch_size) c.batch_size = *batch_size;
        if (epochs) c.epochs = *epochs;
        if (beta) c.beta = *beta;
        if (alpha) c.alpha = *alpha;
        if (embedding_dim) c.embedding_dim = *embedding_dim;
        if (hidden) c.hidden = *hidden;
        if (context) c.context = context_mode_from_string(*context);
        if (space) c.space = score_space_from_string(*space);
        if (origin) c.origin = integral_origin_from_string(*origin);
        if (aux) c.aux = *aux;
        if (aux_hidden) c.aux_hidden = *aux_hidden;
        if (clamp) c.clamp = *clamp;
        if (diff_norm) {
            if (*diff_norm == "total") {
                c.diff_norm = DiffNormalization::total;
            } else if (*diff_norm == "per_field") {
                c.diff_norm = DiffNormalization::per_field;
            } else {
                throw Error("diff_norm must be total or per_field, got '" + *diff_norm + "'");
            }
        }
        if (logit_margin) c.logit_margin = *logit_margin;
        c.seed = seed;
        c.validate();
        return c;
    }
};

struct SyntheticFlags {
    long long n = 10000;
    int fields = 1;
    std::string distortions = "identity";
    std::string truth = "uniform";
    int feature_dim = 0;

    void add(CLI::App* app) {
        app->add_option("--n", n, "sample count")->capture_default_str();
        app->add_option("--fields", fields, "field count")->capture_default_str();
        app->add_option("--distortions", distortions, "one per field or shared, e.g. power:2,identity")
            ->capture_default_str();
        app->add_option("--truth", truth, "uniform or beta:a:b")->capture_default_str();
        app->add_option("--feature_dim", feature_dim)->capture_default_str();
    }

    SyntheticSpec build(std::uint64_t seed) const {
        SyntheticSpec spec;
        spec.n = n;
        spec.fields = fields;
        spec.distortions.clear();
        for (const auto& d : split(distortions, ',')) spec.distortions.push_back(Distortion::parse(d));
        spec.truth = TruthDistribution::parse(truth);
        spec.feature_dim = feature_dim;
        spec.seed = seed;
        spec.validate();
        return spec;
    }
};

void add_seed(CLI::App* app, std::uint64_t& seed) {
    app->add_option("--seed", seed, "random seed (default from MCNET_SEED, else 0)")->envname("MCNET_SEED");
}

void print_warnings(const std::vector<std::string>& warnings) {
    for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Monotonic calibration networks and classical post-hoc calibrators"};
    app.require_subcommand(1);
    // Keys live under a table named after the subcommand, e.g. [train] bins = 10.
    app.set_config("--config", "", "TOML file with a [<subcommand>] table; command-line flags win");
    app.allow_config_extras(false);

    // generate
    auto* gen = app.add_subcommand("generate", "write a synthetic dataset with a known calibration curve");
    SyntheticFlags gen_flags;
    std::uint64_t gen_seed = 0;
    std::string gen_out, gen_test_out;
    gen_flags.add(gen);
    add_seed(gen, gen_seed);
    gen->add_option("--out", gen_out, "dataset path")->required();
    gen->add_option("--test_out", gen_test_out, "also write the test split (seed + offset)");
    gen->fallthrough();

    // train
    auto* tr = app.add_subcommand("train", "fit one calibrator on a validation set");
    TrainFlags tr_flags;
    std::uint64_t tr_seed = 0;
    std::string tr_data, tr_method = "mcnet-none", tr_out, tr_history;
    tr_flags.add(tr);
    add_seed(tr, tr_seed);
    tr->add_option("--validation", tr_data, "validation dataset")->required();
    tr->add_option("--method", tr_method, "calibrator name")->capture_default_str();
    tr->add_option("--out", tr_out, "model file")->required();
    tr->add_option("--history", tr_history, "per-epoch loss CSV (MCNet only)");
    tr->fallthrough();

    // calibrate
    auto* cal = app.add_subcommand("calibrate", "apply a saved model to a dataset");
    std::string cal_model, cal_data, cal_out;
    cal->add_option("--model", cal_model)->required();
    cal->add_option("--data", cal_data)->required();
    cal->add_option("--out", cal_out, "CSV of calibrated,score,label,field")->required();
    cal->fallthrough();

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "metrics report for raw or calibrated scores");
    std::string ev_model, ev_data, ev_out, ev_reliability;
    double ev_eps = 0.01;
    int ev_bins = 10;
    ev->add_option("--data", ev_data)->required();
    ev->add_option("--model", ev_model, "score through this model first");
    ev->add_option("--out", ev_out, "also write the report here");
    ev->add_option("--frce_eps", ev_eps)->capture_default_str();
    ev->add_option("--ece_bins", ev_bins)->capture_default_str();
    ev->add_option("--reliability", ev_reliability, "reliability table CSV");
    ev->fallthrough();

    // compare
    auto* cmp = app.add_subcommand("compare", "fit several calibrators and tabulate test metrics");
    TrainFlags cmp_train;
    SyntheticFlags cmp_syn;
    std::uint64_t cmp_seed = 0;
    std::string cmp_validation, cmp_test, cmp_out;
    std::vector<std::string> cmp_methods = {"histogram", "isotonic", "platt", "sir", "mcnet-none"};
    cmp_train.add(cmp);
    cmp_syn.add(cmp);
    add_seed(cmp, cmp_seed);
    cmp->add_option("--methods", cmp_methods, "calibrator names")->delimiter(',')->capture_default_str();
    cmp->add_option("--validation", cmp_validation, "validation dataset (otherwise synthetic)");
    cmp->add_option("--test", cmp_test, "test dataset");
    cmp->add_option("--out_dir", cmp_out, "artifact directory");
    cmp->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ConfigError& e) {
        // CLI11 reports unknown keys as "INI was not able to parse <key>"
        std::string msg = e.what();
        const std::string prefix = "INI was not able to parse ";
        if (msg.starts_with(prefix)) msg = "unknown config key '" + msg.substr(prefix.size()) + "'";
        std::cerr << "mcnet: error: " << msg << '\n';
        return 2;
    } catch (const CLI::ParseError& e) {
        std::cerr << "mcnet: error: " << e.what() << '\n';
        return e.get_exit_code() != 0 ? e.get_exit_code() : 2;
    }

    try {
        if (*gen) {
            auto spec = gen_flags.build(gen_seed);
            save_dataset(generate(spec).data, gen_out);
            if (!gen_test_out.empty()) {
                spec.seed += kTestSplitSeedOffset;
                save_dataset(generate(spec).data, gen_test_out);
            }
        } else if (*tr) {
            const auto config = tr_flags.build(tr_seed);
            const auto fit = fit_calibrator(tr_method, load_dataset(tr_data), config);
            print_warnings(fit.warnings);
            save_calibrator(fit.calibrator, tr_out);
            if (!tr_history.empty()) write_file(tr_history, history_csv(fit.history));
        } else if (*cal) {
            const auto model = load_calibrator(cal_model);
            const auto data = load_dataset(cal_data);
            const auto out = calibrate(model, data);
            std::ostringstream csv;
            csv << "calibrated,score,label,field\n";
            for (std::size_t i = 0; i < data.size(); ++i) {
                const auto& s = data.samples[i];
                csv << format_double(out.probs[i]) << ',' << format_double(s.score) << ',' << s.label << ','
                    << s.field << '\n';
            }
            write_file(cal_out, csv.str());
            if (out.out_of_domain > 0) {
                std::cerr << "warning: " << out.out_of_domain << " scores outside the model's domain were clamped\n";
            }
            if (out.clamped > 0) std::cerr << "warning: " << out.clamped << " outputs hit the probability clamp\n";
        } else if (*ev) {
            const auto data = load_dataset(ev_data);
            std::vector<double> preds = data.scores();
            if (!ev_model.empty()) preds = calibrate(load_calibrator(ev_model), data).probs;
            const auto labels = data.labels();
            const auto report = to_key_value(evaluate(preds, labels, data.fields(), ev_eps, ev_bins));
            std::cout << report;
            if (!ev_out.empty()) write_file(ev_out, report);
            if (!ev_reliability.empty()) write_file(ev_reliability, reliability_table(preds, labels, ev_bins));
        } else if (*cmp) {
            ExperimentConfig config;
            if (!cmp_validation.empty() || !cmp_test.empty()) {
                if (cmp_validation.empty() || cmp_test.empty()) throw Error("compare: give both --validation and --test");
                config.validation = cmp_validation;
                config.test = cmp_test;
            } else {
                config.synthetic = cmp_syn.build(cmp_seed);
            }
            config.methods = cmp_methods;
            config.train = cmp_train.build(cmp_seed);
            config.out_dir = cmp_out;
            const auto result = run_experiment(config);
            for (const auto& m : result.methods) {
                std::vector<std::string> tagged;
                for (const auto& w : m.warnings) tagged.push_back(m.method + ": " + w);
                print_warnings(tagged);
            }
            std::cout << result.table;
        }
    } catch (const std::exception& e) {
        std::cerr << "mcnet: error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
