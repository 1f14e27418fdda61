#include "mcnet/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mcnet/error.hpp"
#include "mcnet/format.hpp"

namespace mcnet {
namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
    if (!out) throw Error("write failed for " + path.string());
}

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

} // namespace

std::string comparison_table(const MetricsReport& uncalibrated, const std::vector<MethodOutcome>& methods) {
    std::vector<std::vector<std::string>> rows;
    rows.push_back({"method", "PCOC", "F-RCE", "AUC"});
    rows.push_back({"uncalibrated", fixed(uncalibrated.pcoc, 4), fixed(uncalibrated.f_rce, 4), fixed(uncalibrated.auc, 4)});
    for (const auto& m : methods) {
        rows.push_back({m.method, fixed(m.report.pcoc, 4), fixed(m.report.f_rce, 4), fixed(m.report.auc, 4)});
    }
    std::vector<std::size_t> width(rows.front().size(), 0);
    for (const auto& r : rows) {
        for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
    }
    std::ostringstream out;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        for (std::size_t c = 0; c < r.size(); ++c) {
            if (c == 0) {
                out << r[c] << std::string(width[c] - r[c].size(), ' ');
            } else {
                out << "  " << std::string(width[c] - r[c].size(), ' ') << r[c];
            }
        }
        out << '\n';
        if (i == 0) {
            std::size_t total = 0;
            for (std::size_t c = 0; c < width.size(); ++c) total += width[c] + (c ? 2 : 0);
            out << std::string(total, '-') << '\n';
        }
    }
    return out.str();
}

std::string history_csv(const std::vector<EpochStats>& history) {
    std::ostringstream out;
    out << "epoch,logloss,order,balance,total,clamp_rate\n";
    for (const auto& e : history) {
        out << e.epoch << ',' << format_double(e.logloss) << ',' << format_double(e.order) << ','
            << format_double(e.balance) << ',' << format_double(e.total) << ',' << format_double(e.clamp_rate) << '\n';
    }
    return out.str();
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
    if (config.methods.empty()) throw Error("experiment: no calibrators listed");
    const auto& names = calibrator_names();
    for (const auto& m : config.methods) {
        if (std::find(names.begin(), names.end(), m) == names.end()) throw Error("experiment: unknown calibrator '" + m + "'");
    }

    Dataset validation;
    Dataset test;
    if (config.validation || config.test) {
        if (!config.validation || !config.test) throw Error("experiment: need both a validation and a test dataset");
        validation = load_dataset(*config.validation);
        test = load_dataset(*config.test);
    } else if (config.synthetic) {
        SyntheticSpec spec = *config.synthetic;
        validation = generate(spec).data;
        spec.seed += kTestSplitSeedOffset;
        test = generate(spec).data;
    } else {
        throw Error("experiment: missing dataset (give validation/test files or a synthetic spec)");
    }
    if (validation.empty() || test.empty()) throw Error("experiment: empty dataset");

    if (!config.out_dir.empty()) std::filesystem::create_directories(config.out_dir);

    const auto labels = test.labels();
    const auto fields = test.fields();
    ExperimentResult result;
    result.uncalibrated = evaluate(test.scores(), labels, fields, config.frce_eps, config.ece_bins);
    if (!config.out_dir.empty()) write_text(config.out_dir / "uncalibrated.report.txt", to_key_value(result.uncalibrated));

    for (const auto& method : config.methods) {
        FitResult fit = fit_calibrator(method, validation, config.train);
        const Calibrated cal = calibrate(fit.calibrator, test);
        MethodOutcome o;
        o.method = method;
        o.report = evaluate(cal.probs, labels, fields, config.frce_eps, config.ece_bins);
        o.history = std::move(fit.history);
        o.warnings = std::move(fit.warnings);
        o.out_of_domain = cal.out_of_domain;
        o.clamped = cal.clamped;
        if (!config.out_dir.empty()) {
            save_calibrator(fit.calibrator, config.out_dir / (method + ".model.json"));
            std::string report = "method = " + method + "\n" + to_key_value(o.report);
            report += "out_of_domain = " + std::to_string(o.out_of_domain) + "\n";
            report += "clamped = " + std::to_string(o.clamped) + "\n";
            write_text(config.out_dir / (method + ".report.txt"), report);
            if (!o.history.empty()) write_text(config.out_dir / (method + ".history.csv"), history_csv(o.history));
        }
        result.methods.push_back(std::move(o));
    }
    result.table = comparison_table(result.uncalibrated, result.methods);
    if (!config.out_dir.empty()) write_text(config.out_dir / "comparison.txt", result.table);
    return result;
}

} // namespace mcnet
