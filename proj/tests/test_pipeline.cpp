#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <unistd.h>

#include "mcnet/calibrator.hpp"
#include "mcnet/experiment.hpp"
#include "mcnet/format.hpp"
#include "mcnet/metrics.hpp"
#include "mcnet/synthetic.hpp"

using namespace mcnet;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("mcnet_test_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

Dataset parse(const std::string& text) {
    std::istringstream in(text);
    return read_dataset(in);
}

std::string error_of(const std::string& text) {
    try {
        parse(text);
    } catch (const Error& e) {
        return e.what();
    }
    return "";
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

TrainConfig quick_config() {
    auto c = TrainConfig::desk_profile();
    c.bins = 4;
    c.steps = 10;
    c.hidden = {4};
    c.embedding_dim = 2;
    c.epochs = 1;
    c.batch_size = 256;
    c.aux_hidden = {3};
    return c;
}

}  // namespace

// ---- format --------------------------------------------------------------------------

TEST_CASE("format_double round-trips exactly") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1e6, 1e6);
    for (int i = 0; i < 10000; ++i) {
        const double x = i % 2 ? u(rng) : std::ldexp(u(rng), -40);
        CHECK(parse_double(format_double(x)) == x);
    }
    CHECK(format_double(0.25) == "0.25");
    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(1.0) == "1");
    CHECK(format_double(std::nan("")) == "nan");
    CHECK(format_double(INFINITY) == "inf");
    CHECK(format_double(-INFINITY) == "-inf");
}

TEST_CASE("strict number parsing") {
    CHECK(parse_double("0.5") == 0.5);
    CHECK(parse_double("1e-3") == 1e-3);
    CHECK_THROWS_AS(parse_double("0.5x"), Error);
    CHECK_THROWS_AS(parse_double(""), Error);
    CHECK_THROWS_AS(parse_double(" 0.5"), Error);
    CHECK(parse_integer("42") == 42);
    CHECK(parse_integer("-3") == -3);
    CHECK_THROWS_AS(parse_integer("4.0"), Error);
    CHECK_THROWS_AS(parse_integer("99999999999999999999999"), Error);
}

// ---- dataset I/O ---------------------------------------------------------------------

TEST_CASE("dataset rows parse") {
    auto d = parse("score,label,field\n0.25,1,2\n");
    REQUIRE(d.size() == 1);
    CHECK(d.samples[0] == Sample{0.25, 1, 2, {}});
    CHECK(d.field_count == 3);
    CHECK(d.feature_dim == 0);

    auto f = parse("# fields=5\nscore,label,field,f0,f1\n0.5,0,1,0.1,-2\n0.75,1,4,3,4\n");
    CHECK(f.field_count == 5);
    CHECK(f.feature_dim == 2);
    CHECK(f.samples[1].features == std::vector<double>{3, 4});
}

TEST_CASE("dataset errors name the line") {
    CHECK(error_of("score,label,field\n0.25,2,0\n").find("line 2") != std::string::npos);
    CHECK(error_of("score,label,field\n0.25,2,0\n").find("label not in {0,1}") != std::string::npos);
    CHECK(error_of("score,label,field\n0.5,1,0\n1.0,1,0\n").find("line 3") != std::string::npos);
    CHECK(error_of("score,label,field\n0.0,1,0\n").find("score outside (0,1)") != std::string::npos);
    CHECK(error_of("# fields=2\nscore,label,field\n0.5,1,2\n").find("line 3") != std::string::npos);
    CHECK(error_of("score,label,field\n0.5,1\n").find("line 2") != std::string::npos);
    CHECK(error_of("score,label,field\n0.5,1,0,7\n").find("columns") != std::string::npos);
    CHECK(error_of("score,label,field\nabc,1,0\n").find("line 2") != std::string::npos);
    CHECK(error_of("score,label\n0.5,1\n").find("line 1") != std::string::npos);
    CHECK(error_of("score,label,field\n0.5,1,-1\n").find("line 2") != std::string::npos);
    CHECK_FALSE(error_of("").empty());
}

TEST_CASE("dataset save/load round-trip") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0, 1);
    Dataset d;
    d.field_count = 6;
    d.feature_dim = 2;
    for (int i = 0; i < 10000; ++i) {
        Sample s;
        s.score = std::clamp(u(rng), 1e-12, 1 - 1e-12);
        s.label = u(rng) < 0.3;
        s.field = static_cast<int>(u(rng) * 5);  // field 5 declared but unused
        s.features = {u(rng) - 0.5, std::ldexp(u(rng), -30)};
        d.samples.push_back(s);
    }
    auto dir = scratch_dir("dataset");
    save_dataset(d, dir / "d.csv");
    auto back = load_dataset(dir / "d.csv");
    CHECK(back == d);
    CHECK_THROWS_AS(load_dataset(dir / "missing.csv"), Error);
    fs::remove_all(dir);
}

// ---- generator ------------------------------------------------------------------------

TEST_CASE("distortions are strictly increasing with matching inverses") {
    for (auto d : {Distortion::identity(), Distortion::power(2), Distortion::power(0.5), Distortion::smoothstep(),
                   Distortion::logit_shift(0.5), Distortion::logit_shift(-1), Distortion::logit_scale(1.7)}) {
        double prev = -1;
        for (int i = 1; i < 1000; ++i) {
            const double q = i / 1000.0;
            const double s = d.apply(q);
            CHECK(s > prev);
            CHECK(s > 0.0);
            CHECK(s < 1.0);
            CHECK(d.inverse(s) == doctest::Approx(q).epsilon(1e-9));
            prev = s;
        }
        CHECK(Distortion::parse(d.to_string()).kind == d.kind);
        CHECK(Distortion::parse(d.to_string()).param == d.param);
    }
    CHECK(Distortion::parse("power:2").param == 2.0);
    CHECK(Distortion::parse("logit-shift:0.5").kind == Distortion::Kind::logit_shift);
    CHECK_THROWS_AS(Distortion::parse("power"), Error);
    CHECK_THROWS_AS(Distortion::parse("power:-1"), Error);
    CHECK_THROWS_AS(Distortion::parse("logit-scale:0"), Error);
    CHECK_THROWS_AS(Distortion::parse("cubic"), Error);
}

TEST_CASE("truth distribution parsing") {
    CHECK(TruthDistribution::parse("uniform").kind == TruthDistribution::Kind::uniform);
    auto b = TruthDistribution::parse("beta:2:5");
    CHECK(b.kind == TruthDistribution::Kind::beta);
    CHECK(b.a == 2.0);
    CHECK(b.b == 5.0);
    CHECK(TruthDistribution::parse(b.to_string()).a == 2.0);
    CHECK_THROWS_AS(TruthDistribution::parse("beta:0:1"), Error);
    CHECK_THROWS_AS(TruthDistribution::parse("normal"), Error);
}

TEST_CASE("generator: identity data is calibrated, power(2) understates") {
    SyntheticSpec spec;
    spec.n = 1000000;
    spec.seed = 5;
    auto id = generate(spec);
    const double p_id = pcoc(id.data.scores(), id.data.labels());
    CHECK(p_id >= 0.99);
    CHECK(p_id <= 1.01);

    spec.distortions = {Distortion::power(2)};
    auto pw = generate(spec);
    CHECK(pcoc(pw.data.scores(), pw.data.labels()) < 1.0);
    CHECK(pw.truth(0, 0.25) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("generator: ground-truth curves calibrate every distortion") {
    for (auto d : {Distortion::power(2), Distortion::smoothstep(), Distortion::logit_shift(0.5),
                   Distortion::logit_scale(2.0)}) {
        SyntheticSpec spec;
        spec.n = 1000000;
        spec.distortions = {d};
        spec.truth = TruthDistribution::parse("beta:2:3");
        spec.seed = 8;
        auto g = generate(spec);
        std::vector<double> fixed;
        for (const auto& s : g.data.samples) fixed.push_back(g.truth(s.field, s.score));
        const double p = pcoc(fixed, g.data.labels());
        INFO(d.to_string());
        CHECK(p >= 0.99);
        CHECK(p <= 1.01);
    }
}

TEST_CASE("generator: determinism, fields and features") {
    SyntheticSpec spec;
    spec.n = 5000;
    spec.fields = 3;
    spec.distortions = {Distortion::power(2), Distortion::logit_shift(0.5), Distortion::identity()};
    spec.feature_dim = 2;
    spec.seed = 77;
    auto a = generate(spec);
    auto b = generate(spec);
    CHECK(a.data == b.data);
    CHECK(a.data.field_count == 3);
    CHECK(a.data.feature_dim == 2);
    CHECK_NOTHROW(a.data.validate());
    std::vector<int> seen(3, 0);
    for (const auto& s : a.data.samples) ++seen[s.field];
    for (int c : seen) CHECK(c > 1000);
    spec.seed = 78;
    CHECK_FALSE(generate(spec).data == a.data);

    spec.distortions = {Distortion::power(2), Distortion::identity()};
    CHECK_THROWS_AS(generate(spec), Error);
    spec.distortions = {Distortion::power(-1)};
    CHECK_THROWS_AS(generate(spec), Error);
}

// ---- calibrator persistence --------------------------------------------------------------

TEST_CASE("every calibrator survives save and load unchanged") {
    SyntheticSpec spec;
    spec.n = 3000;
    spec.fields = 2;
    spec.distortions = {Distortion::power(2), Distortion::identity()};
    spec.feature_dim = 2;
    spec.seed = 4;
    auto data = generate(spec).data;
    spec.seed += kTestSplitSeedOffset;
    auto test = generate(spec).data;
    auto dir = scratch_dir("persist");
    for (const auto& method : calibrator_names()) {
        INFO(method);
        auto fit = fit_calibrator(method, data, quick_config());
        save_calibrator(fit.calibrator, dir / (method + ".json"));
        auto back = load_calibrator(dir / (method + ".json"));
        CHECK(back.method == method);
        CHECK(serialize(back) == serialize(fit.calibrator));
        const auto a = calibrate(fit.calibrator, test);
        const auto b = calibrate(back, test);
        CHECK(a.probs == b.probs);
        CHECK(is_mcnet_method(method) == method.starts_with("mcnet"));
    }
    fs::remove_all(dir);
}

TEST_CASE("model documents are validated on load") {
    SyntheticSpec spec;
    spec.n = 500;
    auto data = generate(spec).data;
    auto fit = fit_calibrator("mcnet-none", data, quick_config());
    const std::string text = serialize(fit.calibrator);
    CHECK(text.find("\"format\": \"mcnet-calibrator\"") != std::string::npos);
    CHECK(text.find("\"version\": 1") != std::string::npos);

    auto mutate = [&](const std::string& from, const std::string& to) {
        std::string t = text;
        auto at = t.find(from);
        REQUIRE(at != std::string::npos);
        t.replace(at, from.size(), to);
        return t;
    };
    CHECK_THROWS_AS(deserialize(mutate("\"version\": 1", "\"version\": 2")), Error);
    CHECK_THROWS_AS(deserialize(mutate("mcnet-calibrator", "something-else")), Error);
    CHECK_THROWS_AS(deserialize(text.substr(0, text.size() / 2)), Error);
    CHECK_THROWS_AS(deserialize("{}"), Error);
    CHECK_THROWS_AS(load_calibrator("/nonexistent/model.json"), Error);
}

TEST_CASE("fit_calibrator rejects unknown methods and empty data") {
    SyntheticSpec spec;
    spec.n = 100;
    auto data = generate(spec).data;
    CHECK_THROWS_AS(fit_calibrator("temperature", data, quick_config()), Error);
    CHECK_THROWS_AS(fit_calibrator("histogram", Dataset{}, quick_config()), Error);
}

TEST_CASE("out-of-domain scores are counted, not rejected") {
    Dataset val;
    for (int i = 0; i < 200; ++i) val.samples.push_back({0.2 + 0.003 * i, i % 3 == 0, 0, {}});
    auto fit = fit_calibrator("mcnet-none", val, quick_config());
    Dataset test;
    test.samples = {{0.01, 0, 0, {}}, {0.5, 1, 0, {}}, {0.99, 1, 0, {}}};
    auto c = calibrate(fit.calibrator, test);
    CHECK(c.out_of_domain == 2);
    for (double p : c.probs) CHECK(std::isfinite(p));
}

// ---- experiment -------------------------------------------------------------------------

TEST_CASE("experiment writes a comparison over five calibrators") {
    ExperimentConfig cfg;
    SyntheticSpec spec;
    spec.n = 4000;
    spec.distortions = {Distortion::power(2)};
    spec.seed = 12;
    cfg.synthetic = spec;
    cfg.methods = {"histogram", "isotonic", "platt", "sir", "mcnet-none"};
    cfg.train = quick_config();
    cfg.out_dir = scratch_dir("experiment");
    auto r = run_experiment(cfg);
    CHECK(r.methods.size() == 5);

    std::istringstream table(r.table);
    std::string line;
    std::vector<std::string> lines;
    while (std::getline(table, line)) lines.push_back(line);
    REQUIRE(lines.size() == 2 + 1 + 5);  // header, rule, uncalibrated, methods
    CHECK(lines[0].find("PCOC") != std::string::npos);
    CHECK(lines[0].find("F-RCE") != std::string::npos);
    CHECK(lines[0].find("AUC") != std::string::npos);
    for (std::size_t i = 3; i < lines.size(); ++i) CHECK(lines[i].size() == lines[0].size());

    for (const auto& m : cfg.methods) {
        CHECK(fs::exists(cfg.out_dir / (m + ".model.json")));
        CHECK(fs::exists(cfg.out_dir / (m + ".report.txt")));
    }
    CHECK(fs::exists(cfg.out_dir / "mcnet-none.history.csv"));
    CHECK(slurp(cfg.out_dir / "comparison.txt") == r.table);

    // identical rerun, identical bytes
    const auto first = slurp(cfg.out_dir / "mcnet-none.report.txt");
    const auto first_model = slurp(cfg.out_dir / "mcnet-none.model.json");
    run_experiment(cfg);
    CHECK(slurp(cfg.out_dir / "mcnet-none.report.txt") == first);
    CHECK(slurp(cfg.out_dir / "mcnet-none.model.json") == first_model);
    fs::remove_all(cfg.out_dir);
}

TEST_CASE("experiment: per-field section for a field-aware run") {
    ExperimentConfig cfg;
    SyntheticSpec spec;
    spec.n = 3000;
    spec.fields = 3;
    spec.distortions = {Distortion::power(2), Distortion::logit_shift(0.5), Distortion::identity()};
    spec.seed = 13;
    cfg.synthetic = spec;
    cfg.methods = {"mcnet-field"};
    cfg.train = quick_config();
    cfg.out_dir = scratch_dir("experiment_field");
    run_experiment(cfg);
    const auto report = slurp(cfg.out_dir / "mcnet-field.report.txt");
    for (const char* key : {"field.0.pcoc = ", "field.1.pcoc = ", "field.2.pcoc = ", "pcoc_std = "}) {
        CHECK(report.find(key) != std::string::npos);
    }
    fs::remove_all(cfg.out_dir);
}

TEST_CASE("experiment errors") {
    ExperimentConfig cfg;
    cfg.methods = {"histogram"};
    CHECK_THROWS_AS(run_experiment(cfg), Error);  // no dataset
    SyntheticSpec spec;
    spec.n = 100;
    cfg.synthetic = spec;
    cfg.methods = {"histogram", "bogus"};
    CHECK_THROWS_AS(run_experiment(cfg), Error);
    cfg.methods = {};
    CHECK_THROWS_AS(run_experiment(cfg), Error);
    cfg.methods = {"histogram"};
    cfg.validation = "/nonexistent/v.csv";
    CHECK_THROWS_AS(run_experiment(cfg), Error);  // test path missing
}
