#include "mcnet/calibrator.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "mcnet/error.hpp"

namespace mcnet {
namespace {

using json = nlohmann::json;

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

json matrix_to_json(const MatrixX<double>& m) {
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
    }
    return json{{"shape", {m.rows(), m.cols()}}, {"data", data}};
}

MatrixX<double> matrix_from_json(const json& j) {
    const auto rows = j.at("shape").at(0).get<Eigen::Index>();
    const auto cols = j.at("shape").at(1).get<Eigen::Index>();
    const auto data = j.at("data").get<std::vector<double>>();
    if (rows < 0 || cols < 0 || static_cast<Eigen::Index>(data.size()) != rows * cols) {
        throw Error("model file: matrix data does not match its shape");
    }
    MatrixX<double> m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[static_cast<std::size_t>(r * cols + c)];
    }
    return m;
}

json net_to_json(const DenseNet<double>& net) {
    json layers = json::array();
    for (const auto& l : net.layers()) {
        layers.push_back({{"activation", std::string(to_string(l.activation))},
                          {"weight", matrix_to_json(l.weight)},
                          {"bias", matrix_to_json(l.bias)}});
    }
    return json{{"layers", layers}};
}

DenseNet<double> net_from_json(const json& j) {
    std::vector<DenseLayer<double>> layers;
    for (const auto& lj : j.at("layers")) {
        DenseLayer<double> l;
        l.activation = activation_from_string(lj.at("activation").get<std::string>());
        l.weight = matrix_from_json(lj.at("weight"));
        const MatrixX<double> b = matrix_from_json(lj.at("bias"));
        if (b.cols() != 1) throw Error("model file: bias must be a column");
        l.bias = b.col(0);
        layers.push_back(std::move(l));
    }
    return DenseNet<double>(std::move(layers));
}

json config_to_json(const TrainConfig& c) {
    json j;
    j["bins"] = c.bins;
    j["steps"] = c.steps;
    j["learning_rate"] = c.learning_rate ? json(*c.learning_rate) : json(nullptr);
    j["batch_size"] = c.batch_size;
    j["epochs"] = c.epochs;
    j["beta"] = c.beta;
    j["alpha"] = c.alpha;
    j["seed"] = c.seed;
    j["embedding_dim"] = c.embedding_dim;
    j["hidden"] = c.hidden;
    j["context"] = std::string(to_string(c.context));
    j["space"] = std::string(to_string(c.space));
    j["origin"] = std::string(to_string(c.origin));
    j["aux"] = c.aux;
    j["aux_hidden"] = c.aux_hidden;
    j["clamp"] = c.clamp;
    j["diff_norm"] = c.diff_norm == DiffNormalization::total ? "total" : "per_field";
    j["logit_margin"] = c.logit_margin;
    return j;
}

TrainConfig config_from_json(const json& j) {
    TrainConfig c;
    c.bins = j.at("bins").get<int>();
    c.steps = j.at("steps").get<int>();
    if (!j.at("learning_rate").is_null()) c.learning_rate = j.at("learning_rate").get<double>();
    c.batch_size = j.at("batch_size").get<int>();
    c.epochs = j.at("epochs").get<int>();
    c.beta = j.at("beta").get<double>();
    c.alpha = j.at("alpha").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.embedding_dim = j.at("embedding_dim").get<int>();
    c.hidden = j.at("hidden").get<std::vector<int>>();
    c.context = context_mode_from_string(j.at("context").get<std::string>());
    c.space = score_space_from_string(j.at("space").get<std::string>());
    c.origin = integral_origin_from_string(j.at("origin").get<std::string>());
    c.aux = j.at("aux").get<bool>();
    c.aux_hidden = j.at("aux_hidden").get<std::vector<int>>();
    c.clamp = j.at("clamp").get<double>();
    const auto norm = j.at("diff_norm").get<std::string>();
    if (norm != "total" && norm != "per_field") throw Error("model file: unknown diff_norm '" + norm + "'");
    c.diff_norm = norm == "total" ? DiffNormalization::total : DiffNormalization::per_field;
    c.logit_margin = j.at("logit_margin").get<double>();
    return c;
}

json partition_to_json(const BinPartition& p) { return json{{"boundaries", p.boundaries}, {"requested", p.requested}}; }

BinPartition partition_from_json(const json& j) {
    BinPartition p = make_partition(j.at("boundaries").get<std::vector<double>>());
    p.requested = j.at("requested").get<int>();
    return p;
}

json mcnet_to_json(const McnetModel& m) {
    json j;
    j["config"] = config_to_json(m.config);
    j["field_count"] = m.field_count;
    j["partition"] = partition_to_json(m.partition);
    json bins = json::array();
    for (const auto& b : m.bins) {
        json bj{{"f1", net_to_json(b.f1)}, {"f2", net_to_json(b.f2)}};
        // Stored |C| x d: one row per field.
        bj["embedding"] = matrix_to_json(b.embedding.data().transpose());
        bins.push_back(std::move(bj));
    }
    j["bins"] = std::move(bins);
    j["aux"] = m.aux ? net_to_json(*m.aux) : json(nullptr);
    return j;
}

McnetModel mcnet_from_json(const json& j) {
    McnetModel m;
    m.config = config_from_json(j.at("config"));
    m.config.validate();
    m.field_count = j.at("field_count").get<int>();
    m.partition = partition_from_json(j.at("partition"));
    m.rule = ccq_rule<double>(m.config.steps);
    const int d = m.config.embedding_dim;
    for (const auto& bj : j.at("bins")) {
        McfBin b;
        b.f1 = net_from_json(bj.at("f1"));
        b.f2 = net_from_json(bj.at("f2"));
        const MatrixX<double> emb = matrix_from_json(bj.at("embedding"));
        b.embedding = EmbeddingTable<double>(emb.rows(), emb.cols());
        b.embedding.data() = emb.transpose();
        if (b.f1.input_dim() != 1 + d || b.f1.output_dim() != 1 || b.f2.input_dim() != d || b.f2.output_dim() != 1) {
            throw Error("model file: network shapes do not match the embedding dimension");
        }
        if (m.config.context == ContextMode::field && (emb.rows() != m.field_count || emb.cols() != d)) {
            throw Error("model file: embedding table shape mismatch");
        }
        m.bins.push_back(std::move(b));
    }
    if (static_cast<int>(m.bins.size()) != m.partition.bins()) throw Error("model file: bin count mismatch");
    if (!j.at("aux").is_null()) m.aux = net_from_json(j.at("aux"));
    if (m.config.aux != m.aux.has_value()) throw Error("model file: aux flag does not match aux network");
    return m;
}

struct MethodSpec {
    ContextMode context;
    bool aux;
};

MethodSpec mcnet_method(std::string_view method) {
    if (method == "mcnet-none") return {ContextMode::none, false};
    if (method == "mcnet-field") return {ContextMode::field, false};
    if (method == "mcnet-none-aux") return {ContextMode::none, true};
    if (method == "mcnet-field-aux") return {ContextMode::field, true};
    throw Error("unknown calibrator '" + std::string(method) + "'");
}

} // namespace

const std::vector<std::string>& calibrator_names() {
    static const std::vector<std::string> names{"histogram",  "isotonic",    "platt",          "sir",
                                                "mcnet-none", "mcnet-field", "mcnet-none-aux", "mcnet-field-aux"};
    return names;
}

bool is_mcnet_method(std::string_view method) { return method.starts_with("mcnet-"); }

FitResult fit_calibrator(std::string_view method, const Dataset& validation, const TrainConfig& config) {
    const auto& names = calibrator_names();
    if (std::find(names.begin(), names.end(), method) == names.end()) {
        throw Error("unknown calibrator '" + std::string(method) + "'");
    }
    if (validation.empty()) throw Error("fit: empty validation set");
    validation.validate();
    FitResult r;
    r.calibrator.method = std::string(method);
    const auto scores = validation.scores();
    const auto labels = validation.labels();
    auto note_merge = [&](int got) {
        if (got < config.bins) {
            r.warnings.push_back(std::string(method) + ": empty or tied bins merged, " + std::to_string(config.bins) +
                                 " requested, " + std::to_string(got) + " used");
        }
    };
    if (method == "histogram") {
        auto h = histogram_fit(scores, labels, config.bins);
        note_merge(h.partition.bins());
        r.calibrator.model = std::move(h);
    } else if (method == "isotonic") {
        r.calibrator.model = isotonic_fit(scores, labels);
    } else if (method == "platt") {
        auto p = platt_fit(scores, labels);
        if (!p.converged) r.warnings.push_back("platt: did not converge, using best iterate");
        r.calibrator.model = p;
    } else if (method == "sir") {
        auto l = sir_fit(scores, labels, config.bins);
        note_merge(static_cast<int>(l.knot_x.size()) - 1);
        r.calibrator.model = std::move(l);
    } else {
        const MethodSpec spec = mcnet_method(method);
        TrainConfig c = config;
        c.context = spec.context;
        c.aux = spec.aux;
        TrainResult t = train(validation, c);
        r.history = std::move(t.history);
        r.warnings = std::move(t.warnings);
        r.calibrator.model = std::move(t.model);
    }
    return r;
}

Calibrated calibrate(const FittedCalibrator& cal, const Dataset& data) {
    Calibrated out;
    std::visit(overloaded{
                   [&](const McnetModel& m) {
                       // Logit-space partitions only span the validation range; test scores beyond it
                       // are evaluated at the nearest boundary.
                       const BatchOutput b = evaluate_batch(m, data.samples, RangePolicy::clamp);
                       out.probs = b.probs;
                       out.clamped = b.clamped;
                       out.out_of_domain = b.out_of_range;
                   },
                   [&](const auto& c) {
                       out.probs.reserve(data.size());
                       for (const auto& s : data.samples) {
                           if (!in_domain(c, s.score)) ++out.out_of_domain;
                           out.probs.push_back(apply(c, s.score));
                       }
                   },
               },
               cal.model);
    return out;
}

std::string serialize(const FittedCalibrator& cal) {
    json j;
    j["format"] = "mcnet-calibrator";
    j["version"] = kModelFormatVersion;
    j["method"] = cal.method;
    std::visit(overloaded{
                   [&](const PiecewiseConstantCalibrator& c) {
                       j["type"] = "piecewise-constant";
                       j["partition"] = partition_to_json(c.partition);
                       j["values"] = c.values;
                   },
                   [&](const PiecewiseLinearCalibrator& c) {
                       j["type"] = "piecewise-linear";
                       j["knot_x"] = c.knot_x;
                       j["knot_y"] = c.knot_y;
                   },
                   [&](const PlattCalibrator& c) {
                       j["type"] = "platt";
                       j["slope"] = c.slope;
                       j["intercept"] = c.intercept;
                       j["converged"] = c.converged;
                       j["iterations"] = c.iterations;
                   },
                   [&](const McnetModel& m) {
                       j["type"] = "mcnet";
                       j["model"] = mcnet_to_json(m);
                   },
               },
               cal.model);
    return j.dump(1) + "\n";
}

FittedCalibrator deserialize(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(std::string("model file: ") + e.what());
    }
    try {
        if (j.at("format").get<std::string>() != "mcnet-calibrator") throw Error("model file: unexpected format tag");
        const int version = j.at("version").get<int>();
        if (version != kModelFormatVersion) {
            throw Error("model file: unsupported version " + std::to_string(version));
        }
        FittedCalibrator cal;
        cal.method = j.at("method").get<std::string>();
        const auto type = j.at("type").get<std::string>();
        if (type == "piecewise-constant") {
            PiecewiseConstantCalibrator c;
            c.partition = partition_from_json(j.at("partition"));
            c.values = j.at("values").get<std::vector<double>>();
            if (static_cast<int>(c.values.size()) != c.partition.bins()) throw Error("model file: value count mismatch");
            cal.model = std::move(c);
        } else if (type == "piecewise-linear") {
            PiecewiseLinearCalibrator c;
            c.knot_x = j.at("knot_x").get<std::vector<double>>();
            c.knot_y = j.at("knot_y").get<std::vector<double>>();
            if (c.knot_x.size() != c.knot_y.size() || c.knot_x.size() < 2) throw Error("model file: bad knots");
            cal.model = std::move(c);
        } else if (type == "platt") {
            PlattCalibrator c;
            c.slope = j.at("slope").get<double>();
            c.intercept = j.at("intercept").get<double>();
            c.converged = j.at("converged").get<bool>();
            c.iterations = j.at("iterations").get<int>();
            cal.model = c;
        } else if (type == "mcnet") {
            cal.model = mcnet_from_json(j.at("model"));
        } else {
            throw Error("model file: unknown type '" + type + "'");
        }
        return cal;
    } catch (const json::exception& e) {
        throw Error(std::string("model file: ") + e.what());
    }
}

void save_calibrator(const FittedCalibrator& cal, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write model " + path.string());
    out << serialize(cal);
    if (!out) throw Error("write failed for " + path.string());
}

FittedCalibrator load_calibrator(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open model " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return deserialize(buf.str());
}

} // namespace mcnet
