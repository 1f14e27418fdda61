#include "mcnet/mcnet.hpp"

#ifdef __GLIBC__
#include <malloc.h>
#endif

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "mcnet/error.hpp"

namespace mcnet {
namespace {

// The per-batch quadrature matrices sit just above glibc's mmap threshold, so
// every forward/backward pass maps and unmaps pages. Raising the threshold
// once keeps them in the heap (training ran ~2.5x faster, mostly system time).
void keep_buffers_on_heap() {
#ifdef __GLIBC__
    static const bool done = [] { return mallopt(M_MMAP_THRESHOLD, 64 << 20) == 1; }();
    (void)done;
#endif
}

using Matrix = MatrixX<double>;
using Vector = VectorX<double>;

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
    return splitmix64(splitmix64(splitmix64(seed) ^ a) ^ b);
}

enum SeedStream : std::uint64_t { kF1 = 1, kF2 = 2, kEmbedding = 3, kAux = 4, kShuffle = 5 };

double logit(double s) { return std::log(s) - std::log1p(-s); }

std::vector<int> layer_dims(int in, const std::vector<int>& hidden) {
    std::vector<int> dims{in};
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(1);
    return dims;
}

std::vector<Activation> activations(std::size_t hidden, Activation out) {
    std::vector<Activation> acts(hidden, Activation::relu);
    acts.push_back(out);
    return acts;
}

// A point at which one bin's function is evaluated: a data sample or an
// order-penalty probe at a shared boundary.
struct Point {
    int sample = -1;  // index into the batch, -1 for probes
    int field = 0;
    double x = 0;
};

struct BinPoints {
    std::vector<Point> points;
    Matrix context;  // d x n
    Vector lower;    // integral lower limits
    Vector upper;    // integral upper limits (coordinates)
};

struct OrderProbe {
    int bin = 0;  // left bin; right bin is bin + 1
    std::size_t left = 0;
    std::size_t right = 0;
};

double integral_origin(const McnetModel& model, int bin) {
    return model.config.origin == IntegralOrigin::zero ? 0.0 : model.partition.boundaries[bin];
}

void fill_context(const McnetModel& model, int bin, BinPoints& bp) {
    const int d = model.embedding_dim();
    const auto n = static_cast<Eigen::Index>(bp.points.size());
    bp.context = Matrix::Zero(d, n);
    bp.lower = Vector::Constant(n, integral_origin(model, bin));
    bp.upper.resize(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const Point& pt = bp.points[j];
        bp.upper[j] = pt.x;
        if (model.config.context == ContextMode::field) {
            bp.context.col(j) = model.bins[bin].embedding.lookup(pt.field);
        }
    }
}

// Un-clamped f^k at every point of one bin.
Vector bin_forward(const McnetModel& model, int bin, const BinPoints& bp) {
    if (bp.points.empty()) return Vector();
    const McfBin& b = model.bins[bin];
    Vector out = integrate_forward(b.f1, bp.context, bp.lower, bp.upper, model.rule);
    out += b.f2.forward(bp.context).row(0).transpose();
    return out;
}

std::vector<int> order_contexts(const McnetModel& model) {
    std::vector<int> contexts;
    if (model.config.context == ContextMode::field) {
        contexts.resize(model.field_count);
        std::iota(contexts.begin(), contexts.end(), 0);
    } else {
        contexts.push_back(0);
    }
    return contexts;
}

struct Probabilities {
    double prob = 0;
    double slope = 0;  // d prob / d raw; zero when clamped
    bool clamped = false;
};

Probabilities to_probability(ScoreSpace space, double raw, double eps) {
    Probabilities p;
    double q = raw;
    double dq = 1.0;
    if (space == ScoreSpace::logit) {
        q = sigmoid(raw);
        dq = q * (1.0 - q);
    }
    if (q < eps) {
        p.prob = eps;
        p.clamped = true;
    } else if (q > 1.0 - eps) {
        p.prob = 1.0 - eps;
        p.clamped = true;
    } else {
        p.prob = q;
        p.slope = dq;
    }
    return p;
}

struct Computation {
    LossTerms terms;
    Vector gradient;
    long long clamped = 0;
};

Computation compute(const McnetModel& model, std::span<const Sample* const> batch, double alpha, double beta,
                    bool want_gradient) {
    if (batch.empty()) throw Error("loss: empty batch");
    const int K = model.partition.bins();
    const int d = model.embedding_dim();
    const auto B = static_cast<Eigen::Index>(batch.size());
    const bool field_mode = model.config.context == ContextMode::field;

    std::vector<BinPoints> bins(K);
    std::vector<std::pair<int, std::size_t>> where(batch.size());
    for (std::size_t j = 0; j < batch.size(); ++j) {
        const Sample& s = *batch[j];
        const double x = to_coordinate(model, s.score);
        const int k = bin_index(model.partition, x);
        if (field_mode && (s.field < 0 || s.field >= model.field_count)) {
            throw Error("loss: unknown field id " + std::to_string(s.field));
        }
        where[j] = {k, bins[k].points.size()};
        bins[k].points.push_back({static_cast<int>(j), s.field, x});
    }
    std::vector<OrderProbe> probes;
    for (int c : order_contexts(model)) {
        for (int k = 0; k + 1 < K; ++k) {
            const double b = model.partition.boundaries[k + 1];
            OrderProbe probe{k, bins[k].points.size(), bins[k + 1].points.size()};
            bins[k].points.push_back({-1, c, b});
            bins[k + 1].points.push_back({-1, c, b});
            probes.push_back(probe);
        }
    }

    std::vector<Vector> raw(K);
    for (int k = 0; k < K; ++k) {
        fill_context(model, k, bins[k]);
        raw[k] = bin_forward(model, k, bins[k]);
    }

    Matrix features;
    Vector aux_out;
    if (model.aux) {
        features.resize(model.aux->input_dim(), B);
        for (Eigen::Index j = 0; j < B; ++j) {
            const auto& f = batch[j]->features;
            if (static_cast<Eigen::Index>(f.size()) != model.aux->input_dim()) {
                throw Error("loss: sample feature length does not match the auxiliary network");
            }
            features.col(j) = Eigen::Map<const Vector>(f.data(), static_cast<Eigen::Index>(f.size()));
        }
        aux_out = model.aux->forward(features).row(0).transpose();
    }

    // Probabilities and d(logloss)/d(prob).
    Computation out;
    std::vector<double> prob(batch.size());
    std::vector<double> slope(batch.size());
    std::vector<double> dprob(batch.size());
    double ll = 0;
    for (std::size_t j = 0; j < batch.size(); ++j) {
        const auto [k, pos] = where[j];
        double r = raw[k][static_cast<Eigen::Index>(pos)];
        if (model.aux) r += aux_out[static_cast<Eigen::Index>(j)];
        const Probabilities p = to_probability(model.space(), r, model.config.clamp);
        prob[j] = p.prob;
        slope[j] = p.slope;
        out.clamped += p.clamped ? 1 : 0;
        const int y = batch[j]->label;
        ll += y == 1 ? -std::log(p.prob) : -std::log1p(-p.prob);
        dprob[j] = (y == 1 ? -1.0 / p.prob : 1.0 / (1.0 - p.prob)) / static_cast<double>(B);
    }
    out.terms.logloss = ll / static_cast<double>(B);
    out.terms.alpha = alpha;
    out.terms.beta = beta;

    // Field balance over the fields present in this batch.
    {
        std::vector<double> diff(model.field_count, 0.0);
        std::vector<long long> count(model.field_count, 0);
        for (std::size_t j = 0; j < batch.size(); ++j) {
            const int c = batch[j]->field;
            if (c < 0 || c >= model.field_count) throw Error("loss: unknown field id " + std::to_string(c));
            diff[c] += prob[j] - batch[j]->label;
            ++count[c];
        }
        std::vector<int> present;
        for (int c = 0; c < model.field_count; ++c) {
            if (count[c] == 0) continue;
            present.push_back(c);
            diff[c] /= model.config.diff_norm == DiffNormalization::total ? static_cast<double>(B)
                                                                          : static_cast<double>(count[c]);
        }
        std::vector<double> present_diff;
        for (int c : present) present_diff.push_back(diff[c]);
        const double bal = balance_penalty(present_diff);
        out.terms.balance = bal;
        if (want_gradient && alpha != 0.0 && bal > 0.0) {
            double mean = 0;
            for (double v : present_diff) mean += v;
            mean /= static_cast<double>(present.size());
            std::vector<double> ddiff(model.field_count, 0.0);
            for (int c : present) {
                const double denom = model.config.diff_norm == DiffNormalization::total
                                         ? static_cast<double>(B)
                                         : static_cast<double>(count[c]);
                ddiff[c] = (diff[c] - mean) / (static_cast<double>(present.size()) * bal) / denom;
            }
            for (std::size_t j = 0; j < batch.size(); ++j) dprob[j] += alpha * ddiff[batch[j]->field];
        }
    }

    // Order penalty on un-clamped outputs at shared boundaries.
    std::vector<Vector> upstream(K);
    for (int k = 0; k < K; ++k) upstream[k] = Vector::Zero(static_cast<Eigen::Index>(bins[k].points.size()));
    double order = 0;
    for (const auto& probe : probes) {
        const double gap = raw[probe.bin][static_cast<Eigen::Index>(probe.left)] -
                           raw[probe.bin + 1][static_cast<Eigen::Index>(probe.right)];
        if (gap > 0) {
            order += gap;
            upstream[probe.bin][static_cast<Eigen::Index>(probe.left)] += beta;
            upstream[probe.bin + 1][static_cast<Eigen::Index>(probe.right)] -= beta;
        }
    }
    out.terms.order = order;
    if (!want_gradient) return out;

    Vector aux_upstream;
    if (model.aux) aux_upstream.resize(B);
    for (std::size_t j = 0; j < batch.size(); ++j) {
        const double g = dprob[j] * slope[j];
        const auto [k, pos] = where[j];
        upstream[k][static_cast<Eigen::Index>(pos)] += g;
        if (model.aux) aux_upstream[static_cast<Eigen::Index>(j)] = g;
    }

    out.gradient = Vector::Zero(parameter_count(model));
    Eigen::Index at = 0;
    for (int k = 0; k < K; ++k) {
        const McfBin& b = model.bins[k];
        const BinPoints& bp = bins[k];
        const Eigen::Index n1 = b.f1.parameter_count();
        const Eigen::Index n2 = b.f2.parameter_count();
        const Eigen::Index ne = field_mode ? b.embedding.data().size() : 0;
        if (!bp.points.empty()) {
            auto ig = integrate_backward(b.f1, bp.context, bp.lower, bp.upper, model.rule, upstream[k]);
            ig.params.pack(out.gradient.segment(at, n1));

            auto f2_grad = b.f2.zero_gradient();
            const auto cache = b.f2.forward_cached(bp.context);
            const Matrix f2_din = b.f2.backward(cache, upstream[k].transpose(), f2_grad);
            f2_grad.pack(out.gradient.segment(at + n1, n2));

            if (field_mode) {
                Matrix emb_grad = Matrix::Zero(d, model.field_count);
                for (std::size_t j = 0; j < bp.points.size(); ++j) {
                    const auto jj = static_cast<Eigen::Index>(j);
                    emb_grad.col(bp.points[j].field) += ig.context.col(jj) + f2_din.col(jj);
                }
                out.gradient.segment(at + n1 + n2, ne) = emb_grad.reshaped();
            }
        }
        at += n1 + n2 + ne;
    }
    if (model.aux) {
        auto aux_grad = model.aux->zero_gradient();
        const auto cache = model.aux->forward_cached(features);
        model.aux->backward(cache, aux_upstream.transpose(), aux_grad);
        aux_grad.pack(out.gradient.segment(at, model.aux->parameter_count()));
    }
    return out;
}

std::vector<const Sample*> pointers(std::span<const Sample> samples) {
    std::vector<const Sample*> ptrs;
    ptrs.reserve(samples.size());
    for (const auto& s : samples) ptrs.push_back(&s);
    return ptrs;
}

} // namespace

std::string_view to_string(ContextMode m) { return m == ContextMode::none ? "none" : "field"; }
std::string_view to_string(ScoreSpace s) { return s == ScoreSpace::probability ? "probability" : "logit"; }
std::string_view to_string(IntegralOrigin o) { return o == IntegralOrigin::zero ? "zero" : "bin_left"; }

ContextMode context_mode_from_string(std::string_view s) {
    if (s == "none") return ContextMode::none;
    if (s == "field") return ContextMode::field;
    throw Error("unknown context mode '" + std::string(s) + "'");
}

ScoreSpace score_space_from_string(std::string_view s) {
    if (s == "probability") return ScoreSpace::probability;
    if (s == "logit") return ScoreSpace::logit;
    throw Error("unknown score space '" + std::string(s) + "'");
}

IntegralOrigin integral_origin_from_string(std::string_view s) {
    if (s == "zero") return IntegralOrigin::zero;
    if (s == "bin_left") return IntegralOrigin::bin_left;
    throw Error("unknown integral origin '" + std::string(s) + "'");
}

TrainConfig TrainConfig::desk_profile() {
    TrainConfig c;
    c.bins = 10;
    c.hidden = {16, 16};
    c.embedding_dim = 8;
    c.learning_rate = 1e-3;
    c.batch_size = 128;
    c.space = ScoreSpace::logit;
    c.origin = IntegralOrigin::bin_left;
    return c;
}

double TrainConfig::resolved_learning_rate() const {
    if (learning_rate) return *learning_rate;
    return context == ContextMode::none ? 1e-5 : 1e-4;
}

void TrainConfig::validate() const {
    if (bins < 1) throw Error("config: bins must be >= 1");
    if (steps < 2) throw Error("config: steps must be >= 2");
    if (batch_size < 1) throw Error("config: batch_size must be >= 1");
    if (epochs < 0) throw Error("config: epochs must be >= 0");
    if (!(alpha >= 0)) throw Error("config: alpha must be >= 0");
    if (!(beta >= 0)) throw Error("config: beta must be >= 0");
    if (embedding_dim < 1) throw Error("config: embedding_dim must be >= 1");
    for (int h : hidden) {
        if (h < 1) throw Error("config: hidden widths must be positive");
    }
    for (int h : aux_hidden) {
        if (h < 1) throw Error("config: aux hidden widths must be positive");
    }
    if (!(resolved_learning_rate() > 0)) throw Error("config: learning rate must be positive");
    if (!(clamp > 0 && clamp < 0.5)) throw Error("config: clamp must be in (0, 0.5)");
    if (!(logit_margin > 0)) throw Error("config: logit_margin must be positive");
}

McnetModel init_model(const TrainConfig& config, BinPartition partition, int field_count, int feature_dim) {
    config.validate();
    if (field_count < 1) throw Error("init_model: field count must be positive");
    McnetModel m;
    m.config = config;
    m.partition = std::move(partition);
    m.field_count = field_count;
    m.rule = ccq_rule<double>(config.steps);
    const int d = config.embedding_dim;
    for (int k = 0; k < m.partition.bins(); ++k) {
        const auto kk = static_cast<std::uint64_t>(k);
        McfBin b;
        b.f1 = init_net<double>(layer_dims(1 + d, config.hidden), activations(config.hidden.size(), Activation::sigmoid),
                                derive_seed(config.seed, kF1, kk));
        b.f2 = init_net<double>(layer_dims(d, config.hidden),
                                activations(config.hidden.size(), Activation::identity),
                                derive_seed(config.seed, kF2, kk));
        if (config.context == ContextMode::field) {
            b.embedding = EmbeddingTable<double>::random(field_count, d, derive_seed(config.seed, kEmbedding, kk));
        }
        m.bins.push_back(std::move(b));
    }
    if (config.aux) {
        if (feature_dim < 1) throw Error("init_model: auxiliary network needs feature vectors");
        m.aux = init_net<double>(layer_dims(feature_dim, config.aux_hidden),
                                 activations(config.aux_hidden.size(), Activation::identity),
                                 derive_seed(config.seed, kAux));
    }
    return m;
}

double to_coordinate(const McnetModel& model, double score) {
    return model.space() == ScoreSpace::logit ? logit(score) : score;
}

double mcf_raw(const McnetModel& model, int bin, double x, int field) {
    if (bin < 0 || bin >= model.partition.bins()) throw Error("mcf_raw: bin out of range");
    if (model.config.context == ContextMode::field && (field < 0 || field >= model.field_count)) {
        throw Error("mcf_raw: unknown field id " + std::to_string(field));
    }
    BinPoints bp;
    bp.points.push_back({-1, field, x});
    fill_context(model, bin, bp);
    return bin_forward(model, bin, bp)[0];
}

double mcf_eval(const McnetModel& model, double score, int field) {
    const double x = to_coordinate(model, score);
    const double raw = mcf_raw(model, bin_index(model.partition, x), x, field);
    return to_probability(model.space(), raw, model.config.clamp).prob;
}

double aux_eval(const McnetModel& model, const Sample& sample) {
    if (!model.aux) throw Error("aux_eval: model has no auxiliary network");
    if (static_cast<Eigen::Index>(sample.features.size()) != model.aux->input_dim()) {
        throw Error("aux_eval: feature vector length does not match the auxiliary network");
    }
    const double x = to_coordinate(model, sample.score);
    double raw = mcf_raw(model, bin_index(model.partition, x), x, sample.field);
    const Vector f = Eigen::Map<const Vector>(sample.features.data(), static_cast<Eigen::Index>(sample.features.size()));
    raw += model.aux->forward(f)[0];
    return to_probability(ScoreSpace::logit, raw, model.config.clamp).prob;
}

namespace {

BatchOutput evaluate_chunk(const McnetModel& model, std::span<const Sample> samples, RangePolicy policy) {
    const int K = model.partition.bins();
    const bool field_mode = model.config.context == ContextMode::field;
    BatchOutput out;
    out.raw.resize(samples.size());
    out.probs.resize(samples.size());
    if (samples.empty()) return out;

    const double top = std::nextafter(model.partition.upper(), model.partition.lower());
    std::vector<BinPoints> bins(K);
    std::vector<std::pair<int, std::size_t>> where(samples.size());
    for (std::size_t j = 0; j < samples.size(); ++j) {
        const Sample& s = samples[j];
        double x = to_coordinate(model, s.score);
        if (policy == RangePolicy::clamp && !model.partition.contains(x)) {
            x = std::clamp(x, model.partition.lower(), top);
            ++out.out_of_range;
        }
        if (field_mode && (s.field < 0 || s.field >= model.field_count)) {
            throw Error("calibrate: unknown field id " + std::to_string(s.field));
        }
        const int k = bin_index(model.partition, x);
        where[j] = {k, bins[k].points.size()};
        bins[k].points.push_back({static_cast<int>(j), s.field, x});
    }
    std::vector<Vector> raw(K);
    for (int k = 0; k < K; ++k) {
        fill_context(model, k, bins[k]);
        raw[k] = bin_forward(model, k, bins[k]);
    }
    Vector aux_out;
    if (model.aux) {
        Matrix features(model.aux->input_dim(), static_cast<Eigen::Index>(samples.size()));
        for (std::size_t j = 0; j < samples.size(); ++j) {
            const auto& f = samples[j].features;
            if (static_cast<Eigen::Index>(f.size()) != model.aux->input_dim()) {
                throw Error("calibrate: sample feature length does not match the auxiliary network");
            }
            features.col(static_cast<Eigen::Index>(j)) =
                Eigen::Map<const Vector>(f.data(), static_cast<Eigen::Index>(f.size()));
        }
        aux_out = model.aux->forward(features).row(0).transpose();
    }
    for (std::size_t j = 0; j < samples.size(); ++j) {
        const auto [k, pos] = where[j];
        double r = raw[k][static_cast<Eigen::Index>(pos)];
        if (model.aux) r += aux_out[static_cast<Eigen::Index>(j)];
        const auto p = to_probability(model.space(), r, model.config.clamp);
        out.raw[j] = r;
        out.probs[j] = p.prob;
        out.clamped += p.clamped ? 1 : 0;
    }
    return out;
}

// Samples per forward pass; the quadrature input grows as samples x steps columns.
constexpr std::size_t kEvalChunk = 8192;

} // namespace

BatchOutput evaluate_batch(const McnetModel& model, std::span<const Sample> samples, RangePolicy policy) {
    if (samples.size() <= kEvalChunk) return evaluate_chunk(model, samples, policy);
    BatchOutput out;
    out.raw.reserve(samples.size());
    out.probs.reserve(samples.size());
    for (std::size_t at = 0; at < samples.size(); at += kEvalChunk) {
        const auto part = evaluate_chunk(model, samples.subspan(at, std::min(kEvalChunk, samples.size() - at)), policy);
        out.raw.insert(out.raw.end(), part.raw.begin(), part.raw.end());
        out.probs.insert(out.probs.end(), part.probs.begin(), part.probs.end());
        out.clamped += part.clamped;
        out.out_of_range += part.out_of_range;
    }
    return out;
}

std::vector<double> calibrate_batch(const McnetModel& model, std::span<const Sample> samples, RangePolicy policy) {
    return evaluate_batch(model, samples, policy).probs;
}

double order_penalty(const McnetModel& model) {
    double total = 0;
    for (int c : order_contexts(model)) {
        for (int k = 0; k + 1 < model.partition.bins(); ++k) {
            const double b = model.partition.boundaries[k + 1];
            total += std::max(mcf_raw(model, k, b, c) - mcf_raw(model, k + 1, b, c), 0.0);
        }
    }
    return total;
}

LossTerms total_loss(const McnetModel& model, std::span<const Sample> batch, double alpha, double beta) {
    const auto ptrs = pointers(batch);
    return compute(model, ptrs, alpha, beta, false).terms;
}

LossGradient loss_and_gradient(const McnetModel& model, std::span<const Sample> batch, double alpha, double beta) {
    const auto ptrs = pointers(batch);
    auto c = compute(model, ptrs, alpha, beta, true);
    return {c.terms, std::move(c.gradient), c.clamped};
}

Eigen::Index parameter_count(const McnetModel& model) {
    Eigen::Index n = 0;
    for (const auto& b : model.bins) {
        n += b.f1.parameter_count() + b.f2.parameter_count();
        if (model.config.context == ContextMode::field) n += b.embedding.data().size();
    }
    if (model.aux) n += model.aux->parameter_count();
    return n;
}

VectorX<double> pack_parameters(const McnetModel& model) {
    Vector out(parameter_count(model));
    Eigen::Index at = 0;
    for (const auto& b : model.bins) {
        b.f1.pack(out.segment(at, b.f1.parameter_count()));
        at += b.f1.parameter_count();
        b.f2.pack(out.segment(at, b.f2.parameter_count()));
        at += b.f2.parameter_count();
        if (model.config.context == ContextMode::field) {
            out.segment(at, b.embedding.data().size()) = b.embedding.data().reshaped();
            at += b.embedding.data().size();
        }
    }
    if (model.aux) model.aux->pack(out.segment(at, model.aux->parameter_count()));
    return out;
}

void unpack_parameters(McnetModel& model, const VectorX<double>& params) {
    if (params.size() != parameter_count(model)) throw Error("unpack_parameters: size mismatch");
    Eigen::Index at = 0;
    for (auto& b : model.bins) {
        b.f1.unpack(params.segment(at, b.f1.parameter_count()));
        at += b.f1.parameter_count();
        b.f2.unpack(params.segment(at, b.f2.parameter_count()));
        at += b.f2.parameter_count();
        if (model.config.context == ContextMode::field) {
            b.embedding.data().reshaped() = params.segment(at, b.embedding.data().size());
            at += b.embedding.data().size();
        }
    }
    if (model.aux) model.aux->unpack(params.segment(at, model.aux->parameter_count()));
}

TrainResult train(const Dataset& validation, const TrainConfig& config) {
    config.validate();
    keep_buffers_on_heap();
    if (validation.empty()) throw Error("train: empty dataset");
    validation.validate();

    TrainResult result;
    const ScoreSpace space = config.resolved_space();
    std::vector<double> coords;
    coords.reserve(validation.size());
    for (const auto& s : validation.samples) coords.push_back(space == ScoreSpace::logit ? logit(s.score) : s.score);

    double lower = 0.0;
    double upper = 1.0;
    if (space == ScoreSpace::logit) {
        const auto [lo, hi] = std::minmax_element(coords.begin(), coords.end());
        lower = *lo - config.logit_margin;
        upper = *hi + config.logit_margin;
    }
    BinPartition partition = fit_bins(coords, config.bins, lower, upper);
    if (partition.bins() < config.bins) {
        result.warnings.push_back("tied scores merged " + std::to_string(config.bins) + " requested bins into " +
                                  std::to_string(partition.bins()));
    }
    result.model = init_model(config, std::move(partition), validation.field_count, validation.feature_dim);
    McnetModel& model = result.model;

    Vector params = pack_parameters(model);
    AdamState<double> adam(params.size(), config.resolved_learning_rate());
    std::mt19937_64 rng(derive_seed(config.seed, kShuffle));
    std::vector<std::size_t> order(validation.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<const Sample*> batch;
    batch.reserve(static_cast<std::size_t>(config.batch_size));

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        EpochStats stats;
        stats.epoch = epoch;
        long long clamped = 0;
        int batches = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
            batch.clear();
            for (std::size_t i = start; i < stop; ++i) batch.push_back(&validation.samples[order[i]]);
            Computation c = compute(model, batch, config.alpha, config.beta, true);
            if (!std::isfinite(c.terms.total())) {
                throw Error("train: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(batches) + " (logloss " + std::to_string(c.terms.logloss) + ", order " +
                            std::to_string(c.terms.order) + ", balance " + std::to_string(c.terms.balance) + ")");
            }
            adam_step<double>(params, c.gradient, adam);
            unpack_parameters(model, params);
            const double w = static_cast<double>(stop - start);
            stats.logloss += c.terms.logloss * w;
            stats.order += c.terms.order;
            stats.balance += c.terms.balance;
            clamped += c.clamped;
            ++batches;
        }
        const double n = static_cast<double>(validation.size());
        stats.logloss /= n;
        stats.order /= batches;
        stats.balance /= batches;
        stats.total = stats.logloss + config.beta * stats.order + config.alpha * stats.balance;
        stats.clamp_rate = static_cast<double>(clamped) / n;
        result.history.push_back(stats);
    }
    return result;
}

} // namespace mcnet
