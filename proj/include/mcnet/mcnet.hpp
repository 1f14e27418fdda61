#pragma once

// Monotonic Calibration Network.
//
// Scores are split into K equal-frequency bins. Bin k owns
//   f^k(x, c) = integral_{p0}^{x} f1^k(t, h^k(c)) dt + f2^k(h^k(c))
// where f1^k ends in a sigmoid, so f^k is strictly increasing in x for a
// fixed context. x is the score itself (probability space) or its logit
// (logit space, required when the auxiliary network is enabled).

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mcnet/binning.hpp"
#include "mcnet/dataset.hpp"
#include "mcnet/loss.hpp"
#include "mcnet/nn.hpp"
#include "mcnet/quadrature.hpp"

namespace mcnet {

enum class ContextMode { none, field };
enum class ScoreSpace { probability, logit };
// Lower limit of every bin's integral.
enum class IntegralOrigin { zero, bin_left };

std::string_view to_string(ContextMode m);
std::string_view to_string(ScoreSpace s);
std::string_view to_string(IntegralOrigin o);
ContextMode context_mode_from_string(std::string_view s);
ScoreSpace score_space_from_string(std::string_view s);
IntegralOrigin integral_origin_from_string(std::string_view s);

struct TrainConfig {
    int bins = 20;
    int steps = 50;
    // Unset means the mode default: 1e-5 without context, 1e-4 with field context.
    std::optional<double> learning_rate;
    int batch_size = 2048;
    int epochs = 10;
    double beta = 1.0;
    double alpha = 1.0;
    std::uint64_t seed = 0;
    int embedding_dim = 128;
    std::vector<int> hidden = {128, 128};
    ContextMode context = ContextMode::none;
    ScoreSpace space = ScoreSpace::probability;
    IntegralOrigin origin = IntegralOrigin::zero;
    bool aux = false;
    std::vector<int> aux_hidden = {32};
    double clamp = kDefaultClamp;
    DiffNormalization diff_norm = DiffNormalization::total;
    // Widening of the data's logit range when placing b_0 and b_K in logit space.
    double logit_margin = 1e-3;

    // Small networks for desk-scale runs: K=10, hidden 16x16, d=8, lr 1e-3,
    // batch 128, logit score space integrated from each bin's left edge.
    static TrainConfig desk_profile();

    double resolved_learning_rate() const;
    ScoreSpace resolved_space() const { return aux ? ScoreSpace::logit : space; }
    void validate() const;
};

struct McfBin {
    DenseNet<double> f1;  // (1 + d) -> 1, sigmoid output
    DenseNet<double> f2;  // d -> 1, identity output
    EmbeddingTable<double> embedding;  // |C| x d in field mode, empty otherwise
};

struct McnetModel {
    TrainConfig config;
    BinPartition partition;
    std::vector<McfBin> bins;
    std::optional<DenseNet<double>> aux;
    CcqRule<double> rule;
    int field_count = 1;

    int embedding_dim() const { return config.embedding_dim; }
    ScoreSpace space() const { return config.resolved_space(); }
};

// Builds an untrained model over a given partition with seeded parameters.
McnetModel init_model(const TrainConfig& config, BinPartition partition, int field_count, int feature_dim = 0);

// Score -> bin coordinate (identity or logit).
double to_coordinate(const McnetModel& model, double score);

// Un-clamped f^k(x, c) for an explicit bin, at coordinate x. No range check on x.
double mcf_raw(const McnetModel& model, int bin, double x, int field);

// Calibrated probability of one score; throws if the score is outside the partition.
double mcf_eval(const McnetModel& model, double score, int field);

// Calibrated probability with the auxiliary network added in logit space.
double aux_eval(const McnetModel& model, const Sample& sample);

enum class RangePolicy {
    strict,  // out-of-partition scores throw
    clamp,   // out-of-partition coordinates are moved to the nearest boundary
};

struct BatchOutput {
    std::vector<double> raw;    // un-clamped output (probability or logit)
    std::vector<double> probs;  // clamped probabilities
    long long clamped = 0;       // samples whose probability hit the clamp
    long long out_of_range = 0;  // samples moved under RangePolicy::clamp
};

BatchOutput evaluate_batch(const McnetModel& model, std::span<const Sample> samples,
                           RangePolicy policy = RangePolicy::strict);

std::vector<double> calibrate_batch(const McnetModel& model, std::span<const Sample> samples,
                                    RangePolicy policy = RangePolicy::strict);

// Sum over contexts and adjacent bins of max(f^k(b_k, c) - f^{k+1}(b_k, c), 0).
double order_penalty(const McnetModel& model);

// Loss terms for one batch with the model's clamp and DIFF normalization.
LossTerms total_loss(const McnetModel& model, std::span<const Sample> batch, double alpha, double beta);

Eigen::Index parameter_count(const McnetModel& model);
VectorX<double> pack_parameters(const McnetModel& model);
void unpack_parameters(McnetModel& model, const VectorX<double>& params);

struct LossGradient {
    LossTerms terms;
    VectorX<double> gradient;  // packed like pack_parameters
    long long clamped = 0;
};

LossGradient loss_and_gradient(const McnetModel& model, std::span<const Sample> batch, double alpha, double beta);

struct EpochStats {
    int epoch = 0;
    double logloss = 0;
    double order = 0;
    double balance = 0;
    double total = 0;
    double clamp_rate = 0;
};

struct TrainResult {
    McnetModel model;
    std::vector<EpochStats> history;
    std::vector<std::string> warnings;
};

TrainResult train(const Dataset& validation, const TrainConfig& config);

} // namespace mcnet
