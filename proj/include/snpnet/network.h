#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "snpnet/rng.h"

namespace snpnet::nn
{

enum class Activation
{
    Rectifier,
    Sigmoid,
    Linear,
};

std::string activation_name(Activation a);
Activation parse_activation(const std::string& s);

struct LayerSpec
{
    std::size_t size = 1;
    Activation activation = Activation::Rectifier;

    bool operator==(const LayerSpec&) const = default;
};

enum class Loss
{
    SquaredError,  // (1/m) sum 1/2 ||h(x) - y||^2
    CrossEntropy,  // (1/m) sum -[y log h + (1-y) log(1-h)]
};

std::string loss_name(Loss l);
Loss parse_loss(const std::string& s);

/// Dense feedforward parameters. layers[0] is the input layer (its activation
/// is unused); weights[l] maps layer l to layer l+1 and has shape
/// layers[l+1].size x layers[l].size.
struct NetworkParams
{
    std::vector<LayerSpec> layers;
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;

    [[nodiscard]] std::size_t n_layers() const { return layers.size(); }
    [[nodiscard]] std::size_t input_size() const { return layers.front().size; }
    [[nodiscard]] std::size_t output_size() const { return layers.back().size; }
    /// Throws ShapeMismatch when shapes do not chain.
    void check() const;

    bool operator==(const NetworkParams& other) const;
};

/// Per-parameter gradients, shaped like NetworkParams.
struct Gradients
{
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;

    static Gradients zeros_like(const NetworkParams& p);
    [[nodiscard]] bool all_finite() const;
};

/// Inverted-dropout masks per layer (entries 0 or 1/(1-rate)); masks[l] is
/// empty when layer l is not dropped. The output layer is never dropped.
struct DropoutMasks
{
    std::vector<Eigen::MatrixXd> masks;
};

/// Column-per-example record of a forward pass. z[0] is empty; a[0] is the
/// (possibly dropped) input.
struct ActivationTrace
{
    std::vector<Eigen::MatrixXd> z;
    std::vector<Eigen::MatrixXd> a;
    DropoutMasks masks;

    [[nodiscard]] const Eigen::MatrixXd& output() const { return a.back(); }
};

struct TrainConfig
{
    double learning_rate = 0.005;
    double rate_annealing = 1e-6;
    double rate_decay = 1.0;
    double weight_decay = 0.0;
    double momentum_start = 0.5;
    double momentum_ramp = 1e-6;
    double momentum_stable = 0.0;
    std::size_t epochs_max = 100;
    double hidden_dropout = 0.5;
    double input_dropout = 0.0;
    std::uint64_t seed = 1;
    std::size_t early_stop_patience = 5;
    std::size_t batch_size = 32;  // 0 = full batch
    Loss loss = Loss::CrossEntropy;
    // Weight matrices counted from the input side that are not updated.
    std::size_t frozen_layers = 0;

    static constexpr std::size_t kNoEarlyStop = std::numeric_limits<std::size_t>::max();

    /// Throws ConfigInvalid.
    void validate() const;
};

double activate(Activation f, double z);
double activation_derivative(Activation f, double z, double a);

/// Uniform in +-sqrt(6 / (fan_in + fan_out)); zero biases.
NetworkParams init_network(std::span<const LayerSpec> layers, std::uint64_t seed);

DropoutMasks sample_dropout(const NetworkParams& p, Eigen::Index batch, double hidden_rate, double input_rate,
                            Rng& rng);

/// X is input_size x m. Without masks no dropout and no scaling is applied.
ActivationTrace forward(const NetworkParams& p, const Eigen::MatrixXd& x, const DropoutMasks* masks = nullptr);

/// Batch cost including the (lambda/2) sum W^2 decay term (biases excluded).
double cost(const NetworkParams& p, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, double lambda,
            Loss loss = Loss::SquaredError);

/// Extra term added to W^T delta at one hidden layer before the activation
/// derivative, identical for every example.
struct HiddenDeltaTerm
{
    std::size_t layer = 1;
    Eigen::VectorXd term;
};

/// Sum over the batch of per-example gradients (the Delta W / Delta b
/// accumulators): no 1/m scaling, no decay.
Gradients backprop(const NetworkParams& p, const ActivationTrace& trace, const Eigen::MatrixXd& y, Loss loss,
                   const HiddenDeltaTerm* extra = nullptr);

/// Full gradient of cost(): (1/m) Delta + lambda W for weights, (1/m) Delta for biases.
Gradients cost_gradient(const NetworkParams& p, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, double lambda,
                        Loss loss = Loss::SquaredError);

/// Returns the batch's summed gradients (Delta W, Delta b) given the batch
/// inputs, targets and the masks sampled for it (may be null).
using BatchGradientFn = std::function<Gradients(const NetworkParams&, const Eigen::MatrixXd&,
                                                const Eigen::MatrixXd&, const DropoutMasks*)>;

struct EpochState
{
    std::size_t epoch = 0;
    double samples_seen = 0.0;
    std::vector<Eigen::MatrixXd> velocity_w;
    std::vector<Eigen::VectorXd> velocity_b;
    Rng rng{0};

    static EpochState start(const NetworkParams& p, std::uint64_t seed);
};

double effective_learning_rate(const TrainConfig& cfg, double samples_seen, std::size_t weight_index,
                               std::size_t n_weights);
double momentum_at(const TrainConfig& cfg, double samples_seen);

/// One pass over the data: shuffled mini-batches (or the full batch), update
/// W <- W + v, v <- mu v - alpha_eff [(1/m) Delta W + lambda W]. Throws
/// NonFiniteLoss before applying a non-finite update.
void gradient_descent_epoch(NetworkParams& p, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                            const TrainConfig& cfg, EpochState& state, const BatchGradientFn& grad = {});

/// Targets for a binary head: width 1 -> y; width 2 -> (1 - y, y).
Eigen::MatrixXd binary_targets(std::span<const int> labels, std::size_t output_width);

/// Case probability per column of X (dropout disabled).
std::vector<double> predict(const NetworkParams& p, const Eigen::MatrixXd& x);

struct EpochRecord
{
    std::size_t epoch = 0;
    double train_logloss = 0.0;
    double valid_logloss = 0.0;
    double train_auc = 0.0;
    double valid_auc = 0.0;
    double valid_misclass = 0.0;
};

struct TrainResult
{
    NetworkParams params;
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;
};

/// Trains a binary classifier. After each epoch the validation
/// misclassification (threshold 0.5) is recorded; training stops once it has
/// not improved for `early_stop_patience` epochs (equal misclassification
/// with lower validation logloss counts as an improvement) and the best
/// epoch's parameters are returned.
TrainResult train(NetworkParams params, const Eigen::MatrixXd& train_x, std::span<const int> train_y,
                  const Eigen::MatrixXd& valid_x, std::span<const int> valid_y, const TrainConfig& cfg);

void write_history_csv(const std::string& path, std::span<const EpochRecord> history);

}  // namespace snpnet::nn
