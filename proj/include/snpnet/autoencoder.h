#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "snpnet/network.h"

namespace snpnet::ae
{

struct SparseAeConfig
{
    std::size_t hidden_size = 50;
    double sparsity_target = 0.05;  // p
    double sparsity_weight = 3.0;   // beta
    nn::TrainConfig base;

    /// Throws ConfigInvalid.
    void validate() const;
};

inline constexpr double kActivationClamp = 1e-6;

/// Mean activation of each hidden unit (layer 1 of `p`) over the columns of X.
/// Throws EmptyBatch.
Eigen::VectorXd mean_hidden_activation(const nn::NetworkParams& p, const Eigen::MatrixXd& x);

/// sum_j KL(p || p_hat_j) with p_hat clamped to [1e-6, 1 - 1e-6].
double kl_penalty(double p, const Eigen::VectorXd& p_hat);

/// Reconstruction cost of X by itself plus beta * KL.
double sparse_cost(const nn::NetworkParams& params, const Eigen::MatrixXd& x, double lambda, double beta, double p);

/// Summed batch gradients of the reconstruction term plus the sparsity term.
/// With beta == 0 this is exactly nn::backprop. Throws EmptyBatch.
nn::Gradients sparse_backprop(const nn::NetworkParams& params, const Eigen::MatrixXd& x, double beta, double p,
                              const nn::DropoutMasks* masks = nullptr);

/// input -> hidden (sigmoid) -> output (linear), untied weights.
nn::NetworkParams init_autoencoder(std::size_t input_dim, std::size_t hidden_size, std::uint64_t seed);

struct AutoencoderResult
{
    nn::NetworkParams params;  // full encoder/decoder
    Eigen::VectorXd mean_activation;
    double initial_cost = 0.0;
    double final_cost = 0.0;
    std::vector<double> cost_history;  // sparse cost over X after each epoch
};

/// Gradient descent on the sparse cost; X holds one example per column.
/// Returns the lowest-cost parameters seen, including the initial ones.
AutoencoderResult train_autoencoder(const Eigen::MatrixXd& x, const SparseAeConfig& cfg);

struct StackLayer
{
    Eigen::MatrixXd weights;
    Eigen::VectorXd bias;
    std::size_t hidden_size = 0;
    Eigen::VectorXd mean_activation;
};

struct AutoencoderStack
{
    std::size_t input_dim = 0;
    std::vector<StackLayer> layers;
    double sparsity_target = 0.05;
    double sparsity_weight = 3.0;

    [[nodiscard]] std::size_t depth() const { return layers.size(); }
    /// Throws ShapeMismatch when layer dimensions do not chain.
    void check() const;
};

/// Layer k is trained on the deterministic encoding of X by layers 1..k-1.
/// `cfg.hidden_size` is replaced by each entry of `sizes`. The first layer uses
/// cfg.base.seed, layer k+1 uses derive_seed(cfg.base.seed, k).
AutoencoderStack stack_train(const Eigen::MatrixXd& x, std::span<const std::size_t> sizes, const SparseAeConfig& cfg);

/// Same with a separate configuration per layer (hidden sizes taken from cfgs).
AutoencoderStack stack_train(const Eigen::MatrixXd& x, std::span<const SparseAeConfig> cfgs);

/// Sigmoid encoding through the first `depth` layers. Throws DepthOutOfRange.
Eigen::MatrixXd encode(const AutoencoderStack& stack, const Eigen::MatrixXd& x, std::size_t depth);

/// Clips sizes so each is at most the input width (first) or one less than the
/// previous entry; sizes that would drop to zero are removed.
std::vector<std::size_t> clip_stack_sizes(std::span<const std::size_t> sizes, std::size_t input_dim);

/// The first `depth` encoders (sigmoid, weights copied) followed by a freshly
/// initialized head. head[0] describes the latent layer and must have the
/// latent width; the remaining entries are the head's layers. Throws
/// ShapeMismatch or DepthOutOfRange.
nn::NetworkParams init_classifier_from_stack(const AutoencoderStack& stack, std::size_t depth,
                                             std::span<const nn::LayerSpec> head, std::uint64_t seed);

}  // namespace snpnet::ae
