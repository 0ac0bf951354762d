#include "snpnet/autoencoder.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "snpnet/error.h"
#include "snpnet/rng.h"

namespace snpnet::ae
{

namespace
{

double clamp_activation(double v)
{
    return std::clamp(v, kActivationClamp, 1.0 - kActivationClamp);
}

Eigen::MatrixXd sigmoid_layer(const Eigen::MatrixXd& w, const Eigen::VectorXd& b, const Eigen::MatrixXd& x)
{
    Eigen::MatrixXd z = (w * x).colwise() + b;
    return z.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

}  // namespace

void SparseAeConfig::validate() const
{
    if (hidden_size == 0 || !(sparsity_target > 0.0 && sparsity_target < 1.0) || !(sparsity_weight >= 0.0))
    {
        throw Error(Errc::ConfigInvalid, "sparse autoencoder needs hidden_size > 0, p in (0,1) and beta >= 0");
    }
    base.validate();
}

Eigen::VectorXd mean_hidden_activation(const nn::NetworkParams& p, const Eigen::MatrixXd& x)
{
    if (x.cols() == 0)
    {
        throw Error(Errc::EmptyBatch, "mean activation of an empty batch");
    }
    const auto t = nn::forward(p, x);
    return t.a[1].rowwise().mean();
}

double kl_penalty(double p, const Eigen::VectorXd& p_hat)
{
    double total = 0.0;
    for (Eigen::Index j = 0; j < p_hat.size(); ++j)
    {
        const double q = clamp_activation(p_hat(j));
        if (q == p)
        {
            continue;
        }
        total += p * std::log(p / q) + (1.0 - p) * std::log((1.0 - p) / (1.0 - q));
    }
    return total;
}

double sparse_cost(const nn::NetworkParams& params, const Eigen::MatrixXd& x, double lambda, double beta, double p)
{
    const double base = nn::cost(params, x, x, lambda, nn::Loss::SquaredError);
    if (beta == 0.0)
    {
        return base;
    }
    return base + beta * kl_penalty(p, mean_hidden_activation(params, x));
}

nn::Gradients sparse_backprop(const nn::NetworkParams& params, const Eigen::MatrixXd& x, double beta, double p,
                              const nn::DropoutMasks* masks)
{
    if (x.cols() == 0)
    {
        throw Error(Errc::EmptyBatch, "sparse backprop on an empty batch");
    }
    // First pass: activations and the batch mean of the hidden layer.
    const auto trace = nn::forward(params, x, masks);
    if (beta == 0.0)
    {
        return nn::backprop(params, trace, x, nn::Loss::SquaredError);
    }
    const Eigen::VectorXd p_hat = trace.a[1].rowwise().mean();
    nn::HiddenDeltaTerm extra;
    extra.layer = 1;
    extra.term = p_hat.unaryExpr([&](double v) {
        const double q = clamp_activation(v);
        return beta * (-p / q + (1.0 - p) / (1.0 - q));
    });
    // Second pass: per-example deltas with the sparsity term at the hidden layer.
    return nn::backprop(params, trace, x, nn::Loss::SquaredError, &extra);
}

nn::NetworkParams init_autoencoder(std::size_t input_dim, std::size_t hidden_size, std::uint64_t seed)
{
    const std::vector<nn::LayerSpec> specs{
        {input_dim, nn::Activation::Linear},
        {hidden_size, nn::Activation::Sigmoid},
        {input_dim, nn::Activation::Linear},
    };
    return nn::init_network(specs, seed);
}

AutoencoderResult train_autoencoder(const Eigen::MatrixXd& x, const SparseAeConfig& cfg)
{
    cfg.validate();
    if (x.cols() == 0)
    {
        throw Error(Errc::EmptyBatch, "autoencoder training needs examples");
    }
    nn::TrainConfig tc = cfg.base;
    tc.hidden_dropout = 0.0;
    tc.input_dropout = 0.0;
    tc.loss = nn::Loss::SquaredError;
    tc.frozen_layers = 0;

    const double beta = cfg.sparsity_weight;
    const double p = cfg.sparsity_target;
    const double lambda = tc.weight_decay;
    auto params = init_autoencoder(static_cast<std::size_t>(x.rows()), cfg.hidden_size, tc.seed);

    AutoencoderResult result;
    result.initial_cost = sparse_cost(params, x, lambda, beta, p);
    if (!std::isfinite(result.initial_cost))
    {
        throw Error(Errc::NonFiniteLoss, "autoencoder cost is not finite at initialization");
    }
    result.params = params;
    double best = result.initial_cost;

    const nn::BatchGradientFn grad = [&](const nn::NetworkParams& w, const Eigen::MatrixXd& xb,
                                         const Eigen::MatrixXd&, const nn::DropoutMasks* masks) {
        return sparse_backprop(w, xb, beta, p, masks);
    };
    auto state = nn::EpochState::start(params, tc.seed);
    for (std::size_t e = 0; e < tc.epochs_max; ++e)
    {
        nn::gradient_descent_epoch(params, x, x, tc, state, grad);
        const double c = sparse_cost(params, x, lambda, beta, p);
        if (!std::isfinite(c))
        {
            throw Error(Errc::NonFiniteLoss, "autoencoder cost diverged at epoch " + std::to_string(e + 1));
        }
        result.cost_history.push_back(c);
        if (c < best)
        {
            best = c;
            result.params = params;
        }
    }
    result.final_cost = best;
    result.mean_activation = mean_hidden_activation(result.params, x);
    return result;
}

void AutoencoderStack::check() const
{
    std::size_t width = input_dim;
    for (std::size_t k = 0; k < layers.size(); ++k)
    {
        const auto& l = layers[k];
        if (static_cast<std::size_t>(l.weights.cols()) != width
            || static_cast<std::size_t>(l.weights.rows()) != l.hidden_size
            || static_cast<std::size_t>(l.bias.size()) != l.hidden_size)
        {
            throw Error(Errc::ShapeMismatch, "stack layer " + std::to_string(k + 1) + " does not chain");
        }
        width = l.hidden_size;
    }
}

AutoencoderStack stack_train(const Eigen::MatrixXd& x, std::span<const SparseAeConfig> cfgs)
{
    if (cfgs.empty())
    {
        throw Error(Errc::ConfigInvalid, "stack needs at least one layer");
    }
    AutoencoderStack stack;
    stack.input_dim = static_cast<std::size_t>(x.rows());
    stack.sparsity_target = cfgs.front().sparsity_target;
    stack.sparsity_weight = cfgs.front().sparsity_weight;
    Eigen::MatrixXd input = x;
    for (const auto& cfg : cfgs)
    {
        auto r = train_autoencoder(input, cfg);
        StackLayer layer;
        layer.weights = r.params.weights[0];
        layer.bias = r.params.biases[0];
        layer.hidden_size = cfg.hidden_size;
        layer.mean_activation = r.mean_activation;
        input = sigmoid_layer(layer.weights, layer.bias, input);
        stack.layers.push_back(std::move(layer));
    }
    return stack;
}

AutoencoderStack stack_train(const Eigen::MatrixXd& x, std::span<const std::size_t> sizes, const SparseAeConfig& cfg)
{
    std::vector<SparseAeConfig> cfgs;
    for (std::size_t k = 0; k < sizes.size(); ++k)
    {
        if (sizes[k] == 0)
        {
            throw Error(Errc::ConfigInvalid, "stack sizes must be positive");
        }
        auto c = cfg;
        c.hidden_size = sizes[k];
        c.base.seed = k == 0 ? cfg.base.seed : derive_seed(cfg.base.seed, k);
        cfgs.push_back(c);
    }
    return stack_train(x, std::span<const SparseAeConfig>(cfgs));
}

Eigen::MatrixXd encode(const AutoencoderStack& stack, const Eigen::MatrixXd& x, std::size_t depth)
{
    if (depth < 1 || depth > stack.depth())
    {
        throw Error(Errc::DepthOutOfRange, "depth " + std::to_string(depth) + " outside 1.."
                                               + std::to_string(stack.depth()));
    }
    if (static_cast<std::size_t>(x.rows()) != stack.input_dim)
    {
        throw Error(Errc::ShapeMismatch, "input width does not match the stack");
    }
    Eigen::MatrixXd h = x;
    for (std::size_t k = 0; k < depth; ++k)
    {
        h = sigmoid_layer(stack.layers[k].weights, stack.layers[k].bias, h);
    }
    return h;
}

std::vector<std::size_t> clip_stack_sizes(std::span<const std::size_t> sizes, std::size_t input_dim)
{
    std::vector<std::size_t> out;
    std::size_t cap = input_dim;
    for (std::size_t k = 0; k < sizes.size(); ++k)
    {
        const std::size_t s = std::min(sizes[k], cap);
        if (s == 0)
        {
            break;
        }
        out.push_back(s);
        cap = s - 1;
    }
    return out;
}

nn::NetworkParams init_classifier_from_stack(const AutoencoderStack& stack, std::size_t depth,
                                             std::span<const nn::LayerSpec> head, std::uint64_t seed)
{
    stack.check();
    if (depth < 1 || depth > stack.depth())
    {
        throw Error(Errc::DepthOutOfRange, "depth " + std::to_string(depth) + " outside 1.."
                                               + std::to_string(stack.depth()));
    }
    const std::size_t latent = stack.layers[depth - 1].hidden_size;
    if (head.size() < 2 || head.front().size != latent)
    {
        throw Error(Errc::ShapeMismatch, "head must start at the latent width " + std::to_string(latent));
    }
    std::vector<nn::LayerSpec> head_specs(head.begin(), head.end());
    head_specs.front().activation = nn::Activation::Sigmoid;
    auto head_params = nn::init_network(head_specs, seed);

    nn::NetworkParams p;
    p.layers.push_back({stack.input_dim, nn::Activation::Linear});
    for (std::size_t k = 0; k < depth; ++k)
    {
        p.layers.push_back({stack.layers[k].hidden_size, nn::Activation::Sigmoid});
        p.weights.push_back(stack.layers[k].weights);
        p.biases.push_back(stack.layers[k].bias);
    }
    for (std::size_t l = 1; l < head_specs.size(); ++l)
    {
        p.layers.push_back(head_specs[l]);
        p.weights.push_back(std::move(head_params.weights[l - 1]));
        p.biases.push_back(std::move(head_params.biases[l - 1]));
    }
    p.check();
    return p;
}

}  // namespace snpnet::ae
