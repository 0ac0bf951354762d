#pragma once

// Central finite-difference checks of the analytic gradients.

#include <algorithm>
#include <cmath>
#include <functional>

#include <Eigen/Dense>

#include "snpnet/autoencoder.h"
#include "snpnet/network.h"
#include "snpnet/rng.h"

namespace snpnet::testing
{

/// |g - fd| / max(|g|, |fd|, floor), maximised over every parameter.
inline double max_gradient_error(nn::NetworkParams p, const nn::Gradients& g,
                                 const std::function<double(const nn::NetworkParams&)>& f, double eps = 1e-5,
                                 double floor = 1e-3)
{
    double worst = 0.0;
    auto check = [&](double& param, double analytic) {
        const double saved = param;
        param = saved + eps;
        const double up = f(p);
        param = saved - eps;
        const double down = f(p);
        param = saved;
        const double fd = (up - down) / (2.0 * eps);
        worst = std::max(worst, std::fabs(analytic - fd) / std::max({std::fabs(analytic), std::fabs(fd), floor}));
    };
    for (std::size_t l = 0; l < p.weights.size(); ++l)
    {
        for (Eigen::Index k = 0; k < p.weights[l].size(); ++k)
        {
            check(p.weights[l].data()[k], g.weights[l].data()[k]);
        }
        for (Eigen::Index k = 0; k < p.biases[l].size(); ++k)
        {
            check(p.biases[l](k), g.biases[l](k));
        }
    }
    return worst;
}

/// Rectifier pre-activations closer than this to 0 make the cost non-smooth
/// within the finite-difference step.
inline bool near_kink(const nn::NetworkParams& p, const Eigen::MatrixXd& x, double margin = 1e-4)
{
    const auto t = nn::forward(p, x);
    for (std::size_t l = 1; l < p.n_layers(); ++l)
    {
        if (p.layers[l].activation == nn::Activation::Rectifier && (t.z[l].array().abs() < margin).any())
        {
            return true;
        }
    }
    return false;
}

struct GradTrial
{
    nn::NetworkParams params;
    Eigen::MatrixXd x;
    Eigen::MatrixXd y;
    double lambda = 0.0;
    nn::Loss loss = nn::Loss::SquaredError;
};

/// Random net no larger than 10-8-5-2 with random activations, inputs and
/// targets in (0, 1); redrawn until no rectifier unit sits near its kink.
inline GradTrial random_grad_trial(std::uint64_t seed)
{
    Rng rng(seed);
    for (;;)
    {
        const std::size_t depth = 2 + rng.below(3);  // 2..4 layers
        const std::size_t caps[4] = {10, 8, 5, 2};
        std::vector<nn::LayerSpec> specs;
        for (std::size_t l = 0; l < depth; ++l)
        {
            const std::size_t cap = l + 1 == depth ? caps[3] : caps[std::min<std::size_t>(l, 2)];
            const auto f = static_cast<nn::Activation>(rng.below(3));
            specs.push_back({1 + rng.below(cap), f});
        }
        GradTrial t;
        t.loss = rng.bernoulli(0.5) ? nn::Loss::CrossEntropy : nn::Loss::SquaredError;
        if (t.loss == nn::Loss::CrossEntropy)
        {
            specs.back().activation = nn::Activation::Sigmoid;
        }
        t.params = nn::init_network(specs, rng.next());
        for (std::size_t l = 0; l < t.params.biases.size(); ++l)
        {
            t.params.biases[l] = Eigen::VectorXd::NullaryExpr(t.params.biases[l].size(),
                                                              [&](Eigen::Index) { return rng.uniform(-0.5, 0.5); });
        }
        const auto m = static_cast<Eigen::Index>(1 + rng.below(6));
        t.x = Eigen::MatrixXd::NullaryExpr(static_cast<Eigen::Index>(specs.front().size), m,
                                           [&](Eigen::Index, Eigen::Index) { return rng.uniform(-1.0, 1.0); });
        t.y = Eigen::MatrixXd::NullaryExpr(static_cast<Eigen::Index>(specs.back().size), m,
                                           [&](Eigen::Index, Eigen::Index) { return rng.uniform(0.05, 0.95); });
        t.lambda = rng.bernoulli(0.5) ? rng.uniform(0.0, 0.1) : 0.0;
        if (!near_kink(t.params, t.x))
        {
            return t;
        }
    }
}

inline double backprop_trial_error(const GradTrial& t)
{
    const auto g = nn::cost_gradient(t.params, t.x, t.y, t.lambda, t.loss);
    return max_gradient_error(t.params, g,
                              [&](const nn::NetworkParams& q) { return nn::cost(q, t.x, t.y, t.lambda, t.loss); });
}

/// Random autoencoder (input <= 10, hidden <= 8) checked against sparse_cost.
inline double sparse_trial_error(std::uint64_t seed)
{
    Rng rng(seed);
    const std::size_t in = 2 + rng.below(9);
    const std::size_t hidden = 1 + rng.below(8);
    auto p = ae::init_autoencoder(in, hidden, rng.next());
    for (auto& b : p.biases)
    {
        b = Eigen::VectorXd::NullaryExpr(b.size(), [&](Eigen::Index) { return rng.uniform(-0.5, 0.5); });
    }
    const auto m = static_cast<Eigen::Index>(1 + rng.below(8));
    const Eigen::MatrixXd x = Eigen::MatrixXd::NullaryExpr(static_cast<Eigen::Index>(in), m,
                                                           [&](Eigen::Index, Eigen::Index) { return rng.uniform(0.0, 1.0); });
    const double beta = rng.uniform(0.0, 5.0);
    const double target = rng.uniform(0.01, 0.3);
    const double lambda = rng.bernoulli(0.5) ? rng.uniform(0.0, 0.01) : 0.0;

    auto g = ae::sparse_backprop(p, x, beta, target);
    const double inv_m = 1.0 / static_cast<double>(m);
    for (std::size_t l = 0; l < g.weights.size(); ++l)
    {
        g.weights[l] = inv_m * g.weights[l] + lambda * p.weights[l];
        g.biases[l] *= inv_m;
    }
    return max_gradient_error(
        p, g, [&](const nn::NetworkParams& q) { return ae::sparse_cost(q, x, lambda, beta, target); });
}

}  // namespace snpnet::testing
