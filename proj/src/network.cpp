#include "snpnet/network.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "snpnet/error.h"
#include "snpnet/metrics.h"

namespace snpnet::nn
{

namespace
{

Eigen::MatrixXd apply_activation(Activation f, const Eigen::MatrixXd& z)
{
    switch (f)
    {
        case Activation::Rectifier: return z.cwiseMax(0.0);
        case Activation::Sigmoid: return z.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
        case Activation::Linear: return z;
    }
    return z;
}

Eigen::MatrixXd derivative(Activation f, const Eigen::MatrixXd& z, const Eigen::MatrixXd& a)
{
    switch (f)
    {
        case Activation::Rectifier: return z.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; });
        case Activation::Sigmoid: return a.array() * (1.0 - a.array());
        case Activation::Linear: return Eigen::MatrixXd::Ones(z.rows(), z.cols());
    }
    return Eigen::MatrixXd::Ones(z.rows(), z.cols());
}

// Activation before dropout scaling; for the derivative of the sigmoid the
// undropped value is needed.
Eigen::MatrixXd undropped(const NetworkParams& p, const ActivationTrace& t, std::size_t l)
{
    return apply_activation(p.layers[l].activation, t.z[l]);
}

double decay_sum(const NetworkParams& p)
{
    double s = 0.0;
    for (const auto& w : p.weights)
    {
        s += w.squaredNorm();
    }
    return s;
}

Eigen::MatrixXd select_columns(const Eigen::MatrixXd& m, std::span<const std::size_t> cols)
{
    Eigen::MatrixXd out(m.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k)
    {
        out.col(static_cast<Eigen::Index>(k)) = m.col(static_cast<Eigen::Index>(cols[k]));
    }
    return out;
}

}  // namespace

std::string activation_name(Activation a)
{
    switch (a)
    {
        case Activation::Rectifier: return "rectifier";
        case Activation::Sigmoid: return "sigmoid";
        case Activation::Linear: return "linear";
    }
    return "linear";
}

Activation parse_activation(const std::string& s)
{
    if (s == "rectifier") return Activation::Rectifier;
    if (s == "sigmoid") return Activation::Sigmoid;
    if (s == "linear") return Activation::Linear;
    throw Error(Errc::ConfigInvalid, "unknown activation '" + s + "'");
}

std::string loss_name(Loss l)
{
    return l == Loss::SquaredError ? "squared_error" : "cross_entropy";
}

Loss parse_loss(const std::string& s)
{
    if (s == "squared_error") return Loss::SquaredError;
    if (s == "cross_entropy") return Loss::CrossEntropy;
    throw Error(Errc::ConfigInvalid, "unknown loss '" + s + "'");
}

void NetworkParams::check() const
{
    if (layers.size() < 2 || weights.size() != layers.size() - 1 || biases.size() != weights.size())
    {
        throw Error(Errc::ShapeMismatch, "network needs >= 2 layers and one weight matrix per connection");
    }
    for (std::size_t l = 0; l < weights.size(); ++l)
    {
        if (static_cast<std::size_t>(weights[l].rows()) != layers[l + 1].size
            || static_cast<std::size_t>(weights[l].cols()) != layers[l].size
            || static_cast<std::size_t>(biases[l].size()) != layers[l + 1].size)
        {
            throw Error(Errc::ShapeMismatch, "weight shapes do not chain at layer " + std::to_string(l));
        }
    }
}

bool NetworkParams::operator==(const NetworkParams& other) const
{
    if (layers != other.layers || weights.size() != other.weights.size())
    {
        return false;
    }
    for (std::size_t l = 0; l < weights.size(); ++l)
    {
        if (weights[l].rows() != other.weights[l].rows() || weights[l].cols() != other.weights[l].cols()
            || weights[l] != other.weights[l] || biases[l] != other.biases[l])
        {
            return false;
        }
    }
    return true;
}

Gradients Gradients::zeros_like(const NetworkParams& p)
{
    Gradients g;
    for (std::size_t l = 0; l < p.weights.size(); ++l)
    {
        g.weights.push_back(Eigen::MatrixXd::Zero(p.weights[l].rows(), p.weights[l].cols()));
        g.biases.push_back(Eigen::VectorXd::Zero(p.biases[l].size()));
    }
    return g;
}

bool Gradients::all_finite() const
{
    for (std::size_t l = 0; l < weights.size(); ++l)
    {
        if (!weights[l].allFinite() || !biases[l].allFinite())
        {
            return false;
        }
    }
    return true;
}

void TrainConfig::validate() const
{
    const bool ok = learning_rate > 0.0 && rate_annealing >= 0.0 && rate_decay > 0.0 && weight_decay >= 0.0
                    && momentum_start >= 0.0 && momentum_start < 1.0 && momentum_stable >= 0.0
                    && momentum_stable < 1.0 && momentum_ramp >= 0.0 && hidden_dropout >= 0.0
                    && hidden_dropout < 1.0 && input_dropout >= 0.0 && input_dropout < 1.0;
    if (!ok)
    {
        throw Error(Errc::ConfigInvalid, "training configuration out of range");
    }
}

double activate(Activation f, double z)
{
    switch (f)
    {
        case Activation::Rectifier: return z > 0.0 ? z : 0.0;
        case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-z));
        case Activation::Linear: return z;
    }
    return z;
}

double activation_derivative(Activation f, double z, double a)
{
    switch (f)
    {
        case Activation::Rectifier: return z > 0.0 ? 1.0 : 0.0;
        case Activation::Sigmoid: return a * (1.0 - a);
        case Activation::Linear: return 1.0;
    }
    return 1.0;
}

NetworkParams init_network(std::span<const LayerSpec> layers, std::uint64_t seed)
{
    if (layers.size() < 2)
    {
        throw Error(Errc::ShapeMismatch, "a network needs at least an input and an output layer");
    }
    NetworkParams p;
    p.layers.assign(layers.begin(), layers.end());
    Rng rng(seed);
    for (std::size_t l = 0; l + 1 < layers.size(); ++l)
    {
        const auto rows = static_cast<Eigen::Index>(layers[l + 1].size);
        const auto cols = static_cast<Eigen::Index>(layers[l].size);
        const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
        Eigen::MatrixXd w(rows, cols);
        for (Eigen::Index c = 0; c < cols; ++c)
        {
            for (Eigen::Index r = 0; r < rows; ++r)
            {
                w(r, c) = rng.uniform(-bound, bound);
            }
        }
        p.weights.push_back(std::move(w));
        p.biases.push_back(Eigen::VectorXd::Zero(rows));
    }
    return p;
}

DropoutMasks sample_dropout(const NetworkParams& p, Eigen::Index batch, double hidden_rate, double input_rate,
                            Rng& rng)
{
    DropoutMasks m;
    m.masks.resize(p.n_layers());
    auto fill = [&](std::size_t l, double rate) {
        if (rate <= 0.0)
        {
            return;
        }
        const double keep_scale = 1.0 / (1.0 - rate);
        Eigen::MatrixXd mask(static_cast<Eigen::Index>(p.layers[l].size), batch);
        for (Eigen::Index c = 0; c < mask.cols(); ++c)
        {
            for (Eigen::Index r = 0; r < mask.rows(); ++r)
            {
                mask(r, c) = rng.uniform() < rate ? 0.0 : keep_scale;
            }
        }
        m.masks[l] = std::move(mask);
    };
    fill(0, input_rate);
    for (std::size_t l = 1; l + 1 < p.n_layers(); ++l)
    {
        fill(l, hidden_rate);
    }
    return m;
}

ActivationTrace forward(const NetworkParams& p, const Eigen::MatrixXd& x, const DropoutMasks* masks)
{
    if (static_cast<std::size_t>(x.rows()) != p.input_size())
    {
        throw Error(Errc::ShapeMismatch, "input has " + std::to_string(x.rows()) + " rows, network expects "
                                             + std::to_string(p.input_size()));
    }
    auto mask_for = [&](std::size_t l) -> const Eigen::MatrixXd* {
        if (masks == nullptr || l >= masks->masks.size() || masks->masks[l].size() == 0 || l + 1 == p.n_layers())
        {
            return nullptr;
        }
        return &masks->masks[l];
    };
    ActivationTrace t;
    t.z.resize(p.n_layers());
    t.a.resize(p.n_layers());
    if (masks != nullptr)
    {
        t.masks = *masks;
    }
    t.a[0] = x;
    if (const auto* m = mask_for(0))
    {
        t.a[0] = t.a[0].cwiseProduct(*m);
    }
    for (std::size_t l = 1; l < p.n_layers(); ++l)
    {
        t.z[l] = (p.weights[l - 1] * t.a[l - 1]).colwise() + p.biases[l - 1];
        t.a[l] = apply_activation(p.layers[l].activation, t.z[l]);
        if (const auto* m = mask_for(l))
        {
            t.a[l] = t.a[l].cwiseProduct(*m);
        }
    }
    return t;
}

double cost(const NetworkParams& p, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, double lambda, Loss loss)
{
    const auto t = forward(p, x);
    const auto& h = t.output();
    if (h.rows() != y.rows() || h.cols() != y.cols())
    {
        throw Error(Errc::ShapeMismatch, "targets do not match network output");
    }
    const double m = static_cast<double>(x.cols());
    double data = 0.0;
    if (loss == Loss::SquaredError)
    {
        data = 0.5 * (h - y).squaredNorm();
    }
    else
    {
        for (Eigen::Index c = 0; c < h.cols(); ++c)
        {
            for (Eigen::Index r = 0; r < h.rows(); ++r)
            {
                const double a = std::clamp(h(r, c), 1e-15, 1.0 - 1e-15);
                data -= y(r, c) * std::log(a) + (1.0 - y(r, c)) * std::log(1.0 - a);
            }
        }
    }
    return data / m + 0.5 * lambda * decay_sum(p);
}

Gradients backprop(const NetworkParams& p, const ActivationTrace& trace, const Eigen::MatrixXd& y, Loss loss,
                   const HiddenDeltaTerm* extra)
{
    const std::size_t last = p.n_layers() - 1;
    const auto& out = trace.a[last];
    if (out.rows() != y.rows() || out.cols() != y.cols())
    {
        throw Error(Errc::ShapeMismatch, "targets do not match network output");
    }
    const Activation out_f = p.layers[last].activation;
    Eigen::MatrixXd delta;
    if (loss == Loss::SquaredError)
    {
        delta = (-(y - out)).cwiseProduct(derivative(out_f, trace.z[last], out));
    }
    else if (out_f == Activation::Sigmoid)
    {
        delta = out - y;
    }
    else
    {
        const Eigen::ArrayXXd a = out.array().cwiseMax(1e-15).cwiseMin(1.0 - 1e-15);
        const Eigen::ArrayXXd dloss = -y.array() / a + (1.0 - y.array()) / (1.0 - a);
        delta = (dloss * derivative(out_f, trace.z[last], out).array()).matrix();
    }

    Gradients g;
    g.weights.resize(p.weights.size());
    g.biases.resize(p.biases.size());
    for (std::size_t l = last; l-- > 0;)
    {
        g.weights[l] = delta * trace.a[l].transpose();
        g.biases[l] = delta.rowwise().sum();
        if (l == 0)
        {
            break;
        }
        Eigen::MatrixXd back = p.weights[l].transpose() * delta;
        if (extra != nullptr && extra->layer == l)
        {
            back.colwise() += extra->term;
        }
        const Eigen::MatrixXd a_plain = undropped(p, trace, l);
        delta = back.cwiseProduct(derivative(p.layers[l].activation, trace.z[l], a_plain));
        if (l < trace.masks.masks.size() && trace.masks.masks[l].size() != 0)
        {
            delta = delta.cwiseProduct(trace.masks.masks[l]);
        }
    }
    return g;
}

Gradients cost_gradient(const NetworkParams& p, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, double lambda,
                        Loss loss)
{
    const auto t = forward(p, x);
    auto g = backprop(p, t, y, loss);
    const double inv_m = 1.0 / static_cast<double>(x.cols());
    for (std::size_t l = 0; l < g.weights.size(); ++l)
    {
        g.weights[l] = inv_m * g.weights[l] + lambda * p.weights[l];
        g.biases[l] *= inv_m;
    }
    return g;
}

EpochState EpochState::start(const NetworkParams& p, std::uint64_t seed)
{
    EpochState s;
    s.rng = Rng(seed);
    for (std::size_t l = 0; l < p.weights.size(); ++l)
    {
        s.velocity_w.push_back(Eigen::MatrixXd::Zero(p.weights[l].rows(), p.weights[l].cols()));
        s.velocity_b.push_back(Eigen::VectorXd::Zero(p.biases[l].size()));
    }
    return s;
}

double effective_learning_rate(const TrainConfig& cfg, double samples_seen, std::size_t weight_index,
                               std::size_t n_weights)
{
    const double annealed = cfg.learning_rate / (1.0 + cfg.rate_annealing * samples_seen);
    const auto from_output = static_cast<double>(n_weights - 1 - weight_index);
    return annealed * std::pow(cfg.rate_decay, from_output);
}

double momentum_at(const TrainConfig& cfg, double samples_seen)
{
    if (cfg.momentum_ramp <= 0.0)
    {
        return cfg.momentum_stable;
    }
    const double frac = std::min(1.0, samples_seen / cfg.momentum_ramp);
    return cfg.momentum_start + (cfg.momentum_stable - cfg.momentum_start) * frac;
}

void gradient_descent_epoch(NetworkParams& p, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                            const TrainConfig& cfg, EpochState& state, const BatchGradientFn& grad)
{
    const auto m = static_cast<std::size_t>(x.cols());
    if (m == 0)
    {
        throw Error(Errc::EmptyBatch, "no training examples");
    }
    if (state.velocity_w.size() != p.weights.size())
    {
        state = EpochState::start(p, cfg.seed);
    }
    const bool full_batch = cfg.batch_size == 0 || cfg.batch_size >= m;
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    if (!full_batch)
    {
        state.rng.shuffle(order.begin(), order.end());
    }
    const std::size_t step = full_batch ? m : cfg.batch_size;
    const bool dropout = cfg.hidden_dropout > 0.0 || cfg.input_dropout > 0.0;

    for (std::size_t start = 0; start < m; start += step)
    {
        const std::size_t stop = std::min(m, start + step);
        const std::span<const std::size_t> idx(order.data() + start, stop - start);
        const Eigen::MatrixXd xb = full_batch ? x : select_columns(x, idx);
        const Eigen::MatrixXd yb = full_batch ? y : select_columns(y, idx);
        const auto bm = static_cast<Eigen::Index>(idx.size());

        DropoutMasks masks;
        if (dropout)
        {
            masks = sample_dropout(p, bm, cfg.hidden_dropout, cfg.input_dropout, state.rng);
        }
        const DropoutMasks* mp = dropout ? &masks : nullptr;
        Gradients delta = grad ? grad(p, xb, yb, mp) : backprop(p, forward(p, xb, mp), yb, cfg.loss);
        if (!delta.all_finite())
        {
            throw Error(Errc::NonFiniteLoss, "gradient became non-finite at epoch " + std::to_string(state.epoch));
        }

        const double inv_m = 1.0 / static_cast<double>(bm);
        const double mu = momentum_at(cfg, state.samples_seen);
        for (std::size_t l = cfg.frozen_layers; l < p.weights.size(); ++l)
        {
            const double alpha = effective_learning_rate(cfg, state.samples_seen, l, p.weights.size());
            state.velocity_w[l] = mu * state.velocity_w[l]
                                  - alpha * (inv_m * delta.weights[l] + cfg.weight_decay * p.weights[l]);
            state.velocity_b[l] = mu * state.velocity_b[l] - alpha * (inv_m * delta.biases[l]);
            p.weights[l] += state.velocity_w[l];
            p.biases[l] += state.velocity_b[l];
        }
        state.samples_seen += static_cast<double>(bm);
    }
    ++state.epoch;
}

Eigen::MatrixXd binary_targets(std::span<const int> labels, std::size_t output_width)
{
    if (output_width != 1 && output_width != 2)
    {
        throw Error(Errc::ShapeMismatch, "binary head must have 1 or 2 outputs");
    }
    Eigen::MatrixXd y(static_cast<Eigen::Index>(output_width), static_cast<Eigen::Index>(labels.size()));
    for (std::size_t i = 0; i < labels.size(); ++i)
    {
        const double v = labels[i] == 1 ? 1.0 : 0.0;
        if (output_width == 1)
        {
            y(0, static_cast<Eigen::Index>(i)) = v;
        }
        else
        {
            y(0, static_cast<Eigen::Index>(i)) = 1.0 - v;
            y(1, static_cast<Eigen::Index>(i)) = v;
        }
    }
    return y;
}

std::vector<double> predict(const NetworkParams& p, const Eigen::MatrixXd& x)
{
    const auto t = forward(p, x);
    const auto& out = t.output();
    const Eigen::Index row = out.rows() == 2 ? 1 : 0;
    std::vector<double> probs(static_cast<std::size_t>(out.cols()));
    for (Eigen::Index c = 0; c < out.cols(); ++c)
    {
        probs[static_cast<std::size_t>(c)] = out(row, c);
    }
    return probs;
}

TrainResult train(NetworkParams params, const Eigen::MatrixXd& train_x, std::span<const int> train_y,
                  const Eigen::MatrixXd& valid_x, std::span<const int> valid_y, const TrainConfig& cfg)
{
    cfg.validate();
    params.check();
    const Eigen::MatrixXd targets = binary_targets(train_y, params.output_size());
    const std::vector<int> ty(train_y.begin(), train_y.end());
    const std::vector<int> vy(valid_y.begin(), valid_y.end());
    auto safe_auc = [](const metrics::ScoredLabels& sl) {
        return sl.positives() == 0 || sl.negatives() == 0 ? std::numeric_limits<double>::quiet_NaN()
                                                           : metrics::auc_rank(sl);
    };

    TrainResult result;
    result.params = params;
    double best_mis = std::numeric_limits<double>::infinity();
    double best_ll = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;
    auto state = EpochState::start(params, cfg.seed);
    for (std::size_t e = 1; e <= cfg.epochs_max; ++e)
    {
        gradient_descent_epoch(params, train_x, targets, cfg, state);

        const metrics::ScoredLabels tr{predict(params, train_x), ty};
        const metrics::ScoredLabels va{predict(params, valid_x), vy};
        EpochRecord rec;
        rec.epoch = e;
        rec.train_logloss = metrics::logloss(tr);
        rec.valid_logloss = metrics::logloss(va);
        rec.train_auc = safe_auc(tr);
        rec.valid_auc = safe_auc(va);
        rec.valid_misclass = metrics::misclassification(va, 0.5);
        result.history.push_back(rec);
        if (!std::isfinite(rec.train_logloss))
        {
            throw Error(Errc::NonFiniteLoss, "training loss became non-finite at epoch " + std::to_string(e));
        }

        const bool better = rec.valid_misclass < best_mis
                            || (rec.valid_misclass == best_mis && rec.valid_logloss < best_ll);
        if (better)
        {
            best_mis = rec.valid_misclass;
            best_ll = rec.valid_logloss;
            result.params = params;
            result.best_epoch = e;
            since_best = 0;
        }
        else if (++since_best >= cfg.early_stop_patience)
        {
            break;
        }
    }
    return result;
}

void write_history_csv(const std::string& path, std::span<const EpochRecord> history)
{
    std::ofstream out(path);
    out.precision(17);
    out << "epoch,train_logloss,valid_logloss,train_auc,valid_auc,valid_misclass\n";
    for (const auto& r : history)
    {
        out << r.epoch << ',' << r.train_logloss << ',' << r.valid_logloss << ',' << r.train_auc << ','
            << r.valid_auc << ',' << r.valid_misclass << '\n';
    }
    if (!out)
    {
        throw Error(Errc::IoFailure, "failed writing " + path);
    }
}

}  // namespace snpnet::nn
