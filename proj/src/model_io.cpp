#include "snpnet/model_io.h"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

#include "json.hpp"

#include "snpnet/error.h"

namespace snpnet::io
{

namespace
{

constexpr std::array<char, 8> kMagic{'S', 'N', 'P', 'N', 'E', 'T', 'M', '\0'};

static_assert(std::endian::native == std::endian::little, "model container assumes a little-endian host");

class Writer
{
public:
    explicit Writer(std::ofstream& out) : out_(out) {}

    template <typename T>
    void put(T v)
    {
        out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
    }

    void put_doubles(const double* data, std::size_t n)
    {
        out_.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
    }

    void put_bytes(const std::string& s)
    {
        put<std::uint64_t>(s.size());
        out_.write(s.data(), static_cast<std::streamsize>(s.size()));
    }

private:
    std::ofstream& out_;
};

class Reader
{
public:
    Reader(std::ifstream& in, std::string name) : in_(in), name_(std::move(name)) {}

    template <typename T>
    T get()
    {
        T v{};
        read(reinterpret_cast<char*>(&v), sizeof(T));
        return v;
    }

    void get_doubles(double* data, std::size_t n) { read(reinterpret_cast<char*>(data), n * sizeof(double)); }

    std::string get_bytes()
    {
        const auto n = get<std::uint64_t>();
        if (n > (std::uint64_t{1} << 32))
        {
            throw Error(Errc::TruncatedFile, name_ + ": implausible string length");
        }
        std::string s(n, '\0');
        read(s.data(), n);
        return s;
    }

private:
    void read(char* dst, std::size_t n)
    {
        in_.read(dst, static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n)
        {
            throw Error(Errc::TruncatedFile, name_ + ": unexpected end of model file");
        }
    }

    std::ifstream& in_;
    std::string name_;
};

nlohmann::ordered_json sidecar(const ModelFile& m)
{
    nlohmann::ordered_json j;
    j["format"] = "snpnet-model";
    j["version"] = kModelVersion;
    j["seed"] = m.seed;
    auto layers = nlohmann::ordered_json::array();
    for (const auto& l : m.params.layers)
    {
        layers.push_back({{"size", l.size}, {"activation", nn::activation_name(l.activation)}});
    }
    j["layers"] = layers;
    j["weight_matrices"] = m.params.weights.size();
    j["config"] = nlohmann::ordered_json::parse(m.config_json, nullptr, false);
    if (j["config"].is_discarded())
    {
        j["config"] = m.config_json;
    }
    return j;
}

}  // namespace

std::filesystem::path sidecar_path(const std::filesystem::path& path)
{
    return std::filesystem::path(path.string() + ".json");
}

void write_model(const std::filesystem::path& path, const ModelFile& model)
{
    model.params.check();
    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out)
        {
            throw Error(Errc::IoFailure, "cannot open " + path.string() + " for writing");
        }
        Writer w(out);
        out.write(kMagic.data(), kMagic.size());
        w.put<std::uint32_t>(kModelVersion);
        w.put<std::uint64_t>(model.seed);
        w.put<std::uint32_t>(static_cast<std::uint32_t>(model.params.layers.size()));
        for (const auto& l : model.params.layers)
        {
            w.put<std::uint64_t>(l.size);
            w.put<std::uint8_t>(static_cast<std::uint8_t>(l.activation));
        }
        for (std::size_t l = 0; l < model.params.weights.size(); ++l)
        {
            const auto& wm = model.params.weights[l];
            const auto& bv = model.params.biases[l];
            w.put_doubles(wm.data(), static_cast<std::size_t>(wm.size()));
            w.put_doubles(bv.data(), static_cast<std::size_t>(bv.size()));
        }
        w.put_bytes(model.config_json);
        if (!out)
        {
            throw Error(Errc::IoFailure, "failed writing " + path.string());
        }
    }
    std::ofstream side(sidecar_path(path));
    side << sidecar(model).dump(2) << '\n';
    if (!side)
    {
        throw Error(Errc::IoFailure, "failed writing " + sidecar_path(path).string());
    }
}

ModelFile read_model(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
    {
        throw Error(Errc::IoFailure, "cannot open " + path.string());
    }
    std::array<char, 8> magic{};
    in.read(magic.data(), magic.size());
    if (in.gcount() != static_cast<std::streamsize>(magic.size()) || magic != kMagic)
    {
        throw Error(Errc::BadMagic, path.string() + " is not a model file");
    }
    Reader r(in, path.string());
    const auto version = r.get<std::uint32_t>();
    if (version != kModelVersion)
    {
        throw Error(Errc::ModeUnsupported, "model version " + std::to_string(version) + " is not supported");
    }
    ModelFile m;
    m.seed = r.get<std::uint64_t>();
    const auto n_layers = r.get<std::uint32_t>();
    if (n_layers < 2 || n_layers > 4096)
    {
        throw Error(Errc::ParseError, "implausible layer count in " + path.string());
    }
    for (std::uint32_t l = 0; l < n_layers; ++l)
    {
        nn::LayerSpec spec;
        spec.size = r.get<std::uint64_t>();
        const auto act = r.get<std::uint8_t>();
        if (act > static_cast<std::uint8_t>(nn::Activation::Linear) || spec.size == 0)
        {
            throw Error(Errc::ParseError, "bad layer description in " + path.string());
        }
        spec.activation = static_cast<nn::Activation>(act);
        m.params.layers.push_back(spec);
    }
    for (std::uint32_t l = 0; l + 1 < n_layers; ++l)
    {
        const auto rows = static_cast<Eigen::Index>(m.params.layers[l + 1].size);
        const auto cols = static_cast<Eigen::Index>(m.params.layers[l].size);
        Eigen::MatrixXd w(rows, cols);
        Eigen::VectorXd b(rows);
        r.get_doubles(w.data(), static_cast<std::size_t>(w.size()));
        r.get_doubles(b.data(), static_cast<std::size_t>(b.size()));
        m.params.weights.push_back(std::move(w));
        m.params.biases.push_back(std::move(b));
    }
    m.config_json = r.get_bytes();
    return m;
}

void write_stack(const std::filesystem::path& path, const ae::AutoencoderStack& stack, std::uint64_t seed)
{
    stack.check();
    ModelFile m;
    m.seed = seed;
    m.params.layers.push_back({stack.input_dim, nn::Activation::Linear});
    nlohmann::ordered_json manifest;
    manifest["kind"] = "autoencoder_stack";
    manifest["input_dim"] = stack.input_dim;
    manifest["sparsity_target"] = stack.sparsity_target;
    manifest["sparsity_weight"] = stack.sparsity_weight;
    auto sizes = nlohmann::ordered_json::array();
    auto means = nlohmann::ordered_json::array();
    for (const auto& l : stack.layers)
    {
        m.params.layers.push_back({l.hidden_size, nn::Activation::Sigmoid});
        m.params.weights.push_back(l.weights);
        m.params.biases.push_back(l.bias);
        sizes.push_back(l.hidden_size);
        means.push_back(std::vector<double>(l.mean_activation.data(),
                                            l.mean_activation.data() + l.mean_activation.size()));
    }
    manifest["layer_sizes"] = sizes;
    manifest["mean_activation"] = means;
    m.config_json = manifest.dump();
    write_model(path, m);
}

ae::AutoencoderStack read_stack(const std::filesystem::path& path)
{
    const auto m = read_model(path);
    const auto manifest = nlohmann::json::parse(m.config_json, nullptr, false);
    if (manifest.is_discarded() || manifest.value("kind", "") != "autoencoder_stack")
    {
        throw Error(Errc::ParseError, path.string() + " does not hold an autoencoder stack");
    }
    ae::AutoencoderStack s;
    s.input_dim = m.params.input_size();
    s.sparsity_target = manifest.at("sparsity_target").get<double>();
    s.sparsity_weight = manifest.at("sparsity_weight").get<double>();
    const auto& means = manifest.at("mean_activation");
    for (std::size_t l = 0; l < m.params.weights.size(); ++l)
    {
        ae::StackLayer layer;
        layer.weights = m.params.weights[l];
        layer.bias = m.params.biases[l];
        layer.hidden_size = m.params.layers[l + 1].size;
        const auto v = means.at(l).get<std::vector<double>>();
        layer.mean_activation = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
        s.layers.push_back(std::move(layer));
    }
    s.check();
    return s;
}

}  // namespace snpnet::io
