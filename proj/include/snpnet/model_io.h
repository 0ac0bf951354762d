#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "snpnet/autoencoder.h"
#include "snpnet/network.h"

namespace snpnet::io
{

inline constexpr std::uint32_t kModelVersion = 1;

struct ModelFile
{
    nn::NetworkParams params;
    std::uint64_t seed = 0;
    std::string config_json = "{}";  // configuration echo, stored verbatim
};

/// Binary container: magic "SNPNETM\0", u32 version, u64 seed, u32 layer
/// count, per layer (u64 size, u8 activation), then each weight matrix
/// (column-major) and bias as little-endian f64, then the config JSON (u64
/// length + bytes). A JSON sidecar is written to `path` + ".json".
void write_model(const std::filesystem::path& path, const ModelFile& model);

/// Throws BadMagic, ModeUnsupported (version), TruncatedFile or IoFailure.
ModelFile read_model(const std::filesystem::path& path);

std::filesystem::path sidecar_path(const std::filesystem::path& path);

/// Stacks are stored as a sigmoid network input -> h1 -> ... -> hk with the
/// stack manifest (sizes, p, beta, mean activations) as the config echo.
void write_stack(const std::filesystem::path& path, const ae::AutoencoderStack& stack, std::uint64_t seed);
ae::AutoencoderStack read_stack(const std::filesystem::path& path);

}  // namespace snpnet::io
