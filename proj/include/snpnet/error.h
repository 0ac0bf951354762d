#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace snpnet
{

enum class Errc
{
    // genotype-io
    BadMagic,
    ModeUnsupported,
    TruncatedFile,
    MetadataMismatch,
    ParseError,
    IoFailure,
    // qc
    EmptyDataset,
    InsufficientData,
    NoXChromosome,
    NoOverlap,
    DegenerateMatrix,
    EmptyCounts,
    // shared
    SingleClass,
    ShapeMismatch,
    EmptyBatch,
    // assoc / pipeline
    EmptySubset,
    // training
    NonFiniteLoss,
    DepthOutOfRange,
    // metrics
    NoPositives,
    // simdata
    SpecInvalid,
    TooFewSamples,
    // pipeline
    ConfigInvalid,
    NoArtifacts,
    OutputLocked,
};

std::string_view errc_name(Errc code) noexcept;

class Error : public std::runtime_error
{
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code)
    {
    }

    [[nodiscard]] Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

}  // namespace snpnet
