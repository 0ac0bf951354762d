#include "snpnet/error.h"

namespace snpnet
{

std::string_view errc_name(Errc code) noexcept
{
    switch (code)
    {
        case Errc::BadMagic: return "BadMagic";
        case Errc::ModeUnsupported: return "ModeUnsupported";
        case Errc::TruncatedFile: return "TruncatedFile";
        case Errc::MetadataMismatch: return "MetadataMismatch";
        case Errc::ParseError: return "ParseError";
        case Errc::IoFailure: return "IoFailure";
        case Errc::EmptyDataset: return "EmptyDataset";
        case Errc::InsufficientData: return "InsufficientData";
        case Errc::NoXChromosome: return "NoXChromosome";
        case Errc::NoOverlap: return "NoOverlap";
        case Errc::DegenerateMatrix: return "DegenerateMatrix";
        case Errc::EmptyCounts: return "EmptyCounts";
        case Errc::SingleClass: return "SingleClass";
        case Errc::ShapeMismatch: return "ShapeMismatch";
        case Errc::EmptyBatch: return "EmptyBatch";
        case Errc::EmptySubset: return "EmptySubset";
        case Errc::NonFiniteLoss: return "NonFiniteLoss";
        case Errc::DepthOutOfRange: return "DepthOutOfRange";
        case Errc::NoPositives: return "NoPositives";
        case Errc::SpecInvalid: return "SpecInvalid";
        case Errc::TooFewSamples: return "TooFewSamples";
        case Errc::ConfigInvalid: return "ConfigInvalid";
        case Errc::NoArtifacts: return "NoArtifacts";
        case Errc::OutputLocked: return "OutputLocked";
    }
    return "Unknown";
}

}  // namespace snpnet
