#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "snpnet/genotype.h"

namespace snpnet::io
{

/// Raw two-bit PLINK codes, before allele orientation.
enum class BedCall : std::uint8_t
{
    HomA1 = 0b00,
    Missing = 0b01,
    Het = 0b10,
    HomA2 = 0b11,
};

inline constexpr std::uint8_t kBedMagic0 = 0x6C;
inline constexpr std::uint8_t kBedMagic1 = 0x1B;
inline constexpr std::uint8_t kBedVariantMajor = 0x01;

struct PlinkPaths
{
    std::filesystem::path bed;
    std::filesystem::path bim;
    std::filesystem::path fam;
};

/// prefix + ".bed" / ".bim" / ".fam"
PlinkPaths plink_paths(const std::filesystem::path& prefix);

/// Decodes one variant block; pad bits past n_samples are ignored.
std::vector<BedCall> decode_bed_block(std::span<const std::uint8_t> block, std::size_t n_samples);

/// Reads a variant-major PLINK 1 fileset and orients every variant so that
/// dosage 2 counts the minor allele.
Dataset read_bed_dataset(const std::filesystem::path& bed_path,
                         const std::filesystem::path& bim_path,
                         const std::filesystem::path& fam_path);
Dataset read_bed_dataset(const PlinkPaths& paths);

/// Writes allele1 as PLINK A1: dosage 2 -> 00, 1 -> 10, 0 -> 11, missing -> 01.
void write_bed_dataset(const Dataset& ds,
                       const std::filesystem::path& bed_path,
                       const std::filesystem::path& bim_path,
                       const std::filesystem::path& fam_path);
void write_bed_dataset(const Dataset& ds, const PlinkPaths& paths);

std::vector<SampleRecord> read_fam(const std::filesystem::path& fam_path);
std::vector<VariantRecord> read_bim(const std::filesystem::path& bim_path);

}  // namespace snpnet::io
