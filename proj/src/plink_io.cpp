#include "snpnet/plink_io.h"

#include <array>
#include <charconv>
#include <fstream>
#include <sstream>
#include <string>

#include "snpnet/error.h"

namespace snpnet::io
{

namespace
{

std::vector<std::string> split_ws(const std::string& line)
{
    std::vector<std::string> out;
    std::istringstream is(line);
    std::string tok;
    while (is >> tok)
    {
        out.push_back(tok);
    }
    return out;
}

bool blank(const std::string& line)
{
    return line.find_first_not_of(" \t\r") == std::string::npos;
}

template <typename T>
T parse_number(const std::string& s, const std::filesystem::path& file, std::size_t line_no)
{
    T v{};
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || ptr != end)
    {
        throw Error(Errc::ParseError,
                    file.string() + ":" + std::to_string(line_no) + ": bad number '" + s + "'");
    }
    return v;
}

std::string format_double(double v)
{
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    (void)ec;
    return {buf.data(), ptr};
}

Sex parse_sex(const std::string& s)
{
    if (s == "1") return Sex::Male;
    if (s == "2") return Sex::Female;
    return Sex::Unknown;
}

Phenotype parse_phenotype(const std::string& s, const std::filesystem::path& file, std::size_t line_no)
{
    if (s == "1") return Phenotype::Control;
    if (s == "2") return Phenotype::Case;
    if (s == "0" || s == "-9" || s == "NA") return Phenotype::Missing;
    throw Error(Errc::ParseError, file.string() + ":" + std::to_string(line_no)
                                      + ": phenotype must be 1, 2, 0 or -9, got '" + s + "'");
}

const char* sex_code(Sex s)
{
    switch (s)
    {
        case Sex::Male: return "1";
        case Sex::Female: return "2";
        case Sex::Unknown: break;
    }
    return "0";
}

const char* phenotype_code(Phenotype p)
{
    switch (p)
    {
        case Phenotype::Control: return "1";
        case Phenotype::Case: return "2";
        case Phenotype::Missing: break;
    }
    return "-9";
}

}  // namespace

PlinkPaths plink_paths(const std::filesystem::path& prefix)
{
    const auto s = prefix.string();
    return {s + ".bed", s + ".bim", s + ".fam"};
}

std::vector<BedCall> decode_bed_block(std::span<const std::uint8_t> block, std::size_t n_samples)
{
    if (block.size() < (n_samples + 3) / 4)
    {
        throw Error(Errc::TruncatedFile, "variant block shorter than ceil(N/4) bytes");
    }
    std::vector<BedCall> out(n_samples);
    for (std::size_t k = 0; k < n_samples; ++k)
    {
        out[k] = static_cast<BedCall>((block[k / 4] >> (2 * (k % 4))) & 0x3u);
    }
    return out;
}

std::vector<SampleRecord> read_fam(const std::filesystem::path& fam_path)
{
    std::ifstream in(fam_path);
    if (!in)
    {
        throw Error(Errc::IoFailure, "cannot open " + fam_path.string());
    }
    std::vector<SampleRecord> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line))
    {
        ++line_no;
        if (blank(line))
        {
            continue;
        }
        const auto f = split_ws(line);
        if (f.size() != 6)
        {
            throw Error(Errc::ParseError, fam_path.string() + ":" + std::to_string(line_no)
                                              + ": expected 6 columns");
        }
        out.push_back({f[0], f[1], parse_sex(f[4]), parse_phenotype(f[5], fam_path, line_no)});
    }
    return out;
}

std::vector<VariantRecord> read_bim(const std::filesystem::path& bim_path)
{
    std::ifstream in(bim_path);
    if (!in)
    {
        throw Error(Errc::IoFailure, "cannot open " + bim_path.string());
    }
    std::vector<VariantRecord> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line))
    {
        ++line_no;
        if (blank(line))
        {
            continue;
        }
        const auto f = split_ws(line);
        if (f.size() != 6)
        {
            throw Error(Errc::ParseError, bim_path.string() + ":" + std::to_string(line_no)
                                              + ": expected 6 columns");
        }
        VariantRecord v;
        v.chromosome = f[0];
        v.id = f[1];
        v.genetic_distance = parse_number<double>(f[2], bim_path, line_no);
        v.position = parse_number<std::int64_t>(f[3], bim_path, line_no);
        v.allele1 = f[4];
        v.allele2 = f[5];
        out.push_back(std::move(v));
    }
    return out;
}

Dataset read_bed_dataset(const std::filesystem::path& bed_path,
                         const std::filesystem::path& bim_path,
                         const std::filesystem::path& fam_path)
{
    auto samples = read_fam(fam_path);
    auto variants = read_bim(bim_path);

    std::ifstream in(bed_path, std::ios::binary);
    if (!in)
    {
        throw Error(Errc::IoFailure, "cannot open " + bed_path.string());
    }
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() < 3 || bytes[0] != kBedMagic0 || bytes[1] != kBedMagic1)
    {
        throw Error(Errc::BadMagic, bed_path.string() + " is not a PLINK .bed file");
    }
    if (bytes[2] != kBedVariantMajor)
    {
        throw Error(Errc::ModeUnsupported, "only variant-major .bed files are supported");
    }

    const std::size_t n = samples.size();
    const std::size_t u = variants.size();
    const std::size_t block = (n + 3) / 4;
    const std::size_t body = bytes.size() - 3;
    if (block == 0)
    {
        if (body != 0)
        {
            throw Error(Errc::MetadataMismatch, ".fam is empty but .bed has genotype data");
        }
    }
    else if (body % block != 0)
    {
        throw Error(Errc::TruncatedFile, bed_path.string() + ": body is not a whole number of "
                                             + std::to_string(block) + "-byte variant blocks");
    }
    else if (body / block != u)
    {
        throw Error(Errc::MetadataMismatch, bed_path.string() + " holds " + std::to_string(body / block)
                                                + " variant blocks but .bim lists " + std::to_string(u));
    }

    Dataset ds(std::move(samples), std::move(variants));
    for (std::size_t j = 0; j < u; ++j)
    {
        const std::span<const std::uint8_t> blk(bytes.data() + 3 + j * block, block);
        for (std::size_t k = 0; k < n; ++k)
        {
            GenotypeCall g = GenotypeCall::Missing;
            switch (static_cast<BedCall>((blk[k / 4] >> (2 * (k % 4))) & 0x3u))
            {
                case BedCall::HomA1: g = GenotypeCall::HomMinor; break;
                case BedCall::Het: g = GenotypeCall::Het; break;
                case BedCall::HomA2: g = GenotypeCall::HomMajor; break;
                case BedCall::Missing: break;
            }
            ds.set_call(k, j, g);
        }
    }
    return orient_minor_allele(ds);
}

Dataset read_bed_dataset(const PlinkPaths& paths)
{
    return read_bed_dataset(paths.bed, paths.bim, paths.fam);
}

void write_bed_dataset(const Dataset& ds,
                       const std::filesystem::path& bed_path,
                       const std::filesystem::path& bim_path,
                       const std::filesystem::path& fam_path)
{
    {
        std::ofstream out(fam_path);
        for (const auto& s : ds.samples())
        {
            out << s.family_id << ' ' << s.individual_id << " 0 0 " << sex_code(s.reported_sex) << ' '
                << phenotype_code(s.phenotype) << '\n';
        }
        if (!out)
        {
            throw Error(Errc::IoFailure, "failed writing " + fam_path.string());
        }
    }
    {
        std::ofstream out(bim_path);
        for (const auto& v : ds.variants())
        {
            out << v.chromosome << '\t' << v.id << '\t' << format_double(v.genetic_distance) << '\t'
                << v.position << '\t' << v.allele1 << '\t' << v.allele2 << '\n';
        }
        if (!out)
        {
            throw Error(Errc::IoFailure, "failed writing " + bim_path.string());
        }
    }

    const std::size_t n = ds.n_samples();
    const std::size_t block = ds.bytes_per_variant();
    std::vector<std::uint8_t> buf(block);
    std::ofstream out(bed_path, std::ios::binary);
    const std::array<char, 3> header{static_cast<char>(kBedMagic0), static_cast<char>(kBedMagic1),
                                     static_cast<char>(kBedVariantMajor)};
    out.write(header.data(), header.size());
    for (std::size_t j = 0; j < ds.n_variants(); ++j)
    {
        std::fill(buf.begin(), buf.end(), 0);
        for (std::size_t k = 0; k < n; ++k)
        {
            BedCall code = BedCall::Missing;
            switch (ds.call(k, j))
            {
                case GenotypeCall::HomMinor: code = BedCall::HomA1; break;
                case GenotypeCall::Het: code = BedCall::Het; break;
                case GenotypeCall::HomMajor: code = BedCall::HomA2; break;
                case GenotypeCall::Missing: break;
            }
            buf[k / 4] = static_cast<std::uint8_t>(buf[k / 4] | (static_cast<unsigned>(code) << (2 * (k % 4))));
        }
        out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(block));
    }
    if (!out)
    {
        throw Error(Errc::IoFailure, "failed writing " + bed_path.string());
    }
}

void write_bed_dataset(const Dataset& ds, const PlinkPaths& paths)
{
    write_bed_dataset(ds, paths.bed, paths.bim, paths.fam);
}

}  // namespace snpnet::io
