#include <fstream>
#include <iterator>

#include <gtest/gtest.h>

#include "snpnet/error.h"
#include "snpnet/plink_io.h"
#include "test_util.h"

using namespace snpnet;
using snpnet::testing::TempDir;

namespace
{

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path& p, const std::vector<std::uint8_t>& bytes)
{
    std::ofstream out(p, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void write_text(const std::filesystem::path& p, const std::string& text)
{
    std::ofstream out(p);
    out << text;
}

// Fixture fileset with n samples and the given .bim lines.
io::PlinkPaths raw_fileset(const TempDir& dir, std::size_t n, const std::string& bim,
                           const std::vector<std::uint8_t>& bed)
{
    const auto paths = io::plink_paths(dir / "raw");
    std::string fam;
    for (std::size_t i = 0; i < n; ++i)
    {
        fam += "F" + std::to_string(i) + " I" + std::to_string(i) + " 0 0 2 1\n";
    }
    write_text(paths.fam, fam);
    write_text(paths.bim, bim);
    write_bytes(paths.bed, bed);
    return paths;
}

Errc read_error(const io::PlinkPaths& paths)
{
    try
    {
        (void)io::read_bed_dataset(paths);
    }
    catch (const Error& e)
    {
        return e.code();
    }
    ADD_FAILURE() << "expected an error";
    return Errc::IoFailure;
}

}  // namespace

TEST(BedDecode, FourSampleByte)
{
    const std::vector<std::uint8_t> block{0b11'10'01'00};
    const auto calls = io::decode_bed_block(block, 4);
    ASSERT_EQ(calls.size(), 4u);
    EXPECT_EQ(calls[0], io::BedCall::HomA1);
    EXPECT_EQ(calls[1], io::BedCall::Missing);
    EXPECT_EQ(calls[2], io::BedCall::Het);
    EXPECT_EQ(calls[3], io::BedCall::HomA2);
}

TEST(BedDecode, PadBitsIgnored)
{
    for (std::uint8_t pad = 0; pad < 4; ++pad)
    {
        const std::vector<std::uint8_t> block{static_cast<std::uint8_t>(0b10 | (pad << 2) | (pad << 6))};
        const auto calls = io::decode_bed_block(block, 1);
        ASSERT_EQ(calls.size(), 1u);
        EXPECT_EQ(calls[0], io::BedCall::Het);
    }
}

TEST(BedRead, FourSampleFixtureOrientsToMinorAllele)
{
    TempDir dir;
    // A1 copies: 2, missing, 1, 0 -> A1 frequency 3/6 = 0.5, a tie that keeps A1.
    const auto paths = raw_fileset(dir, 4, "1 rs1 0 100 A G\n", {0x6C, 0x1B, 0x01, 0b11'10'01'00});
    const auto ds = io::read_bed_dataset(paths);
    ASSERT_EQ(ds.n_samples(), 4u);
    ASSERT_EQ(ds.n_variants(), 1u);
    EXPECT_EQ(ds.call(0, 0), GenotypeCall::HomMinor);
    EXPECT_EQ(ds.call(1, 0), GenotypeCall::Missing);
    EXPECT_EQ(ds.call(2, 0), GenotypeCall::Het);
    EXPECT_EQ(ds.call(3, 0), GenotypeCall::HomMajor);
    EXPECT_EQ(ds.variant(0).allele1, "A");
}

TEST(BedRead, MajorA1IsSwapped)
{
    TempDir dir;
    // A1 copies: 2, 2, 2, 1 -> A1 frequency 7/8, so G becomes the counted allele.
    const auto paths = raw_fileset(dir, 4, "1 rs1 0 100 A G\n", {0x6C, 0x1B, 0x01, 0b10'00'00'00});
    const auto ds = io::read_bed_dataset(paths);
    EXPECT_EQ(ds.column(0), (std::vector<std::int8_t>{0, 0, 0, 1}));
    EXPECT_EQ(ds.variant(0).allele1, "G");
    EXPECT_EQ(ds.variant(0).allele2, "A");
}

TEST(BedRead, EmptyVariantList)
{
    TempDir dir;
    const auto paths = raw_fileset(dir, 3, "", {0x6C, 0x1B, 0x01});
    const auto ds = io::read_bed_dataset(paths);
    EXPECT_EQ(ds.n_samples(), 3u);
    EXPECT_EQ(ds.n_variants(), 0u);
}

TEST(BedRead, HeaderErrors)
{
    TempDir dir;
    EXPECT_EQ(read_error(raw_fileset(dir, 4, "1 rs1 0 100 A G\n", {0x6C, 0x1B, 0x00, 0x00})),
              Errc::ModeUnsupported);
    EXPECT_EQ(read_error(raw_fileset(dir, 4, "1 rs1 0 100 A G\n", {0x00, 0x1B, 0x01, 0x00})), Errc::BadMagic);
    EXPECT_EQ(read_error(raw_fileset(dir, 4, "1 rs1 0 100 A G\n", {0x6C})), Errc::BadMagic);
}

TEST(BedRead, SizeErrors)
{
    TempDir dir;
    // Five samples need two bytes per variant.
    EXPECT_EQ(read_error(raw_fileset(dir, 5, "1 rs1 0 100 A G\n", {0x6C, 0x1B, 0x01, 0x00})),
              Errc::TruncatedFile);
    EXPECT_EQ(read_error(raw_fileset(dir, 4, "1 rs1 0 100 A G\n1 rs2 0 200 A G\n", {0x6C, 0x1B, 0x01, 0x00})),
              Errc::MetadataMismatch);
}

TEST(BedRead, MissingFileIsIoFailure)
{
    TempDir dir;
    EXPECT_EQ(read_error(io::plink_paths(dir / "absent")), Errc::IoFailure);
}

TEST(FamParse, PhenotypeCodes)
{
    TempDir dir;
    write_text(dir / "x.fam", "A a 0 0 1 1\nB b 0 0 2 2\nC c 0 0 0 -9\nD d 0 0 1 0\n");
    const auto fam = io::read_fam(dir / "x.fam");
    ASSERT_EQ(fam.size(), 4u);
    EXPECT_EQ(fam[0].phenotype, Phenotype::Control);
    EXPECT_EQ(fam[1].phenotype, Phenotype::Case);
    EXPECT_EQ(fam[2].phenotype, Phenotype::Missing);
    EXPECT_EQ(fam[3].phenotype, Phenotype::Missing);
    EXPECT_EQ(fam[0].reported_sex, Sex::Male);
    EXPECT_EQ(fam[1].reported_sex, Sex::Female);
    EXPECT_EQ(fam[2].reported_sex, Sex::Unknown);

    write_text(dir / "bad.fam", "A a 0 0 1 7\n");
    EXPECT_THROW((void)io::read_fam(dir / "bad.fam"), Error);
}

TEST(BedWrite, SingleHetIsOneByte)
{
    TempDir dir;
    Dataset ds(snpnet::testing::make_samples(1), snpnet::testing::make_variants(1));
    ds.set_call(0, 0, GenotypeCall::Het);
    const auto paths = io::plink_paths(dir / "one");
    io::write_bed_dataset(ds, paths);
    const auto bytes = read_bytes(paths.bed);
    ASSERT_EQ(bytes.size(), 4u);
    EXPECT_EQ(bytes[0], 0x6C);
    EXPECT_EQ(bytes[1], 0x1B);
    EXPECT_EQ(bytes[2], 0x01);
    EXPECT_EQ(bytes[3], 0b00000010);
}

TEST(BedWrite, FiveSamplesTakeTwoBytes)
{
    TempDir dir;
    Dataset ds(snpnet::testing::make_samples(5), snpnet::testing::make_variants(1));
    for (std::size_t i = 0; i < 5; ++i)
    {
        ds.set_call(i, 0, GenotypeCall::HomMajor);
    }
    const auto paths = io::plink_paths(dir / "five");
    io::write_bed_dataset(ds, paths);
    const auto bytes = read_bytes(paths.bed);
    ASSERT_EQ(bytes.size(), 3u + 2u);
    // Pad bits of the last byte are written as zero.
    EXPECT_EQ(bytes[4] & 0b11111100, 0);
}

TEST(BedRoundTrip, RandomDatasets)
{
    TempDir dir;
    Rng shapes(77);
    for (int trial = 0; trial < 40; ++trial)
    {
        const std::size_t n = 1 + shapes.below(23);
        const std::size_t u = shapes.below(9);
        auto ds = orient_minor_allele(snpnet::testing::random_dataset(n, u, 1000 + trial, 0.1));
        if (u > 0)
        {
            for (std::size_t i = 0; i < n; ++i)
            {
                ds.set_call(i, 0, GenotypeCall::Missing);
            }
        }
        const auto paths = io::plink_paths(dir / ("rt" + std::to_string(trial)));
        io::write_bed_dataset(ds, paths);
        EXPECT_EQ(io::read_bed_dataset(paths), ds) << "trial " << trial;
    }
}

TEST(Orientation, Examples)
{
    Dataset ds(snpnet::testing::make_samples(4), snpnet::testing::make_variants(3));
    ds.set_column(0, std::vector<std::int8_t>{0, 0, 0, 1});
    ds.set_column(1, std::vector<std::int8_t>{2, 2, 2, 1});
    ds.set_column(2, std::vector<std::int8_t>{-1, -1, -1, -1});
    const auto o = orient_minor_allele(ds);
    EXPECT_EQ(o.column(0), (std::vector<std::int8_t>{0, 0, 0, 1}));
    EXPECT_EQ(o.column(1), (std::vector<std::int8_t>{0, 0, 0, 1}));
    EXPECT_EQ(o.column(2), (std::vector<std::int8_t>{-1, -1, -1, -1}));
    EXPECT_EQ(o.variant(0).allele1, "A");
    EXPECT_EQ(o.variant(1).allele1, "G");
}

TEST(Orientation, IdempotentAndMinorAfter)
{
    for (std::uint64_t seed = 0; seed < 20; ++seed)
    {
        auto ds = snpnet::testing::random_dataset(17, 6, seed, 0.2);
        // Push some columns past 0.5 so a swap is needed.
        for (std::size_t j = 0; j < 6; j += 2)
        {
            auto col = ds.column(j);
            for (auto& d : col)
            {
                if (d >= 0)
                {
                    d = static_cast<std::int8_t>(2 - d);
                }
            }
            ds.set_column(j, col);
        }
        const auto once = orient_minor_allele(ds);
        EXPECT_EQ(orient_minor_allele(once), once);
        for (std::size_t j = 0; j < once.n_variants(); ++j)
        {
            const double f = allele1_frequency(once.column(j));
            EXPECT_TRUE(std::isnan(f) || f <= 0.5);
        }
    }
}

TEST(DatasetLayout, PackedAccessors)
{
    Dataset ds(snpnet::testing::make_samples(6), snpnet::testing::make_variants(2));
    EXPECT_EQ(ds.bytes_per_variant(), 2u);
    for (std::size_t i = 0; i < 6; ++i)
    {
        EXPECT_EQ(ds.call(i, 1), GenotypeCall::Missing);
    }
    ds.set_column(1, std::vector<std::int8_t>{0, 1, 2, -1, 2, 1});
    EXPECT_EQ(ds.column(1), (std::vector<std::int8_t>{0, 1, 2, -1, 2, 1}));
    const std::vector<std::size_t> rows{4, 1};
    const std::vector<std::size_t> cols{1};
    const auto sub = ds.subset(rows, cols);
    EXPECT_EQ(sub.column(0), (std::vector<std::int8_t>{2, 1}));
    EXPECT_EQ(sub.sample(0).individual_id, "I5");
}
