#include <gtest/gtest.h>

#include <sstream>

#include "gemtools/genotype_io.hpp"
#include "gemtools/rng.hpp"
#include "gemtools/simulate.hpp"

using namespace gemtools;

namespace {

GenotypeMatrix from_text(const std::string& text, GenotypeFormat f = GenotypeFormat::Tsv) {
  std::istringstream in(text);
  return read_genotypes(in, f);
}

GenotypeMatrix column_panel(const std::vector<std::int8_t>& column) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < column.size(); ++i) ids.push_back("s" + std::to_string(i));
  return GenotypeMatrix(ids, {"snp"}, column);
}

}  // namespace

TEST(GenotypeIo, LoadsTsvWithMissing) {
  const auto g = from_text("subject_id\ta\tb\tc\ns1\t0\t1\t2\ns2\t1\tNA\t0\n");
  ASSERT_EQ(g.n(), 2u);
  ASSERT_EQ(g.m(), 3u);
  EXPECT_EQ(g.at(0, 2), 2);
  EXPECT_TRUE(g.missing(1, 1));
  EXPECT_EQ(g.at(1, 0), 1);
  EXPECT_EQ(g.subject_ids()[1], "s2");
  EXPECT_EQ(g.snp_ids()[2], "c");
}

TEST(GenotypeIo, LoadsPlinkRawUsingIid) {
  const auto g = from_text(
      "FID IID PAT MAT SEX PHENOTYPE rs1_A rs2_G\n"
      "f1 i1 0 0 1 -9 0 2\n"
      "f1 i2 0 0 2 -9 NA 1\n",
      GenotypeFormat::PlinkRaw);
  ASSERT_EQ(g.n(), 2u);
  EXPECT_EQ(g.subject_ids()[0], "i1");
  EXPECT_EQ(g.snp_ids()[1], "rs2_G");
  EXPECT_TRUE(g.missing(1, 0));
  EXPECT_EQ(g.at(1, 1), 1);
}

TEST(GenotypeIo, RowLengthErrorNamesLine) {
  try {
    from_text("subject_id\ta\tb\ns1\t0\t1\ns2\t1\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Parse);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}

TEST(GenotypeIo, RejectsBadToken) {
  try {
    from_text("subject_id\ta\ns1\t3\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Value);
  }
}

TEST(GenotypeIo, RejectsDuplicateIds) {
  try {
    from_text("subject_id\ta\ns1\t0\ns1\t1\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Validation);
  }
  EXPECT_THROW(from_text("subject_id\ta\ta\ns1\t0\t1\n"), Error);
}

TEST(GenotypeIo, LargePanelLoads) {
  // 226 subjects x 1167 SNPs, the size of the two-continent example panel.
  SimConfig cfg;
  cfg.n_pops = 2;
  cfg.subjects_per_pop = {113, 113};
  cfg.m = 1167;
  cfg.fst = {0.1};
  cfg.seed = 3;
  const auto panel = balding_nichols(cfg);
  std::stringstream buf;
  write_genotypes(buf, panel.genotypes);
  const auto g = read_genotypes(buf, GenotypeFormat::Tsv);
  EXPECT_EQ(g.n(), 226u);
  EXPECT_EQ(g.m(), 1167u);
}

TEST(GenotypeIo, RoundTripIsIdentity) {
  SimConfig cfg;
  cfg.n_pops = 2;
  cfg.subjects_per_pop = {7, 5};
  cfg.m = 30;
  cfg.fst = {0.2};
  cfg.missing_rate = 0.1;
  cfg.seed = 11;
  const auto g = balding_nichols(cfg).genotypes;
  std::stringstream buf;
  write_genotypes(buf, g);
  EXPECT_EQ(read_genotypes(buf, GenotypeFormat::Tsv), g);
}

TEST(MafFilter, DropsMonomorphicKeepsMaximal) {
  std::vector<std::string> ids{"a", "b", "c", "d"};
  const GenotypeMatrix g(ids, {"mono", "half"}, {0, 1, 0, 1, 0, 1, 0, 1});
  const auto f = maf_filter(g, 0.05);
  ASSERT_EQ(f.m(), 1u);
  EXPECT_EQ(f.snp_ids()[0], "half");
  EXPECT_EQ(f.n(), 4u);
}

TEST(MafFilter, FourMinorAllelesInFiftyIsRemoved) {
  // 4 minor alleles out of 100 -> MAF 0.04.
  std::vector<std::int8_t> col(50, 0);
  col[0] = 2;
  col[1] = 1;
  col[2] = 1;
  EXPECT_EQ(maf_filter(column_panel(col), 0.05).m(), 0u);
  // 6 copies -> 0.06 survives.
  col[3] = 2;
  EXPECT_EQ(maf_filter(column_panel(col), 0.05).m(), 1u);
}

TEST(MafFilter, CutoffIsStrict) {
  // 5 copies of 100 alleles: MAF exactly 0.05 is not greater than 0.05.
  std::vector<std::int8_t> col(50, 0);
  col[0] = 2;
  col[1] = 2;
  col[2] = 1;
  EXPECT_EQ(maf_filter(column_panel(col), 0.05).m(), 0u);
}

TEST(MafFilter, MissingIgnoredAndAllMissingReported) {
  std::vector<std::string> ids{"a", "b", "c"};
  const GenotypeMatrix g(ids, {"x", "gone"},
                         {1, GenotypeMatrix::kMissing, GenotypeMatrix::kMissing, GenotypeMatrix::kMissing, 0,
                          GenotypeMatrix::kMissing});
  std::vector<std::string> dropped;
  const auto f = maf_filter(g, 0.0, &dropped);
  ASSERT_EQ(f.m(), 1u);
  EXPECT_EQ(f.snp_ids()[0], "x");
  EXPECT_EQ(dropped, std::vector<std::string>{"gone"});
}

TEST(MafFilter, ThresholdOutOfRange) {
  const auto g = column_panel({0, 1});
  EXPECT_THROW(maf_filter(g, -0.1), Error);
  EXPECT_THROW(maf_filter(g, 0.51), Error);
}

TEST(MafFilter, IdempotentAndZeroThresholdRemovesOnlyMonomorphic) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    const std::size_t n = 5 + rng.uniform_index(20), m = 1 + rng.uniform_index(40);
    std::vector<std::string> ids, snps;
    for (std::size_t i = 0; i < n; ++i) ids.push_back("i" + std::to_string(i));
    for (std::size_t j = 0; j < m; ++j) snps.push_back("j" + std::to_string(j));
    std::vector<std::int8_t> vals(n * m);
    // skewed columns so both monomorphic and rare SNPs occur
    for (std::size_t j = 0; j < m; ++j) {
      const double p = rng.uniform01() * rng.uniform01() * 0.6;
      for (std::size_t i = 0; i < n; ++i)
        vals[i * m + j] = rng.bernoulli(0.05) ? GenotypeMatrix::kMissing
                                              : static_cast<std::int8_t>(rng.bernoulli(p) + rng.bernoulli(p));
    }
    const GenotypeMatrix g(ids, snps, vals);
    const double thr = rng.uniform(0.0, 0.3);
    const auto once = maf_filter(g, thr);
    EXPECT_EQ(maf_filter(once, thr), once);

    const auto zero = maf_filter(g, 0.0);
    std::size_t polymorphic = 0;
    for (std::size_t j = 0; j < m; ++j) {
      const double maf = minor_allele_frequency(g, j);
      if (!std::isnan(maf) && maf > 0.0) ++polymorphic;
    }
    EXPECT_EQ(zero.m(), polymorphic);
  }
}

TEST(Impute, IdentityWithoutMissing) {
  std::vector<std::string> ids{"a", "b"};
  const GenotypeMatrix g(ids, {"x", "y"}, {0, 2, 1, 1});
  const std::vector<double> means{9.0, 9.0};
  const auto x = impute_missing(g, means);
  EXPECT_EQ(x(0, 0), 0.0);
  EXPECT_EQ(x(0, 1), 2.0);
  EXPECT_EQ(x(1, 0), 1.0);
}

TEST(Impute, SubstitutesMean) {
  const auto g = column_panel({0, GenotypeMatrix::kMissing, 2});
  const std::vector<double> means{1.0};
  const auto x = impute_missing(g, means);
  EXPECT_EQ(x(0, 0), 0.0);
  EXPECT_EQ(x(1, 0), 1.0);
  EXPECT_EQ(x(2, 0), 2.0);
  const std::vector<double> wrong{1.0, 2.0};
  EXPECT_THROW(impute_missing(g, wrong), Error);
}

TEST(Impute, BaseSubsetMeansFillHeldOutRows) {
  SimConfig cfg;
  cfg.subjects_per_pop = {40};
  cfg.m = 25;
  cfg.missing_rate = 0.2;
  cfg.seed = 5;
  const auto g = balding_nichols(cfg).genotypes;
  // base = first 20 rows; recompute their column means directly
  std::vector<double> means(g.m());
  for (std::size_t j = 0; j < g.m(); ++j) {
    double s = 0;
    int c = 0;
    for (std::size_t i = 0; i < 20; ++i)
      if (!g.missing(i, j)) {
        s += g.at(i, j);
        ++c;
      }
    means[j] = s / c;
  }
  const auto x = impute_missing(g, means);
  std::size_t imputed = 0;
  for (std::size_t i = 20; i < g.n(); ++i)
    for (std::size_t j = 0; j < g.m(); ++j)
      if (g.missing(i, j)) {
        EXPECT_DOUBLE_EQ(x(i, j), means[j]);
        ++imputed;
      }
  EXPECT_GT(imputed, 0u);
}

TEST(Phenotypes, ParsesStatuses) {
  std::istringstream in("s1\t1\ns2\t0\n");
  const auto t = read_phenotypes(in);
  ASSERT_EQ(t.size(), 2u);
  EXPECT_EQ(*t.find("s1"), Status::Case);
  EXPECT_EQ(*t.find("s2"), Status::Control);
  EXPECT_EQ(t.find("s3"), nullptr);
}

TEST(Phenotypes, EmptyFileIsEmptyTable) {
  std::istringstream in("");
  EXPECT_TRUE(read_phenotypes(in).empty());
}

TEST(Phenotypes, RejectsUnknownStatusAndDuplicates) {
  std::istringstream bad("s1\t2\n");
  EXPECT_THROW(read_phenotypes(bad), Error);
  std::istringstream dup("s1\t1\ns1\t0\n");
  try {
    read_phenotypes(dup);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Validation);
  }
}

TEST(Phenotypes, UnknownSubjectsAreRetainedAndReported) {
  std::istringstream in("s1\t1\nghost\t0\n");
  const auto t = read_phenotypes(in);
  const auto g = column_panel({0, 1});  // ids s0, s1
  EXPECT_EQ(t.size(), 2u);
  EXPECT_EQ(unknown_phenotype_subjects(t, g), std::vector<std::string>{"ghost"});
}

TEST(Assignments, RoundTripTenSubjects) {
  std::vector<Assignment> rows;
  for (std::size_t i = 0; i < 10; ++i)
    rows.push_back({"subj" + std::to_string(i), i % 3 == 0 ? "" : "0/" + std::to_string(i % 4), 3 + i % 4});
  std::stringstream buf;
  write_assignments(buf, rows);
  EXPECT_EQ(read_assignments(buf), rows);
}
