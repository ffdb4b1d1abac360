#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "gemtools/error.hpp"

namespace gemtools {

// ---------------------------------------------------------------------------
// Text helpers
// ---------------------------------------------------------------------------
namespace detail {

inline void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

inline std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find('\t', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

inline std::vector<std::string_view> split_whitespace(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

inline bool is_blank(std::string_view line) {
  return line.find_first_not_of(" \t") == std::string_view::npos;
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open '" + path + "' for reading");
  return in;
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot open '" + path + "' for writing");
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// GenotypeMatrix
// ---------------------------------------------------------------------------

/// Subjects x SNPs minor-allele counts; entries are 0, 1, 2 or kMissing.
class GenotypeMatrix {
 public:
  static constexpr std::int8_t kMissing = -1;

  GenotypeMatrix() = default;

  /// `values` is row-major n x m. Throws on any invariant violation.
  GenotypeMatrix(std::vector<std::string> subject_ids, std::vector<std::string> snp_ids,
                 std::vector<std::int8_t> values)
      : subject_ids_(std::move(subject_ids)), snp_ids_(std::move(snp_ids)), values_(std::move(values)) {
    validate();
  }

  std::size_t n() const noexcept { return subject_ids_.size(); }
  std::size_t m() const noexcept { return snp_ids_.size(); }

  const std::vector<std::string>& subject_ids() const noexcept { return subject_ids_; }
  const std::vector<std::string>& snp_ids() const noexcept { return snp_ids_; }
  std::span<const std::int8_t> values() const noexcept { return values_; }

  std::int8_t at(std::size_t subject, std::size_t snp) const { return values_[subject * m() + snp]; }
  bool missing(std::size_t subject, std::size_t snp) const { return at(subject, snp) == kMissing; }

  std::span<const std::int8_t> row(std::size_t subject) const {
    return std::span<const std::int8_t>(values_).subspan(subject * m(), m());
  }

  /// Copy restricted to the given SNP columns (in the given order).
  GenotypeMatrix select_snps(std::span<const std::size_t> columns) const {
    std::vector<std::string> ids;
    ids.reserve(columns.size());
    for (auto c : columns) ids.push_back(snp_ids_.at(c));
    std::vector<std::int8_t> vals(n() * columns.size());
    for (std::size_t i = 0; i < n(); ++i)
      for (std::size_t k = 0; k < columns.size(); ++k) vals[i * columns.size() + k] = at(i, columns[k]);
    return GenotypeMatrix(subject_ids_, std::move(ids), std::move(vals));
  }

  /// Row index of a subject id, or -1.
  std::ptrdiff_t find_subject(const std::string& id) const {
    for (std::size_t i = 0; i < subject_ids_.size(); ++i)
      if (subject_ids_[i] == id) return static_cast<std::ptrdiff_t>(i);
    return -1;
  }

  friend bool operator==(const GenotypeMatrix&, const GenotypeMatrix&) = default;

 private:
  void validate() const {
    if (values_.size() != subject_ids_.size() * snp_ids_.size())
      throw validation_error("genotype matrix has " + std::to_string(values_.size()) + " values, expected " +
                             std::to_string(subject_ids_.size()) + " x " + std::to_string(snp_ids_.size()));
    for (auto v : values_)
      if (v != kMissing && (v < 0 || v > 2))
        throw value_error("genotype value " + std::to_string(v) + " outside {0,1,2,NA}");
    check_unique(subject_ids_, "subject");
    check_unique(snp_ids_, "SNP");
  }

  static void check_unique(const std::vector<std::string>& ids, const char* what) {
    std::unordered_set<std::string_view> seen;
    seen.reserve(ids.size());
    for (const auto& id : ids)
      if (!seen.insert(id).second) throw validation_error(std::string("duplicate ") + what + " id '" + id + "'");
  }

  std::vector<std::string> subject_ids_;
  std::vector<std::string> snp_ids_;
  std::vector<std::int8_t> values_;
};

enum class GenotypeFormat { Tsv, PlinkRaw };

namespace detail {

inline std::int8_t parse_genotype_token(std::string_view tok, std::size_t line_no, std::size_t col) {
  if (tok == "0") return 0;
  if (tok == "1") return 1;
  if (tok == "2") return 2;
  if (tok == "NA") return GenotypeMatrix::kMissing;
  throw value_error("line " + std::to_string(line_no) + ", column " + std::to_string(col + 1) +
                    ": invalid genotype token '" + std::string(tok) + "'");
}

}  // namespace detail

/// Reads a genotype TSV (header `subject_id<TAB>snp...`) or a PLINK .raw
/// file (`FID IID PAT MAT SEX PHENOTYPE snp...`, IID is the subject id).
inline GenotypeMatrix read_genotypes(std::istream& in, GenotypeFormat format) {
  const bool tsv = format == GenotypeFormat::Tsv;
  const std::size_t lead = tsv ? 1 : 6;
  const std::size_t id_col = tsv ? 0 : 1;
  auto split = [tsv](std::string_view l) { return tsv ? detail::split_tabs(l) : detail::split_whitespace(l); };

  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> snp_ids;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    detail::strip_cr(line);
    if (detail::is_blank(line)) continue;
    const auto fields = split(line);
    if (fields.size() < lead) throw parse_error("line " + std::to_string(line_no) + ": header has too few columns");
    for (std::size_t c = lead; c < fields.size(); ++c) snp_ids.emplace_back(fields[c]);
    have_header = true;
    break;
  }
  if (!have_header) throw parse_error("genotype file is empty (no header line)");

  const std::size_t expected = lead + snp_ids.size();
  std::vector<std::string> subjects;
  std::vector<std::int8_t> values;
  while (std::getline(in, line)) {
    ++line_no;
    detail::strip_cr(line);
    if (detail::is_blank(line)) continue;
    const auto fields = split(line);
    if (fields.size() != expected)
      throw parse_error("line " + std::to_string(line_no) + ": expected " + std::to_string(expected) +
                        " fields, found " + std::to_string(fields.size()));
    subjects.emplace_back(fields[id_col]);
    for (std::size_t c = lead; c < fields.size(); ++c)
      values.push_back(detail::parse_genotype_token(fields[c], line_no, c));
  }
  return GenotypeMatrix(std::move(subjects), std::move(snp_ids), std::move(values));
}

inline GenotypeMatrix load_genotypes(const std::string& path, GenotypeFormat format = GenotypeFormat::Tsv) {
  auto in = detail::open_input(path);
  try {
    return read_genotypes(in, format);
  } catch (const Error& e) {
    throw Error(e.kind(), path + ": " + e.what());
  }
}

inline void write_genotypes(std::ostream& out, const GenotypeMatrix& g) {
  out << "subject_id";
  for (const auto& s : g.snp_ids()) out << '\t' << s;
  out << '\n';
  for (std::size_t i = 0; i < g.n(); ++i) {
    out << g.subject_ids()[i];
    for (auto v : g.row(i)) {
      out << '\t';
      if (v == GenotypeMatrix::kMissing)
        out << "NA";
      else
        out << static_cast<char>('0' + v);
    }
    out << '\n';
  }
}

inline void save_genotypes(const GenotypeMatrix& g, const std::string& path) {
  auto out = detail::open_output(path);
  write_genotypes(out, g);
}

// ---------------------------------------------------------------------------
// Filtering and imputation
// ---------------------------------------------------------------------------

/// Mean allele count over non-missing entries of one column; NaN if none.
inline double column_mean(const GenotypeMatrix& g, std::size_t snp) {
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < g.n(); ++i) {
    const auto v = g.at(i, snp);
    if (v == GenotypeMatrix::kMissing) continue;
    sum += v;
    ++count;
  }
  return count == 0 ? std::numeric_limits<double>::quiet_NaN() : sum / static_cast<double>(count);
}

/// min(p, 1-p) with p = mean count / 2 over observed entries; NaN if none.
inline double minor_allele_frequency(const GenotypeMatrix& g, std::size_t snp) {
  const double p = column_mean(g, snp) / 2.0;
  return std::min(p, 1.0 - p);
}

/// Keeps the SNPs whose MAF is strictly greater than `threshold`.
/// SNPs with no observed genotype are dropped and reported in `all_missing`.
inline GenotypeMatrix maf_filter(const GenotypeMatrix& g, double threshold,
                                 std::vector<std::string>* all_missing = nullptr) {
  if (!(threshold >= 0.0 && threshold <= 0.5))
    throw argument_error("MAF threshold " + std::to_string(threshold) + " outside [0, 0.5]");
  std::vector<std::size_t> keep;
  for (std::size_t j = 0; j < g.m(); ++j) {
    const double maf = minor_allele_frequency(g, j);
    if (std::isnan(maf)) {
      if (all_missing) all_missing->push_back(g.snp_ids()[j]);
      continue;
    }
    if (maf > threshold) keep.push_back(j);
  }
  return g.select_snps(keep);
}

/// Dense real copy with MISSING entries replaced by the per-SNP mean.
inline Eigen::MatrixXd impute_missing(const GenotypeMatrix& g, std::span<const double> means) {
  if (means.size() != g.m())
    throw argument_error("impute_missing: " + std::to_string(means.size()) + " means for " +
                         std::to_string(g.m()) + " SNPs");
  Eigen::MatrixXd out(g.n(), g.m());
  for (std::size_t i = 0; i < g.n(); ++i)
    for (std::size_t j = 0; j < g.m(); ++j) {
      const auto v = g.at(i, j);
      out(i, j) = v == GenotypeMatrix::kMissing ? means[j] : static_cast<double>(v);
    }
  return out;
}

// ---------------------------------------------------------------------------
// Phenotypes
// ---------------------------------------------------------------------------

enum class Status { Case, Control };

inline const char* to_string(Status s) { return s == Status::Case ? "case" : "control"; }

class PhenotypeTable {
 public:
  struct Entry {
    std::string subject_id;
    Status status;
    friend bool operator==(const Entry&, const Entry&) = default;
  };

  void add(std::string id, Status status) {
    if (index_.contains(id)) throw validation_error("duplicate phenotype subject '" + id + "'");
    index_.emplace(id, entries_.size());
    entries_.push_back({std::move(id), status});
  }

  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  const std::vector<Entry>& entries() const noexcept { return entries_; }

  const Status* find(const std::string& id) const {
    auto it = index_.find(id);
    return it == index_.end() ? nullptr : &entries_[it->second].status;
  }

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// `subject_id<TAB>status` rows, 1 = case and 0 = control, no header.
inline PhenotypeTable read_phenotypes(std::istream& in) {
  PhenotypeTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    detail::strip_cr(line);
    if (detail::is_blank(line)) continue;
    const auto fields = detail::split_tabs(line);
    if (fields.size() != 2)
      throw parse_error("line " + std::to_string(line_no) + ": expected 2 fields, found " +
                        std::to_string(fields.size()));
    Status status;
    if (fields[1] == "1")
      status = Status::Case;
    else if (fields[1] == "0")
      status = Status::Control;
    else
      throw value_error("line " + std::to_string(line_no) + ": unknown status token '" + std::string(fields[1]) +
                        "'");
    table.add(std::string(fields[0]), status);
  }
  return table;
}

inline PhenotypeTable load_phenotypes(const std::string& path) {
  auto in = detail::open_input(path);
  try {
    return read_phenotypes(in);
  } catch (const Error& e) {
    throw Error(e.kind(), path + ": " + e.what());
  }
}

inline void save_phenotypes(const PhenotypeTable& table, const std::string& path) {
  auto out = detail::open_output(path);
  for (const auto& e : table.entries()) out << e.subject_id << '\t' << (e.status == Status::Case ? '1' : '0') << '\n';
}

/// Phenotype subjects that do not occur in the genotype panel. They stay in
/// the table; callers surface them as warnings.
inline std::vector<std::string> unknown_phenotype_subjects(const PhenotypeTable& table, const GenotypeMatrix& g) {
  std::unordered_set<std::string_view> ids(g.subject_ids().begin(), g.subject_ids().end());
  std::vector<std::string> out;
  for (const auto& e : table.entries())
    if (!ids.contains(e.subject_id)) out.push_back(e.subject_id);
  return out;
}

// ---------------------------------------------------------------------------
// Assignments
// ---------------------------------------------------------------------------

struct Assignment {
  std::string subject_id;
  std::string node_path;  ///< '/'-joined child indices from the root; "" for the root
  std::size_t leaf_id = 0;
  friend bool operator==(const Assignment&, const Assignment&) = default;
};

inline void write_assignments(std::ostream& out, std::span<const Assignment> rows) {
  for (const auto& a : rows) out << a.subject_id << '\t' << a.node_path << '\t' << a.leaf_id << '\n';
}

inline void save_assignments(std::span<const Assignment> rows, const std::string& path) {
  auto out = detail::open_output(path);
  write_assignments(out, rows);
}

inline std::vector<Assignment> read_assignments(std::istream& in) {
  std::vector<Assignment> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    detail::strip_cr(line);
    if (line.empty()) continue;
    const auto fields = detail::split_tabs(line);
    if (fields.size() != 3)
      throw parse_error("line " + std::to_string(line_no) + ": expected 3 fields in assignments row");
    Assignment a{std::string(fields[0]), std::string(fields[1]), 0};
    try {
      a.leaf_id = std::stoul(std::string(fields[2]));
    } catch (const std::exception&) {
      throw value_error("line " + std::to_string(line_no) + ": bad leaf id '" + std::string(fields[2]) + "'");
    }
    rows.push_back(std::move(a));
  }
  return rows;
}

inline std::vector<Assignment> load_assignments(const std::string& path) {
  auto in = detail::open_input(path);
  return read_assignments(in);
}

}  // namespace gemtools
