#pragma once

#include <fmt/format.h>
#include <openssl/evp.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gemtools/engine.hpp"
#include "gemtools/error.hpp"
#include "gemtools/genotype_io.hpp"
#include "gemtools/matching.hpp"
#include "gemtools/simulate.hpp"
#include "gemtools/tree_io.hpp"
#include "json.hpp"

#ifndef GEMTOOLS_VERSION
#define GEMTOOLS_VERSION "0.0.0"
#endif

namespace gemtools::cli {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int internal = 1;
inline constexpr int argument = 2;
inline constexpr int data = 3;
inline constexpr int numeric = 4;
}  // namespace exit_code

inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Argument:
    case ErrorKind::Constraint: return exit_code::argument;
    case ErrorKind::Degenerate: return exit_code::numeric;
    case ErrorKind::Parse:
    case ErrorKind::Value:
    case ErrorKind::Validation:
    case ErrorKind::Io: return exit_code::data;
  }
  return exit_code::internal;
}

/// Hex SHA-256 of a file's bytes.
inline std::string file_sha256(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open '" + path + "' for hashing");
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

struct Options {
  std::string genotypes;
  std::string format = "tsv";
  std::string phenotypes;
  std::string tree;
  std::string out;
  std::size_t base_size = 100;
  std::size_t max_cluster = 50;
  double alpha = 0.01;
  std::size_t min_dim = 2;
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  double maf = 0.05;
  double full_base_factor = 2.0;
  std::size_t min_split_size = 10;
  std::size_t max_depth = 32;
  std::optional<std::size_t> max_controls;
  std::optional<std::size_t> max_cases;
  // simulate
  std::size_t pops = 2;
  std::vector<std::size_t> per_pop{50};
  std::size_t snps = 1000;
  std::vector<double> fst{0.1};
  double missing_rate = 0.0;
  double maf_low = 0.05;
  double maf_high = 0.5;
  std::optional<double> case_rate;
};

namespace detail {

class Runner {
 public:
  Runner(const Options& opt, std::ostream& log) : opt_(opt), log_(log), start_(std::chrono::steady_clock::now()) {}

  int dacgem_or_cluster(EngineMode mode) {
    require_seed();
    const auto dir = prepare_out();
    const GenotypeMatrix g = load_panel();

    EngineConfig cfg;
    cfg.base_size = opt_.base_size;
    cfg.max_cluster = opt_.max_cluster;
    cfg.alpha = opt_.alpha;
    cfg.seed = *opt_.seed;
    cfg.full_base_factor = opt_.full_base_factor;
    cfg.min_split_size = opt_.min_split_size;
    cfg.max_depth = opt_.max_depth;
    cfg.threads = opt_.threads;
    const ClusterTree tree = mode == EngineMode::DacGem ? dac_gem(g, cfg) : cluster_gem(g, cfg);

    const auto rows = tree.assignments(g);
    save_assignments(rows, (dir / "assignments.tsv").string());
    save_tree(tree, g, (dir / "tree.json").string());
    save_tree_dot(tree, (dir / "tree.dot").string());
    json timing = json::array();
    for (const auto& n : tree.nodes) {
      if (!n.has_map()) continue;
      timing.push_back({{"id", n.id}, {"seconds", n.seconds}, {"matrix_order", n.matrix_order}});
      if (n.coords.size() == 0) continue;
      auto coords = gemtools::detail::open_output((dir / fmt::format("node_{}_coords.tsv", n.id)).string());
      write_node_coords(coords, n, g);
      auto sidecar = gemtools::detail::open_output((dir / fmt::format("node_{}_eigen.json", n.id)).string());
      sidecar << node_eigen_json(n).dump(2) << '\n';
    }
    config_ = {{"base_size", cfg.base_size}, {"max_cluster", cfg.max_cluster}, {"alpha", cfg.alpha},
               {"seed", cfg.seed},           {"full_base_factor", cfg.full_base_factor},
               {"min_split_size", cfg.min_split_size}, {"max_depth", cfg.max_depth}, {"threads", cfg.threads},
               {"maf", opt_.maf},            {"format", opt_.format}};
    extra_["node_timing"] = timing;
    extra_["peak_matrix_order"] = tree.peak_matrix_order;
    extra_["n_leaves"] = tree.leaves().size();
    if (mode == EngineMode::DacGem) {
      extra_["matrix_order_bound"] = cfg.matrix_order_bound();
      if (tree.peak_matrix_order > cfg.matrix_order_bound()) {
        write_manifest(dir, to_string(mode));
        log_ << "error: peak matrix order " << tree.peak_matrix_order << " exceeds bound "
             << cfg.matrix_order_bound() << '\n';
        return exit_code::internal;
      }
    }
    write_manifest(dir, to_string(mode));
    log_ << "wrote " << tree.nodes.size() << " nodes, " << tree.leaves().size() << " leaves to " << dir.string()
         << '\n';
    return exit_code::ok;
  }

  int match() {
    if (opt_.phenotypes.empty()) throw argument_error("--phenotypes is required for match");
    if (opt_.tree.empty()) throw argument_error("--tree is required for match");
    const auto dir = prepare_out();
    const GenotypeMatrix g = load_panel();
    const PhenotypeTable pheno = load_phenotypes(opt_.phenotypes);
    inputs_.push_back({{"path", opt_.phenotypes}, {"sha256", file_sha256(opt_.phenotypes)}});
    const ClusterTree tree = load_tree(opt_.tree, g);
    inputs_.push_back({{"path", opt_.tree}, {"sha256", file_sha256(opt_.tree)}});

    for (const auto& id : unknown_phenotype_subjects(pheno, g)) warn("phenotype subject '" + id + "' is not in the genotype panel");
    std::vector<std::string> offenders;
    for (const auto& n : tree.nodes)
      if (n.is_leaf())
        for (auto s : n.subjects)
          if (!pheno.find(g.subject_ids()[s])) offenders.push_back(g.subject_ids()[s]);
    if (!offenders.empty()) {
      std::string list;
      for (std::size_t i = 0; i < std::min<std::size_t>(10, offenders.size()); ++i) list += (i ? ", " : "") + offenders[i];
      throw validation_error(std::to_string(offenders.size()) + " genotyped subjects lack a phenotype: " + list);
    }

    MatchConfig mcfg;
    mcfg.min_dim = opt_.min_dim;
    mcfg.max_controls_per_case = opt_.max_controls;
    mcfg.max_cases_per_control = opt_.max_cases;
    const auto leaves = match_all_leaves(tree, g, pheno, mcfg, opt_.alpha, {}, opt_.threads);
    save_matches(leaves, pheno, (dir / "matches.tsv").string());
    {
      auto summary = gemtools::detail::open_output((dir / "match_summary.tsv").string());
      write_match_summary(summary, leaves);
    }
    for (const auto& lm : leaves) {
      if (!lm.error.empty()) warn(fmt::format("leaf {}: {}", lm.leaf_id, lm.error));
      else if (lm.result.sets.empty()) warn(fmt::format("leaf {}: single arm, nothing matched", lm.leaf_id));
    }
    config_ = {{"min_dim", opt_.min_dim}, {"alpha", opt_.alpha}, {"maf", opt_.maf}, {"format", opt_.format},
               {"max_controls_per_case", opt_.max_controls ? json(*opt_.max_controls) : json(nullptr)},
               {"max_cases_per_control", opt_.max_cases ? json(*opt_.max_cases) : json(nullptr)},
               {"threads", opt_.threads}};
    write_manifest(dir, "match");
    log_ << "matched " << leaves.size() << " leaves with " << warnings_ << " warning(s)\n";
    return exit_code::ok;
  }

  int simulate() {
    require_seed();
    const auto dir = prepare_out();
    SimConfig cfg;
    cfg.n_pops = opt_.pops;
    cfg.subjects_per_pop = opt_.per_pop.size() == 1 ? std::vector<std::size_t>(opt_.pops, opt_.per_pop[0]) : opt_.per_pop;
    cfg.m = opt_.snps;
    cfg.fst = opt_.fst;
    cfg.maf_low = opt_.maf_low;
    cfg.maf_high = opt_.maf_high;
    cfg.missing_rate = opt_.missing_rate;
    cfg.seed = *opt_.seed;
    cfg.threads = opt_.threads;
    if (opt_.case_rate && !(*opt_.case_rate > 0.0 && *opt_.case_rate < 1.0))
      throw argument_error("--case-rate must lie in (0, 1)");
    const SimPanel panel = balding_nichols(cfg);
    save_genotypes(panel.genotypes, (dir / "genotypes.tsv").string());
    save_truth_labels(panel, (dir / "labels.tsv").string());
    if (opt_.case_rate) {
      Rng rng = Rng::stream(cfg.seed, 0xca5eULL);
      PhenotypeTable pheno;
      for (const auto& id : panel.genotypes.subject_ids())
        pheno.add(id, rng.bernoulli(*opt_.case_rate) ? Status::Case : Status::Control);
      save_phenotypes(pheno, (dir / "phenotypes.tsv").string());
    }
    config_ = {{"pops", cfg.n_pops}, {"per_pop", cfg.subjects_per_pop}, {"snps", cfg.m}, {"fst", cfg.fst},
               {"maf_low", cfg.maf_low}, {"maf_high", cfg.maf_high}, {"missing_rate", cfg.missing_rate},
               {"seed", cfg.seed}, {"case_rate", opt_.case_rate ? json(*opt_.case_rate) : json(nullptr)}};
    write_manifest(dir, "simulate");
    log_ << "simulated " << panel.genotypes.n() << " x " << panel.genotypes.m() << " panel in " << dir.string() << '\n';
    return exit_code::ok;
  }

 private:
  void require_seed() const {
    if (!opt_.seed) throw argument_error("--seed is required");
  }

  std::filesystem::path prepare_out() const {
    if (opt_.out.empty()) throw argument_error("--out is required");
    std::filesystem::path dir(opt_.out);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw io_error("cannot create output directory '" + opt_.out + "': " + ec.message());
    return dir;
  }

  GenotypeMatrix load_panel() {
    if (opt_.genotypes.empty()) throw argument_error("--genotypes is required");
    GenotypeFormat format;
    if (opt_.format == "tsv")
      format = GenotypeFormat::Tsv;
    else if (opt_.format == "plink-raw")
      format = GenotypeFormat::PlinkRaw;
    else
      throw argument_error("--format must be tsv or plink-raw");
    const GenotypeMatrix raw = load_genotypes(opt_.genotypes, format);
    inputs_.push_back({{"path", opt_.genotypes}, {"sha256", file_sha256(opt_.genotypes)}});
    std::vector<std::string> all_missing;
    GenotypeMatrix g = maf_filter(raw, opt_.maf, &all_missing);
    for (const auto& id : all_missing) warn("SNP '" + id + "' has no observed genotype; dropped");
    if (g.m() == 0) throw degenerate_error("no SNPs pass the MAF filter (--maf " + std::to_string(opt_.maf) + ")");
    extra_["n_subjects"] = g.n();
    extra_["n_snps"] = g.m();
    extra_["n_snps_input"] = raw.m();
    return g;
  }

  void warn(const std::string& msg) {
    ++warnings_;
    log_ << "warning: " << msg << '\n';
  }

  void write_manifest(const std::filesystem::path& dir, const std::string& command) {
    json manifest = extra_;
    manifest["command"] = command;
    manifest["config"] = config_;
    manifest["inputs"] = inputs_;
    manifest["tool_version"] = GEMTOOLS_VERSION;
    manifest["warnings"] = warnings_;
    manifest["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    auto out = gemtools::detail::open_output((dir / "manifest.json").string());
    out << manifest.dump(2) << '\n';
  }

  const Options& opt_;
  std::ostream& log_;
  std::chrono::steady_clock::time_point start_;
  json config_ = json::object();
  json inputs_ = json::array();
  json extra_ = json::object();
  std::size_t warnings_ = 0;
};

}  // namespace detail

/// Parses `args` (args[0] is the program name) and runs one subcommand.
inline int run(const std::vector<std::string>& args, std::ostream& log = std::cerr) {
  Options opt;
  CLI::App app{"gemtools: ancestry clustering and case-control matching"};
  app.require_subcommand(1);

  auto add_panel = [&](CLI::App* sub) {
    sub->add_option("--genotypes", opt.genotypes, "genotype file")->required();
    sub->add_option("--format", opt.format, "tsv | plink-raw")->check(CLI::IsMember({"tsv", "plink-raw"}));
    sub->add_option("--maf", opt.maf, "keep SNPs with MAF strictly above this")->check(CLI::Range(0.0, 0.5));
    sub->add_option("--out", opt.out, "output directory")->required();
    sub->add_option("--threads", opt.threads, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--alpha", opt.alpha, "Tracy-Widom significance level");
  };
  auto add_engine = [&](CLI::App* sub) {
    add_panel(sub);
    sub->add_option("--base-size", opt.base_size, "base sample size N");
    sub->add_option("--max-cluster", opt.max_cluster, "maximum cluster size B");
    sub->add_option("--seed", opt.seed, "random seed")->required();
    sub->add_option("--full-base-factor", opt.full_base_factor, "clusters up to factor*N use every subject as base");
    sub->add_option("--min-split-size", opt.min_split_size, "smallest cluster that may be split");
    sub->add_option("--max-depth", opt.max_depth, "maximum tree depth");
  };

  auto* dac = app.add_subcommand("dacgem", "divide-and-conquer clustering (split clusters of B or more)");
  add_engine(dac);
  auto* clu = app.add_subcommand("cluster", "recursive clustering until every cluster has D = 0");
  add_engine(clu);
  auto* mat = app.add_subcommand("match", "match cases to controls within each leaf");
  add_panel(mat);
  mat->add_option("--phenotypes", opt.phenotypes, "phenotype file (1 = case, 0 = control)")->required();
  mat->add_option("--tree", opt.tree, "tree.json from dacgem or cluster")->required();
  mat->add_option("--min-dim", opt.min_dim, "minimum matching dimension D*");
  mat->add_option("--max-controls", opt.max_controls, "maximum controls per case");
  mat->add_option("--max-cases", opt.max_cases, "maximum cases per control");
  auto* sim = app.add_subcommand("simulate", "write a Balding-Nichols panel with truth labels");
  sim->add_option("--pops", opt.pops, "number of populations")->check(CLI::PositiveNumber);
  sim->add_option("--per-pop", opt.per_pop, "subjects per population (one value or one per population)")->delimiter(',');
  sim->add_option("--snps", opt.snps, "number of SNPs")->check(CLI::PositiveNumber);
  sim->add_option("--fst", opt.fst, "divergence per population (one value or one per population)")->delimiter(',');
  sim->add_option("--missing-rate", opt.missing_rate, "fraction of genotypes set missing");
  sim->add_option("--maf-low", opt.maf_low, "ancestral MAF lower bound");
  sim->add_option("--maf-high", opt.maf_high, "ancestral MAF upper bound");
  sim->add_option("--case-rate", opt.case_rate, "also write phenotypes.tsv with this case probability");
  sim->add_option("--seed", opt.seed, "random seed")->required();
  sim->add_option("--out", opt.out, "output directory")->required();
  sim->add_option("--threads", opt.threads, "worker threads")->check(CLI::PositiveNumber);

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    log << app.help();
    return exit_code::ok;
  } catch (const CLI::ParseError& e) {
    log << "error: " << e.what() << '\n';
    return exit_code::argument;
  }

  try {
    detail::Runner runner(opt, log);
    if (dac->parsed()) return runner.dacgem_or_cluster(EngineMode::DacGem);
    if (clu->parsed()) return runner.dacgem_or_cluster(EngineMode::ClusterGem);
    if (mat->parsed()) return runner.match();
    return runner.simulate();
  } catch (const Error& e) {
    log << "error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return exit_code::internal;
  }
}

inline int run(int argc, char** argv) {
  return run(std::vector<std::string>(argv, argv + argc));
}

}  // namespace gemtools::cli
