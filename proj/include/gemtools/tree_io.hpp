#pragma once

#include <fmt/format.h>

#include <algorithm>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include "gemtools/engine.hpp"
#include "gemtools/error.hpp"
#include "gemtools/genotype_io.hpp"
#include "gemtools/matching.hpp"
#include "json.hpp"

namespace gemtools {

using json = nlohmann::json;

inline json tw_report_json(const TwReport& r) {
  json tests = json::array();
  for (const auto& t : r.tests)
    tests.push_back({{"eigenvalue", t.eigenvalue}, {"n_eff", t.n_eff}, {"statistic", t.statistic}, {"significant", t.significant}});
  return {{"alpha", r.alpha},        {"critical_value", r.critical_value}, {"degenerate", r.degenerate},
          {"too_small", r.too_small}, {"capped", r.capped},                 {"tests", tests}};
}

// ---------------------------------------------------------------------------
// Tree JSON
// ---------------------------------------------------------------------------

/// Array of node records; `subjects` (ids) appear on leaves only.
inline json tree_to_json(const ClusterTree& tree, const GenotypeMatrix& g, std::size_t max_eigenvalues = 20) {
  json nodes = json::array();
  for (const auto& n : tree.nodes) {
    json rec;
    rec["id"] = n.id;
    rec["parent"] = n.parent ? json(*n.parent) : json(nullptr);
    rec["depth"] = n.depth;
    rec["size"] = n.subjects.size();
    rec["D"] = n.D;
    const auto ne = std::min(max_eigenvalues, n.eigenvalues.size());
    rec["eigenvalues"] = std::vector<double>(n.eigenvalues.begin(), n.eigenvalues.begin() + static_cast<std::ptrdiff_t>(ne));
    rec["k"] = n.k;
    rec["children"] = n.children;
    rec["stop_reason"] = n.is_leaf() ? to_string(n.stop_reason) : "none";
    if (n.is_leaf()) {
      std::vector<std::string> ids;
      ids.reserve(n.subjects.size());
      for (auto s : n.subjects) ids.push_back(g.subject_ids()[s]);
      rec["subjects"] = std::move(ids);
    }
    nodes.push_back(std::move(rec));
  }
  return nodes;
}

inline void save_tree(const ClusterTree& tree, const GenotypeMatrix& g, const std::string& path) {
  auto out = detail::open_output(path);
  out << tree_to_json(tree, g).dump(2) << '\n';
}

/// Rebuilds a tree from its JSON form against the genotype panel it was
/// built from. Internal nodes get the union of their leaves' subjects.
inline ClusterTree tree_from_json(const json& doc, const GenotypeMatrix& g) {
  if (!doc.is_array() || doc.empty()) throw parse_error("tree JSON must be a non-empty array of node records");
  std::unordered_map<std::string, Index> row_of;
  for (Index i = 0; i < g.n(); ++i) row_of.emplace(g.subject_ids()[i], i);

  ClusterTree tree;
  tree.nodes.resize(doc.size());
  try {
    for (const auto& rec : doc) {
      const auto id = rec.at("id").get<std::size_t>();
      if (id >= doc.size()) throw parse_error("node id " + std::to_string(id) + " out of range");
      ClusterNode& n = tree.nodes[id];
      n.id = id;
      if (!rec.at("parent").is_null()) n.parent = rec.at("parent").get<std::size_t>();
      n.depth = rec.at("depth").get<std::size_t>();
      n.D = rec.at("D").get<std::size_t>();
      n.eigenvalues = rec.at("eigenvalues").get<std::vector<double>>();
      n.k = rec.at("k").get<std::size_t>();
      n.children = rec.at("children").get<std::vector<std::size_t>>();
      n.stop_reason = stop_reason_from_string(rec.at("stop_reason").get<std::string>());
      if (rec.contains("subjects")) {
        for (const auto& sid : rec.at("subjects").get<std::vector<std::string>>()) {
          auto it = row_of.find(sid);
          if (it == row_of.end()) throw validation_error("tree subject '" + sid + "' is not in the genotype panel");
          n.subjects.push_back(it->second);
        }
      }
    }
  } catch (const json::exception& e) {
    throw parse_error(std::string("malformed tree JSON: ") + e.what());
  }
  for (auto& n : tree.nodes)
    for (std::size_t c = 0; c < n.children.size(); ++c) tree.nodes.at(n.children[c]).child_index = c;
  // children always carry larger ids than their parent
  for (auto it = tree.nodes.rbegin(); it != tree.nodes.rend(); ++it) {
    if (it->is_leaf()) {
      std::sort(it->subjects.begin(), it->subjects.end());
      continue;
    }
    it->subjects.clear();
    for (auto c : it->children) {
      if (c <= it->id) throw parse_error("tree JSON child ids must exceed their parent id");
      const auto& cs = tree.nodes[c].subjects;
      it->subjects.insert(it->subjects.end(), cs.begin(), cs.end());
    }
    std::sort(it->subjects.begin(), it->subjects.end());
  }
  return tree;
}

inline ClusterTree load_tree(const std::string& path, const GenotypeMatrix& g) {
  auto in = detail::open_input(path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw parse_error(path + ": " + e.what());
  }
  return tree_from_json(doc, g);
}

/// Graphviz digraph, one node per cluster labelled "id / size / D".
inline void write_tree_dot(std::ostream& out, const ClusterTree& tree) {
  out << "digraph gemtools {\n";
  for (const auto& n : tree.nodes)
    out << "  n" << n.id << " [label=\"" << n.id << " / " << n.subjects.size() << " / " << n.D << "\"];\n";
  for (const auto& n : tree.nodes)
    for (auto c : n.children) out << "  n" << n.id << " -> n" << c << ";\n";
  out << "}\n";
}

inline void save_tree_dot(const ClusterTree& tree, const std::string& path) {
  auto out = detail::open_output(path);
  write_tree_dot(out, tree);
}

// ---------------------------------------------------------------------------
// Per-node eigenmaps
// ---------------------------------------------------------------------------

inline void write_node_coords(std::ostream& out, const ClusterNode& node, const GenotypeMatrix& g) {
  for (std::size_t i = 0; i < node.subjects.size(); ++i) {
    out << g.subject_ids()[node.subjects[i]];
    for (Eigen::Index c = 0; c < node.coords.cols(); ++c)
      out << '\t' << fmt::format("{:.17g}", node.coords(static_cast<Eigen::Index>(i), c));
    out << '\n';
  }
}

inline json node_eigen_json(const ClusterNode& node) {
  return {{"id", node.id},         {"D", node.D},           {"eigenvalues", node.eigenvalues},
          {"alpha", node.tw.alpha}, {"tw", tw_report_json(node.tw)}, {"matrix_order", node.matrix_order},
          {"base_size", node.base.size()}};
}

// ---------------------------------------------------------------------------
// Matches
// ---------------------------------------------------------------------------

/// `leaf_id set_id subject_id role` rows; unmatched rows use set_id "-"
/// and append a reason column.
inline void write_matches(std::ostream& out, const std::vector<LeafMatch>& leaves,
                          const PhenotypeTable& phenotypes) {
  for (const auto& lm : leaves) {
    for (const auto& set : lm.result.sets) {
      for (const auto& id : set.cases) out << lm.leaf_id << '\t' << set.set_id << '\t' << id << "\tcase\n";
      for (const auto& id : set.controls) out << lm.leaf_id << '\t' << set.set_id << '\t' << id << "\tcontrol\n";
    }
    for (const auto& u : lm.result.unmatched) {
      const Status* st = phenotypes.find(u.subject_id);
      out << lm.leaf_id << "\t-\t" << u.subject_id << '\t' << (st ? to_string(*st) : "unknown") << '\t' << u.reason
          << '\n';
    }
  }
}

inline void save_matches(const std::vector<LeafMatch>& leaves, const PhenotypeTable& phenotypes,
                         const std::string& path) {
  auto out = detail::open_output(path);
  write_matches(out, leaves, phenotypes);
}

/// One row per leaf: sets, unmatched count, mean within-set distance.
inline void write_match_summary(std::ostream& out, const std::vector<LeafMatch>& leaves) {
  out << "leaf_id\tn_cases\tn_controls\tD\td\tn_sets\tn_unmatched\tmean_within_set_distance\tstatus\n";
  for (const auto& lm : leaves) {
    std::size_t pairs = 0;
    for (const auto& s : lm.result.sets) pairs += s.cases.size() + s.controls.size() - 1;
    const double mean = pairs == 0 ? 0.0 : lm.result.total_cost / static_cast<double>(pairs);
    std::string status = "ok";
    if (!lm.error.empty())
      status = "error";
    else if (lm.result.sets.empty())
      status = "single_arm";
    out << lm.leaf_id << '\t' << lm.n_cases << '\t' << lm.n_controls << '\t' << lm.D << '\t' << lm.d << '\t'
        << lm.result.sets.size() << '\t' << lm.result.unmatched.size() << '\t' << fmt::format("{:.17g}", mean)
        << '\t' << status << '\n';
  }
}

}  // namespace gemtools
