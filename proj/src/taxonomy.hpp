#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"

namespace lqm {

enum class Layer { lightweight, diagnostic };

std::string_view to_string(Layer layer);
std::optional<Layer> parse_layer(std::string_view text);

inline constexpr int kMaxTaxonomyDepth = 3;

struct TaxonomyNode {
  std::string id;
  std::string label;
  std::string definition;
  int depth = 0;             // 1 = category, 2 = error type, 3 = subcategory
  std::string parent;        // empty for categories
  std::vector<std::size_t> children;  // indices into the schema's node list

  Layer layer() const { return depth < 3 ? Layer::lightweight : Layer::diagnostic; }
  bool annotatable_leaf() const { return children.empty(); }
};

/// category -> error type -> subcategory, by node id.
struct TaxonomyPath {
  std::string category;
  std::optional<std::string> error_type;
  std::optional<std::string> subcategory;

  /// Id of the deepest node set on the path.
  const std::string& deepest() const;
  /// "category/error_type/subcategory" with absent levels omitted.
  std::string key() const;

  friend bool operator==(const TaxonomyPath&, const TaxonomyPath&) = default;
};

struct PathCheck {
  bool valid = false;
  bool lightweight_complete = false;
  bool diagnostic_complete = false;
  std::string error;  // set when !valid
};

/// An immutable, validated error hierarchy.
class TaxonomySchema {
 public:
  /// Parses the taxonomy file format; throws Error(validation) naming the
  /// offending node on duplicate ids, orphans, cycles or depth violations.
  static TaxonomySchema parse(std::string_view text);

  /// Renders the schema back into the taxonomy file format.
  std::string serialize() const;

  const std::string& name() const { return name_; }
  const std::string& version() const { return version_; }
  const std::vector<std::string>& levels() const { return levels_; }
  std::span<const TaxonomyNode> nodes() const { return nodes_; }
  const std::vector<std::size_t>& roots() const { return roots_; }

  const TaxonomyNode* find(std::string_view id) const;

  PathCheck check(const TaxonomyPath& path) const;

  /// Annotatable paths for a layer in document order. Lightweight lists every
  /// error type (and childless categories); diagnostic lists every leaf.
  std::vector<TaxonomyPath> leaves(Layer layer) const;

  /// Path from the root to the node with this id.
  std::optional<TaxonomyPath> path_to(std::string_view id) const;

  std::string label_for(const TaxonomyPath& path) const;

  nlohmann::ordered_json to_json() const;

  bool structurally_equal(const TaxonomySchema& other) const;

 private:
  std::string name_;
  std::string version_;
  std::vector<std::string> levels_;
  std::vector<TaxonomyNode> nodes_;
  std::vector<std::size_t> roots_;
  std::unordered_map<std::string, std::size_t> index_;
};

const TaxonomySchema& builtin_lqm();
const TaxonomySchema& builtin_mqm();
/// "LQM" or "MQM" (case-insensitive); nullptr otherwise.
const TaxonomySchema* builtin_taxonomy(std::string_view name);

std::string_view builtin_lqm_source();
std::string_view builtin_mqm_source();

}  // namespace lqm
