#include "taxonomy.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>
#include <unordered_set>

#include "error.hpp"

namespace lqm {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool is_slug(std::string_view id) {
  if (id.empty() || id.front() == '-' || id.back() == '-') return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-';
  });
}

struct RawNode {
  TaxonomyNode node;
  std::size_t line = 0;
  bool has_depth = false;
};

[[noreturn]] void parse_error(std::size_t line, const std::string& message) {
  fail_validation("taxonomy line " + std::to_string(line) + ": " + message);
}

}  // namespace

std::string_view to_string(Layer layer) {
  return layer == Layer::lightweight ? "lightweight" : "diagnostic";
}

std::optional<Layer> parse_layer(std::string_view text) {
  if (text == "lightweight") return Layer::lightweight;
  if (text == "diagnostic") return Layer::diagnostic;
  return std::nullopt;
}

const std::string& TaxonomyPath::deepest() const {
  if (subcategory) return *subcategory;
  if (error_type) return *error_type;
  return category;
}

std::string TaxonomyPath::key() const {
  std::string out = category;
  if (error_type) out += "/" + *error_type;
  if (subcategory) out += "/" + *subcategory;
  return out;
}

TaxonomySchema TaxonomySchema::parse(std::string_view text) {
  TaxonomySchema schema;
  std::vector<RawNode> raw;
  bool in_node = false;
  std::unordered_set<std::string> seen_keys;

  std::size_t line_no = 0;
  std::istringstream lines{std::string(text)};
  std::string buffer;
  while (std::getline(lines, buffer)) {
    ++line_no;
    const std::string_view t = trim(buffer);
    if (t.empty() || t.front() == '#') continue;
    if (t == "[node]") {
      raw.push_back({});
      raw.back().line = line_no;
      in_node = true;
      seen_keys.clear();
      continue;
    }
    const auto colon = t.find(':');
    if (colon == std::string_view::npos) parse_error(line_no, "expected 'key: value'");
    const std::string key(trim(t.substr(0, colon)));
    const std::string value(trim(t.substr(colon + 1)));
    if (!seen_keys.insert(key).second) parse_error(line_no, "repeated key '" + key + "'");

    if (!in_node) {
      if (key == "name") {
        schema.name_ = value;
      } else if (key == "version") {
        schema.version_ = value;
      } else if (key == "levels") {
        std::string_view rest = value;
        while (!rest.empty()) {
          const auto bar = rest.find('|');
          const auto item = trim(rest.substr(0, bar));
          if (item.empty()) parse_error(line_no, "empty level name");
          schema.levels_.emplace_back(item);
          if (bar == std::string_view::npos) break;
          rest = rest.substr(bar + 1);
        }
      } else {
        parse_error(line_no, "unknown header key '" + key + "'");
      }
    } else {
      auto& node = raw.back();
      if (key == "id") {
        node.node.id = value;
      } else if (key == "label") {
        node.node.label = value;
      } else if (key == "definition") {
        node.node.definition = value;
      } else if (key == "parent") {
        node.node.parent = value;
      } else if (key == "depth") {
        if (value.size() != 1 || value[0] < '0' || value[0] > '9') {
          parse_error(line_no, "depth must be a small integer");
        }
        node.node.depth = value[0] - '0';
        node.has_depth = true;
      } else {
        parse_error(line_no, "unknown node key '" + key + "'");
      }
    }
  }

  if (schema.name_.empty()) fail_validation("taxonomy: missing 'name' header");
  if (raw.empty()) fail_validation("taxonomy '" + schema.name_ + "' has no nodes");

  for (auto& r : raw) {
    if (r.node.id.empty()) parse_error(r.line, "node without id");
    if (!is_slug(r.node.id)) {
      parse_error(r.line, "node '" + r.node.id + "': id must be a lowercase hyphenated slug");
    }
    if (r.node.label.empty()) parse_error(r.line, "node '" + r.node.id + "' has no label");
    if (!r.has_depth) parse_error(r.line, "node '" + r.node.id + "' has no depth");
    if (!schema.index_.emplace(r.node.id, schema.nodes_.size()).second) {
      parse_error(r.line, "duplicate node id '" + r.node.id + "'");
    }
    schema.nodes_.push_back(r.node);
  }

  // Parent links: orphans and cycles first, then depth consistency.
  for (std::size_t i = 0; i < schema.nodes_.size(); ++i) {
    const auto& n = schema.nodes_[i];
    if (n.parent.empty()) continue;
    if (!schema.index_.count(n.parent)) {
      parse_error(raw[i].line, "node '" + n.id + "' is an orphan: parent '" + n.parent +
                                   "' does not exist");
    }
    std::unordered_set<std::size_t> visited{i};
    std::size_t cur = i;
    while (!schema.nodes_[cur].parent.empty()) {
      const auto it = schema.index_.find(schema.nodes_[cur].parent);
      if (it == schema.index_.end()) break;
      cur = it->second;
      if (!visited.insert(cur).second) {
        parse_error(raw[i].line, "node '" + n.id + "' is part of a cycle");
      }
    }
  }

  for (std::size_t i = 0; i < schema.nodes_.size(); ++i) {
    auto& n = schema.nodes_[i];
    if (n.depth < 1 || n.depth > kMaxTaxonomyDepth) {
      parse_error(raw[i].line, "node '" + n.id + "' has depth " + std::to_string(n.depth) +
                                   " (allowed 1.." + std::to_string(kMaxTaxonomyDepth) + ")");
    }
    if (n.parent.empty()) {
      if (n.depth != 1) {
        parse_error(raw[i].line, "node '" + n.id + "' has no parent but depth " +
                                     std::to_string(n.depth));
      }
      schema.roots_.push_back(i);
    } else {
      const std::size_t p = schema.index_.at(n.parent);
      if (schema.nodes_[p].depth + 1 != n.depth) {
        parse_error(raw[i].line, "node '" + n.id + "' has depth " + std::to_string(n.depth) +
                                     " but its parent '" + n.parent + "' has depth " +
                                     std::to_string(schema.nodes_[p].depth));
      }
      schema.nodes_[p].children.push_back(i);
    }
  }
  return schema;
}

std::string TaxonomySchema::serialize() const {
  std::ostringstream out;
  out << "name: " << name_ << "\n";
  if (!version_.empty()) out << "version: " << version_ << "\n";
  if (!levels_.empty()) {
    out << "levels: ";
    for (std::size_t i = 0; i < levels_.size(); ++i) out << (i ? " | " : "") << levels_[i];
    out << "\n";
  }
  for (const auto& n : nodes_) {
    out << "\n[node]\n";
    out << "id: " << n.id << "\n";
    out << "label: " << n.label << "\n";
    out << "depth: " << n.depth << "\n";
    if (!n.parent.empty()) out << "parent: " << n.parent << "\n";
    if (!n.definition.empty()) out << "definition: " << n.definition << "\n";
  }
  return out.str();
}

const TaxonomyNode* TaxonomySchema::find(std::string_view id) const {
  const auto it = index_.find(std::string(id));
  return it == index_.end() ? nullptr : &nodes_[it->second];
}

PathCheck TaxonomySchema::check(const TaxonomyPath& path) const {
  PathCheck r;
  const TaxonomyNode* cat = find(path.category);
  if (cat == nullptr) {
    r.error = "unknown category '" + path.category + "'";
    return r;
  }
  if (cat->depth != 1) {
    r.error = "'" + path.category + "' is not a category";
    return r;
  }
  const TaxonomyNode* deepest = cat;
  if (path.error_type) {
    const TaxonomyNode* type = find(*path.error_type);
    if (type == nullptr) {
      r.error = "unknown error type '" + *path.error_type + "'";
      return r;
    }
    if (type->parent != cat->id) {
      r.error = "broken chain: '" + *path.error_type + "' is not an error type of '" +
                cat->id + "'";
      return r;
    }
    deepest = type;
  }
  if (path.subcategory) {
    if (!path.error_type) {
      r.error = "subcategory '" + *path.subcategory + "' given without an error type";
      return r;
    }
    const TaxonomyNode* sub = find(*path.subcategory);
    if (sub == nullptr) {
      r.error = "unknown subcategory '" + *path.subcategory + "'";
      return r;
    }
    if (sub->parent != *path.error_type) {
      r.error = "broken chain: '" + *path.subcategory + "' is not a subcategory of '" +
                *path.error_type + "'";
      return r;
    }
    deepest = sub;
  }
  r.lightweight_complete = path.error_type.has_value() || cat->children.empty();
  r.diagnostic_complete = deepest->children.empty();
  if (!r.lightweight_complete && !r.diagnostic_complete) {
    r.error = "incomplete path: category '" + cat->id + "' requires an error type";
    return r;
  }
  r.valid = true;
  return r;
}

std::vector<TaxonomyPath> TaxonomySchema::leaves(Layer layer) const {
  std::vector<TaxonomyPath> out;
  for (std::size_t ci : roots_) {
    const auto& cat = nodes_[ci];
    if (cat.children.empty()) {
      out.push_back({cat.id, std::nullopt, std::nullopt});
      continue;
    }
    for (std::size_t ti : cat.children) {
      const auto& type = nodes_[ti];
      if (layer == Layer::lightweight || type.children.empty()) {
        out.push_back({cat.id, type.id, std::nullopt});
        continue;
      }
      for (std::size_t si : type.children) {
        out.push_back({cat.id, type.id, nodes_[si].id});
      }
    }
  }
  return out;
}

std::optional<TaxonomyPath> TaxonomySchema::path_to(std::string_view id) const {
  std::vector<const TaxonomyNode*> chain;
  const TaxonomyNode* n = find(id);
  while (n != nullptr) {
    chain.push_back(n);
    n = n->parent.empty() ? nullptr : find(n->parent);
  }
  if (chain.empty()) return std::nullopt;
  std::reverse(chain.begin(), chain.end());
  TaxonomyPath p{chain[0]->id, std::nullopt, std::nullopt};
  if (chain.size() > 1) p.error_type = chain[1]->id;
  if (chain.size() > 2) p.subcategory = chain[2]->id;
  return p;
}

std::string TaxonomySchema::label_for(const TaxonomyPath& path) const {
  const TaxonomyNode* n = find(path.deepest());
  return n ? n->label : path.deepest();
}

nlohmann::ordered_json TaxonomySchema::to_json() const {
  using json = nlohmann::ordered_json;
  auto node_json = [&](auto&& self, std::size_t i) -> json {
    const auto& n = nodes_[i];
    json j;
    j["id"] = n.id;
    j["label"] = n.label;
    j["depth"] = n.depth;
    j["layer"] = std::string(to_string(n.layer()));
    j["annotatable"] = n.children.empty() || n.depth == 2;
    j["definition"] = n.definition;
    json kids = json::array();
    for (std::size_t c : n.children) kids.push_back(self(self, c));
    j["children"] = std::move(kids);
    return j;
  };
  json j;
  j["name"] = name_;
  j["version"] = version_;
  j["levels"] = levels_;
  json roots = json::array();
  for (std::size_t r : roots_) roots.push_back(node_json(node_json, r));
  j["nodes"] = std::move(roots);
  return j;
}

bool TaxonomySchema::structurally_equal(const TaxonomySchema& other) const {
  if (name_ != other.name_ || version_ != other.version_ || levels_ != other.levels_ ||
      nodes_.size() != other.nodes_.size() || roots_ != other.roots_) {
    return false;
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& a = nodes_[i];
    const auto& b = other.nodes_[i];
    if (a.id != b.id || a.label != b.label || a.definition != b.definition ||
        a.depth != b.depth || a.parent != b.parent || a.children != b.children) {
      return false;
    }
  }
  return true;
}

const TaxonomySchema& builtin_lqm() {
  static const TaxonomySchema schema = TaxonomySchema::parse(builtin_lqm_source());
  return schema;
}

const TaxonomySchema& builtin_mqm() {
  static const TaxonomySchema schema = TaxonomySchema::parse(builtin_mqm_source());
  return schema;
}

const TaxonomySchema* builtin_taxonomy(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "lqm") return &builtin_lqm();
  if (lower == "mqm") return &builtin_mqm();
  return nullptr;
}

}  // namespace lqm
