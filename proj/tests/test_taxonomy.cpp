#include "doctest.h"

#include <algorithm>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "error.hpp"
#include "taxonomy.hpp"

using namespace lqm;

namespace {

TaxonomyPath path(std::string c, std::optional<std::string> t = std::nullopt,
                  std::optional<std::string> s = std::nullopt) {
  return {std::move(c), std::move(t), std::move(s)};
}

std::string error_of(std::string_view text) {
  try {
    TaxonomySchema::parse(text);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::validation);
    return e.what();
  }
  return {};
}

bool contains(const std::vector<TaxonomyPath>& v, const TaxonomyPath& p) {
  return std::find(v.begin(), v.end(), p) != v.end();
}

// Count-table rows (category label, error-type label, subcategory label or
// "---"), written out independently of data/lqm.taxonomy.
const std::vector<std::tuple<std::string, std::string, std::string>> kCountRows = {
    {"sociolinguistics", "code & register selection", "standardization interference (vertical mismatch)"},
    {"semantics", "lexical semantics", "named entity"},
    {"sociolinguistics", "code & register selection", "wrong dialect (horizontal mismatch)"},
    {"semantics", "lexical semantics", "coverage: unknown term/dialect"},
    {"semantics", "propositional semantics", "omission"},
    {"semantics", "lexical semantics", "unnatural/ unidiomatic style"},
    {"morphosyntax", "grammar", "verbal features"},
    {"semantics", "lexical semantics", "awkward style"},
    {"pragmatics", "use, context, cultural appropriateness", "mwes, proverbs & metaphors"},
    {"semantics", "discourse semantics", "pronouns"},
    {"semantics", "propositional semantics", "addition"},
    {"semantics", "lexical semantics", "disambiguation: cross-variety interference"},
    {"semantics", "lexical semantics", "wrong term"},
    {"semantics", "propositional semantics", "hallucination"},
    {"semantics", "lexical semantics", "undertranslation"},
    {"orthography/ writing conventions", "spelling", "typo / slip"},
    {"semantics", "lexical semantics", "disambiguation: polysemy failure"},
    {"semantics", "lexical semantics", "transliteration"},
    {"pragmatics", "use, context, cultural appropriateness", "speech acts mismatch"},
    {"pragmatics", "use, context, cultural appropriateness", "forms of address (vocatives/honorifics/titles)"},
    {"semantics", "lexical semantics", "overtranslated"},
    {"semantics", "lexical semantics", "untranslated"},
    {"semantics", "discourse semantics", "inconsistent with terminology resource"},
    {"pragmatics", "use, context, cultural appropriateness", "discourse marker mismatch"},
    {"sociolinguistics", "code & register selection", "register mismatch"},
    {"morphosyntax", "grammar", "nominal features"},
    {"pragmatics", "use, context, cultural appropriateness", "code switching"},
    {"semantics", "discourse semantics", "inconsistent style"},
    {"orthography/ writing conventions", "surface mechanics", "currency format"},
    {"orthography/ writing conventions", "punctuation", "---"},
    {"semantics", "lexical semantics", "unintelligible"},
    {"graphetics", "character encoding", "---"},
    {"orthography/ writing conventions", "surface mechanics", "number format"},
    {"semantics", "discourse semantics", "inconsistent use of terminology"},
};

}  // namespace

TEST_CASE("built-in LQM shape") {
  const auto& lqm = builtin_lqm();
  CHECK(lqm.name() == "LQM");
  REQUIRE(lqm.roots().size() == 6);
  std::vector<std::string> cats;
  for (auto r : lqm.roots()) cats.push_back(lqm.nodes()[r].id);
  CHECK(cats == std::vector<std::string>{"sociolinguistics", "pragmatics", "semantics",
                                         "morphosyntax", "orthography", "graphetics"});
  CHECK(lqm.levels().size() == 6);
  CHECK(lqm.levels()[4] == "orthography/writing conventions");

  const auto diag = lqm.leaves(Layer::diagnostic);
  CHECK(diag.size() == 41);
  const auto light = lqm.leaves(Layer::lightweight);
  CHECK(light.size() == 13);

  const auto* lex = lqm.find("lexical-semantics");
  REQUIRE(lex != nullptr);
  CHECK(lex->children.size() == 12);
  const auto* sem = lqm.find("semantics");
  CHECK(sem->children.size() == 3);
  CHECK(lqm.find("code-register-selection")->children.size() == 3);
}

TEST_CASE("built-in LQM covers every count-table row") {
  const auto& lqm = builtin_lqm();
  const auto diag = lqm.leaves(Layer::diagnostic);
  std::set<std::string> leaf_keys;
  for (const auto& p : diag) leaf_keys.insert(p.key());
  CHECK(leaf_keys.size() == diag.size());

  int matched = 0;
  for (const auto& [cat, type, sub] : kCountRows) {
    const auto it = std::find_if(diag.begin(), diag.end(), [&](const TaxonomyPath& p) {
      const std::string& deepest_label = lqm.find(p.deepest())->label;
      return deepest_label == (sub == "---" ? type : sub) &&
             lqm.find(p.category)->label == cat;
    });
    INFO(cat << " / " << type << " / " << sub);
    REQUIRE(it != diag.end());
    const std::string type_label = lqm.find(*it->error_type)->label;
    if (sub == "untranslated") {
      // The hierarchy table files it under propositional semantics.
      CHECK(type_label == "propositional semantics");
    } else {
      CHECK(type_label == type);
    }
    if (sub == "---") CHECK_FALSE(it->subcategory.has_value());
    ++matched;
  }
  CHECK(matched == 34);
}

TEST_CASE("built-in MQM") {
  const auto& mqm = builtin_mqm();
  CHECK(mqm.roots().size() == 5);
  CHECK(mqm.leaves(Layer::diagnostic).size() == 20);
  CHECK(mqm.leaves(Layer::lightweight) == mqm.leaves(Layer::diagnostic));
  CHECK(mqm.check(path("accuracy", "mistranslation")).valid);
  CHECK(builtin_taxonomy("mqm") == &mqm);
  CHECK(builtin_taxonomy("Lqm") == &builtin_lqm());
  CHECK(builtin_taxonomy("other") == nullptr);
}

TEST_CASE("validate_path") {
  const auto& lqm = builtin_lqm();

  auto r = lqm.check(path("semantics", "lexical-semantics", "named-entity"));
  CHECK(r.valid);
  CHECK(r.diagnostic_complete);
  CHECK(r.lightweight_complete);

  r = lqm.check(path("graphetics", "character-encoding"));
  CHECK(r.valid);
  CHECK(r.diagnostic_complete);
  CHECK(r.lightweight_complete);

  r = lqm.check(path("semantics", "lexical-semantics"));
  CHECK(r.valid);
  CHECK(r.lightweight_complete);
  CHECK_FALSE(r.diagnostic_complete);

  r = lqm.check(path("semantics", "grammar"));
  CHECK_FALSE(r.valid);
  CHECK(r.error.find("broken chain") != std::string::npos);

  r = lqm.check(path("semantics", "lexical-semantics", "omission"));
  CHECK_FALSE(r.valid);
  CHECK(r.error.find("broken chain") != std::string::npos);

  r = lqm.check(path("semantics"));
  CHECK_FALSE(r.valid);
  CHECK(r.error.find("incomplete") != std::string::npos);

  CHECK_FALSE(lqm.check(path("nonsense")).valid);
  CHECK_FALSE(lqm.check(path("semantics", "nonsense")).valid);
  CHECK_FALSE(lqm.check(path("lexical-semantics")).valid);
  CHECK_FALSE(lqm.check(path("semantics", std::nullopt, "named-entity")).valid);
}

TEST_CASE("leaf enumeration") {
  const auto& lqm = builtin_lqm();
  const auto light = lqm.leaves(Layer::lightweight);
  const auto diag = lqm.leaves(Layer::diagnostic);
  CHECK(contains(light, path("sociolinguistics", "code-register-selection")));
  CHECK(contains(diag, path("sociolinguistics", "code-register-selection", "wrong-dialect")));
  CHECK(contains(diag, path("sociolinguistics", "code-register-selection",
                            "standardization-interference")));
  CHECK(contains(diag, path("sociolinguistics", "code-register-selection", "register-mismatch")));
  CHECK_FALSE(contains(diag, path("sociolinguistics", "code-register-selection")));
  // childless depth-2 nodes sit in both layers
  CHECK(contains(light, path("orthography", "punctuation")));
  CHECK(contains(diag, path("orthography", "punctuation")));
  CHECK(lqm.leaves(Layer::diagnostic) == diag);
}

TEST_CASE("every accepted path appears in some layer") {
  // Exhaustive over all (category, type?, sub?) id combinations, including
  // mismatched chains.
  const auto& lqm = builtin_lqm();
  const auto light = lqm.leaves(Layer::lightweight);
  const auto diag = lqm.leaves(Layer::diagnostic);
  std::vector<std::optional<std::string>> ids{std::nullopt};
  for (const auto& n : lqm.nodes()) ids.emplace_back(n.id);
  int accepted = 0;
  for (const auto& n : lqm.nodes()) {
    for (const auto& t : ids) {
      for (const auto& s : ids) {
        const TaxonomyPath p{n.id, t, s};
        const auto r = lqm.check(p);
        if (!r.valid) continue;
        ++accepted;
        CHECK((contains(light, p) || contains(diag, p)));
        CHECK(r.lightweight_complete == contains(light, TaxonomyPath{p.category, p.error_type, {}}));
        CHECK(r.diagnostic_complete == contains(diag, p));
      }
    }
  }
  CHECK(accepted == 41 + 13 - 4);
}

TEST_CASE("serialize round-trip") {
  for (const auto* schema : {&builtin_lqm(), &builtin_mqm()}) {
    const auto reparsed = TaxonomySchema::parse(schema->serialize());
    CHECK(reparsed.structurally_equal(*schema));
    CHECK(reparsed.serialize() == schema->serialize());
  }
}

TEST_CASE("minimal taxonomy") {
  const auto s = TaxonomySchema::parse(
      "name: tiny\n[node]\nid: a\nlabel: A\ndepth: 1\n\n[node]\nid: b\nlabel: B\ndepth: 2\n"
      "parent: a\n");
  CHECK(s.nodes().size() == 2);
  CHECK(s.leaves(Layer::diagnostic).size() == 1);
  CHECK(s.check(path("a", "b")).diagnostic_complete);
  CHECK_FALSE(s.check(path("a")).valid);
}

TEST_CASE("a childless category is annotatable on its own") {
  const auto s = TaxonomySchema::parse("name: flat\n[node]\nid: only\nlabel: Only\ndepth: 1\n");
  const auto r = s.check(path("only"));
  CHECK(r.valid);
  CHECK(s.leaves(Layer::lightweight).size() == 1);
}

TEST_CASE("schema validation errors name the node") {
  const std::string head = "name: bad\n";
  CHECK(error_of(head + "[node]\nid: a\nlabel: A\ndepth: 1\n[node]\nid: a\nlabel: A2\ndepth: 1\n")
            .find("duplicate node id 'a'") != std::string::npos);
  CHECK(error_of(head + "[node]\nid: b\nlabel: B\ndepth: 2\nparent: ghost\n")
            .find("'b' is an orphan") != std::string::npos);
  CHECK(error_of(head + "[node]\nid: a\nlabel: A\ndepth: 1\nparent: a\n")
            .find("'a' is part of a cycle") != std::string::npos);
  CHECK(error_of(head +
                 "[node]\nid: x\nlabel: X\ndepth: 2\nparent: y\n"
                 "[node]\nid: y\nlabel: Y\ndepth: 3\nparent: x\n")
            .find("cycle") != std::string::npos);
  CHECK(error_of(head +
                 "[node]\nid: a\nlabel: A\ndepth: 1\n[node]\nid: b\nlabel: B\ndepth: 2\nparent: a\n"
                 "[node]\nid: c\nlabel: C\ndepth: 3\nparent: b\n"
                 "[node]\nid: d\nlabel: D\ndepth: 4\nparent: c\n")
            .find("'d' has depth 4") != std::string::npos);
  CHECK(error_of(head + "[node]\nid: a\nlabel: A\ndepth: 1\n[node]\nid: b\nlabel: B\ndepth: 3\n"
                        "parent: a\n")
            .find("'b' has depth 3 but its parent 'a' has depth 1") != std::string::npos);
  CHECK(error_of(head + "[node]\nid: Bad Id\nlabel: A\ndepth: 1\n").find("slug") !=
        std::string::npos);
  CHECK(error_of(head + "[node]\nid: a\nlabel: A\ndepth: 1\ncolour: red\n")
            .find("unknown node key 'colour'") != std::string::npos);
  CHECK(error_of("[node]\nid: a\nlabel: A\ndepth: 1\n").find("missing 'name'") !=
        std::string::npos);
  CHECK(error_of("name: empty\n").find("no nodes") != std::string::npos);
}

TEST_CASE("to_json nests children and flags annotatable nodes") {
  const auto j = builtin_lqm().to_json();
  CHECK(j["name"] == "LQM");
  REQUIRE(j["nodes"].size() == 6);
  const auto& graphetics = j["nodes"][5];
  CHECK(graphetics["id"] == "graphetics");
  CHECK(graphetics["annotatable"] == false);
  CHECK(graphetics["children"][0]["id"] == "character-encoding");
  CHECK(graphetics["children"][0]["annotatable"] == true);
  CHECK(graphetics["children"][0]["children"].empty());
}
