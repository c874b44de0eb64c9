#include "reports.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>
#include <vector>

#include "error.hpp"
#include "unicode.hpp"

namespace lqm::reports {

namespace {

using json = nlohmann::ordered_json;

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  std::string s = buf;
  if (s == "-0.0" || s == "-0.00" || s == "-0.000") s.erase(0, 1);
  return s;
}

std::string num(const json& v, int decimals, std::string_view absent = "--") {
  if (v.is_null()) return std::string(absent);
  return fixed(v.get<double>(), decimals);
}

class Table {
 public:
  /// Columns before `first_numeric` are left-aligned text.
  explicit Table(std::vector<std::string> header, std::size_t first_numeric = 1)
      : header_(std::move(header)), first_numeric_(first_numeric) {}

  void row(std::vector<std::string> cells) {
    cells.resize(header_.size());
    rows_.push_back(std::move(cells));
  }
  void rule() { rows_.emplace_back(); }

  std::string str() const {
    std::vector<std::size_t> width(header_.size());
    auto widen = [&](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) {
        width[i] = std::max(width[i], unicode::scalar_length(cells[i]));
      }
    };
    widen(header_);
    for (const auto& r : rows_) widen(r);
    std::size_t total = 0;
    for (auto w : width) total += w;
    total += 2 * (width.empty() ? 0 : width.size() - 1);

    std::string out;
    auto line = [&](const std::vector<std::string>& cells) {
      std::string l;
      for (std::size_t i = 0; i < cells.size(); ++i) {
        const std::size_t pad = width[i] - unicode::scalar_length(cells[i]);
        if (i > 0) l += "  ";
        if (i < first_numeric_) {
          l += cells[i] + std::string(pad, ' ');
        } else {
          l += std::string(pad, ' ') + cells[i];
        }
      }
      while (!l.empty() && l.back() == ' ') l.pop_back();
      out += l + "\n";
    };
    line(header_);
    out += std::string(total, '-') + "\n";
    for (const auto& r : rows_) {
      if (r.empty()) {
        out += std::string(total, '-') + "\n";
      } else {
        line(r);
      }
    }
    return out;
  }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
  std::size_t first_numeric_;
};

// direction -> model -> value
using Grid = std::map<std::string, std::map<std::string, std::string>>;

std::string render_grid(const std::string& corner, const Grid& grid) {
  std::set<std::string> models;
  for (const auto& [dir, row] : grid) {
    for (const auto& [m, v] : row) models.insert(m);
  }
  std::vector<std::string> header{corner};
  header.insert(header.end(), models.begin(), models.end());
  Table t(header);
  for (const auto& [dir, row] : grid) {
    std::vector<std::string> cells{dir};
    for (const auto& m : models) {
      const auto it = row.find(m);
      cells.push_back(it == row.end() ? "--" : it->second);
    }
    t.row(std::move(cells));
  }
  return t.str();
}

}  // namespace

std::string render_scores(const json& r) {
  Grid macro, micro;
  for (const auto& g : r.at("per_group")) {
    const auto dir = g.at("direction").get<std::string>();
    const auto model = g.at("model_id").get<std::string>();
    macro[dir][model] = num(g.at("macro_mean"), 2);
    micro[dir][model] = num(g.at("micro_score"), 2);
  }
  return "LQM scores (macro mean of segment scores)\n" + render_grid("Direction", macro) +
         "\nMicro-averaged LQM (pooled mass over pooled length)\n" + render_grid("Direction", micro);
}

std::string render_bleu(const json& r) {
  Grid grid;
  for (const auto& g : r.at("per_group")) {
    grid[g.at("direction").get<std::string>()][g.at("model_id").get<std::string>()] =
        num(g.at("mean_bleu"), 2);
  }
  return "Mean sentence BLEU (" + r.at("tokenizer").get<std::string>() + ")\n" +
         render_grid("Direction", grid);
}

std::string render_iaa(const json& r) {
  std::string out = "Agreement " + r.at("annotator_a").get<std::string>() + " vs " +
                    r.at("annotator_b").get<std::string>() + " over " +
                    std::to_string(r.at("n_items").get<std::size_t>()) + " segments\n";
  Table det({"Detection", "F1", "TP", "FP", "FN"});
  for (const auto& [key, name] : std::vector<std::pair<std::string, std::string>>{
           {"char", "character"}, {"overlap_span", "span (overlap)"}, {"exact_span", "span (exact)"}}) {
    const auto& d = r.at("detection").at(key);
    det.row({name, num(d.at("f1"), 3), d.at("tp").dump(), d.at("fp").dump(), d.at("fn").dump()});
  }
  out += det.str() + "\n";
  Table lab({"Label", "Pairs", "Matched agr.", "Label F1", "Kappa"});
  for (const auto& [key, f1] : r.at("label_f1").items()) {
    lab.row({key, r.at("label_detail").at(key).at("n_pairs").dump(),
             num(r.at("label_matched_agreement").at(key), 3), num(f1, 3), num(r.at("kappa").at(key), 3)});
  }
  return out + lab.str();
}

std::string render_distribution(const json& d) {
  const auto grouping = d.at("grouping").get<std::string>();
  std::vector<std::string> header;
  if (grouping == "model") {
    header = {"Model"};
  } else {
    header = {"Category"};
    if (grouping != "category") header.push_back("Error type");
    if (grouping == "subcategory") header.push_back("Subcategory");
  }
  const std::size_t n_labels = header.size();
  header.insert(header.end(), {"Count", "Rate (%)"});
  Table t(header, n_labels);
  for (const auto& r : d.at("rows")) {
    auto cells = r.at("labels").get<std::vector<std::string>>();
    cells.resize(n_labels, "---");
    cells.push_back(r.at("count").dump());
    cells.push_back(num(r.at("rate"), 1));
    t.row(std::move(cells));
  }
  t.rule();
  std::vector<std::string> total(n_labels);
  total[0] = "Total";
  total.push_back(d.at("total").dump());
  total.push_back(d.at("total").get<std::size_t>() ? "100.0" : "--");
  t.row(std::move(total));
  return t.str();
}

std::string render_dashboard(const json& rows) {
  std::set<std::string> models;
  std::vector<std::string> categories;
  for (const auto& r : rows) {
    for (const auto& m : r.at("model_contribution").at("rows")) models.insert(m.at("key").get<std::string>());
    for (const auto& c : r.at("category_distribution").at("rows")) {
      const auto label = c.at("labels").at(0).get<std::string>();
      if (std::find(categories.begin(), categories.end(), label) == categories.end()) {
        categories.push_back(label);
      }
    }
  }
  std::sort(categories.begin(), categories.end());
  auto part = [&](const char* title, const std::vector<std::string>& columns, const char* table,
                  bool by_key) {
    std::vector<std::string> header{"Direction", "Dialect"};
    header.insert(header.end(), columns.begin(), columns.end());
    Table t(header, 2);
    for (const auto& r : rows) {
      std::map<std::string, std::string> share;
      for (const auto& e : r.at(table).at("rows")) {
        const auto k = by_key ? e.at("key").get<std::string>() : e.at("labels").at(0).get<std::string>();
        share[k] = num(e.at("rate"), 1);
      }
      std::vector<std::string> cells{r.at("direction").get<std::string>(),
                                     r.at("dialect").is_null() ? "--" : r.at("dialect").get<std::string>()};
      for (const auto& c : columns) {
        const auto it = share.find(c);
        cells.push_back(it == share.end() ? "--" : it->second);
      }
      t.row(std::move(cells));
    }
    return std::string(title) + "\n" + t.str();
  };
  return part("Part I: model error contribution (%)", {models.begin(), models.end()},
              "model_contribution", true) +
         "\n" + part("Part II: error category distribution (%)", categories, "category_distribution", false);
}

std::string render_correlation(const json& c) {
  Table t({"Coefficient", "Value", "p-value"});
  t.row({"Pearson r", num(c.at("pearson_r"), 3), num(c.at("p_values").at("pearson"), 4)});
  t.row({"Spearman rho", num(c.at("spearman_rho"), 3), num(c.at("p_values").at("spearman"), 4)});
  std::string out = "Correlation over " + c.at("n").dump() + " segments (p-values: " +
                    c.at("p_values").at("method").get<std::string>() + ")\n" + t.str();
  if (c.contains("reason")) out += "note: " + c.at("reason").get<std::string>() + "\n";
  return out;
}

std::string render_buckets(const json& b) {
  const auto& cut = b.at("cutoffs");
  const auto& sizes = b.at("sizes");
  std::string out = "Length buckets (target tokens): short <= " + num(cut.at("q33"), 0) + " (n=" +
                    sizes.at("short").dump() + "), medium <= " + num(cut.at("q66"), 0) + " (n=" +
                    sizes.at("medium").dump() + "), long (n=" + sizes.at("long").dump() + ")\n";
  Table cells({"Direction", "Model", "Short", "Medium", "Long"}, 2);
  std::map<std::pair<std::string, std::string>, std::map<std::string, std::string>> grid;
  for (const auto& c : b.at("cells")) {
    grid[{c.at("direction").get<std::string>(), c.at("model_id").get<std::string>()}]
        [c.at("bucket").get<std::string>()] = num(c.at("micro_score"), 2);
  }
  for (const auto& [key, v] : grid) {
    cells.row({key.first, key.second, v.at("short"), v.at("medium"), v.at("long")});
  }
  out += cells.str() + "\nRank stability (Spearman rho between buckets)\n";
  Table rs({"Direction", "S-M", "M-L", "S-L"});
  const auto& stab = b.at("rank_stability");
  for (const auto& r : stab.at("per_direction")) {
    rs.row({r.at("direction").get<std::string>(), num(r.at("short_medium"), 2), num(r.at("medium_long"), 2),
            num(r.at("short_long"), 2)});
  }
  rs.rule();
  const auto& m = stab.at("mean");
  rs.row({"Mean", num(m.at("short_medium"), 2), num(m.at("medium_long"), 2), num(m.at("short_long"), 2)});
  return out + rs.str();
}

std::string render(std::string_view kind, const json& report) {
  if (kind == "score") return render_scores(report);
  if (kind == "bleu") return render_bleu(report);
  if (kind == "iaa") return render_iaa(report);
  if (kind == "dist") return render_distribution(report.at("distribution"));
  if (kind == "attrib") return render_dashboard(report.at("dashboard"));
  if (kind == "corr") return render_correlation(report.at("correlation"));
  if (kind == "buckets") return render_buckets(report.at("buckets"));
  fail(ErrorKind::usage, "no table layout for '" + std::string(kind) + "'");
}

}  // namespace lqm::reports
