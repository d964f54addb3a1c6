#pragma once

// Tabular ingestion: schema-driven CSV loading, the causal column split
// (complementary x_c vs descendant x_d), one-hot / standardized encoding
// fitted on training rows, seeded splits and a synthetic generator with a
// known hidden sensitive attribute.

#include "fairproxy/log.hpp"
#include "fairproxy/tensor.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace fairproxy {

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class ColumnKind { continuous, categorical };
enum class ColumnRole { x_c, x_d, sensitive, label, drop };
enum class ColumnTransform { none, log1p };

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(trim(cur));
  return out;
}

inline double parse_double(const std::string& s, const std::string& what) {
  double v = 0.0;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  if (!s.empty() && *b == '+') ++b;
  auto [p, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || p != e || !std::isfinite(v)) throw DataError("not a finite number in " + what + ": '" + s + "'");
  return v;
}

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::continuous;
  ColumnRole role = ColumnRole::drop;
  ColumnTransform transform = ColumnTransform::none;
  bool kind_set = false;
  bool role_set = false;
};

// Plain-text key = value schema. Grammar (one key per line, '#' comments):
//   csv.header = true|false          first non-comment line holds names
//   csv.delimiter = ,                single character ("tab" allowed)
//   csv.missing = ?                  token marking a missing cell
//   csv.comment = |                  lines starting with this are skipped
//   csv.skip_lines = 0               leading lines ignored before anything else
//   columns = a, b, c                field order (required without header)
//   column.<name>.kind = continuous|categorical
//   column.<name>.role = x_c|x_d|sensitive|label|drop
//   column.<name>.transform = none|log1p      continuous only
//   label.positive = v1, v2          values mapped to y = 1
//   sensitive.positive = v           values mapped to s = 1
struct SchemaSpec {
  std::vector<ColumnSpec> columns;
  bool header = false;
  char delimiter = ',';
  std::string missing = "?";
  std::string comment;
  std::size_t skip_lines = 0;
  std::vector<std::string> label_positive;
  std::vector<std::string> sensitive_positive;

  static SchemaSpec parse(std::istream& is) {
    SchemaSpec spec;
    std::map<std::string, ColumnSpec> by_name;
    std::vector<std::string> order;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      const std::string t = trim(line);
      if (t.empty() || t[0] == '#') continue;
      const auto eq = t.find('=');
      if (eq == std::string::npos) throw DataError("schema line " + std::to_string(lineno) + ": expected key = value");
      const std::string key = trim(t.substr(0, eq));
      const std::string val = trim(t.substr(eq + 1));
      auto bad = [&](const std::string& why) {
        return DataError("schema line " + std::to_string(lineno) + " (" + key + "): " + why);
      };
      if (key == "csv.header") {
        if (val != "true" && val != "false") throw bad("expected true or false");
        spec.header = val == "true";
      } else if (key == "csv.delimiter") {
        if (val == "tab") spec.delimiter = '\t';
        else if (val.size() == 1) spec.delimiter = val[0];
        else throw bad("delimiter must be one character");
      } else if (key == "csv.missing") {
        spec.missing = val;
      } else if (key == "csv.comment") {
        spec.comment = val;
      } else if (key == "csv.skip_lines") {
        spec.skip_lines = static_cast<std::size_t>(parse_double(val, key));
      } else if (key == "columns") {
        order = split_list(val, ',');
      } else if (key == "label.positive") {
        spec.label_positive = split_list(val, ',');
      } else if (key == "sensitive.positive") {
        spec.sensitive_positive = split_list(val, ',');
      } else if (key.rfind("column.", 0) == 0) {
        const auto dot = key.rfind('.');
        if (dot <= 7) throw bad("expected column.<name>.<field>");
        const std::string name = key.substr(7, dot - 7);
        const std::string field = key.substr(dot + 1);
        ColumnSpec& c = by_name[name];
        c.name = name;
        if (field == "kind") {
          if (val == "continuous") c.kind = ColumnKind::continuous;
          else if (val == "categorical") c.kind = ColumnKind::categorical;
          else throw bad("unknown kind '" + val + "'");
          c.kind_set = true;
        } else if (field == "role") {
          if (val == "x_c") c.role = ColumnRole::x_c;
          else if (val == "x_d") c.role = ColumnRole::x_d;
          else if (val == "sensitive") c.role = ColumnRole::sensitive;
          else if (val == "label") c.role = ColumnRole::label;
          else if (val == "drop") c.role = ColumnRole::drop;
          else throw bad("unknown role '" + val + "'");
          c.role_set = true;
        } else if (field == "transform") {
          if (val == "none") c.transform = ColumnTransform::none;
          else if (val == "log1p") c.transform = ColumnTransform::log1p;
          else throw bad("unknown transform '" + val + "'");
        } else {
          throw bad("unknown column field '" + field + "'");
        }
      } else {
        throw bad("unknown key");
      }
    }
    if (!order.empty()) {
      for (const auto& name : order) {
        auto it = by_name.find(name);
        if (it == by_name.end()) throw DataError("schema: column '" + name + "' listed but not described");
        spec.columns.push_back(it->second);
      }
      if (by_name.size() != order.size()) throw DataError("schema: described columns missing from 'columns' list");
    } else {
      if (!spec.header) throw DataError("schema: 'columns' is required when csv.header = false");
      for (auto& [name, c] : by_name) spec.columns.push_back(c);
    }
    spec.validate();
    return spec;
  }

  static SchemaSpec from_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open schema file: " + path);
    return parse(is);
  }

  void validate() const {
    std::size_t labels = 0, sensitives = 0, xc = 0, xd = 0;
    std::set<std::string> names;
    for (const auto& c : columns) {
      if (!names.insert(c.name).second) throw DataError("schema: duplicate column " + c.name);
      if (!c.role_set) throw DataError("schema: column " + c.name + " has no role");
      if ((c.role == ColumnRole::x_c || c.role == ColumnRole::x_d) && !c.kind_set) {
        throw DataError("schema: feature column " + c.name + " has no kind");
      }
      if (c.transform != ColumnTransform::none && c.kind != ColumnKind::continuous) {
        throw DataError("schema: transform on non-continuous column " + c.name);
      }
      labels += c.role == ColumnRole::label;
      sensitives += c.role == ColumnRole::sensitive;
      xc += c.role == ColumnRole::x_c;
      xd += c.role == ColumnRole::x_d;
    }
    if (labels != 1) throw DataError("schema: exactly one label column required");
    if (sensitives != 1) throw DataError("schema: exactly one sensitive column required");
    if (xc == 0) throw DataError("schema: at least one x_c column required");
    if (xd == 0) throw DataError("schema: at least one x_d column required");
    if (label_positive.empty()) throw DataError("schema: label.positive is required");
    if (sensitive_positive.empty()) throw DataError("schema: sensitive.positive is required");
  }

  const ColumnSpec& column_with_role(ColumnRole r) const {
    for (const auto& c : columns) {
      if (c.role == r) return c;
    }
    throw DataError("schema: no column with requested role");
  }

  std::string to_text() const {
    std::ostringstream os;
    os << "csv.header = " << (header ? "true" : "false") << '\n';
    os << "csv.delimiter = " << (delimiter == '\t' ? std::string("tab") : std::string(1, delimiter)) << '\n';
    os << "csv.missing = " << missing << '\n';
    if (!comment.empty()) os << "csv.comment = " << comment << '\n';
    if (skip_lines) os << "csv.skip_lines = " << skip_lines << '\n';
    os << "columns = ";
    for (std::size_t i = 0; i < columns.size(); ++i) os << (i ? ", " : "") << columns[i].name;
    os << '\n';
    static const char* roles[] = {"x_c", "x_d", "sensitive", "label", "drop"};
    for (const auto& c : columns) {
      if (c.kind_set) {
        os << "column." << c.name << ".kind = " << (c.kind == ColumnKind::continuous ? "continuous" : "categorical") << '\n';
      }
      os << "column." << c.name << ".role = " << roles[static_cast<int>(c.role)] << '\n';
      if (c.transform == ColumnTransform::log1p) os << "column." << c.name << ".transform = log1p\n";
    }
    auto join = [](const std::vector<std::string>& v) {
      std::string s;
      for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + v[i];
      return s;
    };
    os << "label.positive = " << join(label_positive) << '\n';
    os << "sensitive.positive = " << join(sensitive_positive) << '\n';
    return os.str();
  }
};

// Rows that survived missing-value filtering, as trimmed strings, with one
// entry per schema column (dropped columns kept as empty strings).
struct RawTable {
  SchemaSpec schema;
  std::vector<std::vector<std::string>> rows;
  std::size_t dropped_missing = 0;

  std::size_t column_index(const std::string& name) const {
    for (std::size_t i = 0; i < schema.columns.size(); ++i) {
      if (schema.columns[i].name == name) return i;
    }
    throw DataError("no column named " + name);
  }
};

inline void read_csv_into(RawTable& table, std::istream& is, const std::string& source) {
  const SchemaSpec& schema = table.schema;
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::size_t> field_of_column(schema.columns.size());
  std::iota(field_of_column.begin(), field_of_column.end(), 0);
  std::size_t expected_fields = schema.columns.size();
  bool need_header = schema.header;
  while (std::getline(is, line)) {
    ++lineno;
    if (lineno <= schema.skip_lines) continue;
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (!schema.comment.empty() && t.rfind(schema.comment, 0) == 0) continue;
    auto fields = split_list(t, schema.delimiter);
    for (auto& f : fields) {
      if (f.size() >= 2 && f.front() == '"' && f.back() == '"') f = f.substr(1, f.size() - 2);
    }
    if (need_header) {
      need_header = false;
      expected_fields = fields.size();
      for (std::size_t c = 0; c < schema.columns.size(); ++c) {
        auto it = std::find(fields.begin(), fields.end(), schema.columns[c].name);
        if (it == fields.end()) throw DataError(source + ": header lacks column " + schema.columns[c].name);
        field_of_column[c] = static_cast<std::size_t>(it - fields.begin());
      }
      for (const auto& f : fields) {
        bool known = false;
        for (const auto& c : schema.columns) known = known || c.name == f;
        if (!known) throw DataError(source + ": header column '" + f + "' is not described by the schema");
      }
      continue;
    }
    if (fields.size() != expected_fields) {
      throw DataError(source + ":" + std::to_string(lineno) + ": expected " + std::to_string(expected_fields) +
                      " fields, got " + std::to_string(fields.size()));
    }
    std::vector<std::string> row(schema.columns.size());
    bool missing = false;
    for (std::size_t c = 0; c < schema.columns.size(); ++c) {
      if (schema.columns[c].role == ColumnRole::drop) continue;
      std::string v = fields[field_of_column[c]];
      if (v.empty() || v == schema.missing) missing = true;
      row[c] = std::move(v);
    }
    if (missing) {
      ++table.dropped_missing;
      continue;
    }
    table.rows.push_back(std::move(row));
  }
}

// One encoded column: a standardized scalar or a one-hot block.
struct FeatureBlock {
  std::string name;
  ColumnKind kind = ColumnKind::continuous;
  ColumnTransform transform = ColumnTransform::none;
  std::size_t source_column = 0;
  std::size_t offset = 0;
  std::size_t width = 1;
  std::vector<std::string> levels;
  double mean = 0.0;
  double sd = 1.0;
};

struct Encoding {
  std::vector<FeatureBlock> xc_blocks;
  std::vector<FeatureBlock> xd_blocks;
  std::size_t xc_dim = 0;
  std::size_t xd_dim = 0;

  static double transformed(const FeatureBlock& b, const std::string& cell) {
    const double v = parse_double(cell, b.name);
    if (b.transform == ColumnTransform::log1p) {
      if (v <= -1.0) throw DataError("log1p transform undefined for " + b.name + " value " + cell);
      return std::log1p(v);
    }
    return v;
  }

  // Fits levels (sorted) and standardization on the given rows only.
  static Encoding fit(const RawTable& raw, const std::vector<std::size_t>& rows) {
    if (rows.empty()) throw DataError("cannot fit encoding on zero rows");
    Encoding enc;
    for (std::size_t c = 0; c < raw.schema.columns.size(); ++c) {
      const ColumnSpec& col = raw.schema.columns[c];
      if (col.role != ColumnRole::x_c && col.role != ColumnRole::x_d) continue;
      FeatureBlock b;
      b.name = col.name;
      b.kind = col.kind;
      b.transform = col.transform;
      b.source_column = c;
      if (col.kind == ColumnKind::categorical) {
        std::set<std::string> levels;
        for (std::size_t r : rows) levels.insert(raw.rows[r][c]);
        b.levels.assign(levels.begin(), levels.end());
        b.width = b.levels.size();
      } else {
        double mu = 0.0;
        for (std::size_t r : rows) mu += transformed(b, raw.rows[r][c]);
        mu /= static_cast<double>(rows.size());
        double var = 0.0;
        for (std::size_t r : rows) {
          const double d = transformed(b, raw.rows[r][c]) - mu;
          var += d * d;
        }
        var /= static_cast<double>(rows.size());
        b.mean = mu;
        b.sd = var > 0.0 ? std::sqrt(var) : 1.0;
      }
      auto& blocks = col.role == ColumnRole::x_c ? enc.xc_blocks : enc.xd_blocks;
      auto& dim = col.role == ColumnRole::x_c ? enc.xc_dim : enc.xd_dim;
      b.offset = dim;
      dim += b.width;
      blocks.push_back(std::move(b));
    }
    return enc;
  }

  // Unknown categorical levels become an all-zero block; the number of such
  // cells is returned.
  std::size_t encode_block(const FeatureBlock& b, const std::string& cell, Tensor& out, std::size_t r) const {
    if (b.kind == ColumnKind::continuous) {
      out(r, b.offset) = (transformed(b, cell) - b.mean) / b.sd;
      return 0;
    }
    auto it = std::lower_bound(b.levels.begin(), b.levels.end(), cell);
    if (it == b.levels.end() || *it != cell) return 1;
    out(r, b.offset + static_cast<std::size_t>(it - b.levels.begin())) = 1.0;
    return 0;
  }
};

// Encoded rows. s is carried for evaluation only and never enters x_c/x_d.
struct TabularDataset {
  Tensor x_c;
  Tensor x_d;
  std::vector<int> s;
  std::vector<int> y;
  std::vector<std::size_t> row_ids;  // indices into raw->rows
  Encoding encoding;
  std::shared_ptr<const RawTable> raw;
  std::size_t unknown_levels = 0;

  std::size_t size() const { return y.size(); }

  Tensor y_column() const { return column(y); }
  Tensor features() const { return hconcat({&x_c, &x_d}); }

  TabularDataset subset(const std::vector<std::size_t>& idx) const {
    TabularDataset out;
    out.x_c = x_c.gather_rows(idx);
    out.x_d = x_d.gather_rows(idx);
    for (std::size_t i : idx) {
      out.s.push_back(s.at(i));
      out.y.push_back(y.at(i));
      out.row_ids.push_back(row_ids.at(i));
    }
    out.encoding = encoding;
    out.raw = raw;
    return out;
  }
};

inline bool value_in(const std::string& v, const std::vector<std::string>& set) {
  return std::find(set.begin(), set.end(), v) != set.end();
}

// Encodes raw rows `ids` with a previously fitted encoding.
inline TabularDataset encode_rows(std::shared_ptr<const RawTable> raw, const Encoding& enc, const std::vector<std::size_t>& ids) {
  TabularDataset ds;
  ds.raw = raw;
  ds.encoding = enc;
  ds.row_ids = ids;
  ds.x_c = Tensor(ids.size(), enc.xc_dim);
  ds.x_d = Tensor(ids.size(), enc.xd_dim);
  const std::size_t s_col = raw->column_index(raw->schema.column_with_role(ColumnRole::sensitive).name);
  const std::size_t y_col = raw->column_index(raw->schema.column_with_role(ColumnRole::label).name);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    const auto& row = raw->rows.at(ids[r]);
    for (const auto& b : enc.xc_blocks) ds.unknown_levels += enc.encode_block(b, row[b.source_column], ds.x_c, r);
    for (const auto& b : enc.xd_blocks) ds.unknown_levels += enc.encode_block(b, row[b.source_column], ds.x_d, r);
    ds.s.push_back(value_in(row[s_col], raw->schema.sensitive_positive) ? 1 : 0);
    ds.y.push_back(value_in(row[y_col], raw->schema.label_positive) ? 1 : 0);
  }
  if (ds.unknown_levels > 0) {
    log::warn(std::to_string(ds.unknown_levels) + " categorical cells had levels unseen at fit time (encoded as zeros)");
  }
  return ds;
}

inline TabularDataset prepare(std::shared_ptr<const RawTable> raw, const std::vector<std::size_t>& fit_rows,
                              const std::vector<std::size_t>& rows) {
  return encode_rows(raw, Encoding::fit(*raw, fit_rows), rows);
}

inline TabularDataset from_raw(std::shared_ptr<const RawTable> raw) {
  std::vector<std::size_t> all(raw->rows.size());
  std::iota(all.begin(), all.end(), 0);
  return prepare(raw, all, all);
}

// Loads one or more CSV files (concatenated) and encodes every surviving row.
inline TabularDataset load_csv(const std::vector<std::string>& paths, const SchemaSpec& schema) {
  auto raw = std::make_shared<RawTable>();
  raw->schema = schema;
  for (const auto& p : paths) {
    std::ifstream is(p);
    if (!is) throw DataError("cannot open data file: " + p);
    read_csv_into(*raw, is, p);
  }
  if (raw->rows.empty()) throw DataError("no usable rows in input");
  log::info("loaded " + std::to_string(raw->rows.size()) + " rows; dropped " + std::to_string(raw->dropped_missing) +
            " rows with missing values");
  return from_raw(std::move(raw));
}

inline TabularDataset load_csv(const std::string& path, const SchemaSpec& schema) {
  return load_csv(std::vector<std::string>{path}, schema);
}

// Seeded row subset, re-encoded with statistics of the subset.
inline TabularDataset subsample(const TabularDataset& ds, std::size_t n, std::uint64_t seed) {
  if (n == 0 || n >= ds.size()) return ds;
  std::vector<std::size_t> idx(ds.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(n);
  std::sort(idx.begin(), idx.end());
  std::vector<std::size_t> ids;
  for (std::size_t i : idx) ids.push_back(ds.row_ids[i]);
  return prepare(ds.raw, ids, ids);
}

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Positions (into the dataset) of a seeded train/test partition, each side sorted.
inline SplitIndices split_indices(std::size_t n, double train_frac, std::uint64_t seed) {
  if (!(train_frac > 0.0 && train_frac < 1.0)) throw std::invalid_argument("train_frac must be in (0, 1)");
  if (n < 2) throw DataError("need at least two rows to split");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  auto n_train = static_cast<std::size_t>(std::llround(train_frac * static_cast<double>(n)));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
  SplitIndices out;
  out.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

// Train/test split; the encoding of both sides is refitted on train rows.
inline std::pair<TabularDataset, TabularDataset> split(const TabularDataset& ds, double train_frac, std::uint64_t seed) {
  const SplitIndices si = split_indices(ds.size(), train_frac, seed);
  std::vector<std::size_t> train_ids, test_ids;
  for (std::size_t i : si.train) train_ids.push_back(ds.row_ids[i]);
  for (std::size_t i : si.test) test_ids.push_back(ds.row_ids[i]);
  const Encoding enc = Encoding::fit(*ds.raw, train_ids);
  return {encode_rows(ds.raw, enc, train_ids), encode_rows(ds.raw, enc, test_ids)};
}

// Level name of a categorical block at row r, or "" for an all-zero block.
inline std::string decode_level(const TabularDataset& ds, const FeatureBlock& b, const Tensor& m, std::size_t r) {
  (void)ds;
  if (b.kind != ColumnKind::categorical) throw std::invalid_argument("decode_level on continuous block " + b.name);
  for (std::size_t k = 0; k < b.width; ++k) {
    if (m(r, b.offset + k) == 1.0) return b.levels[k];
  }
  return {};
}

// Generator mirroring the causal structure: s and x_c exogenous,
// x_d = A x_c + s_to_xd * (2s - 1) + noise, y ~ Bernoulli(sigmoid(logit)).
struct SyntheticSpec {
  std::size_t xc_dim = 2;
  std::size_t xd_dim = 4;
  double p_s = 0.5;
  double xc_to_xd = 0.5;
  double s_to_xd = 1.0;
  double s_to_y = 0.0;
  double noise = 0.5;
  double label_scale = 2.0;
  // Extra descendant equal to fpr_shift * (y + s (1 - y)) + noise: it marks
  // positives in group 0 but every row of group 1, inflating group-1 FPR.
  double fpr_shift = 0.0;
};

struct SyntheticTruth {
  std::vector<double> xc_to_xd;  // xd_dim x xc_dim, row-major
  std::vector<double> y_from_xc;
  std::vector<double> y_from_xd;
  double s_to_xd = 0.0;
  double s_to_y = 0.0;
};

inline SchemaSpec synthetic_schema(const SyntheticSpec& spec) {
  SchemaSpec schema;
  schema.header = true;
  auto add = [&](std::string name, ColumnRole role, ColumnKind kind = ColumnKind::continuous) {
    ColumnSpec c;
    c.name = std::move(name);
    c.role = role;
    c.kind = kind;
    c.role_set = true;
    c.kind_set = role == ColumnRole::x_c || role == ColumnRole::x_d;
    schema.columns.push_back(c);
  };
  for (std::size_t j = 0; j < spec.xc_dim; ++j) add("xc" + std::to_string(j), ColumnRole::x_c);
  for (std::size_t j = 0; j < spec.xd_dim; ++j) add("xd" + std::to_string(j), ColumnRole::x_d);
  if (spec.fpr_shift != 0.0) add("xd_fpr", ColumnRole::x_d);
  add("s", ColumnRole::sensitive, ColumnKind::categorical);
  add("y", ColumnRole::label, ColumnKind::categorical);
  schema.label_positive = {"1"};
  schema.sensitive_positive = {"1"};
  schema.validate();
  return schema;
}

inline std::shared_ptr<RawTable> synthetic_raw(std::size_t n, std::uint64_t seed, const SyntheticSpec& spec,
                                               SyntheticTruth* truth = nullptr) {
  if (n < 100) throw std::invalid_argument("make_synthetic: n must be at least 100");
  if (spec.xc_dim == 0 || spec.xd_dim == 0) throw std::invalid_argument("make_synthetic: dimensions must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  // Coefficients come from a stream fixed by the spec, not the seed, so
  // different seeds sample the same population.
  std::mt19937_64 coef_rng(0x5eedc0ef);
  SyntheticTruth t;
  t.s_to_xd = spec.s_to_xd;
  t.s_to_y = spec.s_to_y;
  for (std::size_t i = 0; i < spec.xd_dim * spec.xc_dim; ++i) t.xc_to_xd.push_back(spec.xc_to_xd * normal(coef_rng));
  for (std::size_t i = 0; i < spec.xc_dim; ++i) t.y_from_xc.push_back(normal(coef_rng));
  for (std::size_t i = 0; i < spec.xd_dim; ++i) t.y_from_xd.push_back(normal(coef_rng));

  auto raw = std::make_shared<RawTable>();
  raw->schema = synthetic_schema(spec);
  char buf[40];
  auto fmt = [&buf](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  std::vector<double> xc(spec.xc_dim), xd(spec.xd_dim);
  for (std::size_t r = 0; r < n; ++r) {
    const int s = unif(rng) < spec.p_s ? 1 : 0;
    const double sc = 2.0 * s - 1.0;
    for (auto& v : xc) v = normal(rng);
    double logit = spec.s_to_y * sc;
    for (std::size_t j = 0; j < spec.xd_dim; ++j) {
      double v = spec.s_to_xd * sc + spec.noise * normal(rng);
      for (std::size_t k = 0; k < spec.xc_dim; ++k) v += t.xc_to_xd[j * spec.xc_dim + k] * xc[k];
      xd[j] = v;
      logit += t.y_from_xd[j] * v / std::sqrt(static_cast<double>(spec.xd_dim));
    }
    for (std::size_t k = 0; k < spec.xc_dim; ++k) logit += t.y_from_xc[k] * xc[k];
    const int y = unif(rng) < 1.0 / (1.0 + std::exp(-spec.label_scale * logit)) ? 1 : 0;
    std::vector<std::string> row;
    for (double v : xc) row.push_back(fmt(v));
    for (double v : xd) row.push_back(fmt(v));
    if (spec.fpr_shift != 0.0) row.push_back(fmt(spec.fpr_shift * (y + s * (1 - y)) + spec.noise * normal(rng)));
    row.push_back(std::to_string(s));
    row.push_back(std::to_string(y));
    raw->rows.push_back(std::move(row));
  }
  if (truth) *truth = t;
  return raw;
}

inline TabularDataset make_synthetic(std::size_t n, std::uint64_t seed, const SyntheticSpec& spec,
                                     SyntheticTruth* truth = nullptr) {
  return from_raw(synthetic_raw(n, seed, spec, truth));
}

inline void write_raw_csv(const RawTable& raw, std::ostream& os) {
  const auto& cols = raw.schema.columns;
  for (std::size_t c = 0; c < cols.size(); ++c) os << (c ? "," : "") << cols[c].name;
  os << '\n';
  for (const auto& row : raw.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) os << (c ? "," : "") << row[c];
    os << '\n';
  }
}

}  // namespace fairproxy
