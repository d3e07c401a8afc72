#pragma once

// Tabular EHR data handling: CSV ingestion of the eight-column patient
// schema, SSN synthesis and merging, preprocessing (standardization and
// one-hot encoding), and the client partitioning used by the federated
// trainer. All operations are pure: they take a Dataset by const reference
// and return a new one.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "fedehr/csv.hpp"
#include "fedehr/errors.hpp"
#include "fedehr/linalg.hpp"
#include "fedehr/rng.hpp"
#include "fedehr/util.hpp"

namespace fedehr {

// --- patient record ----------------------------------------------------------

enum class Sex { female, male };
enum class Smoker { no, yes };
enum class Region { northeast, northwest, southeast, southwest };

inline const char* to_string(Sex s) { return s == Sex::female ? "female" : "male"; }
inline const char* to_string(Smoker s) { return s == Smoker::no ? "no" : "yes"; }
inline const char* to_string(Region r) {
  switch (r) {
    case Region::northeast: return "northeast";
    case Region::northwest: return "northwest";
    case Region::southeast: return "southeast";
    default: return "southwest";
  }
}

inline std::optional<Sex> sex_from_string(std::string_view s) {
  if (s == "female") return Sex::female;
  if (s == "male") return Sex::male;
  return std::nullopt;
}
inline std::optional<Smoker> smoker_from_string(std::string_view s) {
  if (s == "no") return Smoker::no;
  if (s == "yes") return Smoker::yes;
  return std::nullopt;
}
inline std::optional<Region> region_from_string(std::string_view s) {
  if (s == "northeast") return Region::northeast;
  if (s == "northwest") return Region::northwest;
  if (s == "southeast") return Region::southeast;
  if (s == "southwest") return Region::southwest;
  return std::nullopt;
}

// "DDD-DD-DDDD"
inline bool is_valid_ssn(std::string_view ssn) {
  if (ssn.size() != 11) return false;
  for (std::size_t i = 0; i < 11; ++i) {
    if (i == 3 || i == 6) {
      if (ssn[i] != '-') return false;
    } else if (ssn[i] < '0' || ssn[i] > '9') {
      return false;
    }
  }
  return true;
}

struct PatientRecord {
  int age = 0;
  Sex sex = Sex::female;
  double bmi = 0.0;
  int children = 0;
  Smoker smoker = Smoker::no;
  Region region = Region::northeast;
  double charges = 0.0;
  std::string ssn;  // empty until assigned
};

// --- dataset -----------------------------------------------------------------

enum class ColumnKind { numeric, categorical, target, identifier };

struct Column {
  std::string name;
  ColumnKind kind = ColumnKind::numeric;
  std::vector<double> numbers;       // numeric / target storage
  std::vector<std::string> labels;   // categorical / identifier storage

  bool numeric_like() const { return kind == ColumnKind::numeric || kind == ColumnKind::target; }
  std::size_t size() const { return numeric_like() ? numbers.size() : labels.size(); }
};

struct NumericStats {
  double mean = 0.0;
  double stddev = 0.0;  // population (divisor N)
};

struct PreprocessStats {
  std::map<std::string, NumericStats> standardized;
  std::map<std::string, std::vector<std::string>> categories;  // sorted, duplicate-free

  void merge(const PreprocessStats& other) {
    for (const auto& [k, v] : other.standardized) standardized[k] = v;
    for (const auto& [k, v] : other.categories) categories[k] = v;
  }
};

class Dataset {
 public:
  Dataset() = default;

  explicit Dataset(std::vector<Column> columns) : columns_(std::move(columns)) {
    if (!columns_.empty()) rows_ = columns_.front().size();
    std::set<std::string> names;
    std::size_t targets = 0;
    for (const auto& col : columns_) {
      if (col.size() != rows_) throw LengthMismatch("column " + col.name + " has mismatched length");
      if (!names.insert(col.name).second) throw Error("duplicate column name " + col.name);
      if (col.kind == ColumnKind::target) ++targets;
    }
    if (targets > 1) throw Error("dataset has more than one target column");
  }

  std::size_t row_count() const { return rows_; }
  std::size_t column_count() const { return columns_.size(); }
  const std::vector<Column>& columns() const { return columns_; }

  bool has_column(std::string_view name) const { return find(name) != columns_.size(); }

  const Column& column(std::string_view name) const {
    const std::size_t i = find(name);
    if (i == columns_.size()) throw UnknownColumn("no column named " + std::string(name));
    return columns_[i];
  }

  std::size_t column_index(std::string_view name) const {
    const std::size_t i = find(name);
    if (i == columns_.size()) throw UnknownColumn("no column named " + std::string(name));
    return i;
  }

  const std::optional<PreprocessStats>& stats() const { return stats_; }
  void set_stats(PreprocessStats s) { stats_ = std::move(s); }
  void merge_stats(const PreprocessStats& s) {
    if (!stats_) stats_ = PreprocessStats{};
    stats_->merge(s);
  }

  Dataset select_rows(const std::vector<std::size_t>& idx) const {
    std::vector<Column> cols;
    cols.reserve(columns_.size());
    for (const auto& col : columns_) {
      Column out;
      out.name = col.name;
      out.kind = col.kind;
      if (col.numeric_like()) {
        out.numbers.reserve(idx.size());
        for (std::size_t i : idx) out.numbers.push_back(col.numbers[i]);
      } else {
        out.labels.reserve(idx.size());
        for (std::size_t i : idx) out.labels.push_back(col.labels[i]);
      }
      cols.push_back(std::move(out));
    }
    Dataset ds(std::move(cols));
    ds.stats_ = stats_;
    return ds;
  }

  // Mutable access for operations defined below; keeps the invariant checks
  // in one place by rebuilding through the constructor where shape changes.
  std::vector<Column>& mutable_columns() { return columns_; }

 private:
  std::size_t find(std::string_view name) const {
    for (std::size_t i = 0; i < columns_.size(); ++i)
      if (columns_[i].name == name) return i;
    return columns_.size();
  }

  std::vector<Column> columns_;
  std::size_t rows_ = 0;
  std::optional<PreprocessStats> stats_;
};

struct ClientShard {
  std::string client_id;
  Matrix features;               // x_i
  std::vector<double> target;    // y_i
  std::size_t sample_count = 0;
};

struct DesignMatrix {
  Matrix features;
  std::vector<double> target;
  std::vector<std::string> feature_names;
};

// --- CSV ingestion -------------------------------------------------------------

namespace detail {

inline std::size_t require_column(const std::vector<std::string>& header, std::string_view name) {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (to_lower(header[i]) == name) return i;
  throw MissingColumn("required column '" + std::string(name) + "' not found in header");
}

inline std::size_t optional_column(const std::vector<std::string>& header, std::string_view name) {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (to_lower(header[i]) == name) return i;
  return header.size();
}

}  // namespace detail

// Parses the Fig. 5 patient schema. Column order in the file is free; the
// header is matched case-insensitively. When require_ssn is false a file
// without an SSN column is accepted and the records come back with empty
// ssn fields (the ingest flow then synthesizes and merges them).
inline std::vector<PatientRecord> parse_csv(std::istream& in, bool require_ssn = true) {
  const CsvTable table = read_csv_table(in);
  const auto& header = table.header;

  const std::size_t c_age = detail::require_column(header, "age");
  const std::size_t c_sex = detail::require_column(header, "sex");
  const std::size_t c_bmi = detail::require_column(header, "bmi");
  const std::size_t c_children = detail::require_column(header, "children");
  const std::size_t c_smoker = detail::require_column(header, "smoker");
  const std::size_t c_region = detail::require_column(header, "region");
  const std::size_t c_charges = detail::require_column(header, "charges");
  const std::size_t c_ssn = require_ssn ? detail::require_column(header, "ssn")
                                        : detail::optional_column(header, "ssn");

  std::vector<PatientRecord> records;
  records.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::size_t row_no = r + 1;  // 1-based data rows
    if (row.size() != header.size())
      throw MalformedRow(row_no, "expected " + std::to_string(header.size()) + " fields, got " +
                                     std::to_string(row.size()));
    PatientRecord rec;

    const auto age = parse_int(row[c_age]);
    if (!age || *age < 0 || *age > 130) throw MalformedRow(row_no, "bad age '" + row[c_age] + "'");
    rec.age = static_cast<int>(*age);

    const auto sex = sex_from_string(row[c_sex]);
    if (!sex) throw MalformedRow(row_no, "unknown sex '" + row[c_sex] + "'");
    rec.sex = *sex;

    const auto bmi = parse_double(row[c_bmi]);
    if (!bmi || !std::isfinite(*bmi) || *bmi <= 0) throw MalformedRow(row_no, "bad bmi '" + row[c_bmi] + "'");
    rec.bmi = *bmi;

    const auto children = parse_int(row[c_children]);
    if (!children || *children < 0) throw MalformedRow(row_no, "bad children '" + row[c_children] + "'");
    rec.children = static_cast<int>(*children);

    const auto smoker = smoker_from_string(row[c_smoker]);
    if (!smoker) throw MalformedRow(row_no, "unknown smoker '" + row[c_smoker] + "'");
    rec.smoker = *smoker;

    const auto region = region_from_string(row[c_region]);
    if (!region) throw MalformedRow(row_no, "unknown region '" + row[c_region] + "'");
    rec.region = *region;

    const auto charges = parse_double(row[c_charges]);
    if (!charges || !std::isfinite(*charges) || *charges < 0)
      throw MalformedRow(row_no, "bad charges '" + row[c_charges] + "'");
    rec.charges = *charges;

    if (c_ssn != header.size()) {
      if (!is_valid_ssn(row[c_ssn])) throw MalformedRow(row_no, "bad SSN '" + row[c_ssn] + "'");
      rec.ssn = row[c_ssn];
    }

    records.push_back(std::move(rec));
  }
  return records;
}

// --- SSN synthesis -------------------------------------------------------------

// Distinct synthetic SSNs in the "999-DD-DDDD" form (the whole Fig. 5
// population carries the 999 area prefix). The suffix space has exactly 10^6
// values.
inline std::vector<std::string> synthesize_ssns(std::uint64_t seed, std::size_t n) {
  constexpr std::size_t kSpace = 1000000;
  if (n > kSpace) throw ExhaustedSpace("cannot generate " + std::to_string(n) + " distinct SSNs");
  Rng rng(seed);
  std::set<std::uint32_t> used;
  std::vector<std::string> out;
  out.reserve(n);
  while (out.size() < n) {
    const auto v = static_cast<std::uint32_t>(rng.next_below(kSpace));
    if (!used.insert(v).second) continue;
    char buf[16];
    std::snprintf(buf, sizeof(buf), "999-%02u-%04u", v / 10000, v % 10000);
    out.emplace_back(buf);
  }
  return out;
}

inline std::vector<PatientRecord> merge_ssn(std::vector<PatientRecord> records,
                                            const std::vector<std::string>& ssns) {
  if (records.size() != ssns.size())
    throw LengthMismatch("have " + std::to_string(records.size()) + " records but " +
                         std::to_string(ssns.size()) + " SSNs");
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!is_valid_ssn(ssns[i])) throw MalformedSSN("bad SSN '" + ssns[i] + "'");
    records[i].ssn = ssns[i];
  }
  return records;
}

// --- record/dataset conversion --------------------------------------------------

inline Dataset records_to_dataset(const std::vector<PatientRecord>& records) {
  const std::size_t n = records.size();
  Column age{"age", ColumnKind::numeric, {}, {}};
  Column sex{"sex", ColumnKind::categorical, {}, {}};
  Column bmi{"bmi", ColumnKind::numeric, {}, {}};
  Column children{"children", ColumnKind::numeric, {}, {}};
  Column smoker{"smoker", ColumnKind::categorical, {}, {}};
  Column region{"region", ColumnKind::categorical, {}, {}};
  Column charges{"charges", ColumnKind::target, {}, {}};
  Column ssn{"SSN", ColumnKind::identifier, {}, {}};

  std::size_t with_ssn = 0;
  for (const auto& r : records) {
    age.numbers.push_back(r.age);
    sex.labels.emplace_back(to_string(r.sex));
    bmi.numbers.push_back(r.bmi);
    children.numbers.push_back(r.children);
    smoker.labels.emplace_back(to_string(r.smoker));
    region.labels.emplace_back(to_string(r.region));
    charges.numbers.push_back(r.charges);
    ssn.labels.push_back(r.ssn);
    if (!r.ssn.empty()) ++with_ssn;
  }

  std::vector<Column> cols{age, sex, bmi, children, smoker, region, charges};
  if (with_ssn == n && n > 0) {
    cols.push_back(std::move(ssn));
  } else if (with_ssn != 0) {
    throw Error("records are inconsistently labelled with SSNs");
  }
  return Dataset(std::move(cols));
}

// Round-trips through the CSV text form so the same validation applies.
inline std::vector<PatientRecord> dataset_to_records(const Dataset& ds) {
  CsvTable table;
  for (const auto& col : ds.columns()) table.header.push_back(col.name);
  for (std::size_t r = 0; r < ds.row_count(); ++r) {
    std::vector<std::string> row;
    for (const auto& col : ds.columns())
      row.push_back(col.numeric_like() ? format_double(col.numbers[r]) : col.labels[r]);
    table.rows.push_back(std::move(row));
  }
  std::ostringstream out;
  write_csv_table(out, table);
  std::istringstream in(out.str());
  return parse_csv(in, ds.has_column("SSN"));
}

// --- preprocessing ---------------------------------------------------------------

namespace detail {

inline NumericStats column_stats(const std::vector<double>& values) {
  const std::size_t n = values.size();
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n);  // population variance
  return {mean, std::sqrt(var)};
}

}  // namespace detail

// Rescales each named column to mean 0 / standard deviation 1 using the
// population convention (divisor N). The returned stats allow the exact
// inverse transform.
inline std::pair<Dataset, PreprocessStats> standardize(const Dataset& ds,
                                                       const std::vector<std::string>& columns) {
  Dataset out = ds;
  PreprocessStats stats;
  for (const auto& name : columns) {
    const std::size_t i = out.column_index(name);
    Column& col = out.mutable_columns()[i];
    if (!col.numeric_like()) throw NonNumericColumn("column " + name + " is not numeric");
    if (col.numbers.empty()) throw DegenerateColumn("column " + name + " is empty");
    const NumericStats s = detail::column_stats(col.numbers);
    if (!(s.stddev > 0.0)) throw DegenerateColumn("column " + name + " has zero variance");
    for (double& v : col.numbers) v = (v - s.mean) / s.stddev;
    stats.standardized[name] = s;
  }
  out.merge_stats(stats);
  return {std::move(out), std::move(stats)};
}

// Inverse of standardize for every column recorded in stats.
inline Dataset unstandardize(const Dataset& ds, const PreprocessStats& stats) {
  Dataset out = ds;
  for (auto& col : out.mutable_columns()) {
    const auto it = stats.standardized.find(col.name);
    if (it == stats.standardized.end()) continue;
    for (double& v : col.numbers) v = v * it->second.stddev + it->second.mean;
  }
  return out;
}

namespace detail {

inline Dataset one_hot_encode(const Dataset& ds, const std::vector<std::string>& columns,
                              const PreprocessStats* reuse, PreprocessStats& learned) {
  std::set<std::string> targets(columns.begin(), columns.end());
  std::vector<Column> cols;
  for (const auto& col : ds.columns()) {
    if (!targets.count(col.name)) {
      cols.push_back(col);
      continue;
    }
    if (col.kind != ColumnKind::categorical)
      throw Error("column " + col.name + " is not categorical");
    targets.erase(col.name);

    std::vector<std::string> categories;
    if (reuse) {
      const auto it = reuse->categories.find(col.name);
      if (it == reuse->categories.end())
        throw UnknownColumn("no stored categories for column " + col.name);
      categories = it->second;
    } else {
      std::set<std::string> unique(col.labels.begin(), col.labels.end());
      categories.assign(unique.begin(), unique.end());  // lexicographic
    }
    learned.categories[col.name] = categories;

    std::vector<Column> expanded;
    for (const auto& cat : categories)
      expanded.push_back(Column{col.name + "=" + cat, ColumnKind::numeric,
                                std::vector<double>(col.labels.size(), 0.0), {}});
    for (std::size_t r = 0; r < col.labels.size(); ++r) {
      const auto it = std::lower_bound(categories.begin(), categories.end(), col.labels[r]);
      if (it == categories.end() || *it != col.labels[r])
        throw UnknownCategory("value '" + col.labels[r] + "' not in stored categories of " + col.name);
      expanded[static_cast<std::size_t>(it - categories.begin())].numbers[r] = 1.0;
    }
    for (auto& e : expanded) cols.push_back(std::move(e));
  }
  if (!targets.empty()) throw UnknownColumn("no column named " + *targets.begin());

  Dataset out(std::move(cols));
  if (ds.stats()) out.set_stats(*ds.stats());
  out.merge_stats(learned);
  return out;
}

}  // namespace detail

// Expands each named categorical column of k categories into k binary
// columns "<col>=<category>" in lexicographic category order.
inline Dataset one_hot(const Dataset& ds, const std::vector<std::string>& columns) {
  PreprocessStats learned;
  return detail::one_hot_encode(ds, columns, nullptr, learned);
}

// Transform-time variant: reuses stored category lists and rejects values
// outside them.
inline Dataset one_hot_with(const Dataset& ds, const std::vector<std::string>& columns,
                            const PreprocessStats& stats) {
  PreprocessStats learned;
  return detail::one_hot_encode(ds, columns, &stats, learned);
}

inline Dataset drop_column(const Dataset& ds, std::string_view name) {
  const std::size_t idx = ds.column_index(name);  // throws UnknownColumn
  std::vector<Column> cols;
  for (std::size_t i = 0; i < ds.columns().size(); ++i)
    if (i != idx) cols.push_back(ds.columns()[i]);
  Dataset out(std::move(cols));
  if (ds.stats()) out.set_stats(*ds.stats());
  return out;
}

// --- matrices and partitioning ----------------------------------------------------

// All non-target columns must be numeric by this point (encode first).
inline DesignMatrix to_matrix(const Dataset& ds) {
  std::vector<const Column*> feature_cols;
  const Column* target = nullptr;
  for (const auto& col : ds.columns()) {
    switch (col.kind) {
      case ColumnKind::numeric: feature_cols.push_back(&col); break;
      case ColumnKind::target: target = &col; break;
      case ColumnKind::categorical:
        throw Error("categorical column " + col.name + " must be one-hot encoded first");
      case ColumnKind::identifier:
        throw Error("identifier column " + col.name + " must be dropped first");
    }
  }
  if (!target) throw MissingColumn("dataset has no target column");

  DesignMatrix dm;
  dm.features = Matrix(ds.row_count(), feature_cols.size());
  for (std::size_t j = 0; j < feature_cols.size(); ++j) {
    dm.feature_names.push_back(feature_cols[j]->name);
    for (std::size_t r = 0; r < ds.row_count(); ++r)
      dm.features.at(r, j) = feature_cols[j]->numbers[r];
  }
  dm.target = target->numbers;
  return dm;
}

// Seeded shuffle followed by a near-equal contiguous split; the first
// (rows mod n) shards take one extra row.
inline std::vector<ClientShard> partition(const Dataset& ds, std::size_t n_clients,
                                          std::uint64_t seed,
                                          const std::vector<std::string>& labels) {
  if (n_clients < 1) throw Error("need at least one client");
  if (n_clients > ds.row_count())
    throw TooManyClients(std::to_string(n_clients) + " clients for " +
                         std::to_string(ds.row_count()) + " rows");
  if (labels.size() != n_clients) throw LengthMismatch("need one label per client");

  Rng rng(seed);
  const std::vector<std::size_t> idx = shuffled_indices(ds.row_count(), rng);

  const std::size_t base = ds.row_count() / n_clients;
  const std::size_t extra = ds.row_count() % n_clients;

  std::vector<ClientShard> shards;
  std::size_t offset = 0;
  for (std::size_t c = 0; c < n_clients; ++c) {
    const std::size_t size = base + (c < extra ? 1 : 0);
    std::vector<std::size_t> slice(idx.begin() + static_cast<std::ptrdiff_t>(offset),
                                   idx.begin() + static_cast<std::ptrdiff_t>(offset + size));
    offset += size;
    DesignMatrix dm = to_matrix(ds.select_rows(slice));
    shards.push_back(ClientShard{labels[c], std::move(dm.features), std::move(dm.target), size});
  }
  return shards;
}

// Seeded shuffle; the test set takes round(N * test_fraction) rows.
inline std::pair<Dataset, Dataset> train_test_split(const Dataset& ds, double test_fraction,
                                                    std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw Error("test_fraction must be in (0, 1)");
  Rng rng(seed);
  const std::vector<std::size_t> idx = shuffled_indices(ds.row_count(), rng);
  const auto n_test = static_cast<std::size_t>(
      std::llround(static_cast<double>(ds.row_count()) * test_fraction));
  const std::vector<std::size_t> test_idx(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_test));
  const std::vector<std::size_t> train_idx(idx.begin() + static_cast<std::ptrdiff_t>(n_test), idx.end());
  return {ds.select_rows(train_idx), ds.select_rows(test_idx)};
}

// --- dataset snapshots --------------------------------------------------------------

// Column kinds on re-load are inferred: "charges" is the target, "ssn" the
// identifier, anything that fully parses as numbers is numeric, the rest
// categorical.
inline Dataset read_dataset_csv(std::istream& in) {
  const CsvTable table = read_csv_table(in);
  std::vector<Column> cols;
  for (std::size_t j = 0; j < table.header.size(); ++j) {
    Column col;
    col.name = table.header[j];
    const std::string lower = to_lower(col.name);
    std::vector<double> numbers;
    bool all_numeric = true;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      const auto& row = table.rows[r];
      if (row.size() != table.header.size()) throw MalformedRow(r + 1, "ragged row");
      const auto v = parse_double(row[j]);
      if (!v) {
        all_numeric = false;
        break;
      }
      numbers.push_back(*v);
    }
    if (lower == "ssn") {
      col.kind = ColumnKind::identifier;
    } else if (lower == "charges") {
      col.kind = ColumnKind::target;
    } else if (all_numeric) {
      col.kind = ColumnKind::numeric;
    } else {
      col.kind = ColumnKind::categorical;
    }
    if (col.numeric_like()) {
      if (!all_numeric) throw Error("column " + col.name + " must be numeric");
      col.numbers = std::move(numbers);
    } else {
      for (const auto& row : table.rows) col.labels.push_back(row[j]);
    }
    cols.push_back(std::move(col));
  }
  return Dataset(std::move(cols));
}

inline void write_dataset_csv(std::ostream& out, const Dataset& ds) {
  CsvTable table;
  for (const auto& col : ds.columns()) table.header.push_back(col.name);
  for (std::size_t r = 0; r < ds.row_count(); ++r) {
    std::vector<std::string> row;
    for (const auto& col : ds.columns())
      row.push_back(col.numeric_like() ? format_double(col.numbers[r]) : col.labels[r]);
    table.rows.push_back(std::move(row));
  }
  write_csv_table(out, table);
}

inline std::string dataset_to_csv(const Dataset& ds) {
  std::ostringstream out;
  write_dataset_csv(out, ds);
  return out.str();
}

}  // namespace fedehr
