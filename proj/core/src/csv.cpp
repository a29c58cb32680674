#include "colabel/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <unordered_map>

namespace colabel {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text, const std::string& where) {
  if (text == "nan") return std::nan("");
  if (text == "inf") return HUGE_VAL;
  if (text == "-inf") return -HUGE_VAL;
  double v = 0.0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw ValidationError(where + ": not a number: '" + std::string(text) + "'");
  return v;
}

int parse_int(std::string_view text, const std::string& where) {
  int v = 0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw ValidationError(where + ": not an integer: '" + std::string(text) + "'");
  return v;
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.emplace_back(line.substr(start));
      break;
    }
    fields.emplace_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  CsvTable table;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (lineno == 1) {
      table.header = std::move(fields);
      continue;
    }
    if (fields.size() != table.header.size())
      throw ValidationError(path + ":" + std::to_string(lineno) + ": expected " +
                            std::to_string(table.header.size()) + " fields, got " +
                            std::to_string(fields.size()));
    table.rows.push_back(std::move(fields));
  }
  if (table.header.empty()) throw ValidationError(path + ": empty file");
  return table;
}

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

void finish(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out) throw std::runtime_error("write failed: " + path);
}

void check_row_count(std::size_t ids, int rows, const std::string& path) {
  if (static_cast<int>(ids) != rows)
    throw ValidationError(path + ": id count " + std::to_string(ids) +
                          " does not match row count " + std::to_string(rows));
}

}  // namespace

void write_features_csv(const std::string& path, const std::vector<std::string>& ids,
                        const Matrix& features) {
  check_row_count(ids.size(), features.rows, path);
  auto out = open_out(path);
  out << "id";
  for (int j = 0; j < features.cols; ++j) out << ",f" << j;
  out << '\n';
  for (int i = 0; i < features.rows; ++i) {
    out << ids[static_cast<std::size_t>(i)];
    for (double v : features.row(i)) out << ',' << format_double(v);
    out << '\n';
  }
  finish(out, path);
}

void write_annotations_csv(const std::string& path, const std::vector<std::string>& ids,
                           const AnnotationMatrix& annotations) {
  check_row_count(ids.size(), annotations.n, path);
  auto out = open_out(path);
  out << "id";
  for (int j = 0; j < annotations.m; ++j) out << ",a" << j;
  out << '\n';
  for (int i = 0; i < annotations.n; ++i) {
    out << ids[static_cast<std::size_t>(i)];
    for (int v : annotations.row(i)) out << ',' << v;
    out << '\n';
  }
  finish(out, path);
}

void write_trusted_csv(const std::string& path, const std::vector<std::string>& ids,
                       const std::vector<int>& labels, const AnnotationMatrix* annotations) {
  check_row_count(ids.size(), static_cast<int>(labels.size()), path);
  if (annotations != nullptr) check_row_count(ids.size(), annotations->n, path);
  auto out = open_out(path);
  out << "id,label";
  if (annotations != nullptr)
    for (int j = 0; j < annotations->m; ++j) out << ",a" << j;
  out << '\n';
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out << ids[i] << ',' << labels[i];
    if (annotations != nullptr)
      for (int v : annotations->row(static_cast<int>(i))) out << ',' << v;
    out << '\n';
  }
  finish(out, path);
}

void write_truth_csv(const std::string& path, const std::vector<std::string>& ids,
                     const std::vector<int>& labels) {
  check_row_count(ids.size(), static_cast<int>(labels.size()), path);
  auto out = open_out(path);
  out << "id,label\n";
  for (std::size_t i = 0; i < ids.size(); ++i) out << ids[i] << ',' << labels[i] << '\n';
  finish(out, path);
}

void write_colabels_csv(const std::string& path, const std::vector<std::string>& ids,
                        const SoftLabelMatrix& colabels) {
  check_row_count(ids.size(), colabels.size(), path);
  auto out = open_out(path);
  out << "id";
  for (int k = 0; k < colabels.classes(); ++k) out << ",p" << k;
  out << '\n';
  for (int i = 0; i < colabels.size(); ++i) {
    out << ids[static_cast<std::size_t>(i)];
    for (double p : colabels.row(i)) out << ',' << format_double(p);
    out << '\n';
  }
  finish(out, path);
}

namespace {

// Verifies the header is `id` followed by prefix0..prefix{k-1}; returns k.
int check_indexed_header(const CsvTable& table, const std::string& prefix,
                         std::size_t first_col, const std::string& path) {
  const int count = static_cast<int>(table.header.size() - first_col);
  for (int j = 0; j < count; ++j) {
    std::string want = prefix + std::to_string(j);
    if (table.header[first_col + static_cast<std::size_t>(j)] != want)
      throw ValidationError(path + ": expected header column '" + want + "', got '" +
                            table.header[first_col + static_cast<std::size_t>(j)] + "'");
  }
  return count;
}

}  // namespace

void read_features_csv(const std::string& path, std::vector<std::string>* ids, Matrix* features) {
  CsvTable table = read_csv(path);
  if (table.header.empty() || table.header[0] != "id")
    throw ValidationError(path + ": first column must be 'id'");
  const int d = check_indexed_header(table, "f", 1, path);
  const int n = static_cast<int>(table.rows.size());
  *features = Matrix(n, d);
  ids->clear();
  ids->reserve(table.rows.size());
  for (int i = 0; i < n; ++i) {
    const auto& row = table.rows[static_cast<std::size_t>(i)];
    ids->push_back(row[0]);
    for (int j = 0; j < d; ++j)
      features->at(i, j) = parse_double(row[static_cast<std::size_t>(j) + 1], path);
  }
}

void read_labels_csv(const std::string& path, std::vector<std::string>* ids,
                     std::vector<int>* labels) {
  CsvTable table = read_csv(path);
  if (table.header.size() != 2 || table.header[0] != "id" || table.header[1] != "label")
    throw ValidationError(path + ": expected header 'id,label'");
  ids->clear();
  labels->clear();
  for (const auto& row : table.rows) {
    ids->push_back(row[0]);
    labels->push_back(parse_int(row[1], path));
  }
}

LoadedDataset load_dataset(const DatasetPaths& paths) {
  std::vector<std::string> feature_ids;
  Matrix features;
  read_features_csv(paths.features, &feature_ids, &features);

  std::unordered_map<std::string, int> feature_row;
  feature_row.reserve(feature_ids.size());
  for (std::size_t i = 0; i < feature_ids.size(); ++i) {
    if (!feature_row.emplace(feature_ids[i], static_cast<int>(i)).second)
      throw ValidationError(paths.features + ": duplicate id '" + feature_ids[i] + "'");
  }
  auto feature_index = [&](const std::string& id, const std::string& from) {
    auto it = feature_row.find(id);
    if (it == feature_row.end())
      throw ValidationError(from + ": id '" + id + "' not present in " + paths.features);
    return it->second;
  };

  CsvTable ann_table = read_csv(paths.annotations);
  if (ann_table.header.empty() || ann_table.header[0] != "id")
    throw ValidationError(paths.annotations + ": first column must be 'id'");
  const int m = check_indexed_header(ann_table, "a", 1, paths.annotations);
  const int n = static_cast<int>(ann_table.rows.size());

  LoadedDataset data;
  data.untrusted.ids.reserve(static_cast<std::size_t>(n));
  data.untrusted.features = Matrix(n, features.cols);
  data.untrusted.annotations = AnnotationMatrix(n, m);
  std::unordered_map<std::string, bool> untrusted_ids;
  untrusted_ids.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto& row = ann_table.rows[static_cast<std::size_t>(i)];
    if (!untrusted_ids.emplace(row[0], true).second)
      throw ValidationError(paths.annotations + ": duplicate id '" + row[0] + "'");
    data.untrusted.ids.push_back(row[0]);
    int src = feature_index(row[0], paths.annotations);
    auto fr = features.row(src);
    std::copy(fr.begin(), fr.end(), data.untrusted.features.row(i).begin());
    for (int j = 0; j < m; ++j)
      data.untrusted.annotations.at(i, j) = parse_int(row[static_cast<std::size_t>(j) + 1], paths.annotations);
  }

  CsvTable trusted_table = read_csv(paths.trusted);
  if (trusted_table.header.size() < 2 || trusted_table.header[0] != "id" ||
      trusted_table.header[1] != "label")
    throw ValidationError(paths.trusted + ": expected header 'id,label[,a0..]'");
  const bool has_ann = trusted_table.header.size() > 2;
  int trusted_m = 0;
  if (has_ann) trusted_m = check_indexed_header(trusted_table, "a", 2, paths.trusted);
  const int u = static_cast<int>(trusted_table.rows.size());
  if (has_ann) data.trusted.annotations = AnnotationMatrix(u, trusted_m);
  for (int i = 0; i < u; ++i) {
    const auto& row = trusted_table.rows[static_cast<std::size_t>(i)];
    if (untrusted_ids.count(row[0]))
      throw ValidationError(paths.trusted + ": id '" + row[0] + "' also appears in " +
                            paths.annotations);
    LabeledExample ex;
    ex.id = row[0];
    ex.label = parse_int(row[1], paths.trusted);
    int src = feature_index(row[0], paths.trusted);
    auto fr = features.row(src);
    ex.features.assign(fr.begin(), fr.end());
    data.trusted.examples.push_back(std::move(ex));
    data.trusted_ids.push_back(row[0]);
    if (has_ann)
      for (int j = 0; j < trusted_m; ++j)
        data.trusted.annotations->at(i, j) = parse_int(row[static_cast<std::size_t>(j) + 2], paths.trusted);
  }

  if (!paths.truth.empty()) {
    std::vector<std::string> truth_ids;
    std::vector<int> truth_labels;
    read_labels_csv(paths.truth, &truth_ids, &truth_labels);
    std::unordered_map<std::string, int> truth_by_id;
    truth_by_id.reserve(truth_ids.size());
    for (std::size_t i = 0; i < truth_ids.size(); ++i) {
      if (!truth_by_id.emplace(truth_ids[i], truth_labels[i]).second)
        throw ValidationError(paths.truth + ": duplicate id '" + truth_ids[i] + "'");
    }
    std::vector<int> hidden(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      auto it = truth_by_id.find(data.untrusted.ids[static_cast<std::size_t>(i)]);
      if (it == truth_by_id.end())
        throw ValidationError(paths.truth + ": no label for id '" +
                              data.untrusted.ids[static_cast<std::size_t>(i)] + "'");
      hidden[static_cast<std::size_t>(i)] = it->second;
    }
    data.untrusted.hidden_truth = std::move(hidden);
  }
  return data;
}

}  // namespace colabel
