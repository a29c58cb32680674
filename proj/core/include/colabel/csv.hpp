#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "colabel/types.hpp"

namespace colabel {

/// Shortest decimal form that round-trips to the same double. Used for every
/// number the project writes, so repeated runs are byte-identical.
std::string format_double(double v);

/// Strict numeric parsers; `where` names the file/line for error messages.
double parse_double(std::string_view text, const std::string& where);
int parse_int(std::string_view text, const std::string& where);

/// Splits one CSV line on commas. No quoting: fields are ids and numbers.
std::vector<std::string> split_csv_line(std::string_view line);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// Reads a whole CSV file; every row must have the header's field count.
CsvTable read_csv(const std::string& path);

// ---- Dataset files ------------------------------------------------------
// features.csv    id,f0..f{d-1}         all instances (untrusted + trusted)
// annotations.csv id,a0..a{m-1}         untrusted instances; -1 marks missing
// trusted.csv     id,label[,a0..a{m-1}]
// truth.csv       id,label              untrusted instances (simulation only)
// Files are joined by id; row order follows annotations.csv / trusted.csv.

void write_features_csv(const std::string& path, const std::vector<std::string>& ids,
                        const Matrix& features);
void write_annotations_csv(const std::string& path, const std::vector<std::string>& ids,
                           const AnnotationMatrix& annotations);
void write_trusted_csv(const std::string& path, const std::vector<std::string>& ids,
                       const std::vector<int>& labels, const AnnotationMatrix* annotations);
void write_truth_csv(const std::string& path, const std::vector<std::string>& ids,
                     const std::vector<int>& labels);

void write_colabels_csv(const std::string& path, const std::vector<std::string>& ids,
                        const SoftLabelMatrix& colabels);

struct DatasetPaths {
  std::string features;
  std::string annotations;
  std::string trusted;
  std::string truth;  // empty = not available
};

struct LoadedDataset {
  UntrustedDataset untrusted;
  TrustedDataset trusted;
  std::vector<std::string> trusted_ids;
};

/// Loads and joins the dataset files. Throws ValidationError on malformed
/// files, unknown ids, duplicates, or ids shared between trusted and
/// untrusted sets.
LoadedDataset load_dataset(const DatasetPaths& paths);

/// Reads an `id,label` file (truth.csv format).
void read_labels_csv(const std::string& path, std::vector<std::string>* ids,
                     std::vector<int>* labels);

/// Reads a features.csv file without joining.
void read_features_csv(const std::string& path, std::vector<std::string>* ids, Matrix* features);

}  // namespace colabel
