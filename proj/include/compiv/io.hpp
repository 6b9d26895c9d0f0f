#pragma once

#include "compiv/datagen.hpp"
#include "compiv/iv_pipelines.hpp"

#include <json.hpp>

#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace compiv {

using Json = nlohmann::ordered_json;

/// Header row plus numeric cells. Cells are comma separated; surrounding
/// whitespace and double quotes around header names are stripped.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  /// Index of a header name; throws DomainError when absent.
  std::size_t column(const std::string& name) const;
};

/// Throws DomainError naming the row and column of any non-numeric cell.
CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::string& path);

/// Columns z_1..z_q, x_1..x_p, y, written with 17 significant digits.
void write_dataset_csv(std::ostream& out, const IVDataset& ds);
void write_dataset_csv_file(const std::string& path, const IVDataset& ds);

/// Reads the z_*/x_*/y layout back. Composition rows that miss unit sum by
/// more than kSumTolerance are re-closed; `reclosed` receives their count.
/// With a pseudo-count, x columns containing any zero are taken as raw
/// counts and go through close_counts.
IVDataset read_dataset_csv(std::istream& in, int* reclosed = nullptr,
                           std::optional<double> pseudo_count = std::nullopt);
IVDataset read_dataset_csv_file(const std::string& path, int* reclosed = nullptr,
                                std::optional<double> pseudo_count = std::nullopt);

void write_compositions_csv(std::ostream& out, const Matrix& x);

/// -1 for values at or below the mean, +1 above it.
Vector binarize_at_mean(const Vector& y);

struct IngestOptions {
  std::vector<std::string> instrument_cols;
  std::string outcome_col;
  bool binary = false;
  double pseudo_count = kDefaultPseudoCount;
};

/// Sample-per-row count table: every column that is neither an instrument
/// nor the outcome is a taxon. Taxa are used as given, without aggregation.
IVDataset ingest_counts(const CsvTable& table, const IngestOptions& options,
                        std::vector<std::string>* taxa = nullptr);

Json spec_to_json(const SimulationSpec& spec);
/// Strict: unknown keys and wrong shapes throw DomainError.
SimulationSpec spec_from_json(const Json& j);

/// {beta_log, beta0, setting, oracle_const, seed, preset, spec}.
Json truth_to_json(const GroundTruth& truth);
GroundTruth truth_from_json(const Json& j);

Json fit_to_json(const CausalFit& fit);
CausalFit fit_from_json(const Json& j);

Json read_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace compiv
