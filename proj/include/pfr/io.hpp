// Delimited-text ingestion and emission, and atomic file output.
#pragma once

#include "pfr/types.hpp"

#include <iosfwd>
#include <optional>
#include <string>

namespace pfr {

struct CsvOptions {
  /// Response column: a header name, or a zero-based index when the file has no
  /// header. When unset, a header column named "y" is used if present.
  std::optional<std::string> response_column;
  /// Subtract column means (and the labeled response mean) after parsing.
  bool center = true;
};

/**
 * Parse RFC-4180 style CSV into a DataMatrix. A first row with any
 * non-numeric field is taken as the header. Empty response fields mark
 * unlabeled rows. Throws ParseError with line and column on malformed input.
 */
DataMatrix ingest_csv(std::istream& in, const CsvOptions& options = {});
DataMatrix ingest_csv(const std::string& path, const CsvOptions& options = {});

/// Header x1..xp[,y]; values printed with 17 significant digits; unlabeled responses empty.
void emit_csv(std::ostream& out, const DataMatrix& data);
std::string format_double(double v);

/// Write to a sibling temporary file, then rename over `path`.
void write_file_atomic(const std::string& path, const std::string& contents);

}  // namespace pfr
