#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace bracket::csv {

/// Raw parsed CSV: header row plus data rows, every row the header's width.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of a header column; -1 when absent.
  int column(const std::string& name) const;
};

/**
 * Strict reader for the project CSV dialect: UTF-8, comma-delimited, first
 * row is the header. Double-quoted fields with doubled inner quotes are
 * accepted; embedded newlines are not. CRLF line endings are tolerated.
 * Throws InputError/SchemaError/ParseError with file/row context.
 */
Table read_table(const std::string& path);

/// Writes rows verbatim, quoting fields only when they contain , " or space.
void write_table(const std::string& path, const Table& table);

/**
 * Locale-independent numeric parse of a whole field ('.' decimal separator,
 * scientific notation accepted). Throws ParseError naming row/column context
 * when the field does not fully parse or is not finite.
 */
double parse_double(const std::string& field, std::size_t row_1based, const std::string& col);
long long parse_int(const std::string& field, std::size_t row_1based, const std::string& col);

/// Shortest representation that round-trips the exact double value.
std::string format_double(double v);

}  // namespace bracket::csv
