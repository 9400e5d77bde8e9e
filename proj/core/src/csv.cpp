#include "bracket/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "bracket/errors.hpp"

namespace bracket::csv {

namespace {

// Splits one physical line into fields. Quoted fields may contain commas and
// doubled quotes; a quote appearing anywhere else is a parse error.
std::vector<std::string> split_line(const std::string& line, std::size_t row_1based) {
  std::vector<std::string> fields;
  std::string current;
  bool in_quotes = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          current.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        current.push_back(c);
      }
    } else if (c == '"') {
      if (!current.empty()) {
        throw ParseError("csv row " + std::to_string(row_1based) +
                         ": stray quote inside unquoted field");
      }
      in_quotes = true;
    } else if (c == ',') {
      fields.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (in_quotes) {
    throw ParseError("csv row " + std::to_string(row_1based) + ": unterminated quoted field");
  }
  fields.push_back(std::move(current));
  return fields;
}

bool needs_quoting(const std::string& field) {
  return field.find_first_of(",\" ") != std::string::npos;
}

}  // namespace

int Table::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  return -1;
}

Table read_table(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open input file: " + path);

  Table table;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (row == 1) {
      table.header = split_line(line, row);
      if (table.header.empty() || (table.header.size() == 1 && table.header[0].empty())) {
        throw SchemaError("empty csv header in " + path);
      }
      continue;
    }
    if (line.empty()) continue;  // tolerate trailing blank lines
    auto fields = split_line(line, row);
    if (fields.size() != table.header.size()) {
      throw SchemaError("csv row " + std::to_string(row) + " has " +
                        std::to_string(fields.size()) + " fields, header has " +
                        std::to_string(table.header.size()) + " (" + path + ")");
    }
    table.rows.push_back(std::move(fields));
  }
  if (row == 0) throw SchemaError("empty csv file: " + path);
  return table;
}

void write_table(const std::string& path, const Table& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open output file: " + path);
  auto write_row = [&out](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out << ',';
      if (needs_quoting(fields[i])) {
        out << '"';
        for (const char c : fields[i]) {
          if (c == '"') out << "\"\"";
          else out << c;
        }
        out << '"';
      } else {
        out << fields[i];
      }
    }
    out << '\n';
  };
  write_row(table.header);
  for (const auto& r : table.rows) write_row(r);
  if (!out) throw InputError("failed writing output file: " + path);
}

double parse_double(const std::string& field, std::size_t row_1based, const std::string& col) {
  const char* begin = field.data();
  const char* end = begin + field.size();
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end || field.empty()) {
    throw ParseError("row " + std::to_string(row_1based) + ", column '" + col +
                     "': cannot parse '" + field + "' as a number");
  }
  if (!std::isfinite(value)) {
    throw ParseError("row " + std::to_string(row_1based) + ", column '" + col +
                     "': non-finite value '" + field + "'");
  }
  return value;
}

long long parse_int(const std::string& field, std::size_t row_1based, const std::string& col) {
  const char* begin = field.data();
  const char* end = begin + field.size();
  long long value = 0;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end || field.empty()) {
    throw ParseError("row " + std::to_string(row_1based) + ", column '" + col +
                     "': cannot parse '" + field + "' as an integer");
  }
  return value;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

}  // namespace bracket::csv
