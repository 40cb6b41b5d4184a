#pragma once

#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "icupred/types.hpp"

namespace icupred {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// Splits one CSV line. Handles double-quoted fields with "" escapes and
/// strips a trailing CR; does not support embedded newlines.
std::vector<std::string> split_csv_line(const std::string& line);

/// Reads header + data rows. Every row must have the header's field count.
CsvTable read_csv(std::istream& in);

/// Writes one row, quoting fields that contain a comma, quote or newline.
void write_csv_row(std::ostream& out, const std::vector<std::string>& fields);

std::string csv_to_string(const std::vector<std::string>& header,
                          const std::vector<std::vector<std::string>>& rows);

}  // namespace icupred
