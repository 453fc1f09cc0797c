#pragma once

#include <string>
#include <vector>

#include "cdtd/schema.hpp"

namespace cdtd {

// RFC-4180 CSV: quoted fields may contain commas, escaped quotes and
// newlines. Both LF and CRLF line endings are accepted.
std::vector<std::vector<std::string>> read_csv(const std::string& path);
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

// Load a CSV against a schema:
//  - header must match the schema feature names exactly (order included)
//  - empty categorical cells become the "(missing)" token
//  - rows with an empty continuous cell or an empty target cell are dropped
//    and counted in RawTable::n_dropped
// Throws on unreadable file, header mismatch, or non-numeric text in a
// continuous column.
RawTable load_csv(const std::string& path, const TableSchema& schema);

}  // namespace cdtd
