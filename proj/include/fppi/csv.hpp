#pragma once

#include "fppi/types.hpp"

#include <istream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace fppi {

// Malformed file: bad header, ragged rows, unparseable numbers.
class CsvError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

// Plain comma-separated text; no quoting. Blank lines are skipped.
CsvTable parse_csv(std::istream& in);
CsvTable read_csv_file(const std::string& path);

struct LoadedTable {
    Matrix x;
    std::optional<Vector> y;
    std::optional<Vector> f;
    std::vector<std::string> x_names;
    Index rows_read = 0;
    // Rows with an empty or non-finite entry.
    Index rows_dropped = 0;
};

// Column "y" is the response (required when need_y), pred_col the optional
// prediction, every other column a covariate in file order.
LoadedTable load_table(const std::string& path, bool need_y, const std::string& pred_col = "f");
LoadedTable table_from_csv(const CsvTable& csv, bool need_y, const std::string& pred_col = "f");

// Writes x1..xp[,y][,f] with round-trip precision.
void write_table_csv(const std::string& path, const Matrix& x, const Vector* y, const Vector* f);

}  // namespace fppi
