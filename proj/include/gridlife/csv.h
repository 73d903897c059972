#ifndef GRIDLIFE_CSV_H
#define GRIDLIFE_CSV_H

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace gridlife::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::string source;  // file name, for error messages

  /// Index of a header column; throws DataError when absent.
  std::size_t column(const std::string& name) const;
  /// Parse cell (row, col) as a finite double; throws DataError with line context.
  double number(std::size_t row, std::size_t col) const;
};

Table read(const std::filesystem::path& path);
Table parse(std::istream& in, const std::string& source);

/// Throws DataError unless the header equals `expected` exactly.
void require_header(const Table& table, const std::vector<std::string>& expected);

/// Shortest round-trip decimal representation.
std::string format_number(double value);

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}
  void row(const std::vector<std::string>& cells);
  void row(const std::vector<double>& cells);

 private:
  std::ostream& out_;
};

}  // namespace gridlife::csv

#endif  // GRIDLIFE_CSV_H
