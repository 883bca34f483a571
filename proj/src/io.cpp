#include "s3vc/io.hpp"

#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

namespace s3vc {
namespace {

constexpr char kFeatureMagic[4] = {'S', '3', 'F', 'V'};
constexpr std::uint32_t kFeatureVersion = 1;

void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& is, const std::string& what) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4))
    throw DataError("truncated file while reading " + what);
  return static_cast<std::uint32_t>(b[0]) |
         (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

FeatureMatrix load_feature_matrix(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open feature file: " + path.string());

  char magic[4];
  if (!is.read(magic, 4))
    throw DataError("truncated file while reading magic: " + path.string());
  if (std::memcmp(magic, kFeatureMagic, 4) != 0)
    throw DataError("bad magic in feature file: " + path.string());

  const std::uint32_t version = read_u32(is, "version");
  if (version != kFeatureVersion)
    throw DataError("unsupported feature file version " +
                    std::to_string(version) + ": " + path.string());

  const std::uint32_t rows = read_u32(is, "row count");
  const std::uint32_t cols = read_u32(is, "column count");
  if (rows < 1 || cols < 1)
    throw DataError("feature file declares empty matrix: " + path.string());

  FeatureMatrix m(rows, cols);
  static_assert(sizeof(float) == 4);
  if (!is.read(reinterpret_cast<char*>(m.data()),
               static_cast<std::streamsize>(4ull * rows * cols)))
    throw DataError("truncated payload in feature file: " + path.string());
  if (!m.allFinite())
    throw DataError("feature file contains non-finite values: " +
                    path.string());
  return m;
}

void save_feature_matrix(const FeatureMatrix& m,
                         const std::filesystem::path& path) {
  check_feature_matrix(m);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot open file for writing: " + path.string());
  os.write(kFeatureMagic, 4);
  write_u32(os, kFeatureVersion);
  write_u32(os, static_cast<std::uint32_t>(m.rows()));
  write_u32(os, static_cast<std::uint32_t>(m.cols()));
  os.write(reinterpret_cast<const char*>(m.data()),
           static_cast<std::streamsize>(4ull * m.rows() * m.cols()));
  if (!os) throw DataError("write failed: " + path.string());
}

namespace {

// Minimal RFC-4180 row parser. Handles quoted fields and trailing CR.
std::vector<std::string> split_csv_row(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c == '\r' && i + 1 == line.size()) {
      // trailing CR of a CRLF line ending
    } else {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

double parse_number(const std::string& s, std::size_t row,
                    const std::string& column) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  while (first != last && (*first == ' ' || *first == '\t')) ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  while (ptr != last && (*ptr == ' ' || *ptr == '\t')) ++ptr;
  if (ec != std::errc() || ptr != last)
    throw DataError("unparseable number '" + s + "' at row " +
                    std::to_string(row) + ", column '" + column + "'");
  return v;
}

}  // namespace

MetricTable load_metric_table(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open metric table: " + path.string());

  std::string line;
  if (!std::getline(is, line))
    throw DataError("metric table has no header row: " + path.string());
  const auto header = split_csv_row(line);
  if (header.empty() || header[0] != "system")
    throw DataError("metric table must start with a 'system' column: " +
                    path.string());

  MetricTable table;
  table.column_names.assign(header.begin() + 1, header.end());
  std::set<std::string> seen(header.begin(), header.end());
  if (seen.size() != header.size())
    throw DataError("duplicate column headers in metric table: " +
                    path.string());

  std::vector<std::vector<double>> rows;
  std::size_t row_no = 0;
  while (std::getline(is, line)) {
    if (line.empty() || line == "\r") continue;
    ++row_no;
    const auto fields = split_csv_row(line);
    if (fields.size() != header.size())
      throw DataError("ragged row " + std::to_string(row_no) + " (" +
                      std::to_string(fields.size()) + " fields, expected " +
                      std::to_string(header.size()) + "): " + path.string());
    table.system_names.push_back(fields[0]);
    std::vector<double> row(table.column_names.size());
    for (std::size_t c = 0; c < row.size(); ++c)
      row[c] = parse_number(fields[c + 1], row_no, table.column_names[c]);
    rows.push_back(std::move(row));
  }

  table.values.resize(static_cast<Index>(rows.size()),
                      static_cast<Index>(table.column_names.size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      table.values(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
  return table;
}

}  // namespace s3vc
