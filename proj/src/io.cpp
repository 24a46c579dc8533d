#include "mfk/io.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace mfk {

std::string format_number(double value) {
  char buffer[40];
  std::snprintf(buffer, sizeof buffer, "%.17g", value);
  return buffer;
}

namespace {

std::ofstream open(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

}  // namespace

void write_field_csv(const std::filesystem::path& path, const Field& field) {
  auto out = open(path);
  const int d = field.space().dimension;
  out << 't';
  for (int a = 1; a <= d; ++a) out << ",x" << a;
  out << ",value\n";
  Eigen::VectorXd x(d);
  for (int k = 0; k < field.levels(); ++k) {
    const std::string t = format_number(field.times()[k]);
    for (Eigen::Index j = 0; j < field.space().size(); ++j) {
      field.space().node(j, x);
      out << t;
      for (int a = 0; a < d; ++a) out << ',' << format_number(x[a]);
      out << ',' << format_number(field.values()(k, j)) << '\n';
    }
  }
}

void write_table_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
                     const std::vector<std::vector<double>>& rows) {
  auto out = open(path);
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << format_number(row[i]);
    out << '\n';
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  auto out = open(path);
  out << text;
}

}  // namespace mfk
