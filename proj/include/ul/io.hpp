#pragma once

// JSON documents for sets, test functions, polynomials and reports, and a
// small CSV writer. Key order is preserved so output is byte-stable.

#include <json.hpp>

#include <filesystem>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ul/analysis.hpp"
#include "ul/turan.hpp"

namespace ul {

using Json = nlohmann::ordered_json;

// A file could not be read or written, or is not well-formed JSON.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

Json vec_to_json(const Vec& v);
Vec vec_from_json(const Json& j, const std::string& what);

// {dimension, pieces: [{kind: "ball", center, radius} | {kind: "box", lower, upper}]}
Json to_json(const EuclideanSet& set);
EuclideanSet set_from_json(const Json& j);

// {kind, parameters, children}
Json to_json(const TestFunction& f);
TestFunction function_from_json(const Json& j);

// [{frequency, re, im}]
Json to_json(const TrigPolynomial& p);
TrigPolynomial polynomial_from_json(const Json& j);

Json to_json(const Estimate& e);
Json to_json(const ExpectationReport& r);

// Non-finite values become null.
Json number(double x);

// Comma-separated rows; doubles printed with 17 significant digits.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header);
  CsvWriter& cell(double x);
  CsvWriter& cell(long long x);
  CsvWriter& cell(std::uint64_t x);
  CsvWriter& cell(const std::string& s);
  void end_row();
  std::string str() const { return text_; }
  std::size_t rows() const { return rows_; }

 private:
  std::string text_;
  bool row_open_ = false;
  std::size_t rows_ = 0;
};

}  // namespace ul
