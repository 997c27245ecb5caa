#pragma once

// Plain CSV output: header row, '.' decimal separator, doubles at 17
// significant digits so values round-trip exactly.

#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>

#include <fmt/format.h>

namespace fountain::csv {

using Cell = std::variant<double, std::int64_t, std::uint64_t, std::string_view>;

inline std::string format_cell(const Cell& cell) {
  struct Visitor {
    std::string operator()(double v) const { return fmt::format("{:.17g}", v); }
    std::string operator()(std::int64_t v) const { return fmt::format("{}", v); }
    std::string operator()(std::uint64_t v) const { return fmt::format("{}", v); }
    std::string operator()(std::string_view v) const { return std::string(v); }
  };
  return std::visit(Visitor{}, cell);
}

class Writer {
 public:
  Writer(const std::string& path, std::initializer_list<std::string_view> header)
      : out_(path, std::ios::binary | std::ios::trunc), columns_(header.size()) {
    if (!out_) throw std::runtime_error("cannot open " + path + " for writing");
    write_line(header);
  }

  void row(std::initializer_list<Cell> cells) {
    if (cells.size() != columns_) throw std::logic_error("CSV row width mismatch");
    bool first = true;
    for (const Cell& c : cells) {
      if (!first) out_ << ',';
      out_ << format_cell(c);
      first = false;
    }
    out_ << '\n';
  }

  template <typename Range>
  void row_from(const Range& values) {
    bool first = true;
    std::size_t n = 0;
    for (const auto& v : values) {
      if (!first) out_ << ',';
      out_ << format_cell(Cell(v));
      first = false;
      ++n;
    }
    if (n != columns_) throw std::logic_error("CSV row width mismatch");
    out_ << '\n';
  }

 private:
  void write_line(std::initializer_list<std::string_view> cells) {
    bool first = true;
    for (const auto c : cells) {
      if (!first) out_ << ',';
      out_ << c;
      first = false;
    }
    out_ << '\n';
  }

  std::ofstream out_;
  std::size_t columns_;
};

}  // namespace fountain::csv
