#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace genop::io {

// CSV with a header row; '.' decimal, %.17g so values round-trip. The
// effective run config is echoed as a leading '#' comment line.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const nlohmann::ordered_json& config,
            const std::vector<std::string>& columns)
      : path_(path), tmp_(path + ".tmp"), out_(tmp_, std::ios::trunc) {
    if (!out_) throw std::runtime_error("cannot open " + tmp_);
    out_ << "# config: " << config.dump() << "\n";
    for (std::size_t i = 0; i < columns.size(); ++i) out_ << (i ? "," : "") << columns[i];
    out_ << "\n";
  }

  void row(const std::vector<double>& values) {
    char buf[40];
    for (std::size_t i = 0; i < values.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", values[i]);
      out_ << (i ? "," : "") << buf;
    }
    out_ << "\n";
  }

  void row_mixed(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << "\n";
  }

  void finish() {
    out_.flush();
    if (!out_) throw std::runtime_error("write failure on " + tmp_);
    out_.close();
    std::filesystem::rename(tmp_, path_);
    done_ = true;
  }

  ~CsvWriter() {
    if (!done_) {
      out_.close();
      std::error_code ec;
      std::filesystem::remove(tmp_, ec);
    }
  }

  static std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
  }

 private:
  std::string path_, tmp_;
  std::ofstream out_;
  bool done_ = false;
};

} // namespace genop::io
