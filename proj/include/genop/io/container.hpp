#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace genop::io {

using json = nlohmann::ordered_json;

// All binary artifacts share one container: 8-byte magic, a little-endian
// uint64 header length, a UTF-8 JSON header, then float64 payload arrays in
// the order the header declares. Writes go to "<path>.tmp" and are renamed on
// success so partial outputs never masquerade as finished files.
inline constexpr char kMagic[8] = {'G', 'E', 'N', 'O', 'P', 'B', 'I', 'N'};

inline void require_little_endian() {
  std::uint32_t probe = 1;
  char b;
  std::memcpy(&b, &probe, 1);
  if (b != 1) throw std::runtime_error("container IO requires a little-endian host");
}

class BlobWriter {
 public:
  BlobWriter(const std::string& path, const json& header) : path_(path), tmp_(path + ".tmp") {
    require_little_endian();
    out_.open(tmp_, std::ios::binary | std::ios::trunc);
    if (!out_) throw std::runtime_error("cannot open " + tmp_ + " for writing");
    std::string h = header.dump();
    std::uint64_t len = h.size();
    out_.write(kMagic, 8);
    out_.write(reinterpret_cast<const char*>(&len), 8);
    out_.write(h.data(), static_cast<std::streamsize>(h.size()));
  }

  void write_f64(const double* p, std::size_t n) {
    out_.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
  }
  void write_f64(const std::vector<double>& v) { write_f64(v.data(), v.size()); }

  void finish() {
    out_.flush();
    if (!out_) throw std::runtime_error("write failure on " + tmp_);
    out_.close();
    std::filesystem::rename(tmp_, path_);
    done_ = true;
  }

  ~BlobWriter() {
    if (!done_) {
      out_.close();
      std::error_code ec;
      std::filesystem::remove(tmp_, ec);
    }
  }

 private:
  std::string path_, tmp_;
  std::ofstream out_;
  bool done_ = false;
};

class BlobReader {
 public:
  explicit BlobReader(const std::string& path) : in_(path, std::ios::binary) {
    require_little_endian();
    if (!in_) throw std::runtime_error("cannot open " + path);
    char magic[8];
    in_.read(magic, 8);
    if (!in_ || std::memcmp(magic, kMagic, 8) != 0)
      throw std::runtime_error(path + ": not a genop container");
    std::uint64_t len = 0;
    in_.read(reinterpret_cast<char*>(&len), 8);
    std::string h(len, '\0');
    in_.read(h.data(), static_cast<std::streamsize>(len));
    if (!in_) throw std::runtime_error(path + ": truncated header");
    header_ = json::parse(h);
  }

  const json& header() const { return header_; }

  void read_f64(double* p, std::size_t n) {
    in_.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
    if (!in_) throw std::runtime_error("truncated payload");
  }
  std::vector<double> read_f64(std::size_t n) {
    std::vector<double> v(n);
    read_f64(v.data(), n);
    return v;
  }

 private:
  std::ifstream in_;
  json header_;
};

// Small JSON document written atomically (reports, configs).
inline void write_json_file(const std::string& path, const json& j) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp);
    out << j.dump(2) << "\n";
    if (!out) throw std::runtime_error("write failure on " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return json::parse(in);
}

} // namespace genop::io
