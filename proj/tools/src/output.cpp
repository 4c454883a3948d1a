#include "gmcsim/cli/output.hpp"

#include <unistd.h>

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <system_error>

namespace gmcsim::cli {

namespace fs = std::filesystem;

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  std::array<char, 64> buf{};
  const auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc{}) throw std::runtime_error("format_double: to_chars failed");
  return std::string(buf.data(), end);
}

void OutputSet::add(const std::string& name, std::string content) {
  if (name.empty() || name.find('/') != std::string::npos || name.front() == '.')
    throw std::invalid_argument("output file name must be a plain file name: " + name);
  files_[name] = std::move(content);
}

namespace {

fs::path temp_name(const fs::path& target) {
  return target.parent_path() /
         ("." + target.filename().string() + ".tmp." + std::to_string(::getpid()));
}

void write_temp_then_rename(const fs::path& target, const std::string& content) {
  const fs::path tmp = temp_name(target);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw std::runtime_error("write failed: " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw std::runtime_error("cannot rename into " + target.string());
  }
}

}  // namespace

std::vector<fs::path> OutputSet::commit(const fs::path& dir) const {
  fs::create_directories(dir);
  std::vector<fs::path> written;
  try {
    for (const auto& [name, content] : files_) {
      const fs::path target = dir / name;
      write_temp_then_rename(target, content);
      written.push_back(target);
    }
  } catch (...) {
    std::error_code ec;
    for (const auto& p : written) fs::remove(p, ec);
    throw;
  }
  return written;
}

void write_file_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_temp_then_rename(path, content);
}

}  // namespace gmcsim::cli
