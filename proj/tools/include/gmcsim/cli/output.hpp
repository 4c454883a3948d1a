#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace gmcsim::cli {

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

/// Files staged in memory and published together. Nothing touches the
/// filesystem until commit(); commit writes each file to a temporary name
/// inside the target directory and renames it into place, removing anything
/// it already published if a later file fails.
class OutputSet {
 public:
  void add(const std::string& name, std::string content);
  const std::map<std::string, std::string>& files() const { return files_; }
  bool empty() const { return files_.empty(); }

  /// Returns the written paths in name order.
  std::vector<std::filesystem::path> commit(const std::filesystem::path& dir) const;

 private:
  std::map<std::string, std::string> files_;
};

/// Writes a single file atomically (temp + rename) to an arbitrary path.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace gmcsim::cli
