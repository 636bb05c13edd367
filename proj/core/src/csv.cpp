#include "sweep/csv.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace sweep {

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << content;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string make_output_dir(const std::string& parent, const std::string& stem,
                            const std::string& exact) {
  namespace fs = std::filesystem;
  fs::path dir;
  if (!exact.empty()) {
    dir = exact;
  } else {
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    char stamp[32];
    std::tm tmv{};
    gmtime_r(&tt, &tmv);
    std::strftime(stamp, sizeof stamp, "%Y%m%d%H%M%S", &tmv);
    dir = fs::path(parent) / (stem + "-" + stamp);
  }
  fs::create_directories(dir);
  return dir.string();
}

}  // namespace sweep
