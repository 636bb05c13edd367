#pragma once

#include <string>

namespace sweep {

void write_file(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

// out/<stem>-<timestamp>/ under parent; when exact is nonempty, exactly that
// directory. Creates the directory and returns its path.
std::string make_output_dir(const std::string& parent, const std::string& stem,
                            const std::string& exact = "");

}  // namespace sweep
