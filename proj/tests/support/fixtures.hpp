#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace fixtures {

inline std::string data_path(const std::string& relative) { return std::string(ROTMAP_TEST_DATA) + "/" + relative; }

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open fixture " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

inline std::string read_data(const std::string& relative) { return read_file(data_path(relative)); }

}  // namespace fixtures
