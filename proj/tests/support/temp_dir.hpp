#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

namespace texbank::testing {

/// Scratch directory removed on destruction.
class TempDir {
public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("texbank-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

/// Binary PPM (P6) or PGM (P5) writer, independent of the library's codecs.
inline void write_pnm(const std::filesystem::path& path, int width, int height, int channels,
                      const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  out << (channels == 3 ? "P6" : "P5") << '\n' << width << ' ' << height << "\n255\n";
  out << bytes;
}

}  // namespace texbank::testing
