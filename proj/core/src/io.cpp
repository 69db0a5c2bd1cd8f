#include "rsad/io.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>

#include "rsad/errors.hpp"

namespace rsad {

namespace fs = std::filesystem;

static Image from_mat(const cv::Mat& mat, bool swap_rb) {
  Image img(mat.rows, mat.cols, mat.channels());
  for (int y = 0; y < mat.rows; ++y) {
    const std::uint8_t* row = mat.ptr<std::uint8_t>(y);
    for (int x = 0; x < mat.cols; ++x) {
      for (int c = 0; c < img.channels; ++c) {
        int sc = (swap_rb && img.channels == 3) ? 2 - c : c;
        img.at(y, x, c) = row[x * img.channels + sc];
      }
    }
  }
  return img;
}

Image read_image(const fs::path& path) {
  cv::Mat mat = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (mat.empty()) throw IoError("cannot read image: " + path.string());
  return from_mat(mat, /*swap_rb=*/true);  // OpenCV decodes BGR
}

Image read_image_gray(const fs::path& path) {
  cv::Mat mat = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
  if (mat.empty()) throw IoError("cannot read image: " + path.string());
  return from_mat(mat, /*swap_rb=*/false);
}

std::vector<std::uint8_t> encode_png(const Image& img) {
  cv::Mat mat(img.height, img.width, CV_8UC(img.channels));
  for (int y = 0; y < img.height; ++y) {
    std::uint8_t* row = mat.ptr<std::uint8_t>(y);
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) {
        int dc = (img.channels == 3) ? 2 - c : c;
        row[x * img.channels + dc] = img.at(y, x, c);
      }
  }
  std::vector<std::uint8_t> bytes;
  if (!cv::imencode(".png", mat, bytes))
    throw IoError("png encode failed");
  return bytes;
}

void write_png(const fs::path& path, const Image& img) {
  atomic_write_file(path, encode_png(img));
}

void atomic_write_file(const fs::path& path,
                       std::span<const std::uint8_t> bytes) {
  fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open for write: " + tmp.string());
    os.write(reinterpret_cast<const char*>(bytes.data()),
             static_cast<std::streamsize>(bytes.size()));
    if (!os) throw IoError("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

void atomic_write_text(const fs::path& path, const std::string& text) {
  atomic_write_file(path,
                    std::span<const std::uint8_t>(
                        reinterpret_cast<const std::uint8_t*>(text.data()),
                        text.size()));
}

std::string read_text(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read file: " + path.string());
  return std::string(std::istreambuf_iterator<char>(is), {});
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read file: " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

std::vector<fs::path> list_image_files(const fs::path& root) {
  static const std::vector<std::string> kExts = {".png", ".jpg", ".jpeg",
                                                 ".bmp"};
  std::vector<fs::path> out;
  if (!fs::exists(root)) throw IoError("no such directory: " + root.string());
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    for (auto& ch : ext) ch = static_cast<char>(std::tolower(ch));
    if (std::find(kExts.begin(), kExts.end(), ext) != kExts.end())
      out.push_back(fs::relative(entry.path(), root));
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string fnv1a64_hex(std::span<const std::uint8_t> bytes) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(bytes)));
  return std::string(buf);
}

std::string format_fixed(double value, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, value);
  return std::string(buf);
}

std::string format_exact(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return std::string(buf);
}

}  // namespace rsad
