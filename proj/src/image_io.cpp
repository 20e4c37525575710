#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

#include "lirls/error.hpp"
#include "lirls/image.hpp"

namespace lirls {

namespace {

std::string lower_ext(const std::filesystem::path& p) {
  auto e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return e;
}

std::string read_token(std::istream& in) {
  std::string tok;
  char ch;
  while (in.get(ch)) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(ch);
  }
  return tok;
}

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

Image load_pfm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open " + path.string());
  const std::string magic = read_token(in);
  std::size_t channels = 0;
  if (magic == "PF") channels = 3;
  else if (magic == "Pf") channels = 1;
  else fail(ErrorCode::kFormat, "not a PFM file: " + path.string());

  std::size_t w = 0, h = 0;
  double scale = 0.0;
  try {
    w = std::stoul(read_token(in));
    h = std::stoul(read_token(in));
    scale = std::stod(read_token(in));
  } catch (const std::exception&) {
    fail(ErrorCode::kFormat, "corrupt PFM header: " + path.string());
  }
  require(w > 0 && h > 0 && scale != 0.0, ErrorCode::kFormat,
          "corrupt PFM header: " + path.string());
  const bool little = scale < 0.0;

  std::vector<std::uint32_t> raw(w * h * channels);
  in.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(raw.size() * sizeof(std::uint32_t)));
  require(static_cast<std::size_t>(in.gcount()) == raw.size() * sizeof(std::uint32_t),
          ErrorCode::kFormat, "truncated PFM data: " + path.string());

  const bool host_little = std::endian::native == std::endian::little;
  Image img(Dims{channels, h, w});
  for (std::size_t row = 0; row < h; ++row) {
    // PFM rows run bottom to top.
    const std::size_t y = h - 1 - row;
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < channels; ++c) {
        std::uint32_t bits = raw[(row * w + x) * channels + c];
        if (little != host_little) bits = __builtin_bswap32(bits);
        float f;
        std::memcpy(&f, &bits, sizeof f);
        img.at(c, y, x) = static_cast<double>(f);
      }
  }
  return img;
}

void save_pfm(const Image& image, const std::filesystem::path& path) {
  require(image.channels() == 1 || image.channels() == 3, ErrorCode::kFormat,
          "PFM supports 1 or 3 channels, got " + std::to_string(image.channels()));
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + path.string());
  out << (image.channels() == 3 ? "PF" : "Pf") << "\n"
      << image.width() << " " << image.height() << "\n-1.0\n";
  const std::size_t h = image.height(), w = image.width(), c = image.channels();
  std::vector<std::uint32_t> raw(h * w * c);
  for (std::size_t row = 0; row < h; ++row) {
    const std::size_t y = h - 1 - row;
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t ch = 0; ch < c; ++ch) {
        const float f = static_cast<float>(image.at(ch, y, x));
        std::uint32_t bits;
        std::memcpy(&bits, &f, sizeof f);
        if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
        raw[(row * w + x) * c + ch] = bits;
      }
  }
  out.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size() * sizeof(std::uint32_t)));
  require(static_cast<bool>(out), ErrorCode::kIo, "write failed: " + path.string());
}

Image load_png(const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  require(fp != nullptr, ErrorCode::kIo, "cannot open " + path.string());
  unsigned char sig[8];
  require(std::fread(sig, 1, 8, fp.get()) == 8 && png_sig_cmp(sig, 0, 8) == 0,
          ErrorCode::kFormat, "not a PNG file: " + path.string());

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  require(png && info, ErrorCode::kIo, "libpng initialisation failed");
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_read_struct(p, i, nullptr); }
  } guard{&png, &info};

  if (setjmp(png_jmpbuf(png))) fail(ErrorCode::kFormat, "corrupt PNG: " + path.string());
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  const std::size_t w = png_get_image_width(png, info);
  const std::size_t h = png_get_image_height(png, info);
  const std::size_t channels = png_get_channels(png, info);
  const int out_depth = png_get_bit_depth(png, info);
  require(channels == 1 || channels == 3, ErrorCode::kFormat,
          "unsupported PNG channel count " + std::to_string(channels));

  const std::size_t rowbytes = png_get_rowbytes(png, info);
  std::vector<unsigned char> buf(rowbytes * h);
  std::vector<png_bytep> rows(h);
  for (std::size_t y = 0; y < h; ++y) rows[y] = buf.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);

  Image img(Dims{channels, h, w});
  const double maxv = out_depth == 16 ? 65535.0 : 255.0;
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < channels; ++c) {
        const std::size_t k = x * channels + c;
        const double v = out_depth == 16
                             ? static_cast<double>((rows[y][2 * k] << 8) | rows[y][2 * k + 1])
                             : static_cast<double>(rows[y][k]);
        img.at(c, y, x) = v / maxv;
      }
  return img;
}

void save_png(const Image& image, const std::filesystem::path& path, int bit_depth) {
  require(image.channels() == 1 || image.channels() == 3, ErrorCode::kFormat,
          "PNG supports 1 or 3 channels, got " + std::to_string(image.channels()));
  require(bit_depth == 8 || bit_depth == 16, ErrorCode::kFormat, "PNG bit depth must be 8 or 16");
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  require(fp != nullptr, ErrorCode::kIo, "cannot write " + path.string());

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  require(png && info, ErrorCode::kIo, "libpng initialisation failed");
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_write_struct(p, i); }
  } guard{&png, &info};
  if (setjmp(png_jmpbuf(png))) fail(ErrorCode::kIo, "PNG write failed: " + path.string());

  const std::size_t w = image.width(), h = image.height(), c = image.channels();
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), bit_depth,
               c == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  const std::size_t bpp = bit_depth / 8;
  const double maxv = bit_depth == 16 ? 65535.0 : 255.0;
  std::vector<unsigned char> row(w * c * bpp);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double v = std::clamp(image.at(ch, y, x), 0.0, 1.0);
        const auto q = static_cast<unsigned>(std::lround(v * maxv));
        const std::size_t k = x * c + ch;
        if (bit_depth == 16) {
          row[2 * k] = static_cast<unsigned char>(q >> 8);
          row[2 * k + 1] = static_cast<unsigned char>(q & 0xff);
        } else {
          row[k] = static_cast<unsigned char>(q);
        }
      }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
}

Image load_image(const std::filesystem::path& path) {
  const auto ext = lower_ext(path);
  if (ext == ".pfm") return load_pfm(path);
  if (ext == ".png") return load_png(path);
  fail(ErrorCode::kFormat, "unsupported image format: " + path.string());
}

void save_image(const Image& image, const std::filesystem::path& path) {
  const auto ext = lower_ext(path);
  if (ext == ".pfm") return save_pfm(image, path);
  if (ext == ".png") return save_png(image, path);
  fail(ErrorCode::kFormat, "unsupported image format: " + path.string());
}

}  // namespace lirls
