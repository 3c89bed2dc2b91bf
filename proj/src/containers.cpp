#include "sbmeter/containers.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace sbmeter::io {

namespace {

constexpr std::array<char, 4> kTensorMagic{'S', 'B', 'T', '1'};
constexpr std::array<char, 4> kPathMagic{'S', 'B', 'P', '1'};
constexpr std::uint32_t kMaxString = 1u << 20;
constexpr std::uint64_t kMaxElements = 1ull << 30;

void put_u8(std::ostream& out, std::uint8_t v) { out.put(static_cast<char>(v)); }

void put_u32(std::ostream& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.put(static_cast<char>((v >> (8 * b)) & 0xFF));
}

void put_u64(std::ostream& out, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) out.put(static_cast<char>((v >> (8 * b)) & 0xFF));
}

void put_f32(std::ostream& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }
void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

void put_str(std::ostream& out, const std::string& s) {
  if (s.size() > kMaxString) throw FormatError("string too long to encode");
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

class Reader {
 public:
  Reader(std::istream& in, std::optional<std::size_t> record = std::nullopt)
      : in_(in), record_(record) {}

  void set_record(std::size_t r) { record_ = r; }

  [[noreturn]] void fail(const std::string& what) const { throw FormatError(what, record_); }

  void bytes(char* dst, std::size_t n, const char* what) {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) fail(std::string("truncated ") + what);
  }

  std::uint8_t u8(const char* what) {
    char c;
    bytes(&c, 1, what);
    return static_cast<std::uint8_t>(c);
  }

  std::uint32_t u32(const char* what) {
    unsigned char b[4];
    bytes(reinterpret_cast<char*>(b), 4, what);
    return std::uint32_t{b[0]} | (std::uint32_t{b[1]} << 8) | (std::uint32_t{b[2]} << 16) |
           (std::uint32_t{b[3]} << 24);
  }

  std::uint64_t u64(const char* what) {
    unsigned char b[8];
    bytes(reinterpret_cast<char*>(b), 8, what);
    std::uint64_t v = 0;
    for (int k = 7; k >= 0; --k) v = (v << 8) | b[k];
    return v;
  }

  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
  double f64(const char* what) { return std::bit_cast<double>(u64(what)); }

  std::string str(const char* what) {
    const std::uint32_t n = u32(what);
    if (n > kMaxString) fail(std::string(what) + " length out of range");
    std::string s(n, '\0');
    if (n > 0) bytes(s.data(), n, what);
    return s;
  }

  void magic(const std::array<char, 4>& expected) {
    std::array<char, 4> got{};
    in_.read(got.data(), 4);
    if (in_.gcount() != 4 || got != expected) {
      fail("bad magic, expected '" + std::string(expected.begin(), expected.end()) + "'");
    }
  }

 private:
  std::istream& in_;
  std::optional<std::size_t> record_;
};

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  return in;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw std::runtime_error("write to '" + path.string() + "' failed");
}

}  // namespace

std::size_t Tensor::element_count() const {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

void write_tensor(std::ostream& out, const Tensor& tensor) {
  if (tensor.dims.size() > 255) throw FormatError("tensor rank exceeds 255");
  if (tensor.values.size() != tensor.element_count()) {
    throw FormatError("tensor values do not match its dims");
  }
  out.write(kTensorMagic.data(), 4);
  put_u8(out, static_cast<std::uint8_t>(tensor.dtype));
  put_u8(out, static_cast<std::uint8_t>(tensor.dims.size()));
  for (auto d : tensor.dims) put_u32(out, d);
  for (double v : tensor.values) {
    if (tensor.dtype == DType::f32) {
      put_f32(out, static_cast<float>(v));
    } else {
      put_f64(out, v);
    }
  }
}

Tensor read_tensor(std::istream& in) {
  Reader r(in);
  r.magic(kTensorMagic);
  Tensor t;
  const auto dtype = r.u8("dtype");
  if (dtype > 1) r.fail("unsupported dtype code " + std::to_string(dtype));
  t.dtype = static_cast<DType>(dtype);
  const auto rank = r.u8("rank");
  std::uint64_t count = 1;
  for (int k = 0; k < rank; ++k) {
    t.dims.push_back(r.u32("dims"));
    count *= t.dims.back();
    if (count > kMaxElements) r.fail("tensor too large");
  }
  t.values.resize(count);
  for (auto& v : t.values) v = t.dtype == DType::f32 ? r.f32("payload") : r.f64("payload");
  return t;
}

void save_tensor(const std::filesystem::path& path, const Tensor& tensor) {
  auto out = open_out(path);
  write_tensor(out, tensor);
  finish(out, path);
}

Tensor load_tensor(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_tensor(in);
}

Tensor image_to_tensor(const ndnum::ImageTensor& image, DType dtype) {
  Tensor t;
  t.dtype = dtype;
  t.dims = {static_cast<std::uint32_t>(image.channels()), static_cast<std::uint32_t>(image.height()),
            static_cast<std::uint32_t>(image.width())};
  t.values.assign(image.data().begin(), image.data().end());
  return t;
}

ndnum::ImageTensor tensor_to_image(const Tensor& tensor) {
  if (tensor.dims.size() == 3) {
    return ndnum::ImageTensor(tensor.dims[0], tensor.dims[1], tensor.dims[2], tensor.values);
  }
  if (tensor.dims.size() == 2) {
    return ndnum::ImageTensor(1, tensor.dims[0], tensor.dims[1], tensor.values);
  }
  throw FormatError("image tensor must have rank 2 or 3, got " + std::to_string(tensor.dims.size()));
}

void write_path_logits(std::ostream& out, std::span<const metrics::PathLogits> records) {
  out.write(kPathMagic.data(), 4);
  put_u32(out, static_cast<std::uint32_t>(records.size()));
  for (const auto& p : records) {
    put_str(out, p.x1_id);
    put_str(out, p.x2_id);
    put_str(out, p.band);
    put_u32(out, static_cast<std::uint32_t>(p.target_class));
    put_u32(out, static_cast<std::uint32_t>(p.steps()));
    put_u32(out, static_cast<std::uint32_t>(p.num_classes));
    put_f64(out, p.norm_distance);
    for (double l : p.lambdas) put_f64(out, l);
    for (double z : p.logits) put_f64(out, z);
  }
}

std::vector<metrics::PathLogits> read_path_logits(std::istream& in) {
  Reader r(in);
  r.magic(kPathMagic);
  const std::uint32_t count = r.u32("record count");
  std::vector<metrics::PathLogits> records;
  for (std::uint32_t idx = 0; idx < count; ++idx) {
    r.set_record(idx);
    metrics::PathLogits p;
    p.x1_id = r.str("x1 id");
    p.x2_id = r.str("x2 id");
    p.band = r.str("band name");
    p.target_class = r.u32("target class");
    const std::uint32_t n = r.u32("n");
    p.num_classes = r.u32("K");
    if (std::uint64_t{n} * std::max<std::uint64_t>(p.num_classes, 1) > kMaxElements) {
      r.fail("n·K too large");
    }
    p.norm_distance = r.f64("norm distance");
    p.lambdas.resize(n);
    for (auto& l : p.lambdas) l = r.f64("lambda grid");
    p.logits.resize(std::size_t{n} * p.num_classes);
    for (auto& z : p.logits) z = r.f64("logits");
    try {
      metrics::validate(p);
    } catch (const std::invalid_argument& e) {
      throw FormatError(e.what(), idx);
    }
    records.push_back(std::move(p));
  }
  return records;
}

void save_path_logits(const std::filesystem::path& path,
                      std::span<const metrics::PathLogits> records) {
  auto out = open_out(path);
  write_path_logits(out, records);
  finish(out, path);
}

std::vector<metrics::PathLogits> load_path_logits(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_path_logits(in);
}

namespace {

// Reads one header integer, skipping whitespace and '#' comments.
std::uint32_t ppm_header_int(std::istream& in) {
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (!std::isspace(c)) {
      break;
    }
    c = in.get();
  }
  if (c == EOF || !std::isdigit(c)) throw FormatError("PPM: malformed header");
  std::uint64_t v = 0;
  while (c != EOF && std::isdigit(c)) {
    v = v * 10 + static_cast<std::uint64_t>(c - '0');
    if (v > 1u << 24) throw FormatError("PPM: header value out of range");
    c = in.get();
  }
  if (c == EOF || !std::isspace(c)) throw FormatError("PPM: malformed header");
  return static_cast<std::uint32_t>(v);
}

}  // namespace

ndnum::ImageTensor read_ppm(std::istream& in) {
  char magic[2];
  in.read(magic, 2);
  if (in.gcount() != 2 || magic[0] != 'P' || magic[1] != '6') {
    throw FormatError("PPM: expected binary P6");
  }
  const auto width = ppm_header_int(in);
  const auto height = ppm_header_int(in);
  const auto maxval = ppm_header_int(in);
  if (width == 0 || height == 0) throw FormatError("PPM: empty image");
  if (maxval == 0 || maxval > 255) throw FormatError("PPM: only 8-bit samples are supported");
  std::vector<unsigned char> raw(std::size_t{width} * height * 3);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size()) throw FormatError("PPM: truncated data");
  ndnum::ImageTensor img(3, height, width);
  for (std::size_t i = 0; i < height; ++i) {
    for (std::size_t j = 0; j < width; ++j) {
      for (std::size_t c = 0; c < 3; ++c) {
        img(c, i, j) = static_cast<double>(raw[(i * width + j) * 3 + c]) / maxval;
      }
    }
  }
  return img;
}

void write_ppm(std::ostream& out, const ndnum::ImageTensor& image) {
  if (image.channels() != 3) throw FormatError("PPM: image must have 3 channels");
  out << "P6\n" << image.width() << ' ' << image.height() << "\n255\n";
  for (std::size_t i = 0; i < image.height(); ++i) {
    for (std::size_t j = 0; j < image.width(); ++j) {
      for (std::size_t c = 0; c < 3; ++c) {
        const double v = std::clamp(image(c, i, j), 0.0, 1.0);
        out.put(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
      }
    }
  }
}

ndnum::ImageTensor load_image(const std::filesystem::path& path) {
  auto in = open_in(path);
  try {
    if (path.extension() == ".ppm") return read_ppm(in);
    return tensor_to_image(read_tensor(in));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void save_image(const std::filesystem::path& path, const ndnum::ImageTensor& image) {
  auto out = open_out(path);
  if (path.extension() == ".ppm") {
    write_ppm(out, image);
  } else {
    write_tensor(out, image_to_tensor(image));
  }
  finish(out, path);
}

}  // namespace sbmeter::io
