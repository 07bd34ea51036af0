#include "nvqa/matrix_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "nvqa/error.hpp"

namespace nvqa {
namespace {

constexpr char kMagic[4] = {'N', 'V', 'Q', 'M'};

template <typename T>
void put_le(std::ostream& os, T v) {
  static_assert(std::is_unsigned_v<T>);
  unsigned char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T get_le(std::istream& is) {
  unsigned char buf[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(buf), sizeof(T))) throw LoadError("matrix file truncated");
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(buf[i]) << (8 * i);
  return v;
}

}  // namespace

void write_matrix(std::ostream& os, const Matrix& m) {
  if (m.rows() > std::numeric_limits<std::uint32_t>::max() ||
      m.cols() > std::numeric_limits<std::uint32_t>::max())
    throw DimensionError("write_matrix: shape too large for u32 header");
  os.write(kMagic, 4);
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(m.rows()));
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(m.cols()));
  for (double v : m.values()) put_le<std::uint64_t>(os, std::bit_cast<std::uint64_t>(v));
}

Matrix read_matrix(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw LoadError("not an NVQM matrix file");
  const auto rows = get_le<std::uint32_t>(is);
  const auto cols = get_le<std::uint32_t>(is);
  std::vector<double> data(static_cast<std::size_t>(rows) * cols);
  for (double& v : data) v = std::bit_cast<double>(get_le<std::uint64_t>(is));
  return Matrix::from_external(rows, cols, std::move(data));
}

void save_matrix(const std::filesystem::path& path, const Matrix& m) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw LoadError("cannot open " + path.string() + " for writing");
  write_matrix(os, m);
  if (!os) throw LoadError("write failed: " + path.string());
}

Matrix load_matrix(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw LoadError("cannot open " + path.string());
  return read_matrix(is);
}

std::string to_text(const Matrix& m) {
  std::ostringstream os;
  os << std::setprecision(17);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (c) os << ' ';
      os << m(r, c);
    }
    os << '\n';
  }
  return os.str();
}

Matrix from_text(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  std::vector<double> data;
  std::size_t rows = 0, cols = 0;
  while (std::getline(is, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    std::size_t n = 0;
    double v;
    while (ls >> v) {
      data.push_back(v);
      ++n;
    }
    if (!ls.eof()) throw LoadError("from_text: unparsable value on row " + std::to_string(rows));
    if (rows == 0) cols = n;
    else if (n != cols) throw LoadError("from_text: ragged row " + std::to_string(rows));
    ++rows;
  }
  return Matrix::from_external(rows, cols, std::move(data));
}

void save_named(const std::filesystem::path& dir, const ParamList& params) {
  std::filesystem::create_directories(dir);
  for (const auto& p : params) save_matrix(dir / (p.name + ".nvqm"), *p.value);
}

void load_named(const std::filesystem::path& dir, const ParamList& params) {
  for (const auto& p : params) {
    const auto path = dir / (p.name + ".nvqm");
    if (!std::filesystem::exists(path)) throw LoadError("missing tensor '" + p.name + "' in " + dir.string());
    Matrix m = load_matrix(path);
    if (!m.same_shape(*p.value)) {
      throw LoadError("tensor '" + p.name + "' has shape " + m.shape_string() + ", expected " +
                      p.value->shape_string());
    }
    *p.value = std::move(m);
  }
}

}  // namespace nvqa
