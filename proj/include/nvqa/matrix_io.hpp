#ifndef NVQA_MATRIX_IO_HPP_
#define NVQA_MATRIX_IO_HPP_

#include <filesystem>
#include <iosfwd>
#include <string>

#include "nvqa/matrix.hpp"
#include "nvqa/params.hpp"

namespace nvqa {

// Binary layout, all little-endian: "NVQM", u32 rows, u32 cols, rows*cols f64.
void write_matrix(std::ostream& os, const Matrix& m);
Matrix read_matrix(std::istream& is);
void save_matrix(const std::filesystem::path& path, const Matrix& m);
Matrix load_matrix(const std::filesystem::path& path);

// Debug text form: one row per line, space separated, 17 significant digits.
std::string to_text(const Matrix& m);
Matrix from_text(const std::string& text);

// One "<name>.nvqm" file per parameter inside `dir` (created if missing).
void save_named(const std::filesystem::path& dir, const ParamList& params);
// Reads every parameter back in place; a missing file or a shape change is a
// LoadError naming the tensor.
void load_named(const std::filesystem::path& dir, const ParamList& params);

}  // namespace nvqa

#endif  // NVQA_MATRIX_IO_HPP_
