#pragma once

// Plain-text serialization for LCS models. The format is line-oriented with
// named blocks and explicit dimensions, row-major:
//
//   lcs v1
//   dims <n_x> <n_u> <n_lambda>
//   dt <dt>
//   stages <count>
//   stage <index>
//   matrix A <rows> <cols>
//   <rows lines of <cols> numbers>
//   ... blocks B, D, E, F, H and vectors d, c ...
//   end
//
// '#' starts a comment to end of line. Values round-trip at full double
// precision.

#include <cctype>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>

#include "c3/lcs.hpp"
#include "c3/types.hpp"

namespace c3 {

namespace detail {

class TokenReader {
 public:
  explicit TokenReader(std::istream& in) : in_(in) {}

  std::string next() {
    std::string tok;
    while (in_ >> tok) {
      if (tok[0] == '#') {
        std::string rest;
        std::getline(in_, rest);
        continue;
      }
      return tok;
    }
    throw std::runtime_error("lcs parse error: unexpected end of file");
  }

  void expect(const std::string& want) {
    const std::string got = next();
    if (got != want)
      throw std::runtime_error("lcs parse error: expected '" + want + "', got '" +
                               got + "'");
  }

  double number() {
    const std::string tok = next();
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      throw std::runtime_error("lcs parse error: expected number, got '" + tok + "'");
    }
    if (used != tok.size())
      throw std::runtime_error("lcs parse error: trailing characters in '" + tok + "'");
    return v;
  }

  int integer() {
    const double v = number();
    const int i = static_cast<int>(v);
    if (static_cast<double>(i) != v)
      throw std::runtime_error("lcs parse error: expected integer");
    return i;
  }

 private:
  std::istream& in_;
};

inline MatXd read_matrix_block(TokenReader& r, const std::string& name, int rows,
                               int cols) {
  r.expect("matrix");
  r.expect(name);
  if (r.integer() != rows || r.integer() != cols)
    throw std::runtime_error("lcs parse error: matrix " + name + " has wrong dims");
  MatXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = r.number();
  return m;
}

inline VecXd read_vector_block(TokenReader& r, const std::string& name, int n) {
  r.expect("vector");
  r.expect(name);
  if (r.integer() != n)
    throw std::runtime_error("lcs parse error: vector " + name + " has wrong size");
  VecXd v(n);
  for (int i = 0; i < n; ++i) v(i) = r.number();
  return v;
}

inline void write_matrix_block(std::ostream& out, const std::string& name,
                               const MatXd& m) {
  out << "matrix " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      out << (j ? " " : "") << std::setprecision(17) << m(i, j);
    out << '\n';
  }
}

inline void write_vector_block(std::ostream& out, const std::string& name,
                               const VecXd& v) {
  out << "vector " << name << ' ' << v.size() << '\n';
  for (Eigen::Index i = 0; i < v.size(); ++i)
    out << (i ? " " : "") << std::setprecision(17) << v(i);
  out << '\n';
}

}  // namespace detail

inline void write_lcs(std::ostream& out, const LCS<double>& lcs) {
  lcs.validate();
  out << "lcs v1\n";
  out << "dims " << lcs.n_x << ' ' << lcs.n_u << ' ' << lcs.n_lambda << '\n';
  out << "dt " << std::setprecision(17) << lcs.dt << '\n';
  out << "stages " << lcs.stages.size() << '\n';
  for (std::size_t k = 0; k < lcs.stages.size(); ++k) {
    const auto& s = lcs.stages[k];
    out << "stage " << k << '\n';
    detail::write_matrix_block(out, "A", s.A);
    detail::write_matrix_block(out, "B", s.B);
    detail::write_matrix_block(out, "D", s.D);
    detail::write_vector_block(out, "d", s.d);
    detail::write_matrix_block(out, "E", s.E);
    detail::write_matrix_block(out, "F", s.F);
    detail::write_matrix_block(out, "H", s.H);
    detail::write_vector_block(out, "c", s.c);
  }
  out << "end\n";
}

inline void write_lcs_file(const std::string& path, const LCS<double>& lcs) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  write_lcs(out, lcs);
}

inline LCS<double> read_lcs(std::istream& in) {
  detail::TokenReader r(in);
  r.expect("lcs");
  r.expect("v1");
  r.expect("dims");
  LCS<double> lcs;
  lcs.n_x = r.integer();
  lcs.n_u = r.integer();
  lcs.n_lambda = r.integer();
  r.expect("dt");
  lcs.dt = r.number();
  r.expect("stages");
  const int count = r.integer();
  if (count < 1) throw std::runtime_error("lcs parse error: stages must be >= 1");
  for (int k = 0; k < count; ++k) {
    r.expect("stage");
    if (r.integer() != k) throw std::runtime_error("lcs parse error: stage index");
    LCSStage<double> s;
    s.A = detail::read_matrix_block(r, "A", lcs.n_x, lcs.n_x);
    s.B = detail::read_matrix_block(r, "B", lcs.n_x, lcs.n_u);
    s.D = detail::read_matrix_block(r, "D", lcs.n_x, lcs.n_lambda);
    s.d = detail::read_vector_block(r, "d", lcs.n_x);
    s.E = detail::read_matrix_block(r, "E", lcs.n_lambda, lcs.n_x);
    s.F = detail::read_matrix_block(r, "F", lcs.n_lambda, lcs.n_lambda);
    s.H = detail::read_matrix_block(r, "H", lcs.n_lambda, lcs.n_u);
    s.c = detail::read_vector_block(r, "c", lcs.n_lambda);
    lcs.stages.push_back(std::move(s));
  }
  r.expect("end");
  lcs.validate();
  return lcs;
}

inline LCS<double> read_lcs_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open LCS file: " + path);
  return read_lcs(in);
}

}  // namespace c3
