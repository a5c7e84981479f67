#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace gradtrace {

struct CodecError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Float <-> tape-symbol conversion. Two modes:
///  - passthrough64: the raw 64 bits of the double, sign bit first; bijective
///    on finite values.
///  - mantissa_exponent(m_q, n_q): sign bit, n_q exponent bits (most
///    significant first) selecting e = 2^E with 2e > |x| >= e, then m_q + 1
///    greedy fractional mantissa digits a_i with weights 2^-i e. Exact on the
///    representable set; |x| < 1 is not representable (E >= 0).
/// Bit rendering follows the tape convention 1 -> +1, 0 -> -1.
class FloatCodec {
 public:
  static FloatCodec passthrough64();
  static FloatCodec mantissa_exponent(int mantissa_bits, int exponent_bits);

  int word_length() const;

  /// Encodes one value as +-1 symbols. Throws CodecError for non-finite input
  /// (both modes) and for values outside the representable range
  /// (mantissa-exponent mode).
  Eigen::VectorXi quantize(double x) const;

  /// Inverse of quantize on the representable set. Throws CodecError on a
  /// malformed word length and, in passthrough mode, on non-finite decodes.
  double dequantize(const Eigen::VectorXi& word) const;

  Eigen::VectorXi quantize_vector(const Eigen::VectorXd& xs) const;
  Eigen::VectorXd dequantize_vector(const Eigen::VectorXi& words,
                                    int count) const;

  bool is_passthrough() const { return passthrough_; }
  int mantissa_bits() const { return mantissa_bits_; }
  int exponent_bits() const { return exponent_bits_; }

 private:
  FloatCodec() = default;
  bool passthrough_ = true;
  int mantissa_bits_ = 0;
  int exponent_bits_ = 0;
};

}  // namespace gradtrace
