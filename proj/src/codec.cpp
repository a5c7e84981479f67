#include "gradtrace/codec.hpp"

#include <bit>
#include <cmath>

namespace gradtrace {

FloatCodec FloatCodec::passthrough64() { return FloatCodec(); }

FloatCodec FloatCodec::mantissa_exponent(int mantissa_bits, int exponent_bits) {
  if (mantissa_bits < 0 || exponent_bits < 1 || exponent_bits > 10)
    throw std::invalid_argument("bad mantissa/exponent sizes");
  FloatCodec c;
  c.passthrough_ = false;
  c.mantissa_bits_ = mantissa_bits;
  c.exponent_bits_ = exponent_bits;
  return c;
}

int FloatCodec::word_length() const {
  if (passthrough_) return 64;
  return 1 + exponent_bits_ + mantissa_bits_ + 1;
}

Eigen::VectorXi FloatCodec::quantize(double x) const {
  if (!std::isfinite(x)) throw CodecError("cannot quantize non-finite value");
  Eigen::VectorXi word(word_length());

  if (passthrough_) {
    const auto bits = std::bit_cast<std::uint64_t>(x);
    for (int i = 0; i < 64; ++i)
      word[i] = (bits >> (63 - i)) & 1 ? 1 : -1;
    return word;
  }

  word.setConstant(-1);
  if (x == 0.0) return word;  // canonical zero word

  if (x < 0) word[0] = 1;  // sign: 1 iff negative
  const double mag = std::abs(x);
  if (mag < 1.0)
    throw CodecError("magnitude below 1 is not representable (exponent >= 0)");

  // Exponent window 2e > |x| >= e over E in [0, 2^n_q - 1].
  const int max_exp = (1 << exponent_bits_) - 1;
  int E = -1;
  for (int cand = 0; cand <= max_exp; ++cand) {
    const double e = std::ldexp(1.0, cand);
    if (2.0 * e > mag && mag >= e) {
      E = cand;
      break;
    }
  }
  if (E < 0)
    throw CodecError("magnitude exceeds the representable exponent range");
  for (int j = 0; j < exponent_bits_; ++j)
    word[1 + j] = (E >> (exponent_bits_ - 1 - j)) & 1 ? 1 : -1;

  // Greedy fractional mantissa: digit i carries weight 2^-i * e.
  double r = mag;
  for (int i = 0; i <= mantissa_bits_; ++i) {
    const double weight = std::ldexp(1.0, E - i);
    if (r >= weight) {
      word[1 + exponent_bits_ + i] = 1;
      r -= weight;
    }
  }
  return word;
}

double FloatCodec::dequantize(const Eigen::VectorXi& word) const {
  if (word.size() != word_length())
    throw CodecError("word length " + std::to_string(word.size()) +
                     " does not match codec word length " +
                     std::to_string(word_length()));
  for (int i = 0; i < word.size(); ++i)
    if (word[i] != 1 && word[i] != -1) throw CodecError("word entries must be +-1");

  if (passthrough_) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 64; ++i)
      if (word[i] > 0) bits |= std::uint64_t{1} << (63 - i);
    const double x = std::bit_cast<double>(bits);
    if (!std::isfinite(x)) throw CodecError("word decodes to a non-finite value");
    return x;
  }

  int E = 0;
  for (int j = 0; j < exponent_bits_; ++j)
    E = (E << 1) | (word[1 + j] > 0 ? 1 : 0);
  double mag = 0.0;
  for (int i = 0; i <= mantissa_bits_; ++i)
    if (word[1 + exponent_bits_ + i] > 0) mag += std::ldexp(1.0, E - i);
  return word[0] > 0 ? -mag : mag;
}

Eigen::VectorXi FloatCodec::quantize_vector(const Eigen::VectorXd& xs) const {
  Eigen::VectorXi out(word_length() * xs.size());
  for (int i = 0; i < xs.size(); ++i)
    out.segment(i * word_length(), word_length()) = quantize(xs[i]);
  return out;
}

Eigen::VectorXd FloatCodec::dequantize_vector(const Eigen::VectorXi& words,
                                              int count) const {
  if (words.size() != count * word_length())
    throw CodecError("word stream length mismatch");
  Eigen::VectorXd out(count);
  for (int i = 0; i < count; ++i)
    out[i] = dequantize(words.segment(i * word_length(), word_length()));
  return out;
}

}  // namespace gradtrace
