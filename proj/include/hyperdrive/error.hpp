#pragma once

#include <stdexcept>
#include <string>

namespace hyperdrive {

enum class Errc {
  invalid_argument,
  spectral_coverage,
  convergence,
  estimation,
  degenerate_input,
  masked_pixel,
  configuration,
  format,
  length,
  version,
  encoding,
  stitch,
  monotonicity,
  validation,
  storage,
  numeric,
  degenerate_rank,
  undefined_score,
};

/// Single exception type carrying a category code so callers and tests can
/// distinguish failure modes without parsing message text.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace hyperdrive
