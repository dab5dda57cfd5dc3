#include "ckgen/tensor.hpp"

namespace ckgen {

Tensor Tensor::uniform(std::size_t r, std::size_t c, double limit, Rng& rng) {
  Tensor t(r, c);
  for (double& v : t.data) v = rng.next_symmetric(limit);
  return t;
}

}  // namespace ckgen
