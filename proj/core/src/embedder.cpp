#include "webgym/embedder.hpp"

#include "webgym/hash.hpp"
#include "webgym/text.hpp"

#include <cmath>
#include <stdexcept>

namespace webgym {

std::vector<double> HashingEmbedder::embed(std::string_view text) const {
    if (dim_ == 0) throw std::invalid_argument("embedder dim must be positive");
    std::vector<double> v(dim_, 0.0);
    for (const auto& token : tokenize(text)) {
        v[fnv1a64(token) % dim_] += 1.0;
    }
    double norm_sq = 0.0;
    for (double x : v) norm_sq += x * x;
    if (norm_sq > 0.0) {
        const double inv = 1.0 / std::sqrt(norm_sq);
        for (double& x : v) x *= inv;
    }
    return v;
}

}  // namespace webgym
