#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

namespace webgym {

// Text-to-vector interface behind the dense side of the index. Implementations
// must be deterministic: the same text yields the same vector, with exactly
// `dim()` components.
class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::size_t dim() const = 0;
    virtual std::vector<double> embed(std::string_view text) const = 0;
};

// Deterministic bag-of-words embedder: normalized tokens are hashed into
// `dim` buckets and the count vector is L2-normalized. No model, no I/O;
// this is the stand-in that keeps retrieval tests runnable offline. Empty or
// token-free text maps to the zero vector.
class HashingEmbedder final : public Embedder {
public:
    explicit HashingEmbedder(std::size_t dim) : dim_(dim) {}

    std::size_t dim() const override { return dim_; }
    std::vector<double> embed(std::string_view text) const override;

private:
    std::size_t dim_;
};

}  // namespace webgym
