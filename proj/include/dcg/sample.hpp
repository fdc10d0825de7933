// Labeled image-like instance with domain id and augmentation provenance.
#pragma once

#include <cstdint>
#include <optional>
#include <vector>

namespace dcg {

struct Provenance {
    std::int64_t parent_i = -1;  // phase source; label follows this parent
    std::int64_t parent_j = -1;  // amplitude source
    double lambda = 0.0;         // mix coefficient in [0,1]
};

enum class Origin { Original, Augmented };

struct ImageShape {
    int channels = 0;
    int height = 0;
    int width = 0;
    int numel() const { return channels * height * width; }
    bool operator==(const ImageShape&) const = default;
};

struct Sample {
    std::int64_t id = -1;
    ImageShape shape;
    std::vector<double> features;  // row-major, values in [0,1]
    int label = -1;
    int domain_id = -1;
    Origin origin = Origin::Original;
    std::optional<Provenance> provenance;
};

}  // namespace dcg
