// Seeded multi-domain dataset generator. Class identity lives in a
// fixed glyph mask (structure/phase); domain identity lives in the
// textured background (amplitude statistics).
#pragma once

#include <map>
#include <string>
#include <vector>

#include "dcg/rng.hpp"
#include "dcg/sample.hpp"

namespace dcg {

struct DomainSpec {
    int domain_id = 0;
    double hue[3] = {1.0, 1.0, 1.0};  // background color weights in [0,1]
    double stripe_freq = 2.0;         // cycles across the image
    double orientation = 0.0;         // radians
    double noise_level = 0.0;         // amplitude-noise amplitude in [0,1]
};

struct DatasetManifest {
    int class_count = 7;
    ImageShape shape{3, 16, 16};
    std::vector<DomainSpec> domains;
    int samples_per_domain = 200;
    double label_noise = 0.0;        // rho
    double duplicate_fraction = 0.0; // delta
    std::uint64_t seed = 0;

    void validate() const;
};

// Evaluation-only ground truth; the trainer never reads these.
struct HiddenFlags {
    std::vector<bool> noisy;
    std::vector<bool> duplicate;
};

struct DomainData {
    std::vector<Sample> samples;
    HiddenFlags flags;
};

struct Dataset {
    DatasetManifest manifest;
    std::map<int, DomainData> by_domain;  // keyed by domain id
};

// Deterministic class glyph mask, identical across domains.
std::vector<double> class_mask(int class_index, int height, int width);

Dataset generate(const DatasetManifest& manifest);

// (sources, target); the target domain is never touched in training.
std::pair<std::map<int, DomainData>, DomainData> leave_one_out(const Dataset& data,
                                                               int held_out_domain);

// Manifest JSON round trip.
DatasetManifest manifest_from_json(const std::string& json_text);
std::string manifest_to_json(const DatasetManifest& manifest);

// Directory format: manifest.json + domain_<id>.f64 (little-endian
// row-major floats) + labels_<id>.json (labels, hidden flags).
void save_dataset(const Dataset& data, const std::string& dir);
Dataset load_dataset(const std::string& dir);

// Default four-domain styling used by the CLI and experiments.
std::vector<DomainSpec> default_domain_specs(int count);

}  // namespace dcg
