#include "dcg/synth.hpp"

#include <cmath>
#include <filesystem>
#include <set>

#include "dcg/fourier.hpp"
#include "dcg/tensor.hpp"
#include "doctest.h"

using namespace dcg;

namespace {

DatasetManifest small_manifest() {
    DatasetManifest m;
    m.class_count = 7;
    m.shape = {3, 16, 16};
    m.domains = default_domain_specs(4);
    m.samples_per_domain = 200;
    m.seed = 123;
    return m;
}

}  // namespace

TEST_CASE("generate: bookkeeping for the default-sized benchmark") {
    auto m = small_manifest();
    auto ds = generate(m);
    CHECK(ds.by_domain.size() == 4);
    size_t total = 0;
    for (const auto& [id, dd] : ds.by_domain) {
        CHECK(dd.samples.size() == 200);
        for (const auto& s : dd.samples) {
            CHECK((s.shape == ImageShape{3, 16, 16}));
            CHECK(s.label >= 0);
            CHECK(s.label < 7);
            CHECK(s.domain_id == id);
        }
        total += dd.samples.size();
    }
    CHECK(total == 800);
}

TEST_CASE("generate: clean manifest has no flagged samples") {
    auto m = small_manifest();
    m.samples_per_domain = 50;
    auto ds = generate(m);
    for (const auto& [_, dd] : ds.by_domain) {
        for (bool f : dd.flags.noisy) CHECK_FALSE(f);
        for (bool f : dd.flags.duplicate) CHECK_FALSE(f);
    }
}

TEST_CASE("generate: noise and duplicate fractions are honored and flagged") {
    auto m = small_manifest();
    m.label_noise = 0.2;
    m.duplicate_fraction = 0.25;
    m.samples_per_domain = 200;
    auto ds = generate(m);
    for (const auto& [_, dd] : ds.by_domain) {
        int noisy = 0, dup = 0;
        for (bool f : dd.flags.noisy) noisy += f;
        for (bool f : dd.flags.duplicate) dup += f;
        CHECK(dup == 50);  // floor(0.25 * 200)
        CHECK(noisy > 10);
        CHECK(noisy < 80);
    }
}

TEST_CASE("generate: identical seed replays byte-identically") {
    auto m = small_manifest();
    m.samples_per_domain = 20;
    auto a = generate(m);
    auto b = generate(m);
    for (const auto& [id, dd] : a.by_domain) {
        const auto& other = b.by_domain.at(id);
        for (size_t i = 0; i < dd.samples.size(); ++i) {
            CHECK(dd.samples[i].features == other.samples[i].features);
            CHECK(dd.samples[i].label == other.samples[i].label);
        }
    }
}

TEST_CASE("class masks are domain-independent by construction") {
    for (int c = 0; c < 7; ++c) {
        auto m1 = class_mask(c, 16, 16);
        auto m2 = class_mask(c, 16, 16);
        CHECK(m1 == m2);
        double on = 0;
        for (double v : m1) on += v;
        CHECK(on > 0);  // every class draws something
    }
    CHECK(class_mask(0, 16, 16) != class_mask(1, 16, 16));
}

TEST_CASE("leave_one_out: partition and unknown id") {
    auto m = small_manifest();
    m.samples_per_domain = 10;
    auto ds = generate(m);
    auto [sources, target] = leave_one_out(ds, 3);
    CHECK(sources.size() == 3);
    CHECK(sources.find(3) == sources.end());
    CHECK(target.samples.size() == 10);
    CHECK_THROWS_AS(leave_one_out(ds, 99), ContractError);

    // all four holds cover all domains exactly once
    std::set<int> held;
    for (int id = 0; id < 4; ++id) {
        auto [_, t] = leave_one_out(ds, id);
        held.insert(t.samples[0].domain_id);
    }
    CHECK(held.size() == 4);
}

TEST_CASE("dataset directory round trip") {
    auto m = small_manifest();
    m.samples_per_domain = 8;
    m.label_noise = 0.2;
    auto ds = generate(m);
    std::string dir = "test_dataset_dir";
    save_dataset(ds, dir);
    auto loaded = load_dataset(dir);
    CHECK(loaded.manifest.class_count == 7);
    for (const auto& [id, dd] : ds.by_domain) {
        const auto& other = loaded.by_domain.at(id);
        REQUIRE(other.samples.size() == dd.samples.size());
        for (size_t i = 0; i < dd.samples.size(); ++i) {
            CHECK(other.samples[i].features == dd.samples[i].features);
            CHECK(other.samples[i].label == dd.samples[i].label);
            CHECK(other.samples[i].id == dd.samples[i].id);
        }
        CHECK(other.flags.noisy == dd.flags.noisy);
        CHECK(other.flags.duplicate == dd.flags.duplicate);
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("manifest json round trip and validation") {
    auto m = small_manifest();
    auto m2 = manifest_from_json(manifest_to_json(m));
    CHECK(m2.domains.size() == 4);
    CHECK(m2.shape == m.shape);
    CHECK(m2.seed == m.seed);

    auto bad = small_manifest();
    bad.label_noise = 0.9;
    CHECK_THROWS_AS(bad.validate(), ContractError);
}

TEST_CASE("style separability: nearest centroid on amplitude means >= 0.95") {
    auto m = small_manifest();
    m.samples_per_domain = 40;
    m.label_noise = 0.0;
    auto ds = generate(m);

    // centroid of per-sample amplitude spectra per domain (train on
    // even indices, test on odd)
    std::map<int, std::vector<double>> centroid;
    std::map<int, int> counts;
    const size_t numel = static_cast<size_t>(m.shape.numel());
    for (const auto& [id, dd] : ds.by_domain) {
        centroid[id].assign(numel, 0.0);
        for (size_t i = 0; i < dd.samples.size(); i += 2) {
            auto sp = dft2(dd.samples[i].features, m.shape);
            for (size_t k = 0; k < numel; ++k) centroid[id][k] += sp.amplitude[k];
            counts[id]++;
        }
        for (double& v : centroid[id]) v /= counts[id];
    }
    int correct = 0, total = 0;
    for (const auto& [id, dd] : ds.by_domain) {
        for (size_t i = 1; i < dd.samples.size(); i += 2) {
            auto sp = dft2(dd.samples[i].features, m.shape);
            int best = -1;
            double best_dist = 1e300;
            for (const auto& [cid, cen] : centroid) {
                double dist = 0.0;
                for (size_t k = 0; k < numel; ++k) {
                    double diff = sp.amplitude[k] - cen[k];
                    dist += diff * diff;
                }
                if (dist < best_dist) best_dist = dist, best = cid;
            }
            correct += best == id;
            ++total;
        }
    }
    CHECK(static_cast<double>(correct) / total >= 0.95);
}
