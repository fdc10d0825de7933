#include "dcg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "dcg/tensor.hpp"
#include "json.hpp"

namespace dcg {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

void write_f64_blob(const std::string& path, const std::vector<double>& data) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ContractError("cannot open " + path);
    for (double x : data) {
        std::uint64_t bits;
        std::memcpy(&bits, &x, 8);
        unsigned char b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
        out.write(reinterpret_cast<const char*>(b), 8);
    }
}

std::vector<double> read_f64_blob(const std::string& path, size_t count) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ContractError("cannot open " + path);
    std::vector<double> data(count);
    for (auto& x : data) {
        unsigned char b[8];
        in.read(reinterpret_cast<char*>(b), 8);
        if (!in) throw ContractError("truncated blob: " + path);
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
        std::memcpy(&x, &bits, 8);
    }
    return data;
}

}  // namespace

void DatasetManifest::validate() const {
    if (class_count < 2) throw ContractError("manifest: class_count must be >= 2");
    if (shape.numel() <= 0) throw ContractError("manifest: image shape must be positive");
    if (domains.size() < 2) throw ContractError("manifest: need at least 2 domains");
    if (samples_per_domain <= 0) throw ContractError("manifest: samples_per_domain must be positive");
    if (label_noise < 0.0 || label_noise > 0.5) throw ContractError("manifest: label_noise outside [0,0.5]");
    if (duplicate_fraction < 0.0 || duplicate_fraction > 0.5)
        throw ContractError("manifest: duplicate_fraction outside [0,0.5]");
    std::vector<int> ids;
    for (const auto& d : domains) ids.push_back(d.domain_id);
    std::sort(ids.begin(), ids.end());
    if (std::unique(ids.begin(), ids.end()) != ids.end())
        throw ContractError("manifest: duplicate domain id");
}

std::vector<double> class_mask(int class_index, int height, int width) {
    std::vector<double> mask(static_cast<size_t>(height) * width, 0.0);
    const double cy = (height - 1) / 2.0, cx = (width - 1) / 2.0;
    const double r = std::min(height, width) / 2.0;
    const int kind = class_index % 10;
    const double shrink = 1.0 - 0.15 * (class_index / 10);
    auto set = [&](int y, int x) {
        if (y >= 0 && y < height && x >= 0 && x < width)
            mask[static_cast<size_t>(y) * width + x] = 1.0;
    };
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const double dy = (y - cy) / r * (1.0 / shrink);
            const double dx = (x - cx) / r * (1.0 / shrink);
            bool on = false;
            switch (kind) {
                case 0: on = std::fabs(dy) < 0.5 && std::fabs(dx) < 0.5; break;
                case 1: on = std::max(std::fabs(dy), std::fabs(dx)) < 0.7 &&
                             std::max(std::fabs(dy), std::fabs(dx)) > 0.4; break;
                case 2: on = std::fabs(dy) < 0.18 || std::fabs(dx) < 0.18; break;
                case 3: on = std::fabs(dy - dx) < 0.25 || std::fabs(dy + dx) < 0.25; break;
                case 4: on = std::fabs(dy) < 0.25; break;
                case 5: on = std::fabs(dx) < 0.25; break;
                case 6: on = dy * dy + dx * dx < 0.45; break;
                case 7: {
                    double rr = dy * dy + dx * dx;
                    on = rr < 0.6 && rr > 0.25;
                    break;
                }
                case 8: on = dy > -0.6 && dx < 0.6 && dy > dx - 0.1; break;
                case 9: on = ((y / std::max(1, height / 4)) + (x / std::max(1, width / 4))) % 2 == 0;
                        break;
            }
            if (on) set(y, x);
        }
    }
    return mask;
}

Dataset generate(const DatasetManifest& manifest) {
    manifest.validate();
    Dataset ds;
    ds.manifest = manifest;
    Rng master(manifest.seed);

    const int H = manifest.shape.height, W = manifest.shape.width, CH = manifest.shape.channels;
    std::vector<std::vector<double>> masks;
    for (int c = 0; c < manifest.class_count; ++c) masks.push_back(class_mask(c, H, W));

    std::int64_t next_id = 0;
    for (size_t di = 0; di < manifest.domains.size(); ++di) {
        const DomainSpec& spec = manifest.domains[di];
        Rng rng = master.split(static_cast<std::uint64_t>(di) + 1);
        DomainData dd;

        const int n = manifest.samples_per_domain;
        const int n_dup = static_cast<int>(std::floor(manifest.duplicate_fraction * n));
        const int n_fresh = n - n_dup;

        for (int i = 0; i < n_fresh; ++i) {
            int true_label = static_cast<int>(rng.uniform_int(manifest.class_count));
            Sample s;
            s.id = next_id++;
            s.shape = manifest.shape;
            s.domain_id = spec.domain_id;
            s.features.resize(static_cast<size_t>(manifest.shape.numel()));
            double phase0 = rng.uniform(0.0, 2.0 * std::numbers::pi);
            const auto& mask = masks[static_cast<size_t>(true_label)];
            for (int ch = 0; ch < CH; ++ch) {
                for (int y = 0; y < H; ++y) {
                    for (int x = 0; x < W; ++x) {
                        double t = (x * std::cos(spec.orientation) + y * std::sin(spec.orientation)) /
                                   static_cast<double>(std::max(H, W));
                        double stripes = 0.55 + 0.4 * std::sin(2.0 * std::numbers::pi *
                                                                   spec.stripe_freq * t +
                                                               phase0 + 0.7 * ch);
                        double bg = spec.hue[ch] * stripes;
                        bg += spec.noise_level * rng.uniform(-1.0, 1.0);
                        double m = mask[static_cast<size_t>(y) * W + x];
                        double px = (1.0 - m) * bg + m * (1.0 - bg);
                        s.features[static_cast<size_t>(ch) * H * W +
                                   static_cast<size_t>(y) * W + x] = std::clamp(px, 0.0, 1.0);
                    }
                }
            }
            // label noise: uniform resample among the other classes
            bool noisy = rng.uniform() < manifest.label_noise;
            if (noisy) {
                int other = static_cast<int>(rng.uniform_int(manifest.class_count - 1));
                s.label = other >= true_label ? other + 1 : other;
            } else {
                s.label = true_label;
            }
            dd.samples.push_back(std::move(s));
            dd.flags.noisy.push_back(noisy);
            dd.flags.duplicate.push_back(false);
        }
        for (int i = 0; i < n_dup; ++i) {
            size_t src = static_cast<size_t>(rng.uniform_int(dd.samples.size()));
            Sample s = dd.samples[src];
            s.id = next_id++;
            dd.samples.push_back(std::move(s));
            dd.flags.noisy.push_back(dd.flags.noisy[src]);
            dd.flags.duplicate.push_back(true);
        }
        ds.by_domain[spec.domain_id] = std::move(dd);
    }
    return ds;
}

std::pair<std::map<int, DomainData>, DomainData> leave_one_out(const Dataset& data,
                                                               int held_out_domain) {
    auto it = data.by_domain.find(held_out_domain);
    if (it == data.by_domain.end()) throw ContractError("leave_one_out: unknown domain id");
    std::map<int, DomainData> sources;
    for (const auto& [id, dd] : data.by_domain)
        if (id != held_out_domain) sources[id] = dd;
    return {std::move(sources), it->second};
}

DatasetManifest manifest_from_json(const std::string& json_text) {
    json j = json::parse(json_text);
    DatasetManifest m;
    m.class_count = j.value("class_count", m.class_count);
    m.shape.channels = j.value("channels", m.shape.channels);
    m.shape.height = j.value("height", m.shape.height);
    m.shape.width = j.value("width", m.shape.width);
    m.samples_per_domain = j.value("samples_per_domain", m.samples_per_domain);
    m.label_noise = j.value("label_noise", m.label_noise);
    m.duplicate_fraction = j.value("duplicate_fraction", m.duplicate_fraction);
    m.seed = j.value("seed", m.seed);
    if (j.contains("domains")) {
        for (const auto& dj : j["domains"]) {
            DomainSpec d;
            d.domain_id = dj.at("id").get<int>();
            auto hue = dj.at("hue").get<std::vector<double>>();
            if (hue.size() != 3) throw ContractError("manifest: hue must have 3 entries");
            std::copy(hue.begin(), hue.end(), d.hue);
            d.stripe_freq = dj.at("stripe_freq").get<double>();
            d.orientation = dj.at("orientation").get<double>();
            d.noise_level = dj.value("noise_level", 0.0);
            m.domains.push_back(d);
        }
    } else if (j.contains("domain_count")) {
        m.domains = default_domain_specs(j["domain_count"].get<int>());
    }
    m.validate();
    return m;
}

std::string manifest_to_json(const DatasetManifest& m) {
    json j;
    j["class_count"] = m.class_count;
    j["channels"] = m.shape.channels;
    j["height"] = m.shape.height;
    j["width"] = m.shape.width;
    j["samples_per_domain"] = m.samples_per_domain;
    j["label_noise"] = m.label_noise;
    j["duplicate_fraction"] = m.duplicate_fraction;
    j["seed"] = m.seed;
    j["domains"] = json::array();
    for (const auto& d : m.domains) {
        j["domains"].push_back({{"id", d.domain_id},
                                {"hue", {d.hue[0], d.hue[1], d.hue[2]}},
                                {"stripe_freq", d.stripe_freq},
                                {"orientation", d.orientation},
                                {"noise_level", d.noise_level}});
    }
    return j.dump(2);
}

void save_dataset(const Dataset& data, const std::string& dir) {
    fs::create_directories(dir);
    {
        std::ofstream out(fs::path(dir) / "manifest.json");
        out << manifest_to_json(data.manifest) << "\n";
    }
    for (const auto& [id, dd] : data.by_domain) {
        std::vector<double> blob;
        blob.reserve(dd.samples.size() * static_cast<size_t>(data.manifest.shape.numel()));
        json labels = json::array(), noisy = json::array(), dup = json::array(),
             ids = json::array();
        for (size_t i = 0; i < dd.samples.size(); ++i) {
            const Sample& s = dd.samples[i];
            blob.insert(blob.end(), s.features.begin(), s.features.end());
            labels.push_back(s.label);
            ids.push_back(s.id);
            noisy.push_back(static_cast<bool>(dd.flags.noisy[i]));
            dup.push_back(static_cast<bool>(dd.flags.duplicate[i]));
        }
        write_f64_blob((fs::path(dir) / ("domain_" + std::to_string(id) + ".f64")).string(), blob);
        json lj{{"labels", labels}, {"sample_ids", ids}, {"noisy", noisy}, {"duplicate", dup}};
        std::ofstream out(fs::path(dir) / ("labels_" + std::to_string(id) + ".json"));
        out << lj.dump(2) << "\n";
    }
}

Dataset load_dataset(const std::string& dir) {
    std::ifstream mf(fs::path(dir) / "manifest.json");
    if (!mf) throw ContractError("load_dataset: missing manifest.json in " + dir);
    std::string text((std::istreambuf_iterator<char>(mf)), std::istreambuf_iterator<char>());
    Dataset ds;
    ds.manifest = manifest_from_json(text);
    for (const auto& spec : ds.manifest.domains) {
        std::ifstream lf(fs::path(dir) / ("labels_" + std::to_string(spec.domain_id) + ".json"));
        if (!lf) throw ContractError("load_dataset: missing labels for domain " +
                                     std::to_string(spec.domain_id));
        json lj = json::parse(lf);
        auto labels = lj.at("labels").get<std::vector<int>>();
        auto ids = lj.at("sample_ids").get<std::vector<std::int64_t>>();
        auto noisy = lj.at("noisy").get<std::vector<bool>>();
        auto dup = lj.at("duplicate").get<std::vector<bool>>();
        const size_t n = labels.size();
        auto blob = read_f64_blob(
            (fs::path(dir) / ("domain_" + std::to_string(spec.domain_id) + ".f64")).string(),
            n * static_cast<size_t>(ds.manifest.shape.numel()));
        DomainData dd;
        const size_t numel = static_cast<size_t>(ds.manifest.shape.numel());
        for (size_t i = 0; i < n; ++i) {
            Sample s;
            s.id = ids[i];
            s.shape = ds.manifest.shape;
            s.features.assign(blob.begin() + static_cast<std::ptrdiff_t>(i * numel),
                              blob.begin() + static_cast<std::ptrdiff_t>((i + 1) * numel));
            s.label = labels[i];
            s.domain_id = spec.domain_id;
            dd.samples.push_back(std::move(s));
        }
        dd.flags.noisy = noisy;
        dd.flags.duplicate = dup;
        ds.by_domain[spec.domain_id] = std::move(dd);
    }
    return ds;
}

std::vector<DomainSpec> default_domain_specs(int count) {
    // Distinct stripe frequency/orientation per domain so domain
    // identity is carried by the amplitude spectrum.
    static const double hues[][3] = {{0.95, 0.55, 0.35}, {0.35, 0.85, 0.55},
                                     {0.45, 0.55, 0.95}, {0.85, 0.80, 0.30},
                                     {0.75, 0.35, 0.85}, {0.35, 0.85, 0.85}};
    std::vector<DomainSpec> specs;
    for (int k = 0; k < count; ++k) {
        DomainSpec d;
        d.domain_id = k;
        const double* h = hues[k % 6];
        d.hue[0] = h[0], d.hue[1] = h[1], d.hue[2] = h[2];
        d.stripe_freq = 2.0 + 2.0 * k;
        d.orientation = k * std::numbers::pi / 5.0;
        d.noise_level = 0.03;
        specs.push_back(d);
    }
    return specs;
}

}  // namespace dcg
