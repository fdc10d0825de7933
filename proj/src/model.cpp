#include "dcg/model.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "json.hpp"

namespace dcg {

namespace {

std::vector<std::pair<int, int>> layer_dims(const MlpSpec& spec) {
    if (spec.input_dim <= 0 || spec.class_count <= 0)
        throw ContractError("MlpSpec: input_dim and class_count must be positive");
    std::vector<std::pair<int, int>> dims;
    int prev = spec.input_dim;
    for (int h : spec.hidden) {
        dims.push_back({prev, h});
        prev = h;
    }
    dims.push_back({prev, spec.class_count});
    return dims;
}

}  // namespace

ModelParams ModelParams::init(const MlpSpec& spec, Rng& rng) {
    ModelParams p;
    p.spec = spec;
    int layer = 0;
    for (auto [in, out] : layer_dims(spec)) {
        double bound = std::sqrt(1.0 / in);  // scaled uniform fan-in
        std::vector<double> w(static_cast<size_t>(in) * out);
        for (double& x : w) x = rng.uniform(-bound, bound);
        p.names.push_back("W" + std::to_string(layer));
        p.tensors.push_back(Tensor::param({in, out}, std::move(w)));
        p.names.push_back("b" + std::to_string(layer));
        p.tensors.push_back(Tensor::param({1, out}, std::vector<double>(out, 0.0)));
        ++layer;
    }
    return p;
}

std::vector<double> ModelParams::flatten() const {
    std::vector<double> flat;
    for (const auto& t : tensors) flat.insert(flat.end(), t.data().begin(), t.data().end());
    return flat;
}

void ModelParams::unflatten(const std::vector<double>& flat) {
    size_t pos = 0;
    for (auto& t : tensors) {
        size_t n = t.data().size();
        if (pos + n > flat.size()) throw ContractError("unflatten: vector too short");
        t = Tensor::param(t.shape(),
                          std::vector<double>(flat.begin() + pos, flat.begin() + pos + n));
        pos += n;
    }
    if (pos != flat.size()) throw ContractError("unflatten: vector too long");
}

std::vector<Tensor> ModelParams::clone_tensors() const {
    std::vector<Tensor> out;
    out.reserve(tensors.size());
    for (const auto& t : tensors) out.push_back(Tensor::param(t.shape(), t.data()));
    return out;
}

Tensor mlp_forward(const MlpSpec& spec, std::span<const Tensor> params, const Tensor& x) {
    auto dims = layer_dims(spec);
    if (params.size() != dims.size() * 2)
        throw ContractError("mlp_forward: parameter count does not match spec");
    if (x.shape().size() != 2 || x.shape()[1] != spec.input_dim)
        throw ContractError("mlp_forward: input feature dimension mismatch");
    const int batch = x.shape()[0];
    Tensor h = x;
    for (size_t l = 0; l < dims.size(); ++l) {
        h = add(matmul(h, params[2 * l]), broadcast_rows(params[2 * l + 1], batch));
        if (l + 1 < dims.size()) h = relu(h);
    }
    return h;
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels,
                     Reduction reduction) {
    if (logits.shape().size() != 2) throw ContractError("cross_entropy: logits must be 2-D");
    auto nll = sub(logsumexp(logits), gather(logits, labels));
    return reduction == Reduction::Mean ? mean(nll) : sum(nll);
}

void sgd_step(ModelParams& params, std::span<const Tensor> grads, OptimizerState& state,
              double epoch_fraction) {
    if (grads.size() != params.tensors.size())
        throw ContractError("sgd_step: gradient count does not match parameters");
    if (state.velocity.empty()) {
        for (const auto& t : params.tensors)
            state.velocity.emplace_back(t.data().size(), 0.0);
    }
    const double lr = state.lr_at(epoch_fraction);
    for (size_t i = 0; i < params.tensors.size(); ++i) {
        const auto& p = params.tensors[i].data();
        const auto& g = grads[i].data();
        if (g.size() != p.size()) throw ContractError("sgd_step: gradient shape mismatch");
        auto& v = state.velocity[i];
        std::vector<double> next(p.size());
        for (size_t j = 0; j < p.size(); ++j) {
            v[j] = state.momentum * v[j] + (g[j] + state.weight_decay * p[j]);
            next[j] = p[j] - lr * v[j];
        }
        params.tensors[i] = Tensor::param(params.tensors[i].shape(), std::move(next));
    }
}

void save_checkpoint(const ModelParams& params, const std::string& path) {
    nlohmann::json header;
    header["layer_spec"] = {{"input_dim", params.spec.input_dim},
                            {"hidden", params.spec.hidden},
                            {"class_count", params.spec.class_count}};
    header["names"] = params.names;
    nlohmann::json shapes = nlohmann::json::array();
    for (const auto& t : params.tensors) shapes.push_back(t.shape());
    header["shapes"] = shapes;
    std::string hs = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw ContractError("save_checkpoint: cannot open " + path);
    std::uint64_t len = hs.size();
    unsigned char lenb[8];
    for (int i = 0; i < 8; ++i) lenb[i] = static_cast<unsigned char>((len >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(lenb), 8);
    out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (const auto& t : params.tensors) {
        for (double x : t.data()) {
            std::uint64_t bits;
            static_assert(sizeof(bits) == sizeof(x));
            std::memcpy(&bits, &x, 8);
            unsigned char b[8];
            for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
            out.write(reinterpret_cast<const char*>(b), 8);
        }
    }
}

ModelParams load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ContractError("load_checkpoint: cannot open " + path);
    unsigned char lenb[8];
    in.read(reinterpret_cast<char*>(lenb), 8);
    if (!in) throw ContractError("load_checkpoint: truncated header");
    std::uint64_t len = 0;
    for (int i = 0; i < 8; ++i) len |= static_cast<std::uint64_t>(lenb[i]) << (8 * i);
    std::string hs(len, '\0');
    in.read(hs.data(), static_cast<std::streamsize>(len));
    if (!in) throw ContractError("load_checkpoint: truncated header body");
    auto header = nlohmann::json::parse(hs);

    ModelParams p;
    p.spec.input_dim = header["layer_spec"]["input_dim"].get<int>();
    p.spec.hidden = header["layer_spec"]["hidden"].get<std::vector<int>>();
    p.spec.class_count = header["layer_spec"]["class_count"].get<int>();
    p.names = header["names"].get<std::vector<std::string>>();
    for (const auto& sj : header["shapes"]) {
        Shape shape = sj.get<Shape>();
        std::int64_t n = 1;
        for (int d : shape) n *= d;
        std::vector<double> data(static_cast<size_t>(n));
        for (auto& x : data) {
            unsigned char b[8];
            in.read(reinterpret_cast<char*>(b), 8);
            if (!in) throw ContractError("load_checkpoint: truncated blob");
            std::uint64_t bits = 0;
            for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
            std::memcpy(&x, &bits, 8);
        }
        p.tensors.push_back(Tensor::param(shape, std::move(data)));
    }
    return p;
}

}  // namespace dcg
