#include "aglrls/model.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include "aglrls/errors.hpp"

namespace aglrls {

namespace {

constexpr const char* kCheckpointMagic = "AGLRLS-CHECKPOINT v1";

Mlp two_layer(std::size_t in, std::size_t hidden, std::size_t out, Rng& rng) {
    const std::array<std::size_t, 3> dims{in, hidden, out};
    const std::array<Activation, 2> acts{Activation::relu, Activation::none};
    return Mlp::xavier(dims, acts, rng);
}

void check_features(const ModelBundle& bundle, const FeatureSet& fs) {
    for (std::size_t v = 0; v < kNumViews; ++v) {
        if (fs.f[v].size() != bundle.config.view_dim(v)) {
            throw DimensionError("feature view " + view_names()[v] + " has " + std::to_string(fs.f[v].size()) +
                                 " values, expected " + std::to_string(bundle.config.view_dim(v)));
        }
    }
}

}  // namespace

const std::array<std::string, kNumViews>& view_names() {
    static const std::array<std::string, kNumViews> names{"g", "le", "re", "ne", "lm", "rm", "gl"};
    return names;
}

FeatureGrad FeatureGrad::zeros(const ModelConfig& config) {
    FeatureGrad g;
    for (std::size_t v = 0; v < kNumViews; ++v) g.f[v] = Tensor({config.view_dim(v)});
    return g;
}

ModelBundle ModelBundle::create(const ModelConfig& config, std::uint64_t seed) {
    ModelBundle b;
    b.config = config;
    // Each net gets its own stream so adding a view never reshuffles the others.
    for (std::size_t r = 0; r < kNumRegions; ++r) {
        Rng rng(derive_seed(seed, 100 + r));
        b.extractors[r] = two_layer(config.d_patch, config.hidden, config.d_feature, rng);
    }
    for (std::size_t v = 0; v < kNumViews; ++v) {
        Rng crng(derive_seed(seed, 200 + v));
        b.classifiers[v] = two_layer(config.view_dim(v), config.hidden, config.num_classes, crng);
        Rng drng(derive_seed(seed, 300 + v));
        b.discriminators[v] = two_layer(config.view_dim(v), config.hidden, 1, drng);
    }
    return b;
}

ExtractTrace extract_traced(const ModelBundle& bundle, const RegionSample& sample) {
    ExtractTrace t;
    const std::size_t d = bundle.config.d_feature;
    std::vector<double> concat;
    concat.reserve(kNumRegions * d);
    for (std::size_t r = 0; r < kNumRegions; ++r) {
        if (sample.patches[r].size() != bundle.config.d_patch) {
            throw DimensionError("patch " + view_names()[r] + " has " + std::to_string(sample.patches[r].size()) +
                                 " values, expected " + std::to_string(bundle.config.d_patch));
        }
        t.extractor_acts[r] = mlp_forward(bundle.extractors[r], sample.patches[r]);
        t.features.f[r] = t.extractor_acts[r].output();
        const auto vals = t.features.f[r].values();
        concat.insert(concat.end(), vals.begin(), vals.end());
    }
    t.features.f[kGlobalLocalView] = Tensor::vector(std::move(concat));
    return t;
}

FeatureSet extract(const ModelBundle& bundle, const RegionSample& sample) {
    return extract_traced(bundle, sample).features;
}

Tensor classify_all(const ModelBundle& bundle, const FeatureSet& fs) {
    check_features(bundle, fs);
    const std::size_t c = bundle.config.num_classes;
    Tensor logits = Tensor::matrix(kNumViews, c);
    for (std::size_t v = 0; v < kNumViews; ++v) {
        const Activations a = mlp_forward(bundle.classifiers[v], fs.f[v]);
        auto row = logits.row(v);
        const auto out = a.output().values();
        std::copy(out.begin(), out.end(), row.begin());
    }
    return logits;
}

std::array<double, kNumViews> discriminate_all(const ModelBundle& bundle, const FeatureSet& fs) {
    check_features(bundle, fs);
    std::array<double, kNumViews> p{};
    for (std::size_t v = 0; v < kNumViews; ++v) {
        p[v] = sigmoid(mlp_forward(bundle.discriminators[v], fs.f[v]).output()[0]);
    }
    return p;
}

void backprop_features(const ModelBundle& bundle, const ExtractTrace& trace, const FeatureGrad& grad,
                       std::array<MlpGrads, kNumRegions>& extractor_grads) {
    const std::size_t d = bundle.config.d_feature;
    const Tensor& gl = grad.f[kGlobalLocalView];
    if (gl.size() != kNumRegions * d) throw DimensionError("gl-view gradient has the wrong size");
    for (std::size_t r = 0; r < kNumRegions; ++r) {
        if (grad.f[r].size() != d) throw DimensionError("region-view gradient has the wrong size");
        std::vector<double> g(d);
        bool nonzero = false;
        for (std::size_t j = 0; j < d; ++j) {
            g[j] = grad.f[r][j] + gl[r * d + j];
            nonzero = nonzero || g[j] != 0.0;
        }
        if (!nonzero) continue;
        mlp_backward(bundle.extractors[r], trace.extractor_acts[r], Tensor::vector(std::move(g)), extractor_grads[r]);
    }
}

std::array<MlpGrads, kNumRegions> zero_extractor_grads(const ModelBundle& bundle) {
    std::array<MlpGrads, kNumRegions> g;
    for (std::size_t r = 0; r < kNumRegions; ++r) g[r] = MlpGrads(bundle.extractors[r]);
    return g;
}

std::array<MlpGrads, kNumViews> zero_head_grads(const std::array<Mlp, kNumViews>& heads) {
    std::array<MlpGrads, kNumViews> g;
    for (std::size_t v = 0; v < kNumViews; ++v) g[v] = MlpGrads(heads[v]);
    return g;
}

namespace {

void write_net(std::ostream& os, const std::string& kind, const std::string& view, const Mlp& net) {
    os << "net " << kind << ' ' << view << ' ' << net.layers().size() << '\n';
    for (const DenseLayer& l : net.layers()) {
        os << "layer " << l.in << ' ' << l.out << ' ' << (l.activation == Activation::relu ? "relu" : "none") << '\n';
        os << 'w';
        for (double v : l.weight) os << ' ' << v;
        os << "\nb";
        for (double v : l.bias) os << ' ' << v;
        os << '\n';
    }
}

class LineReader {
public:
    explicit LineReader(const std::string& text) : is_(text) {}

    std::istringstream next(const char* expecting) {
        std::string line;
        if (!std::getline(is_, line)) throw ParseError(std::string("checkpoint truncated, expected ") + expecting, line_ + 1);
        ++line_;
        return std::istringstream(line);
    }
    std::size_t line() const { return line_; }

private:
    std::istringstream is_;
    std::size_t line_ = 0;
};

std::vector<double> read_values(LineReader& reader, char tag, std::size_t n) {
    auto ls = reader.next(tag == 'w' ? "weights" : "biases");
    char got = 0;
    ls >> got;
    if (got != tag) throw ParseError(std::string("expected '") + tag + "' line", reader.line());
    std::vector<double> v(n);
    std::string tok;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(ls >> tok)) throw ParseError("too few values", reader.line());
        char* end = nullptr;
        v[i] = std::strtod(tok.c_str(), &end);
        if (end != tok.c_str() + tok.size()) throw ParseError("invalid real '" + tok + "'", reader.line());
    }
    if (ls >> tok) throw ParseError("too many values", reader.line());
    return v;
}

Mlp read_net(LineReader& reader, const std::string& kind, const std::string& view) {
    auto hs = reader.next("net header");
    std::string word, k, v;
    std::size_t layers = 0;
    if (!(hs >> word >> k >> v >> layers) || word != "net" || k != kind || v != view) {
        throw ParseError("expected 'net " + kind + ' ' + view + "'", reader.line());
    }
    std::vector<DenseLayer> out;
    for (std::size_t i = 0; i < layers; ++i) {
        auto ls = reader.next("layer header");
        DenseLayer l;
        std::string act;
        if (!(ls >> word >> l.in >> l.out >> act) || word != "layer" || (act != "relu" && act != "none")) {
            throw ParseError("malformed layer header", reader.line());
        }
        l.activation = act == "relu" ? Activation::relu : Activation::none;
        l.weight = read_values(reader, 'w', l.in * l.out);
        l.bias = read_values(reader, 'b', l.out);
        out.push_back(std::move(l));
    }
    return Mlp(std::move(out));
}

}  // namespace

std::string serialize_checkpoint(const ModelBundle& b) {
    std::ostringstream os;
    os << std::setprecision(17);
    os << kCheckpointMagic << '\n';
    os << "config " << b.config.d_patch << ' ' << b.config.d_feature << ' ' << b.config.hidden << ' '
       << b.config.num_classes << '\n';
    for (std::size_t r = 0; r < kNumRegions; ++r) write_net(os, "extractor", view_names()[r], b.extractors[r]);
    for (std::size_t v = 0; v < kNumViews; ++v) write_net(os, "classifier", view_names()[v], b.classifiers[v]);
    for (std::size_t v = 0; v < kNumViews; ++v) write_net(os, "discriminator", view_names()[v], b.discriminators[v]);
    return os.str();
}

ModelBundle parse_checkpoint(const std::string& text) {
    LineReader reader(text);
    {
        auto ls = reader.next("header");
        if (ls.str() != kCheckpointMagic) throw ParseError("not a checkpoint file", reader.line());
    }
    ModelBundle b;
    {
        auto ls = reader.next("config");
        std::string word;
        if (!(ls >> word >> b.config.d_patch >> b.config.d_feature >> b.config.hidden >> b.config.num_classes) ||
            word != "config") {
            throw ParseError("malformed config line", reader.line());
        }
    }
    for (std::size_t r = 0; r < kNumRegions; ++r) b.extractors[r] = read_net(reader, "extractor", view_names()[r]);
    for (std::size_t v = 0; v < kNumViews; ++v) b.classifiers[v] = read_net(reader, "classifier", view_names()[v]);
    for (std::size_t v = 0; v < kNumViews; ++v) b.discriminators[v] = read_net(reader, "discriminator", view_names()[v]);
    return b;
}

void save_checkpoint(const ModelBundle& bundle, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << serialize_checkpoint(bundle);
}

ModelBundle load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_checkpoint(buf.str());
}

}  // namespace aglrls
