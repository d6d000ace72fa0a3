#include "aglrls/synthdata.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

#include "aglrls/autodiff.hpp"
#include "aglrls/errors.hpp"
#include "aglrls/evaluation_access.hpp"

namespace aglrls {

namespace {

constexpr const char* kMagic = "AGLRLS-DATASET v1";

void rotate_pairs(std::span<double> x, double angle) {
    if (angle == 0.0) return;
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    for (std::size_t i = 0; i + 1 < x.size(); i += 2) {
        const double a = x[i];
        const double b = x[i + 1];
        x[i] = c * a - s * b;
        x[i + 1] = s * a + c * b;
    }
}

void check_priors(const std::vector<double>& priors, std::size_t c, const char* which) {
    if (priors.size() != c) {
        throw SpecError(std::string(which) + " priors have " + std::to_string(priors.size()) + " entries, expected " +
                        std::to_string(c));
    }
    double sum = 0.0;
    for (double p : priors) {
        if (!(p >= 0.0) || !std::isfinite(p)) throw SpecError(std::string(which) + " priors must be nonnegative");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        throw SpecError(std::string(which) + " priors sum to " + std::to_string(sum) + ", expected 1");
    }
}

}  // namespace

std::string to_string(Domain d) { return d == Domain::source ? "source" : "target"; }

Domain domain_from_string(const std::string& s) {
    if (s == "source") return Domain::source;
    if (s == "target") return Domain::target;
    throw std::invalid_argument("unknown domain '" + s + "'");
}

std::vector<double> DomainShift::apply(std::span<const double> x) const {
    std::vector<double> y(x.begin(), x.end());
    rotate_pairs(y, angle);
    for (std::size_t i = 0; i < offset.size() && i < y.size(); ++i) y[i] += offset[i];
    return y;
}

std::vector<double> DomainShift::invert(std::span<const double> y) const {
    std::vector<double> x(y.begin(), y.end());
    for (std::size_t i = 0; i < offset.size() && i < x.size(); ++i) x[i] -= offset[i];
    rotate_pairs(x, -angle);
    return x;
}

void DatasetSpec::validate() const {
    if (num_classes < 2) throw SpecError("need at least two classes");
    if (d_patch == 0) throw SpecError("d_patch must be positive");
    check_priors(source_priors, num_classes, "source");
    check_priors(target_priors, num_classes, "target");
    if (class_means.size() != num_classes * kNumRegions * d_patch) {
        throw SpecError("class_means must hold classes*6*d_patch values");
    }
    if (!shift.offset.empty() && shift.offset.size() != d_patch) {
        throw SpecError("shift offset must have d_patch entries");
    }
    if (!(source_noise >= 0.0) || !(target_noise >= 0.0)) throw SpecError("noise sigmas must be nonnegative");
    if (source_count == 0 || target_count == 0) throw SpecError("sample counts must be positive");
    if (!(target_occlusion >= 0.0 && target_occlusion <= 1.0)) throw SpecError("target_occlusion must lie in [0, 1]");
}

std::span<const double> DatasetSpec::mean(std::size_t cls, Region region) const {
    const std::size_t offset = (cls * kNumRegions + static_cast<std::size_t>(region)) * d_patch;
    return std::span<const double>(class_means).subspan(offset, d_patch);
}

void randomize_class_means(DatasetSpec& spec, double scale, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> n(0.0, scale);
    spec.class_means.resize(spec.num_classes * kNumRegions * spec.d_patch);
    for (double& m : spec.class_means) m = n(rng);
}

std::vector<double> imbalanced_priors(std::size_t num_classes, double dominant, double rare) {
    if (num_classes < 4) throw SpecError("imbalanced preset needs at least 4 classes");
    const double rest = (1.0 - dominant - 2.0 * rare) / static_cast<double>(num_classes - 3);
    if (rest < 0.0) throw SpecError("dominant + 2*rare exceeds 1");
    std::vector<double> p(num_classes, rest);
    p[3] = dominant;
    p[1] = rare;
    p[2] = rare;
    return p;
}

Dataset::Dataset(std::size_t num_classes, std::size_t d_patch, Domain domain, std::uint64_t seed,
                 std::vector<RegionSample> samples, std::vector<int> truth)
    : num_classes_(num_classes), d_patch_(d_patch), domain_(domain), seed_(seed), samples_(std::move(samples)),
      truth_(std::move(truth)) {
    if (truth_.size() != samples_.size()) throw DimensionError("one truth entry per sample is required");
}

std::pair<Dataset, Dataset> generate(const DatasetSpec& spec, std::uint64_t seed) {
    spec.validate();
    auto draw = [&](Domain domain) {
        const bool is_target = domain == Domain::target;
        Rng rng(derive_seed(seed, is_target ? 2 : 1));
        const auto& priors = is_target ? spec.target_priors : spec.source_priors;
        std::discrete_distribution<int> pick(priors.begin(), priors.end());
        std::normal_distribution<double> noise(0.0, 1.0);
        const double sigma = is_target ? spec.target_noise : spec.source_noise;
        const std::size_t n = is_target ? spec.target_count : spec.source_count;

        Rng occ_rng(derive_seed(seed, 3));
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::uniform_int_distribution<std::size_t> local(1, kNumRegions - 1);

        std::vector<RegionSample> samples;
        std::vector<int> truth;
        samples.reserve(n);
        truth.reserve(n);
        for (std::size_t k = 0; k < n; ++k) {
            RegionSample s;
            s.domain = domain;
            const int cls = pick(rng);
            for (std::size_t r = 0; r < kNumRegions; ++r) {
                auto mu = spec.mean(static_cast<std::size_t>(cls), static_cast<Region>(r));
                std::vector<double> patch(mu.begin(), mu.end());
                for (double& v : patch) v += sigma * noise(rng);
                if (is_target) patch = spec.shift.apply(patch);
                s.patches[r] = Tensor::vector(std::move(patch));
            }
            if (is_target && spec.target_occlusion > 0.0 && unit(occ_rng) < spec.target_occlusion) {
                const std::size_t r = local(occ_rng);
                std::vector<double> patch(spec.d_patch);
                for (double& v : patch) v = sigma * noise(occ_rng);
                s.patches[r] = Tensor::vector(spec.shift.apply(patch));
            }
            if (!is_target) s.label = cls;
            samples.push_back(std::move(s));
            truth.push_back(cls);
        }
        return Dataset(spec.num_classes, spec.d_patch, domain, seed, std::move(samples), std::move(truth));
    };
    return {draw(Domain::source), draw(Domain::target)};
}

std::string serialize(const Dataset& d) {
    std::ostringstream os;
    os << kMagic << '\n';
    os << "classes=" << d.num_classes() << " d_patch=" << d.d_patch() << " domain=" << to_string(d.domain())
       << " count=" << d.size() << " seed=" << d.seed() << '\n';
    os << std::setprecision(17);
    const auto truth = EvaluationAccess::truth(d);
    for (std::size_t i = 0; i < d.size(); ++i) {
        const RegionSample& s = d[i];
        os << (s.label ? *s.label : truth[i]);
        for (const Tensor& p : s.patches) {
            for (double v : p.values()) os << ',' << v;
        }
        os << '\n';
    }
    return os.str();
}

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, sep)) out.push_back(cur);
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

std::uint64_t parse_u64(const std::string& s, std::size_t line, const char* what) {
    try {
        std::size_t used = 0;
        const unsigned long long v = std::stoull(s, &used);
        if (used != s.size() || s.empty() || s[0] == '-') throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ParseError(std::string("invalid ") + what + " '" + s + "'", line);
    }
}

double parse_double(const std::string& s, std::size_t line) {
    const char* begin = s.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (s.empty() || end != begin + s.size() || !std::isfinite(v)) {
        throw ParseError("invalid real '" + s + "'", line);
    }
    return v;
}

}  // namespace

Dataset parse_dataset(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    std::size_t line_no = 0;

    if (!std::getline(is, line)) throw ParseError("missing header section ('" + std::string(kMagic) + "')", 1);
    ++line_no;
    if (line != kMagic) throw ParseError("bad header '" + line + "', expected '" + kMagic + "'", line_no);

    if (!std::getline(is, line)) throw ParseError("missing metadata section (classes= d_patch= ...)", 2);
    ++line_no;
    std::size_t classes = 0, d_patch = 0, count = 0;
    std::uint64_t seed = 0;
    std::optional<Domain> domain;
    {
        std::istringstream fields(line);
        std::string field;
        int seen = 0;
        while (fields >> field) {
            const auto eq = field.find('=');
            if (eq == std::string::npos) throw ParseError("metadata field '" + field + "' lacks '='", line_no);
            const std::string key = field.substr(0, eq);
            const std::string value = field.substr(eq + 1);
            if (key == "classes") {
                classes = parse_u64(value, line_no, "classes");
            } else if (key == "d_patch") {
                d_patch = parse_u64(value, line_no, "d_patch");
            } else if (key == "domain") {
                try {
                    domain = domain_from_string(value);
                } catch (const std::invalid_argument& e) {
                    throw ParseError(e.what(), line_no);
                }
            } else if (key == "count") {
                count = parse_u64(value, line_no, "count");
            } else if (key == "seed") {
                seed = parse_u64(value, line_no, "seed");
            } else {
                throw ParseError("unknown metadata key '" + key + "'", line_no);
            }
            ++seen;
        }
        if (seen != 5 || !domain || classes == 0 || d_patch == 0) {
            throw ParseError("metadata needs classes, d_patch, domain, count and seed", line_no);
        }
    }

    const std::size_t width = 1 + kNumRegions * d_patch;
    std::vector<RegionSample> samples;
    std::vector<int> truth;
    samples.reserve(count);
    truth.reserve(count);
    while (samples.size() < count) {
        if (!std::getline(is, line)) {
            throw ParseError("missing sample section: expected " + std::to_string(count) + " sample lines, found " +
                                 std::to_string(samples.size()),
                             line_no + 1);
        }
        ++line_no;
        const auto cells = split(line, ',');
        if (cells.size() != width) {
            throw ParseError("sample line has " + std::to_string(cells.size()) + " fields, expected " +
                                 std::to_string(width),
                             line_no);
        }
        long label = 0;
        try {
            std::size_t used = 0;
            label = std::stol(cells[0], &used);
            if (used != cells[0].size()) throw std::invalid_argument(cells[0]);
        } catch (const std::exception&) {
            throw ParseError("invalid label '" + cells[0] + "'", line_no);
        }
        if (label < -1 || label >= static_cast<long>(classes)) {
            throw ParseError("label " + cells[0] + " out of range", line_no);
        }
        RegionSample s;
        s.domain = *domain;
        for (std::size_t r = 0; r < kNumRegions; ++r) {
            std::vector<double> patch(d_patch);
            for (std::size_t j = 0; j < d_patch; ++j) patch[j] = parse_double(cells[1 + r * d_patch + j], line_no);
            s.patches[r] = Tensor::vector(std::move(patch));
        }
        if (*domain == Domain::source && label >= 0) s.label = static_cast<int>(label);
        samples.push_back(std::move(s));
        truth.push_back(static_cast<int>(label));
    }
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty()) throw ParseError("trailing content after " + std::to_string(count) + " samples", line_no);
    }
    return Dataset(classes, d_patch, *domain, seed, std::move(samples), std::move(truth));
}

void save(const Dataset& dataset, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << serialize(dataset);
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

Dataset load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_dataset(buf.str());
}

RegionSample augment_weak(const RegionSample& sample, std::uint64_t seed, double sigma) {
    RegionSample out = sample;
    if (sigma == 0.0) return out;
    Rng rng(seed);
    std::normal_distribution<double> n(0.0, sigma);
    for (Tensor& p : out.patches) {
        for (double& v : p.values()) v += n(rng);
    }
    return out;
}

RegionSample augment_strong(const RegionSample& sample, std::uint64_t seed, double sigma, double dropout_prob) {
    RegionSample out = sample;
    Rng rng(seed);
    if (sigma != 0.0) {
        std::normal_distribution<double> n(0.0, sigma);
        for (Tensor& p : out.patches) {
            for (double& v : p.values()) v += n(rng);
        }
    }
    std::bernoulli_distribution drop(dropout_prob);
    if (drop(rng)) {
        std::uniform_int_distribution<std::size_t> which(1, kNumRegions - 1);
        for (double& v : out.patches[which(rng)].values()) v = 0.0;
    }
    return out;
}

}  // namespace aglrls
