#pragma once

// Seeded six-region synthetic datasets standing in for labeled source / unlabeled target
// face datasets, their text file format, and the weak/strong augmentations.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "aglrls/tensor.hpp"

namespace aglrls {

enum class Domain { source, target };

std::string to_string(Domain d);
Domain domain_from_string(const std::string& s);

inline constexpr std::size_t kNumRegions = 6;

/// Patch order inside a sample: global, left eye, right eye, nose, left mouth, right mouth.
enum class Region : std::size_t { global = 0, left_eye, right_eye, nose, left_mouth, right_mouth };

struct RegionSample {
    std::array<Tensor, kNumRegions> patches;
    std::optional<int> label;  // present only on labeled source samples
    Domain domain = Domain::source;

    friend bool operator==(const RegionSample&, const RegionSample&) = default;
};

/// x_target = R x + offset, R a Givens rotation by `angle` on coordinate pairs (0,1), (2,3), ...
struct DomainShift {
    std::vector<double> offset;  // d_patch entries, or empty for no offset
    double angle = 0.0;

    std::vector<double> apply(std::span<const double> x) const;
    std::vector<double> invert(std::span<const double> y) const;
};

struct DatasetSpec {
    std::size_t num_classes = 7;
    std::size_t d_patch = 16;
    std::vector<double> source_priors;
    std::vector<double> target_priors;
    /// num_classes x 6 x d_patch, row-major.
    std::vector<double> class_means;
    DomainShift shift;
    double source_noise = 1.0;
    double target_noise = 1.0;
    /// Probability that a target sample has one local patch replaced by class-free noise.
    double target_occlusion = 0.0;
    std::size_t source_count = 2000;
    std::size_t target_count = 2000;

    /// Throws SpecError on any violated invariant.
    void validate() const;

    std::span<const double> mean(std::size_t cls, Region region) const;
};

/// Fills `class_means` with N(0, scale^2) entries drawn from `seed`.
void randomize_class_means(DatasetSpec& spec, double scale, std::uint64_t seed);

/// Imbalanced priors for c classes: one class holding `dominant`, two holding `rare` each,
/// the rest sharing the remainder. c must be >= 4.
std::vector<double> imbalanced_priors(std::size_t num_classes, double dominant = 0.45, double rare = 0.025);

class Dataset {
public:
    Dataset() = default;
    /// `truth` holds one class index (or -1 if unknown) per sample.
    Dataset(std::size_t num_classes, std::size_t d_patch, Domain domain, std::uint64_t seed,
            std::vector<RegionSample> samples, std::vector<int> truth);

    std::size_t num_classes() const noexcept { return num_classes_; }
    std::size_t d_patch() const noexcept { return d_patch_; }
    Domain domain() const noexcept { return domain_; }
    std::uint64_t seed() const noexcept { return seed_; }
    std::size_t size() const noexcept { return samples_.size(); }
    const std::vector<RegionSample>& samples() const noexcept { return samples_; }
    const RegionSample& operator[](std::size_t i) const { return samples_[i]; }

    friend bool operator==(const Dataset&, const Dataset&) = default;

private:
    friend struct EvaluationAccess;

    std::size_t num_classes_ = 0;
    std::size_t d_patch_ = 0;
    Domain domain_ = Domain::source;
    std::uint64_t seed_ = 0;
    std::vector<RegionSample> samples_;
    std::vector<int> truth_;
};

/// Draws (source, target). Target samples carry no label; their truth stays inside the Dataset.
std::pair<Dataset, Dataset> generate(const DatasetSpec& spec, std::uint64_t seed);

void save(const Dataset& dataset, const std::filesystem::path& path);
/// Throws ParseError (with line number) on malformed or truncated files.
Dataset load(const std::filesystem::path& path);

std::string serialize(const Dataset& dataset);
Dataset parse_dataset(const std::string& text);

inline constexpr double kWeakSigma = 0.01;
inline constexpr double kStrongSigma = 0.05;
inline constexpr double kStrongDropout = 0.2;

RegionSample augment_weak(const RegionSample& sample, std::uint64_t seed, double sigma = kWeakSigma);
/// Noise on every patch, then with probability `dropout_prob` one local patch (never the global one) is zeroed.
RegionSample augment_strong(const RegionSample& sample, std::uint64_t seed, double sigma = kStrongSigma,
                            double dropout_prob = kStrongDropout);

}  // namespace aglrls
