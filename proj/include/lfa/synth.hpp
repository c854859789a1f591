// Synthetic alignment problems with a known answer.
//
// Prototypes are random unit vectors with pairwise cosine below 0.8. A sample
// of class c is normalize(y_c * Q^-1 + noise), so mapping the samples with the
// planted Q lands them next to their prototypes.
#pragma once

#include "lfa/core.hpp"

#include <optional>

namespace lfa {

enum class PlantedMap { identity, random_orthogonal, random_invertible };

PlantedMap parse_planted_map(std::string_view name);
std::string_view to_string(PlantedMap map);

inline constexpr double kMaxPrototypeCosine = 0.8;

struct SynthSpec {
    Index classes = 20;
    Index dim = 32;
    int shots_per_class = 16;
    int test_per_class = 0;  // held-out samples per class
    double noise_std = 0.05;
    PlantedMap planted_map = PlantedMap::random_orthogonal;
    /// For random_orthogonal: absent draws a Haar-random rotation; a value r
    /// draws the Cayley transform of r * A for a random skew-symmetric A with
    /// unit-variance entries scaled by 1/sqrt(d). Small r gives a mild
    /// misalignment for which the identity map is still informative.
    std::optional<double> rotation_scale;
    std::uint64_t seed = 0;

    void validate() const;
};

struct SynthData {
    LabeledFeatures train;
    std::optional<LabeledFeatures> test;
    PrototypeMatrix prototypes;
    LinearMap planted;
};

/// Throws RejectionOverflow when 10000 consecutive draws fail the separation test.
SynthData synth_generate(const SynthSpec& spec);

/// Moves prototype `hub` a fraction `strength` of the way toward `point`
/// (then renormalizes), making it a nearest neighbour for many samples.
PrototypeMatrix induce_hub(const PrototypeMatrix& y, Index hub, const RowVector& point, double strength);

}  // namespace lfa
