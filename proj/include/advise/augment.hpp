#pragma once

#include <array>
#include <span>
#include <string>
#include <string_view>

#include "advise/dataset.hpp"
#include "advise/rng.hpp"

namespace advise {

/// Offsets applied to the original age; variants younger than 18 are dropped.
inline constexpr std::array<int, 6> kAgeVariantOffsets = {-3, -2, -1, 1, 2, 3};

/// Variant ids are "<parent>~age<offset>", e.g. "c12~age-3".
std::string age_variant_id(std::string_view parent_id, int offset);
/// Returns the id itself for non-variant cases.
std::string_view parent_case_id(std::string_view id);

/// Each case is followed by its valid age variants; every variant inherits all
/// predictions of its parent unchanged.
PredictionDataset augment_age_variants(const PredictionDataset& ds);

/// Additive smoothing over the 11 grid points: (count_k + alpha) / (n + 11 alpha).
std::array<double, GridPrediction::kPoints> smoothed_pmf(
    std::span<const GridPrediction> observed, double alpha);

/// Appends, for every existing prediction, one draw from its case's smoothed
/// empirical pmf under a fresh "synth:<k>" participant id. Output size is 2N.
PredictionDataset augment_sampled_predictions(const PredictionDataset& ds, double alpha, RngSeed seed);

}  // namespace advise
