#include "advise/augment.hpp"

#include <unordered_map>

namespace advise {

std::string age_variant_id(std::string_view parent_id, int offset) {
  std::string id(parent_id);
  id += "~age";
  if (offset > 0) id += '+';
  id += std::to_string(offset);
  return id;
}

std::string_view parent_case_id(std::string_view id) {
  auto pos = id.find("~age");
  return pos == std::string_view::npos ? id : id.substr(0, pos);
}

PredictionDataset augment_age_variants(const PredictionDataset& ds) {
  ds.validate();
  if (ds.cases.empty() || ds.predictions.empty()) {
    throw ValidationError("age augmentation needs at least one case with a prediction");
  }
  std::unordered_map<std::string, std::vector<std::size_t>> by_case;
  for (std::size_t i = 0; i < ds.predictions.size(); ++i) by_case[ds.predictions[i].case_id].push_back(i);

  PredictionDataset out;
  out.offenses = ds.offenses;
  out.predictions = ds.predictions;
  for (const auto& c : ds.cases) {
    out.cases.push_back(c);
    const auto it = by_case.find(c.id);
    for (int offset : kAgeVariantOffsets) {
      const int age = c.age + offset;
      if (age < kAdultAge) continue;
      DefendantCase v = c;
      v.id = age_variant_id(c.id, offset);
      v.age = age;
      if (it != by_case.end()) {
        for (std::size_t idx : it->second) {
          HumanPrediction p = ds.predictions[idx];
          p.case_id = v.id;
          out.predictions.push_back(std::move(p));
        }
      }
      out.cases.push_back(std::move(v));
    }
  }
  return out;
}

std::array<double, GridPrediction::kPoints> smoothed_pmf(std::span<const GridPrediction> observed,
                                                         double alpha) {
  if (!(alpha >= 0.0)) throw ValidationError("smoothing alpha must be >= 0");
  if (observed.empty() && alpha == 0.0) throw ValidationError("empty distribution without smoothing");
  std::array<double, GridPrediction::kPoints> pmf{};
  for (auto p : observed) pmf[static_cast<std::size_t>(p.tenths())] += 1.0;
  const double denom = static_cast<double>(observed.size()) + alpha * GridPrediction::kPoints;
  for (auto& v : pmf) v = (v + alpha) / denom;
  return pmf;
}

PredictionDataset augment_sampled_predictions(const PredictionDataset& ds, double alpha, RngSeed seed) {
  ds.validate();
  std::unordered_map<std::string, std::vector<GridPrediction>> observed;
  // Cases nobody predicted have no empirical pmf and receive no draws.
  for (const auto& p : ds.predictions) observed[p.case_id].push_back(p.value);

  std::unordered_map<std::string, std::array<double, GridPrediction::kPoints>> cdf;
  for (const auto& [id, values] : observed) {
    auto pmf = smoothed_pmf(values, alpha);
    double acc = 0.0;
    for (auto& v : pmf) v = (acc += v);
    cdf.emplace(id, pmf);
  }

  Rng rng{seed.derive("augment/sampled-predictions")};
  PredictionDataset out = ds;
  out.predictions.reserve(2 * ds.predictions.size());
  for (std::size_t i = 0; i < ds.predictions.size(); ++i) {
    const auto& c = cdf.at(ds.predictions[i].case_id);
    const double u = rng.uniform() * c.back();
    int k = 0;
    while (k < GridPrediction::kSteps && u >= c[static_cast<std::size_t>(k)]) ++k;
    out.predictions.push_back({ds.predictions[i].case_id,
                               std::string(kSyntheticParticipantPrefix) + std::to_string(i),
                               GridPrediction::from_tenths(k)});
  }
  return out;
}

}  // namespace advise
