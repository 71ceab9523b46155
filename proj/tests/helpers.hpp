#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "advise/core.hpp"
#include "advise/dataset.hpp"

namespace testutil {

inline advise::DefendantCase make_case(std::string id, int age = 30, int arrests = 2, int convictions = 1,
                                       bool fta = false, std::string offense = "property",
                                       std::optional<int> outcome = 0,
                                       advise::Race race = advise::Race::White,
                                       advise::Gender gender = advise::Gender::Male) {
  advise::DefendantCase c;
  c.id = std::move(id);
  c.age = age;
  c.gender = gender;
  c.race = race;
  c.offense_type = std::move(offense);
  c.prior_arrests = arrests;
  c.prior_convictions = convictions;
  c.prior_fta = fta;
  c.outcome = outcome;
  return c;
}

inline advise::GridPrediction g(int tenths) { return advise::GridPrediction::from_tenths(tenths); }

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("advise-test-" + name + "-" + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace testutil
