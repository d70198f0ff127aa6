/*
 * Copyright 2026 The Pixelpoison Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "pixelpoison/retrieval.hpp"

namespace pxp {

/// The report always carries these cutoffs, in this order.
inline constexpr std::array<Index, 4> kSuccessCutoffs = {1, 5, 10, 100};

/// Attack-effectiveness summary for one (or an aggregate of) evaluation
/// run(s). For a single run the stddev fields are zero; aggregate() fills
/// them with population deviations across runs.
struct PoisonReport {
  std::array<double, 4> success{};      // success@k for kSuccessCutoffs
  std::array<double, 4> success_std{};  // population stddev across repeats
  double mrra100 = 0.0;
  double mrra100_std = 0.0;
  Index query_count = 0;   // queries measured (summed across repeats)
  Index repeats = 1;       // how many reports were folded in
  std::vector<std::string> injected_ids;
  std::string config_echo;  // human-readable parameter summary
};

/// Fraction of queries with at least one adversarial document in their
/// top-k.
inline double success_at_k(const std::vector<RankedList>& rankings,
                           const std::unordered_set<std::string>& adversarial,
                           Index k) {
  if (k < 1) throw std::invalid_argument("success_at_k: k must be >= 1");
  if (rankings.empty())
    throw std::invalid_argument("success_at_k: no rankings");
  Index hits = 0;
  for (const RankedList& list : rankings) {
    const Index depth = std::min<Index>(k, static_cast<Index>(list.entries.size()));
    for (Index r = 0; r < depth; ++r)
      if (adversarial.count(list.entries[static_cast<std::size_t>(r)].id)) {
        ++hits;
        break;
      }
  }
  return static_cast<double>(hits) / static_cast<double>(rankings.size());
}

/// Mean reciprocal rank of the first adversarial document within the
/// top-100, averaged over all queries; a query with no occurrence in the
/// cutoff contributes zero.
inline double mrra_at_100(const std::vector<RankedList>& rankings,
                          const std::unordered_set<std::string>& adversarial) {
  if (rankings.empty()) throw std::invalid_argument("mrra_at_100: no rankings");
  double total = 0.0;
  for (const RankedList& list : rankings) {
    const Index depth =
        std::min<Index>(100, static_cast<Index>(list.entries.size()));
    for (Index r = 0; r < depth; ++r)
      if (adversarial.count(list.entries[static_cast<std::size_t>(r)].id)) {
        total += 1.0 / static_cast<double>(r + 1);
        break;
      }
  }
  return total / static_cast<double>(rankings.size());
}

/// Builds a single-run report (stddev fields zero).
inline PoisonReport measure_poisoning(
    const std::vector<RankedList>& rankings,
    const std::unordered_set<std::string>& adversarial,
    std::string config_echo = "") {
  PoisonReport rep;
  for (std::size_t i = 0; i < kSuccessCutoffs.size(); ++i)
    rep.success[i] = success_at_k(rankings, adversarial, kSuccessCutoffs[i]);
  rep.mrra100 = mrra_at_100(rankings, adversarial);
  rep.query_count = static_cast<Index>(rankings.size());
  rep.injected_ids.assign(adversarial.begin(), adversarial.end());
  std::sort(rep.injected_ids.begin(), rep.injected_ids.end());
  rep.config_echo = std::move(config_echo);
  return rep;
}

namespace detail {

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

/// Population (not sample) standard deviation: deterministic complete
/// success across repeats must report exactly ±0.
inline MeanStd mean_population_std(const std::vector<double>& xs) {
  MeanStd out;
  for (double x : xs) out.mean += x;
  out.mean /= static_cast<double>(xs.size());
  double sq = 0.0;
  for (double x : xs) sq += (x - out.mean) * (x - out.mean);
  out.std = std::sqrt(sq / static_cast<double>(xs.size()));
  return out;
}

}  // namespace detail

/// Mean and population standard deviation across repeat reports (seeds x
/// query groups). Query counts sum; injected ids union.
inline PoisonReport aggregate(const std::vector<PoisonReport>& reports) {
  if (reports.empty()) throw std::invalid_argument("aggregate: no reports");
  PoisonReport out;
  std::vector<double> column(reports.size());
  for (std::size_t ki = 0; ki < kSuccessCutoffs.size(); ++ki) {
    for (std::size_t r = 0; r < reports.size(); ++r)
      column[r] = reports[r].success[ki];
    const auto ms = detail::mean_population_std(column);
    out.success[ki] = ms.mean;
    out.success_std[ki] = ms.std;
  }
  for (std::size_t r = 0; r < reports.size(); ++r)
    column[r] = reports[r].mrra100;
  const auto ms = detail::mean_population_std(column);
  out.mrra100 = ms.mean;
  out.mrra100_std = ms.std;

  out.repeats = 0;
  std::unordered_set<std::string> ids;
  for (const PoisonReport& rep : reports) {
    out.query_count += rep.query_count;
    out.repeats += rep.repeats;
    ids.insert(rep.injected_ids.begin(), rep.injected_ids.end());
  }
  out.injected_ids.assign(ids.begin(), ids.end());
  std::sort(out.injected_ids.begin(), out.injected_ids.end());
  out.config_echo = reports.front().config_echo;
  for (const PoisonReport& rep : reports)
    if (rep.config_echo != out.config_echo) {
      out.config_echo = "mixed";
      break;
    }
  return out;
}

}  // namespace pxp
