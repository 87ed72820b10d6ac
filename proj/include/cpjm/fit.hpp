#pragma once

#include "cpjm/posterior.hpp"
#include "cpjm/sampler.hpp"

namespace cpjm {

/// Builds the joint model, finds a data-informed start, and samples.
PosteriorDraws fit_joint(const std::vector<SubjectRecord>& data,
                         const PriorConfig& priors, const SamplerConfig& cfg,
                         Rng& rng);

/// Same machinery for the unbounded-random-effects baseline.
PosteriorDraws fit_longitudinal_only(const std::vector<SubjectRecord>& data,
                                     const PriorConfig& priors,
                                     const SamplerConfig& cfg, Rng& rng);

}  // namespace cpjm
