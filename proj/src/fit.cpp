#include "cpjm/fit.hpp"

#include <memory>

namespace cpjm {

PosteriorDraws fit_joint(const std::vector<SubjectRecord>& data,
                         const PriorConfig& priors, const SamplerConfig& cfg,
                         Rng& rng) {
  const auto model = std::make_shared<JointModel>(data, priors);
  const Eigen::VectorXd init = model->initial_point(rng, cfg.init_jitter);
  const bool latent = cfg.retain_latent;
  const LogDensity target = [model](const Eigen::VectorXd& u,
                                    Eigen::VectorXd* g) {
    return model->logpost(u, g);
  };
  const auto constrain = [model, latent](const Eigen::VectorXd& u) {
    return model->constrained_values(u, latent);
  };
  SamplerConfig chain_cfg = cfg;
  chain_cfg.seed = rng.spawn(0x6a6f696e74u).seed();  // decouple from caller
  return sample(target, init, model->value_names(latent), constrain, chain_cfg);
}

PosteriorDraws fit_longitudinal_only(const std::vector<SubjectRecord>& data,
                                     const PriorConfig& priors,
                                     const SamplerConfig& cfg, Rng& rng) {
  const auto model = std::make_shared<LongitudinalOnlyModel>(data, priors);
  const Eigen::VectorXd init = model->initial_point(rng, cfg.init_jitter);
  const LogDensity target = [model](const Eigen::VectorXd& u,
                                    Eigen::VectorXd* g) {
    return model->logpost(u, g);
  };
  const auto constrain = [model](const Eigen::VectorXd& u) {
    return model->constrained_values(u);
  };
  SamplerConfig chain_cfg = cfg;
  chain_cfg.seed = rng.spawn(0x6c6f6e67u).seed();
  return sample(target, init, model->value_names(), constrain, chain_cfg);
}

}  // namespace cpjm
