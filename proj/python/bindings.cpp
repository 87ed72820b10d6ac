#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cpjm/fit.hpp"
#include "cpjm/marginal.hpp"
#include "cpjm/ptmvn.hpp"
#include "cpjm/sim.hpp"

namespace py = pybind11;
using namespace cpjm;

PYBIND11_MODULE(_cpjm, m) {
  m.doc() = "Joint change-point model for longitudinal and survival data";

  py::register_exception<DegenerateTruncation>(m, "DegenerateTruncation");
  py::register_exception<DataError>(m, "DataError");
  py::register_exception<SamplerError>(m, "SamplerRuntimeError");

  py::class_<Rng>(m, "Rng")
      .def(py::init<std::uint64_t>(), py::arg("seed") = 0)
      .def("uniform", [](Rng& r) { return r.uniform(); })
      .def("normal", [](Rng& r) { return r.normal(); })
      .def("spawn", &Rng::spawn, py::arg("stream"));

  // -- scalar truncated normal ---------------------------------------------
  m.def("std_normal_cdf", &std_normal_cdf, py::arg("x"));
  py::class_<TruncNormParams>(m, "TruncNormParams")
      .def(py::init([](double mu, double sigma, double a, double b) {
             TruncNormParams p{mu, sigma, a, b};
             p.validate();
             return p;
           }),
           py::arg("mu"), py::arg("sigma"), py::arg("a"), py::arg("b"))
      .def_readonly("mu", &TruncNormParams::mu)
      .def_readonly("sigma", &TruncNormParams::sigma)
      .def_readonly("a", &TruncNormParams::a)
      .def_readonly("b", &TruncNormParams::b);
  m.def("tn_logpdf", &tn_logpdf, py::arg("x"), py::arg("params"));
  m.def("tn_sample", &tn_sample, py::arg("rng"), py::arg("params"));
  m.def("tn_moment", &tn_moment, py::arg("k"), py::arg("params"));

  // -- partially truncated multivariate normal ------------------------------
  py::class_<PtmvnParams>(m, "PtmvnParams")
      .def(py::init([](const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma,
                       double lower, double upper) {
             PtmvnParams p;
             p.mu = mu;
             p.Sigma = sigma;
             p.lower = lower;
             p.upper = upper;
             p.validate();
             return p;
           }),
           py::arg("mu"), py::arg("sigma"),
           py::arg("lower") = -kInf, py::arg("upper") = kInf)
      .def_readonly("mu", &PtmvnParams::mu)
      .def_readonly("Sigma", &PtmvnParams::Sigma)
      .def_readonly("lower", &PtmvnParams::lower)
      .def_readonly("upper", &PtmvnParams::upper);
  m.def("ptmvn_logpdf", &ptmvn_logpdf, py::arg("r"), py::arg("params"));
  m.def("ptmvn_sample", &ptmvn_sample, py::arg("rng"), py::arg("params"));
  m.def("ptmvn_mean", &ptmvn_mean, py::arg("params"));
  m.def("ptmvn_mgf", &ptmvn_mgf, py::arg("t"), py::arg("params"));
  m.def(
      "cond_b_given_omega",
      [](double omega, const PtmvnParams& p) {
        const ConditionalNormal c = cond_b_given_omega(omega, p);
        return py::make_tuple(c.mean, c.cov);
      },
      py::arg("omega"), py::arg("params"));
  m.def("cond_omega_given_b", &cond_omega_given_b, py::arg("b"),
        py::arg("params"));
  m.def("partial_moment", &partial_moment, py::arg("m"), py::arg("k"),
        py::arg("s"), py::arg("alpha"), py::arg("beta"), py::arg("tn"));

  // -- data and model configuration -----------------------------------------
  py::class_<SubjectRecord>(m, "SubjectRecord")
      .def(py::init<>())
      .def_readwrite("id", &SubjectRecord::id)
      .def_readwrite("x", &SubjectRecord::x)
      .def_readwrite("w", &SubjectRecord::w)
      .def_readwrite("s", &SubjectRecord::s)
      .def_readwrite("y", &SubjectRecord::y)
      .def_readwrite("t_obs", &SubjectRecord::t_obs)
      .def_readwrite("event", &SubjectRecord::event)
      .def("validate", [](const SubjectRecord& r) { r.validate(); });

  py::class_<ModelParams>(m, "ModelParams")
      .def(py::init<>())
      .def_readwrite("gamma", &ModelParams::gamma)
      .def_readwrite("eta", &ModelParams::eta)
      .def_readwrite("alpha", &ModelParams::alpha)
      .def_readwrite("beta", &ModelParams::beta)
      .def_readwrite("sigma_y", &ModelParams::sigma_y)
      .def_readwrite("mu_omega", &ModelParams::mu_omega)
      .def_property(
          "mu_b", [](const ModelParams& p) { return Eigen::VectorXd(p.mu_b); },
          [](ModelParams& p, const Eigen::VectorXd& v) { p.mu_b = v; })
      .def_property(
          "sd_r", [](const ModelParams& p) { return Eigen::VectorXd(p.sd_r); },
          [](ModelParams& p, const Eigen::VectorXd& v) { p.sd_r = v; })
      .def_property(
          "corr",
          [](const ModelParams& p) { return Eigen::MatrixXd(p.Gamma_r); },
          [](ModelParams& p, const Eigen::MatrixXd& v) { p.Gamma_r = v; });

  py::class_<PriorConfig>(m, "PriorConfig").def(py::init<>());

  py::class_<SamplerConfig>(m, "SamplerConfig")
      .def(py::init<>())
      .def_readwrite("chains", &SamplerConfig::chains)
      .def_readwrite("warmup", &SamplerConfig::warmup)
      .def_readwrite("samples", &SamplerConfig::samples)
      .def_readwrite("seed", &SamplerConfig::seed)
      .def_readwrite("target_accept", &SamplerConfig::target_accept)
      .def_readwrite("max_tree_depth", &SamplerConfig::max_tree_depth)
      .def_readwrite("retain_latent", &SamplerConfig::retain_latent);

  py::class_<SimScenario>(m, "SimScenario")
      .def(py::init<>())
      .def_readwrite("n", &SimScenario::n)
      .def_readwrite("target_censoring", &SimScenario::target_censoring)
      .def_readwrite("truth", &SimScenario::truth)
      .def_readwrite("replications", &SimScenario::replications)
      .def_readwrite("seed", &SimScenario::seed)
      .def_static("default_truth", &SimScenario::default_truth);

  py::class_<ChainDiagnostics>(m, "ChainDiagnostics")
      .def_readonly("divergences", &ChainDiagnostics::divergences)
      .def_readonly("step_size", &ChainDiagnostics::step_size)
      .def_readonly("mean_accept", &ChainDiagnostics::mean_accept)
      .def_readonly("max_depth_hits", &ChainDiagnostics::max_depth_hits);

  py::class_<PosteriorDraws>(m, "PosteriorDraws")
      .def_readonly("names", &PosteriorDraws::names)
      .def_readonly("diagnostics", &PosteriorDraws::diagnostics)
      .def_property_readonly("num_chains", &PosteriorDraws::num_chains)
      .def_property_readonly("num_samples", &PosteriorDraws::num_samples)
      .def("chain", [](const PosteriorDraws& d, int c) { return d.chains.at(c); })
      .def("pooled", &PosteriorDraws::pooled, py::arg("name"));

  m.def("rhat", &rhat, py::arg("draws"), py::arg("name"));
  m.def("ess", &ess, py::arg("draws"), py::arg("name"));

  // -- simulation and fitting ------------------------------------------------
  m.def("generate_dataset", &generate_dataset, py::arg("scenario"),
        py::arg("censor_rate"), py::arg("rng"));
  m.def("tune_censoring_rate", &tune_censoring_rate, py::arg("scenario"),
        py::arg("target"), py::arg("rng"));
  m.def(
      "fit_joint",
      [](const std::vector<SubjectRecord>& data, const PriorConfig& priors,
         const SamplerConfig& cfg, std::uint64_t seed) {
        Rng rng(seed);
        py::gil_scoped_release release;
        return fit_joint(data, priors, cfg, rng);
      },
      py::arg("data"), py::arg("priors") = PriorConfig{},
      py::arg("config") = SamplerConfig{}, py::arg("seed") = 1);
  m.def(
      "fit_longitudinal_only",
      [](const std::vector<SubjectRecord>& data, const PriorConfig& priors,
         const SamplerConfig& cfg, std::uint64_t seed) {
        Rng rng(seed);
        py::gil_scoped_release release;
        return fit_longitudinal_only(data, priors, cfg, rng);
      },
      py::arg("data"), py::arg("priors") = PriorConfig{},
      py::arg("config") = SamplerConfig{}, py::arg("seed") = 1);

  // -- marginal moments -------------------------------------------------------
  m.def(
      "expected_Z",
      [](const Eigen::VectorXd& s, const TruncNormParams& tn) {
        const ExpectedZ ez = expected_Z(s, tn);
        return py::make_tuple(ez.ez, ez.ewz);
      },
      py::arg("s"), py::arg("tn"));
  m.def("marginal_mean_y", &marginal_mean_y, py::arg("x"), py::arg("s"),
        py::arg("beta"), py::arg("ranef"));
  m.def(
      "marginal_cov_y_mc",
      [](const Eigen::MatrixXd& x, const Eigen::VectorXd& s,
         const PtmvnParams& ranef, double sigma_y, long draws,
         std::uint64_t seed, bool include_mean_variation) {
        Rng rng(seed);
        return marginal_cov_y_mc(x, s, ranef, sigma_y, draws, rng,
                                 include_mean_variation);
      },
      py::arg("x"), py::arg("s"), py::arg("ranef"), py::arg("sigma_y"),
      py::arg("draws"), py::arg("seed") = 1,
      py::arg("include_mean_variation") = true);
  m.def("population_mean_changepoint", &population_mean_changepoint,
        py::arg("mu_omega"), py::arg("sigma_omega"), py::arg("gamma"),
        py::arg("eta"), py::arg("alpha"), py::arg("w"));
}
