#include "cpjm/sampler.hpp"

#include "cpjm/truncnorm.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

namespace cpjm {

void SamplerConfig::validate() const {
  if (chains < 1) throw std::invalid_argument("SamplerConfig: chains >= 1");
  if (samples < 1) throw std::invalid_argument("SamplerConfig: samples >= 1");
  if (adapt && warmup < 100) {
    throw std::invalid_argument(
        "SamplerConfig: warmup >= 100 required when adaptation is enabled");
  }
  if (warmup < 0) throw std::invalid_argument("SamplerConfig: warmup >= 0");
  if (!(target_accept > 0.0 && target_accept < 1.0)) {
    throw std::invalid_argument("SamplerConfig: target_accept in (0,1)");
  }
  if (max_tree_depth < 1 || max_tree_depth > 14) {
    throw std::invalid_argument("SamplerConfig: max_tree_depth in [1,14]");
  }
}

int PosteriorDraws::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return static_cast<int>(i);
  }
  throw std::invalid_argument("unknown parameter name: " + name);
}

Eigen::VectorXd PosteriorDraws::chain_column(int chain,
                                             const std::string& name) const {
  return chains.at(chain).col(index_of(name));
}

Eigen::VectorXd PosteriorDraws::pooled(const std::string& name) const {
  const int col = index_of(name);
  Eigen::VectorXd out(num_chains() * num_samples());
  int at = 0;
  for (const auto& c : chains) {
    out.segment(at, c.rows()) = c.col(col);
    at += static_cast<int>(c.rows());
  }
  return out;
}

namespace {

constexpr double kEnergyDivergence = 1000.0;

// Dual-averaging step-size adaptation (Hoffman & Gelman 2014, Algorithm 6
// constants).
class DualAverage {
 public:
  void restart(double eps0, double delta) {
    delta_ = delta;
    mu_ = std::log(10.0 * eps0);
    log_eps_ = std::log(eps0);
    log_eps_bar_ = 0.0;
    h_bar_ = 0.0;
    m_ = 1.0;
  }
  void update(double accept) {
    const double w = 1.0 / (m_ + 10.0);
    h_bar_ = (1.0 - w) * h_bar_ + w * (delta_ - accept);
    log_eps_ = mu_ - std::sqrt(m_) / 0.05 * h_bar_;
    const double w2 = std::pow(m_, -0.75);
    log_eps_bar_ = w2 * log_eps_ + (1.0 - w2) * log_eps_bar_;
    m_ += 1.0;
  }
  double eps() const { return std::exp(log_eps_); }
  double eps_bar() const { return std::exp(log_eps_bar_); }

 private:
  double delta_ = 0.8, mu_ = 0.0, log_eps_ = 0.0, log_eps_bar_ = 0.0;
  double h_bar_ = 0.0, m_ = 1.0;
};

// Stan-style warmup schedule: fast start, doubling slow windows for metric
// estimation, fast tail for step-size polishing.
struct WarmupSchedule {
  int init_buffer = 75, term_buffer = 50, base_window = 25;
  int warmup = 0;

  explicit WarmupSchedule(int w) : warmup(w) {
    if (warmup < init_buffer + term_buffer + base_window) {
      init_buffer = static_cast<int>(0.15 * warmup);
      term_buffer = static_cast<int>(0.10 * warmup);
      base_window = std::max(1, warmup - init_buffer - term_buffer);
    }
  }
  bool in_slow(int iter) const {
    return iter >= init_buffer && iter < warmup - term_buffer;
  }
  // End of the metric window containing iter (slow phase only).
  bool window_ends(int iter) const {
    if (!in_slow(iter)) return false;
    int start = init_buffer, size = base_window;
    for (;;) {
      int end = start + size;
      if (end + 2 * size > warmup - term_buffer) end = warmup - term_buffer;
      if (iter == end - 1) return true;
      if (iter < end) return false;
      start = end;
      size *= 2;
    }
  }
};

struct Running {  // Welford accumulator for the diagonal metric
  Eigen::VectorXd mean, m2;
  long n = 0;
  void reset(int dim) {
    mean = Eigen::VectorXd::Zero(dim);
    m2 = Eigen::VectorXd::Zero(dim);
    n = 0;
  }
  void add(const Eigen::VectorXd& x) {
    ++n;
    const Eigen::VectorXd d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d.cwiseProduct(x - mean);
  }
  Eigen::VectorXd regularized_var() const {
    const double nn = static_cast<double>(n);
    Eigen::VectorXd v = m2 / std::max(1.0, nn - 1.0);
    v = (nn / (nn + 5.0)) * v;
    v.array() += 1e-3 * (5.0 / (nn + 5.0));
    return v;
  }
};

class NutsChain {
 public:
  NutsChain(const LogDensity& target, int dim, const SamplerConfig& cfg,
            Rng rng)
      : f_(target), dim_(dim), cfg_(cfg), rng_(rng) {
    inv_metric_ = Eigen::VectorXd::Ones(dim);
  }

  // Runs warmup + sampling from the given start; fills draws (unconstrained)
  // and diagnostics.
  void run(const Eigen::VectorXd& init, Eigen::MatrixXd* draws,
           ChainDiagnostics* diag) {
    q_ = init;
    grad_.resize(dim_);
    lp_ = eval(q_, &grad_);
    if (!std::isfinite(lp_)) {
      throw SamplerError("chain started at a non-finite log density");
    }
    eps_ = cfg_.adapt ? find_initial_step() : 0.1;
    DualAverage da;
    da.restart(eps_, cfg_.target_accept);
    WarmupSchedule sched(cfg_.warmup);
    Running window;
    window.reset(dim_);

    for (int it = 0; it < cfg_.warmup; ++it) {
      transition();
      if (cfg_.adapt) {
        da.update(last_accept_);
        eps_ = da.eps();
        if (sched.in_slow(it)) {
          window.add(q_);
          if (sched.window_ends(it)) {
            inv_metric_ = window.regularized_var();
            window.reset(dim_);
            eps_ = find_initial_step();
            da.restart(eps_, cfg_.target_accept);
          }
        }
      }
    }
    if (cfg_.adapt && cfg_.warmup > 0) eps_ = da.eps_bar();

    diag->divergences = 0;
    diag->max_depth_hits = 0;
    double accept_sum = 0.0;
    for (int it = 0; it < cfg_.samples; ++it) {
      transition();
      if (divergent_) ++diag->divergences;
      if (hit_max_depth_) ++diag->max_depth_hits;
      accept_sum += last_accept_;
      draws->row(it) = q_.transpose();
    }
    diag->step_size = eps_;
    diag->mean_accept = accept_sum / cfg_.samples;
  }

 private:
  struct State {
    Eigen::VectorXd q, p, grad;
    double lp = 0.0, h = 0.0;
  };

  double eval(const Eigen::VectorXd& q, Eigen::VectorXd* grad) {
    try {
      return f_(q, grad);
    } catch (const NonFiniteLogpost&) {
      return -kInf;
    }
  }

  double kinetic(const Eigen::VectorXd& p) const {
    return 0.5 * p.dot(inv_metric_.cwiseProduct(p));
  }

  Eigen::VectorXd sample_momentum() {
    Eigen::VectorXd p(dim_);
    for (int i = 0; i < dim_; ++i) {
      p(i) = rng_.normal() / std::sqrt(inv_metric_(i));
    }
    return p;
  }

  // One leapfrog step; returns false when the new point has non-finite
  // density or energy.
  bool leapfrog(State* s, double direction) {
    const double e = direction * eps_;
    s->p += 0.5 * e * s->grad;
    s->q += e * inv_metric_.cwiseProduct(s->p);
    s->lp = eval(s->q, &s->grad);
    if (!std::isfinite(s->lp) || !s->grad.allFinite()) return false;
    s->p += 0.5 * e * s->grad;
    s->h = -s->lp + kinetic(s->p);
    return std::isfinite(s->h);
  }

  static bool uturn(const Eigen::VectorXd& q_plus, const Eigen::VectorXd& q_minus,
                    const Eigen::VectorXd& v_plus, const Eigen::VectorXd& v_minus) {
    const Eigen::VectorXd dq = q_plus - q_minus;
    return dq.dot(v_minus) < 0.0 || dq.dot(v_plus) < 0.0;
  }

  struct Tree {
    State minus, plus;  // trajectory endpoints
    Eigen::VectorXd q_sample, grad_sample;
    double lp_sample = 0.0;
    double log_weight = -kInf;
    bool ok = false;  // false on divergence or internal U-turn
  };

  // Builds a subtree of 2^depth leapfrog steps from the given endpoint.
  Tree build_tree(const State& from, double direction, int depth, double h0) {
    Tree t;
    if (depth == 0) {
      State s = from;
      if (!leapfrog(&s, direction)) {
        divergent_ = true;
        ++n_steps_;
        return t;
      }
      ++n_steps_;
      const double de = s.h - h0;
      if (de > kEnergyDivergence) {
        divergent_ = true;
        return t;
      }
      sum_accept_ += std::min(1.0, std::exp(-de));
      t.minus = s;
      t.plus = s;
      t.q_sample = s.q;
      t.grad_sample = s.grad;
      t.lp_sample = s.lp;
      t.log_weight = -de;
      t.ok = true;
      return t;
    }
    Tree first = build_tree(from, direction, depth - 1, h0);
    if (!first.ok) return first;
    Tree second =
        build_tree(direction > 0 ? first.plus : first.minus, direction,
                   depth - 1, h0);
    if (!second.ok) return second;

    Tree merged;
    merged.minus = direction > 0 ? std::move(first.minus) : std::move(second.minus);
    merged.plus = direction > 0 ? std::move(second.plus) : std::move(first.plus);
    merged.log_weight = log_sum_exp(first.log_weight, second.log_weight);
    // Multinomial selection between the two halves.
    const double p_second = std::exp(second.log_weight - merged.log_weight);
    Tree& sel = rng_.uniform() < p_second ? second : first;
    merged.q_sample = std::move(sel.q_sample);
    merged.grad_sample = std::move(sel.grad_sample);
    merged.lp_sample = sel.lp_sample;
    merged.ok = !uturn(merged.plus.q, merged.minus.q,
                       inv_metric_.cwiseProduct(merged.plus.p),
                       inv_metric_.cwiseProduct(merged.minus.p));
    return merged;
  }

  static double log_sum_exp(double a, double b) {
    const double m = std::max(a, b);
    if (m == -kInf) return -kInf;
    return m + std::log(std::exp(a - m) + std::exp(b - m));
  }

  void transition() {
    divergent_ = false;
    hit_max_depth_ = false;
    sum_accept_ = 0.0;
    n_steps_ = 0;
    if (!cfg_.nuts) {
      static_transition();
      return;
    }
    State init{q_, sample_momentum(), grad_, lp_, 0.0};
    init.h = -lp_ + kinetic(init.p);
    const double h0 = init.h;

    State minus = init, plus = init;
    Eigen::VectorXd q_sel = q_;
    double lp_sel = lp_;
    Eigen::VectorXd grad_sel = grad_;
    double log_weight = 0.0;  // weight of the initial point: exp(h0 - h) = 1

    for (int depth = 0; depth < cfg_.max_tree_depth; ++depth) {
      const double direction = rng_.uniform() < 0.5 ? -1.0 : 1.0;
      Tree sub = build_tree(direction > 0 ? plus : minus, direction, depth, h0);
      if (!sub.ok) break;
      // Biased progressive sampling favours the new subtree.
      if (std::log(rng_.uniform()) < sub.log_weight - log_weight) {
        q_sel = std::move(sub.q_sample);
        lp_sel = sub.lp_sample;
        grad_sel = std::move(sub.grad_sample);
      }
      log_weight = log_sum_exp(log_weight, sub.log_weight);
      if (direction > 0) {
        plus = std::move(sub.plus);
      } else {
        minus = std::move(sub.minus);
      }
      if (uturn(plus.q, minus.q, inv_metric_.cwiseProduct(plus.p),
                inv_metric_.cwiseProduct(minus.p))) {
        break;
      }
      if (depth == cfg_.max_tree_depth - 1) hit_max_depth_ = true;
    }
    q_ = std::move(q_sel);
    lp_ = lp_sel;
    grad_ = std::move(grad_sel);
    last_accept_ = n_steps_ > 0 ? sum_accept_ / n_steps_ : 0.0;
  }

  void static_transition() {
    State s{q_, sample_momentum(), grad_, lp_, 0.0};
    s.h = -lp_ + kinetic(s.p);
    const double h0 = s.h;
    bool bad = false;
    // Uniformly jittered path length; a fixed length resonates on near-
    // quadratic targets.
    const int steps =
        1 + static_cast<int>(rng_.uniform() * cfg_.static_steps);
    for (int i = 0; i < steps; ++i) {
      if (!leapfrog(&s, 1.0)) {
        bad = true;
        break;
      }
      ++n_steps_;
    }
    const double de = bad ? kInf : s.h - h0;
    if (de > kEnergyDivergence) divergent_ = true;
    const double accept = bad ? 0.0 : std::min(1.0, std::exp(-de));
    if (!bad && rng_.uniform() < accept) {
      q_ = s.q;
      lp_ = s.lp;
      grad_ = s.grad;
    }
    last_accept_ = accept;
    sum_accept_ = accept;
  }

  // Doubles/halves the step until one leapfrog step crosses 50% acceptance
  // (Hoffman & Gelman, Algorithm 4).
  double find_initial_step() {
    double eps = 1.0;
    const double saved = eps_;
    for (int k = 0; k < 60; ++k) {
      eps_ = eps;
      State s{q_, sample_momentum(), grad_, lp_, 0.0};
      s.h = -lp_ + kinetic(s.p);
      const double h0 = s.h;
      double log_ratio = -kInf;
      if (leapfrog(&s, 1.0)) log_ratio = h0 - s.h;
      if (k == 0) {
        dir_ = log_ratio > std::log(0.5) ? 1 : -1;
      }
      if (dir_ == 1 && !(log_ratio > std::log(0.5))) break;
      if (dir_ == -1 && !(log_ratio < std::log(0.5))) break;
      eps *= dir_ == 1 ? 2.0 : 0.5;
      if (eps > 1e7 || eps < 1e-10) break;
    }
    eps_ = saved;
    return eps;
  }

  const LogDensity& f_;
  int dim_;
  SamplerConfig cfg_;
  Rng rng_;
  Eigen::VectorXd inv_metric_;
  Eigen::VectorXd q_, grad_;
  double lp_ = 0.0;
  double eps_ = 0.1;
  int dir_ = 1;
  bool divergent_ = false, hit_max_depth_ = false;
  double sum_accept_ = 0.0, last_accept_ = 0.0;
  long n_steps_ = 0;
};

}  // namespace

PosteriorDraws sample(
    const LogDensity& target, const Eigen::VectorXd& init,
    const std::vector<std::string>& names,
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& constrain,
    const SamplerConfig& cfg) {
  cfg.validate();
  const int dim = static_cast<int>(init.size());
  {
    const double lp0 = target(init, nullptr);
    if (!std::isfinite(lp0)) {
      throw SamplerError("sample: log density not finite at the initial point");
    }
  }
  const Rng base(cfg.seed);

  PosteriorDraws out;
  out.names = names.empty() ? std::vector<std::string>{} : names;
  if (out.names.empty()) {
    for (int i = 0; i < dim; ++i) out.names.push_back("x" + std::to_string(i));
  }
  out.chains.resize(cfg.chains);
  out.diagnostics.resize(cfg.chains);
  std::vector<std::string> errors(cfg.chains);

  auto run_chain = [&](int c) {
    try {
      Rng rng = base.spawn(c);
      Eigen::VectorXd start = init;
      if (c > 0) {
        for (int attempt = 0; attempt < 100; ++attempt) {
          for (int i = 0; i < dim; ++i) start(i) = init(i) + 0.5 * rng.normal();
          if (std::isfinite(target(start, nullptr))) break;
          if (attempt == 99) {
            throw SamplerError("sample: could not jitter a finite start");
          }
        }
      }
      Eigen::MatrixXd draws(cfg.samples, dim);
      NutsChain chain(target, dim, cfg, rng);
      chain.run(start, &draws, &out.diagnostics[c]);
      // Constrain after the fact; identity when no map is given.
      if (constrain) {
        Eigen::MatrixXd cd(cfg.samples, constrain(init).size());
        for (int i = 0; i < cfg.samples; ++i) {
          cd.row(i) = constrain(draws.row(i).transpose()).transpose();
        }
        out.chains[c] = std::move(cd);
      } else {
        out.chains[c] = std::move(draws);
      }
      if (!out.chains[c].allFinite()) {
        throw SamplerError("produced non-finite draws");
      }
    } catch (const std::exception& e) {
      errors[c] = e.what();
    }
  };

  if (cfg.chains == 1) {
    run_chain(0);
  } else {
    std::vector<std::thread> workers;
    workers.reserve(cfg.chains);
    for (int c = 0; c < cfg.chains; ++c) workers.emplace_back(run_chain, c);
    for (auto& w : workers) w.join();
  }
  for (int c = 0; c < cfg.chains; ++c) {
    if (!errors[c].empty()) {
      throw SamplerError("chain " + std::to_string(c) + ": " + errors[c]);
    }
  }
  if (static_cast<int>(out.names.size()) != out.chains.front().cols()) {
    throw SamplerError("sample: name list does not match value dimension");
  }
  return out;
}

}  // namespace cpjm
