#include "moodminer/hmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "moodminer/errors.hpp"
#include "moodminer/util.hpp"

namespace moodminer::hmm {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kRespFloor = 1e-8;
}  // namespace

double Gaussian::logpdf(double x) const {
  double d = x - mean;
  return -0.5 * (std::log(2.0 * M_PI * var) + d * d / var);
}

TransformedObs transform(const ObservationVector& o) {
  TransformedObs t;
  t.perf = o.performance >= 0.5 ? 1.0 : 0.0;
  t.challenge_logit = logit(o.challenge);
  t.endurance_log = std::log1p(std::max(0.0, o.endurance_min));
  if (o.gap_hours) {
    t.gap_missing = false;
    t.gap_log = std::log1p(std::max(0.0, *o.gap_hours));
  }
  return t;
}

std::vector<TransformedObs> transform(const std::vector<ObservationVector>& seq) {
  std::vector<TransformedObs> out;
  out.reserve(seq.size());
  for (const auto& o : seq) out.push_back(transform(o));
  return out;
}

void HmmModel::validate() const {
  if (K <= 0) throw SchemaMismatch("state count must be positive");
  if (static_cast<int>(pi.size()) != K ||
      static_cast<int>(A.size()) != K ||
      static_cast<int>(emissions.size()) != K)
    throw SchemaMismatch("model arrays inconsistent with K");
  double psum = 0.0;
  for (double p : pi) {
    if (!(p >= 0.0)) throw SchemaMismatch("negative initial probability");
    psum += p;
  }
  if (std::abs(psum - 1.0) > 1e-9)
    throw SchemaMismatch("initial distribution does not sum to 1");
  for (const auto& row : A) {
    if (static_cast<int>(row.size()) != K)
      throw SchemaMismatch("transition row size mismatch");
    double rsum = 0.0;
    for (double a : row) {
      if (!(a >= 0.0)) throw SchemaMismatch("negative transition probability");
      rsum += a;
    }
    if (std::abs(rsum - 1.0) > 1e-9)
      throw SchemaMismatch("transition row does not sum to 1");
  }
  for (const auto& e : emissions) {
    if (!(e.challenge.var >= kVarFloor) || !(e.endurance.var >= kVarFloor) ||
        !(e.gap.var >= kVarFloor))
      throw SchemaMismatch("emission variance below floor");
    if (!(e.p_accept > 0.0 && e.p_accept < 1.0))
      throw SchemaMismatch("p_accept outside (0,1)");
    if (!(e.missing_rate >= 0.0 && e.missing_rate <= 1.0))
      throw SchemaMismatch("missing_rate outside [0,1]");
  }
}

double emission_logprob(const EmissionParams& state, const TransformedObs& obs) {
  double p = clamp_prob(state.p_accept);
  double lp = obs.perf >= 0.5 ? std::log(p) : std::log1p(-p);
  lp += state.challenge.logpdf(obs.challenge_logit);
  lp += state.endurance.logpdf(obs.endurance_log);
  double mr = clamp_prob(state.missing_rate);
  if (obs.gap_missing)
    lp += std::log(mr);
  else
    lp += std::log1p(-mr) + state.gap.logpdf(obs.gap_log);
  return lp;
}

namespace {

// Scaled forward pass. Returns per-step normalized alphas and the exact
// log-likelihood; the normalizer of step t is accumulated through log-sum-exp
// so emissions as small as exp(-700) stay finite.
double scaled_forward(const HmmModel& m, const std::vector<std::vector<double>>& logB,
                      std::vector<std::vector<double>>& alpha) {
  const int K = m.K;
  const std::size_t T = logB.size();
  alpha.assign(T, std::vector<double>(K, 0.0));
  std::vector<double> work(K);
  double ll = 0.0;

  for (int k = 0; k < K; ++k)
    work[k] = (m.pi[k] > 0.0 ? std::log(m.pi[k]) : kNegInf) + logB[0][k];
  double c = logsumexp(work.data(), K);
  if (!std::isfinite(c)) throw NumericError("sequence impossible under model");
  for (int k = 0; k < K; ++k) alpha[0][k] = std::exp(work[k] - c);
  ll += c;

  for (std::size_t t = 1; t < T; ++t) {
    for (int j = 0; j < K; ++j) {
      double pred = 0.0;
      for (int i = 0; i < K; ++i) pred += alpha[t - 1][i] * m.A[i][j];
      work[j] = (pred > 0.0 ? std::log(pred) : kNegInf) + logB[t][j];
    }
    c = logsumexp(work.data(), K);
    if (!std::isfinite(c)) throw NumericError("sequence impossible under model");
    for (int k = 0; k < K; ++k) alpha[t][k] = std::exp(work[k] - c);
    ll += c;
  }
  return ll;
}

std::vector<std::vector<double>> emission_log_matrix(const HmmModel& m,
                                                     const ObsSequence& seq) {
  std::vector<std::vector<double>> logB(seq.size(), std::vector<double>(m.K));
  for (std::size_t t = 0; t < seq.size(); ++t)
    for (int k = 0; k < m.K; ++k)
      logB[t][k] = emission_logprob(m.emissions[k], seq[t]);
  return logB;
}

// Sufficient statistics of one E-step.
struct SuffStats {
  int K = 0;
  std::vector<double> gamma0;
  std::vector<std::vector<double>> trans;
  std::vector<double> w, perf, ch, ch2, en, en2, gw, gp, gp2, miss;
  double ll = 0.0;

  explicit SuffStats(int k)
      : K(k), gamma0(k, 0.0), trans(k, std::vector<double>(k, 0.0)), w(k, 0.0),
        perf(k, 0.0), ch(k, 0.0), ch2(k, 0.0), en(k, 0.0), en2(k, 0.0), gw(k, 0.0),
        gp(k, 0.0), gp2(k, 0.0), miss(k, 0.0) {}

  void add(const SuffStats& o) {
    for (int k = 0; k < K; ++k) {
      gamma0[k] += o.gamma0[k];
      w[k] += o.w[k];
      perf[k] += o.perf[k];
      ch[k] += o.ch[k];
      ch2[k] += o.ch2[k];
      en[k] += o.en[k];
      en2[k] += o.en2[k];
      gw[k] += o.gw[k];
      gp[k] += o.gp[k];
      gp2[k] += o.gp2[k];
      miss[k] += o.miss[k];
      for (int j = 0; j < K; ++j) trans[k][j] += o.trans[k][j];
    }
  }
};

// One sequence's E-step contribution, streamed through a backward pass so
// the full xi tensor never materializes.
void accumulate_estep(const HmmModel& m, const ObsSequence& seq, SuffStats& s) {
  const int K = m.K;
  const std::size_t T = seq.size();
  auto logB = emission_log_matrix(m, seq);
  std::vector<std::vector<double>> alpha;
  s.ll = scaled_forward(m, logB, alpha);

  std::vector<double> beta(K, 1.0), beta_next(K), ebar(K), gamma(K);
  for (std::size_t ti = T; ti-- > 0;) {
    // gamma at step ti
    double gsum = 0.0;
    for (int k = 0; k < K; ++k) {
      gamma[k] = alpha[ti][k] * beta[k];
      gsum += gamma[k];
    }
    for (int k = 0; k < K; ++k) gamma[k] /= gsum;

    const TransformedObs& o = seq[ti];
    for (int k = 0; k < K; ++k) {
      double g = gamma[k];
      s.w[k] += g;
      s.perf[k] += g * o.perf;
      s.ch[k] += g * o.challenge_logit;
      s.ch2[k] += g * o.challenge_logit * o.challenge_logit;
      s.en[k] += g * o.endurance_log;
      s.en2[k] += g * o.endurance_log * o.endurance_log;
      if (o.gap_missing) {
        s.miss[k] += g;
      } else {
        s.gw[k] += g;
        s.gp[k] += g * o.gap_log;
        s.gp2[k] += g * o.gap_log * o.gap_log;
      }
    }
    if (ti == 0) {
      for (int k = 0; k < K; ++k) s.gamma0[k] += gamma[k];
      break;
    }

    // xi between ti-1 and ti, then roll beta back one step.
    double mB = kNegInf;
    for (int k = 0; k < K; ++k) mB = std::max(mB, logB[ti][k]);
    for (int k = 0; k < K; ++k) ebar[k] = std::exp(logB[ti][k] - mB);

    double xsum = 0.0;
    for (int i = 0; i < K; ++i)
      for (int j = 0; j < K; ++j)
        xsum += alpha[ti - 1][i] * m.A[i][j] * ebar[j] * beta[j];
    for (int i = 0; i < K; ++i) {
      double bsum = 0.0;
      for (int j = 0; j < K; ++j) {
        double x = alpha[ti - 1][i] * m.A[i][j] * ebar[j] * beta[j];
        s.trans[i][j] += x / xsum;
        bsum += m.A[i][j] * ebar[j] * beta[j];
      }
      beta_next[i] = bsum;
    }
    double bnorm = std::accumulate(beta_next.begin(), beta_next.end(), 0.0);
    for (int i = 0; i < K; ++i) beta[i] = beta_next[i] / bnorm;
  }
}

double kahan_total(const std::vector<SuffStats>& stats) {
  double sum = 0.0, comp = 0.0;
  for (const auto& s : stats) {
    double y = s.ll - comp;
    double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
  return sum;
}

void reinit_state(HmmModel& m, int k, const std::vector<ObsSequence>& data,
                  std::uint64_t seed);

}  // namespace

ForwardBackwardResult forward_backward(const HmmModel& model,
                                       const ObsSequence& seq) {
  const int K = model.K;
  const std::size_t T = seq.size();
  auto logB = emission_log_matrix(model, seq);
  ForwardBackwardResult res;
  std::vector<std::vector<double>> alpha;
  res.log_likelihood = scaled_forward(model, logB, alpha);

  // Scaled backward; scale factors cancel in the normalized posteriors.
  std::vector<std::vector<double>> beta(T, std::vector<double>(K, 1.0));
  std::vector<double> ebar(K);
  for (std::size_t ti = T - 1; ti-- > 0;) {
    double mB = kNegInf;
    for (int k = 0; k < K; ++k) mB = std::max(mB, logB[ti + 1][k]);
    for (int k = 0; k < K; ++k) ebar[k] = std::exp(logB[ti + 1][k] - mB);
    double bnorm = 0.0;
    for (int i = 0; i < K; ++i) {
      double b = 0.0;
      for (int j = 0; j < K; ++j) b += model.A[i][j] * ebar[j] * beta[ti + 1][j];
      beta[ti][i] = b;
      bnorm += b;
    }
    for (int i = 0; i < K; ++i) beta[ti][i] /= bnorm;
  }

  res.gamma.assign(T, std::vector<double>(K, 0.0));
  for (std::size_t t = 0; t < T; ++t) {
    double gsum = 0.0;
    for (int k = 0; k < K; ++k) {
      res.gamma[t][k] = alpha[t][k] * beta[t][k];
      gsum += res.gamma[t][k];
    }
    for (int k = 0; k < K; ++k) res.gamma[t][k] /= gsum;
  }

  if (T > 1) {
    res.xi.assign(T - 1, std::vector<std::vector<double>>(
                             K, std::vector<double>(K, 0.0)));
    for (std::size_t t = 0; t + 1 < T; ++t) {
      double mB = kNegInf;
      for (int k = 0; k < K; ++k) mB = std::max(mB, logB[t + 1][k]);
      for (int k = 0; k < K; ++k) ebar[k] = std::exp(logB[t + 1][k] - mB);
      double xsum = 0.0;
      for (int i = 0; i < K; ++i)
        for (int j = 0; j < K; ++j) {
          double x = alpha[t][i] * model.A[i][j] * ebar[j] * beta[t + 1][j];
          res.xi[t][i][j] = x;
          xsum += x;
        }
      for (int i = 0; i < K; ++i)
        for (int j = 0; j < K; ++j) res.xi[t][i][j] /= xsum;
    }
  }
  return res;
}

double sequence_log_likelihood(const HmmModel& model, const ObsSequence& seq) {
  auto logB = emission_log_matrix(model, seq);
  std::vector<std::vector<double>> alpha;
  return scaled_forward(model, logB, alpha);
}

namespace {

void m_step(HmmModel& m, const SuffStats& total, std::size_t n_seq) {
  const int K = m.K;
  double pisum = 0.0;
  for (int k = 0; k < K; ++k) pisum += total.gamma0[k];
  for (int k = 0; k < K; ++k) m.pi[k] = total.gamma0[k] / pisum;

  for (int i = 0; i < K; ++i) {
    double rsum = 0.0;
    for (int j = 0; j < K; ++j) rsum += total.trans[i][j];
    if (rsum > 0.0) {
      for (int j = 0; j < K; ++j) m.A[i][j] = total.trans[i][j] / rsum;
    } else {
      for (int j = 0; j < K; ++j) m.A[i][j] = 1.0 / K;
    }
  }

  for (int k = 0; k < K; ++k) {
    EmissionParams& e = m.emissions[k];
    double w = total.w[k];
    e.p_accept = clamp_prob(total.perf[k] / w);
    e.challenge.mean = total.ch[k] / w;
    e.challenge.var =
        std::max(kVarFloor, total.ch2[k] / w - e.challenge.mean * e.challenge.mean);
    e.endurance.mean = total.en[k] / w;
    e.endurance.var =
        std::max(kVarFloor, total.en2[k] / w - e.endurance.mean * e.endurance.mean);
    if (total.gw[k] > 1e-12) {
      e.gap.mean = total.gp[k] / total.gw[k];
      e.gap.var = std::max(kVarFloor,
                           total.gp2[k] / total.gw[k] - e.gap.mean * e.gap.mean);
    }
    e.missing_rate = clamp_prob(total.miss[k] / w);
  }
  (void)n_seq;
}

void reinit_state(HmmModel& m, int k, const std::vector<ObsSequence>& data,
                  std::uint64_t seed) {
  Rng rng(seed);
  std::exponential_distribution<double> expo(1.0);
  double w = 0, pf = 0, ch = 0, ch2 = 0, en = 0, en2 = 0;
  double gw = 0, gp = 0, gp2 = 0, miss = 0;
  for (const auto& seq : data)
    for (const auto& o : seq) {
      double g = expo(rng);
      w += g;
      pf += g * o.perf;
      ch += g * o.challenge_logit;
      ch2 += g * o.challenge_logit * o.challenge_logit;
      en += g * o.endurance_log;
      en2 += g * o.endurance_log * o.endurance_log;
      if (o.gap_missing) {
        miss += g;
      } else {
        gw += g;
        gp += g * o.gap_log;
        gp2 += g * o.gap_log * o.gap_log;
      }
    }
  EmissionParams& e = m.emissions[k];
  e.p_accept = clamp_prob(pf / w);
  e.challenge = {ch / w, std::max(kVarFloor, ch2 / w - (ch / w) * (ch / w))};
  e.endurance = {en / w, std::max(kVarFloor, en2 / w - (en / w) * (en / w))};
  if (gw > 0)
    e.gap = {gp / gw, std::max(kVarFloor, gp2 / gw - (gp / gw) * (gp / gw))};
  e.missing_rate = clamp_prob(miss / w);
  for (int j = 0; j < m.K; ++j) m.A[k][j] = 1.0 / m.K;
}

}  // namespace

std::pair<HmmModel, FitReport> baum_welch(const HmmModel& init,
                                          const std::vector<ObsSequence>& data,
                                          const FitOptions& opts) {
  if (data.empty()) throw DataError("baum_welch: empty dataset");
  HmmModel model = init;
  const int K = model.K;
  FitReport report;
  report.seed = opts.seed;

  std::vector<SuffStats> slots(data.size(), SuffStats(K));
  bool reinitialized = false;
  double prev_ll = kNegInf;

  auto run_estep = [&]() -> SuffStats {
    auto body = [&](std::size_t i) {
      slots[i] = SuffStats(K);
      accumulate_estep(model, data[i], slots[i]);
    };
    if (opts.parallel)
      parallel_for(data.size(), body);
    else
      for (std::size_t i = 0; i < data.size(); ++i) body(i);
    SuffStats total(K);
    for (const auto& s : slots) total.add(s);
    total.ll = kahan_total(slots);
    return total;
  };

  for (int iter = 1; iter <= opts.max_iter; ++iter) {
    SuffStats total = run_estep();
    report.ll_trace.push_back(total.ll);
    if (iter > 1 && total.ll - prev_ll < opts.tol) {
      report.converged = true;
      break;
    }
    prev_ll = total.ll;

    for (int k = 0; k < K; ++k) {
      if (total.w[k] < kRespFloor) {
        if (reinitialized)
          throw DegenerateState("state " + std::to_string(k) +
                                " lost all responsibility twice");
        reinitialized = true;
        reinit_state(model, k, data,
                     derive_seed(report.seed, "reinit", static_cast<std::uint64_t>(iter)));
        total = run_estep();
      }
    }
    m_step(model, total, data.size());
    report.iterations = iter;
  }

  if (!report.converged) {
    // Record the likelihood of the final parameters.
    SuffStats total = run_estep();
    report.ll_trace.push_back(total.ll);
  }
  report.log_likelihood = report.ll_trace.back();
  return {model, report};
}

HmmModel random_init(int K, const std::vector<ObsSequence>& data,
                     std::uint64_t seed) {
  if (K <= 0) throw ConfigInvalid("state count must be positive");
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::exponential_distribution<double> expo(1.0);

  HmmModel m;
  m.K = K;
  m.pi.assign(K, 1.0 / K);
  m.A.assign(K, std::vector<double>(K, 0.0));
  for (int i = 0; i < K; ++i) {
    double rsum = 0.0;
    for (int j = 0; j < K; ++j) {
      double base = (i == j ? 0.8 : 0.0) + 0.2 / K;
      if (i != j) base *= 1.0 + 0.25 * unit(rng);
      m.A[i][j] = base;
      rsum += base;
    }
    for (int j = 0; j < K; ++j) m.A[i][j] /= rsum;
  }

  m.emissions.assign(K, EmissionParams{});
  for (int k = 0; k < K; ++k) {
    double w = 0, pf = 0, ch = 0, ch2 = 0, en = 0, en2 = 0;
    double gw = 0, gp = 0, gp2 = 0, miss = 0;
    for (const auto& seq : data)
      for (const auto& o : seq) {
        double g = expo(rng);
        w += g;
        pf += g * o.perf;
        ch += g * o.challenge_logit;
        ch2 += g * o.challenge_logit * o.challenge_logit;
        en += g * o.endurance_log;
        en2 += g * o.endurance_log * o.endurance_log;
        if (o.gap_missing) {
          miss += g;
        } else {
          gw += g;
          gp += g * o.gap_log;
          gp2 += g * o.gap_log * o.gap_log;
        }
      }
    EmissionParams& e = m.emissions[k];
    if (w > 0) {
      e.p_accept = clamp_prob(pf / w);
      e.challenge = {ch / w, std::max(kVarFloor, ch2 / w - (ch / w) * (ch / w))};
      e.endurance = {en / w, std::max(kVarFloor, en2 / w - (en / w) * (en / w))};
      if (gw > 0)
        e.gap = {gp / gw, std::max(kVarFloor, gp2 / gw - (gp / gw) * (gp / gw))};
      e.missing_rate = clamp_prob(w > 0 ? miss / w : 0.5);
    }
  }
  return m;
}

std::pair<HmmModel, FitReport> fit_multistart(int K,
                                              const std::vector<ObsSequence>& data,
                                              int n_seeds, std::uint64_t master_seed,
                                              const FitOptions& opts) {
  if (n_seeds < 1) throw ConfigInvalid("n_seeds must be at least 1");
  struct SeedRun {
    bool ok = false;
    HmmModel model;
    FitReport report;
    std::string error;
  };
  std::vector<SeedRun> runs(n_seeds);
  FitOptions inner = opts;
  inner.parallel = false;

  parallel_for(static_cast<std::size_t>(n_seeds), [&](std::size_t s) {
    std::uint64_t seed = derive_seed(master_seed, "hmm-init", s);
    try {
      HmmModel init = random_init(K, data, seed);
      FitOptions run_opts = inner;
      run_opts.seed = seed;
      auto [model, rep] = baum_welch(init, data, run_opts);
      runs[s] = {true, std::move(model), std::move(rep), {}};
    } catch (const std::exception& e) {
      runs[s].error = e.what();
    }
  });

  int best = -1;
  for (int s = 0; s < n_seeds; ++s) {
    if (!runs[s].ok) continue;
    if (best < 0 ||
        runs[s].report.log_likelihood > runs[best].report.log_likelihood)
      best = s;
  }
  if (best < 0)
    throw DegenerateState("all multistart seeds failed: " + runs[0].error);
  return {runs[best].model, runs[best].report};
}

int parameter_count(int K) { return (K - 1) + K * (K - 1) + 8 * K; }

InformationCriteria information_criteria(int K, double total_ll,
                                         std::size_t n_obs) {
  InformationCriteria ic;
  ic.k_params = parameter_count(K);
  ic.aic = 2.0 * ic.k_params - 2.0 * total_ll;
  ic.bic = ic.k_params * std::log(static_cast<double>(n_obs)) - 2.0 * total_ll;
  return ic;
}

SelectionResult model_selection(const std::vector<ObsSequence>& data, int k_min,
                                int k_max, int n_seeds, std::uint64_t master_seed,
                                const FitOptions& opts) {
  if (k_min < 1 || k_max < k_min) throw ConfigInvalid("bad state-count range");
  std::size_t n_obs = 0;
  for (const auto& s : data) n_obs += s.size();

  SelectionResult out;
  for (int K = k_min; K <= k_max; ++K) {
    auto [model, rep] = fit_multistart(
        K, data, n_seeds, derive_seed(master_seed, "select-k", K), opts);
    auto ic = information_criteria(K, rep.log_likelihood, n_obs);
    out.table.push_back(
        {K, rep.seed, rep.log_likelihood, ic.k_params, ic.aic, ic.bic});
    out.models.push_back(std::move(model));
  }
  auto argmin = [&](auto proj) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < out.table.size(); ++i)
      if (proj(out.table[i]) < proj(out.table[best])) best = i;
    return best;
  };
  out.chosen_K = out.table[argmin([](const SelectionRow& r) { return r.bic; })].K;
  out.aic_choice = out.table[argmin([](const SelectionRow& r) { return r.aic; })].K;
  out.criteria_disagree = out.chosen_K != out.aic_choice;
  return out;
}

ViterbiResult viterbi(const HmmModel& model, const ObsSequence& seq) {
  const int K = model.K;
  const std::size_t T = seq.size();
  if (T == 0) throw DataError("viterbi: empty sequence");
  auto logB = emission_log_matrix(model, seq);

  std::vector<std::vector<double>> delta(T, std::vector<double>(K, kNegInf));
  std::vector<std::vector<int>> back(T, std::vector<int>(K, 0));
  std::vector<double> logA(K * K);
  for (int i = 0; i < K; ++i)
    for (int j = 0; j < K; ++j)
      logA[i * K + j] = model.A[i][j] > 0.0 ? std::log(model.A[i][j]) : kNegInf;

  for (int k = 0; k < K; ++k)
    delta[0][k] = (model.pi[k] > 0.0 ? std::log(model.pi[k]) : kNegInf) + logB[0][k];
  for (std::size_t t = 1; t < T; ++t) {
    for (int j = 0; j < K; ++j) {
      double best = kNegInf;
      int arg = 0;
      for (int i = 0; i < K; ++i) {
        double v = delta[t - 1][i] + logA[i * K + j];
        if (v > best) {  // strict: ties keep the lower state index
          best = v;
          arg = i;
        }
      }
      delta[t][j] = best + logB[t][j];
      back[t][j] = arg;
    }
  }

  ViterbiResult res;
  int arg = 0;
  for (int k = 1; k < K; ++k)
    if (delta[T - 1][k] > delta[T - 1][arg]) arg = k;
  res.log_prob = delta[T - 1][arg];
  res.path.assign(T, 0);
  res.path[T - 1] = arg;
  for (std::size_t t = T - 1; t-- > 0;) res.path[t] = back[t + 1][res.path[t + 1]];
  return res;
}

namespace {
using ordered_json = nlohmann::ordered_json;
}

std::string model_to_json(const HmmModel& model) {
  ordered_json j;
  j["schema"] = "hmm/1";
  j["K"] = model.K;
  j["pi"] = model.pi;
  j["A"] = model.A;
  ordered_json ems = ordered_json::array();
  for (const auto& e : model.emissions) {
    ordered_json je;
    je["p_accept"] = e.p_accept;
    je["challenge"] = {{"mean", e.challenge.mean}, {"var", e.challenge.var}};
    je["endurance"] = {{"mean", e.endurance.mean}, {"var", e.endurance.var}};
    je["gap"] = {{"mean", e.gap.mean},
                 {"var", e.gap.var},
                 {"missing_rate", e.missing_rate}};
    ems.push_back(std::move(je));
  }
  j["emissions"] = std::move(ems);
  return j.dump(1);
}

HmmModel model_from_json(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const std::exception& e) {
    throw CorruptFile(std::string("invalid model JSON: ") + e.what());
  }
  if (!j.contains("schema") || j.at("schema") != "hmm/1")
    throw SchemaMismatch("expected schema hmm/1");
  HmmModel m;
  try {
    m.K = j.at("K").get<int>();
    m.pi = j.at("pi").get<std::vector<double>>();
    m.A = j.at("A").get<std::vector<std::vector<double>>>();
    for (const auto& je : j.at("emissions")) {
      EmissionParams e;
      e.p_accept = je.at("p_accept").get<double>();
      e.challenge = {je.at("challenge").at("mean").get<double>(),
                     je.at("challenge").at("var").get<double>()};
      e.endurance = {je.at("endurance").at("mean").get<double>(),
                     je.at("endurance").at("var").get<double>()};
      e.gap = {je.at("gap").at("mean").get<double>(),
               je.at("gap").at("var").get<double>()};
      e.missing_rate = je.at("gap").at("missing_rate").get<double>();
      m.emissions.push_back(e);
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaMismatch(std::string("model JSON missing fields: ") + e.what());
  }
  m.validate();
  return m;
}

void save_model(const std::string& path, const HmmModel& model) {
  write_text_file(path, model_to_json(model));
}

HmmModel load_model(const std::string& path) {
  return model_from_json(read_text_file(path));
}

}  // namespace moodminer::hmm
