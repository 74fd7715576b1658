#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "moodminer/types.hpp"

namespace moodminer::hmm {

constexpr double kVarFloor = 1e-4;

struct Gaussian {
  double mean = 0.0;
  double var = 1.0;
  double logpdf(double x) const;
};

// Per-state emission model: Bernoulli on performance, Gaussians on the
// logit acceptance rate and the log1p-transformed times, and a missingness
// mixture on the attendance gap.
struct EmissionParams {
  double p_accept = 0.5;
  Gaussian challenge;   // on logit(challenge)
  Gaussian endurance;   // on log1p(minutes)
  Gaussian gap;         // on log1p(hours)
  double missing_rate = 0.5;
};

// Observation already pushed through the model's transforms.
struct TransformedObs {
  double perf = 0.0;
  double challenge_logit = 0.0;
  double endurance_log = 0.0;
  double gap_log = 0.0;
  bool gap_missing = true;
};

TransformedObs transform(const ObservationVector& o);
std::vector<TransformedObs> transform(const std::vector<ObservationVector>& seq);

using ObsSequence = std::vector<TransformedObs>;

struct HmmModel {
  int K = 0;
  std::vector<double> pi;               // length K
  std::vector<std::vector<double>> A;   // K x K, row-stochastic
  std::vector<EmissionParams> emissions;

  void validate() const;  // throws SchemaMismatch on broken invariants
};

double emission_logprob(const EmissionParams& state, const TransformedObs& obs);

struct ForwardBackwardResult {
  double log_likelihood = 0.0;
  std::vector<std::vector<double>> gamma;            // T x K, rows sum to 1
  std::vector<std::vector<std::vector<double>>> xi;  // (T-1) x K x K
};

ForwardBackwardResult forward_backward(const HmmModel& model,
                                       const ObsSequence& seq);

double sequence_log_likelihood(const HmmModel& model, const ObsSequence& seq);

struct FitReport {
  double log_likelihood = 0.0;
  std::vector<double> ll_trace;  // non-decreasing up to 1e-8 slack
  int iterations = 0;            // M-steps applied
  std::uint64_t seed = 0;
  bool converged = false;
};

struct FitOptions {
  double tol = 1e-4;
  int max_iter = 200;
  bool parallel = true;       // E-step across sequences
  std::uint64_t seed = 0;     // recorded in the report; feeds reinit draws
};

// Baum-Welch over a pooled set of sequences. A state whose total
// responsibility falls below 1e-8 is reinitialized once; a second collapse
// raises DegenerateState.
std::pair<HmmModel, FitReport> baum_welch(const HmmModel& init,
                                          const std::vector<ObsSequence>& data,
                                          const FitOptions& opts = {});

HmmModel random_init(int K, const std::vector<ObsSequence>& data,
                     std::uint64_t seed);

// Best of n_seeds Baum-Welch runs by final log-likelihood (ties toward the
// lower seed index). Deterministic given the master seed.
std::pair<HmmModel, FitReport> fit_multistart(int K,
                                              const std::vector<ObsSequence>& data,
                                              int n_seeds, std::uint64_t master_seed,
                                              const FitOptions& opts = {});

struct InformationCriteria {
  double aic = 0.0;
  double bic = 0.0;
  int k_params = 0;
};

int parameter_count(int K);
InformationCriteria information_criteria(int K, double total_ll,
                                         std::size_t n_obs);

struct SelectionRow {
  int K = 0;
  std::uint64_t seed_best = 0;
  double log_likelihood = 0.0;
  int k_params = 0;
  double aic = 0.0;
  double bic = 0.0;
};

struct SelectionResult {
  std::vector<SelectionRow> table;
  int chosen_K = 0;       // BIC argmin
  int aic_choice = 0;     // AIC argmin, flagged when it disagrees
  bool criteria_disagree = false;
  std::vector<HmmModel> models;  // aligned with table
};

SelectionResult model_selection(const std::vector<ObsSequence>& data, int k_min,
                                int k_max, int n_seeds, std::uint64_t master_seed,
                                const FitOptions& opts = {});

struct ViterbiResult {
  std::vector<int> path;
  double log_prob = 0.0;
};

// Max-product decode in log space; ties break toward the lower state index.
ViterbiResult viterbi(const HmmModel& model, const ObsSequence& seq);

std::string model_to_json(const HmmModel& model);
HmmModel model_from_json(const std::string& text);
void save_model(const std::string& path, const HmmModel& model);
HmmModel load_model(const std::string& path);

}  // namespace moodminer::hmm
