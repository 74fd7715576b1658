#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "moodminer/question.hpp"
#include "moodminer/types.hpp"

namespace moodminer::nn {

struct DpHyper {
  int hidden = 32;
  int fusion = 32;
  double learning_rate = 1e-3;
  int max_epochs = 50;
  int batch_size = 32;
  int max_seq_len = 200;
  int patience = 5;
};

// Normalization statistics fitted on the training fold only.
struct Encoder {
  int K = 0;
  bool with_ef = true;
  int max_seq_len = 200;

  double end_mean = 0.0, end_std = 1.0;   // log1p minutes
  double gap_mean = 0.0, gap_std = 1.0;   // log1p hours
  double gap_median = 0.0;                // imputation for missing gaps

  double membership_mean = 0.0, membership_std = 1.0;
  double avg_gap_mean = 0.0, avg_gap_std = 1.0;
  double rank_mean = 0.0, rank_std = 1.0, rank_median = 0.0;
  std::vector<std::string> nationalities;  // observed categories

  int step_dim() const { return (with_ef ? K + 1 : 0) + kVerdictCount + 3; }
  int static_dim() const {
    return 3 + kVerdictCount + 2 + static_cast<int>(nationalities.size()) + 1;
  }
};

Encoder fit_encoder(const std::vector<StudentRecord>& train_records, int K,
                    bool with_ef, int max_seq_len = 200);

struct EncodedStudent {
  Eigen::MatrixXd steps;        // max_seq_len x step_dim, left-padded with zeros
  std::vector<std::uint8_t> mask;  // 1 = real step
  Eigen::VectorXd statics;
  bool label = false;  // dropped
};

// Encodes one student: the most recent max_seq_len submissions, left-padded.
// Mood/mismatch step features are taken from the decoded path and the given
// question profiles; they are omitted when the encoder has with_ef = false.
EncodedStudent encode_student(
    const Encoder& enc, const StudentRecord& record,
    const std::map<std::string, qassoc::QuestionProfile>& profiles);

std::vector<EncodedStudent> build_sequences(
    const Encoder& enc, const std::vector<StudentRecord>& records,
    const std::map<std::string, qassoc::QuestionProfile>& profiles);

// All parameters live in one flat vector; named views are mapped on demand.
struct DpParams {
  DpHyper hyper;
  int step_dim = 0;
  int static_dim = 0;
  Eigen::VectorXd theta;

  int n_params() const { return static_cast<int>(theta.size()); }
};

DpParams init_params(const DpHyper& hyper, int step_dim, int static_dim,
                     std::uint64_t seed);

double dp_forward(const DpParams& p, const EncodedStudent& x);
inline double dp_predict(const DpParams& p, const EncodedStudent& x) {
  return dp_forward(p, x);
}

struct BatchGrad {
  double loss = 0.0;          // mean binary cross-entropy over the batch
  Eigen::VectorXd grad;       // d(loss)/d(theta)
};

BatchGrad dp_loss_and_grads(const DpParams& p,
                            const std::vector<const EncodedStudent*>& batch);

struct TrainHistory {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  std::vector<double> val_auc;
  int stopped_epoch = 0;
};

// Mini-batch Adam with early stopping on validation AUC (patience epochs);
// returns the best-validation snapshot. Deterministic given the seed.
std::pair<DpParams, TrainHistory> train_dp(
    const std::vector<EncodedStudent>& train,
    const std::vector<EncodedStudent>& validation, std::uint64_t seed,
    const DpHyper& hyper, int step_dim, int static_dim);

std::string params_to_json(const DpParams& p);
DpParams params_from_json(const std::string& text);
std::string history_to_csv(const TrainHistory& h);

}  // namespace moodminer::nn
