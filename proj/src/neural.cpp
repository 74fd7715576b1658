#include "moodminer/neural.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "moodminer/errors.hpp"
#include "moodminer/util.hpp"

namespace moodminer::nn {

namespace {

double nanmedian(std::vector<double> v, double fallback) {
  if (v.empty()) return fallback;
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void mean_std(const std::vector<double>& v, double& mean, double& sd) {
  if (v.empty()) {
    mean = 0.0;
    sd = 1.0;
    return;
  }
  double s = 0.0;
  for (double x : v) s += x;
  mean = s / v.size();
  double q = 0.0;
  for (double x : v) q += (x - mean) * (x - mean);
  sd = std::sqrt(q / v.size());
  if (sd < 1e-9) sd = 1.0;
}

}  // namespace

Encoder fit_encoder(const std::vector<StudentRecord>& train_records, int K,
                    bool with_ef, int max_seq_len) {
  Encoder enc;
  enc.K = K;
  enc.with_ef = with_ef;
  enc.max_seq_len = max_seq_len;

  std::vector<double> ends, gaps, memberships, avg_gaps, ranks;
  std::set<std::string> nats;
  for (const auto& r : train_records) {
    for (const auto& o : r.observations) {
      ends.push_back(std::log1p(std::max(0.0, o.endurance_min)));
      if (o.gap_hours) gaps.push_back(std::log1p(std::max(0.0, *o.gap_hours)));
    }
    memberships.push_back(r.common.membership_period_days);
    avg_gaps.push_back(r.common.avg_submission_gap_hours);
    if (r.common.rank) ranks.push_back(*r.common.rank);
    if (r.common.nationality) nats.insert(*r.common.nationality);
  }
  mean_std(ends, enc.end_mean, enc.end_std);
  mean_std(gaps, enc.gap_mean, enc.gap_std);
  enc.gap_median = nanmedian(gaps, 0.0);
  mean_std(memberships, enc.membership_mean, enc.membership_std);
  mean_std(avg_gaps, enc.avg_gap_mean, enc.avg_gap_std);
  mean_std(ranks, enc.rank_mean, enc.rank_std);
  enc.rank_median = nanmedian(ranks, 0.0);
  enc.nationalities.assign(nats.begin(), nats.end());
  return enc;
}

EncodedStudent encode_student(
    const Encoder& enc, const StudentRecord& record,
    const std::map<std::string, qassoc::QuestionProfile>& profiles) {
  const int T = enc.max_seq_len;
  const int D = enc.step_dim();
  EncodedStudent out;
  out.steps = Eigen::MatrixXd::Zero(T, D);
  out.mask.assign(T, 0);
  out.label = record.dropped;

  const int n = static_cast<int>(record.observations.size());
  const int keep = std::min(n, T);
  const int src_begin = n - keep;  // most recent `keep` submissions
  const int dst_begin = T - keep;  // left padding

  for (int i = 0; i < keep; ++i) {
    int s = src_begin + i;
    int d = dst_begin + i;
    out.mask[d] = 1;
    const auto& o = record.observations[s];
    int col = 0;
    if (enc.with_ef) {
      int z = record.mood_path.at(s);
      out.steps(d, col + z) = 1.0;
      col += enc.K;
      auto it = profiles.find(record.question_ids[s]);
      double mism = it == profiles.end()
                        ? 1.0 - 1.0 / enc.K
                        : qassoc::submission_mismatch(it->second, z);
      out.steps(d, col++) = mism;
    }
    out.steps(d, col + static_cast<int>(record.verdicts[s])) = 1.0;
    col += kVerdictCount;
    out.steps(d, col++) = o.challenge;
    out.steps(d, col++) =
        (std::log1p(std::max(0.0, o.endurance_min)) - enc.end_mean) / enc.end_std;
    double g = o.gap_hours ? std::log1p(std::max(0.0, *o.gap_hours))
                           : enc.gap_median;
    out.steps(d, col++) = (g - enc.gap_mean) / enc.gap_std;
  }

  Eigen::VectorXd st(enc.static_dim());
  int col = 0;
  st(col++) = (record.common.membership_period_days - enc.membership_mean) /
              enc.membership_std;
  st(col++) = record.common.acceptance_rate;
  st(col++) = (record.common.avg_submission_gap_hours - enc.avg_gap_mean) /
              enc.avg_gap_std;
  for (int i = 0; i < kVerdictCount; ++i)
    st(col++) = record.common.error_type_distribution[i];
  double rank = record.common.rank ? *record.common.rank : enc.rank_median;
  st(col++) = (rank - enc.rank_mean) / enc.rank_std;
  st(col++) = record.common.rank ? 0.0 : 1.0;  // missing flag
  int nat_hot = static_cast<int>(enc.nationalities.size());  // "other/missing"
  if (record.common.nationality) {
    auto it = std::find(enc.nationalities.begin(), enc.nationalities.end(),
                        *record.common.nationality);
    if (it != enc.nationalities.end())
      nat_hot = static_cast<int>(it - enc.nationalities.begin());
  }
  for (std::size_t i = 0; i <= enc.nationalities.size(); ++i)
    st(col++) = static_cast<int>(i) == nat_hot ? 1.0 : 0.0;
  out.statics = std::move(st);
  return out;
}

std::vector<EncodedStudent> build_sequences(
    const Encoder& enc, const std::vector<StudentRecord>& records,
    const std::map<std::string, qassoc::QuestionProfile>& profiles) {
  std::vector<EncodedStudent> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(encode_student(enc, r, profiles));
  return out;
}

namespace {

// Offsets into the flat parameter vector.
struct Layout {
  int H, F, D, S;
  int wx, wh, b, av, ab, w1, b1, w2, b2, wo, bo, total;

  Layout(const DpHyper& h, int step_dim, int static_dim) {
    H = h.hidden;
    F = h.fusion;
    D = step_dim;
    S = static_dim;
    int at = 0;
    wx = at; at += 4 * H * D;
    wh = at; at += 4 * H * H;
    b = at; at += 4 * H;
    av = at; at += H;
    ab = at; at += 1;
    w1 = at; at += F * (H + S);
    b1 = at; at += F;
    w2 = at; at += F * F;
    b2 = at; at += F;
    wo = at; at += F;
    bo = at; at += 1;
    total = at;
  }
};

using MapM = Eigen::Map<const Eigen::MatrixXd>;
using MapV = Eigen::Map<const Eigen::VectorXd>;
using MutM = Eigen::Map<Eigen::MatrixXd>;
using MutV = Eigen::Map<Eigen::VectorXd>;

struct Views {
  MapM wx, wh, w1, w2;
  MapV b, av, w1b, b2, wo;
  double ab, bo;

  Views(const Eigen::VectorXd& t, const Layout& L)
      : wx(t.data() + L.wx, 4 * L.H, L.D),
        wh(t.data() + L.wh, 4 * L.H, L.H),
        w1(t.data() + L.w1, L.F, L.H + L.S),
        w2(t.data() + L.w2, L.F, L.F),
        b(t.data() + L.b, 4 * L.H),
        av(t.data() + L.av, L.H),
        w1b(t.data() + L.b1, L.F),
        b2(t.data() + L.b2, L.F),
        wo(t.data() + L.wo, L.F),
        ab(t(L.ab)),
        bo(t(L.bo)) {}
};

struct ForwardCache {
  std::vector<int> real;                   // indices of unmasked steps
  Eigen::MatrixXd i, f, g, o, c, h, tc;    // T_real columns each, H rows
  Eigen::VectorXd scores, attn;            // T_real
  Eigen::MatrixXd u;                       // tanh(h)
  Eigen::VectorXd ctx, fused_in, q1a, q2a; // activations
  double logit = 0.0, prob = 0.5;
};

void forward_pass(const DpParams& p, const EncodedStudent& x, const Layout& L,
                  const Views& v, ForwardCache& fc) {
  if (x.steps.cols() != L.D || x.statics.size() != L.S)
    throw ShapeMismatch("encoded student does not match parameter shapes");
  const int H = L.H;
  fc.real.clear();
  for (int t = 0; t < static_cast<int>(x.mask.size()); ++t)
    if (x.mask[t]) fc.real.push_back(t);
  const int T = static_cast<int>(fc.real.size());
  if (T == 0) throw ShapeMismatch("student with no unmasked steps");

  fc.i.resize(H, T);
  fc.f.resize(H, T);
  fc.g.resize(H, T);
  fc.o.resize(H, T);
  fc.c.resize(H, T);
  fc.h.resize(H, T);
  fc.tc.resize(H, T);
  fc.u.resize(H, T);
  fc.scores.resize(T);

  Eigen::VectorXd h_prev = Eigen::VectorXd::Zero(H);
  Eigen::VectorXd c_prev = Eigen::VectorXd::Zero(H);
  for (int ti = 0; ti < T; ++ti) {
    Eigen::VectorXd z = v.wx * x.steps.row(fc.real[ti]).transpose() +
                        v.wh * h_prev + v.b;
    for (int k = 0; k < H; ++k) {
      fc.i(k, ti) = sigmoid(z(k));
      fc.f(k, ti) = sigmoid(z(H + k));
      fc.g(k, ti) = std::tanh(z(2 * H + k));
      fc.o(k, ti) = sigmoid(z(3 * H + k));
      fc.c(k, ti) = fc.f(k, ti) * c_prev(k) + fc.i(k, ti) * fc.g(k, ti);
      fc.tc(k, ti) = std::tanh(fc.c(k, ti));
      fc.h(k, ti) = fc.o(k, ti) * fc.tc(k, ti);
    }
    h_prev = fc.h.col(ti);
    c_prev = fc.c.col(ti);
    fc.u.col(ti) = fc.h.col(ti).array().tanh();
    fc.scores(ti) = v.av.dot(fc.u.col(ti)) + v.ab;
  }

  // Softmax over unmasked steps only.
  double mx = fc.scores.maxCoeff();
  fc.attn = (fc.scores.array() - mx).exp();
  fc.attn /= fc.attn.sum();

  fc.ctx = fc.h * fc.attn;
  fc.fused_in.resize(L.H + L.S);
  fc.fused_in << fc.ctx, x.statics;
  fc.q1a = (v.w1 * fc.fused_in + v.w1b).array().tanh();
  fc.q2a = (v.w2 * fc.q1a + v.b2).array().tanh();
  double zo = v.wo.dot(fc.q2a) + v.bo;
  fc.logit = std::clamp(zo, -30.0, 30.0);
  fc.prob = sigmoid(fc.logit);
}

void backward_pass(const DpParams& p, const EncodedStudent& x, const Layout& L,
                   const Views& v, const ForwardCache& fc, double dlogit,
                   Eigen::VectorXd& grad) {
  const int H = L.H, F = L.F;
  const int T = static_cast<int>(fc.real.size());

  MutM gwx(grad.data() + L.wx, 4 * H, L.D);
  MutM gwh(grad.data() + L.wh, 4 * H, H);
  MutV gb(grad.data() + L.b, 4 * H);
  MutV gav(grad.data() + L.av, H);
  MutM gw1(grad.data() + L.w1, F, H + L.S);
  MutV gb1(grad.data() + L.b1, F);
  MutM gw2(grad.data() + L.w2, F, F);
  MutV gb2(grad.data() + L.b2, F);
  MutV gwo(grad.data() + L.wo, F);

  grad(L.bo) += dlogit;
  gwo += dlogit * fc.q2a;
  Eigen::VectorXd df2 = dlogit * v.wo;
  Eigen::VectorXd dq2 = df2.array() * (1.0 - fc.q2a.array().square());
  gw2 += dq2 * fc.q1a.transpose();
  gb2 += dq2;
  Eigen::VectorXd df1 = v.w2.transpose() * dq2;
  Eigen::VectorXd dq1 = df1.array() * (1.0 - fc.q1a.array().square());
  gw1 += dq1 * fc.fused_in.transpose();
  gb1 += dq1;
  Eigen::VectorXd dfused = v.w1.transpose() * dq1;
  Eigen::VectorXd dctx = dfused.head(H);

  // Attention backward.
  Eigen::VectorXd da(T), ds(T);
  for (int ti = 0; ti < T; ++ti) da(ti) = dctx.dot(fc.h.col(ti));
  double dot = fc.attn.dot(da);
  for (int ti = 0; ti < T; ++ti) ds(ti) = fc.attn(ti) * (da(ti) - dot);
  Eigen::MatrixXd dh = Eigen::MatrixXd::Zero(H, T);
  for (int ti = 0; ti < T; ++ti) {
    gav += ds(ti) * fc.u.col(ti);
    grad(L.ab) += ds(ti);
    Eigen::VectorXd du = ds(ti) * v.av;
    dh.col(ti) = fc.attn(ti) * dctx +
                 (du.array() * (1.0 - fc.u.col(ti).array().square())).matrix();
  }

  // Backprop through time.
  Eigen::VectorXd dc = Eigen::VectorXd::Zero(H);
  Eigen::VectorXd dh_accum = Eigen::VectorXd::Zero(H);
  for (int ti = T - 1; ti >= 0; --ti) {
    Eigen::VectorXd dht = dh.col(ti) + dh_accum;
    Eigen::VectorXd do_ = dht.array() * fc.tc.col(ti).array();
    dc.array() += dht.array() * fc.o.col(ti).array() *
                  (1.0 - fc.tc.col(ti).array().square());
    Eigen::VectorXd c_prev = ti > 0 ? fc.c.col(ti - 1).eval()
                                    : Eigen::VectorXd::Zero(H).eval();
    Eigen::VectorXd di = dc.array() * fc.g.col(ti).array();
    Eigen::VectorXd dg = dc.array() * fc.i.col(ti).array();
    Eigen::VectorXd df = dc.array() * c_prev.array();
    Eigen::VectorXd dz(4 * H);
    dz.segment(0, H) =
        di.array() * fc.i.col(ti).array() * (1.0 - fc.i.col(ti).array());
    dz.segment(H, H) =
        df.array() * fc.f.col(ti).array() * (1.0 - fc.f.col(ti).array());
    dz.segment(2 * H, H) = dg.array() * (1.0 - fc.g.col(ti).array().square());
    dz.segment(3 * H, H) =
        do_.array() * fc.o.col(ti).array() * (1.0 - fc.o.col(ti).array());

    gwx += dz * x.steps.row(fc.real[ti]);
    if (ti > 0) gwh += dz * fc.h.col(ti - 1).transpose();
    gb += dz;
    dh_accum = v.wh.transpose() * dz;
    dc = (dc.array() * fc.f.col(ti).array()).matrix();
  }
  (void)p;
}

}  // namespace

DpParams init_params(const DpHyper& hyper, int step_dim, int static_dim,
                     std::uint64_t seed) {
  Layout L(hyper, step_dim, static_dim);
  DpParams p;
  p.hyper = hyper;
  p.step_dim = step_dim;
  p.static_dim = static_dim;
  p.theta.resize(L.total);
  Rng rng(derive_seed(seed, "dp-init"));
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto scale = [](int fan_in) { return std::sqrt(1.0 / std::max(1, fan_in)); };
  for (int i = 0; i < L.total; ++i) p.theta(i) = 0.0;
  for (int i = L.wx; i < L.wx + 4 * L.H * L.D; ++i)
    p.theta(i) = u(rng) * scale(L.D);
  for (int i = L.wh; i < L.wh + 4 * L.H * L.H; ++i)
    p.theta(i) = u(rng) * scale(L.H);
  // Forget-gate bias starts at 1 so early training keeps memory.
  for (int i = 0; i < L.H; ++i) p.theta(L.b + L.H + i) = 1.0;
  for (int i = L.av; i < L.av + L.H; ++i) p.theta(i) = u(rng) * scale(L.H);
  for (int i = L.w1; i < L.w1 + L.F * (L.H + L.S); ++i)
    p.theta(i) = u(rng) * scale(L.H + L.S);
  for (int i = L.w2; i < L.w2 + L.F * L.F; ++i) p.theta(i) = u(rng) * scale(L.F);
  for (int i = L.wo; i < L.wo + L.F; ++i) p.theta(i) = u(rng) * scale(L.F);
  return p;
}

double dp_forward(const DpParams& p, const EncodedStudent& x) {
  Layout L(p.hyper, p.step_dim, p.static_dim);
  Views v(p.theta, L);
  ForwardCache fc;
  forward_pass(p, x, L, v, fc);
  return fc.prob;
}

BatchGrad dp_loss_and_grads(const DpParams& p,
                            const std::vector<const EncodedStudent*>& batch) {
  if (batch.empty()) throw DataError("empty batch");
  Layout L(p.hyper, p.step_dim, p.static_dim);
  Views v(p.theta, L);
  BatchGrad out;
  out.grad = Eigen::VectorXd::Zero(L.total);
  double loss = 0.0;
  ForwardCache fc;
  const double invB = 1.0 / static_cast<double>(batch.size());
  for (const auto* ex : batch) {
    forward_pass(p, *ex, L, v, fc);
    double y = ex->label ? 1.0 : 0.0;
    double z = fc.logit;
    loss += (std::log1p(std::exp(-std::abs(z))) + std::max(z, 0.0) - z * y) * invB;
    double dlogit = (fc.prob - y) * invB;
    backward_pass(p, *ex, L, v, fc, dlogit, out.grad);
  }
  if (!std::isfinite(loss)) throw NonFiniteLoss("loss is not finite");
  out.loss = loss;
  return out;
}

std::pair<DpParams, TrainHistory> train_dp(
    const std::vector<EncodedStudent>& train,
    const std::vector<EncodedStudent>& validation, std::uint64_t seed,
    const DpHyper& hyper, int step_dim, int static_dim) {
  if (train.empty() || validation.empty())
    throw DataError("train and validation sets must be nonempty");

  DpParams p = init_params(hyper, step_dim, static_dim, seed);
  const int n = static_cast<int>(p.theta.size());
  Eigen::VectorXd m = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd vv = Eigen::VectorXd::Zero(n);
  double t_adam = 0.0;
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;

  TrainHistory hist;
  DpParams best = p;
  double best_auc = -1.0;
  int since_best = 0;

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  // Rank-statistic AUC with ties counted half.
  auto auc_of = [&](const DpParams& params,
                    const std::vector<EncodedStudent>& set) {
    std::vector<std::pair<double, int>> sl;
    sl.reserve(set.size());
    for (const auto& e : set)
      sl.emplace_back(dp_forward(params, e), e.label ? 1 : 0);
    std::sort(sl.begin(), sl.end());
    double pos = 0, neg = 0, rank_sum = 0;
    std::size_t i = 0;
    double rank = 1.0;
    while (i < sl.size()) {
      std::size_t j = i;
      while (j < sl.size() && sl[j].first == sl[i].first) ++j;
      double avg_rank = (rank + rank + (j - i) - 1) / 2.0;
      for (std::size_t k = i; k < j; ++k)
        if (sl[k].second) rank_sum += avg_rank;
      rank += static_cast<double>(j - i);
      i = j;
    }
    for (const auto& [s, y] : sl) (y ? pos : neg) += 1.0;
    if (pos == 0 || neg == 0) return 0.5;
    return (rank_sum - pos * (pos + 1) / 2.0) / (pos * neg);
  };

  auto loss_of = [&](const DpParams& params,
                     const std::vector<EncodedStudent>& set) {
    double l = 0.0;
    for (const auto& e : set) {
      double prob = dp_forward(params, e);
      double y = e.label ? 1.0 : 0.0;
      prob = std::clamp(prob, 1e-12, 1.0 - 1e-12);
      l += -(y * std::log(prob) + (1.0 - y) * std::log(1.0 - prob));
    }
    return l / static_cast<double>(set.size());
  };

  for (int epoch = 1; epoch <= hyper.max_epochs; ++epoch) {
    Rng rng(derive_seed(seed, "dp-epoch", static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    int batches = 0;
    for (std::size_t at = 0; at < order.size(); at += hyper.batch_size) {
      std::vector<const EncodedStudent*> batch;
      for (std::size_t i = at; i < std::min(order.size(), at + hyper.batch_size);
           ++i)
        batch.push_back(&train[order[i]]);
      BatchGrad bg = dp_loss_and_grads(p, batch);
      epoch_loss += bg.loss;
      ++batches;
      t_adam += 1.0;
      for (int i = 0; i < n; ++i) {
        m(i) = b1 * m(i) + (1 - b1) * bg.grad(i);
        vv(i) = b2 * vv(i) + (1 - b2) * bg.grad(i) * bg.grad(i);
        double mhat = m(i) / (1 - std::pow(b1, t_adam));
        double vhat = vv(i) / (1 - std::pow(b2, t_adam));
        p.theta(i) -= hyper.learning_rate * mhat / (std::sqrt(vhat) + eps);
      }
    }
    hist.train_loss.push_back(epoch_loss / std::max(1, batches));
    hist.val_loss.push_back(loss_of(p, validation));
    double auc = auc_of(p, validation);
    hist.val_auc.push_back(auc);
    hist.stopped_epoch = epoch;
    if (auc > best_auc + 1e-9) {
      best_auc = auc;
      best = p;
      since_best = 0;
    } else if (++since_best >= hyper.patience) {
      break;
    }
  }
  return {std::move(best), std::move(hist)};
}

std::string params_to_json(const DpParams& p) {
  nlohmann::ordered_json j;
  j["schema"] = "dp/1";
  j["hidden"] = p.hyper.hidden;
  j["fusion"] = p.hyper.fusion;
  j["learning_rate"] = p.hyper.learning_rate;
  j["max_epochs"] = p.hyper.max_epochs;
  j["batch_size"] = p.hyper.batch_size;
  j["max_seq_len"] = p.hyper.max_seq_len;
  j["patience"] = p.hyper.patience;
  j["step_dim"] = p.step_dim;
  j["static_dim"] = p.static_dim;
  std::vector<double> theta(p.theta.data(), p.theta.data() + p.theta.size());
  j["theta"] = theta;
  return j.dump();
}

DpParams params_from_json(const std::string& text) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(text);
  } catch (const std::exception& e) {
    throw CorruptFile(std::string("invalid dp JSON: ") + e.what());
  }
  if (!j.contains("schema") || j.at("schema") != "dp/1")
    throw SchemaMismatch("expected schema dp/1");
  DpParams p;
  p.hyper.hidden = j.at("hidden").get<int>();
  p.hyper.fusion = j.at("fusion").get<int>();
  p.hyper.learning_rate = j.at("learning_rate").get<double>();
  p.hyper.max_epochs = j.at("max_epochs").get<int>();
  p.hyper.batch_size = j.at("batch_size").get<int>();
  p.hyper.max_seq_len = j.at("max_seq_len").get<int>();
  p.hyper.patience = j.at("patience").get<int>();
  p.step_dim = j.at("step_dim").get<int>();
  p.static_dim = j.at("static_dim").get<int>();
  auto theta = j.at("theta").get<std::vector<double>>();
  Layout L(p.hyper, p.step_dim, p.static_dim);
  if (static_cast<int>(theta.size()) != L.total)
    throw SchemaMismatch("theta size does not match dimensions");
  p.theta = Eigen::Map<const Eigen::VectorXd>(theta.data(), theta.size());
  return p;
}

std::string history_to_csv(const TrainHistory& h) {
  std::ostringstream out;
  out << "epoch,train_loss,val_loss,val_auc\n";
  for (std::size_t i = 0; i < h.train_loss.size(); ++i)
    out << i + 1 << ',' << h.train_loss[i] << ',' << h.val_loss[i] << ','
        << h.val_auc[i] << "\n";
  return out.str();
}

}  // namespace moodminer::nn
