#pragma once

#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "smdnet/errors.hpp"
#include "smdnet/gaussian.hpp"
#include "smdnet/network.hpp"

namespace smdnet {

// Message from agent `from` about the recipient's own state variable x_to,
// in information form.
struct GaussianBPMessage {
  int from = -1;
  int to = -1;
  Matrix omega;
  Vector eta;

  bool vacuous() const { return omega.size() == 0; }
};

struct BPBelief {
  Matrix omega;
  Vector eta;

  Vector mean() const { return omega.llt().solve(eta); }
};

// Relative measurement taken by `from` of `to`: z = x_from - x_to + w,
// w ~ N(0, Omega^{-1}).
struct PairwiseMeasurement {
  int from = -1;
  int to = -1;
  Vector z;
  Matrix omega;
};

struct CircularBPConfig {
  double alpha = 1.0;  // in (0,1]; 1 recovers standard BP

  void validate() const {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("circular BP alpha must lie in (0,1]");
  }
};

struct BPRoundResult {
  std::vector<BPBelief> beliefs;
  std::vector<GaussianBPMessage> outbox;
};

namespace bp_detail {

inline const GaussianBPMessage* find(const std::vector<GaussianBPMessage>& inbox, int from,
                                     int to) {
  for (const auto& m : inbox)
    if (m.from == from && m.to == to) return &m;
  return nullptr;
}

}  // namespace bp_detail

// One synchronous round of (circular) Gaussian belief propagation. With
// alpha = 1 the reverse-message term drops and this is standard BP. Message
// i->j aggregates
//   Omega^g = Omega_i + (1-alpha) Omega^m_{ji} + sum_{k != j} Omega^m_{ki},
// and marginalizes the pairwise factor against it:
//   Omega^m_{ij} = Omega_ij - Omega_ij (Omega^g + Omega_ij)^{-1} Omega_ij,
//   mu^m_{ij}    = (Omega^m)^{-1} Omega_ij (Omega^g + Omega_ij)^{-1} Omega^g mu^g - z_ij.
// Beliefs multiply the previous belief by all incoming messages, exactly the
// compounding recursion of the streaming-data experiments.
inline BPRoundResult circular_bp_round(const std::vector<BPBelief>& beliefs,
                                       const std::vector<GaussianBPMessage>& inbox,
                                       const std::vector<PairwiseMeasurement>& measurements,
                                       const Network& net, const CircularBPConfig& config) {
  config.validate();
  const int n = net.size();
  if (static_cast<int>(beliefs.size()) != n) throw LayoutError("circular_bp_round: belief count");
  BPRoundResult out;
  out.beliefs.resize(n);

  for (int i = 0; i < n; ++i) {
    // Belief update: previous belief times all incoming messages.
    BPBelief b = beliefs[i];
    for (int k : net.neighbors(i)) {
      const GaussianBPMessage* m = bp_detail::find(inbox, k, i);
      if (!m) continue;  // vacuous initial round
      b.omega += m->omega;
      b.eta += m->eta;
    }
    out.beliefs[i] = b;
  }

  for (const auto& meas : measurements) {
    const int i = meas.from, j = meas.to;
    if (!net.has_edge(i, j)) throw ProtocolError("measurement on a non-edge");
    // Aggregate the sender's prior-round belief and messages, excluding the
    // recipient's (scaled by 1-alpha in the circular variant).
    Matrix omega_g = beliefs[i].omega;
    Vector eta_g = beliefs[i].eta;
    for (int k : net.neighbors(i)) {
      const GaussianBPMessage* m = bp_detail::find(inbox, k, i);
      if (!m) continue;
      const double scale = (k == j) ? (1.0 - config.alpha) : 1.0;
      omega_g += scale * m->omega;
      eta_g += scale * m->eta;
    }
    Eigen::LLT<Matrix> llt_g(omega_g);
    if (llt_g.info() != Eigen::Success)
      throw NumericalError("circular_bp_round: aggregated information not positive definite");
    const Vector mu_g = llt_g.solve(eta_g);

    const Matrix sum = omega_g + meas.omega;
    Eigen::LLT<Matrix> llt_sum(sum);
    const Matrix omega_m = meas.omega - meas.omega * llt_sum.solve(meas.omega);
    Eigen::LLT<Matrix> llt_m(omega_m);
    if (llt_m.info() != Eigen::Success)
      throw NumericalError("circular_bp_round: degenerate message information");
    const Vector mu_m =
        llt_m.solve(meas.omega * llt_sum.solve(omega_g * mu_g)) - meas.z;

    GaussianBPMessage msg;
    msg.from = i;
    msg.to = j;
    msg.omega = omega_m;
    msg.eta = omega_m * mu_m;
    out.outbox.push_back(std::move(msg));
  }
  return out;
}

inline BPRoundResult bp_round(const std::vector<BPBelief>& beliefs,
                              const std::vector<GaussianBPMessage>& inbox,
                              const std::vector<PairwiseMeasurement>& measurements,
                              const Network& net) {
  return circular_bp_round(beliefs, inbox, measurements, net, CircularBPConfig{1.0});
}

}  // namespace smdnet
