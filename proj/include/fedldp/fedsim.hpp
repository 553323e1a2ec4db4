#ifndef FEDLDP_FEDSIM_HPP
#define FEDLDP_FEDSIM_HPP

#include <utility>
#include <vector>

#include "fedldp/core.hpp"
#include "fedldp/losses.hpp"
#include "fedldp/rng.hpp"

namespace fedldp {

/// Distribution of the per-round number of active clients M_r.
struct AvailabilityModel {
  enum class Kind { Fixed, UniformRange, Categorical };
  Kind kind = Kind::Fixed;
  std::vector<int> values;     // support
  std::vector<double> probs;   // per-value probability

  static AvailabilityModel Fixed(int M);
  static AvailabilityModel UniformRange(int lo, int hi);
  static AvailabilityModel Categorical(std::vector<int> values, std::vector<double> probs);

  int draw(RngStream& rng) const;
  int max_support() const;
  void validate() const;
};

enum class SamplingMode {
  WithReplacement,             // Alg. 1/2 ERM sampling
  WithoutReplacementDisjoint,  // one-pass: disjoint blocks, each sample used once
};

/// Harmonic and root-mean-square availability moments:
/// 1/M = E[1/M_r], 1/M' = sqrt(E[1/M_r^2]); always M >= M'.
std::pair<double, double> availability_moments(const AvailabilityModel& model);

/// Uniformly random M_r-subset of {0, ..., N-1}, returned sorted.
std::vector<int> sample_round(RngStream& rng, const AvailabilityModel& model, int N);

/// One-pass per-client sampling cursor over a pre-shuffled sample order.
struct OnePassState {
  std::vector<int> order;
  int cursor = 0;

  static OnePassState Shuffled(int n, RngStream& rng);
};

/// Noisy client message g~ = (1/K) sum of sampled gradients + N(0, sigma_sq I),
/// scaled by the client's objective rescale factor. In one-pass mode consumes
/// the next disjoint block of `state`.
Vector client_message(const ClientDataset& client, const LossSpec& loss, const Vector& w,
                      int K, SamplingMode mode, double sigma_sq, RngStream& batch_rng,
                      RngStream& noise_rng, OnePassState* state = nullptr);

/// Equalized batch size for unequal client sizes: K_i = ceil(K n_i / n_min).
int client_batch_size(int K, int n_i, int n_min);

/// Uniformly random permutation of the messages (the shuffler stage).
std::vector<Vector> shuffle_stage(std::vector<Vector> messages, RngStream& rng);

/// Versioned line-oriented transcript dump for audits.
void dump_transcripts(const std::vector<RoundTranscript>& transcripts, std::ostream& out);

}  // namespace fedldp

#endif
