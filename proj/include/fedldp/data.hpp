#ifndef FEDLDP_DATA_HPP
#define FEDLDP_DATA_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fedldp/core.hpp"

namespace fedldp {

struct RawImageSet {
  int count = 0;
  int rows = 0;
  int cols = 0;
  std::vector<std::uint8_t> pixels;  // count * rows * cols, row-major
  std::vector<std::uint8_t> labels;  // optional, filled by the caller
};

struct TabularSet {
  Matrix rows;
  Vector target;
  std::vector<std::string> feature_names;
};

/// Big-endian IDX containers: magic 0x00000803 is a 3-D u8 image tensor,
/// 0x00000801 a u8 label array. Errors carry the offending byte offset.
RawImageSet parse_idx_images(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> parse_idx_labels(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> read_file_bytes(const std::string& path);

struct PcaResult {
  Matrix projected;    // rows x d_out
  Matrix basis;        // cols x d_out, descending eigenvalue order
  Vector mean;         // column means used for centering
  Vector eigenvalues;  // top d_out
};

/// Mean-centered projection onto the top principal directions; each basis
/// vector's largest-magnitude coordinate is made positive.
PcaResult pca_reduce(const Matrix& data, int d_out);

enum class MnistPartition { Pairs, Shuffled };

/// Train federation plus held-out per-client test sets (80/20 split).
struct SplitFederation {
  FederatedDataset train;
  std::vector<ClientDataset> test;
};

/// 25 clients, one per (odd, even) digit pair; labels +1 odd / -1 even.
/// subsample_fraction keeps a deterministic seeded fraction of each client's
/// samples; Shuffled reassigns samples globally at equal client sizes.
SplitFederation partition_mnist_pairs(const Matrix& features,
                                      const std::vector<std::uint8_t>& labels,
                                      MnistPartition mode, double subsample_fraction,
                                      std::uint64_t seed);

/// Sort rows by target ascending, first N-1 groups of size ceil(rows/N),
/// remainder to the last client.
FederatedDataset partition_by_target(const TabularSet& tab, int N);

/// upsilon*^2 = (1/N) sum ||grad F^_i(w*)||^2 at the pooled minimizer
/// (damped Newton to gradient norm 1e-10); upsilon^2 is a sampled supremum
/// over random w in the ball (a lower estimate of the true sup).
std::pair<double, double> estimate_hetero(const FederatedDataset& fed, const LossSpec& loss,
                                          std::uint64_t seed = 0);

/// Per-column (x - mean)/std using statistics from the first train_count rows.
TabularSet standardize(const TabularSet& tab, const std::vector<int>& columns,
                       int train_count);

/// Insurance CSV: header row; sex/smoker coded {0,1}, region coded 0-3, both
/// in first-appearance order; target is the last (charges) column.
TabularSet load_insurance_csv(const std::string& path);

/// Appends a column of ones (bias feature).
TabularSet append_bias_column(const TabularSet& tab);

/// Synthetic quadratic federation: client i holds n samples around a center
/// drawn with per-client spread `hetero`; used by sweeps and benchmarks.
FederatedDataset make_synthetic_quadratic(int N, int n, int d, double hetero,
                                          std::uint64_t seed);

}  // namespace fedldp

#endif
