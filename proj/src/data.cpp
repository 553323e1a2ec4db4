#include "fedldp/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "fedldp/algorithms.hpp"
#include "fedldp/losses.hpp"
#include "fedldp/rng.hpp"

namespace fedldp {
namespace {

std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes, std::size_t offset) {
  if (offset + 4 > bytes.size()) {
    std::ostringstream os;
    os << "idx parse: truncated header at byte offset " << offset;
    throw Error(os.str());
  }
  return (std::uint32_t(bytes[offset]) << 24) | (std::uint32_t(bytes[offset + 1]) << 16) |
         (std::uint32_t(bytes[offset + 2]) << 8) | std::uint32_t(bytes[offset + 3]);
}

void shuffle_indices(std::vector<int>& idx, RngStream& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.below(i));
    std::swap(idx[i - 1], idx[j]);
  }
}

/// Analytic Hessian of the pooled empirical objective (Newton's method).
Matrix pooled_hessian(const FederatedDataset& fed, const LossSpec& loss, const Vector& w) {
  Matrix H = Matrix::Zero(fed.dim, fed.dim);
  for (int i = 0; i < fed.num_clients(); ++i) {
    const auto& c = fed.clients[i];
    const double factor = fed.weights[i] * c.scale / static_cast<double>(c.n());
    for (const auto& s : c.samples) {
      switch (loss.family) {
        case LossFamily::Quadratic:
          H += factor * Matrix::Identity(fed.dim, fed.dim);
          break;
        case LossFamily::Linear:
          H += factor * (s.x * s.x.transpose());
          break;
        case LossFamily::Logistic: {
          const double z = w.dot(s.x);
          if (std::abs(z) < 15.0) {
            const double p = 1.0 / (1.0 + std::exp(-z));
            H += (factor * p * (1.0 - p)) * (s.x * s.x.transpose());
          }
          break;
        }
        default:
          throw Error("estimate_hetero: loss must be twice-differentiable");
      }
    }
  }
  return H;
}

Vector newton_minimize(const FederatedDataset& fed, const LossSpec& loss) {
  Vector w = Vector::Zero(fed.dim);
  for (int iter = 0; iter < 100; ++iter) {
    Vector g = empirical_grad(fed, loss, w);
    if (g.norm() <= 1e-10) return w;
    Matrix H = pooled_hessian(fed, loss, w);
    H.diagonal().array() += 1e-10;
    Vector step = H.ldlt().solve(g);
    // damped: backtrack until the objective decreases
    const double f0 = empirical_risk(fed, loss, w);
    double t = 1.0;
    Vector w_next = w - step;
    int backtracks = 0;
    while (empirical_risk(fed, loss, w_next) > f0 && backtracks < 60) {
      t *= 0.5;
      w_next = w - t * step;
      ++backtracks;
    }
    w = w_next;
  }
  if (empirical_grad(fed, loss, w).norm() > 1e-10) {
    throw Error("estimate_hetero: Newton did not converge within 100 iterations");
  }
  return w;
}

Vector client_grad(const ClientDataset& c, const LossSpec& loss, const Vector& w) {
  Vector g = Vector::Zero(w.size());
  for (const auto& s : c.samples) g += grad(loss, w, s).grad;
  return (c.scale / static_cast<double>(c.n())) * g;
}

}  // namespace

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open file: " + path);
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in),
                                   std::istreambuf_iterator<char>());
}

RawImageSet parse_idx_images(const std::vector<std::uint8_t>& bytes) {
  const std::uint32_t magic = read_be32(bytes, 0);
  if (magic != 0x00000803u) {
    std::ostringstream os;
    os << "idx parse: wrong magic 0x" << std::hex << magic << " at byte offset 0 (expected 0x803)";
    throw Error(os.str());
  }
  RawImageSet set;
  set.count = static_cast<int>(read_be32(bytes, 4));
  set.rows = static_cast<int>(read_be32(bytes, 8));
  set.cols = static_cast<int>(read_be32(bytes, 12));
  const std::size_t expected = static_cast<std::size_t>(set.count) * set.rows * set.cols;
  if (bytes.size() < 16 + expected) {
    std::ostringstream os;
    os << "idx parse: truncated payload at byte offset " << bytes.size() << " (need "
       << 16 + expected << ")";
    throw Error(os.str());
  }
  set.pixels.assign(bytes.begin() + 16, bytes.begin() + 16 + expected);
  return set;
}

std::vector<std::uint8_t> parse_idx_labels(const std::vector<std::uint8_t>& bytes) {
  const std::uint32_t magic = read_be32(bytes, 0);
  if (magic != 0x00000801u) {
    std::ostringstream os;
    os << "idx parse: wrong magic 0x" << std::hex << magic << " at byte offset 0 (expected 0x801)";
    throw Error(os.str());
  }
  const std::size_t count = read_be32(bytes, 4);
  if (bytes.size() < 8 + count) {
    std::ostringstream os;
    os << "idx parse: truncated payload at byte offset " << bytes.size() << " (need "
       << 8 + count << ")";
    throw Error(os.str());
  }
  return std::vector<std::uint8_t>(bytes.begin() + 8, bytes.begin() + 8 + count);
}

PcaResult pca_reduce(const Matrix& data, int d_out) {
  if (d_out < 1 || d_out > std::min(data.rows(), data.cols())) {
    throw Error("pca_reduce: d_out must be in [1, min(rows, cols)]");
  }
  PcaResult out;
  out.mean = data.colwise().mean();
  Matrix centered = data.rowwise() - out.mean.transpose();
  Matrix cov = centered.transpose() * centered / static_cast<double>(data.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  if (eig.info() != Eigen::Success) throw Error("pca_reduce: eigendecomposition failed");
  // SelfAdjointEigenSolver returns ascending eigenvalues; take the top d_out.
  out.basis.resize(data.cols(), d_out);
  out.eigenvalues.resize(d_out);
  const Eigen::Index last = data.cols() - 1;
  for (int k = 0; k < d_out; ++k) {
    Vector v = eig.eigenvectors().col(last - k);
    Eigen::Index argmax = 0;
    v.cwiseAbs().maxCoeff(&argmax);
    if (v[argmax] < 0.0) v = -v;
    out.basis.col(k) = v;
    out.eigenvalues[k] = eig.eigenvalues()[last - k];
  }
  out.projected = centered * out.basis;
  return out;
}

SplitFederation partition_mnist_pairs(const Matrix& features,
                                      const std::vector<std::uint8_t>& labels,
                                      MnistPartition mode, double subsample_fraction,
                                      std::uint64_t seed) {
  if (features.rows() != static_cast<Eigen::Index>(labels.size())) {
    throw Error("partition_mnist_pairs: feature/label count mismatch");
  }
  if (subsample_fraction <= 0.0 || subsample_fraction > 1.0) {
    throw Error("partition_mnist_pairs: subsample_fraction must be in (0,1]");
  }
  std::vector<std::vector<int>> by_digit(10);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] > 9) throw Error("partition_mnist_pairs: label out of range");
    by_digit[labels[i]].push_back(static_cast<int>(i));
  }
  for (int d = 0; d < 10; ++d) {
    if (by_digit[d].empty()) {
      std::ostringstream os;
      os << "partition_mnist_pairs: missing digit " << d;
      throw Error(os.str());
    }
  }
  const int odds[5] = {1, 3, 5, 7, 9};
  const int evens[5] = {0, 2, 4, 6, 8};
  // Per-client index selection: subsample, shuffle, 80/20 split.
  std::vector<std::vector<int>> train_idx(25), test_idx(25);
  int client = 0;
  for (int a : odds) {
    for (int b : evens) {
      std::vector<int> idx = by_digit[a];
      idx.insert(idx.end(), by_digit[b].begin(), by_digit[b].end());
      RngStream rng(seed, static_cast<std::uint64_t>(client), 0, rng_purpose::kDataOrder);
      shuffle_indices(idx, rng);
      const int keep = std::max(1, static_cast<int>(std::ceil(subsample_fraction *
                                                              static_cast<double>(idx.size()))));
      idx.resize(keep);
      const int n_train = std::max(1, static_cast<int>(0.8 * keep));
      train_idx[client].assign(idx.begin(), idx.begin() + n_train);
      test_idx[client].assign(idx.begin() + n_train, idx.end());
      ++client;
    }
  }
  if (mode == MnistPartition::Shuffled) {
    // Same client sizes, sample assignment globally shuffled.
    std::vector<int> pool;
    for (int c = 0; c < 25; ++c) {
      pool.insert(pool.end(), train_idx[c].begin(), train_idx[c].end());
      pool.insert(pool.end(), test_idx[c].begin(), test_idx[c].end());
    }
    RngStream rng(seed, 25, 0, rng_purpose::kDataOrder);
    shuffle_indices(pool, rng);
    std::size_t cursor = 0;
    for (int c = 0; c < 25; ++c) {
      const std::size_t ntr = train_idx[c].size(), nte = test_idx[c].size();
      train_idx[c].assign(pool.begin() + cursor, pool.begin() + cursor + ntr);
      cursor += ntr;
      test_idx[c].assign(pool.begin() + cursor, pool.begin() + cursor + nte);
      cursor += nte;
    }
  }
  SplitFederation out;
  out.train.dim = static_cast<int>(features.cols());
  auto make_client = [&](const std::vector<int>& idx) {
    ClientDataset c;
    for (int i : idx) {
      Sample s;
      s.x = features.row(i).transpose();
      s.y = (labels[i] % 2 == 1) ? 1.0 : -1.0;
      c.samples.push_back(std::move(s));
    }
    return c;
  };
  for (int c = 0; c < 25; ++c) {
    out.train.clients.push_back(make_client(train_idx[c]));
    out.test.push_back(make_client(test_idx[c]));
  }
  out.train.weights.assign(25, 1.0 / 25.0);
  return out;
}

FederatedDataset partition_by_target(const TabularSet& tab, int N) {
  const int rows = static_cast<int>(tab.rows.rows());
  if (N < 1 || N > rows) throw Error("partition_by_target: need 1 <= N <= rows");
  std::vector<int> order(rows);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return tab.target[a] < tab.target[b]; });
  const int group = (rows + N - 1) / N;  // ceil(rows/N)
  FederatedDataset fed;
  fed.dim = static_cast<int>(tab.rows.cols());
  int cursor = 0;
  for (int c = 0; c < N; ++c) {
    const int size = (c < N - 1) ? std::min(group, rows - cursor - (N - 1 - c)) : rows - cursor;
    if (size < 1) throw Error("partition_by_target: empty client group");
    ClientDataset client;
    for (int k = 0; k < size; ++k) {
      Sample s;
      s.x = tab.rows.row(order[cursor + k]).transpose();
      s.y = tab.target[order[cursor + k]];
      client.samples.push_back(std::move(s));
    }
    cursor += size;
    fed.clients.push_back(std::move(client));
  }
  fed.weights.assign(N, 1.0 / N);
  return fed;
}

std::pair<double, double> estimate_hetero(const FederatedDataset& fed, const LossSpec& loss,
                                          std::uint64_t seed) {
  fed.validate();
  const Vector w_star = newton_minimize(fed, loss);
  const int N = fed.num_clients();
  double upsilon_star_sq = 0.0;
  for (const auto& c : fed.clients) {
    upsilon_star_sq += client_grad(c, loss, w_star).squaredNorm();
  }
  upsilon_star_sq /= static_cast<double>(N);
  // Sampled supremum of (1/N) sum ||grad F_i(w) - grad F(w)||^2 over the ball.
  RngStream rng(seed, 0, 0, rng_purpose::kOracle);
  double upsilon_sq = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    Vector w(fed.dim);
    for (int j = 0; j < fed.dim; ++j) w[j] = rng.normal();
    const double radius = loss.D * std::pow(rng.uniform(), 1.0 / fed.dim);
    w *= radius / std::max(w.norm(), 1e-300);
    Vector g_bar = empirical_grad(fed, loss, w);
    double acc = 0.0;
    for (const auto& c : fed.clients) {
      acc += (client_grad(c, loss, w) - g_bar).squaredNorm();
    }
    upsilon_sq = std::max(upsilon_sq, acc / static_cast<double>(N));
  }
  return {upsilon_star_sq, upsilon_sq};
}

TabularSet standardize(const TabularSet& tab, const std::vector<int>& columns,
                       int train_count) {
  if (train_count < 2 || train_count > tab.rows.rows()) {
    throw Error("standardize: train_count must be in [2, rows]");
  }
  TabularSet out = tab;
  for (int col : columns) {
    if (col < 0 || col >= tab.rows.cols()) throw Error("standardize: column out of range");
    const double mean = tab.rows.col(col).head(train_count).mean();
    const double var =
        (tab.rows.col(col).head(train_count).array() - mean).square().mean();
    if (var <= 1e-300) {
      throw Error("standardize: zero variance column " + std::to_string(col));
    }
    out.rows.col(col) = (tab.rows.col(col).array() - mean) / std::sqrt(var);
  }
  return out;
}

TabularSet load_insurance_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw Error("insurance csv: empty file");
  auto split = [](const std::string& s) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ss(s);
    while (std::getline(ss, field, ',')) {
      // trim whitespace and CR
      while (!field.empty() && (field.back() == '\r' || field.back() == ' ')) field.pop_back();
      while (!field.empty() && field.front() == ' ') field.erase(field.begin());
      fields.push_back(field);
    }
    return fields;
  };
  const std::vector<std::string> header = split(line);
  if (header.size() < 2) throw Error("insurance csv: need at least one feature and a target");
  const std::size_t ncols = header.size();
  std::vector<std::vector<std::string>> raw;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = split(line);
    if (fields.size() != ncols) {
      std::ostringstream os;
      os << "insurance csv: row " << raw.size() + 2 << " has " << fields.size()
         << " fields, expected " << ncols;
      throw Error(os.str());
    }
    raw.push_back(std::move(fields));
  }
  if (raw.empty()) throw Error("insurance csv: no data rows");
  // Encode: numeric columns parsed directly, categorical columns by
  // first-appearance integer codes.
  TabularSet tab;
  tab.rows.resize(static_cast<Eigen::Index>(raw.size()), static_cast<Eigen::Index>(ncols - 1));
  tab.target.resize(static_cast<Eigen::Index>(raw.size()));
  for (std::size_t col = 0; col < ncols; ++col) {
    bool numeric = true;
    try {
      std::size_t pos = 0;
      std::stod(raw[0][col], &pos);
      numeric = pos == raw[0][col].size();
    } catch (...) {
      numeric = false;
    }
    std::vector<std::string> codes;
    for (std::size_t row = 0; row < raw.size(); ++row) {
      double value = 0.0;
      if (numeric) {
        try {
          value = std::stod(raw[row][col]);
        } catch (...) {
          std::ostringstream os;
          os << "insurance csv: bad numeric value in row " << row + 2 << ", column "
             << header[col];
          throw Error(os.str());
        }
      } else {
        auto it = std::find(codes.begin(), codes.end(), raw[row][col]);
        if (it == codes.end()) {
          codes.push_back(raw[row][col]);
          it = codes.end() - 1;
        }
        value = static_cast<double>(it - codes.begin());
      }
      if (col + 1 == ncols) {
        tab.target[static_cast<Eigen::Index>(row)] = value;
      } else {
        tab.rows(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col)) = value;
      }
    }
    if (col + 1 < ncols) tab.feature_names.push_back(header[col]);
  }
  return tab;
}

TabularSet append_bias_column(const TabularSet& tab) {
  TabularSet out = tab;
  out.rows.conservativeResize(Eigen::NoChange, tab.rows.cols() + 1);
  out.rows.col(tab.rows.cols()).setOnes();
  out.feature_names.push_back("bias");
  return out;
}

FederatedDataset make_synthetic_quadratic(int N, int n, int d, double hetero,
                                          std::uint64_t seed) {
  if (N < 1 || n < 1 || d < 1) throw Error("make_synthetic_quadratic: N, n, d must be >= 1");
  FederatedDataset fed;
  fed.dim = d;
  for (int i = 0; i < N; ++i) {
    RngStream rng(seed, static_cast<std::uint64_t>(i), 0, rng_purpose::kDataOrder);
    Vector center(d);
    for (int j = 0; j < d; ++j) center[j] = hetero * rng.normal();
    ClientDataset c;
    for (int k = 0; k < n; ++k) {
      Sample s;
      s.x.resize(d);
      for (int j = 0; j < d; ++j) s.x[j] = center[j] + rng.normal();
      c.samples.push_back(std::move(s));
    }
    fed.clients.push_back(std::move(c));
  }
  fed.weights.assign(N, 1.0 / N);
  return fed;
}

}  // namespace fedldp
