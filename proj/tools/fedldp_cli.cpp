#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "fedldp/algorithms.hpp"
#include "fedldp/data.hpp"
#include "fedldp/privacy.hpp"
#include "fedldp/sweep.hpp"

namespace {

using namespace fedldp;

constexpr int kExitOk = 0;
constexpr int kExitVerifyFail = 1;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;

int classify_error(const std::string& what) {
  if (what.find("cannot open") != std::string::npos ||
      what.find("dataset missing") != std::string::npos ||
      what.find("config parse") != std::string::npos ||
      what.find("truncated") != std::string::npos) {
    return kExitIo;
  }
  return kExitVerifyFail;
}

void print_plan(const NoisePlan& plan) {
  std::printf("mode=%s\n", noise_mode_name(plan.mode));
  std::printf("sigma_sq=%.17g\n", plan.sigma_sq);
  std::printf("K_min=%d\n", plan.K_min);
  std::printf("R=%d\n", plan.R);
}

struct CalibrateArgs {
  double L = 1.0, eps = 1.0, delta = 1e-6, eps0 = 0.1, delta0 = 0.0, delta_r = 1e-6;
  double C_const = kDefaultSdpConstant;
  int n = 1000, K = 10, R = 1, N = 10000, M = 100, group_n = 1;
  bool unsafe_allow = false;
};

void setup_calibrate(CLI::App& app, CalibrateArgs& a, int& exit_code) {
  CLI::App* cal = app.add_subcommand("calibrate", "print a noise plan or amplification result");
  cal->require_subcommand(1);
  cal->add_flag("--unsafe-allow", a.unsafe_allow,
                "evaluate the formula even when its precondition fails (research sweeps)");

  auto guarded = [&a, &exit_code](auto&& strict, auto&& raw) {
    try {
      strict();
    } catch (const Error& e) {
      if (!a.unsafe_allow) throw;
      std::fprintf(stderr, "warning: %s (continuing due to --unsafe-allow)\n", e.what());
      raw();
    }
  };

  CLI::App* mbsgd = cal->add_subcommand("mbsgd");
  mbsgd->add_option("--L", a.L)->required();
  mbsgd->add_option("--n", a.n)->required();
  mbsgd->add_option("--eps", a.eps)->required();
  mbsgd->add_option("--delta", a.delta)->required();
  mbsgd->add_option("--R", a.R)->required();
  mbsgd->callback([&a, guarded]() {
    guarded([&] { print_plan(mbsgd_noise_plan(a.L, a.n, a.eps, a.delta, a.R)); },
            [&] {
              NoisePlan p;
              p.mode = NoiseMode::MbsgdAdvancedComposition;
              p.R = a.R;
              p.sigma_sq = 256.0 * a.L * a.L * a.R * std::log(2.5 * a.R / a.delta) *
                           std::log(2.0 / a.delta) / (double(a.n) * a.n * a.eps * a.eps);
              p.K_min = std::max(
                  1, (int)std::ceil(a.eps * a.n /
                                    (4.0 * std::sqrt(2.0 * a.R * std::log(2.0 / a.delta)))));
              print_plan(p);
            });
  });

  CLI::App* onepass = cal->add_subcommand("onepass");
  onepass->add_option("--L", a.L)->required();
  onepass->add_option("--K", a.K)->required();
  onepass->add_option("--eps", a.eps)->required();
  onepass->add_option("--delta", a.delta)->required();
  onepass->add_option("--n", a.n)->required();
  onepass->callback([&a, guarded]() {
    guarded([&] { print_plan(onepass_noise_plan(a.L, a.K, a.eps, a.delta, a.n)); },
            [&] {
              NoisePlan p;
              p.mode = NoiseMode::OnepassParallel;
              p.R = a.n / a.K;
              p.K_min = a.K;
              p.sigma_sq = 32.0 * a.L * a.L * std::log(1.25 / a.delta) /
                           (a.eps * a.eps * double(a.K) * a.K);
              print_plan(p);
            });
  });

  CLI::App* experiment = cal->add_subcommand("experiment");
  experiment->add_option("--L", a.L)->required();
  experiment->add_option("--n", a.n)->required();
  experiment->add_option("--eps", a.eps)->required();
  experiment->add_option("--delta", a.delta)->required();
  experiment->add_option("--R", a.R)->required();
  experiment->callback(
      [&a]() { print_plan(experiment_noise_plan(a.L, a.n, a.eps, a.delta, a.R)); });

  CLI::App* sdp = cal->add_subcommand("sdp");
  sdp->add_option("--L", a.L)->required();
  sdp->add_option("--n", a.n)->required();
  sdp->add_option("--N", a.N)->required();
  sdp->add_option("--M", a.M)->required();
  sdp->add_option("--eps", a.eps)->required();
  sdp->add_option("--delta", a.delta)->required();
  sdp->add_option("--R", a.R)->required();
  sdp->add_option("--C", a.C_const);
  sdp->callback([&a, guarded]() {
    guarded(
        [&] { print_plan(sdp_noise_plan(a.L, a.n, a.N, a.M, a.eps, a.delta, a.R, a.C_const)); },
        [&] {
          NoisePlan p;
          p.mode = NoiseMode::SdpShuffled;
          p.R = a.R;
          p.sigma_sq = a.C_const * a.L * a.L * a.R * a.M *
                       std::log(double(a.R) * a.M * a.M / (double(a.N) * a.delta)) *
                       std::log(a.R / a.delta) * std::log(1.0 / a.delta) /
                       (double(a.n) * a.n * double(a.N) * a.N * a.eps * a.eps);
          print_plan(p);
        });
  });

  CLI::App* shuffle = cal->add_subcommand("shuffle");
  shuffle->add_option("--eps0", a.eps0)->required();
  shuffle->add_option("--delta0", a.delta0);
  shuffle->add_option("--n", a.group_n)->required();
  shuffle->add_option("--N", a.N)->required();
  shuffle->add_option("--delta", a.delta_r)->required();
  shuffle->callback([&a]() {
    auto [eps_r, delta_r] = shuffle_amplify_round(a.eps0, a.delta0, a.group_n, a.N, a.delta_r);
    std::printf("eps_r=%.17g\n", eps_r);
    std::printf("delta_tilde_r=%.17g\n", delta_r);
  });

  CLI::App* gaussian = cal->add_subcommand("gaussian");
  gaussian->add_option("--L", a.L)->required();
  gaussian->add_option("--K", a.K)->required();
  gaussian->add_option("--eps", a.eps)->required();
  gaussian->add_option("--delta", a.delta)->required();
  gaussian->callback([&a]() {
    std::printf("sigma_sq=%.17g\n", gaussian_sigma_sq(a.L, a.K, a.eps, a.delta));
  });

  CLI::App* group = cal->add_subcommand("group");
  group->add_option("--eps0", a.eps0)->required();
  group->add_option("--delta0", a.delta0)->required();
  group->add_option("--n", a.group_n)->required();
  group->callback([&a]() {
    auto [eu, du] = group_privacy_userlevel(a.eps0, a.delta0, a.group_n);
    std::printf("eps_user=%.17g\n", eu);
    std::printf("delta_user=%.17g\n", du);
  });

  CLI::App* ledger = cal->add_subcommand("ledger");
  static std::string ledger_path;
  static double delta_prime = 0.0;
  ledger->add_option("--file", ledger_path, "ledger file: one 'eps0 delta0' per line")
      ->required();
  ledger->add_option("--n", a.group_n)->required();
  ledger->add_option("--N", a.N)->required();
  ledger->add_option("--delta-prime", delta_prime);
  ledger->add_option("--target-eps0", a.eps0);
  ledger->callback([&a]() {
    PrivacyLedger l = load_ledger_file(ledger_path);
    auto [eps, delta] = shuffle_amplify_ledger(l, a.group_n, a.N, delta_prime);
    std::printf("eps=%.17g\n", eps);
    std::printf("delta=%.17g\n", delta);
    if (a.eps0 > 0.0) {
      l.target_eps0 = a.eps0;
      std::printf("C=%.17g\n", compositionality_constant(l));
    }
  });
  (void)exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"locally private federated convex optimization simulator"};
  app.require_subcommand(1);

  int exit_code = kExitOk;
  CalibrateArgs cal_args;
  setup_calibrate(app, cal_args, exit_code);

  // run -------------------------------------------------------------------
  std::string run_config_path, run_algorithm = "mbsgd:ldp", run_out;
  double run_eps = 1.0;
  CLI::App* run = app.add_subcommand("run", "single training run, per-round metrics CSV");
  run->add_option("--config", run_config_path, "experiment config JSON")->required();
  run->add_option("--algorithm", run_algorithm);
  run->add_option("--eps", run_eps);
  run->add_option("--out", run_out, "output CSV path (default stdout)");
  run->callback([&]() {
    ExperimentConfig config = config_from_json_file(run_config_path);
    config.algorithms = {run_algorithm};
    config.eps_grid = {run_eps};
    config.trials = 1;
    auto rows = run_sweep(config);
    std::ostream* out = &std::cout;
    std::ofstream file;
    if (!run_out.empty()) {
      file.open(run_out);
      if (!file) throw Error("cannot open output file: " + run_out);
      out = &file;
    }
    write_sweep_csv(rows, config, *out);
  });

  // sweep -----------------------------------------------------------------
  std::string sweep_config_path, sweep_out, sweep_svg;
  int sweep_workers = 0;
  std::uint64_t sweep_seed = 0;
  bool sweep_seed_set = false, show_config = false;
  CLI::App* sweep = app.add_subcommand("sweep", "epsilon sweep with CSV + SVG output");
  sweep->add_option("--config", sweep_config_path)->required();
  sweep->add_option("--out", sweep_out, "CSV output path (default stdout)");
  sweep->add_option("--svg", sweep_svg, "SVG plot output path");
  sweep->add_option("--workers", sweep_workers);
  sweep->add_option("--seed", sweep_seed)->each([&](const std::string&) { sweep_seed_set = true; });
  sweep->add_flag("--show-config", show_config, "print the effective config and exit");
  sweep->callback([&]() {
    ExperimentConfig config = config_from_json_file(sweep_config_path);
    if (sweep_workers > 0) config.workers = sweep_workers;
    if (sweep_seed_set) config.seed = sweep_seed;
    if (show_config) {
      std::cout << config_to_json(config) << "\n";
      return;
    }
    auto rows = run_sweep(config);
    std::ostream* out = &std::cout;
    std::ofstream file;
    if (!sweep_out.empty()) {
      file.open(sweep_out);
      if (!file) throw Error("cannot open output file: " + sweep_out);
      out = &file;
    }
    write_sweep_csv(rows, config, *out);
    if (!sweep_svg.empty()) {
      std::ofstream svg(sweep_svg);
      if (!svg) throw Error("cannot open output file: " + sweep_svg);
      write_sweep_svg(rows, svg);
    }
  });

  // ingest ----------------------------------------------------------------
  std::string ingest_dataset = "mnist", ingest_dir;
  CLI::App* ingest = app.add_subcommand("ingest", "parse a dataset and print a summary");
  ingest->add_option("--dataset", ingest_dataset, "mnist | insurance");
  ingest->add_option("--data-dir", ingest_dir);
  ingest->callback([&]() {
    ExperimentConfig config;
    config.data_dir = ingest_dir;
    if (ingest_dataset == "mnist") {
      config.dataset = "mnist-pairs";
    } else if (ingest_dataset == "insurance") {
      config.dataset = "insurance";
      config.N = 5;
    } else {
      throw CLI::ValidationError("--dataset must be mnist or insurance");
    }
    FederatedDataset fed = [&]() {
        if (config.dataset == "insurance") {
          TabularSet tab = load_insurance_csv((ingest_dir.empty() ? std::string(std::getenv("FEDLDP_DATA_DIR") ? std::getenv("FEDLDP_DATA_DIR") : "") : ingest_dir) + "/insurance.csv");
          tab = append_bias_column(tab);
          return partition_by_target(tab, config.N);
        }
        const std::string dir = !ingest_dir.empty() ? ingest_dir
                                : (std::getenv("FEDLDP_DATA_DIR") ? std::getenv("FEDLDP_DATA_DIR") : "");
        if (dir.empty()) throw Error("dataset missing: <unset> (set $FEDLDP_DATA_DIR or pass --data-dir)");
        RawImageSet raw = parse_idx_images(read_file_bytes(dir + "/train-images-idx3-ubyte"));
        raw.labels = parse_idx_labels(read_file_bytes(dir + "/train-labels-idx1-ubyte"));
        Matrix pixels(raw.count, raw.rows * raw.cols);
        for (int i = 0; i < raw.count; ++i)
          for (int j = 0; j < raw.rows * raw.cols; ++j)
            pixels(i, j) = raw.pixels[std::size_t(i) * raw.rows * raw.cols + j] / 255.0;
        PcaResult pca = pca_reduce(pixels, 50);
        return partition_mnist_pairs(pca.projected, raw.labels, MnistPartition::Pairs,
                                     1.0 / 7.0, 0)
            .train;
    }();
    std::printf("clients=%d\n", fed.num_clients());
    std::printf("dim=%d\n", fed.dim);
    std::printf("n_min=%d\n", fed.n_min());
  });

  // verify ----------------------------------------------------------------
  std::string verify_only, verify_csv;
  bool fault_sigma_half = false;
  CLI::App* verify = app.add_subcommand("verify", "run the oracle/invariant suite");
  verify->add_option("--only", verify_only, "filter reports by name substring");
  verify->add_option("--csv", verify_csv, "also write the report table as CSV");
  verify->add_flag("--fault-sigma-half", fault_sigma_half,
                   "fault injection: halve sigma^2 inside the calibration check");
  verify->callback([&]() {
    std::optional<std::string> only;
    if (!verify_only.empty()) only = verify_only;
    auto reports = verification_suite(only, fault_sigma_half);
    write_reports_table(reports, std::cout);
    if (!verify_csv.empty()) {
      std::ofstream out(verify_csv);
      if (!out) throw Error("cannot open output file: " + verify_csv);
      write_reports_csv(reports, out);
    }
    for (const auto& r : reports) {
      if (!r.pass) exit_code = kExitVerifyFail;
    }
  });

  // hetero ----------------------------------------------------------------
  std::string hetero_dataset = "synthetic-quadratic", hetero_dir;
  std::uint64_t hetero_seed = 0;
  CLI::App* hetero = app.add_subcommand("hetero", "estimate client heterogeneity");
  hetero->add_option("--dataset", hetero_dataset,
                     "synthetic-quadratic | mnist-pairs | mnist-shuffled");
  hetero->add_option("--data-dir", hetero_dir);
  hetero->add_option("--seed", hetero_seed);
  hetero->callback([&]() {
    LossSpec loss;
    FederatedDataset fed;
    if (hetero_dataset == "synthetic-quadratic") {
      fed = make_synthetic_quadratic(5, 100, 5, 1.0, hetero_seed);
      loss.family = LossFamily::Quadratic;
      loss.D = 10.0;
    } else if (hetero_dataset == "mnist-pairs" || hetero_dataset == "mnist-shuffled") {
      const std::string dir = !hetero_dir.empty() ? hetero_dir
                              : (std::getenv("FEDLDP_DATA_DIR") ? std::getenv("FEDLDP_DATA_DIR") : "");
      if (dir.empty()) {
        throw Error("dataset missing: <unset> (set $FEDLDP_DATA_DIR or pass --data-dir)");
      }
      RawImageSet raw = parse_idx_images(read_file_bytes(dir + "/train-images-idx3-ubyte"));
      raw.labels = parse_idx_labels(read_file_bytes(dir + "/train-labels-idx1-ubyte"));
      Matrix pixels(raw.count, raw.rows * raw.cols);
      for (int i = 0; i < raw.count; ++i)
        for (int j = 0; j < raw.rows * raw.cols; ++j)
          pixels(i, j) = raw.pixels[std::size_t(i) * raw.rows * raw.cols + j] / 255.0;
      PcaResult pca = pca_reduce(pixels, 50);
      auto mode = hetero_dataset == "mnist-shuffled" ? MnistPartition::Shuffled
                                                     : MnistPartition::Pairs;
      fed = partition_mnist_pairs(pca.projected, raw.labels, mode, 1.0 / 7.0, hetero_seed)
                .train;
      loss.family = LossFamily::Logistic;
      loss.D = 50.0;
    } else {
      throw CLI::ValidationError("unknown --dataset");
    }
    auto [star, bound] = estimate_hetero(fed, loss, hetero_seed);
    std::printf("upsilon_star_sq=%.10g\n", star);
    std::printf("upsilon_sq=%.10g\n", bound);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return classify_error(e.what());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitVerifyFail;
  }
  return exit_code;
}
