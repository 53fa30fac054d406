// toponet: batch front end for barcodes, losses, corpus metrics and the
// self-verification suites. Data goes to stdout, diagnostics and timing to
// stderr.
//
// Exit codes: 0 ok, 1 verification failure, 2 input/format error,
//             3 shape mismatch, 4 finite-difference check failure.

#include <chrono>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "toponet/toponet.hpp"
#include "toponet/verify.hpp"

namespace {

using namespace toponet;

constexpr int kExitVerifyFailed = 1;
constexpr int kExitInput = 2;
constexpr int kExitShape = 3;
constexpr int kExitGradient = 4;
constexpr double kFdTolerance = 1e-3;
constexpr double kFdStep = 1e-4;

struct BarcodeArgs {
  std::string map;
  std::size_t category = 1;
  int connectivity = 4;
};

struct LossArgs {
  std::string pred;
  std::string gt;
  LossOptions options;
  int connectivity = 4;
  std::string grad_out;
  std::size_t check_fd = 0;
  std::uint64_t seed = 1;
};

struct EvalArgs {
  std::string pred_dir;
  std::string gt_dir;
  std::string format = "json";
  std::size_t categories = 0;
  unsigned workers = 0;
};

struct VerifyArgs {
  VerifyOptions options;
  std::string counterexample = "toponet_counterexample.json";
};

Connectivity to_connectivity(int c) { return c == 8 ? Connectivity::Eight : Connectivity::Four; }

int fail(int code, const std::string& msg) {
  std::cerr << "toponet: " << msg << "\n";
  return code;
}

/// Maps library exceptions onto exit codes.
template <typename Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const ShapeError& e) {
    return fail(kExitShape, std::string("shape mismatch: ") + e.what());
  } catch (const MissingPairError& e) {
    return fail(kExitInput, e.what());
  } catch (const Error& e) {
    return fail(kExitInput, e.what());
  } catch (const std::exception& e) {
    return fail(kExitInput, e.what());
  }
}

int cmd_barcode(const BarcodeArgs& a) {
  return guarded([&] {
    const LikelihoodMap map = read_map(a.map);
    if (a.category < 1 || a.category > map.categories()) {
      throw ArgumentError("category " + std::to_string(a.category) + " outside 1.." +
                          std::to_string(map.categories()));
    }
    const Barcode bars = superlevel_barcode(map.channel(a.category - 1), to_connectivity(a.connectivity));
    std::cout << barcode_json(bars).dump(2) << "\n";
    return 0;
  });
}

int cmd_loss(LossArgs a) {
  return guarded([&] {
    a.options.connectivity = to_connectivity(a.connectivity);
    const LikelihoodMap pred = read_map(a.pred);
    const LabelMask mask = read_mask(a.gt, pred.categories());
    require_compatible(pred, mask);
    const LossResult result = total_loss(pred, mask, a.options);
    json out = loss_report_json(result.report);

    if (!a.grad_out.empty()) {
      write_tlm(a.grad_out, static_cast<std::uint32_t>(pred.categories()), static_cast<std::uint32_t>(pred.height()),
                static_cast<std::uint32_t>(pred.width()), result.grad.values);
    }
    int code = 0;
    if (a.check_fd > 0) {
      SplitMix64 rng(a.seed);
      const auto probes = pick_tie_free_probes(pred, a.check_fd, kFdStep, rng);
      if (probes.size() < a.check_fd) {
        std::cerr << "toponet: only " << probes.size() << " tie-free probes available\n";
      }
      const FdReport fd = finite_difference_check(pred, mask, a.options, LossComponent::Total, probes, kFdStep);
      out["fd_check"] = fd_report_json(fd);
      if (!(fd.max_relative_error < kFdTolerance)) {
        std::cerr << "toponet: finite-difference check failed, max relative error "
                  << format_number(fd.max_relative_error) << "\n";
        code = kExitGradient;
      }
    }
    std::cout << out.dump(2) << "\n";
    return code;
  });
}

int cmd_eval(const EvalArgs& a) {
  return guarded([&] {
    CorpusOptions opt;
    if (a.categories > 0) opt.categories = a.categories;
    opt.workers = a.workers;
    const MetricReport report = evaluate_corpus(a.pred_dir, a.gt_dir, opt);
    if (a.format == "csv") {
      std::cout << metric_report_csv(report);
    } else {
      std::cout << metric_report_json(report).dump(2) << "\n";
    }
    return 0;
  });
}

int cmd_verify(const VerifyArgs& a) {
  if (a.options.cases == 0) {
    std::cerr << "toponet: warning: 0 cases requested, randomized suites are vacuous\n";
  }
  const VerifySummary summary = run_verify(a.options);
  std::cout << summary.text(a.options);
  if (const SuiteResult* bad = summary.first_failure()) {
    std::ofstream f(a.counterexample);
    f << bad->counterexample.value_or(json::object()).dump(2) << "\n";
    std::cerr << "toponet: first counterexample written to " << a.counterexample << "\n";
    return kExitVerifyFailed;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Topology-aware segmentation losses, barcodes and metrics"};
  app.require_subcommand(1);
  bool timing = false;
  app.add_flag("--timing", timing, "Print elapsed time to stderr");

  BarcodeArgs barcode;
  auto* sub_barcode = app.add_subcommand("barcode", "0-dimensional superlevel barcode of one category as JSON");
  sub_barcode->add_option("map", barcode.map, "Likelihood map (.tlm)")->required();
  sub_barcode->add_option("--category", barcode.category, "Category, 1-based")->capture_default_str();
  sub_barcode->add_option("--connectivity", barcode.connectivity, "Pixel adjacency")
      ->check(CLI::IsMember({4, 8}))
      ->capture_default_str();

  LossArgs loss;
  auto* sub_loss = app.add_subcommand("loss", "Dice + centre-line + persistence loss report as JSON");
  sub_loss->add_option("pred", loss.pred, "Prediction likelihoods (.tlm)")->required();
  sub_loss->add_option("gt", loss.gt, "Ground-truth labels (.pgm)")->required();
  sub_loss->add_option("--lambda-d", loss.options.weights.dice, "Dice weight")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  sub_loss->add_option("--lambda-cl", loss.options.weights.cl, "Centre-line weight")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  sub_loss->add_option("--lambda-per", loss.options.weights.per, "Persistence weight")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  sub_loss->add_option("--epoch", loss.options.epoch, "Current epoch")->capture_default_str();
  sub_loss->add_option("--warmup", loss.options.warmup_epochs, "Warmup epochs")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub_loss->add_option("--skel-iters", loss.options.skeleton_iterations, "Soft-skeleton iterations")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub_loss->add_option("--connectivity", loss.connectivity, "Pixel adjacency")
      ->check(CLI::IsMember({4, 8}))
      ->capture_default_str();
  sub_loss->add_option("--grad", loss.grad_out, "Write dL/dY as TLM");
  sub_loss->add_option("--check-fd", loss.check_fd, "Finite-difference check at n random tie-free probes");
  sub_loss->add_option("--seed", loss.seed, "Seed for probe selection")->capture_default_str();

  EvalArgs eval;
  auto* sub_eval = app.add_subcommand("eval", "DSC / IoU / ASSD over paired PGM masks");
  sub_eval->add_option("pred_dir", eval.pred_dir, "Predicted masks")->required();
  sub_eval->add_option("gt_dir", eval.gt_dir, "Ground-truth masks")->required();
  sub_eval->add_option("--format", eval.format, "Output format")
      ->check(CLI::IsMember({"json", "csv"}))
      ->capture_default_str();
  sub_eval->add_option("--categories", eval.categories, "Category count (default: largest label seen)");
  sub_eval->add_option("--workers", eval.workers, "Worker threads (default: hardware)");

  VerifyArgs verify;
  auto* sub_verify = app.add_subcommand("verify", "Run the oracle suites");
  sub_verify->add_option("--seed", verify.options.seed, "Seed")->capture_default_str();
  sub_verify->add_option("--cases", verify.options.cases, "Cases per randomized suite")->capture_default_str();
  sub_verify->add_option("--counterexample", verify.counterexample, "Where to write the first failing case")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  const auto start = std::chrono::steady_clock::now();
  int code = 0;
  if (*sub_barcode) code = cmd_barcode(barcode);
  else if (*sub_loss) code = cmd_loss(loss);
  else if (*sub_eval) code = cmd_eval(eval);
  else if (*sub_verify) code = cmd_verify(verify);
  if (timing) {
    const auto ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    std::cerr << "toponet: " << app.get_subcommands().front()->get_name() << " took " << ms << " ms\n";
  }
  return code;
}
