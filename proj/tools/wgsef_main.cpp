// wgsef: train, evaluate and inspect weighted group sparse envelope models.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "wgsef/errors.hpp"
#include "wgsef/run.hpp"
#include "wgsef/selftest.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kTestFailure = 1;
constexpr int kConfigError = 2;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  bool deterministic = false;
  std::string out;
};

wgsef::RunConfig load(const Common& c) {
  auto cfg = wgsef::load_run_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (!c.out.empty()) cfg.output_dir = c.out;
  return cfg;
}

int cmd_train(const Common& c) {
  const auto cfg = load(c);
  wgsef::RunOptions opt;
  opt.deterministic = c.deterministic;
  opt.log = &std::cerr;
  const auto out = wgsef::run_train(cfg, opt);
  const auto& s = out.summary;
  std::cout << "output: " << cfg.output_dir.string() << "\n";
  std::cout << "val_error " << s["final"]["val_error"].get<double>() << "%  group_sparsity "
            << s["final"]["group_sparsity"].get<double>() << "%  flops " << s["final"]["flops_ratio"].get<double>()
            << "%\n";
  if (s.contains("support")) {
    std::cout << "support_recovered " << (s["support"]["support_recovered"].get<bool>() ? "true" : "false") << "\n";
  }
  return kOk;
}

int cmd_eval(const Common& c, const std::string& model) {
  const auto cfg = load(c);
  const auto rep = wgsef::run_eval(cfg, model);
  std::printf("error %.4f%%\ngroup_sparsity %.4f%%\nflops %.4f%%\n", rep.error, rep.group_sparsity,
              100.0 * rep.flops.ratio());
  std::printf("%-6s %14s %14s %8s %10s\n", "layer", "dense", "alive", "ratio", "outputs");
  for (const auto& l : rep.flops.layers) {
    std::printf("%-6zu %14.0f %14.0f %7.2f%% %4zu/%-5zu\n", l.layer, l.dense, l.alive, 100.0 * l.ratio(),
                l.outputs_alive, l.outputs_total);
  }
  for (const auto& w : rep.flops.warnings) std::printf("warning: %s\n", w.c_str());
  return kOk;
}

int cmd_selftest(std::size_t trials, std::uint64_t seed) {
  const auto suites = wgsef::prox_selftest(trials, seed);
  bool ok = true;
  for (const auto& s : suites) {
    std::printf("%-45s passed %6zu  failed %6zu  worst %.3e\n", s.name.c_str(), s.passed, s.failed, s.worst);
    ok = ok && s.failed == 0;
  }
  std::printf("%s\n", ok ? "all suites pass" : "FAILED");
  return ok ? kOk : kTestFailure;
}

int cmd_bench(const std::vector<std::size_t>& sizes, std::size_t group_size, std::uint64_t seed) {
  const auto pts = wgsef::bench_prox(sizes, group_size, seed);
  std::printf("%12s %10s %14s\n", "n", "m", "seconds");
  for (const auto& p : pts) std::printf("%12zu %10zu %14.6e\n", p.n, p.m, p.seconds);
  if (pts.size() < 2) return kOk;
  const double slope = wgsef::loglog_slope(pts);
  const bool ok = std::abs(slope - 1.0) <= 0.15;
  std::printf("log-log slope %.3f (%s 1.0 +- 0.15)\n", slope, ok ? "within" : "outside");
  return ok ? kOk : kTestFailure;
}

int cmd_plot(const std::string& metrics, const std::string& out_dir, const std::string& title) {
  std::ifstream in(metrics);
  if (!in) throw wgsef::Error(wgsef::Errc::Io, "cannot open " + metrics);
  const std::string svg = wgsef::metrics_svg(in, title);
  const std::filesystem::path dir = out_dir.empty() ? std::filesystem::path(metrics).parent_path() : std::filesystem::path(out_dir);
  if (!dir.empty()) std::filesystem::create_directories(dir);
  const auto path = dir / "metrics.svg";
  std::ofstream out(path);
  out << svg;
  if (!out) throw wgsef::Error(wgsef::Errc::Io, "cannot write " + path.string());
  std::cout << path.string() << "\n";
  return kOk;
}

void add_common(CLI::App* app, Common& c, bool needs_out) {
  app->add_option("--config", c.config, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "overrides the config seed");
  app->add_flag("--deterministic", c.deterministic, "single-threaded, timing columns written as 0");
  if (needs_out) app->add_option("--out", c.out, "output directory (overrides the config)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weighted group sparse envelope training toolkit"};
  app.require_subcommand(1);

  Common train_opts, eval_opts;
  auto* train = app.add_subcommand("train", "train a model from a config");
  add_common(train, train_opts, true);

  std::string model_path;
  auto* eval = app.add_subcommand("eval", "evaluate a saved model on the config's validation split");
  add_common(eval, eval_opts, false);
  eval->add_option("--model", model_path, "parameter file (model.bin or pruned.bin)")->required();

  std::size_t trials = 1000;
  std::uint64_t test_seed = 1;
  auto* selftest = app.add_subcommand("prox-selftest", "prox and envelope property suites");
  selftest->add_option("--trials", trials, "random instances per suite");
  selftest->add_option("--seed", test_seed);
  selftest->add_flag("--deterministic", "accepted for symmetry; the suites are single-threaded");

  std::vector<std::size_t> sizes{1000, 10000, 100000, 1000000, 10000000};
  std::size_t group_size = 100;
  std::uint64_t bench_seed = 1;
  auto* bench = app.add_subcommand("bench-prox", "prox wall time against n");
  bench->add_option("--sizes", sizes, "values of n")->delimiter(',');
  bench->add_option("--group-size", group_size, "coordinates per group (m = n / group size)");
  bench->add_option("--seed", bench_seed);

  std::string metrics, plot_out, title = "group sparsity and validation error";
  auto* plot = app.add_subcommand("plot", "render metrics.csv to SVG");
  plot->add_option("metrics", metrics, "metrics.csv")->required();
  plot->add_option("--out", plot_out, "output directory (default: next to metrics.csv)");
  plot->add_option("--title", title);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*train) return cmd_train(train_opts);
    if (*eval) return cmd_eval(eval_opts, model_path);
    if (*selftest) return cmd_selftest(trials, test_seed);
    if (*bench) return cmd_bench(sizes, group_size, bench_seed);
    if (*plot) return cmd_plot(metrics, plot_out, title);
  } catch (const wgsef::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  }
  return kOk;
}
