// Compares the serial reference search against the blocked OpenMP kernel.
//
//   bench_search [--lut path | --lut-size M] [--pixels N] [--workers W]

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <thread>

#include "hsforge/lut.hpp"
#include "hsforge/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Inversion search benchmark", "bench_search"};
  std::string lut_path;
  std::size_t lut_size = 50000;
  std::size_t pixels = 4096;
  std::size_t n_best = 10;
  int workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  std::uint64_t seed = 7;
  app.add_option("--lut", lut_path, "LUT file (built on the fly when omitted)");
  app.add_option("--lut-size", lut_size, "Entries of the on-the-fly LUT");
  app.add_option("--pixels", pixels, "Observations per run");
  app.add_option("--n-best", n_best, "Ensemble size");
  app.add_option("--workers", workers, "Parallel worker count")->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "Seed for LUT and observations");
  CLI11_PARSE(app, argc, argv);

  try {
    hsforge::LookupTable lut;
    if (!lut_path.empty()) {
      lut = hsforge::load_lut(lut_path);
    } else {
      hsforge::PipelineConfig cfg;
      cfg.lhs.target_size = lut_size;
      cfg.seed = seed;
      cfg.workers = workers;
      lut = hsforge::build_lut_for(cfg);
    }
    const auto report = hsforge::cmd_bench(lut, pixels, workers, n_best, seed);
    report.print(std::cout);
    const double serial = report.timing(hsforge::SearchKernel::naive, 1).seconds;
    const double best = report.timing(hsforge::SearchKernel::optimized, workers).seconds;
    std::cout << "speedup optimized@" << workers << " vs naive@1: " << serial / best << "x\n";
    std::cout << "hardware threads: " << std::thread::hardware_concurrency() << '\n';
  } catch (const std::exception& e) {
    std::cerr << "bench_search: " << e.what() << '\n';
    return EXIT_FAILURE;
  }
  return EXIT_SUCCESS;
}
