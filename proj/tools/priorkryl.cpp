// priorkryl command line: deconv / ct / diagnose.
// Exit codes: 0 ok, 2 config or input error, 3 numerical failure, 4 usage.

#include "priorkryl/experiment.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

namespace pk = priorkryl;
namespace ex = priorkryl::experiment;

namespace {

void summarize(const ex::RunOutcome& o, const std::filesystem::path& out) {
  for (const auto& r : o.runs) {
    std::printf("%-5s stop_index=%lld reason=%s rel_error=%.6g", r.name.c_str(),
                static_cast<long long>(r.result.trace.iterations()),
                pk::to_string(r.result.trace.stop_reason), r.relative_error);
    if (r.ssim_mean) std::printf(" ssim=%.6g", *r.ssim_mean);
    if (r.diagnostics && !r.diagnostics->nullspace_fractions.empty()) {
      std::printf(" nu=%.6g", r.diagnostics->nullspace_fractions.back());
    }
    std::printf("\n");
  }
  if (!out.empty()) std::printf("outputs in %s\n", out.string().c_str());
}

ex::Config load(const std::string& path, ex::ProblemKind kind, bool full) {
  return ex::parse_config(pk::io::read_text(path), kind, full);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Plain and priorconditioned CGLS experiments"};
  app.require_subcommand(1);

  std::string config_path, out_dir, run_dir;
  bool full = false;

  auto* deconv = app.add_subcommand("deconv", "1D Airy-kernel deconvolution");
  deconv->add_option("--config", config_path, "config file")->required();
  deconv->add_option("--out", out_dir, "output directory (overrides output_dir)");

  auto* ct = app.add_subcommand("ct", "sparse-view tomography");
  ct->add_option("--config", config_path, "config file")->required();
  ct->add_option("--out", out_dir, "output directory (overrides output_dir)");
  ct->add_flag("--full", full, "full 160x160, 20 angles, 60 offsets geometry");

  auto* diag = app.add_subcommand("diagnose", "diagnostics on a stored run");
  diag->add_option("--run", run_dir, "run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 4;
  }

  try {
    if (deconv->parsed() || ct->parsed()) {
      const auto kind = deconv->parsed() ? ex::ProblemKind::Deconv : ex::ProblemKind::Ct;
      ex::Config cfg = load(config_path, kind, full);
      if (!out_dir.empty()) cfg.output_dir = out_dir;
      const std::filesystem::path out = cfg.output_dir;
      const auto outcome =
          kind == ex::ProblemKind::Deconv ? ex::run_deconv(cfg, out) : ex::run_ct(cfg, out);
      summarize(outcome, out);
    } else {
      const auto outcome = ex::diagnose(run_dir);
      summarize(outcome, run_dir);
      if (outcome.gsvd) {
        std::printf("gsvd recon_a=%.3g recon_b=%.3g null=%.3g diag=%.3g\n", outcome.gsvd->recon_a,
                    outcome.gsvd->recon_b, outcome.gsvd->null_residual,
                    outcome.gsvd->diag_deviation);
      }
    }
  } catch (const pk::InputError& e) {
    std::fprintf(stderr, "priorkryl: input error: %s\n", e.what());
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    std::fprintf(stderr, "priorkryl: file error: %s\n", e.what());
    return 2;
  } catch (const pk::Error& e) {
    std::fprintf(stderr, "priorkryl: numerical error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "priorkryl: error: %s\n", e.what());
    return 3;
  }
  return 0;
}
