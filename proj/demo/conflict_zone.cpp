// Chain diagnostics for PS under two-factor truth: mode clustering of the
// log likelihood over t and lag autocorrelations of the tempered loading.
#include <cstdio>

#include "pathbf/cli/presets.hpp"
#include "pathbf/diag/diagnostics.hpp"

using namespace pathbf;

int main()
{
    const auto gen = cli::factor_preset("tables-2-3");
    RngStream rng(3, 1);
    const Matrix y = factor::simulate(gen.lambda, gen.sigma2, 100, rng);
    path::RunOptions opt;
    opt.keep_chains = true;
    const auto run = path::run_ps(y, 2, path::Grid::uniform(0.01), factor::PriorSpec{}, 2000, 500, RngStream(3, 2), opt);
    const auto report = diag::cluster_mixing(run.chains);
    std::printf("log BF %.3f  threshold %.2f  unimodal %d\n", run.estimate.log_bf, report.threshold,
                report.unimodal ? 1 : 0);
    if (report.zone)
        std::printf("conflict zone [%.2f, %.2f]\n", report.zone->first, report.zone->second);
    const auto acf = diag::acf_report(diag::select_panels(run.chains, {0.0, 0.05, 0.1, 0.5, 1.0}), {1, 10, 50});
    for (const auto& row : acf.rows)
        std::printf("t %.2f  acf1 %.3f  acf10 %.3f  acf50 %.3f\n", row.t, row.acf[0], row.acf[1], row.acf[2]);
}
