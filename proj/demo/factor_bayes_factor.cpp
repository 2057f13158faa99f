// PS and PS-SC estimates of log BF(2 vs 1) on data simulated from the
// seven-variable design, under one-factor and two-factor truth.
#include <cstdio>

#include "pathbf/cli/presets.hpp"
#include "pathbf/path/engine.hpp"

using namespace pathbf;

int main()
{
    const auto preset = cli::factor_preset("tables-2-3");
    const auto grid = path::Grid::uniform(0.05);
    const factor::PriorSpec prior;
    for (int truth = 1; truth <= 2; ++truth) {
        const auto gen = preset.truncated(truth);
        RngStream rng(42, 1);
        const Matrix y = factor::simulate(gen.lambda, gen.sigma2, 100, rng);
        const RngStream s(42, 2);
        const auto ps = path::run_ps(y, 2, grid, prior, 2000, 500, s);
        const auto pssc = path::run_pssc(y, 2, grid, prior, 2000, 500, s);
        std::printf("truth k=%d  PS %9.3f  PS-SC %9.3f\n", truth, ps.estimate.log_bf, pssc.estimate.log_bf);
        for (std::size_t i = 0; i < pssc.estimate.steps.size(); ++i)
            std::printf("  step %d  %9.3f\n", pssc.estimate.steps[i], pssc.estimate.per_step[i]);
    }
}
