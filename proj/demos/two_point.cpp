// Trains ELBO and an MMD-regularized objective on the two-point dataset and
// prints how far the encoder means drift.

#include <iostream>

#include "infovae/harness/experiment.hpp"
#include "infovae/harness/scenarios.hpp"

using namespace infovae;
using namespace infovae::harness;

int main(int argc, char** argv) {
    const std::size_t steps = argc > 1 ? std::stoul(argv[1]) : 4000;
    for (RunConfig cfg : {prop1_pathology(1, "demo_runs/elbo"), prop1_infovae(1, "demo_runs/infovae")}) {
        cfg.steps = steps;
        cfg.eval_every = steps / 4;
        const RunResult r = run_experiment(cfg, {false, nullptr});
        const DiagGaussian q = encode(*r.model, r.data->x);
        std::cout << cfg.name << " after " << r.steps_completed << " steps"
                  << (r.pathology ? " (stopped on a non-finite value)" : "") << "\n";
        for (std::size_t i = 0; i < 2; ++i)
            std::cout << "  x = " << r.data->x[i] << ": q(z|x) mean " << q.mean[i] << ", std " << q.std[i] << "\n";
        for (const auto& rec : r.records)
            std::cout << "  step " << rec.step << " mean_kl_qzx_pz " << rec.values.at("mean_kl_qzx_pz") << " logdet_cov "
                      << (rec.values.count("logdet_cov") ? rec.values.at("logdet_cov").str() : "n/a") << "\n";
    }
}
