// Prints the objective identities on one random tabular joint, then the
// maximum deviations over a corpus of 200.

#include <iostream>

#include "infovae/tabular.hpp"

using namespace infovae;
using namespace infovae::tabular;

int main() {
    Rng rng = make_rng(7);
    const TabularJoint j = random_joint(4, 3, rng);
    const ElboForms f = elbo_forms(j);
    std::cout.precision(12);
    std::cout << "form0 " << f.form0 << "\nform1 " << f.form1 << "\nform2 " << f.form2 << "\nform3 " << f.form3
              << "\nH(p_D) " << f.h_data << "\n";
    const InfoVaeForms g = infovae_forms(j, 0.5, 2.0);
    std::cout << "eq5 " << g.eq5 << "  eq6 + H " << (g.eq6 + ExtReal(g.h_data)) << "\n";

    const TabularJoint opt = optimal_decoder_for_q(j);
    std::cout << "with the Bayes decoder: recon " << reconstruction(opt) << ", I - H "
              << mutual_information_exact(opt) - entropy_data(opt) << "\n";
    const StationaryResult st = stationary(opt);
    std::cout << "chain stationary TV to p_D: " << total_variation(st.distribution, opt.p_data) << "\n\n";

    for (const auto& r : run_identity_corpus(200, 3))
        std::cout << r.identity << ": " << r.max_abs_deviation << "\n";
}
