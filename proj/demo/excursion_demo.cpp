// Builds a band from simulated 1D functional data and prints the inner and
// outer confidence sets for one excursion level.

#include <iostream>

#include "invset/invset.hpp"

int main() {
    using namespace invset;
    GenSpec spec;
    spec.scenario = Scenario::dense1d;
    spec.n = 20;
    spec.seed = 11;
    const auto data = std::get<DenseData>(generate(spec));

    BootstrapConfig boot;
    boot.seed = 11;
    const ScbResult scb = multiplier_scb(data.samples, data.truth.domain(), boot);

    const double c = 0.1;
    const ExcursionCS cs = upper_excursion_cs(scb.band, c);
    const IndexSet truth_set = threshold_set(data.truth, c, Direction::at_least);
    std::cout << "bootstrap quantile a = " << scb.max_stat.quantile_a() << '\n'
              << "points: " << scb.band.size() << ", inner: " << cs.inner.count()
              << ", true excursion set: " << truth_set.count() << ", outer: " << cs.outer.count() << '\n'
              << "inner within truth: " << is_subset(cs.inner, truth_set)
              << ", truth within outer: " << is_subset(truth_set, cs.outer) << '\n'
              << "band covers truth: " << sci_event(scb.band, data.truth) << '\n';
}
