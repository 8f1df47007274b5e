#include "cdsim/spectral.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>

#include "cdsim/error.hpp"
#include "cdsim/linalg.hpp"
#include "cdsim/observables.hpp"

namespace cdsim {

ModeSpectrum mode_spectrum(const EvolutionMatrix& matrix, bool with_ipr) {
    const auto dec = eigen_decompose(matrix.a, with_ipr);
    const Eigen::Index n = dec.values.size();

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    // stable, so equal rates keep the solver's order
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        return -dec.values[a].real() < -dec.values[b].real();
    });

    ModeSpectrum s;
    s.eigenvalues.resize(n);
    s.gamma.resize(n);
    s.omega.resize(n);
    if (with_ipr) s.ipr.resize(n);
    const Eigen::Index atoms = n / 3;
    for (Eigen::Index k = 0; k < n; ++k) {
        const auto src = order[static_cast<std::size_t>(k)];
        s.eigenvalues[k] = dec.values[src];
        s.gamma[k] = -2.0 * dec.values[src].real();
        s.omega[k] = dec.values[src].imag();
        if (with_ipr) {
            const auto col = dec.vectors.col(src);
            double total = 0.0, sum4 = 0.0;
            for (Eigen::Index i = 0; i < atoms; ++i) {
                const double w = col.segment<3>(3 * i).squaredNorm();
                total += w;
                sum4 += w * w;
            }
            s.ipr[k] = sum4 / (total * total);
        }
    }
    return s;
}

double subradiant_fraction(const ModeSpectrum& spectrum, double gamma_cut) {
    if (!(gamma_cut >= 0.0)) throw Error("subradiant_fraction: negative threshold");
    if (spectrum.size() == 0) return 0.0;
    const auto count = (spectrum.gamma.array() < gamma_cut).count();
    return static_cast<double>(count) / static_cast<double>(spectrum.size());
}

void write_spectrum_csv(std::ostream& out, const ModeSpectrum& s) {
    out << "n,gamma_n,omega_n,ipr_n\n";
    for (long k = 0; k < s.size(); ++k) {
        out << k << ',' << format_number(s.gamma[k]) << ',' << format_number(s.omega[k]) << ',';
        if (s.ipr.size() == s.gamma.size()) out << format_number(s.ipr[k]);
        out << '\n';
    }
}

}  // namespace cdsim
