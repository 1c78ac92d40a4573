#pragma once
//
// Contractions pi^(i), dimension-binned coarsening, and the combined
// recompress-then-coarsen reduction.
//

#include <vector>

#include "htsolve/ht_tensor.hpp"

namespace hts {

struct ContractionSet {
    int d = 0;
    // per mode: (index, value) sorted by index ascending; zeros omitted
    std::vector<std::vector<std::pair<Index, double>>> pi;
    double tensor_norm = 0.0;
};

// pi^(i)_nu = sqrt(sum_k U[nu,k]^2 sigma_k^2) from the leaf HSVD data
ContractionSet contractions(const HTTensor& v);

struct DimBins {
    std::vector<std::vector<Index>> bins;  // per mode, sorted ascending
    double mu = 0.0;                       // tail certificate
    int used = 0;                          // sum of bin sizes (<= N)
};

DimBins dim_bins(const HTTensor& v, long long N);
DimBins dim_bins(const ContractionSet& c, long long N);

// mu_N for every N = 0..total in one sorted pass
std::vector<double> coarsening_profile(const ContractionSet& c);

HTTensor coarsen_to_tolerance(const HTTensor& v, double eta);

inline double kappa_recompress(int d) { return std::sqrt(2.0 * d - 3.0); }
inline double kappa_coarsen(int d) { return std::sqrt(static_cast<double>(d)); }

// C_eta(P_eta(v)) with the standard split of the tolerance
HTTensor combined_reduce(const HTTensor& v, double eta, double alpha);

}  // namespace hts
