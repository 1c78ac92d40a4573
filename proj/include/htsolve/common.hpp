#pragma once
//
// htsolve: common error types, floating point policy, operation counters.
//

#include <cstdint>
#include <stdexcept>
#include <string>

namespace hts {

using Index = std::int64_t;

// binary64 policy: singular values below kSigmaFloor * sigma_max are treated as zero.
inline constexpr double kSigmaFloor = 1e-14;

struct error : std::runtime_error {
    explicit error(const std::string& msg) : std::runtime_error(msg) {}
};

struct parameter_error : error {
    using error::error;
};
struct structural_error : error {
    using error::error;
};
struct index_error : error {
    using error::error;
};
struct tolerance_error : error {
    using error::error;
};
struct rank_error : error {
    using error::error;
};
struct resource_error : error {
    using error::error;
};
struct io_error : error {
    using error::error;
};

// dyadic level of a univariate index: |nu| = floor(log2 nu), nu >= 1
inline int level_of(Index nu)
{
    if (nu < 1) throw index_error("level_of: index must be >= 1");
    int l = 0;
    while (nu >= 2) {
        nu >>= 1;
        ++l;
    }
    return l;
}

inline Index level_begin(int l) { return Index(1) << l; }
inline Index level_end(int l) { return (Index(1) << (l + 1)) - 1; }  // inclusive

// Cumulative operation counts. One entry handled by quadrature / entry
// evaluation counts as a single operation; linear algebra uses standard
// flop estimates. Counters only ever increase.
struct OpsCounters {
    unsigned long long gemm = 0;        // matrix products, contraction kernels
    unsigned long long qr = 0;          // orthogonalization
    unsigned long long eig = 0;         // symmetric eigendecompositions
    unsigned long long entry_eval = 0;  // operator entries by quadrature / closed form
    unsigned long long diag_scale = 0;  // diagonal scalings
    unsigned long long vec = 0;         // vector ops

    unsigned long long total() const { return gemm + qr + eig + entry_eval + diag_scale + vec; }
};

OpsCounters& ops_counters();

inline void count_gemm(std::size_t m, std::size_t n, std::size_t k)
{
    ops_counters().gemm += 2ull * m * n * k;
}
inline void count_qr(std::size_t m, std::size_t n)
{
    ops_counters().qr += 2ull * m * n * n;
}
inline void count_eig(std::size_t n) { ops_counters().eig += 9ull * n * n * n; }
inline void count_entries(std::size_t n) { ops_counters().entry_eval += n; }
inline void count_diag(std::size_t n) { ops_counters().diag_scale += n; }
inline void count_vec(std::size_t n) { ops_counters().vec += n; }

}  // namespace hts
