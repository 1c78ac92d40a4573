#pragma once
//
// Univariate discretization backends: scaling weights, Galerkin component
// matrices T_1..T_4, and their level-banded compressions with certified
// error tables.
//
// Component kinds: 1 = mass (identity), 2 = stiffness <psi', psi'>,
// 3 = <psi'_row, psi_col>, 4 = <psi_row, psi'_col> (the adjoint of 3).
// All certificates are relative to the backend's finite index window
// [1, max_index()].
//

#include <Eigen/Core>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "htsolve/common.hpp"

namespace hts {

class UnivariateBackend {
public:
    virtual ~UnivariateBackend() = default;

    virtual double weight(Index nu) const = 0;                      // omega_hat(nu)
    virtual double entry(int kind, Index nu, Index mu) const = 0;   // Galerkin entry
    virtual Index max_index() const = 0;                            // window cap
    int max_level() const { return level_of(max_index()); }

    // column mu of the level-banded compression T_{kind,j}; rows sorted ascending
    virtual void compressed_column(int kind, int j, Index mu, std::vector<Index>& rows,
                                   std::vector<double>& vals) const = 0;

    virtual double beta(int kind, int j) const = 0;   // certified window bound, see note
    virtual double alpha(int kind, int j) const = 0;  // max nnz per column / 2^j
    virtual double s_decay() const = 0;               // declared compression rate
    virtual double level_decay_gamma() const = 0;
    virtual double component_norm(int kind) const = 0;  // upper estimate of ||A_kind||
    virtual bool diagonal_kind(int kind) const = 0;
};

// Spectral sine basis psi_nu(x) = sqrt(2) sin(pi nu x) on (0,1).
// T_2 = diag((pi nu)^2); weights omega_hat(nu) = sqrt(scale) pi nu, with the
// optional per-mode diffusion rescaling entering only the weights.
class SineSpectralBackend : public UnivariateBackend {
public:
    explicit SineSpectralBackend(double diffusion_scale = 1.0, int max_level = 12);

    double weight(Index nu) const override;
    double entry(int kind, Index nu, Index mu) const override;
    Index max_index() const override { return max_index_; }
    void compressed_column(int kind, int j, Index mu, std::vector<Index>& rows,
                           std::vector<double>& vals) const override;
    double beta(int kind, int j) const override;
    double alpha(int kind, int j) const override;
    double s_decay() const override;
    double level_decay_gamma() const override { return 1.0; }
    double component_norm(int kind) const override;
    bool diagonal_kind(int kind) const override { return kind == 1 || kind == 2; }

    double diffusion_scale() const { return scale_; }

    // measured ||(T_3 - T_{3,j}) S^-1|| per band (window power iteration); test hook
    double measured_band_error(int j) const;

private:
    void build_band_tables() const;

    double scale_ = 1.0;
    int max_level_ = 12;
    Index max_index_ = 0;
    mutable std::mutex mu_;
    mutable bool tables_built_ = false;
    mutable std::vector<double> g_;      // certified window band-error bounds (kind 3/4)
    mutable std::vector<double> gmeas_;  // power-iteration measurements
    mutable std::vector<double> beta3_;
    mutable std::vector<double> alpha3_;
    mutable double s_fit_ = 0.5;
    mutable double norm3_ = 0.0;
};

// Backend loaded from a tabulated dump: JSON manifest + little-endian
// binary64 row-major level-pair blocks for kinds 2 and 3 (kind 4 is the
// transpose of kind 3).
class TabulatedBackend : public UnivariateBackend {
public:
    explicit TabulatedBackend(const std::string& manifest_path);

    double weight(Index nu) const override;
    double entry(int kind, Index nu, Index mu) const override;
    Index max_index() const override { return max_index_; }
    void compressed_column(int kind, int j, Index mu, std::vector<Index>& rows,
                           std::vector<double>& vals) const override;
    double beta(int kind, int j) const override;
    double alpha(int kind, int j) const override;
    double s_decay() const override { return s_; }
    double level_decay_gamma() const override { return gamma_; }
    double component_norm(int kind) const override;
    bool diagonal_kind(int kind) const override { return kind == 1 || (kind == 2 && t2_diagonal_); }

private:
    const std::vector<double>* find_block(int kind, int l, int lp) const;

    int max_level_ = 0;
    Index max_index_ = 0;
    double s_ = 0.5;
    double gamma_ = 1.0;
    bool t2_diagonal_ = true;
    std::vector<double> weights_;           // weights_[nu-1]
    std::vector<double> beta2_, beta3_, alpha2_, alpha3_;
    double norm2_ = 1.0, norm3_ = 1.0;
    // block storage keyed by (kind, l, lp)
    struct Block {
        int kind, l, lp;
        Eigen::Index rows, cols;
        std::vector<double> data;
    };
    std::vector<Block> blocks_;
};

// write a tabulated dump of any backend (manifest_path and a sibling .bin file)
void write_tabulated(const UnivariateBackend& backend, int max_level,
                     const std::string& manifest_path);

// one backend per tensor mode
struct BackendSet {
    std::vector<std::shared_ptr<const UnivariateBackend>> modes;

    int order() const { return static_cast<int>(modes.size()); }
    const UnivariateBackend& mode(int m) const { return *modes[static_cast<std::size_t>(m)]; }
};

BackendSet uniform_backends(int d, std::shared_ptr<const UnivariateBackend> b);

}  // namespace hts
