//
// Sine spectral backend and the tabulated (file-loaded) backend.
//

#include "htsolve/basis.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "json.hpp"

namespace hts {

namespace {
constexpr double kPi = 3.14159265358979323846;

void check_kind(int kind)
{
    if (kind < 1 || kind > 4) throw parameter_error("backend: component kind must be in 1..4");
}

// T3[nu,mu] = <psi'_nu, psi_mu> for the sine basis
double sine_t3(Index nu, Index mu)
{
    if (((nu + mu) & 1) == 0) return 0.0;
    return 4.0 * static_cast<double>(nu) * static_cast<double>(mu) /
           (static_cast<double>(mu) * static_cast<double>(mu) -
            static_cast<double>(nu) * static_cast<double>(nu));
}
}  // namespace

SineSpectralBackend::SineSpectralBackend(double diffusion_scale, int max_level)
    : scale_(diffusion_scale), max_level_(max_level)
{
    if (diffusion_scale <= 0.0) throw parameter_error("SineSpectralBackend: scale must be positive");
    if (max_level < 2 || max_level > 24) throw parameter_error("SineSpectralBackend: max_level out of range");
    max_index_ = level_end(max_level);
}

double SineSpectralBackend::weight(Index nu) const
{
    if (nu < 1) throw index_error("weight: index must be >= 1");
    return std::sqrt(scale_) * kPi * static_cast<double>(nu);
}

double SineSpectralBackend::entry(int kind, Index nu, Index mu) const
{
    check_kind(kind);
    if (nu < 1 || mu < 1) throw index_error("entry: indices must be >= 1");
    if (nu > max_index_ || mu > max_index_) return 0.0;
    count_entries(1);
    switch (kind) {
        case 1: return nu == mu ? 1.0 : 0.0;
        case 2: return nu == mu ? kPi * kPi * static_cast<double>(nu) * static_cast<double>(nu) : 0.0;
        case 3: return sine_t3(nu, mu);
        default: return sine_t3(mu, nu);  // adjoint pair; equals -T3[nu,mu] here
    }
}

void SineSpectralBackend::compressed_column(int kind, int j, Index mu, std::vector<Index>& rows,
                                            std::vector<double>& vals) const
{
    check_kind(kind);
    if (j < 0) throw parameter_error("compressed_column: band must be >= 0");
    rows.clear();
    vals.clear();
    if (mu > max_index_) return;
    if (kind == 1) {
        rows.push_back(mu);
        vals.push_back(1.0);
        return;
    }
    if (kind == 2) {
        rows.push_back(mu);
        vals.push_back(kPi * kPi * static_cast<double>(mu) * static_cast<double>(mu));
        count_entries(1);
        return;
    }
    const int lmu = level_of(mu);
    const int lo = std::max(0, lmu - j), hi = std::min(max_level_, lmu + j);
    for (int l = lo; l <= hi; ++l) {
        for (Index nu = level_begin(l); nu <= level_end(l); ++nu) {
            if (((nu + mu) & 1) == 0) continue;
            const double val = kind == 3 ? sine_t3(nu, mu) : sine_t3(mu, nu);
            rows.push_back(nu);
            vals.push_back(val);
        }
    }
    count_entries(rows.size());
}

void SineSpectralBackend::build_band_tables() const
{
    std::lock_guard<std::mutex> lock(mu_);
    if (tables_built_) return;
    const Index N = max_index_;
    const int L = max_level_;
    // row/column absolute sums of A3 = T3 * diag(1/weight) bucketed by level distance
    std::vector<std::vector<double>> rowsum(static_cast<std::size_t>(N) + 1,
                                            std::vector<double>(static_cast<std::size_t>(L) + 1, 0.0));
    std::vector<std::vector<double>> colsum = rowsum;
    for (Index nu = 1; nu <= N; ++nu) {
        const int lnu = level_of(nu);
        for (Index mu = 1 + ((nu & 1) ? 1 : 0); mu <= N; mu += 2) {
            if (mu == nu) continue;
            const double a = std::abs(sine_t3(nu, mu)) / weight(mu);
            const int dl = std::abs(lnu - level_of(mu));
            rowsum[static_cast<std::size_t>(nu)][static_cast<std::size_t>(dl)] += a;
            colsum[static_cast<std::size_t>(mu)][static_cast<std::size_t>(dl)] += a;
        }
    }
    count_entries(static_cast<std::size_t>(N) * static_cast<std::size_t>(N) / 2);
    g_.assign(static_cast<std::size_t>(L) + 2, 0.0);
    for (int j = 0; j <= L; ++j) {
        double rmax = 0.0, cmax = 0.0;
        for (Index i = 1; i <= N; ++i) {
            double rs = 0.0, cs = 0.0;
            for (int dl = j + 1; dl <= L; ++dl) {
                rs += rowsum[static_cast<std::size_t>(i)][static_cast<std::size_t>(dl)];
                cs += colsum[static_cast<std::size_t>(i)][static_cast<std::size_t>(dl)];
            }
            rmax = std::max(rmax, rs);
            cmax = std::max(cmax, cs);
        }
        // Schur bound on the dropped part, inflated by the safety factor 2
        g_[static_cast<std::size_t>(j)] = 2.0 * std::sqrt(rmax * cmax);
    }
    // decay fit on the nonzero range
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (int j = 0; j <= L; ++j) {
        if (g_[static_cast<std::size_t>(j)] <= 0.0) break;
        const double y = std::log2(g_[static_cast<std::size_t>(j)]);
        sx += j;
        sy += y;
        sxx += static_cast<double>(j) * j;
        sxy += static_cast<double>(j) * y;
        ++n;
    }
    s_fit_ = n >= 2 ? std::clamp(-(n * sxy - sx * sy) / (n * sxx - sx * sx), 0.3, 1.5) : 0.5;
    beta3_.assign(g_.size(), 0.0);
    for (int j = static_cast<int>(g_.size()) - 1; j >= 0; --j) {
        const double raw = g_[static_cast<std::size_t>(j)] * std::exp2(s_fit_ * j);
        beta3_[static_cast<std::size_t>(j)] =
            std::max(raw, j + 1 < static_cast<int>(g_.size()) ? beta3_[static_cast<std::size_t>(j) + 1] : 0.0);
    }
    // max nonzeros per column of the band-j compression
    alpha3_.assign(static_cast<std::size_t>(L) + 2, 0.0);
    for (int j = 0; j <= L + 1; ++j) {
        long long maxc = 0;
        for (int lmu = 0; lmu <= L; ++lmu) {
            long long c = 0;
            for (int l = std::max(0, lmu - j); l <= std::min(L, lmu + j); ++l)
                c += l == 0 ? 1 : (Index(1) << (l - 1));
            maxc = std::max(maxc, c);
        }
        alpha3_[static_cast<std::size_t>(j)] = static_cast<double>(maxc) / std::exp2(j);
    }
    // ||A3||: power iteration on the window, inflated by 1.1
    {
        const Index n1 = N;
        Eigen::VectorXd x = Eigen::VectorXd::Ones(n1);
        std::mt19937 rng(12345);
        std::normal_distribution<double> dist;
        for (Eigen::Index i = 0; i < x.size(); ++i) x(i) += 0.01 * dist(rng);
        x.normalize();
        double lam = 0.0;
        Eigen::VectorXd w(n1);
        std::vector<double> invw(static_cast<std::size_t>(n1) + 1);
        for (Index m = 1; m <= n1; ++m) invw[static_cast<std::size_t>(m)] = 1.0 / weight(m);
        for (int it = 0; it < 18; ++it) {
            // y = A3 x, z = A3^T y
            for (Index nu = 1; nu <= n1; ++nu) {
                double acc = 0.0;
                for (Index mu = 1 + ((nu & 1) ? 1 : 0); mu <= n1; mu += 2)
                    if (mu != nu) acc += sine_t3(nu, mu) * invw[static_cast<std::size_t>(mu)] * x(mu - 1);
                w(nu - 1) = acc;
            }
            Eigen::VectorXd z = Eigen::VectorXd::Zero(n1);
            for (Index nu = 1; nu <= n1; ++nu) {
                const double y = w(nu - 1);
                if (y == 0.0) continue;
                for (Index mu = 1 + ((nu & 1) ? 1 : 0); mu <= n1; mu += 2)
                    if (mu != nu) z(mu - 1) += sine_t3(nu, mu) * invw[static_cast<std::size_t>(mu)] * y;
            }
            const double nl = std::sqrt(z.norm());
            if (it > 4 && std::abs(nl - lam) < 1e-4 * nl) {
                lam = nl;
                break;
            }
            lam = nl;
            x = z / z.norm();
        }
        count_entries(static_cast<std::size_t>(n1) * static_cast<std::size_t>(n1));
        norm3_ = 1.1 * lam;
    }
    tables_built_ = true;
}

double SineSpectralBackend::beta(int kind, int j) const
{
    check_kind(kind);
    if (j < 0) throw parameter_error("beta: band must be >= 0");
    if (kind == 1 || kind == 2) return 0.0;
    if (!tables_built_) build_band_tables();
    const int L = max_level_;
    return j > L ? 0.0 : beta3_[static_cast<std::size_t>(j)];
}

double SineSpectralBackend::alpha(int kind, int j) const
{
    check_kind(kind);
    if (j < 0) throw parameter_error("alpha: band must be >= 0");
    if (kind == 1 || kind == 2) return std::exp2(-j);
    if (!tables_built_) build_band_tables();
    return alpha3_[static_cast<std::size_t>(std::min(j, max_level_ + 1))];
}

double SineSpectralBackend::s_decay() const
{
    if (!tables_built_) build_band_tables();
    return s_fit_;
}

double SineSpectralBackend::component_norm(int kind) const
{
    check_kind(kind);
    if (kind == 1) return 1.0;
    if (kind == 2) return 1.0 / scale_;
    if (!tables_built_) build_band_tables();
    return norm3_ / std::sqrt(scale_);
}

double SineSpectralBackend::measured_band_error(int j) const
{
    // power iteration on the dropped part (T3 - T3_band_j) S^-1 over the window
    const Index N = max_index_;
    Eigen::VectorXd x = Eigen::VectorXd::Ones(N);
    x.normalize();
    double lam = 0.0;
    std::vector<int> lev(static_cast<std::size_t>(N) + 1);
    std::vector<double> invw(static_cast<std::size_t>(N) + 1);
    for (Index m = 1; m <= N; ++m) {
        lev[static_cast<std::size_t>(m)] = level_of(m);
        invw[static_cast<std::size_t>(m)] = 1.0 / weight(m);
    }
    Eigen::VectorXd w(N);
    for (int it = 0; it < 30; ++it) {
        for (Index nu = 1; nu <= N; ++nu) {
            double acc = 0.0;
            for (Index mu = 1 + ((nu & 1) ? 1 : 0); mu <= N; mu += 2) {
                if (mu == nu || std::abs(lev[static_cast<std::size_t>(nu)] - lev[static_cast<std::size_t>(mu)]) <= j)
                    continue;
                acc += sine_t3(nu, mu) * invw[static_cast<std::size_t>(mu)] * x(mu - 1);
            }
            w(nu - 1) = acc;
        }
        Eigen::VectorXd z = Eigen::VectorXd::Zero(N);
        for (Index nu = 1; nu <= N; ++nu) {
            const double y = w(nu - 1);
            if (y == 0.0) continue;
            for (Index mu = 1 + ((nu & 1) ? 1 : 0); mu <= N; mu += 2) {
                if (mu == nu || std::abs(lev[static_cast<std::size_t>(nu)] - lev[static_cast<std::size_t>(mu)]) <= j)
                    continue;
                z(mu - 1) += sine_t3(nu, mu) * invw[static_cast<std::size_t>(mu)] * y;
            }
        }
        const double zn = z.norm();
        if (zn == 0.0) return 0.0;
        const double nl = std::sqrt(zn);
        if (it > 4 && std::abs(nl - lam) < 1e-6 * nl) return nl;
        lam = nl;
        x = z / zn;
    }
    return lam;
}

// ---------------------------------------------------------------------------
// tabulated backend

namespace {
struct BinFile {
    std::vector<double> values;
};
}  // namespace

TabulatedBackend::TabulatedBackend(const std::string& manifest_path)
{
    std::ifstream in(manifest_path);
    if (!in) throw io_error("TabulatedBackend: cannot open manifest " + manifest_path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw io_error(std::string("TabulatedBackend: manifest parse failure: ") + e.what());
    }
    if (j.value("format", "") != "htsolve-tabulated-v1")
        throw io_error("TabulatedBackend: unknown manifest format");
    max_level_ = j.at("max_level").get<int>();
    max_index_ = level_end(max_level_);
    s_ = j.at("s").get<double>();
    gamma_ = j.at("gamma").get<double>();
    t2_diagonal_ = j.value("t2_diagonal", true);
    weights_ = j.at("weights").get<std::vector<double>>();
    if (static_cast<Index>(weights_.size()) != max_index_)
        throw io_error("TabulatedBackend: weight table has wrong length");
    beta2_ = j.at("beta").at("2").get<std::vector<double>>();
    beta3_ = j.at("beta").at("3").get<std::vector<double>>();
    alpha2_ = j.at("alpha").at("2").get<std::vector<double>>();
    alpha3_ = j.at("alpha").at("3").get<std::vector<double>>();
    norm2_ = j.at("comp_norm").at("2").get<double>();
    norm3_ = j.at("comp_norm").at("3").get<double>();

    const std::string data_file = j.at("data_file").get<std::string>();
    std::string dir;
    if (auto pos = manifest_path.find_last_of('/'); pos != std::string::npos)
        dir = manifest_path.substr(0, pos + 1);
    std::ifstream bin(dir + data_file, std::ios::binary);
    if (!bin) throw io_error("TabulatedBackend: cannot open data file " + dir + data_file);
    for (const auto& bj : j.at("blocks")) {
        Block b;
        b.kind = bj.at("kind").get<int>();
        b.l = bj.at("l").get<int>();
        b.lp = bj.at("lp").get<int>();
        b.rows = bj.at("rows").get<Eigen::Index>();
        b.cols = bj.at("cols").get<Eigen::Index>();
        const auto offset = bj.at("offset").get<std::uint64_t>();
        b.data.resize(static_cast<std::size_t>(b.rows) * static_cast<std::size_t>(b.cols));
        bin.seekg(static_cast<std::streamoff>(offset));
        bin.read(reinterpret_cast<char*>(b.data.data()),
                 static_cast<std::streamsize>(b.data.size() * sizeof(double)));
        if (!bin) throw io_error("TabulatedBackend: truncated data file");
        blocks_.push_back(std::move(b));
    }
}

const std::vector<double>* TabulatedBackend::find_block(int kind, int l, int lp) const
{
    for (const auto& b : blocks_)
        if (b.kind == kind && b.l == l && b.lp == lp) return &b.data;
    return nullptr;
}

double TabulatedBackend::weight(Index nu) const
{
    if (nu < 1) throw index_error("weight: index must be >= 1");
    if (nu > max_index_) {
        // extrapolate dyadically beyond the table so canonical weights stay defined
        return weights_.back() * std::exp2(level_of(nu) - max_level_);
    }
    return weights_[static_cast<std::size_t>(nu - 1)];
}

double TabulatedBackend::entry(int kind, Index nu, Index mu) const
{
    check_kind(kind);
    if (nu < 1 || mu < 1) throw index_error("entry: indices must be >= 1");
    if (nu > max_index_ || mu > max_index_) return 0.0;
    if (kind == 1) return nu == mu ? 1.0 : 0.0;
    if (kind == 4) return entry(3, mu, nu);
    const int l = level_of(nu), lp = level_of(mu);
    const auto* blk = find_block(kind, l, lp);
    if (!blk) return 0.0;
    const Index r = nu - level_begin(l), c = mu - level_begin(lp);
    count_entries(1);
    return (*blk)[static_cast<std::size_t>(r) * static_cast<std::size_t>(level_end(lp) - level_begin(lp) + 1) +
                  static_cast<std::size_t>(c)];
}

void TabulatedBackend::compressed_column(int kind, int j, Index mu, std::vector<Index>& rows,
                                         std::vector<double>& vals) const
{
    check_kind(kind);
    rows.clear();
    vals.clear();
    if (mu > max_index_) return;
    if (kind == 1 || (kind == 2 && t2_diagonal_)) {
        const double v = kind == 1 ? 1.0 : entry(2, mu, mu);
        if (v != 0.0) {
            rows.push_back(mu);
            vals.push_back(v);
        }
        return;
    }
    const int lmu = level_of(mu);
    for (int l = std::max(0, lmu - j); l <= std::min(max_level_, lmu + j); ++l) {
        for (Index nu = level_begin(l); nu <= level_end(l); ++nu) {
            const double v = entry(kind, nu, mu);
            if (v != 0.0) {
                rows.push_back(nu);
                vals.push_back(v);
            }
        }
    }
}

double TabulatedBackend::beta(int kind, int j) const
{
    check_kind(kind);
    if (kind == 1) return 0.0;
    const auto& tab = kind == 2 ? beta2_ : beta3_;
    if (j >= static_cast<int>(tab.size())) return 0.0;
    return tab[static_cast<std::size_t>(j)];
}

double TabulatedBackend::alpha(int kind, int j) const
{
    check_kind(kind);
    if (kind == 1) return std::exp2(-j);
    const auto& tab = kind == 2 ? alpha2_ : alpha3_;
    if (tab.empty()) return std::exp2(-j);
    return tab[static_cast<std::size_t>(std::min<int>(j, static_cast<int>(tab.size()) - 1))];
}

double TabulatedBackend::component_norm(int kind) const
{
    check_kind(kind);
    if (kind == 1) return 1.0;
    return kind == 2 ? norm2_ : norm3_;
}

void write_tabulated(const UnivariateBackend& backend, int max_level,
                     const std::string& manifest_path)
{
    if (max_level > 9) throw resource_error("write_tabulated: dense dump capped at level 9");
    const Index N = level_end(max_level);
    nlohmann::json j;
    j["format"] = "htsolve-tabulated-v1";
    j["max_level"] = max_level;
    j["s"] = backend.s_decay();
    j["gamma"] = backend.level_decay_gamma();
    j["t2_diagonal"] = backend.diagonal_kind(2);
    std::vector<double> w;
    for (Index nu = 1; nu <= N; ++nu) w.push_back(backend.weight(nu));
    j["weights"] = w;
    j["comp_norm"] = {{"2", backend.component_norm(2)}, {"3", backend.component_norm(3)}};
    std::vector<double> b2, b3, a2, a3;
    for (int jj = 0; jj <= max_level + 1; ++jj) {
        b2.push_back(backend.beta(2, jj));
        b3.push_back(backend.beta(3, jj));
        a2.push_back(backend.alpha(2, jj));
        a3.push_back(backend.alpha(3, jj));
    }
    j["beta"] = {{"2", b2}, {"3", b3}};
    j["alpha"] = {{"2", a2}, {"3", a3}};

    std::string dir, base = manifest_path;
    if (auto pos = manifest_path.find_last_of('/'); pos != std::string::npos) {
        dir = manifest_path.substr(0, pos + 1);
        base = manifest_path.substr(pos + 1);
    }
    if (auto pos = base.find_last_of('.'); pos != std::string::npos) base = base.substr(0, pos);
    const std::string bin_name = base + ".bin";
    std::ofstream bin(dir + bin_name, std::ios::binary);
    if (!bin) throw io_error("write_tabulated: cannot open " + dir + bin_name);

    nlohmann::json blocks = nlohmann::json::array();
    std::uint64_t offset = 0;
    for (int kind : {2, 3}) {
        for (int l = 0; l <= max_level; ++l) {
            for (int lp = 0; lp <= max_level; ++lp) {
                const Index r0 = level_begin(l), r1 = level_end(l);
                const Index c0 = level_begin(lp), c1 = level_end(lp);
                std::vector<double> data;
                data.reserve(static_cast<std::size_t>(r1 - r0 + 1) * static_cast<std::size_t>(c1 - c0 + 1));
                bool any = false;
                for (Index nu = r0; nu <= r1; ++nu)
                    for (Index mu = c0; mu <= c1; ++mu) {
                        const double v = backend.entry(kind, nu, mu);
                        any = any || v != 0.0;
                        data.push_back(v);
                    }
                if (!any) continue;
                blocks.push_back({{"kind", kind},
                                  {"l", l},
                                  {"lp", lp},
                                  {"offset", offset},
                                  {"rows", r1 - r0 + 1},
                                  {"cols", c1 - c0 + 1}});
                bin.write(reinterpret_cast<const char*>(data.data()),
                          static_cast<std::streamsize>(data.size() * sizeof(double)));
                offset += data.size() * sizeof(double);
            }
        }
    }
    j["blocks"] = std::move(blocks);
    j["data_file"] = bin_name;
    std::ofstream out(manifest_path);
    if (!out) throw io_error("write_tabulated: cannot open " + manifest_path);
    out << j.dump(1) << "\n";
}

BackendSet uniform_backends(int d, std::shared_ptr<const UnivariateBackend> b)
{
    BackendSet s;
    s.modes.assign(static_cast<std::size_t>(d), std::move(b));
    return s;
}

}  // namespace hts
