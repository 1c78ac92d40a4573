//
// Tensor checkpoint container.
//

#include "htsolve/ht_io.hpp"

#include <cstdint>
#include <fstream>

#include "json.hpp"

namespace hts {

namespace {
constexpr char kMagic[6] = {'H', 'T', 'S', 'V', '1', '\n'};

void put_doubles(std::ofstream& out, const double* p, std::size_t n)
{
    out.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
}

void get_doubles(std::ifstream& in, double* p, std::size_t n)
{
    in.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) throw io_error("load_httensor: truncated payload");
}
}  // namespace

void save_httensor(const std::string& path, const HTTensor& v)
{
    v.check_consistent();
    nlohmann::json h;
    h["format"] = "htsolve-tensor-v1";
    h["d"] = v.order();
    h["zero"] = v.is_zero();
    h["hsvd_standard"] = v.hsvd_standard;
    std::vector<int> ranks;
    for (int p = 0; p < v.tree.node_count(); ++p) ranks.push_back(v.rank(p));
    h["ranks"] = ranks;
    h["supports"] = v.supp;
    h["has_sigma"] = !v.sigma.empty();
    const std::string header = h.dump();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("save_httensor: cannot open " + path);
    out.write(kMagic, sizeof kMagic);
    const std::uint64_t len = header.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof len);
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    if (v.is_zero()) return;
    for (const auto& f : v.frame) put_doubles(out, f.data(), static_cast<std::size_t>(f.size()));
    for (const auto& node : v.transfer)
        for (const auto& B : node) put_doubles(out, B.data(), static_cast<std::size_t>(B.size()));
    if (!v.sigma.empty())
        for (const auto& s : v.sigma) put_doubles(out, s.data(), static_cast<std::size_t>(s.size()));
    if (!out) throw io_error("save_httensor: write failure on " + path);
}

HTTensor load_httensor(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("load_httensor: cannot open " + path);
    char magic[6];
    in.read(magic, sizeof magic);
    if (!in || std::string(magic, 6) != std::string(kMagic, 6))
        throw io_error("load_httensor: bad magic");
    std::uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof len);
    std::string header(len, '\0');
    in.read(header.data(), static_cast<std::streamsize>(len));
    if (!in) throw io_error("load_httensor: truncated header");
    nlohmann::json h;
    try {
        h = nlohmann::json::parse(header);
    } catch (const std::exception& e) {
        throw io_error(std::string("load_httensor: header parse failure: ") + e.what());
    }
    if (h.value("format", "") != "htsolve-tensor-v1") throw io_error("load_httensor: unknown format");
    const int d = h.at("d").get<int>();
    HTTensor v{DimensionTree(d)};
    if (h.value("zero", false)) return v;
    const auto ranks = h.at("ranks").get<std::vector<int>>();
    v.supp = h.at("supports").get<std::vector<std::vector<Index>>>();
    for (int m = 0; m < d; ++m) {
        const int leaf = v.tree.leaf_node(m + 1);
        v.frame[static_cast<std::size_t>(m)].resize(
            static_cast<Eigen::Index>(v.supp[static_cast<std::size_t>(m)].size()),
            ranks[static_cast<std::size_t>(leaf)]);
        get_doubles(in, v.frame[static_cast<std::size_t>(m)].data(),
                    static_cast<std::size_t>(v.frame[static_cast<std::size_t>(m)].size()));
    }
    for (int p = 0; p < v.tree.nonleaf_count(); ++p) {
        auto [c1, c2] = v.tree.children(p);
        const int np = p == 0 ? 1 : ranks[static_cast<std::size_t>(p)];
        v.transfer[static_cast<std::size_t>(p)].assign(static_cast<std::size_t>(np), Eigen::MatrixXd());
        for (auto& B : v.transfer[static_cast<std::size_t>(p)]) {
            B.resize(ranks[static_cast<std::size_t>(c1)], ranks[static_cast<std::size_t>(c2)]);
            get_doubles(in, B.data(), static_cast<std::size_t>(B.size()));
        }
    }
    if (h.value("has_sigma", false)) {
        v.sigma.resize(static_cast<std::size_t>(v.tree.node_count()));
        for (int p = 0; p < v.tree.node_count(); ++p) {
            auto& s = v.sigma[static_cast<std::size_t>(p)];
            s.resize(p == 0 ? 1 : ranks[static_cast<std::size_t>(p)]);
            get_doubles(in, s.data(), static_cast<std::size_t>(s.size()));
        }
        v.hsvd_standard = h.value("hsvd_standard", false);
    }
    v.check_consistent();
    return v;
}

}  // namespace hts
