//
// Trace CSV/JSON emission and parsing.
//

#include "htsolve/trace.hpp"

#include <cstdio>
#include <sstream>

namespace hts {

namespace {
std::string fmt(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}
}  // namespace

std::string SolveTrace::to_csv() const
{
    std::ostringstream os;
    os << "# htsolve-trace v1\n" << kTraceCsvHeader << "\n";
    for (const auto& r : rows) {
        os << r.k << ',' << r.j << ',' << fmt(r.residual) << ',' << fmt(r.bound) << ','
           << r.max_rank_iterate << ',' << r.max_rank_intermediate << ',' << r.supp_total << ','
           << r.ops_cum << "\n";
    }
    return os.str();
}

std::vector<TraceRow> parse_trace_csv(const std::string& text)
{
    std::istringstream is(text);
    std::string line;
    std::vector<TraceRow> rows;
    int lineno = 0;
    bool header_seen = false;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            if (line != kTraceCsvHeader)
                throw io_error("trace csv: line " + std::to_string(lineno) + ": unexpected header");
            header_seen = true;
            continue;
        }
        TraceRow r;
        unsigned long long ops = 0;
        const int got = std::sscanf(line.c_str(), "%d,%d,%lf,%lf,%d,%d,%lld,%llu", &r.k, &r.j,
                                    &r.residual, &r.bound, &r.max_rank_iterate,
                                    &r.max_rank_intermediate, &r.supp_total, &ops);
        if (got != 8)
            throw io_error("trace csv: line " + std::to_string(lineno) + ": malformed row");
        r.ops_cum = ops;
        rows.push_back(r);
    }
    if (!header_seen) throw io_error("trace csv: line 1: missing header");
    return rows;
}

std::string SolveTrace::to_json() const
{
    std::ostringstream os;
    os.precision(17);
    os << "{\"eps\":" << eps << ",\"eps0\":" << eps0 << ",\"omega\":" << omega << ",\"rho\":" << rho
       << ",\"c_A\":" << c_A << ",\"kappa1\":" << kappa1 << ",\"kappa2\":" << kappa2
       << ",\"kappa3\":" << kappa3 << ",\"alpha\":" << alpha << ",\"beta1\":" << beta1
       << ",\"beta2\":" << beta2 << ",\"inner_cap\":" << inner_cap << ",\"ops_setup\":" << ops_setup
       << ",\"ops_total\":" << ops_total << ",\"aborted\":" << (aborted ? "true" : "false")
       << ",\"abort_reason\":\"" << abort_reason << "\",\"rows\":" << rows.size()
       << ",\"milestones\":[";
    for (std::size_t i = 0; i < milestones.size(); ++i) {
        const auto& m = milestones[i];
        os << (i ? "," : "") << "{\"k\":" << m.k << ",\"eps_k\":" << m.eps_k
           << ",\"bound\":" << m.bound << ",\"certified\":" << (m.certified ? "true" : "false")
           << ",\"max_rank\":" << m.max_rank << ",\"ops_cum\":" << m.ops_cum << "}";
    }
    os << "]}";
    return os.str();
}

}  // namespace hts
