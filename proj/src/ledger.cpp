#include "cmdp/ledger.hpp"

#include "cmdp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace cmdp {

const LedgerRow& RegretLedger::score_episode(double v_r_true, double v_g_true, double v_r_est,
                                             double v_g_est, double dual, double bonus_sum) {
    LedgerRow row;
    row.k = episodes() + 1;
    row.v_r_true = v_r_true;
    row.v_g_true = v_g_true;
    row.v_r_est = v_r_est;
    row.v_g_est = v_g_est;
    row.dual = dual;
    row.bonus_sum = bonus_sum;
    row.regret_cum = regret() + (optimal_value_ - v_r_true);
    signed_sum_ += offset_ - v_g_true;
    row.violation_cum = std::max(0.0, signed_sum_);
    rows_.push_back(row);
    return rows_.back();
}

bool RegretLedger::consistent(double tol) const {
    RegretLedger fresh(optimal_value_, offset_);
    for (const auto& r : rows_) {
        const LedgerRow& f = fresh.score_episode(r.v_r_true, r.v_g_true, r.v_r_est, r.v_g_est, r.dual, r.bonus_sum);
        const double scale = std::max(1.0, static_cast<double>(r.k));
        if (f.k != r.k || std::abs(f.regret_cum - r.regret_cum) > tol * scale ||
            std::abs(f.violation_cum - r.violation_cum) > tol * scale)
            return false;
    }
    return true;
}

void RegretLedger::write_csv(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw StructuralError("cannot write ledger " + path.string());
    out << kLedgerHeader << '\n';
    char buf[512];
    for (const auto& r : rows_) {
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.k,
                      r.v_r_true, r.v_g_true, r.v_r_est, r.v_g_est, r.dual, r.bonus_sum, r.regret_cum,
                      r.violation_cum);
        out << buf;
    }
}

RegretLedger RegretLedger::read_csv(const std::filesystem::path& path, double optimal_value,
                                    double offset) {
    std::ifstream in(path);
    if (!in) throw StructuralError("cannot read ledger " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != kLedgerHeader)
        throw StructuralError("ledger " + path.string() + " has an unexpected header");
    RegretLedger ledger(optimal_value, offset);
    std::vector<LedgerRow> stored;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        LedgerRow r;
        char c[8];
        ss >> r.k >> c[0] >> r.v_r_true >> c[1] >> r.v_g_true >> c[2] >> r.v_r_est >> c[3] >> r.v_g_est >> c[4] >>
            r.dual >> c[5] >> r.bonus_sum >> c[6] >> r.regret_cum >> c[7] >> r.violation_cum;
        if (!ss || std::any_of(c, c + 8, [](char ch) { return ch != ','; }))
            throw StructuralError("malformed ledger row: " + line);
        stored.push_back(r);
        ledger.score_episode(r.v_r_true, r.v_g_true, r.v_r_est, r.v_g_est, r.dual, r.bonus_sum);
    }
    for (std::size_t i = 0; i < stored.size(); ++i) {
        const LedgerRow& a = stored[i];
        const LedgerRow& b = ledger.rows()[i];
        const double tol = 1e-9 * std::max(1.0, static_cast<double>(a.k));
        if (a.k != b.k || std::abs(a.regret_cum - b.regret_cum) > tol ||
            std::abs(a.violation_cum - b.violation_cum) > tol)
            throw StructuralError("ledger " + path.string() + " is inconsistent at row " + std::to_string(a.k));
    }
    return ledger;
}

std::vector<double> mean_curve(const std::vector<RegretLedger>& ledgers, double LedgerRow::*field) {
    if (ledgers.empty()) return {};
    const int K = ledgers.front().episodes();
    std::vector<double> mean(K, 0.0);
    for (const auto& l : ledgers) {
        if (l.episodes() != K) throw ConfigError("ledgers have different lengths");
        for (int i = 0; i < K; ++i) mean[i] += l.rows()[i].*field;
    }
    for (double& m : mean) m /= static_cast<double>(ledgers.size());
    return mean;
}

double fit_regret_slope(const std::vector<RegretLedger>& ledgers) {
    if (ledgers.empty()) throw ConfigError("fit_regret_slope needs at least one ledger");
    const std::vector<double> mean = mean_curve(ledgers, &LedgerRow::regret_cum);
    const int K = static_cast<int>(mean.size());
    if (K < 100) throw ConfigError("fit_regret_slope needs K >= 100");
    const int first = std::max(1, K / 10);
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (int k = first; k <= K; ++k) {
        const double x = std::log(static_cast<double>(k));
        const double y = std::log(std::max(mean[k - 1], 1e-12));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++n;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

} // namespace cmdp
