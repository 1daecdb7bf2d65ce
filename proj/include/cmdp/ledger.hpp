#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace cmdp {

struct LedgerRow {
    int k = 0;
    double v_r_true = 0.0;
    double v_g_true = 0.0;
    double v_r_est = 0.0;
    double v_g_est = 0.0;
    double dual = 0.0;
    double bonus_sum = 0.0;
    double regret_cum = 0.0;
    double violation_cum = 0.0;
};

inline constexpr const char* kLedgerHeader =
    "k,v_r_true,v_g_true,v_r_est,v_g_est,dual,bonus_sum,regret_cum,violation_cum";

/**
 * Per-episode record of one run. Regret accumulates V* - V_r(pi^k) and the
 * violation is the positive part of the running sum of b - V_g(pi^k), both
 * from exact values of the played policy.
 */
class RegretLedger {
  public:
    RegretLedger() = default;
    RegretLedger(double optimal_value, double offset) : optimal_value_(optimal_value), offset_(offset) {}

    /// Appends episode rows().size() + 1 and updates the cumulative fields.
    const LedgerRow& score_episode(double v_r_true, double v_g_true, double v_r_est, double v_g_est,
                                   double dual, double bonus_sum);

    const std::vector<LedgerRow>& rows() const { return rows_; }
    int episodes() const { return static_cast<int>(rows_.size()); }
    double regret() const { return rows_.empty() ? 0.0 : rows_.back().regret_cum; }
    double violation() const { return rows_.empty() ? 0.0 : rows_.back().violation_cum; }
    /// sum_k (b - V_g(pi^k)) before the positive part.
    double signed_violation() const { return signed_sum_; }
    double optimal_value() const { return optimal_value_; }
    double offset() const { return offset_; }

    /// True when the cumulative columns equal a fresh recomputation from the per-episode values.
    bool consistent(double tol = 1e-9) const;

    void write_csv(const std::filesystem::path& path) const;
    /// Rebuilds a ledger from its CSV. Throws StructuralError on a bad header,
    /// a malformed row, or cumulative columns that disagree with the rows.
    static RegretLedger read_csv(const std::filesystem::path& path, double optimal_value, double offset);

  private:
    double optimal_value_ = 0.0;
    double offset_ = 0.0;
    double signed_sum_ = 0.0;
    std::vector<LedgerRow> rows_;
};

/// Seed average of a cumulative column at every episode. All ledgers must have equal length.
std::vector<double> mean_curve(const std::vector<RegretLedger>& ledgers, double LedgerRow::*field);

/// Least-squares slope of log(mean cumulative regret) against log k over
/// k in [K/10, K]. Requires K >= 100; regret values are floored at 1e-12.
double fit_regret_slope(const std::vector<RegretLedger>& ledgers);

} // namespace cmdp
