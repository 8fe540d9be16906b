#include "dual_simplex.hpp"

#include "cfx/milp/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>

namespace cfx::milp::detail {

namespace {
constexpr double kPrimalTol = 1e-9;
constexpr double kDualTol = 1e-9;
constexpr double kPivotTol = 1e-9;
constexpr int kRefactorEvery = 100;
constexpr int kDegenerateLimit = 200;
constexpr double kPerturbation = 1e-7;
constexpr double kMinWeight = 1e-6;
constexpr double kMaxWeight = 1e8;
}  // namespace

LpProblem make_lp(const Instance& inst) {
    if (inst.has_quadratic()) throw std::invalid_argument("make_lp needs a linear instance");
    LpProblem lp;
    lp.n = static_cast<int>(inst.num_columns());
    lp.m = static_cast<int>(inst.num_rows());
    const int n = lp.n, m = lp.m;
    auto& mat = lp.matrix;
    mat.rows = m;
    mat.cols = n + m;
    std::vector<int> count(static_cast<std::size_t>(n + m), 0);
    for (const auto& r : inst.rows())
        for (const auto& t : r.terms) ++count[static_cast<std::size_t>(t.col)];
    mat.start.assign(static_cast<std::size_t>(n + m) + 1, 0);
    for (int j = 0; j < n; ++j) mat.start[j + 1] = mat.start[j] + count[j];
    for (int i = 0; i < m; ++i) mat.start[n + i + 1] = mat.start[n + i] + 1;
    mat.index.resize(static_cast<std::size_t>(mat.start.back()));
    mat.value.resize(mat.index.size());
    std::vector<int> fill(mat.start.begin(), mat.start.end() - 1);
    for (int i = 0; i < m; ++i) {
        for (const auto& t : inst.row(i).terms) {
            const int k = fill[t.col]++;
            mat.index[k] = i;
            mat.value[k] = t.coef;
        }
        const int k = fill[n + i]++;
        mat.index[k] = i;
        mat.value[k] = -1.0;
    }

    lp.cost.assign(static_cast<std::size_t>(n + m), 0.0);
    lp.lower.resize(static_cast<std::size_t>(n + m));
    lp.upper.resize(static_cast<std::size_t>(n + m));
    for (int j = 0; j < n; ++j) {
        const auto& c = inst.column(j);
        lp.cost[j] = c.cost;
        lp.lower[j] = c.lower;
        lp.upper[j] = c.upper;
    }
    for (int i = 0; i < m; ++i) {
        const auto& r = inst.row(i);
        double act_lo = 0.0, act_hi = 0.0;
        for (const auto& t : r.terms) {
            const auto& c = inst.column(t.col);
            act_lo += std::min(t.coef * c.lower, t.coef * c.upper);
            act_hi += std::max(t.coef * c.lower, t.coef * c.upper);
        }
        double lo = act_lo, hi = act_hi;
        if (r.sense != Sense::GreaterEqual) hi = std::min(hi, r.rhs);
        if (r.sense != Sense::LessEqual) lo = std::max(lo, r.rhs);
        lp.lower[n + i] = lo;
        lp.upper[n + i] = hi;
    }
    lp.offset = inst.objective_offset;
    return lp;
}

DualSimplex::DualSimplex(const LpProblem& lp) : lp_(lp), n_(lp.n), m_(lp.m), total_(lp.n + lp.m) {}

double DualSimplex::column_dot(int j, std::span<const double> v) const {
    const auto& a = lp_.matrix;
    double s = 0.0;
    for (int k = a.col_begin(j); k < a.col_end(j); ++k) s += a.value[k] * v[a.index[k]];
    return s;
}

void DualSimplex::add_column(int j, double scale, std::vector<double>& out) const {
    const auto& a = lp_.matrix;
    for (int k = a.col_begin(j); k < a.col_end(j); ++k) out[a.index[k]] += scale * a.value[k];
}

double DualSimplex::current_objective() const {
    double obj = lp_.offset;
    for (int j = 0; j < n_; ++j) obj += lp_.cost[j] * x_[j];
    return obj;
}

bool DualSimplex::refactor() {
    for (int attempt = 0; attempt < 4; ++attempt) {
        auto sing = factor_.factorize(lp_.matrix, head_);
        if (sing.empty()) return true;
        const std::size_t k = std::min(sing.positions.size(), sing.rows.size());
        if (k == 0) return false;
        for (std::size_t t = 0; t < k; ++t) {
            const int p = sing.positions[t];
            const int out = head_[p];
            const int in = n_ + sing.rows[t];
            pos_[out] = -1;
            at_upper_[out] = 0;
            head_[p] = in;
            pos_[in] = p;
            weights_[p] = 1.0;
        }
    }
    return false;
}

void DualSimplex::compute_primal() {
    work_.assign(static_cast<std::size_t>(m_), 0.0);
    for (int j = 0; j < total_; ++j) {
        if (pos_[j] >= 0) continue;
        x_[j] = at_upper_[j] ? up_[j] : lo_[j];
        if (x_[j] != 0.0) add_column(j, -x_[j], work_);
    }
    factor_.ftran(work_);
    for (int p = 0; p < m_; ++p) x_[head_[p]] = work_[p];
}

void DualSimplex::compute_duals() {
    work_.assign(static_cast<std::size_t>(m_), 0.0);
    for (int p = 0; p < m_; ++p) work_[p] = cost_[head_[p]];
    factor_.btran(work_);
    for (int j = 0; j < total_; ++j) d_[j] = pos_[j] >= 0 ? 0.0 : cost_[j] - column_dot(j, work_);
}

void DualSimplex::perturb_costs() {
    // Most columns have zero cost, so unperturbed ratio tests tie constantly.
    // Basic columns keep their cost so a warm basis stays dual feasible; the
    // shift depends only on the column index and bound status.
    cost_.assign(lp_.cost.begin(), lp_.cost.end());
    pert_shift_ = 0.0;
    for (int j = 0; j < total_; ++j) {
        if (pos_[j] >= 0 || up_[j] <= lo_[j]) continue;
        std::uint64_t h = (static_cast<std::uint64_t>(j) + 1) * 0x9E3779B97F4A7C15ULL;
        h ^= h >> 31;
        h *= 0xBF58476D1CE4E5B9ULL;
        h ^= h >> 29;
        const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
        const double xi = kPerturbation * (1.0 + std::abs(cost_[j])) * (1.0 + u);
        const double signed_xi = at_upper_[j] ? -xi : xi;
        cost_[j] += signed_xi;
        pert_shift_ += std::max(signed_xi * lo_[j], signed_xi * up_[j]);
    }
    perturbed_ = true;
}

void DualSimplex::fix_dual_infeasibilities() {
    for (int j = 0; j < total_; ++j) {
        if (pos_[j] >= 0 || up_[j] <= lo_[j]) continue;
        if (!at_upper_[j] && d_[j] < -kDualTol) at_upper_[j] = 1;
        else if (at_upper_[j] && d_[j] > kDualTol) at_upper_[j] = 0;
    }
}

int DualSimplex::price() const {
    int best = -1;
    double best_score = 0.0;
    for (int p = 0; p < m_; ++p) {
        const int j = head_[p];
        double infeas = 0.0;
        if (x_[j] < lo_[j] - kPrimalTol) infeas = lo_[j] - x_[j];
        else if (x_[j] > up_[j] + kPrimalTol) infeas = x_[j] - up_[j];
        else continue;
        const double score = infeas * infeas / weights_[p];
        if (score > best_score) {
            best_score = score;
            best = p;
        }
    }
    return best;
}

LpStatus DualSimplex::solve(std::span<const double> lower, std::span<const double> upper, const Basis* warm,
                            double cutoff, long iteration_limit) {
    iterations_ = 0;
    objective_ = std::numeric_limits<double>::infinity();
    lo_.assign(lp_.lower.begin(), lp_.lower.end());
    up_.assign(lp_.upper.begin(), lp_.upper.end());
    std::copy(lower.begin(), lower.end(), lo_.begin());
    std::copy(upper.begin(), upper.end(), up_.begin());
    for (int j = 0; j < total_; ++j) {
        if (lo_[j] > up_[j] + kPrimalTol * (1.0 + std::abs(up_[j]))) return LpStatus::Infeasible;
        if (lo_[j] > up_[j]) up_[j] = lo_[j];
    }
    x_.assign(static_cast<std::size_t>(total_), 0.0);
    d_.assign(static_cast<std::size_t>(total_), 0.0);
    pos_.assign(static_cast<std::size_t>(total_), -1);
    if (warm && static_cast<int>(warm->head.size()) == m_ && static_cast<int>(warm->upper.size()) == total_) {
        head_ = warm->head;
        at_upper_ = warm->upper;
        if (static_cast<int>(warm->weights.size()) == m_) weights_ = warm->weights;
        else weights_.assign(static_cast<std::size_t>(m_), 1.0);
    } else {
        head_.resize(static_cast<std::size_t>(m_));
        for (int i = 0; i < m_; ++i) head_[i] = n_ + i;
        at_upper_.assign(static_cast<std::size_t>(total_), 0);
        weights_.assign(static_cast<std::size_t>(m_), 1.0);
    }
    for (int p = 0; p < m_; ++p) pos_[head_[p]] = p;
    perturb_costs();

    auto restart = [&]() {
        if (!refactor()) throw NumericalError("basis factorization failed", factor_.pivot_ratio());
        for (auto& w : weights_)
            if (!std::isfinite(w)) w = 1.0;
        compute_duals();
        fix_dual_infeasibilities();
        compute_primal();
    };
    restart();
    bool fresh = true;
    int degenerate = 0;
    int stalls = 0;
    auto remove_perturbation = [&]() {
        cost_.assign(lp_.cost.begin(), lp_.cost.end());
        perturbed_ = false;
        restart();
        fresh = true;
        degenerate = 0;
    };

    rho_.resize(static_cast<std::size_t>(m_));
    alpha_row_.assign(static_cast<std::size_t>(total_), 0.0);
    struct Candidate {
        double ratio;
        int j;
        double abs_alpha;
    };
    std::vector<Candidate> cand;
    std::vector<int> flips;

    for (;;) {
        if (iterations_ >= iteration_limit) return LpStatus::IterationLimit;
        if (iterations_ % 64 == 63 && std::chrono::steady_clock::now() > deadline_) return LpStatus::IterationLimit;
        if (factor_.num_etas() >= kRefactorEvery) {
            restart();
            fresh = true;
        }
        if (perturbed_) {
            // lower bound on the true optimum from the perturbed dual
            double z = lp_.offset - pert_shift_;
            for (int j = 0; j < total_; ++j) z += cost_[j] * x_[j];
            if (z > cutoff + 1e-9 * (1.0 + std::abs(cutoff))) {
                objective_ = z;
                return LpStatus::Cutoff;
            }
        } else if (current_objective() > cutoff + 1e-9 * (1.0 + std::abs(cutoff))) {
            objective_ = current_objective();
            return LpStatus::Cutoff;
        }
        const bool bland = degenerate > kDegenerateLimit;
        int r = -1;
        if (bland) {
            int best_j = total_;
            for (int p = 0; p < m_; ++p) {
                const int j = head_[p];
                if ((x_[j] < lo_[j] - kPrimalTol || x_[j] > up_[j] + kPrimalTol) && j < best_j) {
                    best_j = j;
                    r = p;
                }
            }
        } else {
            r = price();
        }
        if (r < 0) {
            if (perturbed_) {
                remove_perturbation();
                continue;
            }
            if (!fresh) {
                restart();
                fresh = true;
                continue;
            }
            objective_ = current_objective();
            return LpStatus::Optimal;
        }

        const int leaving = head_[r];
        const bool below = x_[leaving] < lo_[leaving];
        const double s = below ? 1.0 : -1.0;
        const double delta0 = below ? lo_[leaving] - x_[leaving] : x_[leaving] - up_[leaving];

        std::fill(rho_.begin(), rho_.end(), 0.0);
        rho_[r] = 1.0;
        factor_.btran(rho_);

        cand.clear();
        for (int j = 0; j < total_; ++j) {
            if (pos_[j] >= 0) continue;
            const double a = column_dot(j, rho_);
            alpha_row_[j] = a;
            if (up_[j] <= lo_[j]) continue;
            const double sa = s * a;
            if (std::abs(sa) < kPivotTol) continue;
            if (!at_upper_[j] && sa < 0.0) cand.push_back({std::max(d_[j], 0.0) / -sa, j, std::abs(sa)});
            else if (at_upper_[j] && sa > 0.0) cand.push_back({std::max(-d_[j], 0.0) / sa, j, std::abs(sa)});
        }
        if (cand.empty()) {
            if (!fresh) {
                restart();
                fresh = true;
                continue;
            }
            return LpStatus::Infeasible;
        }
        std::sort(cand.begin(), cand.end(), [](const Candidate& a, const Candidate& b) {
            return a.ratio != b.ratio ? a.ratio < b.ratio : a.j < b.j;
        });

        // bound flipping: pass breakpoints while the dual slope stays positive
        std::size_t k = 0;
        double slope = delta0;
        flips.clear();
        for (; k < cand.size(); ++k) {
            const int j = cand[k].j;
            const double next = slope - cand[k].abs_alpha * (up_[j] - lo_[j]);
            if (next <= kPrimalTol) break;
            if (k + 1 == cand.size()) {
                k = cand.size();
                break;
            }
            slope = next;
            flips.push_back(j);
        }
        if (k == cand.size()) {
            if (!fresh) {
                restart();
                fresh = true;
                continue;
            }
            return LpStatus::Infeasible;
        }

        // Harris-style choice among the remaining breakpoints
        std::size_t chosen = k;
        if (bland) {
            const double limit = cand[k].ratio + 1e-12;
            for (std::size_t t = k + 1; t < cand.size() && cand[t].ratio <= limit; ++t)
                if (cand[t].j < cand[chosen].j) chosen = t;
        } else {
            double bound = std::numeric_limits<double>::infinity();
            for (std::size_t t = k; t < cand.size(); ++t) {
                const double dj = std::abs(d_[cand[t].j]);
                bound = std::min(bound, (dj + kDualTol) / cand[t].abs_alpha);
                if (cand[t].ratio > bound) break;
            }
            for (std::size_t t = k + 1; t < cand.size() && cand[t].ratio <= bound; ++t)
                if (cand[t].abs_alpha > cand[chosen].abs_alpha) chosen = t;
        }
        const int entering = cand[chosen].j;
        const double theta_d = cand[chosen].ratio;

        alpha_col_.assign(static_cast<std::size_t>(m_), 0.0);
        add_column(entering, 1.0, alpha_col_);
        factor_.ftran(alpha_col_);
        const double pivot = alpha_col_[r];
        const double check = alpha_row_[entering];
        if (std::abs(pivot) < 1e-11 || std::abs(pivot - check) > 1e-7 * (1.0 + std::abs(pivot))) {
            if (!fresh) {
                restart();
                fresh = true;
                continue;
            }
            if (++stalls > 3) throw NumericalError("unstable pivot in dual simplex", factor_.pivot_ratio());
        }

        tau_ = rho_;
        factor_.ftran(tau_);

        // duals
        for (int j = 0; j < total_; ++j)
            if (pos_[j] < 0) d_[j] += s * theta_d * alpha_row_[j];
        d_[entering] = 0.0;
        d_[leaving] = s * theta_d;

        // bound flips
        if (!flips.empty()) {
            work_.assign(static_cast<std::size_t>(m_), 0.0);
            for (int j : flips) {
                const double delta = at_upper_[j] ? lo_[j] - up_[j] : up_[j] - lo_[j];
                at_upper_[j] = !at_upper_[j];
                x_[j] = at_upper_[j] ? up_[j] : lo_[j];
                add_column(j, delta, work_);
            }
            factor_.ftran(work_);
            for (int p = 0; p < m_; ++p) x_[head_[p]] -= work_[p];
        }

        // primal step
        const double target = below ? lo_[leaving] : up_[leaving];
        const double theta_p = (x_[leaving] - target) / pivot;
        for (int p = 0; p < m_; ++p)
            if (alpha_col_[p] != 0.0) x_[head_[p]] -= theta_p * alpha_col_[p];
        x_[entering] += theta_p;
        x_[leaving] = target;

        // dual steepest-edge weights
        const double wr = weights_[r];
        for (int p = 0; p < m_; ++p) {
            if (p == r || alpha_col_[p] == 0.0) continue;
            const double ratio = alpha_col_[p] / pivot;
            weights_[p] = std::clamp(weights_[p] + ratio * (ratio * wr - 2.0 * tau_[p]), kMinWeight, kMaxWeight);
        }
        weights_[r] = std::clamp(wr / (pivot * pivot), kMinWeight, kMaxWeight);

        head_[r] = entering;
        pos_[entering] = r;
        pos_[leaving] = -1;
        at_upper_[leaving] = below ? 0 : 1;
        factor_.add_eta(r, alpha_col_);

        ++iterations_;
        fresh = false;
        if (theta_d < 1e-12) ++degenerate;
        else degenerate = 0;
    }
}

Basis DualSimplex::basis() const { return Basis{head_, at_upper_, weights_}; }

}  // namespace cfx::milp::detail
