#include "basis_factor.hpp"

#include <algorithm>
#include <cmath>

namespace cfx::milp::detail {

namespace {
constexpr double kSingletonTol = 1e-11;
constexpr double kKernelTol = 1e-10;
constexpr double kEtaDrop = 1e-14;
}  // namespace

BasisFactor::Singularity BasisFactor::factorize(const CscMatrix& mat, std::span<const int> head) {
    m_ = mat.rows;
    const int m = m_;
    eta_pos_.clear();
    eta_pivot_.clear();
    eta_start_.assign(1, 0);
    eta_index_.clear();
    eta_value_.clear();

    bstart_.assign(static_cast<std::size_t>(m) + 1, 0);
    brow_.clear();
    bval_.clear();
    for (int p = 0; p < m; ++p) {
        const int j = head[static_cast<std::size_t>(p)];
        for (int k = mat.col_begin(j); k < mat.col_end(j); ++k) {
            brow_.push_back(mat.index[static_cast<std::size_t>(k)]);
            bval_.push_back(mat.value[static_cast<std::size_t>(k)]);
        }
        bstart_[static_cast<std::size_t>(p) + 1] = static_cast<int>(brow_.size());
    }

    // row-wise adjacency: row -> positions
    std::vector<int> rstart(static_cast<std::size_t>(m) + 1, 0), rpos(brow_.size());
    for (int r : brow_) ++rstart[static_cast<std::size_t>(r) + 1];
    for (int i = 0; i < m; ++i) rstart[static_cast<std::size_t>(i) + 1] += rstart[static_cast<std::size_t>(i)];
    {
        std::vector<int> fill(rstart.begin(), rstart.end() - 1);
        for (int p = 0; p < m; ++p)
            for (int k = bstart_[p]; k < bstart_[p + 1]; ++k) rpos[static_cast<std::size_t>(fill[brow_[k]]++)] = p;
    }

    std::vector<int> col_count(static_cast<std::size_t>(m)), row_count(static_cast<std::size_t>(m));
    for (int p = 0; p < m; ++p) col_count[p] = bstart_[p + 1] - bstart_[p];
    for (int i = 0; i < m; ++i) row_count[i] = rstart[i + 1] - rstart[i];
    std::vector<char> row_active(static_cast<std::size_t>(m), 1), pos_active(static_cast<std::size_t>(m), 1);

    piv_row_.clear();
    piv_pos_.clear();
    piv_val_.clear();
    row_phase_.assign(static_cast<std::size_t>(m), Phase::Kernel);

    // column singletons
    std::vector<int> queue;
    for (int p = m - 1; p >= 0; --p)
        if (col_count[p] == 1) queue.push_back(p);
    while (!queue.empty()) {
        const int p = queue.back();
        queue.pop_back();
        if (!pos_active[p] || col_count[p] != 1) continue;
        int r = -1;
        double val = 0.0;
        for (int k = bstart_[p]; k < bstart_[p + 1]; ++k)
            if (row_active[brow_[k]]) {
                r = brow_[k];
                val = bval_[k];
                break;
            }
        if (r < 0 || std::abs(val) < kSingletonTol) continue;
        piv_row_.push_back(r);
        piv_pos_.push_back(p);
        piv_val_.push_back(val);
        row_active[r] = 0;
        pos_active[p] = 0;
        row_phase_[r] = Phase::Upper;
        for (int k = rstart[r]; k < rstart[r + 1]; ++k) {
            const int q = rpos[k];
            if (!pos_active[q]) continue;
            if (--col_count[q] == 1) queue.push_back(q);
        }
    }
    n_upper_ = static_cast<int>(piv_row_.size());

    // row singletons, counted against the positions still active
    for (int i = 0; i < m; ++i) {
        if (!row_active[i]) continue;
        int c = 0;
        for (int k = rstart[i]; k < rstart[i + 1]; ++k) c += pos_active[rpos[k]];
        row_count[i] = c;
    }
    queue.clear();
    for (int i = m - 1; i >= 0; --i)
        if (row_active[i] && row_count[i] == 1) queue.push_back(i);
    while (!queue.empty()) {
        const int r = queue.back();
        queue.pop_back();
        if (!row_active[r] || row_count[r] != 1) continue;
        int p = -1;
        for (int k = rstart[r]; k < rstart[r + 1]; ++k)
            if (pos_active[rpos[k]]) {
                p = rpos[k];
                break;
            }
        if (p < 0) continue;
        double val = 0.0;
        for (int k = bstart_[p]; k < bstart_[p + 1]; ++k)
            if (brow_[k] == r) val = bval_[k];
        if (std::abs(val) < kSingletonTol) continue;
        piv_row_.push_back(r);
        piv_pos_.push_back(p);
        piv_val_.push_back(val);
        row_active[r] = 0;
        pos_active[p] = 0;
        row_phase_[r] = Phase::Lower;
        for (int k = bstart_[p]; k < bstart_[p + 1]; ++k) {
            const int i = brow_[k];
            if (!row_active[i]) continue;
            if (--row_count[i] == 1) queue.push_back(i);
        }
    }
    n_lower_ = static_cast<int>(piv_row_.size()) - n_upper_;

    // dense kernel
    kernel_rows_.clear();
    kernel_pos_.clear();
    for (int i = 0; i < m; ++i)
        if (row_active[i]) kernel_rows_.push_back(i);
    for (int p = 0; p < m; ++p)
        if (pos_active[p]) kernel_pos_.push_back(p);
    kernel_n_ = static_cast<int>(kernel_rows_.size());
    const int kn = kernel_n_;
    Singularity sing;
    if (kn != static_cast<int>(kernel_pos_.size())) {
        // cannot happen: every pivot removes exactly one row and one position
        sing.positions = kernel_pos_;
        sing.rows = kernel_rows_;
        return sing;
    }
    std::vector<int> row_slot(static_cast<std::size_t>(m), -1);
    for (int i = 0; i < kn; ++i) row_slot[kernel_rows_[i]] = i;
    kernel_lu_.assign(static_cast<std::size_t>(kn) * kn, 0.0);
    auto at = [&](int i, int j) -> double& { return kernel_lu_[static_cast<std::size_t>(i) * kn + j]; };
    for (int j = 0; j < kn; ++j) {
        const int p = kernel_pos_[j];
        for (int k = bstart_[p]; k < bstart_[p + 1]; ++k) {
            const int slot = row_slot[brow_[k]];
            if (slot >= 0) at(slot, j) = bval_[k];
        }
    }
    kernel_perm_.resize(static_cast<std::size_t>(kn));
    for (int i = 0; i < kn; ++i) kernel_perm_[i] = i;
    int next = 0;  // number of pivoted rows so far
    std::vector<int> dependent_cols;
    for (int j = 0; j < kn; ++j) {
        int best = -1;
        double best_abs = kKernelTol;
        for (int i = next; i < kn; ++i) {
            const double a = std::abs(at(i, j));
            if (a > best_abs) {
                best_abs = a;
                best = i;
            }
        }
        if (best < 0) {
            dependent_cols.push_back(j);
            continue;
        }
        if (!dependent_cols.empty()) continue;  // factorization is void; just collect
        if (best != next) {
            for (int c = 0; c < kn; ++c) std::swap(at(best, c), at(next, c));
            std::swap(kernel_perm_[best], kernel_perm_[next]);
        }
        const double piv = at(next, j);
        for (int i = next + 1; i < kn; ++i) {
            double& lij = at(i, j);
            if (lij == 0.0) continue;
            lij /= piv;
            const double f = lij;
            for (int c = j + 1; c < kn; ++c) at(i, c) -= f * at(next, c);
        }
        ++next;
    }
    if (!dependent_cols.empty()) {
        // Repeat the elimination without the dependent columns to learn
        // which rows stay uncovered.
        std::vector<char> row_used(static_cast<std::size_t>(kn), 0);
        std::vector<double> dense(static_cast<std::size_t>(kn) * kn, 0.0);
        auto d = [&](int i, int j) -> double& { return dense[static_cast<std::size_t>(i) * kn + j]; };
        for (int j = 0; j < kn; ++j) {
            const int p = kernel_pos_[j];
            for (int k = bstart_[p]; k < bstart_[p + 1]; ++k) {
                const int slot = row_slot[brow_[k]];
                if (slot >= 0) d(slot, j) = bval_[k];
            }
        }
        for (int j = 0; j < kn; ++j) {
            int best = -1;
            double best_abs = kKernelTol;
            for (int i = 0; i < kn; ++i) {
                if (row_used[i]) continue;
                const double a = std::abs(d(i, j));
                if (a > best_abs) {
                    best_abs = a;
                    best = i;
                }
            }
            if (best < 0) {
                sing.positions.push_back(kernel_pos_[j]);
                continue;
            }
            row_used[best] = 1;
            for (int i = 0; i < kn; ++i) {
                if (row_used[i] || d(i, j) == 0.0) continue;
                const double f = d(i, j) / d(best, j);
                for (int c = j + 1; c < kn; ++c) d(i, c) -= f * d(best, c);
                d(i, j) = 0.0;
            }
        }
        for (int i = 0; i < kn; ++i)
            if (!row_used[i]) sing.rows.push_back(kernel_rows_[i]);
        return sing;
    }
    // row-wise sparse copies of L (unit diagonal, strictly lower) and U
    l_start_.assign(1, 0);
    l_col_.clear();
    l_val_.clear();
    u_start_.assign(1, 0);
    u_col_.clear();
    u_val_.clear();
    u_diag_.resize(static_cast<std::size_t>(kn));
    for (int i = 0; i < kn; ++i) {
        for (int k = 0; k < i; ++k)
            if (const double v = at(i, k); v != 0.0) {
                l_col_.push_back(k);
                l_val_.push_back(v);
            }
        l_start_.push_back(static_cast<int>(l_col_.size()));
        u_diag_[i] = at(i, i);
        for (int k = i + 1; k < kn; ++k)
            if (const double v = at(i, k); v != 0.0) {
                u_col_.push_back(k);
                u_val_.push_back(v);
            }
        u_start_.push_back(static_cast<int>(u_col_.size()));
    }
    kernel_lu_.clear();
    kernel_lu_.shrink_to_fit();
    work_.assign(static_cast<std::size_t>(std::max(kn, 1)), 0.0);
    work2_.assign(static_cast<std::size_t>(std::max(kn, 1)), 0.0);
    return sing;
}

void BasisFactor::solve_kernel(std::vector<double>& w) const {
    // w: row-indexed in; writes kernel solution into work_ (indexed by kernel column)
    const int kn = kernel_n_;
    for (int i = 0; i < kn; ++i) {
        double acc = w[kernel_rows_[kernel_perm_[i]]];
        for (int e = l_start_[i]; e < l_start_[i + 1]; ++e) acc -= l_val_[e] * work_[l_col_[e]];
        work_[i] = acc;
    }
    for (int i = kn - 1; i >= 0; --i) {
        double acc = work_[i];
        for (int e = u_start_[i]; e < u_start_[i + 1]; ++e) acc -= u_val_[e] * work_[u_col_[e]];
        work_[i] = acc / u_diag_[i];
    }
}

void BasisFactor::solve_kernel_transposed(std::vector<double>& s) const {
    // s: kernel-column-indexed in work2_; result (indexed by kernel slot in
    // permuted order) mapped back to rows by the caller
    const int kn = kernel_n_;
    // U^T z = s
    for (int i = 0; i < kn; ++i) {
        const double z = s[i] / u_diag_[i];
        s[i] = z;
        if (z == 0.0) continue;
        for (int e = u_start_[i]; e < u_start_[i + 1]; ++e) s[u_col_[e]] -= u_val_[e] * z;
    }
    // L^T t = z
    for (int i = kn - 1; i >= 0; --i) {
        const double t = s[i];
        if (t == 0.0) continue;
        for (int e = l_start_[i]; e < l_start_[i + 1]; ++e) s[l_col_[e]] -= l_val_[e] * t;
    }
}

void BasisFactor::ftran(std::vector<double>& w) const {
    const int m = m_;
    std::vector<double> out(static_cast<std::size_t>(m), 0.0);
    // lower block: forward
    for (int k = n_upper_; k < n_upper_ + n_lower_; ++k) {
        const int r = piv_row_[k], p = piv_pos_[k];
        const double v = w[r] / piv_val_[k];
        out[p] = v;
        if (v == 0.0) continue;
        for (int e = bstart_[p]; e < bstart_[p + 1]; ++e)
            if (brow_[e] != r) w[brow_[e]] -= bval_[e] * v;
    }
    // kernel
    if (kernel_n_ > 0) {
        solve_kernel(w);
        for (int j = 0; j < kernel_n_; ++j) {
            const int p = kernel_pos_[j];
            const double v = work_[j];
            out[p] = v;
            if (v == 0.0) continue;
            for (int e = bstart_[p]; e < bstart_[p + 1]; ++e)
                if (row_phase_[brow_[e]] == Phase::Upper) w[brow_[e]] -= bval_[e] * v;
        }
    }
    // upper block: backward
    for (int k = n_upper_ - 1; k >= 0; --k) {
        const int r = piv_row_[k], p = piv_pos_[k];
        const double v = w[r] / piv_val_[k];
        out[p] = v;
        if (v == 0.0) continue;
        for (int e = bstart_[p]; e < bstart_[p + 1]; ++e)
            if (brow_[e] != r) w[brow_[e]] -= bval_[e] * v;
    }
    // etas
    const int ne = num_etas();
    for (int t = 0; t < ne; ++t) {
        const int p = eta_pos_[t];
        const double xp = out[p] / eta_pivot_[t];
        out[p] = xp;
        if (xp == 0.0) continue;
        for (int e = eta_start_[t]; e < eta_start_[t + 1]; ++e) out[eta_index_[e]] -= eta_value_[e] * xp;
    }
    w.swap(out);
}

void BasisFactor::btran(std::vector<double>& c) const {
    const int m = m_;
    for (int t = num_etas() - 1; t >= 0; --t) {
        const int p = eta_pos_[t];
        double acc = c[p];
        for (int e = eta_start_[t]; e < eta_start_[t + 1]; ++e) acc -= eta_value_[e] * c[eta_index_[e]];
        c[p] = acc / eta_pivot_[t];
    }
    std::vector<double> v(static_cast<std::size_t>(m), 0.0);
    // upper block: forward
    for (int k = 0; k < n_upper_; ++k) {
        const int r = piv_row_[k], p = piv_pos_[k];
        double acc = c[p];
        for (int e = bstart_[p]; e < bstart_[p + 1]; ++e)
            if (brow_[e] != r) acc -= bval_[e] * v[brow_[e]];
        v[r] = acc / piv_val_[k];
    }
    // kernel
    if (kernel_n_ > 0) {
        std::vector<double>& s = work2_;
        for (int j = 0; j < kernel_n_; ++j) {
            const int p = kernel_pos_[j];
            double acc = c[p];
            for (int e = bstart_[p]; e < bstart_[p + 1]; ++e)
                if (row_phase_[brow_[e]] == Phase::Upper) acc -= bval_[e] * v[brow_[e]];
            s[j] = acc;
        }
        solve_kernel_transposed(s);
        for (int i = 0; i < kernel_n_; ++i) v[kernel_rows_[kernel_perm_[i]]] = s[i];
    }
    // lower block: backward
    for (int k = n_upper_ + n_lower_ - 1; k >= n_upper_; --k) {
        const int r = piv_row_[k], p = piv_pos_[k];
        double acc = c[p];
        for (int e = bstart_[p]; e < bstart_[p + 1]; ++e)
            if (brow_[e] != r) acc -= bval_[e] * v[brow_[e]];
        v[r] = acc / piv_val_[k];
    }
    c.swap(v);
}

double BasisFactor::pivot_ratio() const {
    double lo = 0.0, hi = 0.0;
    auto take = [&](double v) {
        v = std::abs(v);
        if (lo == 0.0 || v < lo) lo = v;
        hi = std::max(hi, v);
    };
    for (double v : piv_val_) take(v);
    for (int i = 0; i < kernel_n_; ++i) take(u_diag_[static_cast<std::size_t>(i)]);
    return lo > 0.0 ? hi / lo : 0.0;
}

void BasisFactor::add_eta(int pos, std::span<const double> alpha) {
    eta_pos_.push_back(pos);
    eta_pivot_.push_back(alpha[static_cast<std::size_t>(pos)]);
    for (int i = 0; i < m_; ++i) {
        if (i == pos) continue;
        const double a = alpha[static_cast<std::size_t>(i)];
        if (std::abs(a) > kEtaDrop) {
            eta_index_.push_back(i);
            eta_value_.push_back(a);
        }
    }
    eta_start_.push_back(static_cast<int>(eta_index_.size()));
}

}  // namespace cfx::milp::detail
