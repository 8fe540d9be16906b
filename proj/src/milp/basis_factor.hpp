#pragma once

#include <span>
#include <vector>

namespace cfx::milp::detail {

/// Column-compressed sparse matrix.
struct CscMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<int> start{0};
    std::vector<int> index;
    std::vector<double> value;

    int col_begin(int j) const { return start[static_cast<std::size_t>(j)]; }
    int col_end(int j) const { return start[static_cast<std::size_t>(j) + 1]; }
};

/// LU factorization of a simplex basis with product-form updates.
///
/// The basis columns are first permuted to block triangular form by peeling
/// column singletons (upper part) and then row singletons (lower part); what
/// remains is factorized densely with partial pivoting. Formulation matrices
/// here are dominated by unit slacks and short rows, so the dense kernel stays
/// small.
class BasisFactor {
public:
    struct Singularity {
        std::vector<int> positions;  // dependent basis positions
        std::vector<int> rows;       // rows left without a pivot
        bool empty() const { return positions.empty(); }
    };

    /// Factorizes the basis given by `head` (basis position -> column of M).
    Singularity factorize(const CscMatrix& m, std::span<const int> head);

    /// In place: input indexed by row, output indexed by basis position.
    void ftran(std::vector<double>& v) const;
    /// In place: input indexed by basis position, output indexed by row.
    void btran(std::vector<double>& v) const;

    /// Records the basis change at `pos` with the ftran'ed entering column.
    void add_eta(int pos, std::span<const double> alpha);
    int num_etas() const { return static_cast<int>(eta_pos_.size()); }
    int kernel_size() const { return kernel_n_; }
    /// max |pivot| / min |pivot| of the last factorization, a cheap
    /// conditioning indicator.
    double pivot_ratio() const;

private:
    enum class Phase : unsigned char { Upper, Lower, Kernel };

    void solve_kernel(std::vector<double>& rhs) const;
    void solve_kernel_transposed(std::vector<double>& rhs) const;

    int m_ = 0;
    // pivots in order; the first n_upper_ come from column singletons,
    // the next n_lower_ from row singletons
    std::vector<int> piv_row_, piv_pos_;
    std::vector<double> piv_val_;
    int n_upper_ = 0, n_lower_ = 0;
    std::vector<Phase> row_phase_;

    // basis columns copied per position
    std::vector<int> bstart_, brow_;
    std::vector<double> bval_;

    // dense kernel P*D = L*U
    int kernel_n_ = 0;
    std::vector<int> kernel_rows_, kernel_pos_;
    std::vector<int> kernel_perm_;
    std::vector<double> kernel_lu_;  // dense, only during factorize
    std::vector<int> l_start_, l_col_, u_start_, u_col_;
    std::vector<double> l_val_, u_val_, u_diag_;
    mutable std::vector<double> work_, work2_;

    // product-form etas
    std::vector<int> eta_pos_;
    std::vector<double> eta_pivot_;
    std::vector<int> eta_start_{0};
    std::vector<int> eta_index_;
    std::vector<double> eta_value_;
};

}  // namespace cfx::milp::detail
