#include "cfx/milp/solver.hpp"

#include "cfx/parallel.hpp"
#include "dual_simplex.hpp"

#include <omp.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <exception>
#include <memory>
#include <set>
#include <tuple>

namespace cfx::milp {

std::string_view to_string(Status s) {
    switch (s) {
        case Status::Optimal: return "optimal";
        case Status::Infeasible: return "infeasible";
        case Status::LimitReached: return "limit-reached";
    }
    return "unknown";
}

Instance linearize_quadratic(const Instance& inst, int segments, double* tolerance) {
    if (segments < 1) throw std::invalid_argument("pwl segments must be >= 1");
    Instance out;
    out.objective_offset = inst.objective_offset;
    for (const auto& c : inst.columns()) {
        Column copy = c;
        copy.quad = 0.0;
        out.add_column(std::move(copy));
    }
    for (const auto& r : inst.rows()) out.add_row(r.name, r.terms, r.sense, r.rhs);
    double tol = 0.0;
    for (int j = 0; j < static_cast<int>(inst.num_columns()); ++j) {
        const auto& c = inst.column(j);
        if (c.quad == 0.0) continue;
        const double q = c.quad, l = c.lower;
        out.objective_offset += q * l * l;
        if (c.upper <= c.lower) continue;
        const double h = (c.upper - c.lower) / segments;
        tol += q * h * h / 4.0;
        std::vector<Term> terms{{j, 1.0}};
        for (int k = 0; k < segments; ++k) {
            Column seg;
            seg.name = c.name + "#pwl" + std::to_string(k);
            seg.lower = 0.0;
            seg.upper = h;
            seg.cost = q * (2.0 * l + (2.0 * k + 1.0) * h);
            terms.push_back({out.add_column(std::move(seg)), -1.0});
        }
        out.add_row(c.name + "#pwl", std::move(terms), Sense::Equal, l);
    }
    if (tolerance) *tolerance = tol;
    return out;
}

double surrogate_objective(const Instance& inst, std::span<const double> x, int segments) {
    double obj = inst.objective_offset;
    for (std::size_t j = 0; j < inst.num_columns(); ++j) {
        const auto& c = inst.columns()[j];
        obj += c.cost * x[j];
        if (c.quad == 0.0) continue;
        if (c.upper <= c.lower) {
            obj += c.quad * c.lower * c.lower;
            continue;
        }
        const double h = (c.upper - c.lower) / segments;
        const double v = std::clamp(x[j], c.lower, c.upper);
        const int k = std::min(static_cast<int>((v - c.lower) / h), segments - 1);
        const double b0 = c.lower + k * h, b1 = b0 + h;
        obj += c.quad * (b0 * b0 + (b0 + b1) * (v - b0));
    }
    return obj;
}

namespace {

using Clock = std::chrono::steady_clock;

struct BoundChange {
    int col;
    double lower, upper;
};

struct Node {
    std::vector<BoundChange> changes;  // cumulative from the root
    double bound = 0.0;
    long seq = 0;
    std::shared_ptr<const detail::Basis> basis;
    // last branching, for pseudocosts
    int branch_col = -1;
    bool branch_up = false;
    double branch_dist = 0.0;
};

struct NodeResult {
    detail::LpStatus status = detail::LpStatus::Infeasible;
    double objective = 0.0;
    std::vector<double> x;  // structural values
    std::shared_ptr<const detail::Basis> basis;
    long iterations = 0;
    std::exception_ptr error;
};

class Search {
public:
    Search(const Instance& inst, const SolverConfig& cfg)
        : orig_(inst), cfg_(cfg), lin_(linearize_quadratic(inst, cfg.pwl_segments, &pwl_tol_)),
          lp_(detail::make_lp(lin_)), n_(static_cast<int>(lin_.num_columns())),
          threads_(std::max(1, resolve_threads(cfg.threads))) {
        root_lo_.resize(static_cast<std::size_t>(n_));
        root_up_.resize(static_cast<std::size_t>(n_));
        for (int j = 0; j < n_; ++j) {
            root_lo_[j] = lin_.column(j).lower;
            root_up_[j] = lin_.column(j).upper;
            if (lin_.column(j).integer) {
                root_lo_[j] = std::ceil(root_lo_[j] - cfg.int_tol);
                root_up_[j] = std::floor(root_up_[j] + cfg.int_tol);
            }
        }
        for (int t = 0; t < threads_; ++t) workers_.push_back(std::make_unique<detail::DualSimplex>(lp_));
        iteration_limit_ = 200000 + 50L * (lp_.n + lp_.m);
        for (auto& v : pc_sum_) v.assign(static_cast<std::size_t>(n_), 0.0);
        for (auto& v : pc_count_) v.assign(static_cast<std::size_t>(n_), 0);
    }

    Solution run(bool relax, std::span<const std::vector<double>> starts) {
        start_ = Clock::now();
        if (std::isfinite(cfg_.time_limit)) {
            const auto deadline = start_ + std::chrono::duration_cast<Clock::duration>(
                                               std::chrono::duration<double>(cfg_.time_limit));
            for (auto& w : workers_) w->set_deadline(deadline);
        }
        Solution sol;
        sol.stats.pwl_tolerance = pwl_tol_;
        for (const auto& s : starts) offer_start(s);

        Node root;
        root.seq = next_seq_++;
        NodeResult rr = solve_node(root, *workers_[0], incumbent_cutoff());
        if (rr.error) std::rethrow_exception(rr.error);
        lp_iterations_ += rr.iterations;
        ++nodes_;
        sol.stats.root_bound = rr.status == detail::LpStatus::Optimal ? rr.objective : inc_obj_;

        if (relax) {
            sol.stats.nodes = nodes_;
            sol.stats.lp_iterations = lp_iterations_;
            if (rr.status == detail::LpStatus::Optimal) {
                sol.status = Status::Optimal;
                sol.values.assign(rr.x.begin(), rr.x.begin() + static_cast<long>(orig_.num_columns()));
                sol.objective = rr.objective;
                sol.exact_objective = orig_.evaluate(sol.values);
                sol.stats.best_bound = rr.objective;
            } else if (rr.status == detail::LpStatus::IterationLimit) {
                sol.status = Status::LimitReached;
            }
            sol.stats.wall_time = elapsed();
            return sol;
        }

        bool limited = false;
        if (rr.status == detail::LpStatus::Optimal) {
            if (cfg_.root_dive && branch_column(rr.x) >= 0) dive(rr, std::max(2000L, 4 * rr.iterations));
            process(root, rr);
        } else if (rr.status == detail::LpStatus::IterationLimit) {
            limited = true;
        }

        std::vector<Node> batch;
        std::vector<NodeResult> results;
        while (!queue_empty()) {
            if (elapsed() > cfg_.time_limit || nodes_ >= cfg_.node_limit) {
                limited = true;
                break;
            }
            batch.clear();
            const double cutoff = incumbent_cutoff();
            while (!queue_empty() && static_cast<int>(batch.size()) < cfg_.node_batch) {
                Node nd = pop();
                if (nd.bound >= cutoff) continue;
                batch.push_back(std::move(nd));
            }
            if (batch.empty()) continue;
            results.assign(batch.size(), NodeResult{});
            const int nb = static_cast<int>(batch.size());
#pragma omp parallel for num_threads(threads_) schedule(dynamic, 1)
            for (int i = 0; i < nb; ++i) {
                const int tid = omp_get_thread_num();
                results[i] = solve_node(batch[i], *workers_[tid], cutoff);
            }
            for (int i = 0; i < nb; ++i) {
                if (results[i].error) std::rethrow_exception(results[i].error);
                lp_iterations_ += results[i].iterations;
                ++nodes_;
                if (results[i].status == detail::LpStatus::Optimal) record_pseudocost(batch[i], results[i].objective);
                if (results[i].status == detail::LpStatus::IterationLimit) {
                    limited = true;
                    limit_bound_ = std::min(limit_bound_, batch[i].bound);
                    continue;
                }
                if (results[i].status != detail::LpStatus::Optimal) continue;
                process(batch[i], results[i]);
            }
        }

        double best_bound = inc_obj_;
        for (const auto& nd : open_) best_bound = std::min(best_bound, nd.bound);
        best_bound = std::min(best_bound, limit_bound_);
        for (const auto& nd : dfs_) best_bound = std::min(best_bound, nd.bound);

        sol.stats.nodes = nodes_;
        sol.stats.lp_iterations = lp_iterations_;
        sol.stats.wall_time = elapsed();
        if (has_inc_) {
            sol.values = inc_;
            sol.objective = inc_obj_;
            sol.exact_objective = orig_.evaluate(sol.values);
        }
        if (limited && (open_size() > 0 || limit_bound_ < inc_obj_ - cfg_.abs_gap)) {
            sol.status = Status::LimitReached;
            sol.stats.best_bound = best_bound;
        } else {
            sol.status = has_inc_ ? Status::Optimal : Status::Infeasible;
            sol.stats.best_bound = has_inc_ ? inc_obj_ : std::numeric_limits<double>::infinity();
        }
        sol.stats.gap = has_inc_ ? std::max(0.0, inc_obj_ - sol.stats.best_bound)
                                 : std::numeric_limits<double>::infinity();
        return sol;
    }

private:
    double elapsed() const { return std::chrono::duration<double>(Clock::now() - start_).count(); }

    double incumbent_cutoff() const {
        return has_inc_ ? inc_obj_ - cfg_.abs_gap : std::numeric_limits<double>::infinity();
    }

    std::size_t open_size() const { return open_.size() + dfs_.size(); }

    // best-bound order; depth-first nodes live in dfs_ instead
    struct NodeLess {
        bool operator()(const Node& a, const Node& b) const {
            return std::tie(a.bound, a.seq) < std::tie(b.bound, b.seq);
        }
    };

    void push(Node nd) {
        if (cfg_.node_order == NodeOrder::DepthFirst) dfs_.push_back(std::move(nd));
        else open_.insert(std::move(nd));
    }

    Node pop() {
        if (cfg_.node_order == NodeOrder::DepthFirst) {
            Node nd = std::move(dfs_.back());
            dfs_.pop_back();
            return nd;
        }
        return std::move(open_.extract(open_.begin()).value());
    }

    bool queue_empty() const { return open_.empty() && dfs_.empty(); }

    NodeResult solve_node(const Node& nd, detail::DualSimplex& lp, double cutoff) {
        NodeResult res;
        try {
            std::vector<double> lo = root_lo_, up = root_up_;
            for (const auto& ch : nd.changes) {
                lo[ch.col] = ch.lower;
                up[ch.col] = ch.upper;
            }
            res.status = lp.solve(lo, up, nd.basis.get(), cutoff, iteration_limit_);
            res.iterations = lp.iterations();
            if (res.status == detail::LpStatus::IterationLimit && nd.basis) {
                res.status = lp.solve(lo, up, nullptr, cutoff, 2 * iteration_limit_);
                res.iterations += lp.iterations();
            }
            if (res.status == detail::LpStatus::Optimal) {
                res.objective = lp.objective();
                res.x.assign(lp.values().begin(), lp.values().begin() + n_);
                res.basis = std::make_shared<const detail::Basis>(lp.basis());
            }
        } catch (...) {
            res.error = std::current_exception();
        }
        return res;
    }

    void record_pseudocost(const Node& nd, double objective) {
        if (nd.branch_col < 0 || nd.branch_dist <= 0.0) return;
        const int side = nd.branch_up ? 1 : 0;
        const double gain = std::max(0.0, objective - nd.bound) / nd.branch_dist;
        pc_sum_[side][nd.branch_col] += gain;
        ++pc_count_[side][nd.branch_col];
        pc_total_[side] += gain;
        ++pc_total_count_[side];
    }

    double pseudocost(int side, int j) const {
        if (pc_count_[side][j] > 0) return pc_sum_[side][j] / pc_count_[side][j];
        return pc_total_count_[side] > 0 ? pc_total_[side] / pc_total_count_[side] : 1.0;
    }

    // Highest priority, then the best pseudocost product (most fractional
    // while nothing is recorded), then lowest index.
    int branch_column(std::span<const double> x) const {
        int best = -1;
        int best_prio = 0;
        double best_score = 0.0;
        for (int j = 0; j < n_; ++j) {
            const auto& c = lin_.column(j);
            if (!c.integer) continue;
            const double frac = x[j] - std::floor(x[j]);
            if (frac <= cfg_.int_tol || frac >= 1.0 - cfg_.int_tol) continue;
            const double score =
                std::max(pseudocost(0, j) * frac, 1e-6) * std::max(pseudocost(1, j) * (1.0 - frac), 1e-6);
            if (best < 0 || c.branch_priority > best_prio || (c.branch_priority == best_prio && score > best_score)) {
                best = j;
                best_prio = c.branch_priority;
                best_score = score;
            }
        }
        return best;
    }

    void accept(std::vector<double> x, double obj) {
        if (has_inc_ && obj >= inc_obj_) return;
        for (int j = 0; j < n_; ++j)
            if (lin_.column(j).integer) x[j] = std::round(x[j]);
        x.resize(orig_.num_columns());
        inc_ = std::move(x);
        inc_obj_ = obj;
        has_inc_ = true;
    }

    void offer_start(const std::vector<double>& x) {
        if (x.size() != orig_.num_columns()) return;
        for (std::size_t j = 0; j < x.size(); ++j) {
            const auto& c = orig_.columns()[j];
            if (c.integer && std::abs(x[j] - std::round(x[j])) > cfg_.int_tol) return;
        }
        if (orig_.max_violation(x) > 1e-9) return;
        const double obj = surrogate_objective(orig_, x, cfg_.pwl_segments);
        if (has_inc_ && obj >= inc_obj_) return;
        inc_ = x;
        inc_obj_ = obj;
        has_inc_ = true;
    }

    void process(const Node& nd, const NodeResult& res) {
        if (has_inc_ && res.objective >= inc_obj_ - cfg_.abs_gap) return;
        const int j = branch_column(res.x);
        if (j < 0) {
            accept(res.x, res.objective);
            return;
        }
        const double v = res.x[j];
        double lo = root_lo_[j], up = root_up_[j];
        for (const auto& ch : nd.changes)
            if (ch.col == j) {
                lo = ch.lower;
                up = ch.upper;
            }
        Node down, upn;
        down.changes = nd.changes;
        down.changes.push_back({j, lo, std::floor(v)});
        upn.changes = nd.changes;
        upn.changes.push_back({j, std::ceil(v), up});
        down.bound = upn.bound = res.objective;
        down.basis = upn.basis = res.basis;
        down.branch_col = upn.branch_col = j;
        upn.branch_up = true;
        down.branch_dist = v - std::floor(v);
        upn.branch_dist = std::ceil(v) - v;
        const bool up_first = v - std::floor(v) >= 0.5;
        Node& first = up_first ? upn : down;
        Node& second = up_first ? down : upn;
        if (cfg_.node_order == NodeOrder::DepthFirst) {
            second.seq = next_seq_++;
            first.seq = next_seq_++;
            push(std::move(second));
            push(std::move(first));
        } else {
            first.seq = next_seq_++;
            second.seq = next_seq_++;
            push(std::move(first));
            push(std::move(second));
        }
    }

    // Rounds fractional columns one at a time, trying the other side once
    // when the rounded side fails, until an integral point appears.
    void dive(const NodeResult& root, long iteration_budget) {
        const long stop = lp_iterations_ + iteration_budget;
        Node nd;
        nd.basis = root.basis;
        NodeResult cur = root;
        auto& lp = *workers_[0];
        int budget = 0;
        for (int j = 0; j < n_; ++j) budget += lin_.column(j).integer;
        for (int step = 0; step < budget; ++step) {
            const int j = branch_column(cur.x);
            if (j < 0) {
                accept(cur.x, cur.objective);
                return;
            }
            const double r = std::round(cur.x[j]);
            const double alt = r > cur.x[j] ? std::floor(cur.x[j]) : std::ceil(cur.x[j]);
            bool moved = false;
            for (double fix : {r, alt}) {
                Node child = nd;
                child.changes.push_back({j, fix, fix});
                child.basis = cur.basis;
                NodeResult res = solve_node(child, lp, incumbent_cutoff());
                if (res.error) std::rethrow_exception(res.error);
                lp_iterations_ += res.iterations;
                if (res.status != detail::LpStatus::Optimal) continue;
                nd = std::move(child);
                cur = std::move(res);
                moved = true;
                break;
            }
            if (!moved || elapsed() > cfg_.time_limit || lp_iterations_ > stop) return;
        }
    }

    const Instance& orig_;
    SolverConfig cfg_;
    double pwl_tol_ = 0.0;
    Instance lin_;
    detail::LpProblem lp_;
    int n_;
    int threads_;
    std::vector<std::unique_ptr<detail::DualSimplex>> workers_;
    std::vector<double> root_lo_, root_up_;
    long iteration_limit_ = 0;
    std::array<std::vector<double>, 2> pc_sum_;
    std::array<std::vector<long>, 2> pc_count_;
    std::array<double, 2> pc_total_{};
    std::array<long, 2> pc_total_count_{};

    std::set<Node, NodeLess> open_;
    std::vector<Node> dfs_;
    long next_seq_ = 0;
    long nodes_ = 0;
    long lp_iterations_ = 0;
    double limit_bound_ = std::numeric_limits<double>::infinity();

    bool has_inc_ = false;
    std::vector<double> inc_;
    double inc_obj_ = std::numeric_limits<double>::infinity();
    Clock::time_point start_;
};

}  // namespace

Solution solve(const Instance& inst, const SolverConfig& cfg, std::span<const std::vector<double>> starts) {
    inst.validate();
    Search s(inst, cfg);
    return s.run(false, starts);
}

Solution lp_relax(const Instance& inst, const SolverConfig& cfg) {
    inst.validate();
    Instance relaxed = inst;
    for (int j = 0; j < static_cast<int>(relaxed.num_columns()); ++j) relaxed.column(j).integer = false;
    Search s(relaxed, cfg);
    return s.run(true, {});
}

}  // namespace cfx::milp
