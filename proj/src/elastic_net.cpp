#include "skpca/elastic_net.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace skpca {

namespace {

constexpr std::string_view kModule = "elastic_net";

double soft_threshold(double x, double t) {
    if (x > t) return x - t;
    if (x < -t) return x + t;
    return 0.0;
}

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// Largest violation given q = (K2 + ridge I) beta.
double kkt_from_product(const EnetProblem& p, const Vector& beta, const Vector& q) {
    double worst = 0.0;
    for (Index i = 0; i < beta.size(); ++i) {
        const double g = 2.0 * (q(i) - p.linear(i));
        const double v = beta(i) != 0.0 ? std::abs(g + p.l1 * sign(beta(i)))
                                        : std::max(0.0, std::abs(g) - p.l1);
        worst = std::max(worst, v);
    }
    return worst;
}

double objective_from_product(const EnetProblem& p, const Vector& beta, const Vector& q) {
    return beta.dot(q) - 2.0 * p.linear.dot(beta) + p.l1 * beta.lpNorm<1>();
}

Vector apply_system(const EnetProblem& p, const Vector& beta) {
    Vector q = (*p.K2) * beta;
    q += p.ridge * beta;
    return q;
}

// Sufficient condition for an objective unbounded below when ridge == 0:
// a null-space direction of K2 along which the linear term beats the L1 cost.
void check_bounded(const EnetProblem& p) {
    if (p.ridge > 0.0) return;
    const Matrix& K2 = *p.K2;
    for (Index i = 0; i < K2.rows(); ++i) {
        if (K2(i, i) <= 0.0 && 2.0 * std::abs(p.linear(i)) > p.l1) {
            throw Error(kModule, "objective unbounded below (zero curvature in coordinate " +
                                     std::to_string(i) + ")");
        }
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(K2);
    const Vector& ev = es.eigenvalues();
    const double floor = 1e-10 * std::max(ev.maxCoeff(), 0.0);
    Vector null_part = Vector::Zero(p.size());
    for (Index j = 0; j < ev.size(); ++j) {
        if (ev(j) <= floor) {
            const Vector u = es.eigenvectors().col(j);
            null_part += u.dot(p.linear) * u;
        }
    }
    const double l1n = null_part.lpNorm<1>();
    const double tol = 1e-9 * std::max(1.0, p.linear.norm());
    if (null_part.norm() > tol && 2.0 * null_part.squaredNorm() / l1n > p.l1 * (1.0 + 1e-9)) {
        throw Error(kModule, "objective unbounded below (linear term outside the range of K2)");
    }
}

class CoordinateDescent {
public:
    CoordinateDescent(const EnetProblem& p, const EnetOptions& opts)
        : p_(p), K2_(*p.K2), opts_(opts), n_(p.size()) {}

    EnetSolution run() {
        beta_ = opts_.warm_start ? *opts_.warm_start : Vector::Zero(n_);
        require(beta_.size() == n_, kModule, "warm start has the wrong length");
        require(beta_.allFinite(), kModule, "warm start has non-finite entries");
        order_ = opts_.order;
        if (order_.empty()) {
            order_.resize(static_cast<std::size_t>(n_));
            std::iota(order_.begin(), order_.end(), Index{0});
        }
        require(static_cast<Index>(order_.size()) == n_, kModule,
                "coordinate order must be a permutation of 0..n-1");
        {
            std::vector<char> seen(static_cast<std::size_t>(n_), 0);
            for (Index i : order_) {
                require(i >= 0 && i < n_ && !seen[static_cast<std::size_t>(i)], kModule,
                        "coordinate order must be a permutation of 0..n-1");
                seen[static_cast<std::size_t>(i)] = 1;
            }
        }

        q_ = apply_system(p_, beta_);
        record();
        int next_finish = kFirstFinish;
        while (iterations_ < opts_.max_iter) {
            // Full sweep; refresh q first so incremental drift cannot accumulate.
            q_ = apply_system(p_, beta_);
            for (Index i : order_) update(i);
            ++iterations_;
            record();
            if (kkt_from_product(p_, beta_, q_) <= opts_.tol) break;

            if (opts_.polish && iterations_ >= next_finish) {
                if (feature_sign()) {
                    q_ = apply_system(p_, beta_);
                    if (kkt_from_product(p_, beta_, q_) <= opts_.tol) break;
                }
                next_finish = iterations_ + kFinishRetry;
                continue;
            }
            active_sweeps();
        }

        EnetSolution sol;
        sol.beta = beta_;
        const Vector q = apply_system(p_, beta_);
        sol.objective = objective_from_product(p_, beta_, q);
        sol.kkt_residual = kkt_from_product(p_, beta_, q);
        sol.iterations = iterations_;
        sol.converged = sol.kkt_residual <= opts_.tol;
        sol.sweep_objectives = std::move(trace_);
        require(std::isfinite(sol.objective), kModule, "objective is not finite");
        return sol;
    }

private:
    static constexpr int kFirstFinish = 3;
    static constexpr int kFinishRetry = 50;

    void record() {
        if (opts_.record_objective) trace_.push_back(objective_from_product(p_, beta_, q_));
    }

    void update(Index i) {
        const double a_ii = K2_(i, i) + p_.ridge;
        const double old = beta_(i);
        double fresh = 0.0;
        if (a_ii > 0.0) {
            const double r = p_.linear(i) - (q_(i) - a_ii * old);
            fresh = soft_threshold(r, 0.5 * p_.l1) / a_ii;
        } else if (2.0 * std::abs(p_.linear(i)) > p_.l1) {
            throw Error(kModule, "objective unbounded below in coordinate " + std::to_string(i));
        }
        const double delta = fresh - old;
        if (delta != 0.0) {
            beta_(i) = fresh;
            q_.noalias() += delta * K2_.col(i);
            q_(i) += delta * p_.ridge;
        }
    }

    // Sweeps restricted to the current support until it is locally optimal.
    void active_sweeps() {
        std::vector<Index> active;
        for (Index i : order_) {
            if (beta_(i) != 0.0) active.push_back(i);
        }
        if (active.empty()) return;
        for (int inner = 0; inner < 200 && iterations_ < opts_.max_iter; ++inner) {
            for (Index i : active) update(i);
            ++iterations_;
            record();
            double worst = 0.0;
            for (Index i : active) {
                const double g = 2.0 * (q_(i) - p_.linear(i));
                worst = std::max(worst, beta_(i) != 0.0 ? std::abs(g + p_.l1 * sign(beta_(i)))
                                                        : std::max(0.0, std::abs(g) - p_.l1));
            }
            if (worst <= 0.5 * opts_.tol) break;
        }
        require(beta_.allFinite(), kModule, "coordinate descent diverged (objective unbounded?)");
    }

    // Objective of x supported on S, given the S x S block of the system.
    struct Segment {
        double c0 = 0.0, c1 = 0.0, c2 = 0.0;  // smooth part as a quadratic in t
        double at(double t, const Vector& x0, const Vector& d, double l1) const {
            return c0 + t * (c1 + t * c2) + l1 * (x0 + t * d).lpNorm<1>();
        }
    };

    // Exact finish by feature-sign search: solve the stationarity system for
    // the current support and signs, line-search over the sign changes along
    // the way, then grow the support with the violating zero coordinates.
    // Every accepted step lowers the objective. Returns true on optimality.
    bool feature_sign() {
        const double zero_tol = 0.25 * opts_.tol;
        std::vector<Index> S;
        for (Index i = 0; i < n_; ++i) {
            if (beta_(i) != 0.0) S.push_back(i);
        }
        std::vector<double> theta;
        for (Index i : S) theta.push_back(sign(beta_(i)));
        bool need_solve = !S.empty();
        bool single = false;  // fall back to adding one violator at a time
        std::size_t before_add = S.size();
        bool added_many = false;

        while (iterations_ < opts_.max_iter) {
            added_many = false;
            if (!need_solve) {
                q_ = apply_system(p_, beta_);
                std::vector<std::pair<double, Index>> viol;
                for (Index i = 0; i < n_; ++i) {
                    if (beta_(i) != 0.0) continue;
                    const double g = 2.0 * (q_(i) - p_.linear(i));
                    const double v = std::abs(g) - p_.l1;
                    if (v > zero_tol) viol.emplace_back(v, i);
                }
                if (viol.empty()) return true;
                std::sort(viol.begin(), viol.end(), [](const auto& a, const auto& b) {
                    return a.first > b.first || (a.first == b.first && a.second < b.second);
                });
                if (single) viol.resize(1);
                before_add = S.size();
                added_many = viol.size() > 1;
                for (const auto& [v, i] : viol) {
                    S.push_back(i);
                    theta.push_back(-sign(2.0 * (q_(i) - p_.linear(i))));
                }
            }
            const Index k = static_cast<Index>(S.size());
            Matrix sub(k, k);
            Vector rhs(k), x0(k);
            for (Index a = 0; a < k; ++a) {
                const Index i = S[static_cast<std::size_t>(a)];
                for (Index b = 0; b < k; ++b) sub(a, b) = K2_(i, S[static_cast<std::size_t>(b)]);
                sub(a, a) += p_.ridge;
                rhs(a) = p_.linear(i) - 0.5 * p_.l1 * theta[static_cast<std::size_t>(a)];
                x0(a) = beta_(i);
            }
            Eigen::LDLT<Matrix> ldlt(sub);
            if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return false;
            const Vector target = ldlt.solve(rhs);
            if (!target.allFinite()) return false;
            const Vector d = target - x0;

            Vector b_s(k);
            for (Index a = 0; a < k; ++a) b_s(a) = p_.linear(S[static_cast<std::size_t>(a)]);
            const Vector Ad = sub * d;
            Segment seg;
            seg.c2 = d.dot(Ad);
            seg.c1 = 2.0 * (x0.dot(Ad) - b_s.dot(d));
            seg.c0 = x0.dot(sub * x0) - 2.0 * b_s.dot(x0);

            double best_t = 1.0;
            Index best_cross = -1;
            double best_f = seg.at(1.0, x0, d, p_.l1);
            for (Index a = 0; a < k; ++a) {
                if (x0(a) == 0.0 || d(a) == 0.0) continue;
                const double t = -x0(a) / d(a);
                if (!(t > 0.0 && t < 1.0)) continue;
                const double f = seg.at(t, x0, d, p_.l1);
                if (f < best_f) {
                    best_f = f;
                    best_t = t;
                    best_cross = a;
                }
            }
            const double current = seg.at(0.0, x0, d, p_.l1);
            if (!(best_f <= current + 1e-15 * std::max(1.0, std::abs(current)))) {
                if (!added_many) return false;
                // Adding every violator at once did not descend; retry with one.
                single = true;
                S.resize(before_add);
                theta.resize(before_add);
                continue;
            }

            Vector x = x0 + best_t * d;
            if (best_cross >= 0) x(best_cross) = 0.0;
            std::vector<Index> keep_s;
            std::vector<double> keep_theta;
            bool signs_ok = best_t == 1.0;
            for (Index a = 0; a < k; ++a) {
                const Index i = S[static_cast<std::size_t>(a)];
                beta_(i) = x(a);
                if (x(a) != 0.0) {
                    keep_s.push_back(i);
                    keep_theta.push_back(sign(x(a)));
                    signs_ok = signs_ok && sign(x(a)) == theta[static_cast<std::size_t>(a)];
                } else {
                    signs_ok = false;
                }
            }
            S = std::move(keep_s);
            theta = std::move(keep_theta);
            ++iterations_;
            if (opts_.record_objective) {
                q_ = apply_system(p_, beta_);
                record();
            }
            need_solve = !signs_ok && !S.empty();
        }
        return false;
    }

    const EnetProblem& p_;
    const Matrix& K2_;
    const EnetOptions& opts_;
    Index n_;
    Vector beta_;
    Vector q_;
    std::vector<Index> order_;
    std::vector<double> trace_;
    int iterations_ = 0;
};

}  // namespace

void EnetProblem::validate() const {
    require(K2 != nullptr, kModule, "problem has no K2 matrix");
    require(K2->rows() == K2->cols(), kModule, "K2 must be square");
    require(K2->rows() == linear.size(), kModule, "K2 and linear term sizes differ");
    require(std::isfinite(ridge) && ridge >= 0.0, kModule, "ridge must be finite and >= 0");
    require(std::isfinite(l1) && l1 >= 0.0, kModule, "l1 weight must be finite and >= 0");
    require(linear.allFinite() && K2->allFinite(), kModule, "problem has non-finite entries");
}

double enet_objective(const EnetProblem& p, const Vector& beta) {
    require(beta.size() == p.size(), kModule, "beta has the wrong length");
    return objective_from_product(p, beta, apply_system(p, beta));
}

double kkt_residual(const EnetProblem& p, const Vector& beta) {
    require(beta.size() == p.size(), kModule, "beta has the wrong length");
    return kkt_from_product(p, beta, apply_system(p, beta));
}

EnetSolution solve_enet(const EnetProblem& p, const EnetOptions& opts) {
    p.validate();
    require(opts.tol > 0.0, kModule, "tolerance must be positive");
    require(opts.max_iter >= 1, kModule, "max_iter must be >= 1");
    check_bounded(p);

    // Without an L1 term the minimizer is the ridge solve itself.
    if (p.l1 == 0.0 && opts.polish && p.ridge > 0.0) {
        Matrix A = *p.K2;
        A.diagonal().array() += p.ridge;
        Eigen::LLT<Matrix> llt(A);
        if (llt.info() == Eigen::Success) {
            EnetSolution sol;
            sol.beta = llt.solve(p.linear);
            const Vector q = apply_system(p, sol.beta);
            sol.objective = objective_from_product(p, sol.beta, q);
            sol.kkt_residual = kkt_from_product(p, sol.beta, q);
            sol.converged = sol.kkt_residual <= opts.tol;
            if (opts.record_objective) sol.sweep_objectives.push_back(sol.objective);
            if (sol.converged) return sol;
        }
    }
    return CoordinateDescent(p, opts).run();
}

}  // namespace skpca
