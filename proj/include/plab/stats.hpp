#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/special_functions/gamma.hpp>

#include "plab/error.hpp"

namespace plab {

struct Estimate {
    double value = 0;
    double se = 0;
};

// Welford accumulator.
class Accumulator {
public:
    void add(double x)
    {
        ++n_;
        double d = x - mean_;
        mean_ += d / double(n_);
        m2_ += d * (x - mean_);
    }
    void merge(const Accumulator& o)
    {
        if (o.n_ == 0) return;
        if (n_ == 0) {
            *this = o;
            return;
        }
        double n = double(n_ + o.n_);
        double d = o.mean_ - mean_;
        m2_ += o.m2_ + d * d * double(n_) * double(o.n_) / n;
        mean_ += d * double(o.n_) / n;
        n_ += o.n_;
    }
    size_t count() const { return n_; }
    double mean() const { return mean_; }
    double variance() const { return n_ > 1 ? m2_ / double(n_ - 1) : 0.0; }
    double se() const { return n_ > 1 ? std::sqrt(variance() / double(n_)) : 0.0; }
    Estimate estimate() const { return {mean(), se()}; }

private:
    size_t n_ = 0;
    double mean_ = 0, m2_ = 0;
};

inline Estimate mean_estimate(const std::vector<double>& xs)
{
    Accumulator a;
    for (double x : xs) a.add(x);
    return a.estimate();
}

// Sample covariance of paired values with a plug-in (influence function) SE.
inline Estimate covariance_estimate(const std::vector<double>& a, const std::vector<double>& b)
{
    size_t n = a.size();
    if (n != b.size() || n < 2) throw Error("stats", "covariance needs two equal-length samples of size >= 2");
    double ma = std::accumulate(a.begin(), a.end(), 0.0) / double(n);
    double mb = std::accumulate(b.begin(), b.end(), 0.0) / double(n);
    Accumulator z;
    for (size_t i = 0; i < n; ++i) z.add((a[i] - ma) * (b[i] - mb));
    return {z.mean() * double(n) / double(n - 1), z.se()};
}

inline Estimate variance_estimate(const std::vector<double>& a) { return covariance_estimate(a, a); }

// Standard error of sqrt-free products and ratios by the delta method.
inline Estimate product(Estimate a, Estimate b)
{
    return {a.value * b.value, std::sqrt(a.se * a.se * b.value * b.value + b.se * b.se * a.value * a.value)};
}

inline double poisson_pmf(int64_t k, double mean)
{
    if (mean <= 0) return k == 0 ? 1.0 : 0.0;
    return std::exp(double(k) * std::log(mean) - mean - std::lgamma(double(k) + 1));
}

inline double chi_square_sf(double x, double df) { return boost::math::gamma_q(df / 2, x / 2); }

struct GofResult {
    double statistic = 0;
    double dof = 0;
    double p_value = 1;
};

// Chi-square goodness of fit of integer counts against Poisson(mean). Bins
// are merged from the tails until each expected count is at least 5.
inline GofResult chi_square_poisson(const std::vector<int64_t>& counts, double mean)
{
    size_t n = counts.size();
    if (n == 0) throw Error("stats", "empty sample");
    int64_t hi = *std::max_element(counts.begin(), counts.end());
    std::vector<double> obs(size_t(hi) + 2, 0.0);
    for (auto c : counts) obs[size_t(c)] += 1;
    std::vector<double> probs(obs.size());
    double acc = 0;
    for (size_t k = 0; k + 1 < obs.size(); ++k) {
        probs[k] = poisson_pmf(int64_t(k), mean);
        acc += probs[k];
    }
    probs.back() = std::max(0.0, 1.0 - acc);
    // merge bins
    std::vector<double> o, e;
    double co = 0, ce = 0;
    for (size_t k = 0; k < obs.size(); ++k) {
        co += obs[k];
        ce += probs[k] * double(n);
        if (ce >= 5) {
            o.push_back(co);
            e.push_back(ce);
            co = ce = 0;
        }
    }
    if (!o.empty()) {
        o.back() += co;
        e.back() += ce;
    } else {
        o.push_back(co);
        e.push_back(ce);
    }
    GofResult r;
    if (o.size() < 2) return r;
    for (size_t i = 0; i < o.size(); ++i) r.statistic += (o[i] - e[i]) * (o[i] - e[i]) / e[i];
    r.dof = double(o.size() - 1);
    r.p_value = chi_square_sf(r.statistic, r.dof);
    return r;
}

// Asymptotic Kolmogorov distribution tail with the usual small-sample
// correction of the argument.
inline double kolmogorov_sf(double lambda)
{
    if (lambda < 1e-3) return 1.0;
    double sum = 0, sign = 1;
    for (int k = 1; k <= 200; ++k) {
        double term = sign * std::exp(-2.0 * k * k * lambda * lambda);
        sum += term;
        if (std::fabs(term) < 1e-16) break;
        sign = -sign;
    }
    return std::clamp(2 * sum, 0.0, 1.0);
}

struct KsResult {
    double statistic = 0;
    double p_value = 1;
};

inline KsResult ks_two_sample(std::vector<double> a, std::vector<double> b)
{
    if (a.empty() || b.empty()) throw Error("stats", "KS test needs nonempty samples");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double na = double(a.size()), nb = double(b.size());
    size_t i = 0, j = 0;
    double d = 0;
    while (i < a.size() && j < b.size()) {
        double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        d = std::max(d, std::fabs(double(i) / na - double(j) / nb));
    }
    double en = std::sqrt(na * nb / (na + nb));
    return {d, kolmogorov_sf((en + 0.12 + 0.11 / en) * d)};
}

// Kendall tau-b.
inline double kendall_tau(const std::vector<double>& x, const std::vector<double>& y)
{
    size_t n = x.size();
    if (n != y.size() || n < 2) throw Error("stats", "kendall tau needs paired samples");
    double conc = 0, disc = 0, tx = 0, ty = 0;
    for (size_t i = 0; i < n; ++i)
        for (size_t j = i + 1; j < n; ++j) {
            double dx = x[i] - x[j], dy = y[i] - y[j];
            double s = dx * dy;
            if (s > 0)
                conc += 1;
            else if (s < 0)
                disc += 1;
            else if (dx == 0 && dy != 0)
                tx += 1;
            else if (dy == 0 && dx != 0)
                ty += 1;
        }
    double denom = std::sqrt((conc + disc + tx) * (conc + disc + ty));
    return denom > 0 ? (conc - disc) / denom : 0.0;
}

struct LinearFit {
    double slope = 0, intercept = 0, r2 = 0, slope_se = 0;
};

inline LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y)
{
    size_t n = x.size();
    if (n != y.size() || n < 3) throw Error("stats", "linear fit needs at least three points");
    double mx = std::accumulate(x.begin(), x.end(), 0.0) / double(n);
    double my = std::accumulate(y.begin(), y.end(), 0.0) / double(n);
    double sxx = 0, sxy = 0, syy = 0;
    for (size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    LinearFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double sse = std::max(0.0, syy - f.slope * sxy);
    f.r2 = syy > 0 ? 1 - sse / syy : 1.0;
    f.slope_se = std::sqrt(sse / double(n - 2) / sxx);
    return f;
}

// Lawson-Hanson nonnegative least squares: min |Ax - b| subject to x >= 0.
inline Eigen::VectorXd nnls(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, int max_iter = 500)
{
    const Eigen::Index n = A.cols();
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    std::vector<bool> passive(size_t(n), false);
    const double tol = 1e-12 * std::max(1.0, A.norm() * b.norm());

    auto solve_passive = [&](Eigen::VectorXd& z) {
        std::vector<Eigen::Index> idx;
        for (Eigen::Index j = 0; j < n; ++j)
            if (passive[size_t(j)]) idx.push_back(j);
        z = Eigen::VectorXd::Zero(n);
        if (idx.empty()) return;
        Eigen::MatrixXd Ap(A.rows(), Eigen::Index(idx.size()));
        for (size_t k = 0; k < idx.size(); ++k) Ap.col(Eigen::Index(k)) = A.col(idx[k]);
        Eigen::VectorXd zp = Ap.colPivHouseholderQr().solve(b);
        for (size_t k = 0; k < idx.size(); ++k) z[idx[k]] = zp[Eigen::Index(k)];
    };

    for (int it = 0; it < max_iter; ++it) {
        Eigen::VectorXd w = A.transpose() * (b - A * x);
        Eigen::Index best = -1;
        double wmax = tol;
        for (Eigen::Index j = 0; j < n; ++j)
            if (!passive[size_t(j)] && w[j] > wmax) {
                wmax = w[j];
                best = j;
            }
        if (best < 0) break;
        passive[size_t(best)] = true;
        for (int inner = 0; inner < max_iter; ++inner) {
            Eigen::VectorXd z;
            solve_passive(z);
            bool feasible = true;
            for (Eigen::Index j = 0; j < n; ++j)
                if (passive[size_t(j)] && z[j] <= 0) feasible = false;
            if (feasible) {
                x = z;
                break;
            }
            double alpha = 1.0;
            for (Eigen::Index j = 0; j < n; ++j)
                if (passive[size_t(j)] && z[j] <= 0) alpha = std::min(alpha, x[j] / (x[j] - z[j]));
            x += alpha * (z - x);
            for (Eigen::Index j = 0; j < n; ++j)
                if (passive[size_t(j)] && x[j] <= tol) {
                    passive[size_t(j)] = false;
                    x[j] = 0;
                }
        }
    }
    return x;
}

}  // namespace plab
