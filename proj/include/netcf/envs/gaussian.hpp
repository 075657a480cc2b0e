#pragma once

#include "netcf/core.hpp"
#include "netcf/errors.hpp"
#include "netcf/rng.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <vector>

namespace netcf {

// Affine-in-(y,w) coefficient set: f(y, w) = b + c*y + d*w + e*y*w.
struct AffineYW {
    double b = 0.0, c = 0.0, d = 0.0, e = 0.0;
    double operator()(double y, double w) const { return b + c * y + d * w + e * y * w; }
};

// Network of units coupled through a dense Gaussian interference matrix:
//   y_{t+1} = (A + A_t) g(y_t, w_{t+1}) + h(y_t, w_{t+1}) + eps_t
// A has entries N(mu/N, sigma^2/N) drawn once per world; A_t has entries
// N(0, sigma_t^2/N) fresh per period.
struct GaussianSpec {
    double mu = 0.0;
    double sigma = 0.0;
    double sigma_t = 0.0;                 // per-period heterogeneity, constant level
    std::vector<double> sigma_t_schedule; // optional per-period override, index t
    double noise_sd = 0.0;
    AffineYW g;
    AffineYW h;
    double y0_mean = 0.0;
    double y0_sd = 0.0;

    double sigma_t_at(std::size_t t) const {
        if (sigma_t_schedule.empty()) return sigma_t;
        return sigma_t_schedule[std::min(t, sigma_t_schedule.size() - 1)];
    }

    void validate() const {
        if (sigma < 0.0 || sigma_t < 0.0 || noise_sd < 0.0 || y0_sd < 0.0)
            throw ConfigError("GaussianSpec: dispersion parameters must be >= 0");
        for (double v : sigma_t_schedule)
            if (v < 0.0) throw ConfigError("GaussianSpec: sigma_t schedule entries must be >= 0");
    }
};

// Population-mean recursion implied by the spec'd dynamics: with w independent
// of y, the mean evolves as f(a, p) = b + c a + d p + e a p.
struct ScalarSE {
    double b = 0.0, c = 0.0, d = 0.0, e = 0.0;
    double step(double a, double p) const { return b + c * a + d * p + e * a * p; }
};

inline ScalarSE gaussian_se_coefficients(const GaussianSpec& s) {
    return ScalarSE{s.mu * s.g.b + s.h.b, s.mu * s.g.c + s.h.c,
                    s.mu * s.g.d + s.h.d, s.mu * s.g.e + s.h.e};
}

// Per-transition aggregates needed for decomposition diagnostics.
struct GaussianTrace {
    std::vector<double> g_mean;  // mean of g(y_t, w_{t+1}) over units, index t
    std::vector<double> g_norm;  // Euclidean norm of the g vector, index t
};

class GaussianEnv {
public:
    GaussianEnv(GaussianSpec spec, std::size_t n_units, std::size_t horizon, std::uint64_t world_seed)
        : spec_(std::move(spec)), n_(n_units), t_(horizon), seed_(world_seed) {
        spec_.validate();
        y0_.resize(n_);
        Rng init(derive_seed(seed_, "world-init"));
        for (auto& v : y0_) v = init.normal(spec_.y0_mean, spec_.y0_sd);
        if (spec_.sigma > 0.0) {
            // zero-mean heterogeneity part, frozen per world; the mu/N mean is
            // applied analytically as mu * mean(g)
            s_ = Eigen::MatrixXf(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_));
            Rng mat(derive_seed(seed_, "world-matrix"));
            const double scale = spec_.sigma / std::sqrt(static_cast<double>(n_));
            for (Eigen::Index i = 0; i < s_.rows(); ++i)
                for (Eigen::Index j = 0; j < s_.cols(); ++j)
                    s_(i, j) = static_cast<float>(scale * mat.normal());
        }
    }

    std::size_t n_units() const { return n_; }
    std::size_t horizon() const { return t_; }
    const GaussianSpec& spec() const { return spec_; }
    const std::vector<double>& initial_outcomes() const { return y0_; }

    // `noise_stream` selects an observation-noise replicate while keeping the
    // world (interference matrix, initial outcomes) frozen.
    OutcomePanel simulate(const TreatmentMatrix& w, GaussianTrace* trace = nullptr,
                          std::uint64_t noise_stream = 0) const {
        if (w.n_units() != n_ || w.horizon() != t_)
            throw ContractError("GaussianEnv: treatment matrix shape mismatch");
        OutcomePanel panel(n_, t_);
        std::vector<double> y = y0_;
        for (std::size_t i = 0; i < n_; ++i) panel(i, 0) = y[i];
        if (trace) {
            trace->g_mean.assign(t_, 0.0);
            trace->g_norm.assign(t_, 0.0);
        }
        std::vector<double> ynext(n_);
        for (std::size_t t = 0; t < t_; ++t) {
            step(y, w, t, ynext, trace, noise_stream);
            y.swap(ynext);
            for (std::size_t i = 0; i < n_; ++i) panel(i, t + 1) = y[i];
        }
        return panel;
    }

    // One transition t -> t+1 given current outcomes and the treatment matrix.
    void step(const std::vector<double>& y, const TreatmentMatrix& w, std::size_t t,
              std::vector<double>& out, GaussianTrace* trace = nullptr,
              std::uint64_t noise_stream = 0) const {
        std::vector<double> gv(n_);
        double gsum = 0.0, gsq = 0.0;
        for (std::size_t i = 0; i < n_; ++i) {
            const double wi = w(i, t + 1);
            gv[i] = spec_.g(y[i], wi);
            gsum += gv[i];
            gsq += gv[i] * gv[i];
        }
        const double gbar = gsum / static_cast<double>(n_);
        if (trace) {
            trace->g_mean[t] = gbar;
            trace->g_norm[t] = std::sqrt(gsq);
        }

        out.assign(n_, 0.0);
        if (spec_.sigma > 0.0) {
            Eigen::VectorXf gf(static_cast<Eigen::Index>(n_));
            for (std::size_t i = 0; i < n_; ++i) gf(static_cast<Eigen::Index>(i)) = static_cast<float>(gv[i]);
            Eigen::VectorXf prod = s_ * gf;
            for (std::size_t i = 0; i < n_; ++i) out[i] = static_cast<double>(prod(static_cast<Eigen::Index>(i)));
        }
        if (const double st = spec_.sigma_t_at(t); st > 0.0) {
            // per-period matrix applied on the fly; regenerated deterministically
            Rng mat(derive_seed(seed_, "period-matrix", t));
            const double scale = st / std::sqrt(static_cast<double>(n_));
            for (std::size_t i = 0; i < n_; ++i) {
                double acc = 0.0;
                for (std::size_t j = 0; j < n_; ++j) acc += mat.normal() * gv[j];
                out[i] += scale * acc;
            }
        }

        Rng noise(derive_seed(seed_, "noise", noise_stream, t));
        for (std::size_t i = 0; i < n_; ++i) {
            const double wi = w(i, t + 1);
            double v = spec_.mu * gbar + out[i] + spec_.h(y[i], wi);
            if (spec_.noise_sd > 0.0) v += noise.normal(0.0, spec_.noise_sd);
            out[i] = v;
        }
    }

private:
    GaussianSpec spec_;
    std::size_t n_, t_;
    std::uint64_t seed_;
    std::vector<double> y0_;
    Eigen::MatrixXf s_;
};

} // namespace netcf
