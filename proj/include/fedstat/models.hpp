#pragma once

// Per-client loss oracles and streaming data generators.
//
// Linear:    b = a'x*_k + eps,  loss 0.5 (a'x - b)^2
// Logistic:  b ~ Bernoulli(sigmoid(a'x*)),  cross-entropy loss
// Quadratic: f_k(x) = 0.5 * curvature * |x - c_k|^2, noiseless (exact oracle)
//
// Covariates are always standard normal, a ~ N(0, I_d).

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "fedstat/random.hpp"

namespace fedstat {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class ModelKind { Linear, Logistic, Quadratic };

inline const char* to_string(ModelKind kind) {
    switch (kind) {
    case ModelKind::Linear: return "linear";
    case ModelKind::Logistic: return "logistic";
    case ModelKind::Quadratic: return "quadratic";
    }
    return "?";
}

struct ClientModel {
    ModelKind kind = ModelKind::Linear;
    Vector optimum;           // x*_k (linear), shared x* (logistic), center c_k (quadratic)
    double noise_scale = 1.0; // linear response noise std
    double curvature = 1.0;   // quadratic only

    Eigen::Index dimension() const { return optimum.size(); }
};

/// One realization xi of the client's data distribution.
struct Sample {
    Vector covariates;
    double response = 0.0;
};

inline double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

/// Fills `out` in place; quadratic clients consume no randomness.
template <class Rng>
void draw_sample(const ClientModel& model, Rng& rng, Sample& out) {
    if (model.kind == ModelKind::Quadratic) return;
    std::normal_distribution<double> normal;
    const Eigen::Index d = model.dimension();
    out.covariates.resize(d);
    for (Eigen::Index i = 0; i < d; ++i) out.covariates[i] = normal(rng);
    const double signal = out.covariates.dot(model.optimum);
    if (model.kind == ModelKind::Linear) {
        out.response = signal + model.noise_scale * normal(rng);
    } else {
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        out.response = unif(rng) < sigmoid(signal) ? 1.0 : 0.0;
    }
}

/// Stochastic gradient at x for the given sample, written into `out`.
inline void gradient_at(const ClientModel& model, const Vector& x, const Sample& sample, Vector& out) {
    switch (model.kind) {
    case ModelKind::Linear:
        out.noalias() = (sample.covariates.dot(x) - sample.response) * sample.covariates;
        break;
    case ModelKind::Logistic:
        out.noalias() = (sigmoid(sample.covariates.dot(x)) - sample.response) * sample.covariates;
        break;
    case ModelKind::Quadratic:
        out.noalias() = model.curvature * (x - model.optimum);
        break;
    }
}

inline void hessian_at(const ClientModel& model, const Vector& x, const Sample& sample, Matrix& out) {
    const Eigen::Index d = model.dimension();
    switch (model.kind) {
    case ModelKind::Linear:
        out.noalias() = sample.covariates * sample.covariates.transpose();
        break;
    case ModelKind::Logistic: {
        const double p = sigmoid(sample.covariates.dot(x));
        out.noalias() = (p * (1.0 - p)) * (sample.covariates * sample.covariates.transpose());
        break;
    }
    case ModelKind::Quadratic:
        out = model.curvature * Matrix::Identity(d, d);
        break;
    }
}

namespace detail {

inline void require_finite(const ClientModel& model, const Vector& x) {
    if (x.size() != model.dimension()) throw std::invalid_argument("model: dimension mismatch");
    if (!x.allFinite()) throw std::invalid_argument("model: evaluation point is not finite");
}

} // namespace detail

template <class Rng>
Vector sample_gradient(const ClientModel& model, const Vector& x, Rng& rng) {
    detail::require_finite(model, x);
    Sample s;
    draw_sample(model, rng, s);
    Vector g(model.dimension());
    gradient_at(model, x, s, g);
    return g;
}

template <class Rng>
Matrix sample_hessian(const ClientModel& model, const Vector& x, Rng& rng) {
    detail::require_finite(model, x);
    Sample s;
    draw_sample(model, rng, s);
    Matrix h(model.dimension(), model.dimension());
    hessian_at(model, x, s, h);
    return h;
}

struct Federation {
    std::vector<ClientModel> clients;
    std::vector<double> weights;  // p_k
    Vector global_optimum;        // argmin sum_k p_k f_k

    std::size_t size() const { return clients.size(); }
    Eigen::Index dimension() const { return global_optimum.size(); }
    ModelKind kind() const { return clients.front().kind; }
};

/// Validates clients and weights and derives the global optimum.
inline Federation make_federation(std::vector<ClientModel> clients, std::vector<double> weights) {
    if (clients.empty()) throw std::invalid_argument("federation: no clients");
    if (weights.size() != clients.size()) throw std::invalid_argument("federation: one weight per client required");
    double total = 0.0;
    for (double w : weights) {
        if (!(w > 0.0)) throw std::invalid_argument("federation: weights must be positive");
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("federation: weights must sum to 1");

    const ModelKind kind = clients.front().kind;
    const Eigen::Index d = clients.front().dimension();
    if (d < 1) throw std::invalid_argument("federation: dimension must be >= 1");
    for (const auto& c : clients) {
        if (c.kind != kind) throw std::invalid_argument("federation: mixed model kinds");
        if (c.dimension() != d) throw std::invalid_argument("federation: mixed dimensions");
        if (kind == ModelKind::Linear && !(c.noise_scale > 0.0))
            throw std::invalid_argument("federation: noise scale must be positive");
        if (kind == ModelKind::Quadratic && !(c.curvature > 0.0))
            throw std::invalid_argument("federation: curvature must be positive");
    }

    Federation fed;
    fed.clients = std::move(clients);
    fed.weights = std::move(weights);
    fed.global_optimum = Vector::Zero(d);
    switch (kind) {
    case ModelKind::Linear:
        // Identity covariate covariance makes every local Hessian I.
        for (std::size_t k = 0; k < fed.size(); ++k) fed.global_optimum += fed.weights[k] * fed.clients[k].optimum;
        break;
    case ModelKind::Logistic:
        for (const auto& c : fed.clients)
            if (c.optimum != fed.clients.front().optimum)
                throw std::invalid_argument("federation: logistic clients must share one optimum");
        fed.global_optimum = fed.clients.front().optimum;
        break;
    case ModelKind::Quadratic: {
        double norm = 0.0;
        for (std::size_t k = 0; k < fed.size(); ++k) {
            fed.global_optimum += fed.weights[k] * fed.clients[k].curvature * fed.clients[k].optimum;
            norm += fed.weights[k] * fed.clients[k].curvature;
        }
        fed.global_optimum /= norm;
        break;
    }
    }
    return fed;
}

inline std::vector<double> uniform_weights(std::size_t clients) {
    return std::vector<double>(clients, 1.0 / static_cast<double>(clients));
}

/// Heterogeneous optima x*_k ~ N(0, I_d) i.i.d. per client; all zero otherwise.
inline Federation linear_federation(Eigen::Index d, std::size_t clients, double noise, bool heterogeneous,
                                    std::uint64_t seed, std::vector<double> weights = {}) {
    if (weights.empty()) weights = uniform_weights(clients);
    std::vector<ClientModel> models(clients);
    for (std::size_t k = 0; k < clients; ++k) {
        models[k].kind = ModelKind::Linear;
        models[k].noise_scale = noise;
        models[k].optimum = Vector::Zero(d);
        if (heterogeneous) {
            auto rng = keyed_stream(seed, StreamTag::Federation, k);
            std::normal_distribution<double> normal;
            for (Eigen::Index i = 0; i < d; ++i) models[k].optimum[i] = normal(rng);
        }
    }
    return make_federation(std::move(models), std::move(weights));
}

/// Equi-spaced on [0, 1] including both endpoints; (1) when d = 1.
inline Vector logistic_optimum(Eigen::Index d) {
    if (d == 1) return Vector::Ones(1);
    return Vector::LinSpaced(d, 0.0, 1.0);
}

inline Federation logistic_federation(Eigen::Index d, std::size_t clients, std::vector<double> weights = {}) {
    if (weights.empty()) weights = uniform_weights(clients);
    std::vector<ClientModel> models(clients);
    for (auto& m : models) {
        m.kind = ModelKind::Logistic;
        m.optimum = logistic_optimum(d);
    }
    return make_federation(std::move(models), std::move(weights));
}

inline Federation quadratic_federation(const std::vector<Vector>& centers, double curvature,
                                       std::vector<double> weights = {}) {
    if (weights.empty()) weights = uniform_weights(centers.size());
    std::vector<ClientModel> models(centers.size());
    for (std::size_t k = 0; k < centers.size(); ++k) {
        models[k].kind = ModelKind::Quadratic;
        models[k].optimum = centers[k];
        models[k].curvature = curvature;
    }
    return make_federation(std::move(models), std::move(weights));
}

struct Sandwich {
    Matrix hessian;     // G
    Matrix noise;       // S
    Matrix covariance;  // G^-1 S G^-T
};

/**
 * Closed-form G, S and G^-1 S G^-T.
 *
 * Linear: G = I and, with d_k = x* - x*_k, the per-client gradient noise at x*
 * is a a'd_k - a eps, whose covariance for Gaussian a is
 * S_k = (noise^2 + |d_k|^2) I + d_k d_k'. S = sum_k p_k^2 S_k.
 * Logistic has no closed form and is rejected.
 */
inline Sandwich true_sandwich(const Federation& fed) {
    const Eigen::Index d = fed.dimension();
    Sandwich out;
    out.noise = Matrix::Zero(d, d);
    switch (fed.kind()) {
    case ModelKind::Linear:
        out.hessian = Matrix::Identity(d, d);
        for (std::size_t k = 0; k < fed.size(); ++k) {
            const Vector gap = fed.global_optimum - fed.clients[k].optimum;
            const double sigma = fed.clients[k].noise_scale;
            Matrix local = (sigma * sigma + gap.squaredNorm()) * Matrix::Identity(d, d);
            local += gap * gap.transpose();
            out.noise += fed.weights[k] * fed.weights[k] * local;
        }
        break;
    case ModelKind::Quadratic: {
        double curv = 0.0;
        for (std::size_t k = 0; k < fed.size(); ++k) curv += fed.weights[k] * fed.clients[k].curvature;
        out.hessian = curv * Matrix::Identity(d, d);
        break;
    }
    case ModelKind::Logistic:
        throw std::invalid_argument("true_sandwich: logistic model has no closed form");
    }
    const Matrix inv = out.hessian.inverse();
    out.covariance = inv * out.noise * inv.transpose();
    return out;
}

} // namespace fedstat
