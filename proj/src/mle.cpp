#include "parcon/error.hpp"
#include "parcon/solutions.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace parcon {

namespace {

constexpr double kVarianceFloor = 1e-12;

double log1p_exp(double eta) { return eta > 0.0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta)); }

double sigmoid(double eta) {
    if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
    const double e = std::exp(eta);
    return e / (1.0 + e);
}

double label_of(std::span<const double> point) {
    const double y = point.back();
    if (y != 0.0 && y != 1.0) fail(ErrorCode::InvalidSpec, "logistic label must be 0 or 1, got " + std::to_string(y));
    return y;
}

// Linear predictor with intercept theta[0] and features point[0..d-2].
double linear_predictor(std::span<const double> theta, std::span<const double> point) {
    double eta = theta[0];
    for (std::size_t j = 1; j < theta.size(); ++j) eta += theta[j] * point[j - 1];
    return eta;
}

MleResult gaussian_mle(const EmpiricalMeasure& part, const MleSettings& settings) {
    if (part.size() < 2)
        fail(ErrorCode::DegenerateVariance, "gaussian MLE needs at least two points, part has " +
                                                std::to_string(part.size()));
    ExactSum sum;
    for (std::size_t i = 0; i < part.size(); ++i) sum.add(part.at(i, settings.key_dim));
    const double n = static_cast<double>(part.size());
    const double mean = sum.value() / n;
    ExactSum squares;
    for (std::size_t i = 0; i < part.size(); ++i) {
        const double dev = part.at(i, settings.key_dim) - mean;
        squares.add_product(dev, dev);
    }
    MleResult out;
    out.theta = {mean, squares.value() / n};
    out.loglik = measure_loglik(settings, out.theta, part);
    out.iterations = 0;
    return out;
}

MleResult logistic_mle(const EmpiricalMeasure& part, const MleSettings& settings) {
    const std::size_t p = part.dim();
    const std::size_t n = part.size();
    if (n < p)
        fail(ErrorCode::SingularHessian, "logistic fit needs at least " + std::to_string(p) + " points, part has " +
                                             std::to_string(n));

    Eigen::MatrixXd design(n, p);
    Eigen::VectorXd labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto point = part.point(i);
        design(i, 0) = 1.0;
        for (std::size_t j = 1; j < p; ++j) design(i, j) = point[j - 1];
        labels(i) = label_of(point);
    }
    // Hessian scale at theta = 0; pivots far below it mean the curvature has
    // collapsed (separation) or the design is collinear.
    const double reference = 0.25 * design.squaredNorm() / static_cast<double>(p);

    Eigen::VectorXd theta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
    if (!settings.init.empty()) {
        for (std::size_t j = 0; j < p; ++j) theta(static_cast<Eigen::Index>(j)) = settings.init[j];
    }

    MleResult best;
    best.loglik = -std::numeric_limits<double>::infinity();
    for (std::size_t iter = 0;; ++iter) {
        const Eigen::VectorXd eta = design * theta;
        Eigen::VectorXd prob(n);
        Eigen::VectorXd weight(n);
        double loglik = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto ii = static_cast<Eigen::Index>(i);
            prob(ii) = sigmoid(eta(ii));
            weight(ii) = prob(ii) * (1.0 - prob(ii));
            loglik += labels(ii) * eta(ii) - log1p_exp(eta(ii));
        }
        const Eigen::VectorXd gradient = design.transpose() * (labels - prob);
        if (!std::isfinite(loglik) || !gradient.allFinite())
            fail(ErrorCode::SingularHessian, "Newton-Raphson diverged");

        if (loglik > best.loglik || iter == 0) {
            best.theta.assign(theta.data(), theta.data() + theta.size());
            best.loglik = loglik;
            best.iterations = iter;
        }
        if (gradient.norm() < settings.tol) {
            best.theta.assign(theta.data(), theta.data() + theta.size());
            best.loglik = loglik;
            best.iterations = iter;
            best.converged = true;
            return best;
        }
        if (iter >= settings.max_iter) break;

        const Eigen::MatrixXd hessian = design.transpose() * weight.asDiagonal() * design;
        const Eigen::LDLT<Eigen::MatrixXd> ldlt(hessian);
        if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
            ldlt.vectorD().minCoeff() <= 1e-12 * reference)
            fail(ErrorCode::SingularHessian,
                 "Hessian is singular at iteration " + std::to_string(iter) + " (separation or collinearity)");
        theta += ldlt.solve(gradient);
    }
    best.converged = false;
    return best;
}

}  // namespace

std::size_t mle_parameter_count(MleModel model, std::size_t dim) {
    return model == MleModel::GaussianMeanVar ? 2 : dim;
}

MleSettings mle_settings(const ProblemParams& params) {
    return MleSettings{params.model, params.key_dim, params.init, params.max_iter, params.tol};
}

double point_loglik(const MleSettings& settings, std::span<const double> theta, std::span<const double> point) {
    if (settings.model == MleModel::GaussianMeanVar) {
        if (theta.size() != 2) fail(ErrorCode::DimensionMismatch, "gaussian theta must be (mean, variance)");
        const double var = std::max(theta[1], kVarianceFloor);
        const double dev = point[settings.key_dim] - theta[0];
        return -0.5 * std::log(2.0 * std::numbers::pi * var) - dev * dev / (2.0 * var);
    }
    if (theta.size() != point.size())
        fail(ErrorCode::DimensionMismatch, "logistic theta must have one entry per coordinate");
    const double eta = linear_predictor(theta, point);
    return label_of(point) * eta - log1p_exp(eta);
}

double measure_loglik(const MleSettings& settings, std::span<const double> theta, const EmpiricalMeasure& m) {
    ExactSum total;
    for (std::size_t i = 0; i < m.size(); ++i) total.add(point_loglik(settings, theta, m.point(i)));
    return total.value();
}

MleResult rho_mle(const EmpiricalMeasure& part, const MleSettings& settings) {
    if (settings.model == MleModel::GaussianMeanVar) {
        if (settings.key_dim >= part.dim()) fail(ErrorCode::IndexOutOfRange, "gaussian key_dim out of range");
        return gaussian_mle(part, settings);
    }
    if (!settings.init.empty() && settings.init.size() != part.dim())
        fail(ErrorCode::DimensionMismatch, "logistic init must have d entries");
    MleResult out = logistic_mle(part, settings);
    out.loglik = measure_loglik(settings, out.theta, part);
    return out;
}

MleResult combine_mle(std::span<const MleCandidate> candidates,
                      const std::function<double(std::span<const double>)>& full_loglik,
                      std::vector<std::string>* notes) {
    if (candidates.empty()) fail(ErrorCode::NoViableCandidate, "no MLE candidates to combine");
    std::optional<MleResult> best;
    for (const auto& candidate : candidates) {
        double score = 0.0;
        try {
            score = full_loglik(candidate.result.theta);
        } catch (const Error& e) {
            if (notes) notes->push_back("mle candidate from part " + std::to_string(candidate.part) +
                                        " excluded: " + e.what());
            continue;
        }
        if (std::isnan(score)) {
            if (notes) notes->push_back("mle candidate from part " + std::to_string(candidate.part) +
                                        " excluded: log-likelihood is NaN");
            continue;
        }
        if (!best || score > best->loglik) {
            best = candidate.result;
            best->loglik = score;
        }
    }
    if (!best) fail(ErrorCode::NoViableCandidate, "every MLE candidate failed full-data evaluation");
    return *best;
}

MleResult combine_mle_K(std::span<const MleResult> winners) {
    if (winners.empty()) fail(ErrorCode::NoViableCandidate, "no repetition winners to combine");
    std::size_t best = 0;
    for (std::size_t k = 1; k < winners.size(); ++k)
        if (winners[k].loglik > winners[best].loglik) best = k;
    return winners[best];
}

}  // namespace parcon
