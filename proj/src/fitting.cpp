#include "bobsled/fitting.hpp"

#include "bobsled/common.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace bobsled::fitting {

void FitConfig::validate() const {
    if (!(E_y > 0.0 && E_y <= 1.0)) throw std::invalid_argument("E_y must lie in (0, 1]");
    if (!(roll_threshold_deg_s2 > 0.0)) throw std::invalid_argument("roll threshold must be > 0");
    if (max_iterations < 1) throw std::invalid_argument("max_iterations must be >= 1");
    if (!(tolerance >= 0.0)) throw std::invalid_argument("tolerance must be >= 0");
    for (int k = 0; k < 3; ++k) {
        if (!(lower[k] > 0.0 && lower[k] < upper[k])) {
            throw std::invalid_argument("fit bounds must satisfy 0 < lower < upper");
        }
        if (initial && !((*initial)[k] >= lower[k] && (*initial)[k] <= upper[k])) {
            throw std::invalid_argument("initial guess outside the fit bounds");
        }
    }
    if (fixed_K_y && !(*fixed_K_y > 0.0)) throw std::invalid_argument("fixed K_y must be > 0");
}

double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw std::invalid_argument("quantile of an empty set");
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1.0) * std::clamp(q, 0.0, 1.0);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= values.size()) return values.back();
    return values[lo] + (h - static_cast<double>(lo)) * (values[lo + 1] - values[lo]);
}

Dataset select_fit_samples(const onetrack::AxleForceTrace& trace, const telemetry::TelemetryRun& run,
                           const FitConfig& config, Runner runner) {
    if (trace.size() != run.size() || run.derived.phi_ddot.size() != run.size()) {
        throw std::invalid_argument("trace and run are not aligned on the same grid");
    }
    Dataset out;
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const auto& s = trace.samples[i];
        if (s.flags & ~static_cast<std::uint8_t>(onetrack::kRollAcceleration)) continue;
        if (std::abs(rad_to_deg(run.derived.phi_ddot[i])) > config.roll_threshold_deg_s2) continue;
        const FitSample sample = runner == Runner::Front ? FitSample{s.alpha_f, s.F_z_f, s.F_y_f}
                                                         : FitSample{s.alpha_r, s.F_z_r, s.F_y_r};
        if (!(sample.F_z > 0.0)) continue;
        out.push_back(sample);
    }
    if (out.empty()) {
        throw DataError("no samples left for fitting after validity, roll-acceleration and F_z filters");
    }
    return out;
}

double small_angle_slope(const Dataset& data) {
    std::vector<const FitSample*> nonzero;
    for (const auto& s : data) {
        if (s.alpha != 0.0) nonzero.push_back(&s);
    }
    if (nonzero.empty()) {
        throw NumericalError("rank-deficient fit: every slip angle is zero");
    }
    std::sort(nonzero.begin(), nonzero.end(),
              [](const FitSample* a, const FitSample* b) { return std::abs(a->alpha) < std::abs(b->alpha); });
    const std::size_t take = std::min(nonzero.size(), std::max<std::size_t>(3, nonzero.size() / 10));
    // Theil-Sen on at most 1000 evenly strided points of the decile
    const std::size_t stride = std::max<std::size_t>(1, take / 1000);
    std::vector<const FitSample*> pts;
    for (std::size_t i = 0; i < take; i += stride) pts.push_back(nonzero[i]);
    std::vector<double> slopes;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        for (std::size_t j = i + 1; j < pts.size(); ++j) {
            const double da = pts[j]->alpha - pts[i]->alpha;
            if (da != 0.0) slopes.push_back((pts[j]->F_y - pts[i]->F_y) / da);
        }
    }
    if (slopes.empty()) {
        for (const auto* s : pts) slopes.push_back(s->F_y / s->alpha);
    }
    return quantile(std::move(slopes), 0.5);
}

double origin_slope(const Dataset& data) {
    double num = 0.0, den = 0.0;
    for (const auto& s : data) {
        num += s.F_y * s.alpha;
        den += s.alpha * s.alpha;
    }
    if (!(den > 0.0)) throw NumericalError("rank-deficient fit: every slip angle is zero");
    return num / den;
}

ModelEval lateral_model(double alpha, double F_z, double mu_zeta_y, double C_y, double E_y, double K_y) {
    const double D = mu_zeta_y * F_z;
    const double B = K_y / (C_y * D);
    const double x = B * alpha;
    const double inner = x - E_y * (x - std::atan(x));
    const double phi = std::atan(inner);
    const double dphi = (1.0 - E_y + E_y / (1.0 + x * x)) / (1.0 + inner * inner);
    const double sn = std::sin(C_y * phi), cs = std::cos(C_y * phi);
    ModelEval e;
    e.F_y = D * sn;
    e.d[0] = F_z * sn - F_z * cs * C_y * dphi * x;
    e.d[1] = D * cs * (phi - x * dphi);
    e.d[2] = D * cs * C_y * dphi * x / K_y;
    return e;
}

namespace {

// Pairwise summation keeps the reduction order fixed and the rounding error small.
double pairwise_sum(const double* x, std::size_t n) {
    if (n <= 16) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += x[i];
        return s;
    }
    const std::size_t h = n / 2;
    return pairwise_sum(x, h) + pairwise_sum(x + h, n - h);
}

struct Problem {
    const Dataset& data;
    const FitConfig& config;
    bool fixed_k;

    [[nodiscard]] int dim() const { return fixed_k ? 2 : 3; }

    // internal u = (ln mu, ln C [, ln K]); the bounds are a box in u
    [[nodiscard]] std::array<double, 3> natural(const Eigen::VectorXd& u) const {
        const double K = fixed_k ? *config.fixed_K_y : std::exp(u(2));
        return {std::exp(u(0)), std::exp(u(1)), K};
    }

    [[nodiscard]] Eigen::VectorXd internal(const std::array<double, 3>& p) const {
        Eigen::VectorXd u(dim());
        for (int k = 0; k < dim(); ++k) u(k) = std::log(p[static_cast<std::size_t>(k)]);
        return u;
    }

    [[nodiscard]] double lower(int k) const { return std::log(config.lower[static_cast<std::size_t>(k)]); }
    [[nodiscard]] double upper(int k) const { return std::log(config.upper[static_cast<std::size_t>(k)]); }

    [[nodiscard]] Eigen::VectorXd project(Eigen::VectorXd u) const {
        for (int k = 0; k < dim(); ++k) u(k) = std::clamp(u(k), lower(k), upper(k));
        return u;
    }

    [[nodiscard]] double cost(const Eigen::VectorXd& u) const {
        const auto p = natural(u);
        std::vector<double> sq(data.size());
        for (std::size_t i = 0; i < data.size(); ++i) {
            const double r = lateral_model(data[i].alpha, data[i].F_z, p[0], p[1], config.E_y, p[2]).F_y - data[i].F_y;
            sq[i] = r * r;
        }
        return 0.5 * pairwise_sum(sq.data(), sq.size());
    }

    // residuals and Jacobian with respect to u
    void linearize(const Eigen::VectorXd& u, Eigen::VectorXd& r, Eigen::MatrixXd& J) const {
        const auto p = natural(u);
        const auto n = static_cast<Eigen::Index>(data.size());
        r.resize(n);
        J.resize(n, dim());
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto& s = data[static_cast<std::size_t>(i)];
            const auto e = lateral_model(s.alpha, s.F_z, p[0], p[1], config.E_y, p[2]);
            r(i) = e.F_y - s.F_y;
            J(i, 0) = p[0] * e.d[0];
            J(i, 1) = p[1] * e.d[1];
            if (!fixed_k) J(i, 2) = p[2] * e.d[2];
        }
    }
};

Eigen::Matrix3d covariance_at(const Problem& prob, const std::array<double, 3>& p, double cost) {
    const int free = prob.dim();
    const auto n = static_cast<Eigen::Index>(prob.data.size());
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    if (n <= free) return cov;
    Eigen::MatrixXd J(n, free);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& s = prob.data[static_cast<std::size_t>(i)];
        const auto e = lateral_model(s.alpha, s.F_z, p[0], p[1], prob.config.E_y, p[2]);
        for (int k = 0; k < free; ++k) J(i, k) = e.d[static_cast<std::size_t>(k)];
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(J);
    const Eigen::MatrixXd R = qr.matrixQR().topRows(free).triangularView<Eigen::Upper>();
    if ((R.diagonal().array().abs() == 0.0).any()) {
        cov.setConstant(std::numeric_limits<double>::infinity());
        return cov;
    }
    const Eigen::MatrixXd Rinv =
        R.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(free, free));
    const double sigma2 = 2.0 * cost / static_cast<double>(n - free);
    cov.topLeftCorner(free, free) = sigma2 * Rinv * Rinv.transpose();
    return cov;
}

struct Descent {
    Eigen::VectorXd u;
    double cost = 0.0;
    int iterations = 0;
    bool converged = false;
    std::vector<double> history;
};

// Levenberg-Marquardt with Marquardt column scaling; bounds handled by an active set plus projection.
Descent descend(const Problem& prob, Eigen::VectorXd u, const FitConfig& config) {
    Descent d;
    double cost = prob.cost(u);
    double lambda = 1e-3;
    int it = 0;
    bool converged = false;
    const auto p_dim = static_cast<Eigen::Index>(prob.dim());
    const auto n = static_cast<Eigen::Index>(prob.data.size());
    Eigen::VectorXd r;
    Eigen::MatrixXd J;

    for (; it < config.max_iterations && !converged; ++it) {
        prob.linearize(u, r, J);
        // parameters sitting on a bound with the gradient pushing outwards stay fixed this iteration
        const Eigen::VectorXd grad = J.transpose() * r;
        std::vector<Eigen::Index> free;
        for (Eigen::Index k = 0; k < p_dim; ++k) {
            const bool at_lower = u(k) <= prob.lower(static_cast<int>(k)) && grad(k) > 0.0;
            const bool at_upper = u(k) >= prob.upper(static_cast<int>(k)) && grad(k) < 0.0;
            if (!at_lower && !at_upper) free.push_back(k);
        }
        if (free.empty()) {
            converged = true;
            break;
        }
        const auto f_dim = static_cast<Eigen::Index>(free.size());
        Eigen::MatrixXd Jf(n, f_dim);
        for (Eigen::Index k = 0; k < f_dim; ++k) Jf.col(k) = J.col(free[static_cast<std::size_t>(k)]);
        const Eigen::VectorXd scale = Jf.colwise().norm().cwiseMax(1e-300);
        bool accepted = false;
        while (!accepted) {
            Eigen::MatrixXd A(n + f_dim, f_dim);
            A.topRows(n) = Jf;
            A.bottomRows(f_dim) = (std::sqrt(lambda) * scale).asDiagonal();
            Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + f_dim);
            rhs.head(n) = -r;
            const Eigen::VectorXd solved = A.householderQr().solve(rhs);
            Eigen::VectorXd step = Eigen::VectorXd::Zero(p_dim);
            for (Eigen::Index k = 0; k < f_dim; ++k) step(free[static_cast<std::size_t>(k)]) = solved(k);
            const Eigen::VectorXd trial = prob.project(u + step);
            const double trial_cost = prob.cost(trial);
            // equal cost counts as no improvement: the zero step is the smallest-norm choice
            if (trial_cost < cost) {
                const double decrease = (cost - trial_cost) / std::max(cost, std::numeric_limits<double>::min());
                const double moved = (trial - u).cwiseAbs().maxCoeff();
                u = trial;
                cost = trial_cost;
                d.history.push_back(cost);
                lambda = std::max(lambda / 3.0, 1e-15);
                accepted = true;
                if (decrease < config.tolerance || moved < 1e-15 || cost == 0.0) converged = true;
            } else {
                lambda *= 4.0;
                if (lambda > 1e16) {
                    converged = true;  // no descent direction left at machine precision
                    break;
                }
            }
        }
    }
    d.u = std::move(u);
    d.cost = cost;
    d.iterations = it;
    d.converged = converged;
    return d;
}

}  // namespace

FitResult fit_lateral(const Dataset& data, const FitConfig& config) {
    config.validate();
    const bool fixed_k = config.fixed_K_y.has_value();
    const std::size_t free = fixed_k ? 2 : 3;
    if (data.size() < 10 * free) {
        throw DataError("lateral fit needs at least " + std::to_string(10 * free) + " samples, got " +
                        std::to_string(data.size()));
    }
    for (const auto& s : data) {
        if (!(s.F_z > 0.0) || !std::isfinite(s.alpha) || !std::isfinite(s.F_y)) {
            throw DataError("lateral fit dataset contains F_z <= 0 or non-finite values");
        }
    }

    std::array<double, 3> start;
    if (config.initial) {
        start = *config.initial;
    } else {
        start = {3.0, 0.05, std::clamp(small_angle_slope(data), config.lower[2], config.upper[2])};
    }
    if (fixed_k) start[2] = *config.fixed_K_y;

    const Problem prob{data, config, fixed_k};
    Eigen::VectorXd u = prob.project(prob.internal(start));
    {
        Eigen::VectorXd r;
        Eigen::MatrixXd J;
        prob.linearize(u, r, J);
        const Eigen::VectorXd norms = J.colwise().norm();
        if ((norms.array() == 0.0).any()) {
            throw NumericalError("rank-deficient Jacobian: the data carry no information on every parameter");
        }
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> rank_qr(J * norms.cwiseInverse().asDiagonal());
        rank_qr.setThreshold(1e-12);
        if (rank_qr.rank() < prob.dim()) {
            throw NumericalError("rank-deficient Jacobian at the initial guess");
        }
    }

    Descent best = descend(prob, u, config);
    if (!config.initial && !fixed_k) {
        // Near-zero slip angles may be pure sensor noise and the curve can saturate early,
        // so a few through-origin slopes are tried as well; the lowest final cost wins.
        const double k_ls = origin_slope(data);
        for (double factor : {1.0, 2.0, 4.0}) {
            auto alt = start;
            alt[2] = std::clamp(factor * k_ls, config.lower[2], config.upper[2]);
            Descent d = descend(prob, prob.project(prob.internal(alt)), config);
            if (d.cost < best.cost) best = std::move(d);
        }
    }

    FitResult result;
    result.count = data.size();
    u = best.u;
    const double cost = best.cost;
    const int it = best.iterations;
    const bool converged = best.converged;
    result.cost_history = std::move(best.history);
    const auto p = prob.natural(u);
    result.params = {p[0], p[1], config.E_y, p[2], 1.0};
    result.iterations = it;
    result.status = converged ? FitStatus::Converged : FitStatus::MaxIterations;
    result.rms = std::sqrt(2.0 * cost / static_cast<double>(data.size()));
    result.covariance = covariance_at(prob, p, cost);
    return result;
}

std::vector<FzBin> fit_report(const FitResult& result, const Dataset& data, const std::vector<double>& fz_edges,
                              int alpha_bins, int curve_points) {
    if (fz_edges.size() < 2) throw std::invalid_argument("fit_report needs at least two F_z bin edges");
    if (alpha_bins < 1 || curve_points < 2) throw std::invalid_argument("fit_report: bad bin counts");
    const auto& prm = result.params;
    auto model = [&](double alpha, double fz) { return friction::force_y(fz, alpha, prm); };
    std::vector<FzBin> out;
    for (std::size_t b = 0; b + 1 < fz_edges.size(); ++b) {
        const double lo = fz_edges[b], hi = fz_edges[b + 1];
        const bool last = b + 2 == fz_edges.size();
        std::vector<const FitSample*> in;
        for (const auto& s : data) {
            if (s.F_z >= lo && (s.F_z < hi || (last && s.F_z == hi))) in.push_back(&s);
        }
        if (in.empty()) continue;
        FzBin bin{lo, hi, 0.0, in.size(), {}, {}};
        double a_min = in.front()->alpha, a_max = a_min;
        for (const auto* s : in) {
            bin.fz_mean += s->F_z;
            a_min = std::min(a_min, s->alpha);
            a_max = std::max(a_max, s->alpha);
        }
        bin.fz_mean /= static_cast<double>(in.size());
        const double width = (a_max - a_min) / alpha_bins;
        for (int k = 0; k < alpha_bins; ++k) {
            const double alo = a_min + k * width;
            const double ahi = k + 1 == alpha_bins ? a_max : alo + width;
            std::vector<double> fy;
            for (const auto* s : in) {
                if (s->alpha >= alo && (s->alpha < ahi || (k + 1 == alpha_bins && s->alpha <= ahi))) {
                    fy.push_back(s->F_y);
                }
            }
            if (fy.empty()) continue;
            const double mid = 0.5 * (alo + ahi);
            bin.alpha_bins.push_back({alo, ahi, mid, fy.size(), quantile(fy, 0.25), quantile(fy, 0.5),
                                      quantile(fy, 0.75), model(mid, bin.fz_mean)});
            if (width == 0.0) break;
        }
        for (int k = 0; k < curve_points; ++k) {
            const double a = a_min + (a_max - a_min) * k / (curve_points - 1);
            bin.curve.emplace_back(a, model(a, bin.fz_mean));
        }
        out.push_back(std::move(bin));
    }
    return out;
}

std::string fit_report_csv(const std::vector<FzBin>& bins) {
    std::ostringstream out;
    out << "kind,fz_lo,fz_hi,fz_mean,alpha,count,q25,median,q75,model\n";
    for (const auto& b : bins) {
        const auto head = kv::format_double(b.fz_lo) + ',' + kv::format_double(b.fz_hi) + ',' +
                          kv::format_double(b.fz_mean) + ',';
        for (const auto& a : b.alpha_bins) {
            out << "bin," << head << kv::format_double(a.alpha_mid) << ',' << a.count << ','
                << kv::format_double(a.q25) << ',' << kv::format_double(a.median) << ','
                << kv::format_double(a.q75) << ',' << kv::format_double(a.model) << '\n';
        }
        for (const auto& [alpha, fy] : b.curve) {
            out << "curve," << head << kv::format_double(alpha) << ",,,,," << kv::format_double(fy) << '\n';
        }
    }
    return out.str();
}

void write_fit_result(kv::Document& doc, const FitResult& result) {
    friction::write_lateral(doc, result.params);
    doc.set_number("fit.rms", result.rms);
    doc.set_number("fit.count", static_cast<double>(result.count));
    doc.set_number("fit.iterations", result.iterations);
    doc.set("fit.status", result.status == FitStatus::Converged ? "converged" : "max_iterations");
    const char* names[3] = {"mu_zeta_y", "C_y", "K_y"};
    for (int i = 0; i < 3; ++i) {
        for (int j = i; j < 3; ++j) {
            doc.set_number(std::string("covariance.") + names[i] + "__" + names[j], result.covariance(i, j));
        }
    }
}

std::string dataset_csv(const Dataset& data) {
    std::ostringstream out;
    out << "alpha,F_z,F_y\n";
    for (const auto& s : data) {
        out << kv::format_double(s.alpha) << ',' << kv::format_double(s.F_z) << ',' << kv::format_double(s.F_y)
            << '\n';
    }
    return out.str();
}

}  // namespace bobsled::fitting
