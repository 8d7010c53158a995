#include "tea/arima.hpp"

#include <algorithm>
#include <cmath>

namespace tea {

void validate(const ArimaOrder& order) {
    if (order.p < 0 || order.p > 1 || order.d < 0 || order.d > 1 || order.q < 0 || order.q > 1) {
        throw ConfigError("ARIMA order components must be 0 or 1");
    }
}

namespace {

constexpr double kCoeffBound = 0.9899;  // inside the |.| < 0.99 box

void check_series(const ComponentSeries& series) {
    if (series.values.size() < 2) throw ConfigError("ARIMA needs at least 2 observations");
    if (series.times.size() != series.values.size()) {
        throw ConfigError("ARIMA series times/values length mismatch");
    }
    for (std::size_t i = 1; i < series.times.size(); ++i) {
        if (series.times[i] <= series.times[i - 1]) {
            throw ConfigError("ARIMA series timestamps must be strictly increasing");
        }
    }
}

std::vector<double> difference(const std::vector<double>& y, int d) {
    std::vector<double> w = y;
    for (int k = 0; k < d; ++k) {
        std::vector<double> next(w.size() - 1);
        for (std::size_t i = 1; i < w.size(); ++i) next[i - 1] = w[i] - w[i - 1];
        w = std::move(next);
    }
    return w;
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

// One-step conditional residual sum of squares on the demeaned series.
double css(const std::vector<double>& x, const ArimaOrder& order, double phi, double psi) {
    const std::size_t start = static_cast<std::size_t>(order.p);
    double prev_e = 0.0;
    double total = 0.0;
    for (std::size_t t = start; t < x.size(); ++t) {
        double e = x[t];
        if (order.p == 1) e -= phi * x[t - 1];
        if (order.q == 1) e -= psi * prev_e;
        total += e * e;
        prev_e = e;
    }
    return total;
}

double drift_of(const std::vector<double>& y) {
    double s = 0.0;
    for (std::size_t i = 1; i < y.size(); ++i) s += y[i] - y[i - 1];
    return s / static_cast<double>(y.size() - 1);
}

ArimaModel drift_model(const ComponentSeries& series, ArimaOrder order) {
    ArimaModel m;
    m.order = order;
    m.method = FitMethod::kDriftFallback;
    m.intercept = drift_of(series.values);
    return m;
}

}  // namespace

ArimaModel fit_arima(const ComponentSeries& series, ArimaOrder order) {
    check_series(series);
    validate(order);

    const std::vector<double> w = difference(series.values, order.d);
    if (w.size() < 4) return drift_model(series, order);

    const double mu = mean_of(w);
    std::vector<double> x(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) x[i] = w[i] - mu;

    double spread = 0.0;
    for (double v : x) spread = std::max(spread, std::abs(v));
    if (spread <= 1e-12 * std::max(1.0, std::abs(mu))) {
        // Degenerate residual variance: every candidate fits equally well.
        return drift_model(series, order);
    }

    // Coarse grid over the active coefficients.
    std::vector<double> grid{0.0};
    if (order.p == 1 || order.q == 1) {
        grid.clear();
        for (int k = -19; k <= 19; ++k) grid.push_back(0.05 * k);
    }
    double best_phi = 0.0, best_psi = 0.0;
    double best = std::numeric_limits<double>::infinity();
    for (double phi : (order.p == 1 ? grid : std::vector<double>{0.0})) {
        for (double psi : (order.q == 1 ? grid : std::vector<double>{0.0})) {
            const double value = css(x, order, phi, psi);
            if (value < best) {
                best = value;
                best_phi = phi;
                best_psi = psi;
            }
        }
    }
    if (!std::isfinite(best)) return drift_model(series, order);

    // Derivative-free polish: axis moves with a halving step.
    double step = 0.025;
    while (step > 1e-7) {
        bool improved = false;
        const double candidates[4][2] = {{best_phi + step, best_psi},
                                         {best_phi - step, best_psi},
                                         {best_phi, best_psi + step},
                                         {best_phi, best_psi - step}};
        for (const auto& c : candidates) {
            double phi = std::clamp(c[0], -kCoeffBound, kCoeffBound);
            double psi = std::clamp(c[1], -kCoeffBound, kCoeffBound);
            if (order.p == 0) phi = 0.0;
            if (order.q == 0) psi = 0.0;
            const double value = css(x, order, phi, psi);
            if (value < best) {
                best = value;
                best_phi = phi;
                best_psi = psi;
                improved = true;
            }
        }
        if (!improved) step *= 0.5;
    }
    if (!std::isfinite(best)) return drift_model(series, order);

    ArimaModel m;
    m.order = order;
    m.phi = best_phi;
    m.psi = best_psi;
    m.intercept = mu;
    m.method = FitMethod::kCssFit;
    return m;
}

double forecast_h(const ArimaModel& model, const ComponentSeries& series, int horizon) {
    check_series(series);
    if (horizon < 1) throw ConfigError("forecast horizon must be >= 1");

    const std::vector<double>& y = series.values;
    if (model.method == FitMethod::kDriftFallback) {
        return y.back() + static_cast<double>(horizon) * model.intercept;
    }

    const std::vector<double> w = difference(y, model.order.d);
    std::vector<double> x(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) x[i] = w[i] - model.intercept;

    // Residuals over the sample to seed the MA recursion.
    double prev_e = 0.0;
    for (std::size_t t = static_cast<std::size_t>(model.order.p); t < x.size(); ++t) {
        double e = x[t];
        if (model.order.p == 1) e -= model.phi * x[t - 1];
        if (model.order.q == 1) e -= model.psi * prev_e;
        prev_e = e;
    }

    double cumulative = 0.0;
    double x_prev = x.back();
    double level = y.back();
    for (int j = 1; j <= horizon; ++j) {
        double x_hat = 0.0;
        if (model.order.p == 1) x_hat += model.phi * x_prev;
        if (model.order.q == 1 && j == 1) x_hat += model.psi * prev_e;
        const double w_hat = x_hat + model.intercept;
        cumulative += w_hat;
        x_prev = x_hat;
        level = w_hat;  // d = 0 path: the forecast at step j is the level itself
    }
    double result =
        model.order.d == 1 ? y.back() + cumulative : level;
    if (!std::isfinite(result)) {
        // Fallback safety: never emit non-finite forecasts on finite input.
        return y.back() + static_cast<double>(horizon) * drift_of(y);
    }
    return result;
}

ForecastPoint forecast_future_point(const Subspace& subspace, double t_future, ArimaOrder order) {
    validate(order);
    const auto& times = subspace.timestamps;
    if (times.size() < 2) throw ConfigError("forecast needs at least 2 expert timestamps");
    if (t_future <= times.back()) throw ConfigError("t_future must lie beyond the last expert");

    std::vector<double> gaps;
    for (std::size_t i = 1; i < times.size(); ++i) gaps.push_back(times[i] - times[i - 1]);
    std::sort(gaps.begin(), gaps.end());
    const double median_gap = gaps[gaps.size() / 2];

    ForecastPoint fp;
    fp.t_future = t_future;
    fp.horizon = std::max(1, static_cast<int>(std::llround((t_future - times.back()) / median_gap)));
    for (double g : gaps) {
        if (std::abs(g - median_gap) > 1e-9 * std::max(1.0, median_gap)) {
            fp.irregular_spacing = true;  // mapped to indices; caller logs it
        }
    }

    fp.point.resize(subspace.p_effective);
    fp.tags.resize(static_cast<std::size_t>(subspace.p_effective));
    for (int p = 0; p < subspace.p_effective; ++p) {
        ComponentSeries series;
        series.component = p;
        series.times = times;
        series.values.assign(subspace.projections.col(p).data(),
                             subspace.projections.col(p).data() + subspace.projections.rows());
        ArimaModel model = fit_arima(series, order);
        double value = forecast_h(model, series, fp.horizon);
        if (!std::isfinite(value)) {
            model = drift_model(series, order);
            value = forecast_h(model, series, fp.horizon);
        }
        fp.point[p] = value;
        fp.tags[static_cast<std::size_t>(p)] = model.method;
    }
    return fp;
}

const char* to_string(FitMethod m) {
    return m == FitMethod::kCssFit ? "css_fit" : "drift_fallback";
}

}  // namespace tea
