#pragma once

#include <Eigen/Core>

#include <string>
#include <vector>

#include "tea/error.hpp"
#include "tea/subspace.hpp"

namespace tea {

struct ComponentSeries {
    std::vector<double> times;   // strictly increasing
    std::vector<double> values;  // one observation per time
    int component = 0;
};

struct ArimaOrder {
    int p = 1, d = 1, q = 1;
};

enum class FitMethod { kCssFit, kDriftFallback };

struct ArimaModel {
    ArimaOrder order;
    double phi = 0.0;        // AR(1) coefficient, 0 when p = 0
    double psi = 0.0;        // MA(1) coefficient, 0 when q = 0
    double intercept = 0.0;  // mean of the (differenced) series; drift when falling back
    FitMethod method = FitMethod::kCssFit;
};

// Conditional-sum-of-squares fit: difference d times (observations treated as
// equally spaced by index), fix the intercept at the differenced-series mean,
// then minimize one-step residuals over |phi|,|psi| < 0.99 by a 0.05 grid
// search refined with a derivative-free pattern polish. Short or degenerate
// series fall back to a random walk with drift.
ArimaModel fit_arima(const ComponentSeries& series, ArimaOrder order = {1, 1, 1});

// Recursive h-step-ahead mean forecast; for d = 1 the differenced-scale
// forecasts are cumulatively summed from the last observation.
double forecast_h(const ArimaModel& model, const ComponentSeries& series, int horizon);

struct ForecastPoint {
    Eigen::VectorXd point;  // c_f
    double t_future = 0.0;
    int horizon = 1;
    std::vector<FitMethod> tags;  // per component
    bool irregular_spacing = false;
};

// One independent ARIMA fit + forecast per subspace component. The horizon is
// the index distance implied by the median source spacing (at least 1).
ForecastPoint forecast_future_point(const Subspace& subspace, double t_future,
                                    ArimaOrder order = {1, 1, 1});

void validate(const ArimaOrder& order);
const char* to_string(FitMethod m);

}  // namespace tea
