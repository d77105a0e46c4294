#include "ctlab/detectors.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ctlab::detectors {

const char* termination_name(Termination t) {
    switch (t) {
        case Termination::Completed: return "completed";
        case Termination::GuardExceeded: return "guard-exceeded";
        case Termination::ParticleCrossing: return "particle-crossing";
        case Termination::StepFloor: return "step-floor";
        case Termination::Stopped: return "stopped";
    }
    return "?";
}

const char* outcome_name(OutcomeKind k) {
    switch (k) {
        case OutcomeKind::GlobalSmooth: return "global-smooth";
        case OutcomeKind::Blowup: return "blowup";
        case OutcomeKind::Indeterminate: return "indeterminate";
    }
    return "?";
}

BlowupFit fit_blowup_time(const std::vector<double>& t,
                          const std::vector<double>& m,
                          int window, double quality_threshold) {
    BlowupFit fit;
    const int n = static_cast<int>(t.size());
    if (n != static_cast<int>(m.size())) throw std::invalid_argument("fit_blowup_time: size mismatch");
    if (n < 3) {
        fit.reject_reason = "too few samples";
        return fit;
    }

    // Select the fit window walking backward from termination, keeping
    // samples separated by a factor of four in the witness. Near breakdown
    // the raw tail clusters at time increments below double resolution;
    // the decimated window spans the approach instead.
    std::vector<int> picked;
    double last_m = 0.0, last_t = 0.0;
    for (int i = n - 1; i >= 0 && static_cast<int>(picked.size()) < window; --i) {
        if (!(m[i] > 0.0)) break;
        if (picked.empty()) {
            picked.push_back(i);
            last_m = m[i];
            last_t = t[i];
            continue;
        }
        if (m[i] <= 0.25 * last_m && t[i] < last_t) {
            picked.push_back(i);
            last_m = m[i];
            last_t = t[i];
        }
    }
    if (static_cast<int>(picked.size()) < 3) {
        // shallow growth: fall back to the raw tail, which must be monotone
        picked.clear();
        const int k = std::min(window, n);
        for (int i = n - k; i < n; ++i) {
            if (i > n - k && !(m[i] > m[i - 1])) {
                fit.reject_reason = "window not monotone increasing";
                return fit;
            }
            if (!(m[i] > 0.0)) {
                fit.reject_reason = "nonpositive witness";
                return fit;
            }
            picked.push_back(i);
        }
    } else {
        std::reverse(picked.begin(), picked.end());
    }

    // linear least squares on y = 1/m vs t: y = a*t_c - a*t
    double st = 0, sy = 0, stt = 0, sty = 0;
    for (int i : picked) {
        const double y = 1.0 / m[i];
        st += t[i];
        sy += y;
        stt += t[i] * t[i];
        sty += t[i] * y;
    }
    const double kd = static_cast<double>(picked.size());
    const double denom = kd * stt - st * st;
    if (denom == 0.0) {
        fit.reject_reason = "degenerate time window";
        return fit;
    }
    const double slope = (kd * sty - st * sy) / denom;
    const double intercept = (sy - slope * st) / kd;
    if (!(slope < 0.0)) {
        fit.reject_reason = "witness not diverging (nonnegative slope of 1/m)";
        return fit;
    }
    fit.t_c = -intercept / slope;

    double ss = 0.0, scale = 0.0;
    for (int i : picked) {
        const double y = 1.0 / m[i];
        const double r = y - (intercept + slope * t[i]);
        ss += r * r;
        scale += y * y;
    }
    fit.quality = std::sqrt(ss / (scale + 1e-300));
    if (fit.quality > quality_threshold) {
        fit.reject_reason = "fit residual above threshold";
        return fit;
    }
    // t_c must sit past the bulk of the window; the discrete trajectory can
    // outlive the fitted root by a step once the witness saturates the guard
    const double span = t.back() - t[picked.front()];
    if (!(fit.t_c > t.back() - 0.5 * span)) {
        fit.reject_reason = "fitted t_c not beyond the data";
        return fit;
    }
    fit.accepted = true;
    return fit;
}

RunOutcome classify(const RunSeries& series, double guard) {
    if (series.t.size() < 3)
        throw std::invalid_argument("classify: need at least 3 recorded samples");

    RunOutcome out;
    out.horizon = series.horizon;
    out.max_witness = *std::max_element(series.witness.begin(), series.witness.end());
    if (!series.max_ux.empty())
        out.max_ux = *std::max_element(series.max_ux.begin(), series.max_ux.end());
    if (!series.min_rho.empty())
        out.min_rho = *std::min_element(series.min_rho.begin(), series.min_rho.end());
    if (!series.max_rho.empty())
        out.max_rho = *std::max_element(series.max_rho.begin(), series.max_rho.end());
    out.flags = series.bound_violations;

    const bool breakdown_termination =
        series.termination == Termination::GuardExceeded ||
        series.termination == Termination::ParticleCrossing ||
        series.termination == Termination::StepFloor;

    if (breakdown_termination) {
        const BlowupFit fit = fit_blowup_time(series.t, series.witness);
        if (fit.accepted) {
            out.kind = OutcomeKind::Blowup;
            out.t_c_estimate = fit.t_c;
            out.fit_quality = fit.quality;
            out.x_c = series.x_at_termination;
        } else {
            out.kind = OutcomeKind::Indeterminate;
            out.flags.push_back(std::string("blowup fit rejected: ") + fit.reject_reason);
        }
        return out;
    }

    if (series.termination == Termination::Stopped) {
        out.kind = OutcomeKind::Indeterminate;
        out.flags.push_back("run stopped before the horizon");
        return out;
    }

    // completed run
    if (out.max_witness >= guard) {
        out.kind = OutcomeKind::Indeterminate;
        out.flags.push_back("witness crossed the guard without termination");
        return out;
    }
    if (!series.bound_violations.empty()) {
        out.kind = OutcomeKind::Indeterminate;
        return out;
    }
    out.kind = OutcomeKind::GlobalSmooth;
    return out;
}

BoundReport check_e_range(const std::vector<double>& t,
                          const std::vector<double>& e_min,
                          const std::vector<double>& e_max,
                          double lo, double hi, double tol) {
    BoundReport rep;
    rep.kind = BoundKind::ERange;
    rep.satisfied = true;
    for (size_t i = 0; i < t.size(); ++i) {
        const double under = lo - e_min[i];
        const double over = e_max[i] - hi;
        const double viol = std::max(under, over);
        const bool ok = viol <= tol;
        rep.per_snapshot_ok.push_back(ok);
        if (!ok && viol > rep.worst_margin) {
            rep.worst_margin = viol;
            rep.worst_t = t[i];
            rep.satisfied = false;
        }
    }
    return rep;
}

BoundReport check_density_bound(const std::vector<double>& t,
                                const std::vector<double>& rho_max,
                                const std::vector<double>& bound,
                                double slack) {
    BoundReport rep;
    rep.kind = BoundKind::DensityBound;
    rep.satisfied = true;
    for (size_t i = 0; i < t.size(); ++i) {
        const double excess = rho_max[i] / bound[i] - 1.0;
        const bool ok = excess <= slack;
        rep.per_snapshot_ok.push_back(ok);
        if (excess > rep.worst_margin) {
            rep.worst_margin = excess;
            rep.worst_t = t[i];
        }
        if (!ok) rep.satisfied = false;
    }
    return rep;
}

BoundReport check_gradient_growth(const std::vector<double>& t,
                                  const std::vector<double>& grad_max,
                                  double max_rate) {
    BoundReport rep;
    rep.kind = BoundKind::GradientGrowth;
    if (t.size() < 3) {
        rep.applicable = false;
        rep.note = "too few snapshots for an envelope fit";
        return rep;
    }
    // least squares on log m = log C1 + C2 t, then inflate C1 so the
    // envelope dominates every sample (nonnegative residual margin)
    double st = 0, sy = 0, stt = 0, sty = 0;
    const int n = static_cast<int>(t.size());
    for (int i = 0; i < n; ++i) {
        const double y = std::log(std::max(grad_max[i], 1e-300));
        st += t[i];
        sy += y;
        stt += t[i] * t[i];
        sty += t[i] * y;
    }
    const double denom = n * stt - st * st;
    const double c2 = (n * sty - st * sy) / denom;
    double logc1 = (sy - c2 * st) / n;
    double lift = 0.0;
    for (int i = 0; i < n; ++i) {
        const double y = std::log(std::max(grad_max[i], 1e-300));
        lift = std::max(lift, y - (logc1 + c2 * t[i]));
    }
    logc1 += lift;
    rep.satisfied = std::isfinite(c2) && c2 <= max_rate;
    rep.worst_margin = c2;
    rep.note = "C1=" + std::to_string(std::exp(logc1)) + " C2=" + std::to_string(c2);
    rep.per_snapshot_ok.assign(t.size(), rep.satisfied);
    return rep;
}

BoundReport check_uniform_bounds(const std::vector<double>& t,
                                 const std::vector<double>& value_max,
                                 double initial_scale, double growth_cap) {
    BoundReport rep;
    rep.kind = BoundKind::UniformBounds;
    rep.satisfied = true;
    const double cap = growth_cap * std::max(initial_scale, 1e-300);
    for (size_t i = 0; i < t.size(); ++i) {
        const bool ok = std::isfinite(value_max[i]) && value_max[i] <= cap;
        rep.per_snapshot_ok.push_back(ok);
        const double margin = value_max[i] / cap - 1.0;
        if (margin > rep.worst_margin) {
            rep.worst_margin = margin;
            rep.worst_t = t[i];
        }
        if (!ok) rep.satisfied = false;
    }
    return rep;
}

}  // namespace ctlab::detectors
