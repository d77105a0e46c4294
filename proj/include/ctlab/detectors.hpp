#pragma once

#include <optional>
#include <string>
#include <vector>

namespace ctlab::detectors {

// Default guards: gradient witness for characteristic/ODE runs, state
// magnitude for evolved quantities. Far above smooth-regime scales, far
// below overflow.
inline constexpr double kGradientGuard = 1e6;
inline constexpr double kStateGuard = 1e12;

enum class Termination {
    Completed,         // reached the horizon
    GuardExceeded,     // blowup witness crossed the guard
    ParticleCrossing,  // adjacent characteristics crossed
    StepFloor,         // step rejection persisted below the dt floor
    Stopped,           // external stop (step or wall budget)
};

const char* termination_name(Termination t);

// The condensed per-run record every solver produces and the classifier
// consumes. `witness` is the blowup witness series (|g|, max|G|, max|e|
// depending on the system); one entry per recorded step.
struct RunSeries {
    std::vector<double> t;
    std::vector<double> witness;
    std::vector<double> max_ux;
    std::vector<double> min_rho;
    std::vector<double> max_rho;
    Termination termination = Termination::Completed;
    double t_end = 0.0;
    double horizon = 0.0;
    std::optional<double> x_at_termination;
    std::vector<std::string> bound_violations;  // populated by bound checks
};

enum class OutcomeKind { GlobalSmooth, Blowup, Indeterminate };

const char* outcome_name(OutcomeKind k);

struct BlowupFit {
    double t_c = 0.0;
    double quality = 0.0;  // relative rms residual of the 1/m fit
    bool accepted = false;
    std::string reject_reason;
};

struct RunOutcome {
    OutcomeKind kind = OutcomeKind::Indeterminate;
    double horizon = 0.0;              // GlobalSmooth: verified horizon
    double t_c_estimate = 0.0;         // Blowup: fitted breakdown time
    std::optional<double> x_c;
    double fit_quality = 0.0;
    double max_witness = 0.0;
    double max_ux = 0.0;
    double min_rho = 0.0;
    double max_rho = 0.0;
    std::vector<std::string> flags;
};

// Least-squares fit of 1/m ~ a (t_c - t) over the last `window` samples.
// Requires a monotone increasing window; rejects poor fits. The threshold
// tolerates the mild curvature of 1/m away from the pole while rejecting
// non-diverging series outright.
BlowupFit fit_blowup_time(const std::vector<double>& t,
                          const std::vector<double>& m,
                          int window = 8,
                          double quality_threshold = 0.15);

// GlobalSmooth when the witness stayed below the guard through the
// horizon; Blowup when the solver terminated on a breakdown signature and
// the t_c fit is stable; Indeterminate otherwise. Recorded bound
// violations downgrade GlobalSmooth to Indeterminate, never silently.
RunOutcome classify(const RunSeries& series, double guard);

// --- theorem-prescribed bound checks ------------------------------------

enum class BoundKind {
    ERange,            // 0 <= e <= M with M = max(sup rho0, sup e0)
    DensityBound,      // rho <= strict-hyperbolic bound (caller supplies bound series)
    GradientGrowth,    // ||rho_x||_inf under an exponential envelope
    UniformBounds,     // alignment-only runs: rho, G stay uniformly bounded
};

struct BoundReport {
    BoundKind kind;
    bool applicable = true;
    bool satisfied = false;
    double worst_margin = 0.0;  // positive = worst violation magnitude
    double worst_t = 0.0;
    std::string note;
    std::vector<bool> per_snapshot_ok;
};

// e-range: every sample of every snapshot of e in [lo - tol, hi + tol].
BoundReport check_e_range(const std::vector<double>& t,
                          const std::vector<double>& e_min,
                          const std::vector<double>& e_max,
                          double lo, double hi, double tol);

// density vs a per-snapshot bound value; slack is the tolerated relative excess.
BoundReport check_density_bound(const std::vector<double>& t,
                                const std::vector<double>& rho_max,
                                const std::vector<double>& bound,
                                double slack);

// fits log m <= log C1 + C2 t over the series and reports the envelope
// constants; satisfied when a finite envelope with C2 within `max_rate` exists.
BoundReport check_gradient_growth(const std::vector<double>& t,
                                  const std::vector<double>& grad_max,
                                  double max_rate);

// uniform boundedness: values stay within growth_cap times the initial scale.
BoundReport check_uniform_bounds(const std::vector<double>& t,
                                 const std::vector<double>& value_max,
                                 double initial_scale, double growth_cap);

}  // namespace ctlab::detectors
