use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Outcome of comparing analytic gradients against central differences.
#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub coordinates: usize,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    /// `(tensor index, flat coordinate, analytic, numeric)` of the worst coordinate.
    pub worst: Option<(usize, usize, f64, f64)>,
    pub tolerance: f64,
    /// Denominator floor used for this objective.
    pub floor: f64,
    pub passed: bool,
}

/// Relative error with a floor on the denominator: gradients below the floor
/// are compared in absolute terms, where central differences are only
/// accurate to roughly `step²` and float cancellation.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

/// The floor also grows with `|f|`: cancellation in `f(x+h) - f(x-h)` leaves
/// noise of order `ε·|f|/h` in the numeric derivative.
pub const OBJECTIVE_FLOOR_SCALE: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    relative_error_with_floor(analytic, numeric, REL_ERROR_FLOOR)
}

pub fn relative_error_with_floor(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Checks `f` at `params` (a single tensor).
pub fn finite_diff_check<F>(mut f: F, params: &Tensor, step: f64, tol: f64) -> Result<GradCheckReport>
where
    F: FnMut(&mut Tape, Var) -> Result<Var>,
{
    finite_diff_check_many(|tape, vars| f(tape, vars[0]), std::slice::from_ref(params), step, tol)
}

/// Checks every coordinate of every tensor in `params`. `f` records a scalar
/// on the tape from parameter handles given in the same order.
pub fn finite_diff_check_many<F>(mut f: F, params: &[Tensor], step: f64, tol: f64) -> Result<GradCheckReport>
where
    F: FnMut(&mut Tape, &[Var]) -> Result<Var>,
{
    if step <= 0.0 {
        return Err(Error::Config(format!("finite-difference step must be positive, got {step}")));
    }
    let (analytic, objective): (Vec<Tensor>, f64) = {
        let mut tape = Tape::new();
        let vars: Vec<Var> = params.iter().map(|t| tape.parameter(t.clone())).collect();
        let out = f(&mut tape, &vars)?;
        let value = tape.value(out).item();
        if !value.is_finite() {
            return Err(Error::NonFinite("objective is not finite".into()));
        }
        let grads = tape.backward(out)?;
        (vars.iter().map(|&v| grads.get(v)).collect(), value)
    };
    let floor = REL_ERROR_FLOOR.max(objective.abs() * OBJECTIVE_FLOOR_SCALE);

    let mut eval = |values: &[Tensor]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = values.iter().map(|t| tape.parameter(t.clone())).collect();
        let out = f(&mut tape, &vars)?;
        let v = tape.value(out).item();
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("objective evaluated to {v}")));
        }
        Ok(v)
    };

    let mut work = params.to_vec();
    let mut report = GradCheckReport {
        coordinates: 0,
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        worst: None,
        tolerance: tol,
        floor,
        passed: true,
    };
    for t in 0..params.len() {
        for c in 0..params[t].len() {
            let original = params[t].data()[c];
            work[t].data_mut()[c] = original + step;
            let up = eval(&work)?;
            work[t].data_mut()[c] = original - step;
            let down = eval(&work)?;
            work[t].data_mut()[c] = original;

            let numeric = (up - down) / (2.0 * step);
            let a = analytic[t].data()[c];
            let rel = relative_error_with_floor(a, numeric, floor);
            report.coordinates += 1;
            report.max_abs_error = report.max_abs_error.max((a - numeric).abs());
            if rel > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = rel.max(report.max_rel_error);
                report.worst = Some((t, c, a, numeric));
            }
        }
    }
    report.passed = report.max_rel_error < tol;
    Ok(report)
}
