use std::f64::consts::E;

use crate::error::{Error, Result};

const MAX_ITERATIONS: usize = 100;

/// Lower real branch `W₋₁(z)` for `z ∈ [−1/e, 0)`, by Halley iteration.
///
/// The asymptotic seed `ln(−z) − ln(−ln(−z))` degenerates to the branch
/// point itself as `z → −1/e`, where Halley's step vanishes, so the
/// branch-point series seeds the iteration there instead.
pub fn lambert_w_minus1(z: f64) -> Result<f64> {
    let branch = -1.0 / E;
    if !(z.is_finite() && z < 0.0 && z >= branch - 1e-15) {
        return Err(Error::Domain { point: vec![z] });
    }
    let q = 2.0 * (1.0 + E * z);
    if q <= 0.0 {
        return Ok(-1.0);
    }
    let mut w = if q < 0.5 {
        let p = -q.sqrt();
        -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
    } else {
        let l1 = (-z).ln();
        l1 - (-l1).ln()
    };
    for _ in 0..MAX_ITERATIONS {
        let ew = w.exp();
        let f = w * ew - z;
        let wp1 = w + 1.0;
        if wp1 == 0.0 {
            break;
        }
        let step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
        let next = (w - step).min(-1.0);
        let done = (next - w).abs() <= 4.0 * f64::EPSILON * next.abs();
        w = next;
        if done {
            break;
        }
    }
    Ok(w)
}

/// Root `s` of the critically damped envelope `(1 + s) e^{−s} = ε`,
/// i.e. `−W₋₁(−ε/e) − 1`.
pub fn envelope_factor(epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::Parameter(format!("epsilon must lie in (0, 1], got {epsilon}")));
    }
    Ok((-lambert_w_minus1(-epsilon / E)? - 1.0).max(0.0))
}
