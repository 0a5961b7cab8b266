//! Adaptive Dormand–Prince 5(4) integrator used as an independent reference.

use super::system::DenseSystem;
use crate::error::{Error, Result};

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

// The field is autonomous, so the stage times are not needed.
// y = (p, q);  dp/dt = -ν q - ∇V(q),  dq/dt = p/m
fn vector_field(sys: &DenseSystem, y: &[f64], out: &mut [f64], grad: &mut [f64]) {
    let len = sys.len();
    let n = sys.dim;
    let (p, q) = y.split_at(len);
    sys.potential_gradient(q, grad);
    let (dp, dq) = out.split_at_mut(len);
    for i in 0..len {
        let s = i / n;
        dp[i] = -sys.nu[s] * q[i] - grad[i];
        dq[i] = p[i] / sys.mass[s];
    }
}

/// Integrates from `(p, q)` over time `t` with absolute and relative tolerance `tol`.
pub(crate) fn dopri5(sys: &DenseSystem, p: &mut [f64], q: &mut [f64], t: f64, tol: f64) -> Result<()> {
    let len = sys.len();
    let mut y: Vec<f64> = p.iter().chain(q.iter()).copied().collect();
    if t == 0.0 || len == 0 {
        return Ok(());
    }
    let dir = t.signum();
    let total = t.abs();
    let mut k = vec![vec![0.0; 2 * len]; 7];
    let mut grad = vec![0.0; len];
    let mut tmp = vec![0.0; 2 * len];
    let mut y5 = vec![0.0; 2 * len];
    let mut done = 0.0;
    let mut h = (0.01f64).min(total);
    vector_field(sys, &y, &mut k[0], &mut grad);
    while done < total {
        if h < 1e-14 * total.max(1.0) {
            return Err(Error::StepSizeUnderflow { t: dir * done });
        }
        let last = done + h >= total;
        let step = if last { total - done } else { h };
        let hs = dir * step;
        for stage in 1..7 {
            for i in 0..2 * len {
                let mut acc = y[i];
                for j in 0..stage {
                    acc += hs * A[stage][j] * k[j][i];
                }
                tmp[i] = acc;
            }
            vector_field(sys, &tmp, &mut k[stage], &mut grad);
        }
        let mut err = 0.0;
        for i in 0..2 * len {
            let mut hi = y[i];
            let mut lo = y[i];
            for s in 0..7 {
                hi += hs * B5[s] * k[s][i];
                lo += hs * B4[s] * k[s][i];
            }
            y5[i] = hi;
            let scale = tol + tol * y[i].abs().max(hi.abs());
            err += ((hi - lo) / scale).powi(2);
        }
        let err = (err / (2 * len) as f64).sqrt();
        if !err.is_finite() {
            return Err(Error::BlowUp { t: dir * done });
        }
        if err <= 1.0 {
            done = if last { total } else { done + step };
            y.copy_from_slice(&y5);
            // first-same-as-last: stage 7 was evaluated at the new point
            let (first, rest) = k.split_at_mut(1);
            first[0].copy_from_slice(&rest[5]);
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h = step * factor;
    }
    p.copy_from_slice(&y[..len]);
    q.copy_from_slice(&y[len..]);
    Ok(())
}
