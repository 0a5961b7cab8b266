//! Strang splitting: half kick, exact harmonic rotation, half kick.

use super::system::DenseSystem;
use crate::error::{Error, Result};

/// Advances `(p, q)` by `n_steps` steps of size `h`, calling `observe`
/// after every `every` steps (and never when `every == 0`).
pub(crate) fn strang<F>(
    sys: &DenseSystem,
    p: &mut [f64],
    q: &mut [f64],
    h: f64,
    n_steps: usize,
    t0: f64,
    every: usize,
    mut observe: F,
) -> Result<()>
where
    F: FnMut(f64, &[f64], &[f64]),
{
    let n = sys.dim;
    let sites = sys.region.len();
    if sys.is_free() && sys.fuse_free {
        // no kicks: consecutive rotations fuse into one per recorded segment
        let mut done = 0;
        let chunk = if every == 0 { n_steps } else { every };
        while done < n_steps {
            let k = chunk.min(n_steps - done);
            sys.rotate(p, q, k as f64 * h);
            done += k;
            if every != 0 {
                observe(t0 + done as f64 * h, p, q);
            }
        }
        return Ok(());
    }

    let cs: Vec<(f64, f64)> = sys
        .freq
        .iter()
        .map(|w| ((w * h).cos(), (w * h).sin()))
        .collect();
    let mut grad = vec![0.0; p.len()];
    sys.potential_gradient(q, &mut grad);
    for step in 1..=n_steps {
        for (pi, gi) in p.iter_mut().zip(&grad) {
            *pi -= 0.5 * h * gi;
        }
        for (s, &(c, sn)) in cs.iter().enumerate().take(sites) {
            sys.rotate_site(p, q, s, n, c, sn);
        }
        sys.potential_gradient(q, &mut grad);
        for (pi, gi) in p.iter_mut().zip(&grad) {
            *pi -= 0.5 * h * gi;
        }
        let t = t0 + step as f64 * h;
        if !p.iter().chain(q.iter()).all(|x| x.is_finite()) {
            return Err(Error::BlowUp { t });
        }
        if every != 0 && step % every == 0 {
            observe(t, p, q);
        }
    }
    Ok(())
}
