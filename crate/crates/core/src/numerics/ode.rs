//! Adaptive Dormand–Prince 5(4) integration of linear (and general) systems.
//!
//! This integrator is deliberately independent of the matrix exponential: it is
//! the oracle against which exponential propagation and fixed points are checked.

use super::{CMatrix, CVector, C64};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; `None` picks one from the first derivative.
    pub h_init: Option<f64>,
    /// Steps below `h_min_rel·|t|` (or absolute `1e-300`) count as underflow.
    pub h_min_rel: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-13,
            h_init: None,
            h_min_rel: 1e-14,
            max_steps: 10_000_000,
        }
    }
}

// Dormand–Prince tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrate y' = f(t, y) from `t0` to `t1` (either direction).
pub fn integrate<F>(mut f: F, y0: &CVector, t0: f64, t1: f64, opts: &OdeOptions) -> Result<CVector>
where
    F: FnMut(f64, &CVector) -> CVector,
{
    if !(t0.is_finite() && t1.is_finite()) {
        return Err(Error::Domain("integration bounds must be finite".into()));
    }
    if y0.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite("ODE initial state"));
    }
    let span = t1 - t0;
    if span == 0.0 {
        return Ok(y0.clone());
    }
    let dir = span.signum();
    let n = y0.len();

    let mut t = t0;
    let mut y = y0.clone();
    let mut k0 = f(t, &y);

    let mut h = match opts.h_init {
        Some(h) => h.abs().min(span.abs()),
        None => {
            let d0 = scaled_norm(&y, &y, opts);
            let d1 = scaled_norm(&k0, &y, opts);
            let guess = if d0 < 1e-5 || d1 < 1e-5 {
                1e-6
            } else {
                0.01 * d0 / d1
            };
            guess.min(span.abs())
        }
    };

    let mut k: Vec<CVector> = vec![CVector::zeros(n); 7];
    let mut steps = 0usize;
    while (t1 - t) * dir > 0.0 {
        steps += 1;
        if steps > opts.max_steps {
            return Err(Error::Stiffness { t, h });
        }
        let remaining = (t1 - t).abs();
        let last = h >= remaining;
        if last {
            h = remaining;
        }
        let hs = h * dir;

        k[0] = k0.clone();
        for s in 1..7 {
            let mut ys = y.clone();
            for (j, kj) in k.iter().enumerate().take(s) {
                let a = A[s][j];
                if a != 0.0 {
                    ys.axpy(C64::new(hs * a, 0.0), kj, C64::new(1.0, 0.0));
                }
            }
            k[s] = f(t + C[s] * hs, &ys);
        }

        let mut y5 = y.clone();
        let mut err = CVector::zeros(n);
        for s in 0..7 {
            if B5[s] != 0.0 {
                y5.axpy(C64::new(hs * B5[s], 0.0), &k[s], C64::new(1.0, 0.0));
            }
            let e = B5[s] - B4[s];
            if e != 0.0 {
                err.axpy(C64::new(hs * e, 0.0), &k[s], C64::new(1.0, 0.0));
            }
        }

        let en = error_norm(&err, &y, &y5, opts);
        if !en.is_finite() {
            return Err(Error::NonFinite("ODE step"));
        }
        if en <= 1.0 {
            t = if last { t1 } else { t + hs };
            y = y5;
            // FSAL: the last stage is f at the accepted point.
            k0 = k[6].clone();
            let fac = if en == 0.0 {
                5.0
            } else {
                (0.9 * en.powf(-0.2)).clamp(0.2, 5.0)
            };
            h *= fac;
        } else {
            h *= (0.9 * en.powf(-0.2)).clamp(0.1, 1.0);
        }
        let floor = (opts.h_min_rel * t.abs()).max(1e-300);
        if h < floor {
            return Err(Error::Stiffness { t, h });
        }
    }
    Ok(y)
}

fn scaled_norm(v: &CVector, y: &CVector, opts: &OdeOptions) -> f64 {
    let n = v.len().max(1) as f64;
    let s: f64 = v
        .iter()
        .zip(y.iter())
        .map(|(vi, yi)| {
            let sc = opts.atol + opts.rtol * yi.norm();
            (vi.norm() / sc).powi(2)
        })
        .sum();
    (s / n).sqrt()
}

fn error_norm(err: &CVector, y0: &CVector, y1: &CVector, opts: &OdeOptions) -> f64 {
    let n = err.len().max(1) as f64;
    let s: f64 = err
        .iter()
        .zip(y0.iter().zip(y1.iter()))
        .map(|(e, (a, b))| {
            let sc = opts.atol + opts.rtol * a.norm().max(b.norm());
            (e.norm() / sc).powi(2)
        })
        .sum();
    (s / n).sqrt()
}

/// Solve ∂ₜσ = G(t)·σ from `t0` to `t1`.
///
/// `generator` must be smooth on the interval; split piecewise-constant
/// schedules with [`propagate_piecewise`] so no step straddles a switch.
pub fn ode_propagate<G>(
    generator: G,
    sigma0: &CVector,
    t0: f64,
    t1: f64,
    opts: &OdeOptions,
) -> Result<CVector>
where
    G: Fn(f64) -> CMatrix,
{
    let g = generator(t0);
    if g.nrows() != sigma0.len() || g.ncols() != sigma0.len() {
        return Err(Error::Dimension(format!(
            "generator is {}×{}, state has length {}",
            g.nrows(),
            g.ncols(),
            sigma0.len()
        )));
    }
    integrate(|t, y| generator(t) * y, sigma0, t0, t1, opts)
}

/// Apply a sequence of constant generators, `(G, duration)` in time order.
pub fn propagate_piecewise(
    pieces: &[(&CMatrix, f64)],
    sigma0: &CVector,
    opts: &OdeOptions,
) -> Result<CVector> {
    let mut y = sigma0.clone();
    for (g, dt) in pieces {
        if g.nrows() != y.len() || g.ncols() != y.len() {
            return Err(Error::Dimension(format!(
                "generator is {}×{}, state has length {}",
                g.nrows(),
                g.ncols(),
                y.len()
            )));
        }
        if *dt < 0.0 {
            return Err(Error::Domain(format!("negative stroke duration {dt}")));
        }
        y = integrate(|_, v| *g * v, &y, 0.0, *dt, opts)?;
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::mat_exp;

    #[test]
    fn zero_generator_keeps_state() {
        let g = CMatrix::zeros(3, 3);
        let y0 = CVector::from_vec(vec![
            C64::new(0.2, 0.0),
            C64::new(0.3, 0.1),
            C64::new(0.5, 0.0),
        ]);
        let y = ode_propagate(|_| g.clone(), &y0, 0.0, 5.0, &OdeOptions::default()).unwrap();
        assert_eq!(y, y0);
    }

    #[test]
    fn scalar_decay_matches_closed_form() {
        let y0 = CVector::from_element(1, C64::new(1.0, 0.0));
        let y = integrate(
            |_, y| y * C64::new(-2.0, 3.0),
            &y0,
            0.0,
            1.5,
            &OdeOptions::default(),
        )
        .unwrap();
        let exact = (C64::new(-2.0, 3.0) * 1.5).exp();
        assert!((y[0] - exact).norm() < 1e-9);
    }

    #[test]
    fn backwards_integration() {
        let y0 = CVector::from_element(1, C64::new(1.0, 0.0));
        let y = integrate(
            |_, y| y * C64::new(-1.0, 0.0),
            &y0,
            1.0,
            0.0,
            &OdeOptions::default(),
        )
        .unwrap();
        assert!((y[0].re - 1f64.exp()).abs() < 1e-9);
    }

    #[test]
    fn constant_generator_matches_exponential() {
        let g = CMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new(-1.0, 0.0),
                C64::new(0.5, 0.0),
                C64::new(1.0, 0.0),
                C64::new(-0.5, 0.0),
            ],
        );
        let y0 = CVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        let y = ode_propagate(|_| g.clone(), &y0, 0.0, 2.0, &OdeOptions::default()).unwrap();
        let e = mat_exp(&g, 2.0).unwrap() * &y0;
        assert!((y - e).camax() < 1e-9);
    }

    #[test]
    fn piecewise_matches_product_of_exponentials() {
        let a = CMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new(0.0, 0.0),
                C64::new(0.0, -1.0),
                C64::new(0.0, -1.0),
                C64::new(0.0, 0.0),
            ],
        );
        let b = CMatrix::from_diagonal(&CVector::from_vec(vec![
            C64::new(-0.3, 0.0),
            C64::new(-1.1, 0.0),
        ]));
        let y0 = CVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        let y = propagate_piecewise(&[(&a, 0.7), (&b, 1.3)], &y0, &OdeOptions::default()).unwrap();
        let e = mat_exp(&b, 1.3).unwrap() * mat_exp(&a, 0.7).unwrap() * &y0;
        assert!((y - e).camax() < 1e-9);
    }

    #[test]
    fn stiff_blowup_reports_underflow() {
        let y0 = CVector::from_element(1, C64::new(1.0, 0.0));
        // finite-time blow-up of y' = y², at t = 1
        let r = integrate(
            |_, y| y.component_mul(y),
            &y0,
            0.0,
            2.0,
            &OdeOptions::default(),
        );
        assert!(matches!(
            r,
            Err(Error::Stiffness { .. }) | Err(Error::NonFinite(_))
        ));
    }
}
