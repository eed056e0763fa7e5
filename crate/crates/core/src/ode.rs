//! Explicit Runge-Kutta steps for autonomous systems `y' = f(y)` over flat `f64`
//! state vectors.

use crate::error::Result;

/// Butcher tableau of an explicit method with an optional embedded error weight row.
#[derive(Debug, Clone, Copy)]
pub struct Tableau {
    pub a: &'static [&'static [f64]],
    pub b: &'static [f64],
    /// `b − b̂` of the embedded lower-order solution.
    pub e: Option<&'static [f64]>,
    pub order: u32,
}

pub const RK4: Tableau = Tableau {
    a: &[&[], &[0.5], &[0.0, 0.5], &[0.0, 0.0, 1.0]],
    b: &[1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0],
    e: None,
    order: 4,
};

/// Dormand-Prince 5(4); the propagated solution is the fifth-order one.
pub const DOPRI5: Tableau = Tableau {
    a: &[
        &[],
        &[1.0 / 5.0],
        &[3.0 / 40.0, 9.0 / 40.0],
        &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
        &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
        &[9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
        &[35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ],
    b: &[35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0],
    e: Some(&[
        35.0 / 384.0 - 5179.0 / 57600.0,
        0.0,
        500.0 / 1113.0 - 7571.0 / 16695.0,
        125.0 / 192.0 - 393.0 / 640.0,
        -2187.0 / 6784.0 + 92097.0 / 339200.0,
        11.0 / 84.0 - 187.0 / 2100.0,
        -1.0 / 40.0,
    ]),
    order: 5,
};

/// Result of one step: the new state and, for embedded pairs, the error estimate.
#[derive(Debug, Clone)]
pub struct Step {
    pub y: Vec<f64>,
    pub error: Option<Vec<f64>>,
}

pub fn step<F>(tab: &Tableau, y: &[f64], h: f64, mut f: F) -> Result<Step>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let stages = tab.b.len();
    let mut k: Vec<Vec<f64>> = Vec::with_capacity(stages);
    let mut tmp = vec![0.0; y.len()];
    for s in 0..stages {
        tmp.copy_from_slice(y);
        for (j, &a) in tab.a[s].iter().enumerate() {
            if a != 0.0 {
                for (t, kj) in tmp.iter_mut().zip(&k[j]) {
                    *t += h * a * kj;
                }
            }
        }
        k.push(f(&tmp)?);
    }
    let mut out = y.to_vec();
    for (s, &b) in tab.b.iter().enumerate() {
        if b != 0.0 {
            for (o, ks) in out.iter_mut().zip(&k[s]) {
                *o += h * b * ks;
            }
        }
    }
    let error = tab.e.map(|e| {
        let mut err = vec![0.0; y.len()];
        for (s, &w) in e.iter().enumerate() {
            if w != 0.0 {
                for (o, ks) in err.iter_mut().zip(&k[s]) {
                    *o += h * w * ks;
                }
            }
        }
        err
    });
    Ok(Step { y: out, error })
}

/// Mixed absolute/relative RMS error norm used by the adaptive controller.
pub fn error_norm(err: &[f64], y0: &[f64], y1: &[f64], tol: f64) -> f64 {
    let n = err.len().max(1) as f64;
    let sum: f64 = err
        .iter()
        .zip(y0.iter().zip(y1))
        .map(|(e, (a, b))| {
            let sc = tol * (1.0 + a.abs().max(b.abs()));
            (e / sc).powi(2)
        })
        .sum();
    (sum / n).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn harmonic(y: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![y[1], -y[0]])
    }

    fn endpoint_error(tab: &Tableau, n: usize) -> f64 {
        let h = 1.0 / n as f64;
        let mut y = vec![1.0, 0.0];
        for _ in 0..n {
            y = step(tab, &y, h, harmonic).unwrap().y;
        }
        ((y[0] - 1f64.cos()).powi(2) + (y[1] + 1f64.sin()).powi(2)).sqrt()
    }

    #[test]
    fn rk4_is_fourth_order() {
        let ratio = endpoint_error(&RK4, 20) / endpoint_error(&RK4, 40);
        assert!((14.0..18.0).contains(&ratio), "{ratio}");
    }

    #[test]
    fn dopri5_is_fifth_order_with_small_error_estimate() {
        let ratio = endpoint_error(&DOPRI5, 10) / endpoint_error(&DOPRI5, 20);
        assert!((26.0..38.0).contains(&ratio), "{ratio}");
        let s = step(&DOPRI5, &[1.0, 0.0], 0.1, harmonic).unwrap();
        let e = s.error.unwrap();
        assert!(e.iter().all(|v| v.abs() < 1e-6));
    }

    #[test]
    fn tableau_rows_are_consistent() {
        for tab in [RK4, DOPRI5] {
            assert!((tab.b.iter().sum::<f64>() - 1.0).abs() < 1e-15);
            if let Some(e) = tab.e {
                assert!(e.iter().sum::<f64>().abs() < 1e-15);
            }
        }
    }
}
