//! Natural cubic spline upsampling of frame-rate curves.

use crate::error::{Error, Result};

/// Evaluates the natural cubic spline through `(positions[i], values[i])`
/// at every integer sample `0..target_len`. Outside the knot range the
/// first/last knot value is held. Fewer than four knots fall back to
/// piecewise-linear interpolation.
pub fn spline_interpolate(values: &[f64], positions: &[f64], target_len: usize) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::invalid("spline needs at least one knot"));
    }
    if values.len() != positions.len() {
        return Err(Error::shape(
            "spline_interpolate",
            format!("{} values vs {} positions", values.len(), positions.len()),
        ));
    }
    if positions.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("knot positions must be strictly increasing"));
    }
    let n = values.len();
    let second = if n >= 4 {
        natural_second_derivatives(values, positions)
    } else {
        vec![0.0; n]
    };

    let mut seg = 0;
    Ok((0..target_len)
        .map(|i| {
            let x = i as f64;
            if x <= positions[0] {
                return values[0];
            }
            if x >= positions[n - 1] {
                return values[n - 1];
            }
            while positions[seg + 1] < x {
                seg += 1;
            }
            let (x0, x1) = (positions[seg], positions[seg + 1]);
            let h = x1 - x0;
            let a = (x1 - x) / h;
            let b = (x - x0) / h;
            a * values[seg]
                + b * values[seg + 1]
                + ((a * a * a - a) * second[seg] + (b * b * b - b) * second[seg + 1]) * h * h
                    / 6.0
        })
        .collect())
}

/// Solves the tridiagonal system for knot second derivatives with
/// `M[0] = M[n-1] = 0`.
fn natural_second_derivatives(y: &[f64], x: &[f64]) -> Vec<f64> {
    let n = y.len();
    let mut m = vec![0.0; n];
    let inner = n - 2;
    let mut diag = vec![0.0; inner];
    let mut upper = vec![0.0; inner];
    let mut rhs = vec![0.0; inner];
    for j in 0..inner {
        let i = j + 1;
        let h0 = x[i] - x[i - 1];
        let h1 = x[i + 1] - x[i];
        diag[j] = (h0 + h1) / 3.0;
        upper[j] = h1 / 6.0;
        rhs[j] = (y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0;
    }
    // Thomas algorithm; the sub-diagonal entry of row j is h0 / 6.
    for j in 1..inner {
        let lower = (x[j + 1] - x[j]) / 6.0;
        let w = lower / diag[j - 1];
        diag[j] -= w * upper[j - 1];
        rhs[j] -= w * rhs[j - 1];
    }
    for j in (0..inner).rev() {
        let next = if j + 1 < inner { m[j + 2] } else { 0.0 };
        m[j + 1] = (rhs[j] - upper[j] * next) / diag[j];
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn constant_knots_give_constant_curve() {
        let y = spline_interpolate(&[0.7; 4], &[0.0, 10.0, 20.0, 30.0], 40).unwrap();
        assert!(y.iter().all(|&v| (v - 0.7).abs() < 1e-12));
    }

    #[test]
    fn tracks_a_sampled_sine() {
        let hop = 512.0;
        let period_frames = 16.0;
        let knots = 33;
        let positions: Vec<f64> = (0..knots).map(|i| i as f64 * hop).collect();
        let f = |x: f64| (2.0 * PI * x / (hop * period_frames)).sin();
        let values: Vec<f64> = positions.iter().map(|&p| f(p)).collect();
        let len = (hop * (knots - 1) as f64) as usize + 1;
        let y = spline_interpolate(&values, &positions, len).unwrap();
        let worst = y
            .iter()
            .enumerate()
            .fold(0.0f64, |m, (i, v)| m.max((v - f(i as f64)).abs()));
        assert!(worst < 0.01, "max deviation {worst}");
    }

    #[test]
    fn short_inputs_fall_back_to_linear() {
        let y = spline_interpolate(&[0.0, 1.0], &[0.0, 4.0], 6).unwrap();
        assert_eq!(y, vec![0.0, 0.25, 0.5, 0.75, 1.0, 1.0]);
    }

    #[test]
    fn rejects_bad_knots() {
        assert!(spline_interpolate(&[], &[], 4).is_err());
        assert!(spline_interpolate(&[1.0, 2.0], &[0.0], 4).is_err());
        assert!(spline_interpolate(&[1.0, 2.0], &[3.0, 3.0], 4).is_err());
    }

    fn check_knots_and_bounds(values: &[f64], tol_fraction: f64) -> Result<(), TestCaseError> {
        let positions: Vec<f64> = (0..values.len()).map(|i| (i * 64) as f64).collect();
        let len = (values.len() - 1) * 64 + 10;
        let y = spline_interpolate(values, &positions, len).unwrap();
        for (v, p) in values.iter().zip(&positions) {
            prop_assert!((y[*p as usize] - v).abs() < 1e-9);
        }
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let tol = tol_fraction * (hi - lo);
        prop_assert!(y.iter().all(|&v| v >= lo - tol - 1e-12 && v <= hi + tol + 1e-12));
        Ok(())
    }

    proptest! {
        // Frame-rate curves: a few slow partials, at least six knots per period.
        #[test]
        fn exact_at_knots_and_bounded(
            partials in prop::collection::vec((6.0f64..40.0, 0.0f64..1.0, 0.0f64..6.3), 1..4),
            knots in 8usize..40,
        ) {
            let values: Vec<f64> = (0..knots)
                .map(|k| partials.iter().map(|(period, amp, phase)| amp * (2.0 * PI * k as f64 / period + phase).sin()).sum())
                .collect();
            check_knots_and_bounds(&values, 0.2)?;
        }

        // Arbitrary knots: the cubic can overshoot further than on smooth curves.
        #[test]
        fn bounded_on_arbitrary_knots(values in prop::collection::vec(0.0f64..1.0, 4..20)) {
            check_knots_and_bounds(&values, 0.3)?;
        }
    }
}
