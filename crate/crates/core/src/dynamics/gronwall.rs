use crate::error::{usage, Result};
use crate::numeric::cumulative_trapezoid;
use serde::{Deserialize, Serialize};

/// Coefficients of `x' <= C1 x^a + C2 x` sampled on a time grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GronwallInput {
    pub a: f64,
    pub t: Vec<f64>,
    pub c1: Vec<f64>,
    pub c2: Vec<f64>,
    pub x0: f64,
}

impl GronwallInput {
    /// Constant coefficients on `steps + 1` uniform samples of `[0, horizon]`.
    pub fn constant(a: f64, c1: f64, c2: f64, x0: f64, horizon: f64, steps: usize) -> Self {
        let t: Vec<f64> = (0..=steps).map(|k| horizon * k as f64 / steps as f64).collect();
        let len = t.len();
        Self { a, t, c1: vec![c1; len], c2: vec![c2; len], x0 }
    }

    fn validate(&self) -> Result<()> {
        if !(self.a >= 0.0) || !self.a.is_finite() {
            return usage(format!("exponent a = {} must be nonnegative", self.a));
        }
        if !(self.x0 >= 0.0) || !self.x0.is_finite() {
            return usage(format!("initial value {} must be nonnegative", self.x0));
        }
        let n = self.t.len();
        if n < 2 || self.c1.len() != n || self.c2.len() != n {
            return usage("time grid and coefficient series must have equal length of at least 2");
        }
        if self.t.windows(2).any(|w| !(w[1] > w[0])) {
            return usage("time grid must be strictly increasing");
        }
        if self.c1.iter().chain(&self.c2).any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return usage("coefficients must be finite and nonnegative");
        }
        Ok(())
    }
}

/// Envelope from the generalized Grönwall lemma.
#[derive(Debug, Clone, Serialize)]
pub struct GronwallBound {
    /// Times at which the bound is finite.
    pub t: Vec<f64>,
    pub bound: Vec<f64>,
    /// Blow-up time of the superlinear envelope, `None` if it stays finite
    /// over the horizon.
    pub t_star: Option<f64>,
}

/// Evaluates the bound with trapezoid quadrature of the coefficient series.
///
/// For `a > 1` the series is truncated at the first sample where
/// `I^t >= (x0)^{1-a}` and `T_*` is located by linear interpolation of `I`.
/// For `a = 1` the bound is `x0 exp(∫ (C1 + C2))`.
pub fn gronwall_bound(inp: &GronwallInput) -> Result<GronwallBound> {
    inp.validate()?;
    let a = inp.a;
    let t = &inp.t;
    let k2 = cumulative_trapezoid(t, &inp.c2);
    if a > 1.0 {
        let weighted: Vec<f64> =
            inp.c1.iter().zip(&k2).map(|(c, k)| (a - 1.0) * c * ((a - 1.0) * k).exp()).collect();
        let big_i = cumulative_trapezoid(t, &weighted);
        let level = inp.x0.powf(1.0 - a);
        let mut out_t = Vec::new();
        let mut bound = Vec::new();
        let mut t_star = None;
        for k in 0..t.len() {
            if big_i[k] >= level {
                let (i0, i1) = (big_i[k - 1], big_i[k]);
                t_star = Some(t[k - 1] + (t[k] - t[k - 1]) * (level - i0) / (i1 - i0));
                break;
            }
            out_t.push(t[k]);
            bound.push(k2[k].exp() * (level - big_i[k]).powf(-1.0 / (a - 1.0)));
        }
        return Ok(GronwallBound { t: out_t, bound, t_star });
    }
    if a == 1.0 {
        let k1 = cumulative_trapezoid(t, &inp.c1);
        let bound = k1.iter().zip(&k2).map(|(p, q)| inp.x0 * (p + q).exp()).collect();
        return Ok(GronwallBound { t: t.clone(), bound, t_star: None });
    }
    let b = 1.0 - a;
    let weighted: Vec<f64> = inp.c1.iter().zip(&k2).map(|(c, k)| b * c * (-b * k).exp()).collect();
    let j = cumulative_trapezoid(t, &weighted);
    let bound = k2
        .iter()
        .zip(&j)
        .map(|(k, j)| {
            let rhs = (b * k).exp() * (inp.x0.powf(b) + j);
            rhs.powf(1.0 / b)
        })
        .collect();
    Ok(GronwallBound { t: t.clone(), bound, t_star: None })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_coefficients_keep_the_initial_value() {
        for a in [0.0, 0.5, 1.0, 2.0, 3.5] {
            let out = gronwall_bound(&GronwallInput::constant(a, 0.0, 0.0, 0.7, 2.0, 40)).unwrap();
            assert!(out.t_star.is_none());
            assert_eq!(out.bound.len(), 41);
            assert!(out.bound.iter().all(|b| (b - 0.7).abs() < 1e-14), "a = {a}");
        }
    }

    #[test]
    fn zero_start_superlinear_stays_zero() {
        let out = gronwall_bound(&GronwallInput::constant(2.0, 1.0, 1.0, 0.0, 1.0, 10)).unwrap();
        assert!(out.t_star.is_none());
        assert!(out.bound.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn rejects_negative_coefficients() {
        let mut inp = GronwallInput::constant(2.0, 1.0, 0.0, 1.0, 1.0, 4);
        inp.c1[2] = -1.0;
        assert!(gronwall_bound(&inp).is_err());
    }
}
