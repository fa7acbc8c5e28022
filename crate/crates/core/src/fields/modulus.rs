use super::grid::GridField;
use super::norms::sobolev_seminorm;
use crate::error::{usage, Error, Result};
use rand::Rng;
use serde::Serialize;

/// Empirical log-Lipschitz constants of a field at two resolutions.
#[derive(Debug, Clone, Serialize)]
pub struct ModulusReport {
    pub p: f64,
    pub pairs: usize,
    /// `||f||` in the critical Sobolev space `W^{d/p+1,p}` on the fine grid.
    pub seminorm: f64,
    pub c_hat_fine: f64,
    pub c_hat_coarse: f64,
    /// `max / min` of the two constants.
    pub stability: f64,
    /// Plain Lipschitz quotients `max |f(x)-f(y)| / |x-y|`.
    pub lipschitz_fine: f64,
    pub lipschitz_coarse: f64,
}

struct Quotients {
    log_lip: f64,
    lip: f64,
}

fn sample_quotients<R: Rng + ?Sized>(
    f: &GridField,
    p: f64,
    pairs: usize,
    rng: &mut R,
) -> Quotients {
    let spec = f.spec;
    let d = spec.d;
    let n = spec.n as i64;
    let h = spec.h();
    let expo = 1.0 - 1.0 / p;
    let (lo, hi) = (h.ln(), (0.25 * spec.l).ln());
    let mut out = Quotients { log_lip: 0.0, lip: 0.0 };
    let mut drawn = 0;
    while drawn < pairs {
        let scale = rng.random_range(lo..=hi).exp();
        let mut dir = [0.0f64; 3];
        let mut norm = 0.0;
        for c in dir.iter_mut().take(d) {
            *c = rng.random_range(-1.0..1.0);
            norm += *c * *c;
        }
        if norm < 1e-6 {
            continue;
        }
        let norm = norm.sqrt();
        let mut off = [0i64; 3];
        for k in 0..d {
            off[k] = (dir[k] / norm * scale / h).round() as i64;
        }
        if off[..d].iter().all(|&o| o == 0) {
            continue;
        }
        let mut a = [0usize; 3];
        let mut b = [0usize; 3];
        let mut ok = true;
        for k in 0..d {
            let lo_ix = 0.max(-off[k]);
            let hi_ix = (n - 1).min(n - 1 - off[k]);
            if lo_ix > hi_ix {
                ok = false;
                break;
            }
            let i = rng.random_range(lo_ix..=hi_ix);
            a[k] = i as usize;
            b[k] = (i + off[k]) as usize;
        }
        if !ok {
            continue;
        }
        drawn += 1;
        let (ia, ib) = (spec.ravel(&a), spec.ravel(&b));
        let mut diff2 = 0.0;
        for c in 0..f.ncomp {
            let dv = f.component(c)[ia] - f.component(c)[ib];
            diff2 += dv * dv;
        }
        let dist = off[..d].iter().map(|&o| (o * o) as f64).sum::<f64>().sqrt() * h;
        let diff = diff2.sqrt();
        out.lip = out.lip.max(diff / dist);
        out.log_lip = out.log_lip.max(diff / (dist * (1.0 + dist.ln().abs()).powf(expo)));
    }
    out
}

/// Empirical constant in `|f(x) - f(y)| <= C ||f|| |x-y| (1 + |log|x-y||)^{1-1/p}`
/// with `||f||` the `W^{d/p+1,p}` seminorm.
///
/// Pairs are node pairs with separations drawn log-uniformly in
/// `[h, L/4]`. The same number of pairs is drawn on the grid coarsened by
/// subsampling, and both constants are normalized by the fine-grid seminorm.
pub fn log_lipschitz_modulus_check<R: Rng + ?Sized>(
    f: &GridField,
    p: f64,
    pair_samples: usize,
    rng: &mut R,
) -> Result<ModulusReport> {
    if !(p > 1.0 && p.is_finite()) {
        return usage(format!("exponent p = {p} must lie in (1, inf)"));
    }
    if pair_samples < 1000 {
        return usage(format!("need at least 1000 pair samples, got {pair_samples}"));
    }
    let d = f.spec.d as f64;
    let seminorm = sobolev_seminorm(f, d / p + 1.0, p)?;
    if !(seminorm > 0.0) {
        return Err(Error::Degenerate("critical Sobolev seminorm vanishes".into()));
    }
    if !seminorm.is_finite() {
        return Err(Error::Data("critical Sobolev seminorm is not finite".into()));
    }
    let fine = sample_quotients(f, p, pair_samples, rng);
    let coarse = sample_quotients(&f.coarsened()?, p, pair_samples, rng);
    let c_fine = fine.log_lip / seminorm;
    let c_coarse = coarse.log_lip / seminorm;
    Ok(ModulusReport {
        p,
        pairs: pair_samples,
        seminorm,
        c_hat_fine: c_fine,
        c_hat_coarse: c_coarse,
        stability: c_fine.max(c_coarse) / c_fine.min(c_coarse),
        lipschitz_fine: fine.lip,
        lipschitz_coarse: coarse.lip,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::GridSpec;
    use crate::rng::Seeds;

    #[test]
    fn zero_field_is_degenerate() {
        let spec = GridSpec::new(1, 64, 1.0).unwrap();
        let f = GridField::zeros(spec, 1);
        let mut rng = Seeds::new(1).stream("pairs");
        let err = log_lipschitz_modulus_check(&f, 2.0, 1000, &mut rng).unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)));
    }
}
