use super::coupled::{CoupledRow, CoupledRun};
use crate::energy::{defect_factor, BoundConstants};
use crate::error::{usage, Error, Result};
use crate::kernel::RieszParams;
use crate::numeric::cumulative_trapezoid;
use serde::{Deserialize, Serialize};

/// Safety factor applied to the largest calibrated `C_p`.
pub const FIT_MARGIN: f64 = 2.0;

/// Relative slack for floating-point round-off in the verdict.
pub const VERDICT_RTOL: f64 = 1e-12;

const EPS_BRACKET: (f64, f64) = (1e-16, 1e4);
const EPS_ITERATIONS: usize = 200;

/// Range of `s` selecting the form of `zeta` and of the bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MfRegime {
    /// `max(d - 2, 0) <= s < d`, `s != 0`.
    SupC,
    /// `0 < s < d - 2`.
    SubC,
    /// `-1 < s < 0`.
    NonsingHi,
    /// `-2 < s <= -1`.
    NonsingLo,
}

impl MfRegime {
    pub fn for_params(params: &RieszParams) -> Result<Self> {
        let d = params.d as f64;
        let s = params.s;
        if s == 0.0 {
            return usage("the mean-field bound excludes s = 0; the audit is disabled for the log kernel");
        }
        Ok(if s <= -1.0 {
            Self::NonsingLo
        } else if s < 0.0 {
            Self::NonsingHi
        } else if s < d - 2.0 {
            Self::SubC
        } else {
            Self::SupC
        })
    }
}

/// Inputs of the bound beyond the recorded norm series.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MfBoundParams {
    pub regime: MfRegime,
    pub alpha: f64,
    pub delta: f64,
    /// `c`, `c_p`, `c_q`, `c_vartheta` and the exponents `p`, `q`,
    /// `vartheta`, `vartheta_prime` are read from here.
    pub consts: BoundConstants,
}

impl MfBoundParams {
    pub fn new(params: &RieszParams, alpha: f64, delta: f64, consts: BoundConstants) -> Result<Self> {
        let regime = MfRegime::for_params(params)?;
        if !(alpha > 0.0) || !(delta > 0.0) {
            return usage(format!("alpha = {alpha} and delta = {delta} must be positive"));
        }
        if regime == MfRegime::NonsingHi {
            let (v, vp) = (consts.vartheta, consts.vartheta_prime);
            if !(v > 0.5 * params.s.abs() && v < params.s.abs()) {
                return usage(format!("vartheta = {v} must lie in (|s|/2, |s|)"));
            }
            if !(vp > 0.0 && vp < v) {
                return usage(format!("vartheta' = {vp} must lie in (0, vartheta)"));
            }
        }
        Ok(Self { regime, alpha, delta, consts })
    }
}

/// Audit of the mean-field bound along a coupled run.
#[derive(Debug, Clone, Serialize)]
pub struct MfBound {
    pub regime: MfRegime,
    pub epsilon: f64,
    pub c_p: f64,
    /// `script_E^0`.
    pub e0: f64,
    pub zeta: Vec<f64>,
    pub script_e: Vec<f64>,
    pub bound: Vec<f64>,
    pub holds: Vec<bool>,
    pub verdict: bool,
}

fn lq_exponents(d: f64, q: f64, s: f64) -> (f64, f64) {
    if q.is_infinite() {
        (d - s, (s + 1.0) / d)
    } else {
        (d * (q - 1.0) / q - s, (s + 1.0) * q / (d * (q - 1.0)))
    }
}

fn missing(what: &str, t: f64) -> Error {
    Error::Usage(format!("norm series is missing {what} at t = {t}"))
}

/// `zeta^tau` at the given `epsilon`.
fn zeta(row: &CoupledRow, eps: f64, regime: MfRegime, params: &RieszParams, k: &BoundConstants) -> Result<f64> {
    let d = params.d as f64;
    let s = params.s;
    let (lam_exp, pow_exp) = lq_exponents(d, k.q, s);
    let inner = match regime {
        MfRegime::SupC => {
            let mut z = k.c_q * row.mu_lq * row.lambda.powf(lam_exp);
            if s < d - 1.0 {
                z += k.c_q * row.mu_lq.powf(pow_exp);
            } else {
                let holder = row.mu_holder.ok_or_else(|| missing("the Hölder norm of mu", row.t))?;
                let e = s + 2.0 - d;
                z += k.c * (holder.powf((s + 1.0 - d) / e) + eps.powf(d - s - 1.0) * row.mu_linf.powf((s - d + 1.0) / e));
            }
            z
        }
        MfRegime::SubC => {
            let kappa = row.kappa.ok_or_else(|| missing("kappa", row.t))?;
            k.c_q * (row.mu_lq * kappa.powf(lam_exp) + row.mu_lq.powf(pow_exp))
        }
        MfRegime::NonsingHi => {
            let m = row.moment.ok_or_else(|| missing("the moment", row.t))?;
            k.c_vartheta * eps.powf(k.vartheta_prime - 1.0) * m + k.c * (1.0 + k.c_q * row.mu_lq.powf(pow_exp))
        }
        MfRegime::NonsingLo => {
            let m = row.moment.ok_or_else(|| missing("the moment", row.t))?;
            k.c * m
        }
    };
    Ok(eps * inner)
}

/// `(zeta^tau, script_E^t)` series at the given `epsilon`.
fn script_e_series(run: &CoupledRun, eps: f64, mfp: &MfBoundParams) -> Result<(Vec<f64>, Vec<f64>)> {
    let z: Vec<f64> =
        run.rows.iter().map(|r| zeta(r, eps, mfp.regime, &run.params, &mfp.consts)).collect::<Result<_>>()?;
    let mut e = vec![0.0; z.len()];
    let mut sup = f64::NEG_INFINITY;
    for k in (0..z.len()).rev() {
        sup = sup.max(z[k]);
        e[k] = run.rows[k].f_n + sup;
    }
    Ok((z, e))
}

/// Solves `eps = delta N^{-1-2(s+1)/s-alpha} (script_E^0(eps))^{-1/s}` for
/// `0 < s < d`, or returns `N^{-alpha}` for `s < 0`.
pub fn solve_epsilon(run: &CoupledRun, mfp: &MfBoundParams) -> Result<f64> {
    let s = run.params.s;
    let n = run.n as f64;
    if s < 0.0 {
        return Ok(n.powf(-mfp.alpha));
    }
    let log_pref = mfp.delta.ln() + (-1.0 - 2.0 * (s + 1.0) / s - mfp.alpha) * n.ln();
    let phi = |log_eps: f64| -> Result<f64> {
        let (_, e) = script_e_series(run, log_eps.exp(), mfp)?;
        Ok(if e[0] > 0.0 { log_eps - log_pref + e[0].ln() / s } else { f64::NEG_INFINITY })
    };
    let (mut lo, mut hi) = (EPS_BRACKET.0.ln(), EPS_BRACKET.1.ln());
    if phi(lo)? > 0.0 || phi(hi)? < 0.0 {
        return Err(Error::Degenerate(format!(
            "the epsilon equation has no root in [{:e}, {:e}]",
            EPS_BRACKET.0, EPS_BRACKET.1
        )));
    }
    for _ in 0..EPS_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        if phi(mid)? > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

fn check_run(run: &CoupledRun, mfp: &MfBoundParams) -> Result<()> {
    if run.rows.len() < 2 {
        return usage("the norm series needs at least two strides");
    }
    if MfRegime::for_params(&run.params)? != mfp.regime {
        return usage(format!("regime {:?} does not match s = {}", mfp.regime, run.params.s));
    }
    let (k, nc) = (&mfp.consts, &run.norms);
    if k.p != nc.p || k.q != nc.q {
        return usage(format!("run recorded p = {}, q = {} but the bound uses p = {}, q = {}", nc.p, nc.q, k.p, k.q));
    }
    if mfp.regime == MfRegime::NonsingHi && k.vartheta != nc.vartheta {
        return usage("run recorded moments for a different vartheta");
    }
    Ok(())
}

/// Pieces shared by the bound and the constant fit.
struct Envelope {
    eps: f64,
    zeta: Vec<f64>,
    script_e: Vec<f64>,
    /// `∫ ||u||_W * defect factor`.
    growth: Vec<f64>,
    /// `gamma ∫ C ||u||_{C^1} eps^theta` for `s < 0`.
    additive: Vec<f64>,
    /// `1` for `s > 0`, else the power applied to `script_E`.
    gamma: f64,
}

fn envelope(run: &CoupledRun, mfp: &MfBoundParams) -> Result<Envelope> {
    check_run(run, mfp)?;
    let s = run.params.s;
    let k = &mfp.consts;
    let eps = solve_epsilon(run, mfp)?;
    let (zeta, script_e) = script_e_series(run, eps, mfp)?;
    let t = run.times();
    let factor = defect_factor(eps, k.p);
    let u_w: Vec<f64> = run.rows.iter().map(|r| r.u_w * factor).collect();
    let growth = cumulative_trapezoid(&t, &u_w);
    let (gamma, additive) = match mfp.regime {
        MfRegime::SupC | MfRegime::SubC => (1.0, vec![0.0; t.len()]),
        MfRegime::NonsingLo => {
            let gamma = 1.0 / s.abs();
            let y: Vec<f64> = run.rows.iter().map(|r| gamma * k.c * r.u_c1 * eps).collect();
            (gamma, cumulative_trapezoid(&t, &y))
        }
        MfRegime::NonsingHi => {
            let gamma = k.vartheta / s.abs();
            let y: Vec<f64> =
                run.rows.iter().map(|r| gamma * k.c_vartheta * r.u_c1 * eps.powf(k.vartheta)).collect();
            (gamma, cumulative_trapezoid(&t, &y))
        }
    };
    Ok(Envelope { eps, zeta, script_e, growth, additive, gamma })
}

/// Evaluates the mean-field bound with `C_p = mfp.consts.c_p` and checks
/// `script_E^t <= bound^t` at every stride.
pub fn mf_bound_trajectory(run: &CoupledRun, mfp: &MfBoundParams) -> Result<MfBound> {
    let env = envelope(run, mfp)?;
    let k = &mfp.consts;
    let e0 = env.script_e[0];
    let bound: Vec<f64> = match mfp.regime {
        MfRegime::SupC | MfRegime::SubC => env.growth.iter().map(|g| k.c * e0 * (k.c_p * g).exp()).collect(),
        _ => {
            let gamma = env.gamma;
            env.growth
                .iter()
                .zip(&env.additive)
                .map(|(g, a)| ((gamma * k.c_p * g).exp() * (e0.max(0.0).powf(gamma) + a)).powf(1.0 / gamma))
                .collect()
        }
    };
    let holds: Vec<bool> =
        env.script_e.iter().zip(&bound).map(|(e, b)| *e <= b * (1.0 + VERDICT_RTOL)).collect();
    Ok(MfBound {
        regime: mfp.regime,
        epsilon: env.eps,
        c_p: k.c_p,
        e0,
        zeta: env.zeta,
        script_e: env.script_e,
        verdict: holds.iter().all(|&h| h),
        bound,
        holds,
    })
}

/// Smallest `C_p` for which the bound holds at every stride of `run`.
pub fn required_c_p(run: &CoupledRun, mfp: &MfBoundParams) -> Result<f64> {
    let env = envelope(run, mfp)?;
    let k = &mfp.consts;
    let e0 = env.script_e[0];
    let mut need: f64 = 0.0;
    for i in 1..env.script_e.len() {
        let e = env.script_e[i];
        let ratio_log = match mfp.regime {
            MfRegime::SupC | MfRegime::SubC => {
                if !(k.c * e0 > 0.0) {
                    return Err(Error::Degenerate("script_E^0 must be positive to fit C_p".into()));
                }
                (e / (k.c * e0)).ln()
            }
            _ => (e.max(0.0).powf(env.gamma) / (e0.max(0.0).powf(env.gamma) + env.additive[i])).ln() / env.gamma,
        };
        if ratio_log <= 0.0 {
            continue;
        }
        if !(env.growth[i] > 0.0) {
            return Err(Error::Degenerate(format!(
                "script_E grows at t = {} while the velocity norm integral vanishes",
                run.rows[i].t
            )));
        }
        need = need.max(ratio_log / env.growth[i]);
    }
    Ok(need)
}

/// `FIT_MARGIN` times the largest [`required_c_p`] over calibration runs.
pub fn fit_bound_constant(runs: &[CoupledRun], mfp: &MfBoundParams) -> Result<f64> {
    if runs.is_empty() {
        return usage("at least one calibration run is required");
    }
    let mut top: f64 = 0.0;
    for run in runs {
        top = top.max(required_c_p(run, mfp)?);
    }
    Ok(FIT_MARGIN * top)
}
