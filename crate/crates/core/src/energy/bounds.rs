use super::modulated::EnergyReport;
use super::particles::ParticleConfig;
use super::quadrature::{unit_cell_power_average, EnergyContext};
use crate::error::{precondition, usage, Error, Result};
use crate::fields::spectral::spectral_jacobian;
use crate::fields::{holder_zygmund_seminorm, sobolev_seminorm, GridField, GridMeasure};
use crate::kernel::RieszParams;
use serde::{Deserialize, Serialize};

/// Constants and exponents of the commutator inequalities. The constants
/// are not known explicitly; they are supplied or fitted by the caller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoundConstants {
    pub c: f64,
    pub c_p: f64,
    pub c_q: f64,
    pub c_a: f64,
    pub c_theta: f64,
    pub c_vartheta: f64,
    pub p: f64,
    pub q: f64,
    pub a: f64,
    pub theta: f64,
    pub vartheta: f64,
    pub vartheta_prime: f64,
}

impl Default for BoundConstants {
    fn default() -> Self {
        Self {
            c: 1.0,
            c_p: 1.0,
            c_q: 1.0,
            c_a: 1.0,
            c_theta: 1.0,
            c_vartheta: 1.0,
            p: 2.0,
            q: f64::INFINITY,
            a: 0.0,
            theta: 1.0,
            vartheta: 0.0,
            vartheta_prime: 0.0,
        }
    }
}

/// Right-hand side families for Lipschitz transport fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RhsVariant {
    /// `s >= max(0, d - 2)`.
    SupC,
    /// `0 <= s < d - 2`, with the `|D|^{a/2}` norm.
    SubC1,
    /// `0 <= s < d - 2`, with the `|D|^{(d-s)/2}` norm and `kappa`.
    SubC2,
    /// `-2 < s < 0`.
    Nonsing,
}

/// Norms of the transport field entering the bounds.
#[derive(Debug, Clone, Serialize)]
pub struct VelocityNorms {
    /// `max |grad v|` (pointwise Frobenius norm).
    pub grad_inf: f64,
    /// `|| |D|^{(d-s)/2} v ||_{L^{2d/(d-s-2)}}`, present for `s < d - 2`.
    pub sub_coulomb: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RhsEvaluation {
    pub variant: RhsVariant,
    pub rhs: f64,
    #[serde(rename = "F_N")]
    pub f_n: f64,
    pub lambda: f64,
    pub kappa: Option<f64>,
    pub norms: VelocityNorms,
}

fn sub_coulomb_norm(v: &GridField, params: &RieszParams) -> Result<Option<f64>> {
    let d = params.d as f64;
    if params.s < d - 2.0 {
        let expo = 2.0 * d / (d - params.s - 2.0);
        Ok(Some(sobolev_seminorm(v, 0.5 * (d - params.s), expo)?))
    } else {
        Ok(None)
    }
}

pub fn velocity_norms(v: &GridField, params: &RieszParams) -> Result<VelocityNorms> {
    Ok(VelocityNorms {
        grad_inf: spectral_jacobian(v)?.max_abs(),
        sub_coulomb: sub_coulomb_norm(v, params)?,
    })
}

/// `d (p - 1) / p - s`, with `p = inf` allowed.
fn lambda_exponent(d: f64, p: f64, s: f64) -> f64 {
    if p.is_infinite() {
        d - s
    } else {
        d * (p - 1.0) / p - s
    }
}

/// Evaluates the right-hand side of the commutator inequality of the given
/// family for Lipschitz `v`, using the energy of `x` against `mu`.
pub fn renormalized_rhs(
    x: &ParticleConfig,
    mu: &GridMeasure,
    v: &GridField,
    variant: RhsVariant,
    consts: &BoundConstants,
    params: RieszParams,
) -> Result<RhsEvaluation> {
    let ctx = EnergyContext::with_exponent(mu, params, consts.p)?;
    let rep = ctx.energy(x)?;
    renormalized_rhs_from(&rep, ctx.mu_lp, v, variant, consts, params)
}

/// As [`renormalized_rhs`], from an existing energy report.
pub fn renormalized_rhs_from(
    rep: &EnergyReport,
    mu_lp: f64,
    v: &GridField,
    variant: RhsVariant,
    consts: &BoundConstants,
    params: RieszParams,
) -> Result<RhsEvaluation> {
    let d = params.d as f64;
    let s = params.s;
    let ok = match variant {
        RhsVariant::SupC => s >= 0f64.max(d - 2.0),
        RhsVariant::SubC1 | RhsVariant::SubC2 => s >= 0.0 && s < d - 2.0,
        RhsVariant::Nonsing => s < 0.0,
    };
    if !ok {
        return usage(format!("right-hand side {variant:?} does not apply to {params}"));
    }
    if variant == RhsVariant::SubC2 && !(consts.p > d / (d - s - 1.0)) {
        return usage(format!("p = {} must exceed d/(d-s-1)", consts.p));
    }
    if variant == RhsVariant::SubC1 && !(consts.a > d && consts.a < d + 2.0) {
        return usage(format!("a = {} must lie in (d, d+2)", consts.a));
    }
    let norms = velocity_norms(v, &params)?;
    let nf = rep.n as f64;
    let log_term = if params.is_log() { -rep.lambda.ln() / (2.0 * nf) } else { 0.0 };
    let lam_term = consts.c_p * mu_lp * rep.lambda.powf(lambda_exponent(d, consts.p, s));
    let rhs = match variant {
        RhsVariant::SupC => consts.c * norms.grad_inf * (rep.f_n + log_term + lam_term),
        RhsVariant::SubC1 => {
            let extra = if consts.a > 2.0 {
                consts.c_a * sobolev_seminorm(v, 0.5 * consts.a, 2.0 * d / (consts.a - 2.0))?
            } else {
                0.0
            };
            consts.c * (norms.grad_inf + extra) * (rep.f_n + log_term + lam_term)
        }
        RhsVariant::SubC2 => {
            let kappa = rep.kappa.ok_or_else(|| Error::Usage("kappa undefined".into()))?;
            let log_k = if params.is_log() { 1.0 - kappa.ln() } else { 1.0 };
            let k_term = consts.c_p * mu_lp * kappa.powf(lambda_exponent(d, consts.p, s)) * log_k;
            consts.c * (norms.grad_inf + norms.sub_coulomb.unwrap_or(0.0)) * (rep.f_n + k_term)
        }
        RhsVariant::Nonsing => {
            consts.c * (norms.grad_inf + norms.sub_coulomb.unwrap_or(0.0)) * rep.f_n
        }
    };
    Ok(RhsEvaluation { variant, rhs, f_n: rep.f_n, lambda: rep.lambda, kappa: rep.kappa, norms })
}

/// The mollification defect factor `(1 + |log eps|)^{1 - 1/p}`.
pub fn defect_factor(epsilon: f64, p: f64) -> f64 {
    (1.0 + epsilon.ln().abs()).powf(1.0 - 1.0 / p)
}

/// Right-hand side of the defective commutator inequality, term by term.
#[derive(Debug, Clone, Serialize)]
pub struct DefectiveRhs {
    pub variant: RhsVariant,
    pub epsilon: f64,
    pub defect_factor: f64,
    /// `C_p ||v||_{W^{d/p+1,p}} (1 + |log eps|)^{1-1/p} (F_N + ...)`.
    pub defect_term: f64,
    /// Sub-Coulomb correction multiplying the same energy bracket.
    pub sub_coulomb_term: f64,
    /// Terms proportional to a positive power of `eps`.
    pub epsilon_terms: f64,
    pub total: f64,
    pub v_critical: f64,
    pub v_c1: f64,
    #[serde(rename = "F_N")]
    pub f_n: f64,
}

fn q_ratio(q: f64) -> f64 {
    if q.is_infinite() {
        1.0
    } else {
        q / (q - 1.0)
    }
}

/// `∫ |x|^r dmu`, with the node at the origin replaced by its cell average
/// when `r < 0`.
fn radial_moment(mu: &GridMeasure, r: f64) -> f64 {
    let spec = mu.spec();
    let d = spec.d;
    let cell = spec.cell();
    let h = spec.h();
    let mut acc = crate::numeric::Neumaier::new();
    for (i, &m) in mu.density.values().iter().enumerate() {
        let x = spec.point(i);
        let rad = x[..d].iter().map(|c| c * c).sum::<f64>().sqrt();
        let w = if rad == 0.0 && r < 0.0 {
            h.powf(r) * unit_cell_power_average(d, -r)
        } else {
            rad.powf(r)
        };
        acc.add(m * w * cell);
    }
    acc.total()
}

/// Right-hand side of the defective commutator inequality for a transport
/// field in the critical Sobolev space, chosen by the regime of `params`
/// (`SubC1` is used for `0 < s < d - 2` when `consts.a > 0`, else `SubC2`).
pub fn defective_rhs(
    x: &ParticleConfig,
    mu: &GridMeasure,
    v: &GridField,
    epsilon: f64,
    consts: &BoundConstants,
    params: RieszParams,
) -> Result<DefectiveRhs> {
    let ctx = EnergyContext::with_exponent(mu, params, consts.p)?;
    let rep = ctx.energy(x)?;
    let v_critical = sobolev_seminorm(v, params.d as f64 / consts.p + 1.0, consts.p)?;
    let v_c1 = holder_zygmund_seminorm(v, 1.0)?;
    let sub = sub_coulomb_norm(v, &params)?;
    defective_rhs_from(&rep, mu, v_critical, v_c1, sub, epsilon, consts, params, Some(v))
}

/// As [`defective_rhs`], from precomputed energy and velocity norms. The
/// field itself is only needed for the `SubC1` fractional norm.
#[allow(clippy::too_many_arguments)]
pub fn defective_rhs_from(
    rep: &EnergyReport,
    mu: &GridMeasure,
    v_critical: f64,
    v_c1: f64,
    v_sub_coulomb: Option<f64>,
    epsilon: f64,
    consts: &BoundConstants,
    params: RieszParams,
    v: Option<&GridField>,
) -> Result<DefectiveRhs> {
    let d = params.d as f64;
    let s = params.s;
    if params.is_log() {
        return usage("the defective estimate excludes s = 0");
    }
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return usage(format!("epsilon = {epsilon} must be positive"));
    }
    let p = consts.p;
    if !(p > 1.0 && p.is_finite()) {
        return usage(format!("p = {p} must lie in (1, inf)"));
    }
    let q = consts.q;
    if !(q > 1.0) {
        return usage(format!("q = {q} must exceed 1"));
    }
    if s >= -1.0 && s < d - 1.0 && !(q > d / (d - s - 1.0)) && !(s == -1.0) {
        return usage(format!("q = {q} must exceed d/(d-s-1) = {}", d / (d - s - 1.0)));
    }
    let variant = if s < 0.0 {
        RhsVariant::Nonsing
    } else if s >= 0f64.max(d - 2.0) {
        RhsVariant::SupC
    } else if consts.a > 0.0 {
        RhsVariant::SubC1
    } else {
        RhsVariant::SubC2
    };
    let f_n = rep.f_n;
    let nf = rep.n as f64;
    let l1 = mu.lp_norm(1.0);
    let lq = mu.lp_norm(q);
    let lp = mu.lp_norm(p);
    let defect = defect_factor(epsilon, p);
    let w_term = consts.c_p * v_critical * defect;
    let q_frac = (s + 1.0) * q_ratio(q) / d;
    let q_interp = consts.c_q * l1.powf(1.0 - q_frac) * lq.powf(q_frac);
    let lam_q = consts.c_q * lq * rep.lambda.powf(lambda_exponent(d, q, s));
    let lam_p = consts.c_p * lp * rep.lambda.powf(lambda_exponent(d, p, s));
    let pair_term = |bracket: f64| {
        consts.c * nf.powf(2.0 * (s + 1.0) / s - 1.0) * v_c1 * epsilon * bracket.max(0.0).powf((s + 1.0) / s)
    };

    let (defect_term, sub_term, eps_terms) = match variant {
        RhsVariant::SupC => {
            let mut tail = q_interp;
            if s >= d - 1.0 {
                if !(consts.theta > s + 1.0 - d && consts.theta <= 2.0) {
                    return usage(format!("theta = {} must lie in (s+1-d, 2]", consts.theta));
                }
                let e = (s - d + 1.0) / consts.theta;
                let holder = holder_zygmund_seminorm(&mu.density, consts.theta)?;
                let linf = mu.lp_norm(f64::INFINITY);
                tail += consts.c_theta
                    * l1.powf(1.0 - e)
                    * (holder.powf(e) + epsilon.powf(d - s - 1.0) * linf.powf(e));
            }
            (
                w_term * (f_n + lam_q),
                0.0,
                pair_term(f_n + lam_p) + epsilon * (1.0 + l1) * v_c1 * tail,
            )
        }
        RhsVariant::SubC1 | RhsVariant::SubC2 => {
            let (extra, bracket) = if variant == RhsVariant::SubC1 {
                let a = consts.a;
                if !(a > d && a < d + 2.0) {
                    return usage(format!("a = {a} must lie in (d, d+2)"));
                }
                let v = v.ok_or_else(|| Error::Usage("SubC1 needs the velocity field".into()))?;
                let n = if a > 2.0 { sobolev_seminorm(v, 0.5 * a, 2.0 * d / (a - 2.0))? } else { 0.0 };
                (consts.c_a * n, f_n + lam_q)
            } else {
                let kappa = rep.kappa.ok_or_else(|| Error::Usage("kappa undefined".into()))?;
                let kq = consts.c_q * lq * kappa.powf(lambda_exponent(d, q, s));
                (consts.c * v_sub_coulomb.unwrap_or(0.0), f_n + kq)
            };
            (
                w_term * bracket,
                extra * bracket,
                pair_term(f_n + lam_p) + epsilon * (1.0 + l1) * v_c1 * q_interp,
            )
        }
        RhsVariant::Nonsing => {
            let abs_s = s.abs();
            let fpos = f_n.max(0.0);
            let sub = consts.c * v_sub_coulomb.unwrap_or(0.0);
            let m1 = radial_moment(mu, abs_s - 1.0);
            if !m1.is_finite() {
                return precondition(format!("moment of order {} is not finite", abs_s - 1.0));
            }
            let mut eps = 0.0;
            if s > -1.0 {
                let (th, thp) = (consts.vartheta, consts.vartheta_prime);
                if !(th > 0.0 && th < abs_s && thp > 0.0 && thp < th) {
                    return usage(format!(
                        "need 0 < vartheta' < vartheta < |s|, got ({thp}, {th})"
                    ));
                }
                let m = radial_moment(mu, abs_s - th);
                eps += consts.c_vartheta * v_c1 * epsilon.powf(thp)
                    * (m + (1.0 + l1) * fpos.powf((abs_s - th) / abs_s))
                    + consts.c * v_c1 * epsilon;
            } else {
                eps += consts.c * v_c1 * epsilon * (m1 + (1.0 + l1) * fpos.powf((abs_s - 1.0) / abs_s));
            }
            let mut last = m1;
            if s <= -1.0 {
                last += fpos.powf((abs_s - 1.0) / abs_s);
            } else {
                last += q_interp;
            }
            eps += epsilon * (1.0 + l1) * v_c1 * last;
            (w_term * f_n, sub * f_n, eps)
        }
    };
    Ok(DefectiveRhs {
        variant,
        epsilon,
        defect_factor: defect,
        defect_term,
        sub_coulomb_term: sub_term,
        epsilon_terms: eps_terms,
        total: defect_term + sub_term + eps_terms,
        v_critical,
        v_c1,
        f_n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defect_factor_at_one_is_one() {
        assert_eq!(defect_factor(1.0, 3.0), 1.0);
        let r = defect_factor(1e-6, 2.0) / defect_factor(1e-3, 2.0);
        let expect = ((1.0 + 6.0 * 10f64.ln()) / (1.0 + 3.0 * 10f64.ln())).sqrt();
        assert!((r - expect).abs() < 1e-14);
    }
}
