use super::counterexamples::{potential, variant};
use super::{synthetic_field, Run, SYNTHETIC};
use crate::error::CliResult;
use crate::output::{num, opt, Table};
use mfcomm::fields::{
    bmo_seminorm, holder_zygmund_seminorm, lp_norm, mollification_rates_with, sobolev_seminorm, GridSpec,
    MollifierSpec,
};
use mfcomm::kernel::{admissible_check, CpdTrials};
use mfcomm::numeric::{loglog_slope, spread_ratio};

fn dimension(run: &mut Run) -> CliResult<usize> {
    let d = run.cfg.usize_req("kernel", "d")?;
    if !(1..=3).contains(&d) {
        return Err(run.cfg.error(format!("`kernel.d` = {d} violates d in {{1, 2, 3}}")));
    }
    Ok(d)
}

fn field_spec(run: &mut Run) -> CliResult<(GridSpec, String)> {
    let d = dimension(run)?;
    let spec = run.cfg.grid(d)?;
    if spec.active_half_width() < 1.0 {
        return Err(run.cfg.error("synthetic fields live in the unit ball; need L/(2 padding) >= 1"));
    }
    let kind = run.cfg.choice_or("experiment", "field", &SYNTHETIC, "xlogx")?;
    Ok((spec, kind))
}

pub fn mollify_rates(run: &mut Run) -> CliResult<()> {
    let (spec, kind) = field_spec(run)?;
    let a = run.cfg.f64_or("experiment", "a", 1.0)?;
    let b = run.cfg.f64_or("experiment", "b", 0.5 * a)?;
    let k = run.cfg.usize_or("experiment", "k", 0)?;
    let eps = run.cfg.f64_list_or("experiment", "epsilon", &[0.25, 0.125, 0.0625, 0.03125])?;
    let mollifiers = eps.iter().map(|&e| MollifierSpec::new(e)).collect::<mfcomm::Result<Vec<_>>>()?;
    run.ready()?;

    let v = synthetic_field(&kind, spec)?;
    let rep = mollification_rates_with(&v, &mollifiers, a, b, k)?;
    let mut table = Table::new(&["epsilon", "sup_error", "holder_rate", "cb_rate", "modulus_rate", "derivative_rate"]);
    for i in 0..rep.epsilons.len() {
        table.push(vec![
            num(rep.epsilons[i]),
            num(rep.sup_error[i]),
            num(rep.holder_rate[i]),
            num(rep.cb_rate[i]),
            num(rep.modulus_rate[i]),
            opt(rep.derivative_rate.as_ref().map(|d| d[i])),
        ]);
    }
    run.out.write_csv("mollify_rates.csv", &table)?;
    let order = if rep.sup_error.iter().all(|&e| e > 0.0) { Some(loglog_slope(&rep.epsilons, &rep.sup_error)) } else { None };
    run.summary.fitted("loglog_order", order);
    run.summary.result("holder_rate_spread", spread_ratio(&rep.holder_rate));
    run.summary.result("report", &rep);
    Ok(())
}

pub fn norms(run: &mut Run) -> CliResult<()> {
    let (spec, kind) = field_spec(run)?;
    let lp = run.cfg.f64_list_or("experiment", "lp", &[1.0, 2.0, f64::INFINITY])?;
    let orders = run.cfg.f64_list_or("experiment", "sobolev_orders", &[0.5, 1.0])?;
    let sobolev_p = run.cfg.f64_or("experiment", "sobolev_p", 2.0)?;
    let thetas = run.cfg.f64_list_or("experiment", "holder", &[0.5, 1.0])?;
    let bmo = run.cfg.bool_or("experiment", "bmo", true)?;
    if let Some(p) = lp.iter().find(|&&p| !(p >= 1.0)) {
        return Err(run.cfg.error(format!("`experiment.lp` entry {p} violates p >= 1")));
    }
    run.ready()?;

    let v = synthetic_field(&kind, spec)?;
    let mut table = Table::new(&["norm", "order", "exponent", "value"]);
    for &p in &lp {
        table.push(vec!["lp".into(), num(0.0), num(p), num(lp_norm(&v, p))]);
    }
    for &o in &orders {
        table.push(vec!["sobolev".into(), num(o), num(sobolev_p), num(sobolev_seminorm(&v, o, sobolev_p)?)]);
    }
    for &th in &thetas {
        table.push(vec!["holder_zygmund".into(), num(th), num(f64::INFINITY), num(holder_zygmund_seminorm(&v, th)?)]);
    }
    if bmo {
        table.push(vec!["bmo".into(), num(0.0), num(1.0), num(bmo_seminorm(&v))]);
    }
    run.out.write_csv("norms.csv", &table)?;
    run.summary.result("rows", table.rows.len());
    Ok(())
}

pub fn admissible(run: &mut Run) -> CliResult<()> {
    let (pot, _, t) = potential(run)?;
    let pot = pot.with_t(t)?;
    let variant = variant(run)?;
    let r_min = run.cfg.positive_or("experiment", "r_min", 1.0)?;
    let r_max = run.cfg.positive_or("experiment", "r_max", 64.0)?;
    let count = run.cfg.usize_or("experiment", "radii", 16)?;
    let defaults = CpdTrials::default();
    let trials = CpdTrials {
        trials: run.cfg.usize_or("experiment", "trials", defaults.trials)?,
        atoms: run.cfg.usize_or("experiment", "atoms", defaults.atoms)?,
        tolerance: run.cfg.f64_or("experiment", "tolerance", defaults.tolerance)?,
    };
    if !(r_max > r_min) || count < 2 {
        return Err(run.cfg.error("frequency grid needs r_min < r_max and at least 2 radii"));
    }
    let p = variant.exponent(pot.d)?;
    run.ready()?;

    let radii: Vec<f64> =
        (0..count).map(|i| r_min * (r_max / r_min).powf(i as f64 / (count - 1) as f64)).collect();
    let sigma = |rho: f64| variant.log_sigma(rho).exp();
    let rep = admissible_check(&pot, &sigma, p, &radii, trials, &mut run.seeds.stream("admissible"))?;
    let mut table = Table::new(&["rho", "symbol", "symbol_t", "sigma"]);
    for &r in &radii {
        table.push(vec![num(r), num(pot.symbol(r)), num(pot.symbol_t(r)), num(sigma(r))]);
    }
    run.out.write_csv("admissible.csv", &table)?;
    run.summary.result("potential", &pot.name);
    run.summary.result("exponent_p", p);
    run.summary.result("report", &rep);
    Ok(())
}
