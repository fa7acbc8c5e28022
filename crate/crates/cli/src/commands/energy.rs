use super::Run;
use crate::error::CliResult;
use crate::output::{num, opt, to_value, Table};
use mfcomm::energy::{EnergyContext, EnergyReport, ParticleConfig};
use mfcomm::fields::{GridField, GridMeasure};
use serde_json::{json, Value};

const VELOCITIES: [&str; 4] = ["identity", "rotation", "gaussian", "sine"];

struct Draws {
    ns: Vec<usize>,
    samples: usize,
}

fn draws(run: &mut Run) -> CliResult<Draws> {
    let ns = run.cfg.usize_list_req("experiment", "N")?;
    if ns.iter().any(|&n| n < 2) {
        return Err(run.cfg.error("`experiment.N` entries violate N >= 2"));
    }
    let samples = run.cfg.usize_or("experiment", "samples", 1)?;
    if samples == 0 {
        return Err(run.cfg.error("`experiment.samples` violates samples >= 1"));
    }
    Ok(Draws { ns, samples })
}

fn sample(run: &Run, mu: &GridMeasure, n: usize, k: usize) -> CliResult<ParticleConfig> {
    let mut rng = run.seeds.stream_indexed(&format!("particles/N={n}"), k as u64);
    Ok(ParticleConfig::sample_iid(mu, n, &mut rng)?)
}

fn report_value(r: &EnergyReport) -> Value {
    let mut v = to_value(r);
    if let Some(obj) = v.as_object_mut() {
        obj.remove("r");
    }
    v
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn energy(run: &mut Run) -> CliResult<()> {
    let params = run.cfg.kernel()?;
    let spec = run.cfg.grid(params.d)?;
    let mu = run.cfg.measure(spec)?;
    let plan = draws(run)?;
    run.ready()?;

    let ctx = EnergyContext::new(&mu, params)?;
    let mut table = Table::new(&["N", "sample", "F_N", "pp", "cross", "mm", "lambda", "kappa", "min_gap"]);
    let mut means = Vec::new();
    let mut reports = Vec::new();
    for &n in &plan.ns {
        let mut f = Vec::with_capacity(plan.samples);
        for k in 0..plan.samples {
            let rep = ctx.energy(&sample(run, &mu, n, k)?)?;
            table.push(vec![
                n.to_string(),
                k.to_string(),
                num(rep.f_n),
                num(rep.pp),
                num(rep.cross),
                num(rep.mm),
                num(rep.lambda),
                opt(rep.kappa),
                num(rep.min_gap),
            ]);
            f.push(rep.f_n);
            if plan.samples == 1 {
                reports.push(report_value(&rep));
            }
        }
        means.push(json!({ "N": n, "mean_F_N": mean(&f), "samples": plan.samples }));
    }
    run.out.write_csv("energy.csv", &table)?;
    run.summary.result("mean_F_N", &means);
    if !reports.is_empty() {
        run.summary.result("reports", &reports);
    }
    Ok(())
}

fn velocity(run: &mut Run, spec: mfcomm::fields::GridSpec) -> CliResult<GridField> {
    let kind = run.cfg.choice_or("experiment", "velocity", &VELOCITIES, "identity")?;
    let d = spec.d;
    if kind == "rotation" && d < 2 {
        return Err(run.cfg.error("`experiment.velocity` = \"rotation\" needs d >= 2"));
    }
    let v = match kind.as_str() {
        "identity" => GridField::identity(spec),
        "rotation" => GridField::vector_from_fn(spec, d, |x, out| {
            out.fill(0.0);
            out[0] = -x[1];
            out[1] = x[0];
        })?,
        "gaussian" => GridField::vector_from_fn(spec, d, |x, out| {
            let w = (-x.iter().map(|c| c * c).sum::<f64>()).exp();
            out.iter_mut().zip(x).for_each(|(o, c)| *o = c * w);
        })?,
        _ => GridField::vector_from_fn(spec, d, |x, out| {
            out.iter_mut().zip(x).for_each(|(o, c)| *o = c.sin());
        })?,
    };
    Ok(v)
}

pub fn commutator(run: &mut Run) -> CliResult<()> {
    let params = run.cfg.kernel()?;
    let spec = run.cfg.grid(params.d)?;
    let mu = run.cfg.measure(spec)?;
    let plan = draws(run)?;
    let order = run.cfg.usize_or("experiment", "order", 1)?;
    if order == 0 {
        return Err(run.cfg.error("`experiment.order` violates order >= 1"));
    }
    let v = velocity(run, spec)?;
    run.ready()?;

    let ctx = EnergyContext::new(&mu, params)?;
    let mut table = Table::new(&["N", "sample", "order", "A_n", "pp", "cross", "mm", "F_N"]);
    let mut reports = Vec::new();
    for &n in &plan.ns {
        for k in 0..plan.samples {
            let x = sample(run, &mu, n, k)?;
            let e = ctx.energy(&x)?;
            let c = ctx.commutator(&x, &v, order)?;
            for w in &c.warnings {
                if !run.summary.warnings.contains(w) {
                    run.warn(w.clone());
                }
            }
            table.push(vec![
                n.to_string(),
                k.to_string(),
                order.to_string(),
                num(c.a_n),
                num(c.pp),
                num(c.cross),
                num(c.mm),
                num(e.f_n),
            ]);
            reports.push(json!({ "N": n, "sample": k, "A_n": c.a_n, "pp": c.pp, "cross": c.cross, "mm": c.mm, "n": order, "F_N": e.f_n }));
        }
    }
    run.out.write_csv("commutator.csv", &table)?;
    run.summary.result("reports", &reports);
    Ok(())
}
