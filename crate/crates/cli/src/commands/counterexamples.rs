use super::Run;
use crate::error::CliResult;
use crate::output::{num, Table};
use mfcomm::counterexamples::{
    bmo_hilbert_batch, cef1_ratio, corollary_variants, write_sweep_csv, Cef1Instance, Cef2Instance,
    CorollaryVariant, RatioReport, RatioSweep,
};
use mfcomm::fields::GridSpec;
use mfcomm::numeric::spread_ratio;
use mfcomm::{AdmissiblePotential, RieszParams};
use serde_json::json;

fn increasing(reports: &[RatioReport]) -> Option<bool> {
    RatioSweep::new(reports.to_vec()).ok().map(|s| s.increasing)
}

pub fn cef1(run: &mut Run) -> CliResult<()> {
    let params = run.cfg.kernel()?;
    let rs = run.cfg.f64_list_or("experiment", "r", &[1e-2, 1e-3, 1e-4])?;
    if let Some(r) = rs.iter().find(|&&r| !(r > 0.0 && r <= 0.1)) {
        return Err(run.cfg.error(format!("`experiment.r` entry {r} violates 0 < r <= 0.1")));
    }
    run.ready()?;

    let reports = rs
        .iter()
        .map(|&r| cef1_ratio(&Cef1Instance::new(params, r)?))
        .collect::<mfcomm::Result<Vec<_>>>()?;
    run.out.write_with("cef1_sweep.csv", |p| write_sweep_csv(p, &reports))?;
    let bmo: Vec<f64> = reports.iter().filter_map(|r| r.diagnostic("bmo")).collect();
    let normalized: Vec<f64> = reports.iter().filter_map(|r| r.diagnostic("normalized_resonant")).collect();
    run.summary.result("increasing", increasing(&reports));
    run.summary.result("bmo_spread", if bmo.is_empty() { None } else { Some(spread_ratio(&bmo)) });
    run.summary.result("normalized_resonant", &normalized);
    run.summary.result("reports", &reports);
    Ok(())
}

/// `[kernel] potential, t`; the Riesz choice reads `d, s`, the Gaussian only `d`.
pub(super) fn potential(run: &mut Run) -> CliResult<(AdmissiblePotential, Option<RieszParams>, f64)> {
    let kind = run.cfg.choice_or("kernel", "potential", &["riesz", "gaussian"], "riesz")?;
    let (pot, params) = if kind == "riesz" {
        let p = run.cfg.kernel()?;
        (AdmissiblePotential::riesz(p), Some(p))
    } else {
        let d = run.cfg.usize_req("kernel", "d")?;
        if !(1..=3).contains(&d) {
            return Err(run.cfg.error(format!("`kernel.d` = {d} violates d in {{1, 2, 3}}")));
        }
        (AdmissiblePotential::gaussian(d), None)
    };
    let t = run.cfg.positive_or("kernel", "t", 1.0)?;
    Ok((pot, params, t))
}

/// `[experiment] variant` with its parameters.
pub(super) fn variant(run: &mut Run) -> CliResult<CorollaryVariant> {
    let kind = run.cfg.choice_or("experiment", "variant", &["power", "bessel", "exp"], "power")?;
    Ok(match kind.as_str() {
        "power" => CorollaryVariant::Power { a: run.cfg.f64_or("experiment", "a", 2.2)? },
        "bessel" => CorollaryVariant::Bessel { n: run.cfg.f64_or("experiment", "bessel_n", 4.0)? },
        _ => CorollaryVariant::Exp {
            b: run.cfg.f64_or("experiment", "exp_b", 0.25)?,
            m: run.cfg.f64_or("experiment", "exp_m", 2.0)?,
            c: run.cfg.f64_or("experiment", "exp_c", 1.0)?,
        },
    })
}

pub fn cef2(run: &mut Run) -> CliResult<()> {
    let (pot, params, t) = potential(run)?;
    let variant = variant(run)?;
    let ks = run.cfg.f64_list_or("experiment", "k", &[8.0, 16.0, 32.0])?;
    let k_cal = run.cfg.f64_or("experiment", "calibration_k", 5.0)?;
    if let Some(k) = ks.iter().chain([&k_cal]).find(|&&k| !(k > 2.0)) {
        return Err(run.cfg.error(format!("shell frequency {k} violates k > 2")));
    }
    let p = variant.exponent(pot.d)?;
    run.ready()?;

    let calib = corollary_variants(&Cef2Instance::new(pot.clone(), t, k_cal)?, &variant)?;
    let c_hat = calib.resonant / calib.diagnostic("ghat_2").unwrap_or(f64::NAN);
    let reports = ks
        .iter()
        .map(|&k| corollary_variants(&Cef2Instance::new(pot.clone(), t, k)?, &variant))
        .collect::<mfcomm::Result<Vec<_>>>()?;
    run.out.write_with("cef2_sweep.csv", |path| write_sweep_csv(path, &reports))?;

    let growth: Vec<f64> = reports.windows(2).map(|w| w[1].ratio / w[0].ratio).collect();
    let off: Vec<f64> = reports
        .iter()
        .map(|r| r.off_resonant.abs() / r.diagnostic("k_ghat_k").unwrap_or(f64::NAN))
        .collect();
    let resonant: Vec<f64> = reports
        .iter()
        .map(|r| r.resonant / (r.diagnostic("ghat_2").unwrap_or(f64::NAN) * c_hat))
        .collect();
    run.summary.fitted("c_hat", c_hat);
    run.summary.result("exponent_p", p);
    run.summary.result("variant", variant);
    run.summary.result("ratio_growth", &growth);
    if let (Some(params), CorollaryVariant::Power { .. }) = (params, variant) {
        let expected = 2f64.powf((params.d as f64 - params.s) / 2.0 - 1.0);
        run.summary.result("expected_doubling_growth", expected);
    }
    run.summary.result("off_resonant_over_k_ghat_k", &off);
    run.summary.result("off_resonant_spread", spread_ratio(&off));
    run.summary.result("resonant_over_calibrated", &resonant);
    run.summary.result("increasing", increasing(&reports));
    run.summary.result("reports", &reports);
    Ok(())
}

pub fn bmo1d(run: &mut Run) -> CliResult<()> {
    let d = run.cfg.usize_req("kernel", "d")?;
    let s = run.cfg.f64_req("kernel", "s")?;
    if d != 1 || s != 0.0 {
        return Err(run.cfg.error(format!("the BMO batch is the logarithmic case d = 1, s = 0; got d = {d}, s = {s}")));
    }
    let samples = run.cfg.usize_or("experiment", "samples", 30)?;
    let resolutions = run.cfg.usize_list_or("experiment", "resolutions", &[1024, 2048, 4096])?;
    let l = run.cfg.positive_or("grid", "L", 8.0)?;
    let padding = run.cfg.usize_or("grid", "padding", 2)?;
    let specs = resolutions
        .iter()
        .map(|&n| GridSpec::with_padding(1, n, l, padding))
        .collect::<mfcomm::Result<Vec<_>>>()?;
    run.ready()?;

    let mut table = Table::new(&["n", "sample", "family", "ratio"]);
    let mut maxima = Vec::new();
    for spec in specs {
        let batch = bmo_hilbert_batch(spec, samples, &mut run.seeds.stream("bmo1d"))?;
        for (k, (ratio, family)) in batch.ratios.iter().zip(&batch.families).enumerate() {
            let family = serde_json::to_value(family).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
            table.push(vec![spec.n.to_string(), k.to_string(), family, num(*ratio)]);
        }
        maxima.push(json!({ "n": spec.n, "max_ratio": batch.max_ratio }));
    }
    run.out.write_csv("bmo1d.csv", &table)?;
    run.summary.result("max_ratio", &maxima);
    Ok(())
}
