use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{bail, Result};
use log::{info, warn};
use vinr::metrics::{split_train_heldout, DEFAULT_PADDING};
use vinr::training::{fit, TrainConfig};

use crate::commands::{evaluate, EvalSettings, Reference};
use crate::options::{AsdMode, SweepArgs};

#[derive(Clone, Copy, Debug)]
pub struct SweepRow {
    pub count: usize,
    pub repeat: usize,
    pub dsc: f64,
    pub asd: f64,
    pub seconds: f64,
}

/// Quantile with linear interpolation between order statistics.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Median and interquartile range of the finite values.
pub fn median_iqr(values: impl IntoIterator<Item = f64>) -> (f64, f64) {
    let mut v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
    v.sort_by(f64::total_cmp);
    (quantile(&v, 0.5), quantile(&v, 0.75) - quantile(&v, 0.25))
}

fn run_job(
    reference: &Reference,
    config: &TrainConfig,
    settings: &EvalSettings,
    count: usize,
    heldout: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let cloud = reference.sample(count + heldout, seed)?;
    let (train, held) = split_train_heldout(&cloud, count, seed)?;
    let mut config = config.clone();
    config.seed = seed;
    let (model, _) = fit(&train, &config)?;
    let row = evaluate(&model, 0, reference, Some(&held), settings)?;
    Ok((row.dsc, row.asd.unwrap_or(f64::NAN)))
}

pub fn run(args: SweepArgs) -> Result<()> {
    if args.counts.is_empty() || args.repeats == 0 {
        bail!("nothing to do: need at least one count and one repeat");
    }
    if args.heldout == 0 {
        bail!("--heldout must be at least 1");
    }
    let reference = Reference::load(&args.source)?;
    let config = args.train.resolve(TrainConfig::desk())?;
    let settings = EvalSettings {
        dsc_dims: args.dsc_dims,
        asd_dims: args.asd_dims,
        asd_mode: AsdMode::Mesh,
        bbox: Some(reference.bounds().padded(DEFAULT_PADDING)),
    };
    let jobs: Vec<(usize, usize)> = args
        .counts
        .iter()
        .flat_map(|&c| (0..args.repeats).map(move |r| (c, r)))
        .collect();
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);

    let next = AtomicUsize::new(0);
    let rows: Mutex<Vec<Option<SweepRow>>> = Mutex::new(vec![None; jobs.len()]);
    let workers = args.jobs.clamp(1, jobs.len());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let j = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(count, repeat)) = jobs.get(j) else { break };
                let seed = config.seed.wrapping_add(j as u64);
                let start = Instant::now();
                let (dsc, asd) = match run_job(&reference, &config, &settings, count, args.heldout, seed) {
                    Ok(v) => v,
                    Err(e) => {
                        warn!("count {count} repeat {repeat} failed: {e:#}");
                        (f64::NAN, f64::NAN)
                    }
                };
                let seconds = start.elapsed().as_secs_f64();
                info!("count {count} repeat {repeat}: dsc {dsc:.4} asd {asd:.5} in {seconds:.1}s");
                rows.lock().expect("no worker panicked")[j] = Some(SweepRow {
                    count,
                    repeat,
                    dsc,
                    asd,
                    seconds,
                });
            });
        }
    });
    let rows: Vec<SweepRow> = rows
        .into_inner()
        .expect("no worker panicked")
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .collect();

    let mut out = String::new();
    writeln!(out, "# started = {started}")?;
    match (&args.source.mesh, &args.source.shape) {
        (Some(m), _) => writeln!(out, "# mesh = {}", m.display())?,
        (_, Some(s)) => writeln!(out, "# shape = {s}")?,
        _ => {}
    }
    writeln!(out, "# heldout = {}", args.heldout)?;
    writeln!(out, "# dsc_dims = {}", args.dsc_dims)?;
    writeln!(out, "# asd_dims = {}", args.asd_dims)?;
    for (k, v) in config.key_values() {
        if k != "seed" {
            writeln!(out, "# {k} = {v}")?;
        }
    }
    writeln!(out, "# base_seed = {}", config.seed)?;
    writeln!(out, "kind,count,repeat,dsc,asd,seconds,dsc_iqr,asd_iqr")?;
    for r in &rows {
        writeln!(out, "data,{},{},{},{},{:.3},,", r.count, r.repeat, r.dsc, r.asd, r.seconds)?;
    }
    let mut summary = Vec::new();
    for &count in &args.counts {
        let group: Vec<&SweepRow> = rows.iter().filter(|r| r.count == count).collect();
        let (dsc, dsc_iqr) = median_iqr(group.iter().map(|r| r.dsc));
        let (asd, asd_iqr) = median_iqr(group.iter().map(|r| r.asd));
        let (secs, _) = median_iqr(group.iter().map(|r| r.seconds));
        let failed = group.iter().filter(|r| !r.dsc.is_finite()).count();
        writeln!(out, "median,{count},,{dsc},{asd},{secs:.3},{dsc_iqr},{asd_iqr}")?;
        summary.push(format!(
            "count {count}: median dsc {dsc:.4} (iqr {dsc_iqr:.4}), median asd {asd:.5} (iqr {asd_iqr:.5}){}",
            if failed > 0 { format!(", {failed} failed") } else { String::new() }
        ));
    }
    std::fs::write(&args.out, out)?;
    for line in summary {
        println!("{line}");
    }
    println!("wrote {}", args.out.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quartiles() {
        let (m, iqr) = median_iqr([4.0, 1.0, 3.0, 2.0, f64::NAN]);
        assert_eq!(m, 2.5);
        assert_eq!(iqr, 3.25 - 1.75);
        let (m, iqr) = median_iqr([5.0]);
        assert_eq!((m, iqr), (5.0, 0.0));
        assert!(median_iqr([f64::NAN]).0.is_nan());
    }
}
