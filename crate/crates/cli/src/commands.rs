//! The six subcommands: resolve options, run the library, write files.

use crate::config::Resolver;
use crate::output::{meta_path, tagged_path, write_atomic, write_json};
use crate::{
    BandArgs, CounterfactualArgs, EstimateArgs, Failure, GridOpts, InputArgs, LevelOpts,
    OrderOpts, SimulateArgs, SummaryArgs, Test2Args,
};
use dyadic_density::bandwidth::{rot_bandwidth, BandwidthSelection};
use dyadic_density::counterfactual::{cf_run, read_covariates_csv};
use dyadic_density::covariance::PsdCovMatrix;
use dyadic_density::data::{read_edge_list_csv, read_trade_csv};
use dyadic_density::estimator::fhat;
use dyadic_density::inference::{band_with_bandwidth, rbc_run, two_sample_test, TestStat};
use dyadic_density::simulation::mc_study;
use dyadic_density::{
    DyadicDataset, EvaluationGrid, KernelFamily, KernelSpec, McConfig, RbcConfig, UniformBand,
};
use serde_json::{json, Value};
use std::fs::File;
use std::path::{Path, PathBuf};

type CliResult<T> = Result<T, Failure>;

fn require_out(r: &Resolver, cli: Option<PathBuf>) -> CliResult<PathBuf> {
    r.path(cli, "out")
        .ok_or_else(|| Failure::Usage("missing --out (or an out = line in the config)".into()))
}

fn require_domain(r: &Resolver, cli: Option<(f64, f64)>) -> CliResult<(f64, f64)> {
    r.domain(cli)?.ok_or_else(|| {
        Failure::Usage("missing --domain a,b (or a domain = line in the config)".into())
    })
}

fn resolve_inputs(r: &Resolver, args: &InputArgs, expect: usize) -> CliResult<Vec<PathBuf>> {
    let inputs = r.inputs(&args.input);
    if inputs.len() != expect {
        return Err(Failure::Usage(format!(
            "this command takes exactly {expect} --input file(s), got {}",
            inputs.len()
        )));
    }
    Ok(inputs)
}

fn read_dataset(path: &Path, trade: bool) -> CliResult<DyadicDataset> {
    let file =
        File::open(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    let records = if trade {
        read_trade_csv(file)?
    } else {
        read_edge_list_csv(file)?
    };
    Ok(DyadicDataset::from_edge_list(&records)?)
}

/// Everything the band-shaped commands share, after precedence is applied.
struct BandResolved {
    domain: (f64, f64),
    grid: usize,
    family: KernelFamily,
    p: usize,
    p_prime: usize,
    alpha: f64,
    b_draws: usize,
    seed: u64,
    ridge: bool,
}

fn resolve_band(
    r: &Resolver,
    grid: &GridOpts,
    orders: &OrderOpts,
    level: &LevelOpts,
    ridge: bool,
) -> CliResult<BandResolved> {
    Ok(BandResolved {
        domain: require_domain(r, grid.domain)?,
        grid: r.scalar(grid.grid, "grid")?.unwrap_or(25),
        family: r
            .kernel(grid.kernel.as_deref())?
            .unwrap_or(KernelFamily::Epanechnikov),
        p: r.scalar(orders.p, "p")?.unwrap_or(2),
        p_prime: r.scalar(orders.p_prime, "p-prime")?.unwrap_or(4),
        alpha: r.scalar(level.alpha, "alpha")?.unwrap_or(0.05),
        b_draws: r.scalar(level.b_draws, "b")?.unwrap_or(2000),
        seed: r.scalar(level.seed, "seed")?.unwrap_or(0),
        ridge: r.flag(ridge, "ridge")?,
    })
}

impl BandResolved {
    fn rbc(&self) -> RbcConfig {
        let mut c = RbcConfig::new(self.family, self.domain);
        c.p = self.p;
        c.p_prime = self.p_prime;
        c.alpha = self.alpha;
        c.b_draws = self.b_draws;
        c.grid_size = self.grid;
        c.ridge = self.ridge;
        c
    }

    fn echo(&self) -> Value {
        json!({
            "domain": [self.domain.0, self.domain.1],
            "grid": self.grid,
            "kernel": self.family.name(),
            "p": self.p,
            "p_prime": self.p_prime,
            "alpha": self.alpha,
            "B": self.b_draws,
            "seed": self.seed,
            "ridge": self.ridge,
        })
    }
}

fn bandwidth_json(sel: &BandwidthSelection) -> Value {
    json!({
        "h": sel.h,
        "method": sel.method.name(),
        "constant": sel.constant,
        "scale": sel.scale,
        "effective_pairs": sel.effective_pairs,
    })
}

fn projection_json(psd: &PsdCovMatrix) -> Value {
    json!({
        "objective": psd.objective,
        "candidate_objectives": psd.candidate_objectives,
        "lipschitz_bound": psd.lipschitz_bound,
        "excluded_pairs": psd.excluded_pairs,
        "iterations": psd.iterations,
    })
}

fn dataset_json(data: &DyadicDataset) -> Value {
    json!({
        "nodes": data.n(),
        "present_pairs": data.n_present(),
        "total_pairs": data.n_pairs_total(),
        "present_share": data.present_share(),
    })
}

/// Floats go out in shortest round-trip form, so files parse back exactly.
fn band_csv(band: &UniformBand, diag: &[f64]) -> String {
    let mut s = String::from("w,fhat,lo,hi,se\n");
    for (idx, w) in band.grid.points().iter().enumerate() {
        let c = band.center[idx];
        let hw = band.halfwidth[idx];
        let se = diag[idx].max(0.0).sqrt();
        s.push_str(&format!("{w},{c},{},{},{se}\n", c - hw, c + hw));
    }
    s
}

pub fn estimate(a: &EstimateArgs) -> CliResult<()> {
    let r = Resolver::new(a.out.config.as_deref())?;
    let out = require_out(&r, a.out.out.clone())?;
    let input = resolve_inputs(&r, &a.input, 1)?.remove(0);
    let trade = r.flag(a.input.trade, "trade")?;
    let domain = require_domain(&r, a.grid.domain)?;
    let grid_size = r.scalar(a.grid.grid, "grid")?.unwrap_or(25);
    let family = r
        .kernel(a.grid.kernel.as_deref())?
        .unwrap_or(KernelFamily::Epanechnikov);
    let p = r.scalar(a.p, "p")?.unwrap_or(2);
    let bandwidth = r.scalar(a.bandwidth, "bandwidth")?;

    let dataset = read_dataset(&input, trade)?;
    let selection = match bandwidth {
        Some(h) => BandwidthSelection::fixed(h)?,
        None => rot_bandwidth(&dataset, family)?,
    };
    let spec = KernelSpec::new(family, p, selection.h, domain)?;
    let grid = EvaluationGrid::equally_spaced(domain, grid_size)?;
    let est = fhat(&dataset, &spec, &grid)?;

    let mut csv = String::from("w,fhat\n");
    for (w, v) in grid.points().iter().zip(&est.values) {
        csv.push_str(&format!("{w},{v}\n"));
    }
    write_atomic(&out, &csv)?;
    let meta = json!({
        "command": "estimate",
        "input": input.display().to_string(),
        "trade": trade,
        "kernel": family.name(),
        "p": p,
        "bandwidth": bandwidth_json(&selection),
        "domain": [domain.0, domain.1],
        "grid": grid_size,
        "data": dataset_json(&dataset),
        "integral": est.integral(),
        "out": out.display().to_string(),
    });
    write_json(&meta_path(&out), &meta)
}

pub fn band(a: &BandArgs) -> CliResult<()> {
    let r = Resolver::new(a.out.config.as_deref())?;
    let out = require_out(&r, a.out.out.clone())?;
    let input = resolve_inputs(&r, &a.input, 1)?.remove(0);
    let trade = r.flag(a.input.trade, "trade")?;
    let resolved = resolve_band(&r, &a.grid, &a.orders, &a.level, a.ridge)?;
    let bandwidth = r.scalar(a.bandwidth, "bandwidth")?;

    let dataset = read_dataset(&input, trade)?;
    let config = resolved.rbc();
    let run = match bandwidth {
        Some(h) => band_with_bandwidth(&dataset, &config, BandwidthSelection::fixed(h)?, resolved.seed)?,
        None => rbc_run(&dataset, &config, resolved.seed)?,
    };

    write_atomic(&out, &band_csv(&run.band, &run.covariance.diag()))?;
    let meta = json!({
        "command": "band",
        "input": input.display().to_string(),
        "trade": trade,
        "options": resolved.echo(),
        "bandwidth": bandwidth_json(&run.bandwidth),
        "q_hat": run.band.q_hat,
        "projection": projection_json(&run.covariance),
        "zero_variance_points": run.band.zero_variance.iter().filter(|&&z| z).count(),
        "data": dataset_json(&dataset),
        "integral": run.estimate.integral(),
        "out": out.display().to_string(),
    });
    write_json(&meta_path(&out), &meta)
}

pub fn counterfactual(a: &CounterfactualArgs) -> CliResult<()> {
    let r = Resolver::new(a.out.config.as_deref())?;
    let out = require_out(&r, a.out.out.clone())?;
    let input = resolve_inputs(&r, &a.input, 1)?.remove(0);
    let trade = r.flag(a.input.trade, "trade")?;
    let covariates = r
        .path(a.covariates.clone(), "covariates")
        .ok_or_else(|| Failure::Usage("missing --covariates".into()))?;
    let resolved = resolve_band(&r, &a.grid, &a.orders, &a.level, a.ridge)?;

    let dataset = read_dataset(&input, trade)?;
    let file = File::open(&covariates)
        .map_err(|e| Failure::Input(format!("{}: {e}", covariates.display())))?;
    let sample = read_covariates_csv(file, dataset.labels())?;
    let config = resolved.rbc();
    // independent resampling streams for the two bands
    let observed = rbc_run(&dataset, &config, resolved.seed)?;
    let cf = cf_run(&dataset, &sample, &config, resolved.seed.wrapping_add(1))?;

    let observed_out = tagged_path(&out, "observed");
    let cf_out = tagged_path(&out, "counterfactual");
    write_atomic(&observed_out, &band_csv(&observed.band, &observed.covariance.diag()))?;
    write_atomic(&cf_out, &band_csv(&cf.band, &cf.covariance.psd.diag()))?;
    let meta = json!({
        "command": "counterfactual",
        "input": input.display().to_string(),
        "covariates": covariates.display().to_string(),
        "trade": trade,
        "options": resolved.echo(),
        "seed_observed": resolved.seed,
        "seed_counterfactual": resolved.seed.wrapping_add(1),
        "bandwidth": bandwidth_json(&observed.bandwidth),
        "levels": sample.levels(),
        "pmf0": sample.pmf0(),
        "pmf1": sample.pmf1(),
        "psi_per_level": cf.psi.per_level,
        "q_hat_observed": observed.band.q_hat,
        "q_hat_counterfactual": cf.band.q_hat,
        "projection_observed": projection_json(&observed.covariance),
        "projection_counterfactual": projection_json(&cf.covariance.psd),
        "data": dataset_json(&dataset),
        "observed_out": observed_out.display().to_string(),
        "counterfactual_out": cf_out.display().to_string(),
    });
    write_json(&meta_path(&out), &meta)
}

pub fn test2(a: &Test2Args) -> CliResult<()> {
    let r = Resolver::new(a.out.config.as_deref())?;
    let out = require_out(&r, a.out.out.clone())?;
    let inputs = resolve_inputs(&r, &a.input, 2)?;
    let trade = r.flag(a.input.trade, "trade")?;
    let resolved = resolve_band(&r, &a.grid, &a.orders, &a.level, a.ridge)?;
    let stat = match r.scalar(a.stat.clone(), "stat")? {
        Some(s) => s
            .parse::<TestStat>()
            .map_err(|e| Failure::Usage(e.to_string()))?,
        None => TestStat::Sup,
    };

    let data0 = read_dataset(&inputs[0], trade)?;
    let data1 = read_dataset(&inputs[1], trade)?;
    let config = resolved.rbc();
    let result = two_sample_test(&data0, &data1, &config, stat, resolved.seed)?;

    let report = json!({
        "command": "test2",
        "input0": inputs[0].display().to_string(),
        "input1": inputs[1].display().to_string(),
        "trade": trade,
        "options": resolved.echo(),
        "statistic": result.statistic.name(),
        "tau": result.tau,
        "critical_value": result.critical_value,
        "reject": result.reject,
        "alpha": result.alpha,
        "bandwidth0": result.bandwidth0,
        "bandwidth1": result.bandwidth1,
        "data0": dataset_json(&data0),
        "data1": dataset_json(&data1),
    });
    write_json(&out, &report)?;
    let meta = json!({
        "command": "test2",
        "input0": inputs[0].display().to_string(),
        "input1": inputs[1].display().to_string(),
        "trade": trade,
        "options": resolved.echo(),
        "statistic": result.statistic.name(),
        "out": out.display().to_string(),
    });
    write_json(&meta_path(&out), &meta)
}

pub fn simulate(a: &SimulateArgs) -> CliResult<()> {
    let r = Resolver::new(a.out.config.as_deref())?;
    let out = require_out(&r, a.out.out.clone())?;
    let seed = r.scalar(a.level.seed, "seed")?.unwrap_or(0);
    let full_scale = r.flag(a.full_scale, "full-scale")?;
    let mut mc = if full_scale {
        McConfig::full_scale(seed)
    } else {
        McConfig::scaled(seed)
    };
    if let Some(n) = r.scalar(a.n, "n")? {
        mc.n = n;
    }
    if let Some(reps) = r.scalar(a.reps, "reps")? {
        mc.reps = reps;
    }
    if let Some(d) = r.scalar(a.grid.grid, "grid")? {
        mc.d = d;
    }
    if let Some(b) = r.scalar(a.level.b_draws, "b")? {
        mc.b_draws = b;
    }
    if let Some(alpha) = r.scalar(a.level.alpha, "alpha")? {
        mc.alpha = alpha;
    }
    if let Some(p) = r.scalar(a.orders.p, "p")? {
        mc.p = p;
    }
    if let Some(pp) = r.scalar(a.orders.p_prime, "p-prime")? {
        mc.p_prime = pp;
    }
    if let Some(family) = r.kernel(a.grid.kernel.as_deref())? {
        mc.family = family;
    }
    if let Some(domain) = r.domain(a.grid.domain)? {
        mc.domain = domain;
    }

    let report = mc_study(&mc)?;
    let mut csv = String::from(
        "pi1,pi2,pi3,degeneracy,order,mean_h_rot,rimse,ucb_coverage,ucb_avg_width,pci_coverage,pci_avg_width\n",
    );
    for row in &report.rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            row.pi.pi1,
            row.pi.pi2,
            row.pi.pi3,
            row.degeneracy.name(),
            row.order,
            row.mean_h_rot,
            row.rimse,
            row.ucb_coverage,
            row.ucb_avg_width,
            row.pci_coverage,
            row.pci_avg_width,
        ));
    }
    write_atomic(&out, &csv)?;
    let meta = json!({
        "command": "simulate",
        "full_scale": full_scale,
        "n": mc.n,
        "reps": mc.reps,
        "grid": mc.d,
        "B": mc.b_draws,
        "p": mc.p,
        "p_prime": mc.p_prime,
        "alpha": mc.alpha,
        "seed": mc.seed,
        "kernel": mc.family.name(),
        "domain": [mc.domain.0, mc.domain.1],
        "mixing_vectors": mc.pis.iter().map(|pi| vec![pi.pi1, pi.pi2, pi.pi3]).collect::<Vec<_>>(),
        "out": out.display().to_string(),
    });
    write_json(&meta_path(&out), &meta)
}

pub fn summary(a: &SummaryArgs) -> CliResult<()> {
    let r = Resolver::new(a.out.config.as_deref())?;
    let input = resolve_inputs(&r, &a.input, 1)?.remove(0);
    let trade = r.flag(a.input.trade, "trade")?;
    let dataset = read_dataset(&input, trade)?;
    let s = dataset.summary();
    let report = json!({
        "command": "summary",
        "input": input.display().to_string(),
        "trade": trade,
        "nodes": s.nodes,
        "edges": s.edges,
        "density": s.density,
        "avg_degree": s.avg_degree,
        "clustering": s.clustering,
        "present_share": dataset.present_share(),
        "total_pairs": dataset.n_pairs_total(),
    });
    match r.path(a.out.out.clone(), "out") {
        Some(out) => {
            write_json(&out, &report)?;
            let meta = json!({
                "command": "summary",
                "input": input.display().to_string(),
                "trade": trade,
                "out": out.display().to_string(),
            });
            write_json(&meta_path(&out), &meta)
        }
        None => {
            println!("{report:#}");
            Ok(())
        }
    }
}
