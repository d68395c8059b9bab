//! Supercritical-cluster statistics: detect connected interior regions with
//! `|X| > threshold` along simulated paths and emit an event log plus the
//! empirical cluster-size histogram.

use std::collections::BTreeMap;
use std::path::Path;

use spme::config::SocConfig;
use spme::solver::Stepper;

use crate::manifest::{resolve_out_dir, ManifestBuilder};

use super::CmdError;

struct Cluster {
    start_node: usize,
    size: usize,
    max_excess: f64,
}

fn clusters(values: &[f64], threshold: f64) -> Vec<Cluster> {
    let mut out = Vec::new();
    let mut current: Option<Cluster> = None;
    for (i, &v) in values.iter().enumerate() {
        if v.abs() > threshold {
            match current.as_mut() {
                Some(c) => {
                    c.size += 1;
                    c.max_excess = c.max_excess.max(v.abs() - threshold);
                }
                None => {
                    current = Some(Cluster {
                        start_node: i,
                        size: 1,
                        max_excess: v.abs() - threshold,
                    });
                }
            }
        } else if let Some(c) = current.take() {
            out.push(c);
        }
    }
    if let Some(c) = current.take() {
        out.push(c);
    }
    out
}

pub fn run(config_path: &Path) -> Result<(), CmdError> {
    let text = std::fs::read_to_string(config_path)
        .map_err(|e| CmdError::config(format!("cannot read {}: {}", config_path.display(), e)))?;
    let cfg = SocConfig::from_toml(&text).map_err(|e| CmdError::config(e.to_string()))?;
    let (solver_cfg, x0) = cfg
        .simulate
        .build()
        .map_err(|e| CmdError::config(e.to_string()))?;
    // cluster statistics are defined for the sign-type potential driven by
    // additive forcing
    if solver_cfg.potential.kind() != spme::convex::PotentialKind::Psi1 {
        return Err(CmdError::config("soc-stats requires the psi1 potential"));
    }
    if solver_cfg.noise.multiplier != spme::noise::Multiplier::Additive {
        return Err(CmdError::config("soc-stats requires additive noise"));
    }
    solver_cfg
        .validate()
        .map_err(|e| CmdError::solver(e.to_string()))?;
    let threshold = cfg.soc.threshold;
    if !(threshold > 0.0) {
        return Err(CmdError::config("soc threshold must be positive"));
    }
    let out_dir = resolve_out_dir(&cfg.simulate.output.dir);
    let mut manifest = ManifestBuilder::new("soc-stats", solver_cfg.noise.seed, &text, &out_dir)
        .map_err(CmdError::io)?;

    let stepper = Stepper::new(&solver_cfg).map_err(|e| CmdError::solver(e.to_string()))?;
    let steps = solver_cfg.steps();
    let snapshot_steps = solver_cfg.snapshot_steps();
    let mut events = String::from("path,t,start_node,size,max_excess\n");
    let mut histogram: BTreeMap<usize, u64> = BTreeMap::new();
    for p in 0..solver_cfg.paths {
        let mut rng = solver_cfg.noise.path_rng(p);
        let mut x = x0.clone();
        let mut scan = |t: f64, values: &[f64], events: &mut String| {
            for c in clusters(values, threshold) {
                events.push_str(&format!(
                    "{},{},{},{},{}\n",
                    p, t, c.start_node, c.size, c.max_excess
                ));
                *histogram.entry(c.size).or_insert(0) += 1;
            }
        };
        scan(0.0, x.values(), &mut events);
        for k in 0..steps {
            let t = k as f64 * solver_cfg.dt;
            let dw = solver_cfg.noise.sample_increment(solver_cfg.dt, &mut rng);
            x = stepper
                .step(&x, t, &dw)
                .map_err(|e| CmdError::solver(e.to_string()))?;
            if snapshot_steps.contains(&(k + 1)) {
                scan((k + 1) as f64 * solver_cfg.dt, x.values(), &mut events);
            }
        }
    }
    manifest.write_file("events.csv", &events).map_err(CmdError::io)?;

    let mut hist = String::from("size,count,cumulative\n");
    let mut cumulative = 0u64;
    for (size, count) in &histogram {
        cumulative += count;
        hist.push_str(&format!("{},{},{}\n", size, count, cumulative));
    }
    manifest.write_file("histogram.csv", &hist).map_err(CmdError::io)?;
    manifest.finish().map_err(CmdError::io)?;
    println!(
        "soc-stats: {} cluster events across {} paths, outputs in {}",
        cumulative,
        solver_cfg.paths,
        out_dir.display()
    );
    Ok(())
}
