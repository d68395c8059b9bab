//! Run a configured ensemble and emit manifest, snapshots and statistics.

use std::path::Path;

use spme::config::SimulateConfig;
use spme::io::csv_row;
use spme::solver::simulate;

use crate::manifest::{resolve_out_dir, ManifestBuilder};

use super::CmdError;

pub fn run(config_path: &Path) -> Result<(), CmdError> {
    let text = std::fs::read_to_string(config_path)
        .map_err(|e| CmdError::config(format!("cannot read {}: {}", config_path.display(), e)))?;
    let cfg = SimulateConfig::from_toml(&text).map_err(|e| CmdError::config(e.to_string()))?;
    let (solver_cfg, x0) = cfg.build().map_err(|e| CmdError::config(e.to_string()))?;
    let out_dir = resolve_out_dir(&cfg.output.dir);
    let mut manifest = ManifestBuilder::new("simulate", solver_cfg.noise.seed, &text, &out_dir)
        .map_err(CmdError::io)?;

    // fail fast on solver-domain config problems (stability bound etc.)
    if let Err(e) = solver_cfg.validate() {
        manifest
            .write_file("diagnostics.txt", &format!("{}\n", e))
            .map_err(CmdError::io)?;
        manifest.finish().map_err(CmdError::io)?;
        return Err(CmdError::solver(e.to_string()));
    }

    let ens = match simulate(&solver_cfg, &x0) {
        Ok(e) => e,
        Err(e) => {
            manifest
                .write_file("diagnostics.txt", &format!("{}\n", e))
                .map_err(CmdError::io)?;
            manifest.finish().map_err(CmdError::io)?;
            return Err(CmdError::solver(e.to_string()));
        }
    };
    if !ens.flagged().is_empty() {
        let mut diag = String::new();
        for (p, e) in ens.flagged() {
            diag.push_str(&format!("path {}: {}\n", p, e));
        }
        manifest
            .write_file("diagnostics.txt", &diag)
            .map_err(CmdError::io)?;
        manifest.finish().map_err(CmdError::io)?;
        return Err(CmdError::solver(format!(
            "{} of {} paths aborted; see diagnostics.txt",
            ens.flagged().len(),
            solver_cfg.paths
        )));
    }

    // per-time statistics
    let mut stats = String::from("t,e_l2_sq_mean,e_l2_sq_se\n");
    for (t, m) in ens.times().iter().zip(ens.l2_sq_time_series()) {
        stats.push_str(&csv_row(&[*t, m.mean, m.se]));
    }
    manifest.write_file("stats.csv", &stats).map_err(CmdError::io)?;

    // ensemble summary
    let es = ens.energy_stats();
    let mut summary = String::from("statistic,mean,stderr\n");
    summary.push_str(&format!(
        "sup_l2_sq,{},{}\n",
        es.sup_l2_sq.mean, es.sup_l2_sq.se
    ));
    summary.push_str(&format!(
        "eps_int_h10_sq,{},{}\n",
        es.eps_int_h10_sq.mean, es.eps_int_h10_sq.se
    ));
    summary.push_str(&format!(
        "int_phi_eps,{},{}\n",
        es.int_phi_eps.mean, es.int_phi_eps.se
    ));
    manifest
        .write_file("summary.csv", &summary)
        .map_err(CmdError::io)?;

    // raw snapshots for the retained paths
    let mut snaps = String::from("path,time_index,t");
    for i in 0..solver_cfg.grid.interior_len() {
        snaps.push_str(&format!(",x{}", i));
    }
    snaps.push('\n');
    for (p, path) in ens.snapshots().iter().enumerate() {
        for (s, field) in path.iter().enumerate() {
            snaps.push_str(&format!("{},{},{}", p, s, ens.times()[s]));
            for v in field.values() {
                snaps.push_str(&format!(",{}", v));
            }
            snaps.push('\n');
        }
    }
    manifest
        .write_file("snapshots.csv", &snaps)
        .map_err(CmdError::io)?;

    manifest.finish().map_err(CmdError::io)?;
    println!("simulate: {} paths done, outputs in {}", solver_cfg.paths, out_dir.display());
    Ok(())
}
