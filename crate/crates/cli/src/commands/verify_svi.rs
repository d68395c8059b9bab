//! Estimate both sides of the variational inequality for a candidate run
//! against the configured test processes; exit 4 when any margin dips below
//! the standard-error band.

use std::path::Path;

use spme::config::{TestProcessSection, VerifySviConfig};
use spme::grid::DirichletLaplacian;
use spme::measures::EnergyFunctional;
use spme::solver::simulate;
use spme::svi::{build_test_process, svi_margin, TestProcessKind};

use crate::manifest::{resolve_out_dir, ManifestBuilder};

use super::CmdError;

pub fn run(config_path: &Path) -> Result<(), CmdError> {
    let text = std::fs::read_to_string(config_path)
        .map_err(|e| CmdError::config(format!("cannot read {}: {}", config_path.display(), e)))?;
    let cfg = VerifySviConfig::from_toml(&text).map_err(|e| CmdError::config(e.to_string()))?;
    let (solver_cfg, x0) = cfg
        .simulate
        .build()
        .map_err(|e| CmdError::config(e.to_string()))?;
    solver_cfg.validate().map_err(|e| CmdError::solver(e.to_string()))?;
    let out_dir = resolve_out_dir(&cfg.simulate.output.dir);
    let mut manifest = ManifestBuilder::new("verify-svi", solver_cfg.noise.seed, &text, &out_dir)
        .map_err(CmdError::io)?;

    let f = EnergyFunctional::new(solver_cfg.potential.clone());
    let ens = simulate(&solver_cfg, &x0).map_err(|e| CmdError::solver(e.to_string()))?;
    if !ens.flagged().is_empty() {
        return Err(CmdError::solver(format!(
            "{} candidate paths aborted",
            ens.flagged().len()
        )));
    }

    let lap = DirichletLaplacian::new(&solver_cfg.grid);
    let mut all_pass = true;
    let mut verdicts = String::from("process,kind,min_margin_over_se,pass\n");
    for (k, section) in cfg.test_processes.iter().enumerate() {
        let (kind, label) = match section {
            TestProcessSection::Zero => (TestProcessKind::Zero, "zero".to_string()),
            TestProcessSection::ConstantG { amplitude, mode } => {
                let profile = spme::grid::Field::from_fn(&solver_cfg.grid, |x| {
                    amplitude
                        * ((*mode as f64) * std::f64::consts::PI
                            * (x - solver_cfg.grid.a())
                            / solver_cfg.grid.length())
                        .sin()
                });
                let g = lap.apply(&profile).map_err(|e| CmdError::solver(e.to_string()))?;
                (TestProcessKind::ConstantG(g), "constant_g".to_string())
            }
            TestProcessSection::RegularizedSolution { inner_eps } => (
                TestProcessKind::RegularizedSolution {
                    inner_eps: *inner_eps,
                },
                format!("regularized_solution(eps={})", inner_eps),
            ),
        };
        let z0 = spme::grid::Field::zeros(&solver_cfg.grid);
        let tp = build_test_process(kind, &solver_cfg, &z0)
            .map_err(|e| CmdError::solver(e.to_string()))?;
        let report =
            svi_margin(&ens, &tp, &f, cfg.svi.c).map_err(|e| CmdError::solver(e.to_string()))?;
        manifest
            .write_file(&format!("svi_report_{}.csv", k), &report.csv_rows())
            .map_err(CmdError::io)?;
        let pass = report.passes(cfg.svi.se_multiplier);
        all_pass &= pass;
        verdicts.push_str(&format!(
            "{},{},{},{}\n",
            k,
            label,
            report.worst_normalized_margin(),
            pass
        ));
        println!(
            "process {} ({}): {}",
            k,
            label,
            if pass { "margins hold" } else { "margin violated" }
        );
    }
    manifest
        .write_file("verdict.csv", &verdicts)
        .map_err(CmdError::io)?;
    manifest.finish().map_err(CmdError::io)?;
    if all_pass {
        println!("verify-svi: all margins within {} standard errors", cfg.svi.se_multiplier);
        Ok(())
    } else {
        Err(CmdError::verdict(
            "variational inequality violated beyond the error band",
        ))
    }
}
