//! Emit the approximating-sequence diagnostics of a measure: energies and
//! weak-pairing gaps along a dyadic ladder.

use clap::Args;
use spme::convex::Potential;
use spme::grid::Grid;
use spme::io::{csv_row, MeasureSpec};
use spme::measures::{approx_sequence, BoundaryCover, EnergyFunctional, RadonMeasure};

use crate::manifest::{resolve_out_dir, ManifestBuilder};

use super::CmdError;

#[derive(Args, Debug)]
pub struct ApproxDemoArgs {
    /// Builtin measure (atom | uniform2) or path to a measure TOML file
    #[arg(long)]
    pub measure: String,
    /// Largest dyadic approximation index
    #[arg(long, default_value_t = 256)]
    pub n_max: usize,
    /// Grid cells used for builtin measures
    #[arg(long, default_value_t = 16384)]
    pub cells: usize,
    /// Output directory
    #[arg(long, default_value = "runs/approx-demo")]
    pub out: String,
}

pub fn run(args: &ApproxDemoArgs) -> Result<(), CmdError> {
    let mu: RadonMeasure = match args.measure.as_str() {
        "atom" => {
            let grid = Grid::unit(args.cells).map_err(|e| CmdError::config(e.to_string()))?;
            RadonMeasure::dirac(&grid, 0.5, 1.0).map_err(|e| CmdError::config(e.to_string()))?
        }
        "uniform2" => {
            let grid = Grid::unit(args.cells).map_err(|e| CmdError::config(e.to_string()))?;
            RadonMeasure::from_density_fn(&grid, |_| 2.0)
        }
        "zero" => {
            let grid = Grid::unit(args.cells).map_err(|e| CmdError::config(e.to_string()))?;
            RadonMeasure::zero(&grid)
        }
        path => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CmdError::config(format!("cannot read measure {}: {}", path, e)))?;
            MeasureSpec::from_toml(&text)
                .and_then(|s| s.build())
                .map_err(|e| CmdError::config(e.to_string()))?
        }
    };
    if args.n_max == 0 {
        return Err(CmdError::config("n_max must be positive"));
    }
    let grid = mu.grid().clone();
    let cover =
        BoundaryCover::for_grid(&grid, 0.2 * grid.length()).map_err(|e| CmdError::config(e.to_string()))?;
    let f = EnergyFunctional::new(Potential::psi1());
    let target = f.energy_measure(&mu);
    let eta = |x: f64| (std::f64::consts::PI * (x - grid.a()) / grid.length()).sin();
    let pair_mu = mu.pair_fn(eta);

    let out_dir = resolve_out_dir(&args.out);
    let mut manifest = ManifestBuilder::new("approx-demo", 0, &format!("measure={}", args.measure), &out_dir)
        .map_err(CmdError::io)?;
    let mut table = String::from("n,energy,energy_limit,pairing_gap\n");
    let mut n = 1usize;
    while n <= args.n_max {
        let u = approx_sequence(&cover, &mu, n).map_err(|e| CmdError::config(e.to_string()))?;
        let e = f.energy_field(&u);
        let pair_u: f64 = grid.spacing()
            * u.values()
                .iter()
                .enumerate()
                .map(|(i, v)| v * eta(grid.node(i)))
                .sum::<f64>();
        table.push_str(&csv_row(&[n as f64, e, target, (pair_u - pair_mu).abs()]));
        println!(
            "n = {:5}  energy = {:.6}  (limit {:.6})  pairing gap = {:.3e}",
            n,
            e,
            target,
            (pair_u - pair_mu).abs()
        );
        n *= 2;
    }
    manifest.write_file("approx.csv", &table).map_err(CmdError::io)?;
    manifest.finish().map_err(CmdError::io)?;
    Ok(())
}
