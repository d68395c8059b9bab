//! Tables and point evaluations of a potential's convex calculus.

use clap::Args;
use spme::convex::{Potential, PotentialSpec, RegularizedPotential};

use super::CmdError;

#[derive(Args, Debug)]
pub struct ConvexArgs {
    /// Builtin name (psi1, psi2, quadratic) or path to a potential TOML file
    #[arg(long)]
    pub potential: String,
    /// Operation: psi | phi | resolvent | yosida | moreau | conjugate |
    /// recession | recession-conjugate
    #[arg(long)]
    pub op: String,
    /// Regularization parameter (resolvent / yosida / moreau)
    #[arg(long)]
    pub eps: Option<f64>,
    /// Evaluation grid start:end:step
    #[arg(long, allow_hyphen_values = true)]
    pub grid: Option<String>,
    /// Single evaluation point
    #[arg(long, allow_hyphen_values = true)]
    pub at: Option<f64>,
}

fn load_potential(spec: &str) -> Result<Potential, CmdError> {
    match spec {
        "psi1" => Ok(Potential::psi1()),
        "psi2" => Ok(Potential::psi2()),
        "quadratic" => Ok(Potential::quadratic()),
        path => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CmdError::config(format!("cannot read potential {}: {}", path, e)))?;
            let spec: PotentialSpec = toml::from_str(&text)
                .map_err(|e| CmdError::config(format!("bad potential spec: {}", e)))?;
            Potential::from_spec(spec).map_err(|e| CmdError::config(e.to_string()))
        }
    }
}

fn parse_grid(text: &str) -> Result<Vec<f64>, CmdError> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(CmdError::config(format!(
            "grid must be start:end:step, got '{}'",
            text
        )));
    }
    let nums: Result<Vec<f64>, _> = parts.iter().map(|p| p.parse::<f64>()).collect();
    let nums = nums.map_err(|e| CmdError::config(format!("bad grid number: {}", e)))?;
    let (start, end, step) = (nums[0], nums[1], nums[2]);
    if !(step > 0.0 && end >= start) {
        return Err(CmdError::config("grid needs end >= start and step > 0"));
    }
    let mut out = Vec::new();
    let mut x = start;
    let n = ((end - start) / step).round() as usize;
    for k in 0..=n {
        x = start + k as f64 * step;
        out.push(x);
    }
    let _ = x;
    Ok(out)
}

pub fn run(args: &ConvexArgs) -> Result<(), CmdError> {
    let potential = load_potential(&args.potential)?;
    let points: Vec<f64> = match (&args.grid, args.at) {
        (Some(g), None) => parse_grid(g)?,
        (None, Some(x)) => vec![x],
        _ => {
            return Err(CmdError::config(
                "need exactly one of --grid start:end:step or --at x",
            ))
        }
    };
    let needs_eps = matches!(args.op.as_str(), "resolvent" | "yosida" | "moreau");
    let rp = if needs_eps {
        let eps = args
            .eps
            .ok_or_else(|| CmdError::config(format!("--op {} needs --eps", args.op)))?;
        Some(
            RegularizedPotential::new(potential.clone(), eps)
                .map_err(|e| CmdError::config(e.to_string()))?,
        )
    } else {
        None
    };
    match args.op.as_str() {
        "phi" => {
            println!("x,phi_lower,phi_upper");
            for &x in &points {
                let iv = potential.subdifferential(x);
                println!("{},{},{}", x, iv.lower, iv.upper);
            }
        }
        "psi" | "conjugate" | "recession" | "recession-conjugate" => {
            println!("x,value");
            for &x in &points {
                let v = match args.op.as_str() {
                    "psi" => potential.eval(x),
                    "conjugate" => potential.conjugate(x),
                    "recession" => potential.recession(x),
                    _ => potential
                        .recession_conjugate(x)
                        .map_err(|e| CmdError::config(e.to_string()))?,
                };
                println!("{},{}", x, v);
            }
        }
        "resolvent" | "yosida" | "moreau" => {
            let rp = rp.expect("regularization built above");
            println!("x,value");
            for &x in &points {
                let v = match args.op.as_str() {
                    "resolvent" => rp.resolvent(x),
                    "yosida" => rp.yosida(x),
                    _ => rp.moreau(x),
                }
                .map_err(|e| CmdError::solver(e.to_string()))?;
                println!("{},{}", x, v);
            }
        }
        other => {
            return Err(CmdError::config(format!("unknown operation '{}'", other)));
        }
    }
    Ok(())
}
