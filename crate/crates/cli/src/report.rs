//! Report and CSV emission.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use isingmf::dense::DenseMatrix;
use isingmf::error::Error;
use isingmf::feapprox::{approx_free_energy, BudgetCaps};
use isingmf::model::{FreeEnergyReport, IsingModel, Model};
use isingmf::{bounds, exact, meanfield};

pub fn write_report(report: &FreeEnergyReport, out: Option<&Path>) -> Result<(), Error> {
    if let Some(path) = out {
        let text = serde_json::to_string_pretty(report)?;
        fs::write(path, text)?;
        println!("report written to {}", path.display());
    }
    Ok(())
}

pub fn write_json(doc: &serde_json::Value, out: Option<&Path>) -> Result<(), Error> {
    if let Some(path) = out {
        fs::write(path, serde_json::to_string_pretty(doc)?)?;
        println!("report written to {}", path.display());
    }
    Ok(())
}

/// Stable-schema bounds document; entries not applicable to the model kind or
/// not requested stay null.
pub fn bounds_document(
    model: &Model,
    epsilon: Option<f64>,
    delta: Option<f64>,
) -> Result<serde_json::Value, Error> {
    let mut mean_field = serde_json::Value::Null;
    let mut mrf = serde_json::Value::Null;
    let mut tradeoff = serde_json::Value::Null;
    let mut t_rank = serde_json::Value::Null;
    let mut low_rank = serde_json::Value::Null;
    match model {
        Model::Ising(m) => {
            mean_field = bounds::mean_field_error_bound(m).into();
            if let Some(eps) = epsilon {
                tradeoff = bounds::epsilon_tradeoff_bound(m, eps)?.into();
                low_rank = bounds::low_threshold_rank_bound(m, eps)?.into();
            }
            if let Some(d) = delta {
                t_rank = bounds::threshold_rank(m, d)?.into();
            }
        }
        Model::Mrf(m) => {
            mrf = bounds::mrf_error_bound(m).into();
        }
    }
    Ok(serde_json::json!({
        "n": model.n(),
        "kind": match model { Model::Ising(_) => "ising", Model::Mrf(_) => "mrf" },
        "frobenius_norm": model.frobenius_norm(),
        "mean_field_error_bound": mean_field,
        "mrf_error_bound": mrf,
        "epsilon": epsilon,
        "epsilon_tradeoff_bound": tradeoff,
        "delta": delta,
        "threshold_rank": t_rank,
        "low_threshold_rank_bound": low_rank,
    }))
}

pub fn bounds_summary(doc: &serde_json::Value) -> String {
    let mut lines = vec![format!(
        "n = {}, ‖J‖_F = {:.6}",
        doc["n"], doc["frobenius_norm"]
    )];
    for (key, label) in [
        ("mean_field_error_bound", "mean-field error bound"),
        ("mrf_error_bound", "MRF error bound"),
        ("epsilon_tradeoff_bound", "epsilon tradeoff bound"),
        ("threshold_rank", "threshold rank"),
        ("low_threshold_rank_bound", "low-threshold-rank bound"),
    ] {
        if let Some(v) = doc[key].as_f64() {
            lines.push(format!("{label} = {v:.6}"));
        }
    }
    lines.join("\n")
}

fn scale_couplings(model: &IsingModel, beta: f64) -> Result<IsingModel, Error> {
    let n = model.n();
    let mut c = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            *c.at_mut(i, j) = beta * model.coupling(i, j);
        }
    }
    IsingModel::new(c, model.fields().to_vec())
}

struct Sweep {
    name: String,
    values: Vec<f64>,
}

fn parse_sweep(spec: &str) -> Result<Sweep, Error> {
    let bad = || {
        Error::InvalidParams(format!(
            "bad sweep spec `{spec}`; expected NAME:START,END,STEP"
        ))
    };
    let (name, rest) = spec.split_once(':').ok_or_else(bad)?;
    let parts: Vec<&str> = rest.split(',').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_, _>>()?;
    let (start, end, step) = (nums[0], nums[1], nums[2]);
    if step <= 0.0 || end < start {
        return Err(bad());
    }
    let mut values = Vec::new();
    let mut k = 0u32;
    loop {
        let v = start + step * k as f64;
        if v > end + step * 1e-9 {
            break;
        }
        values.push(v);
        k += 1;
    }
    Ok(Sweep {
        name: name.trim().to_ascii_lowercase(),
        values,
    })
}

pub fn run_bench(
    model: &IsingModel,
    sweep_spec: &str,
    out: &Path,
    seed: u64,
    tol: f64,
    cap: usize,
) -> Result<(), Error> {
    let sweep = parse_sweep(sweep_spec)?;
    let file = fs::File::create(out)?;
    let mut w = std::io::BufWriter::new(file);
    match sweep.name.as_str() {
        "beta" => {
            writeln!(w, "beta,F,Fstar,gap,bound")?;
            for &beta in &sweep.values {
                let scaled = scale_couplings(model, beta)?;
                let f = exact::exact_free_energy_capped(&scaled, cap)?;
                let restarts = meanfield::default_restarts(scaled.n());
                let (_, fstar) = meanfield::multistart_ascent(&scaled, restarts, seed, tol);
                let bound = bounds::mean_field_error_bound(&scaled);
                writeln!(w, "{beta},{f},{fstar},{},{bound}", f - fstar)?;
            }
        }
        "eps" | "epsilon" => {
            writeln!(w, "epsilon,F,Fhat,abs_error,budget_total")?;
            let f = exact::exact_free_energy_capped(model, cap)?;
            for &eps in &sweep.values {
                let rep = approx_free_energy(model, eps, seed, &BudgetCaps::default())?;
                writeln!(
                    w,
                    "{eps},{f},{},{},{}",
                    rep.estimate,
                    (f - rep.estimate).abs(),
                    rep.budget.total()
                )?;
            }
        }
        other => {
            return Err(Error::InvalidParams(format!(
                "unknown sweep variable `{other}`; use beta or eps"
            )))
        }
    }
    w.flush()?;
    println!(
        "sweep written to {} ({} points)",
        out.display(),
        sweep.values.len()
    );
    Ok(())
}
