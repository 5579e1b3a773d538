//! Two qubits decaying into a bath that hops between two configurations.
//! Writes T(τ) for several hopping speeds v and prints the N_T lower bound.

use std::io::Write;

use qnmk::dynamics::{integrate_rate_equations, GadScenario};
use qnmk::nonmarkov::{accumulate_n, measure_series, Measure};
use qnmk::correlations::CorrelationSettings;
use qnmk::states::{make_x_state, XStateParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let rho0 = make_x_state(XStateParams::new(0.2, -0.2, 0.6, 0.5, 0.7))?;
    let speeds = [0.05, 0.5, 5.0, 100.0];
    let mut columns = Vec::new();
    for v in speeds {
        let traj = integrate_rate_equations(&GadScenario::new(0.92, 0.5, v), &rho0, 10.0, 1e-3, 1)?;
        let series = measure_series(&traj, Measure::T, &CorrelationSettings::default())?;
        let n = accumulate_n(&series, 1e-10);
        println!("v = {v:<6} N_T >= {:.6e}  rising intervals {:?}", n.n_value, n.rising_intervals);
        columns.push(series);
    }

    let path = std::env::temp_dir().join("fluctuating_bath_total_correlation.csv");
    let mut out = std::io::BufWriter::new(std::fs::File::create(&path)?);
    writeln!(out, "tau,{}", speeds.map(|v| format!("T_v{v}")).join(","))?;
    for k in (0..columns[0].len()).step_by(50) {
        let row: Vec<String> = columns.iter().map(|c| format!("{:.8e}", c[k].value)).collect();
        writeln!(out, "{:.8e},{}", columns[0][k].t, row.join(","))?;
    }
    println!("series written to {}", path.display());
    Ok(())
}
