//! Q, C and T of an X state: closed forms next to the measurement optimizer.

use qnmk::correlations::{classical_correlation, quantum_correlation, total_correlation, x_closed_forms, CorrelationSettings};
use qnmk::states::{make_x_state, XStateParams};

fn main() -> qnmk::Result<()> {
    let p = XStateParams::new(0.2, -0.2, 0.6, 0.5, 0.7);
    let rho = make_x_state(p)?;

    for party in [0, 1] {
        let settings = CorrelationSettings::measuring(&[party]);
        let closed = x_closed_forms(p, party)?;
        let q = quantum_correlation(&rho, &settings)?;
        let c = classical_correlation(&rho, &settings)?;
        println!("measuring qubit {party}");
        println!("  Q  closed {:.10}  optimizer {:.10}  at {:?}", closed.q, q.value, q.directions[0].angles());
        println!("  C  closed {:.10}  optimizer {:.10}  at {:?}", closed.c, c.value, c.directions[0].angles());
    }
    println!("T = {:.10}", total_correlation(&rho)?);
    Ok(())
}
