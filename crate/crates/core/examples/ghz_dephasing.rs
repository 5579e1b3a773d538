//! GHZ states under identical local dephasing on every qubit.

use std::f64::consts::PI;

use qnmk::channels::{apply_local_maps, GammaProfile, LocalMapSpec};
use qnmk::correlations::{ghz_total, total_correlation};
use qnmk::nonmarkov::{analytic_dephasing_n, degree_of_nonmarkovianity, InitialStateSet, Measure, NonMarkovSettings, Scenario, TimeGrid};
use qnmk::states::make_ghz;

fn main() -> qnmk::Result<()> {
    let profile = GammaProfile::cosine(0.25, 1.0, 0.0);
    for n in 2..=5 {
        let spec = LocalMapSpec::dephasing_on(n, &(0..n).collect::<Vec<_>>(), &profile)?;
        let ghz = make_ghz(n)?;
        // the coherence factors multiply, so the collective profile has n times the amplitude
        let collective = GammaProfile::cosine(0.25 * n as f64, 1.0, 0.0);
        let t = 1.0;
        let rho_t = apply_local_maps(&ghz, &spec, t)?.state;
        let f = qnmk::channels::dephasing_factor(&collective, t);

        let n_t = degree_of_nonmarkovianity(
            &Scenario::LocalMaps(spec),
            Measure::T,
            &InitialStateSet::ExplicitList(vec![(
                qnmk::nonmarkov::InitialStateLabel { description: format!("ghz{n}"), x_params: None },
                ghz,
            )]),
            &NonMarkovSettings::new(TimeGrid::new(2.0 * PI, 1e-3)),
        )?;
        println!(
            "n = {n}: T(t=1) direct {:.10} closed {:.10}; N_T {:.6} vs -2∫γf {:.6}",
            total_correlation(&rho_t)?,
            ghz_total(n, f)?,
            n_t.n_value,
            analytic_dephasing_n(&collective, 2.0 * PI)?,
        );
    }
    Ok(())
}
