//! Which measured parties keep Q and C monotone under divisible maps.

use qnmk::channels::{theorem1_applicable, GammaProfile, LocalMapSpec};
use qnmk::nonmarkov::{degree_of_nonmarkovianity, InitialStateSet, Measure, NonMarkovSettings, Scenario, TimeGrid};
use qnmk::states::{BlochDirection, MeasurementSpec};

fn main() -> qnmk::Result<()> {
    let spec = LocalMapSpec::dephasing_on(2, &[1], &GammaProfile::constant(0.3))?;
    for party in [0, 1] {
        let m = MeasurementSpec::on(2, &[(party, BlochDirection::Z)])?;
        let check = theorem1_applicable(&spec, &m)?;
        println!("measure qubit {party}: ok = {}, violations {:?}", check.ok, check.violations);
    }

    let scenario = Scenario::LocalMaps(spec);
    let states = InitialStateSet::RandomXStates { count: 8, seed: 11 };
    let mut settings = NonMarkovSettings::new(TimeGrid::new(6.0, 1e-2)).measuring(&[1]);
    match degree_of_nonmarkovianity(&scenario, Measure::Q, &states, &settings) {
        Err(e) => println!("refused: {e}"),
        Ok(r) => println!("unexpected N_Q = {}", r.n_value),
    }
    settings.override_theorem1 = true;
    let r = degree_of_nonmarkovianity(&scenario, Measure::Q, &states, &settings)?;
    println!("with override: N_Q = {:.3e}, warnings {:?}", r.n_value, r.warnings);
    Ok(())
}
