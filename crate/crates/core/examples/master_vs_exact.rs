//! RK4 master-equation integration checked against the closed-form map.

use qnmk::channels::{DecayTarget, GammaProfile, LocalChannel, LocalMapSpec};
use qnmk::dynamics::{integrate_master, integrate_rate_equations, sample_local_maps, GadScenario, MasterEqSpec};
use qnmk::states::{make_x_state, XStateParams};

fn main() -> qnmk::Result<()> {
    let rho0 = make_x_state(XStateParams::new(0.2, -0.2, 0.6, 0.5, 0.7))?;

    // time-dependent dephasing that stays divisible
    let profile = GammaProfile::cosine(0.3, 2.0, 0.35);
    let spec = MasterEqSpec::local_dephasing(2, &[(0, profile.clone()), (1, profile.clone())])?;
    let exact = LocalMapSpec::dephasing_on(2, &[0, 1], &profile)?;
    for dt in [1e-2, 5e-3, 2.5e-3] {
        let a = integrate_master(&spec, &rho0, 5.0, dt, 1)?;
        let b = sample_local_maps(&exact, &rho0, 5.0, dt, 1)?;
        println!("dephasing  dt {dt:<7} sup |ρ_rk4 - ρ_exact| = {:.3e}", a.sup_distance(&b));
    }

    // equal configuration rates collapse the fluctuating bath to plain decay
    let damping = MasterEqSpec::local_amplitude_damping(2, GammaProfile::constant(0.5), DecayTarget::One)?;
    let exact = LocalMapSpec::new(vec![
        LocalChannel::AmplitudeDamping { profile: GammaProfile::constant(0.5), target: DecayTarget::One };
        2
    ])?;
    for v in [0.05, 1.0, 100.0] {
        let bath = integrate_rate_equations(&GadScenario::new(0.5, 0.5, v), &rho0, 10.0, 1e-3, 10)?;
        let plain = integrate_master(&damping, &rho0, 10.0, 1e-3, 10)?;
        let closed = sample_local_maps(&exact, &rho0, 10.0, 1e-3, 10)?;
        println!(
            "bath v {v:<5} vs master {:.3e}, vs exact map {:.3e}",
            bath.sup_distance(&plain),
            bath.sup_distance(&closed)
        );
    }
    Ok(())
}
