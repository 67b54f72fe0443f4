//! Fixtures shared by the criterion benches.

use fa_isac::qcqp::{build_surrogate, Surrogate};
use fa_isac::wmmse::{assemble_quadratic, update_aux, QuadraticData};
use fa_isac::{build_channels, init_solution, presets, steering_vector, Apv, Beamformers, Scenario, C64};
use nalgebra::DVector;

/// The overloaded eight-user scenario at the starting point of the solver.
pub struct Fixture {
    pub scenario: Scenario,
    pub w: Beamformers,
    pub t: Apv,
    pub quad: QuadraticData,
    pub probe: DVector<C64>,
    pub surrogate: Surrogate,
}

pub fn eight_user(antennas: usize, probe_threshold: f64) -> Fixture {
    let scenario = presets::eight_user(antennas, 1.0, probe_threshold);
    let (w, t) = init_solution(&scenario);
    let ch = build_channels(&scenario, &t);
    let aux = update_aux(&ch, &w, &scenario.noise_power).expect("start is an MMSE point");
    let quad = assemble_quadratic(&ch, &aux);
    let probe = steering_vector(&t, scenario.probe_angle, scenario.wavelength);
    let surrogate = build_surrogate(&t, &w.covariance(), scenario.probe_angle, scenario.wavelength);
    Fixture {
        scenario,
        w,
        t,
        quad,
        probe,
        surrogate,
    }
}
