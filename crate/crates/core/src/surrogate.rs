//! Trajectory prediction with a bilinear Koopman model.
//!
//! SUR1 re-lifts the projected state after every step; SUR2 lifts the
//! initial state once and keeps propagating the lifted vector. Both wrap the
//! orientation into `(-pi, pi]` before lifting and add the removed multiple
//! of 2pi back onto every predicted orientation. SUR2 can only do this at the
//! initial lift, which is one reason it drifts over long horizons.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::BilinearKoopmanModel;
use crate::types::{wrap_angle, Control, State, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// Project and re-lift after every step.
    #[serde(rename = "SUR1")]
    Sur1,
    /// Lift once, project only for output.
    #[serde(rename = "SUR2")]
    Sur2,
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "SUR1" => Ok(Variant::Sur1),
            "SUR2" => Ok(Variant::Sur2),
            _ => Err(Error::invalid(format!("unknown surrogate variant `{s}` (expected SUR1 or SUR2)"))),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Sur1 => "SUR1",
            Variant::Sur2 => "SUR2",
        })
    }
}

fn nan_state() -> State {
    State::new(f64::NAN, f64::NAN, f64::NAN)
}

/// One SUR1 step: wrap, lift, apply `K_u`, project, unwrap.
///
/// A non-finite input state yields a non-finite prediction.
pub fn sur1_step(model: &BilinearKoopmanModel, s: &State, u: &Control) -> State {
    let Ok(w) = wrap_angle(s.theta) else {
        return nan_state();
    };
    if !(s.x1.is_finite() && s.x2.is_finite()) {
        return nan_state();
    }
    let obs = model.observables();
    let z = obs.lift(&State::new(s.x1, s.x2, w.wrapped));
    let next = model.apply(u, &z);
    let p = obs.project(next.as_slice()).expect("operator preserves length");
    State::new(p.x1, p.x2, w.unshift(p.theta))
}

pub fn sur1_rollout(model: &BilinearKoopmanModel, x0: State, controls: &[Control]) -> Trajectory {
    let mut states = Vec::with_capacity(controls.len() + 1);
    states.push(x0);
    let mut s = x0;
    for u in controls {
        s = sur1_step(model, &s, u);
        states.push(s);
    }
    Trajectory::new(model.delta(), states, controls.to_vec()).expect("consistent lengths")
}

pub fn sur2_rollout(model: &BilinearKoopmanModel, x0: State, controls: &[Control]) -> Trajectory {
    let mut states = Vec::with_capacity(controls.len() + 1);
    states.push(x0);
    let obs = model.observables();
    match wrap_angle(x0.theta) {
        Ok(w) => {
            let mut z = obs.lift(&State::new(x0.x1, x0.x2, w.wrapped));
            for u in controls {
                z = model.apply(u, &z);
                let p = obs.project(z.as_slice()).expect("operator preserves length");
                states.push(State::new(p.x1, p.x2, w.unshift(p.theta)));
            }
        }
        Err(_) => states.extend(controls.iter().map(|_| nan_state())),
    }
    Trajectory::new(model.delta(), states, controls.to_vec()).expect("consistent lengths")
}

pub fn rollout(model: &BilinearKoopmanModel, variant: Variant, x0: State, controls: &[Control]) -> Trajectory {
    match variant {
        Variant::Sur1 => sur1_rollout(model, x0, controls),
        Variant::Sur2 => sur2_rollout(model, x0, controls),
    }
}
