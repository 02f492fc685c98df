//! One yaw-axis motor per arm, integrated in the motor frame:
//!
//! `J θ̈ = K i − f(θ, ω) − τe`,  `f(θ, ω) = a1 θ + a2 atan(a3 ω + a4) + a5`
//!
//! `τe` is the torque the arm exerts on its surroundings, i.e. minus whatever
//! the operator or the wall applies to it. The encoder reports
//! `encoder_sign · θ`; with the shipped controller the encoder must count
//! against positive current (see [`PlantParams::encoder_sign`]).

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlantError {
    #[error("invalid plant parameter: {0}")]
    BadParams(String),
    #[error("state became non-finite at t = {t}")]
    NonFinite { t: f64 },
    #[error("t = {t} is outside the trajectory domain [{start}, {end}]")]
    OutOfDomain { t: f64, start: f64, end: f64 },
}

pub type Result<T> = std::result::Result<T, PlantError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantParams {
    pub j_true: f64,
    pub k_true: f64,
    /// Nominal values the controller matrix was designed around. The
    /// simulation never reads them; they document the mismatch being injected.
    pub j_nom: f64,
    pub k_nom: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
    pub a5: f64,
    /// `+1` or `-1`. The printed controller integrates `-0.615 e` into the
    /// current command, which only converges when positive current turns the
    /// motor towards decreasing encoder counts, hence `-1`.
    pub encoder_sign: f64,
}

impl Default for PlantParams {
    fn default() -> Self {
        Self {
            j_true: 1e-4,
            k_true: 1.4,
            j_nom: 1e-4,
            k_nom: 1.4,
            a1: 0.0,
            a2: 0.1,
            a3: 0.15,
            a4: 0.0,
            a5: 0.0,
            encoder_sign: -1.0,
        }
    }
}

impl PlantParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in
            [("j_true", self.j_true), ("k_true", self.k_true), ("j_nom", self.j_nom), ("k_nom", self.k_nom)]
        {
            if !(v.is_finite() && v > 0.0) {
                return Err(PlantError::BadParams(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("a1", self.a1), ("a2", self.a2), ("a3", self.a3), ("a4", self.a4), ("a5", self.a5)] {
            if !v.is_finite() {
                return Err(PlantError::BadParams(format!("{name} is not finite")));
            }
        }
        if self.encoder_sign != 1.0 && self.encoder_sign != -1.0 {
            return Err(PlantError::BadParams(format!("encoder_sign must be 1 or -1, got {}", self.encoder_sign)));
        }
        Ok(())
    }
}

/// Motor-frame angle and velocity.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PlantState {
    pub theta: f64,
    pub omega: f64,
}

impl PlantState {
    /// `(θ, ω)` as the encoder reports them.
    pub fn measured(&self, params: &PlantParams) -> (f64, f64) {
        (params.encoder_sign * self.theta, params.encoder_sign * self.omega)
    }

    pub fn kinetic_energy(&self, params: &PlantParams) -> f64 {
        0.5 * params.j_true * self.omega * self.omega
    }
}

/// Unilateral spring–damper wall. The arm penetrates when `θ > wall_angle`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContactModel {
    pub wall_angle: f64,
    pub stiffness: f64,
    pub damping: f64,
    pub enabled: bool,
}

impl Default for ContactModel {
    fn default() -> Self {
        Self { wall_angle: 0.05, stiffness: 10.0, damping: 0.02, enabled: true }
    }
}

impl ContactModel {
    pub fn validate(&self) -> Result<()> {
        if !self.wall_angle.is_finite() || !(self.stiffness >= 0.0) || !(self.damping >= 0.0) {
            return Err(PlantError::BadParams(
                "contact needs a finite wall angle and non-negative stiffness and damping".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Trajectory {
    /// `amplitude · sin(2πt / period) · min(1, t / ramp)`, defined for all `t ≥ 0`.
    Sine { amplitude: f64, period: f64, ramp: f64 },
    /// Piecewise-linear through `[t, θ]` points with increasing `t`.
    Waypoints { points: Vec<[f64; 2]> },
}

impl Trajectory {
    pub fn validate(&self) -> Result<()> {
        match self {
            Trajectory::Sine { amplitude, period, ramp } => {
                if !amplitude.is_finite() || !(*period > 0.0) || !(*ramp >= 0.0) {
                    return Err(PlantError::BadParams("sine needs finite amplitude, positive period, ramp ≥ 0".into()));
                }
            }
            Trajectory::Waypoints { points } => {
                if points.len() < 2 {
                    return Err(PlantError::BadParams("waypoints need at least two points".into()));
                }
                if points.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(PlantError::BadParams("waypoints must be finite".into()));
                }
                if points.windows(2).any(|w| w[1][0] <= w[0][0]) {
                    return Err(PlantError::BadParams("waypoint times must increase".into()));
                }
            }
        }
        Ok(())
    }

    /// Interval on which the trajectory is defined.
    pub fn domain(&self) -> (f64, f64) {
        match self {
            Trajectory::Sine { .. } => (0.0, f64::INFINITY),
            Trajectory::Waypoints { points } => (points[0][0], points[points.len() - 1][0]),
        }
    }

    pub fn at(&self, t: f64) -> Result<f64> {
        let (start, end) = self.domain();
        if !(t >= start && t <= end) {
            return Err(PlantError::OutOfDomain { t, start, end });
        }
        Ok(match self {
            Trajectory::Sine { amplitude, period, ramp } => {
                let envelope = if *ramp > 0.0 { (t / ramp).min(1.0) } else { 1.0 };
                amplitude * (std::f64::consts::TAU * t / period).sin() * envelope
            }
            Trajectory::Waypoints { points } => {
                let k = points.partition_point(|p| p[0] <= t).clamp(1, points.len() - 1);
                let ([t0, y0], [t1, y1]) = (points[k - 1], points[k]);
                y0 + (y1 - y0) * (t - t0) / (t1 - t0)
            }
        })
    }
}

/// A simulated hand holding the leader: an impedance pulling the motor towards
/// `trajectory(t)` (motor frame).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorProfile {
    pub trajectory: Trajectory,
    pub stiffness: f64,
    pub damping: f64,
}

impl OperatorProfile {
    /// Also checks that the trajectory covers `[0, duration]`.
    pub fn validate(&self, duration: f64) -> Result<()> {
        self.trajectory.validate()?;
        if !(self.stiffness >= 0.0) || !(self.damping >= 0.0) {
            return Err(PlantError::BadParams("operator stiffness and damping must be ≥ 0".into()));
        }
        let (start, end) = self.trajectory.domain();
        if start > 0.0 || end < duration {
            return Err(PlantError::BadParams(format!(
                "trajectory covers [{start}, {end}] but the run needs [0, {duration}]"
            )));
        }
        Ok(())
    }
}

pub fn friction_torque(theta: f64, omega: f64, params: &PlantParams) -> f64 {
    params.a1 * theta + params.a2 * (params.a3 * omega + params.a4).atan() + params.a5
}

/// Torque the wall applies to the arm: zero off the wall, otherwise
/// `-k δ - c ω`, never pulling the arm in.
pub fn external_torque(state: &PlantState, contact: &ContactModel) -> f64 {
    if !contact.enabled {
        return 0.0;
    }
    let depth = state.theta - contact.wall_angle;
    if depth <= 0.0 {
        return 0.0;
    }
    (-contact.stiffness * depth - contact.damping * state.omega).min(0.0)
}

/// Torque the operator's hand applies: `k (θ_ref(t) − θ) − c ω`.
pub fn operator_torque(t: f64, state: &PlantState, profile: &OperatorProfile) -> Result<f64> {
    let target = profile.trajectory.at(t)?;
    Ok(profile.stiffness * (target - state.theta) - profile.damping * state.omega)
}

/// Integrates over `dt` with `substeps` semi-implicit Euler steps, holding `i`
/// and `tau_e` constant.
pub fn step_plant(
    state: PlantState,
    i: f64,
    tau_e: f64,
    params: &PlantParams,
    dt: f64,
    substeps: usize,
) -> Result<PlantState> {
    step_plant_with(state, i, params, 0.0, dt, substeps, |_, _| Ok(-tau_e))
}

/// Like [`step_plant`], but the environment's applied torque is re-evaluated at
/// every substep from `(t, state)`; `τe` is its negation.
pub fn step_plant_with<F>(
    state: PlantState,
    i: f64,
    params: &PlantParams,
    t0: f64,
    dt: f64,
    substeps: usize,
    mut applied: F,
) -> Result<PlantState>
where
    F: FnMut(f64, &PlantState) -> Result<f64>,
{
    if !(dt > 0.0) || substeps == 0 {
        return Err(PlantError::BadParams(format!("need dt > 0 and substeps ≥ 1, got {dt}, {substeps}")));
    }
    let h = dt / substeps as f64;
    let mut s = state;
    for n in 0..substeps {
        let t = t0 + n as f64 * h;
        let tau_e = -applied(t, &s)?;
        let accel = (params.k_true * i - friction_torque(s.theta, s.omega, params) - tau_e) / params.j_true;
        s.omega += h * accel;
        s.theta += h * s.omega;
        if !(s.theta.is_finite() && s.omega.is_finite()) {
            return Err(PlantError::NonFinite { t: t + h });
        }
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn frictionless() -> PlantParams {
        PlantParams { a1: 0.0, a2: 0.0, a3: 0.0, a4: 0.0, a5: 0.0, ..PlantParams::default() }
    }

    #[test]
    fn friction_formula() {
        let p = PlantParams { a1: 1.0, a2: 0.0, a3: 0.0, a4: 0.0, a5: 0.0, ..PlantParams::default() };
        assert_eq!(friction_torque(2.0, 5.0, &p), 2.0);
        let p = PlantParams { a1: 0.0, a2: 3.0, a3: 2.0, a4: 0.0, a5: 0.0, ..PlantParams::default() };
        assert_eq!(friction_torque(1.0, 0.0, &p), 0.0);
        let p = PlantParams { a1: 0.3, a2: 0.7, a3: 1.9, a4: -0.2, a5: 0.05, ..PlantParams::default() };
        let (th, om) = (0.4_f64, -1.3_f64);
        // re-evaluated via atan2 rather than atan
        let want = 0.3 * th + 0.7 * (1.9 * om - 0.2).atan2(1.0) + 0.05;
        assert!((friction_torque(th, om, &p) - want).abs() < 1e-15);
    }

    #[test]
    fn wall() {
        let c = ContactModel { wall_angle: 0.1, stiffness: 20.0, damping: 0.5, enabled: true };
        assert_eq!(external_torque(&PlantState { theta: 0.05, omega: 3.0 }, &c), 0.0);
        let t = external_torque(&PlantState { theta: 0.15, omega: 0.0 }, &c);
        assert!((t + 20.0 * 0.05).abs() < 1e-12);
        // leaving fast: damping would pull, clamp to zero
        assert_eq!(external_torque(&PlantState { theta: 0.11, omega: -10.0 }, &c), 0.0);
        let off = ContactModel { enabled: false, ..c };
        assert_eq!(external_torque(&PlantState { theta: 1.0, omega: 0.0 }, &off), 0.0);
    }

    #[test]
    fn operator() {
        let prof = OperatorProfile {
            trajectory: Trajectory::Waypoints { points: vec![[0.0, 0.0], [1.0, 1.0], [2.0, 1.0]] },
            stiffness: 1.0,
            damping: 0.3,
        };
        assert_eq!(operator_torque(1.5, &PlantState { theta: 1.0, omega: 0.0 }, &prof).unwrap(), 0.0);
        assert_eq!(operator_torque(1.5, &PlantState { theta: 0.0, omega: 0.0 }, &prof).unwrap(), 1.0);
        assert_eq!(prof.trajectory.at(0.5).unwrap(), 0.5);
        assert!(matches!(operator_torque(2.5, &PlantState::default(), &prof), Err(PlantError::OutOfDomain { .. })));
        assert!(prof.validate(2.0).is_ok());
        assert!(prof.validate(3.0).is_err());
    }

    #[test]
    fn sine_ramp() {
        let tr = Trajectory::Sine { amplitude: 2.0, period: 4.0, ramp: 2.0 };
        assert_eq!(tr.at(0.0).unwrap(), 0.0);
        assert!((tr.at(1.0).unwrap() - 1.0).abs() < 1e-12); // half envelope at the crest
        assert!((tr.at(5.0).unwrap() - 2.0).abs() < 1e-12);
        assert!(tr.at(-0.1).is_err());
    }

    #[test]
    fn free_drift() {
        let p = frictionless();
        let s = step_plant(PlantState { theta: 0.1, omega: 2.0 }, 0.0, 0.0, &p, 0.02, 20).unwrap();
        assert_eq!(s.omega, 2.0);
        assert!((s.theta - (0.1 + 2.0 * 0.02)).abs() < 1e-12);
    }

    #[test]
    fn ballistic() {
        let p = frictionless();
        let i = 1e-4;
        let acc = p.k_true * i / p.j_true;
        let mut s = PlantState::default();
        for k in 1..=50 {
            s = step_plant(s, i, 0.0, &p, 0.02, 20).unwrap();
            let t = k as f64 * 0.02;
            // semi-implicit Euler overshoots by acc·h·t/2 with h = 1 ms
            assert!((s.theta - acc * t * t / 2.0).abs() <= acc * 1e-3 * t / 2.0 + 1e-9);
        }
        assert!((s.theta - acc / 2.0).abs() < 1e-3 * acc);
        let tiny = PlantParams { k_true: 1e-3, ..p };
        let s = step_plant(PlantState::default(), 1e-3, 0.0, &tiny, 0.02, 20).unwrap();
        assert!((s.theta - 1e-3 * 1e-3 * 0.02f64.powi(2) / (2.0 * tiny.j_true)).abs() < 1e-6);
    }

    #[test]
    fn rejects_bad_input() {
        let p = PlantParams::default();
        assert!(step_plant(PlantState::default(), 0.0, 0.0, &p, 0.0, 20).is_err());
        assert!(step_plant(PlantState::default(), 0.0, 0.0, &p, 0.02, 0).is_err());
        assert!(matches!(
            step_plant(PlantState::default(), f64::MAX, 0.0, &p, 0.02, 20),
            Err(PlantError::NonFinite { .. })
        ));
        assert!(PlantParams { j_true: 0.0, ..p }.validate().is_err());
        assert!(PlantParams { encoder_sign: 0.5, ..p }.validate().is_err());
    }

    /// Full nonlinear run: operator-driven arm against a wall with a ramping current.
    fn nonlinear_run(substeps: usize) -> PlantState {
        let p = PlantParams { a1: 0.01, a4: 0.02, a5: -0.001, ..PlantParams::default() };
        let prof = OperatorProfile {
            trajectory: Trajectory::Sine { amplitude: 0.5, period: 5.0, ramp: 1.0 },
            stiffness: 4.0,
            damping: 0.002,
        };
        let wall = ContactModel::default();
        let mut s = PlantState::default();
        let ts = 0.02;
        for k in 0..750 {
            let t0 = k as f64 * ts;
            let i = 0.002 * (0.7 * t0).sin();
            s = step_plant_with(s, i, &p, t0, ts, substeps, |t, st| {
                Ok(operator_torque(t, st, &prof)? + external_torque(st, &wall))
            })
            .unwrap();
        }
        s
    }

    #[test]
    fn converges_to_fine_step_reference() {
        let reference = nonlinear_run(2000);
        let coarse = nonlinear_run(20);
        assert!((coarse.theta - reference.theta).abs() < 1e-4, "{coarse:?} vs {reference:?}");
    }

    #[test]
    fn first_order_convergence() {
        let reference = nonlinear_run(4000);
        let e1 = (nonlinear_run(40).theta - reference.theta).abs();
        let e2 = (nonlinear_run(80).theta - reference.theta).abs();
        let ratio = e1 / e2;
        assert!((1.6..2.5).contains(&ratio), "error ratio {ratio}");
    }

    #[test]
    fn operator_drives_towards_reference() {
        let p = PlantParams::default();
        let prof = OperatorProfile {
            trajectory: Trajectory::Waypoints { points: vec![[0.0, 0.3], [5.0, 0.3]] },
            stiffness: 4.0,
            damping: 0.05,
        };
        let mut s = PlantState::default();
        for k in 0..200 {
            s = step_plant_with(s, 0.0, &p, k as f64 * 0.02, 0.02, 20, |t, st| operator_torque(t, st, &prof)).unwrap();
        }
        assert!((s.theta - 0.3).abs() < 0.01, "{s:?}");
    }

    proptest! {
        #[test]
        fn kinetic_energy_never_grows_with_passive_friction(
            omega0 in -20.0f64..20.0,
            theta0 in -1.0f64..1.0,
            // h·a2·a3/J stays below 2, the explicit-damping stability limit
            a2 in 0.01f64..0.4,
            a3 in 0.01f64..0.4,
        ) {
            let p = PlantParams { a1: 0.0, a2, a3, a4: 0.0, a5: 0.0, ..PlantParams::default() };
            let mut s = PlantState { theta: theta0, omega: omega0 };
            for _ in 0..100 {
                let next = step_plant(s, 0.0, 0.0, &p, 0.02, 20).unwrap();
                prop_assert!(next.kinetic_energy(&p) <= s.kinetic_energy(&p) + 1e-18);
                s = next;
            }
        }

        #[test]
        fn wall_opposes_penetration(theta in -1.0f64..1.0, omega in -10.0f64..10.0) {
            let c = ContactModel::default();
            let tau = external_torque(&PlantState { theta, omega }, &c);
            prop_assert!(tau <= 0.0);
            if theta <= c.wall_angle {
                prop_assert_eq!(tau, 0.0);
            }
            if theta > c.wall_angle && omega >= 0.0 {
                prop_assert!(tau < 0.0);
            }
        }
    }
}
