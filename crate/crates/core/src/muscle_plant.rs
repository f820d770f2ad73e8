//! Muscle force model, its linearization about an equilibrium firing rate, and
//! the zero-order-hold discretization that yields the scalar plant
//! `δf(t+1) = a·δf(t) + b·δr(t)`.

use crate::error::{invalid, Result};

/// Maximum force (N) and activation time constant (s) of the muscle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MuscleParams {
    pub f_max: f64,
    pub tau: f64,
}

impl MuscleParams {
    pub fn new(f_max: f64, tau: f64) -> Result<Self> {
        if !(f_max > 0.0 && f_max.is_finite()) {
            return Err(invalid("f_max", format!("must be positive and finite, got {f_max}")));
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(invalid("tau", format!("must be positive and finite, got {tau}")));
        }
        Ok(Self { f_max, tau })
    }
}

impl Default for MuscleParams {
    fn default() -> Self {
        Self {
            f_max: 60.0,
            tau: 0.02,
        }
    }
}

/// Equilibrium pair `(r̄, f̄)` of the muscle model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub r_bar: f64,
    pub f_bar: f64,
}

impl OperatingPoint {
    /// Equilibrium at firing rate `r_bar`; the force follows from `df/dt = 0`.
    pub fn at_rate(params: &MuscleParams, r_bar: f64) -> Result<Self> {
        if !r_bar.is_finite() {
            return Err(invalid("r_bar", "must be finite"));
        }
        Ok(Self {
            r_bar,
            f_bar: equilibrium_force(params, r_bar),
        })
    }
}

/// Scalar discrete-time plant with its sampling time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscretePlant {
    pub a: f64,
    pub b: f64,
    pub ts: f64,
}

/// Continuous-time linearization `d(δf)/dt = a_c·δf + b_c·δr`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuousLinearization {
    pub a_c: f64,
    pub b_c: f64,
}

/// `f_max / (1 + e^{-r̄})`.
pub fn equilibrium_force(params: &MuscleParams, r_bar: f64) -> f64 {
    params.f_max / (1.0 + (-r_bar).exp())
}

pub fn linearize(params: &MuscleParams, op: &OperatingPoint) -> ContinuousLinearization {
    let e = (-op.r_bar).exp();
    let b_c = if e.is_infinite() {
        // r̄ → -∞: the slope e/(1+e)² tends to zero as well.
        0.0
    } else {
        params.f_max * e / (params.tau * (1.0 + e).powi(2))
    };
    ContinuousLinearization {
        a_c: -1.0 / params.tau,
        b_c,
    }
}

/// Exact zero-order hold of a scalar system.
pub fn discretize(lin: ContinuousLinearization, ts: f64) -> Result<DiscretePlant> {
    if !(ts > 0.0 && ts.is_finite()) {
        return Err(invalid("ts", format!("sampling time must be positive, got {ts}")));
    }
    let a = (lin.a_c * ts).exp();
    // (e^{a_c ts} - 1)/a_c, with the a_c → 0 limit ts.
    let gain = if lin.a_c == 0.0 {
        ts
    } else {
        (lin.a_c * ts).exp_m1() / lin.a_c
    };
    Ok(DiscretePlant {
        a,
        b: gain * lin.b_c,
        ts,
    })
}

impl DiscretePlant {
    /// Builds the plant straight from muscle parameters.
    pub fn from_muscle(params: &MuscleParams, r_bar: f64, ts: f64) -> Result<Self> {
        let op = OperatingPoint::at_rate(params, r_bar)?;
        discretize(linearize(params, &op), ts)
    }
}

/// Open-loop force deviation for `steps` samples `δf(0..steps)`, starting at
/// equilibrium. Missing input samples are treated as zero.
pub fn open_loop_sim(plant: &DiscretePlant, input: &[f64], steps: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(steps);
    let mut force = 0.0;
    for t in 0..steps {
        out.push(force);
        let r = input.get(t).copied().unwrap_or(0.0);
        force = plant.a * force + plant.b * r;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_plant() -> DiscretePlant {
        DiscretePlant::from_muscle(&MuscleParams::default(), 1.0, 0.01).unwrap()
    }

    #[test]
    fn equilibrium_force_values() {
        let p = MuscleParams::default();
        assert!((equilibrium_force(&p, 1.0) - 43.9).abs() < 0.05);
        assert_eq!(equilibrium_force(&p, 0.0), 30.0);
        assert!(equilibrium_force(&p, -800.0).abs() < 1e-300);
    }

    #[test]
    fn linearization_closed_forms() {
        let p = MuscleParams::default();
        let op = OperatingPoint::at_rate(&p, 1.0).unwrap();
        let lin = linearize(&p, &op);
        assert_eq!(lin.a_c, -50.0);
        // 60·e^{-1} / (0.02·(1+e^{-1})²) evaluated by hand: 589.8358
        assert!((lin.b_c - 589.8358).abs() < 1e-3);

        let mid = linearize(&p, &OperatingPoint::at_rate(&p, 0.0).unwrap());
        assert!((mid.b_c - 750.0).abs() < 1e-9);

        let sat = linearize(&p, &OperatingPoint::at_rate(&p, 800.0).unwrap());
        assert!(sat.b_c.abs() < 1e-300);
        let off = linearize(&p, &OperatingPoint::at_rate(&p, -800.0).unwrap());
        assert_eq!(off.b_c, 0.0);
    }

    #[test]
    fn discretization_values() {
        let plant = default_plant();
        assert!((plant.a - 0.61).abs() < 0.01);
        assert!((plant.b - 4.64).abs() < 0.01);

        let lin = ContinuousLinearization {
            a_c: -50.0,
            b_c: 589.8358,
        };
        let coarse = discretize(lin, 0.02).unwrap();
        assert!((coarse.a - (-1.0f64).exp()).abs() < 1e-15);

        let zero = discretize(ContinuousLinearization { a_c: -50.0, b_c: 0.0 }, 0.01).unwrap();
        assert_eq!(zero.b, 0.0);
        assert!(discretize(lin, 0.0).is_err());
    }

    #[test]
    fn small_step_recovers_continuous_pole() {
        let lin = ContinuousLinearization {
            a_c: -50.0,
            b_c: 589.8358,
        };
        let ts = 1e-5;
        let plant = discretize(lin, ts).unwrap();
        let approx = (plant.a - 1.0) / ts;
        assert!(((approx - lin.a_c) / lin.a_c).abs() < 1e-3);
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(MuscleParams::new(0.0, 0.02).is_err());
        assert!(MuscleParams::new(60.0, -1.0).is_err());
        assert!(MuscleParams::new(60.0, 0.02).is_ok());
    }

    #[test]
    fn open_loop_impulse_and_zero() {
        let plant = DiscretePlant {
            a: 0.61,
            b: 4.64,
            ts: 0.01,
        };
        let out = open_loop_sim(&plant, &[1.0], 3);
        assert_eq!(out[0], 0.0);
        assert!((out[1] - 4.64).abs() < 1e-12);
        assert!((out[2] - 2.8304).abs() < 1e-12);
        assert!(open_loop_sim(&plant, &[0.0; 10], 20).iter().all(|&f| f == 0.0));
    }

    #[test]
    fn open_loop_step_matches_geometric_sum() {
        let plant = default_plant();
        let c = 0.3;
        let input = vec![c; 400];
        let out = open_loop_sim(&plant, &input, 400);
        for (t, &f) in out.iter().enumerate() {
            let closed = plant.b * c * (1.0 - plant.a.powi(t as i32)) / (1.0 - plant.a);
            assert!((f - closed).abs() < 1e-12, "t={t}");
        }
        let fixed = plant.b * c / (1.0 - plant.a);
        assert!((out[399] - fixed).abs() < 1e-12);
    }
}
