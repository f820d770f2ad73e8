//! LQ-optimal controller for the plant with a net sensorimotor delay of `T`
//! steps, obtained by augmenting the state with the in-flight actuation
//! commands and solving an ordinary discrete-time Riccati equation.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::muscle_plant::DiscretePlant;
use crate::transfer_fn::RationalTransferFunction;

pub const RICCATI_TOL: f64 = 1e-12;
pub const RICCATI_MAX_ITER: usize = 10_000;
const PIVOT_FLOOR: f64 = 1e-300;

/// `χ(t+1) = Ã·χ(t) + B̃·μ(t)` with `χ = [δf; γ_{T−1}; …; γ_1; δr]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedSystem {
    pub a_tilde: DMatrix<f64>,
    pub b_tilde: DVector<f64>,
    pub delay: usize,
}

/// State and input penalties of the original (unaugmented) problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LqrWeights {
    pub q: f64,
    pub r: f64,
}

impl LqrWeights {
    /// `q = 0` is accepted and yields the trivial zero controller.
    pub fn new(q: f64, r: f64) -> Result<Self> {
        if !(q >= 0.0 && q.is_finite()) {
            return Err(invalid("q", format!("state penalty must be non-negative, got {q}")));
        }
        if !(r > 0.0 && r.is_finite()) {
            return Err(invalid("r", format!("input penalty must be positive, got {r}")));
        }
        Ok(Self { q, r })
    }
}

impl Default for LqrWeights {
    fn default() -> Self {
        Self { q: 1.0, r: 0.01 }
    }
}

/// Gains of `μ(t) = K₀δf(t) + K₁γ_{T−1}(t) + … + K_T·δr(t)`.
///
/// For `T = 2` these are `(K₀, K₁, K₂)` acting on `(δf, γ, δr)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimalGains {
    k: Vec<f64>,
}

impl OptimalGains {
    pub fn from_vec(k: Vec<f64>) -> Result<Self> {
        if k.len() < 2 {
            return Err(invalid("gains", "need at least K0 and one delayed-state gain"));
        }
        Ok(Self { k })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.k
    }

    pub fn delay(&self) -> usize {
        self.k.len() - 1
    }

    pub fn k0(&self) -> f64 {
        self.k[0]
    }

    pub fn k1(&self) -> f64 {
        self.k[1]
    }

    /// Gain on `δr` when `T = 2`; zero for `T = 1`.
    pub fn k2(&self) -> f64 {
        self.k.get(2).copied().unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.k.iter().all(|&k| k == 0.0)
    }

    pub fn row(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(1, self.k.len(), &self.k)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LqrSolution {
    pub gains: OptimalGains,
    /// Cost-to-go matrix `P` of the augmented problem.
    pub cost_to_go: DMatrix<f64>,
    pub iterations: usize,
}

pub fn augment(plant: &DiscretePlant, delay: usize) -> Result<AugmentedSystem> {
    if delay == 0 {
        return Err(Error::ZeroDelay);
    }
    let n = delay + 1;
    let mut a = DMatrix::zeros(n, n);
    a[(0, 0)] = plant.a;
    a[(0, delay)] = plant.b;
    for i in 1..delay {
        a[(i + 1, i)] = 1.0;
    }
    let mut b = DVector::zeros(n);
    b[1] = 1.0;
    Ok(AugmentedSystem {
        a_tilde: a,
        b_tilde: b,
        delay,
    })
}

/// `diag(q, 0, …, 0, r)`; the augmented problem itself has no input penalty.
pub fn augment_cost(w: &LqrWeights, delay: usize) -> DMatrix<f64> {
    let n = delay + 1;
    let mut q = DMatrix::zeros(n, n);
    q[(0, 0)] = w.q;
    q[(delay, delay)] += w.r;
    q
}

impl AugmentedSystem {
    pub fn closed_loop(&self, gains: &OptimalGains) -> DMatrix<f64> {
        &self.a_tilde + &self.b_tilde * gains.row()
    }
}

/// Largest eigenvalue modulus.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// One Riccati step with zero input penalty. Returns the gain row and the
/// updated cost-to-go.
fn riccati_step(
    sys: &AugmentedSystem,
    q_tilde: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let a = &sys.a_tilde;
    let n = a.nrows();
    let b = &DMatrix::from_column_slice(n, 1, sys.b_tilde.as_slice());
    let pivot = (b.transpose() * p * b)[(0, 0)];
    let bpa = b.transpose() * p * a;
    let k = if pivot > PIVOT_FLOOR {
        -bpa / pivot
    } else if pivot >= 0.0 && bpa.amax() <= PIVOT_FLOOR {
        // μ does not reach any penalized state yet.
        DMatrix::zeros(1, n)
    } else {
        return Err(Error::SingularPivot { pivot });
    };
    let next = q_tilde + a.transpose() * p * a + a.transpose() * p * b * &k;
    // Symmetrize to keep rounding from accumulating.
    let next = (&next + next.transpose()) * 0.5;
    Ok((k, next))
}

/// Fixed-point iteration of the Riccati recursion starting from `P = Q̃`.
pub fn solve_delayed_lqr(sys: &AugmentedSystem, q_tilde: &DMatrix<f64>) -> Result<LqrSolution> {
    let n = sys.a_tilde.nrows();
    if q_tilde.nrows() != n || q_tilde.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "cost matrix is {}x{}, system has {n} states",
            q_tilde.nrows(),
            q_tilde.ncols()
        )));
    }
    let mut p = q_tilde.clone();
    let mut last_change = f64::INFINITY;
    for iter in 1..=RICCATI_MAX_ITER {
        let (_, next) = riccati_step(sys, q_tilde, &p)?;
        last_change = (&next - &p).amax();
        p = next;
        if last_change < RICCATI_TOL {
            let (k, _) = riccati_step(sys, q_tilde, &p)?;
            return Ok(LqrSolution {
                gains: OptimalGains {
                    k: k.iter().copied().collect(),
                },
                cost_to_go: p,
                iterations: iter,
            });
        }
    }
    Err(Error::NotConverged {
        iterations: RICCATI_MAX_ITER,
        last_change,
    })
}

/// Plant-to-LQR convenience: augment, weight and solve.
pub fn synthesize(plant: &DiscretePlant, delay: usize, w: &LqrWeights) -> Result<(AugmentedSystem, LqrSolution)> {
    let sys = augment(plant, delay)?;
    let sol = solve_delayed_lqr(&sys, &augment_cost(w, delay))?;
    Ok((sys, sol))
}

/// `K₀ / (z^T − K₁z^{T−1} − … − K_T)`; for `T = 2` this is
/// `K₀ / (z² − K₁z − K₂)`.
pub fn gains_to_tf(g: &OptimalGains) -> Result<RationalTransferFunction> {
    if g.k0() == 0.0 {
        return Err(Error::DegenerateController);
    }
    let mut den = Vec::with_capacity(g.k.len());
    den.push(1.0);
    den.extend(g.k[1..].iter().map(|k| -k));
    RationalTransferFunction::new(&[g.k0()], &den)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_plant() -> DiscretePlant {
        DiscretePlant {
            a: 0.61,
            b: 4.64,
            ts: 0.01,
        }
    }

    #[test]
    fn augmented_matrices() {
        let sys = augment(&default_plant(), 2).unwrap();
        let expected = DMatrix::from_row_slice(3, 3, &[0.61, 0.0, 4.64, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        assert_eq!(sys.a_tilde, expected);
        assert_eq!(sys.b_tilde.as_slice(), &[0.0, 1.0, 0.0]);

        let mut eig: Vec<f64> = sys.a_tilde.clone().complex_eigenvalues().iter().map(|z| z.re).collect();
        eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!(eig[0].abs() < 1e-12 && eig[1].abs() < 1e-12);
        assert!((eig[2] - 0.61).abs() < 1e-12);

        let one = augment(&default_plant(), 1).unwrap();
        assert_eq!(one.a_tilde, DMatrix::from_row_slice(2, 2, &[0.61, 4.64, 0.0, 0.0]));
        assert_eq!(one.b_tilde.as_slice(), &[0.0, 1.0]);

        assert_eq!(augment(&default_plant(), 0), Err(Error::ZeroDelay));
    }

    #[test]
    fn longer_delay_cascade() {
        let sys = augment(&default_plant(), 4).unwrap();
        // δf, γ3, γ2, γ1, δr: μ → γ3 → γ2 → γ1 → δr
        assert_eq!(sys.a_tilde[(2, 1)], 1.0);
        assert_eq!(sys.a_tilde[(3, 2)], 1.0);
        assert_eq!(sys.a_tilde[(4, 3)], 1.0);
        assert_eq!(sys.a_tilde[(0, 4)], 4.64);
        assert_eq!(sys.b_tilde[1], 1.0);
    }

    #[test]
    fn augmented_cost_layout() {
        let q = augment_cost(&LqrWeights { q: 1.0, r: 0.01 }, 2);
        assert_eq!(q, DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0, 0.01])));
        let q3 = augment_cost(&LqrWeights { q: 1.0, r: 1.0 }, 3);
        assert_eq!(q3, DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0, 0.0, 1.0])));
        for (qq, rr, t) in [(2.0, 0.5, 1), (0.3, 7.0, 5)] {
            assert!((augment_cost(&LqrWeights { q: qq, r: rr }, t).trace() - (qq + rr)).abs() < 1e-15);
        }
    }

    #[test]
    fn weights_validation() {
        assert!(LqrWeights::new(1.0, 0.0).is_err());
        assert!(LqrWeights::new(-1.0, 1.0).is_err());
        assert!(LqrWeights::new(0.0, 1.0).is_ok());
    }

    #[test]
    fn zero_state_penalty_gives_zero_controller() {
        let w = LqrWeights::new(0.0, 0.01).unwrap();
        let (sys, sol) = synthesize(&default_plant(), 2, &w).unwrap();
        assert!(sol.gains.is_zero());
        assert_eq!(sys.closed_loop(&sol.gains), sys.a_tilde);
        // Only the in-flight commands are ever penalized.
        let p = &sol.cost_to_go;
        assert_eq!(p[(0, 0)], 0.0);
        assert!((p[(1, 1)] - 0.01).abs() < 1e-15 && (p[(2, 2)] - 0.01).abs() < 1e-15);
        assert_eq!(gains_to_tf(&sol.gains), Err(Error::DegenerateController));
    }

    #[test]
    fn default_solution_is_stabilizing() {
        let (sys, sol) = synthesize(&default_plant(), 2, &LqrWeights::default()).unwrap();
        assert!(spectral_radius(&sys.closed_loop(&sol.gains)) < 1.0);
        assert!(sol.iterations < 100);
    }

    #[test]
    fn dimension_mismatch() {
        let sys = augment(&default_plant(), 2).unwrap();
        assert!(matches!(
            solve_delayed_lqr(&sys, &DMatrix::identity(2, 2)),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn transfer_function_shape() {
        let g = OptimalGains::from_vec(vec![-0.05, -0.6, -0.37]).unwrap();
        let tf = gains_to_tf(&g).unwrap();
        assert_eq!(tf.num(), &[-0.05]);
        assert_eq!(tf.den(), &[1.0, 0.6, 0.37]);
        assert_eq!(tf.relative_degree(), Ok(2));
        let h = tf.impulse_response(3);
        assert_eq!(h, vec![0.0, 0.0, -0.05]);
    }
}
