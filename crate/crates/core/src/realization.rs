//! State-space realizations `x(t+1) = F x + H u`, `y = M x + N u` of scalar
//! controllers, the canonical forms of a biproper second-order stage, and
//! similarity transforms between them.

use nalgebra::{DMatrix, DVector, RowDVector};
use rand::Rng;

use crate::delayed_lqr::OptimalGains;
use crate::error::{invalid, Error, Result};
use crate::transfer_fn::RationalTransferFunction;

/// Singular-value threshold of the controllability/observability rank tests.
pub const RANK_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub f: DMatrix<f64>,
    pub h: DVector<f64>,
    pub m: RowDVector<f64>,
    pub n_ff: f64,
    /// Display names of the states, e.g. `x1`, `x2`.
    pub labels: Vec<String>,
}

fn default_labels(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("x{i}")).collect()
}

impl Realization {
    pub fn new(f: DMatrix<f64>, h: DVector<f64>, m: RowDVector<f64>, n_ff: f64) -> Result<Self> {
        let n = f.nrows();
        Self::with_labels(f, h, m, n_ff, default_labels(n))
    }

    pub fn with_labels(
        f: DMatrix<f64>,
        h: DVector<f64>,
        m: RowDVector<f64>,
        n_ff: f64,
        labels: Vec<String>,
    ) -> Result<Self> {
        let n = f.nrows();
        if f.ncols() != n || h.len() != n || m.len() != n || labels.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "F is {}x{}, H has {}, M has {}, {} labels",
                f.nrows(),
                f.ncols(),
                h.len(),
                m.len(),
                labels.len()
            )));
        }
        Ok(Self {
            f,
            h,
            m,
            n_ff,
            labels,
        })
    }

    pub fn order(&self) -> usize {
        self.f.nrows()
    }

    /// Runs the realization from a zero state and returns `(y, states)`,
    /// where `states[t]` is `x(t)`.
    pub fn simulate(&self, input: &[f64]) -> (Vec<f64>, Vec<DVector<f64>>) {
        let mut x = DVector::zeros(self.order());
        let mut ys = Vec::with_capacity(input.len());
        let mut xs = Vec::with_capacity(input.len());
        for &u in input {
            ys.push((&self.m * &x)[(0, 0)] + self.n_ff * u);
            xs.push(x.clone());
            x = &self.f * &x + &self.h * u;
        }
        (ys, xs)
    }

    pub fn impulse_response(&self, n: usize) -> Vec<f64> {
        let mut input = vec![0.0; n];
        if n > 0 {
            input[0] = 1.0;
        }
        self.simulate(&input).0
    }

    /// Relabels states, keeping the matrices.
    pub fn relabeled(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.order() {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for {} states",
                labels.len(),
                self.order()
            )));
        }
        self.labels = labels;
        Ok(self)
    }
}

/// `x(t+1) = ε x(t) + c u(t)`, `y = x`.
pub fn first_order_stage(c: f64, eps: f64) -> Result<Realization> {
    if c == 0.0 {
        return Err(invalid("c", "stage gain must be nonzero"));
    }
    Realization::with_labels(
        DMatrix::from_element(1, 1, eps),
        DVector::from_element(1, c),
        RowDVector::from_element(1, 1.0),
        0.0,
        vec!["x".into()],
    )
}

/// The delayed-LQR controller of the gain recursion, states `[γ…, δr]`,
/// input `δf`, output `δr`.
pub fn from_delayed_gains(g: &OptimalGains) -> Result<Realization> {
    let k = g.as_slice();
    let t = g.delay();
    let mut f = DMatrix::zeros(t, t);
    for j in 0..t {
        f[(0, j)] = k[j + 1];
    }
    for i in 1..t {
        f[(i, i - 1)] = 1.0;
    }
    let mut h = DVector::zeros(t);
    h[0] = k[0];
    let mut m = RowDVector::zeros(t);
    m[t - 1] = 1.0;
    let mut labels: Vec<String> = (1..t).rev().map(|i| format!("gamma{i}")).collect();
    if t == 2 {
        labels = vec!["gamma".into()];
    }
    labels.push("delta_r".into());
    Realization::with_labels(f, h, m, 0.0, labels)
}

/// Biproper second-order data `N·(z² + β₁z + β₂)/(z² − K₁z − K₂)`, split as
/// `N + (m₂ z + m₁)/(z² − K₁z − K₂)`.
struct BiproperSecondOrder {
    n: f64,
    k1: f64,
    k2: f64,
    m1: f64,
    m2: f64,
}

fn biproper_second_order(g2: &RationalTransferFunction) -> Result<BiproperSecondOrder> {
    if g2.den_degree() != 2 || g2.num_degree() != 2 || g2.is_zero() {
        return Err(Error::WrongForm {
            expected: "a biproper second-order transfer function",
            num: g2.num_degree(),
            den: g2.den_degree(),
        });
    }
    let (num, den) = (g2.num(), g2.den());
    let n = num[0];
    let k1 = -den[1];
    let k2 = -den[2];
    // num − N·den = (b1 − N a1) z + (b2 − N a2)
    Ok(BiproperSecondOrder {
        n,
        k1,
        k2,
        m1: num[2] - n * den[2],
        m2: num[1] - n * den[1],
    })
}

/// `F = [[0, 1], [K₂, K₁]]`, `H = [0; 1]`.
pub fn controllable_canonical(g2: &RationalTransferFunction) -> Result<Realization> {
    let s = biproper_second_order(g2)?;
    Realization::new(
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, s.k2, s.k1]),
        DVector::from_vec(vec![0.0, 1.0]),
        RowDVector::from_vec(vec![s.m1, s.m2]),
        s.n,
    )
}

/// `F = [[0, K₂], [1, K₁]]`, `M = [0, 1]`.
pub fn observable_canonical(g2: &RationalTransferFunction) -> Result<Realization> {
    let s = biproper_second_order(g2)?;
    Realization::new(
        DMatrix::from_row_slice(2, 2, &[0.0, s.k2, 1.0, s.k1]),
        DVector::from_vec(vec![s.m1, s.m2]),
        RowDVector::from_vec(vec![0.0, 1.0]),
        s.n,
    )
}

pub const SINGULAR_DET: f64 = 1e-9;

/// `(P⁻¹FP, P⁻¹H, MP, N)`; labels are kept.
pub fn similarity_transform(r: &Realization, p: &DMatrix<f64>) -> Result<Realization> {
    let n = r.order();
    if p.nrows() != n || p.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "transform is {}x{}, realization has {n} states",
            p.nrows(),
            p.ncols()
        )));
    }
    let det = p.determinant();
    if !det.is_finite() || det.abs() <= SINGULAR_DET {
        return Err(Error::SingularTransform { det });
    }
    let p_inv = p.clone().try_inverse().ok_or(Error::SingularTransform { det })?;
    Realization::with_labels(
        &p_inv * &r.f * p,
        &p_inv * &r.h,
        &r.m * p,
        r.n_ff,
        r.labels.clone(),
    )
}

/// Entries with magnitude at or below this are treated as structural zeros.
pub const STRUCTURAL_ZERO: f64 = 1e-12;

/// Dense realization of `G₂`: the controllable form transformed by `p`.
/// Fails if any entry of `F`, `H` or `M` comes out zero.
pub fn general_realization(g2: &RationalTransferFunction, p: &DMatrix<f64>) -> Result<Realization> {
    let r = similarity_transform(&controllable_canonical(g2)?, p)?;
    let n = r.order();
    for i in 0..n {
        for j in 0..n {
            if r.f[(i, j)].abs() <= STRUCTURAL_ZERO {
                return Err(Error::StructuralZero {
                    entry: format!("F[{}][{}]", i + 1, j + 1),
                });
            }
        }
        if r.h[i].abs() <= STRUCTURAL_ZERO {
            return Err(Error::StructuralZero {
                entry: format!("H[{}]", i + 1),
            });
        }
        if r.m[i].abs() <= STRUCTURAL_ZERO {
            return Err(Error::StructuralZero {
                entry: format!("M[{}]", i + 1),
            });
        }
    }
    Ok(r)
}

/// 2-norm condition number.
pub fn condition_number(p: &DMatrix<f64>) -> f64 {
    let sv = p.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub const MAX_TRANSFORM_CONDITION: f64 = 50.0;

/// Draws a dense `n×n` transform with entries in `[-2, 2]`, bounded away
/// from zero, and condition number below [`MAX_TRANSFORM_CONDITION`].
pub fn random_transform<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DMatrix<f64> {
    loop {
        let p = DMatrix::from_fn(n, n, |_, _| {
            let mag = rng.gen_range(0.2..2.0);
            if rng.gen_bool(0.5) {
                mag
            } else {
                -mag
            }
        });
        if condition_number(&p) < MAX_TRANSFORM_CONDITION {
            return p;
        }
    }
}

/// Dense realization from a seeded stream of transforms, retrying on
/// structural zeros. Returns the transform used as well.
pub fn random_general_realization<R: Rng + ?Sized>(
    g2: &RationalTransferFunction,
    rng: &mut R,
) -> Result<(Realization, DMatrix<f64>)> {
    let mut last_err = None;
    for _ in 0..64 {
        let p = random_transform(rng, 2);
        match general_realization(g2, &p) {
            Ok(r) => return Ok((r, p)),
            Err(e @ Error::StructuralZero { .. }) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last_err.expect("loop ran at least once"))
}

/// Characteristic polynomial and the adjugate coefficient matrices of
/// `zI − F` (Faddeev–LeVerrier): `adj(zI−F) = Σ_k N_k z^{n−1−k}`.
fn faddeev_leverrier(f: &DMatrix<f64>) -> (Vec<f64>, Vec<DMatrix<f64>>) {
    let n = f.nrows();
    let mut coeffs = vec![1.0];
    let mut adj = Vec::with_capacity(n);
    let mut nk = DMatrix::identity(n, n);
    for k in 1..=n {
        let fn_k = f * &nk;
        let c = -fn_k.trace() / k as f64;
        coeffs.push(c);
        adj.push(nk);
        nk = fn_k + DMatrix::identity(n, n) * c;
    }
    (coeffs, adj)
}

/// `M(zI − F)⁻¹H + N`, with denominator `det(zI − F)`. No cancellation.
pub fn tf_of(r: &Realization) -> RationalTransferFunction {
    let n = r.order();
    let (den, adj) = faddeev_leverrier(&r.f);
    let mut num: Vec<f64> = den.iter().map(|c| c * r.n_ff).collect();
    for (k, nk) in adj.iter().enumerate() {
        num[k + 1] += (&r.m * nk * &r.h)[(0, 0)];
    }
    debug_assert_eq!(num.len(), n + 1);
    RationalTransferFunction::new(&num, &den).expect("realization transfer function is proper")
}

fn numerical_rank(m: &DMatrix<f64>) -> usize {
    let sv = m.clone().singular_values();
    let scale = sv.max().max(1.0);
    sv.iter().filter(|&&s| s > RANK_TOL * scale).count()
}

pub fn controllability_matrix(r: &Realization) -> DMatrix<f64> {
    let n = r.order();
    let mut c = DMatrix::zeros(n, n);
    let mut col = r.h.clone();
    for j in 0..n {
        c.set_column(j, &col);
        col = &r.f * col;
    }
    c
}

pub fn observability_matrix(r: &Realization) -> DMatrix<f64> {
    let n = r.order();
    let mut o = DMatrix::zeros(n, n);
    let mut row = r.m.clone();
    for i in 0..n {
        o.set_row(i, &row);
        row *= &r.f;
    }
    o
}

/// Minimal iff controllable and observable.
pub fn is_minimal(r: &Realization) -> bool {
    let n = r.order();
    numerical_rank(&controllability_matrix(r)) == n && numerical_rank(&observability_matrix(r)) == n
}

/// Cascade `r_1 → r_2 → …`; state labels are prefixed with `prefixes[i]`.
pub fn series_realization(stages: &[(&str, &Realization)]) -> Result<Realization> {
    let Some(((first_name, first), rest)) = stages.split_first() else {
        return Err(invalid("stages", "cascade needs at least one stage"));
    };
    let prefix = |name: &str, labels: &[String]| -> Vec<String> {
        labels.iter().map(|l| format!("{name}.{l}")).collect()
    };
    let mut acc = Realization::with_labels(
        first.f.clone(),
        first.h.clone(),
        first.m.clone(),
        first.n_ff,
        prefix(first_name, &first.labels),
    )?;
    for (name, next) in rest {
        let (n1, n2) = (acc.order(), next.order());
        let n = n1 + n2;
        let mut f = DMatrix::zeros(n, n);
        f.view_mut((0, 0), (n1, n1)).copy_from(&acc.f);
        f.view_mut((n1, n1), (n2, n2)).copy_from(&next.f);
        f.view_mut((n1, 0), (n2, n1)).copy_from(&(&next.h * &acc.m));
        let mut h = DVector::zeros(n);
        h.rows_mut(0, n1).copy_from(&acc.h);
        h.rows_mut(n1, n2).copy_from(&(&next.h * acc.n_ff));
        let mut m = RowDVector::zeros(n);
        m.columns_mut(0, n1).copy_from(&(&acc.m * next.n_ff));
        m.columns_mut(n1, n2).copy_from(&next.m);
        let mut labels = acc.labels.clone();
        labels.extend(prefix(name, &next.labels));
        acc = Realization::with_labels(f, h, m, acc.n_ff * next.n_ff, labels)?;
    }
    Ok(acc)
}
