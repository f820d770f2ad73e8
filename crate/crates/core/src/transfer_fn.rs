//! Scalar rational transfer functions in `z`.
//!
//! Coefficients are stored in descending powers of `z` and the denominator is
//! kept monic. Products never cancel common poles and zeros; whether a
//! cascade is minimal is a question for [`crate::realization`].

use std::fmt;

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RationalTransferFunction {
    num: Vec<f64>,
    den: Vec<f64>,
}

fn trim_leading_zeros(coeffs: &[f64]) -> &[f64] {
    let first = coeffs.iter().position(|&c| c != 0.0).unwrap_or(coeffs.len());
    &coeffs[first..]
}

fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Quotient of `p / d` when the remainder is below `tol` in max-abs.
fn poly_div_exact(p: &[f64], d: &[f64], tol: f64) -> Option<Vec<f64>> {
    if p.len() < d.len() {
        return p.iter().all(|c| c.abs() <= tol).then(|| vec![0.0]);
    }
    let mut rem = p.to_vec();
    let mut quot = vec![0.0; p.len() - d.len() + 1];
    for i in 0..quot.len() {
        let q = rem[i] / d[0];
        quot[i] = q;
        for (j, &dj) in d.iter().enumerate() {
            rem[i + j] -= q * dj;
        }
    }
    rem[quot.len()..].iter().all(|c| c.abs() <= tol).then_some(quot)
}

impl RationalTransferFunction {
    /// Builds `num/den`, trimming leading zeros and normalizing the
    /// denominator to be monic. An all-zero numerator is the zero function.
    pub fn new(num: &[f64], den: &[f64]) -> Result<Self> {
        if num.iter().chain(den).any(|c| !c.is_finite()) {
            return Err(invalid("coefficients", "must be finite"));
        }
        let den = trim_leading_zeros(den);
        if den.is_empty() {
            return Err(Error::ZeroDenominator);
        }
        let num = trim_leading_zeros(num);
        let lead = den[0];
        let den: Vec<f64> = den.iter().map(|c| c / lead).collect();
        let num: Vec<f64> = if num.is_empty() {
            vec![0.0]
        } else {
            num.iter().map(|c| c / lead).collect()
        };
        if num.len() > den.len() {
            return Err(Error::Improper {
                num: num.len() - 1,
                den: den.len() - 1,
            });
        }
        Ok(Self { num, den })
    }

    /// The constant `k`.
    pub fn constant(k: f64) -> Self {
        Self {
            num: vec![k],
            den: vec![1.0],
        }
    }

    pub fn num(&self) -> &[f64] {
        &self.num
    }

    pub fn den(&self) -> &[f64] {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.iter().all(|&c| c == 0.0)
    }

    pub fn num_degree(&self) -> usize {
        self.num.len() - 1
    }

    pub fn den_degree(&self) -> usize {
        self.den.len() - 1
    }

    pub fn relative_degree(&self) -> Result<usize> {
        if self.is_zero() {
            return Err(Error::ZeroFunction);
        }
        Ok(self.den_degree() - self.num_degree())
    }

    /// Value as `z → ∞` (the direct feedthrough).
    pub fn feedthrough(&self) -> f64 {
        if self.num.len() == self.den.len() {
            self.num[0]
        } else {
            0.0
        }
    }

    pub fn multiply(&self, other: &Self) -> Self {
        // Both factors are already proper with monic denominators.
        Self::new(&convolve(&self.num, &other.num), &convolve(&self.den, &other.den))
            .expect("product of proper functions is proper")
    }

    /// First `n` samples of the inverse Z-transform.
    pub fn impulse_response(&self, n: usize) -> Vec<f64> {
        let order = self.den_degree();
        // Numerator padded to the denominator length, so that
        // G = (b0 + b1 z^-1 + ...)/(1 + a1 z^-1 + ...).
        let mut b = vec![0.0; order + 1 - self.num.len()];
        b.extend_from_slice(&self.num);
        let mut h = Vec::with_capacity(n);
        for k in 0..n {
            let mut value = b.get(k).copied().unwrap_or(0.0);
            for i in 1..=order.min(k) {
                value -= self.den[i] * h[k - i];
            }
            h.push(value);
        }
        h
    }

    /// Divides numerator and denominator by a shared polynomial factor.
    /// Fails unless both divisions leave a remainder below `tol`.
    pub fn cancel_factor(&self, factor: &[f64], tol: f64) -> Result<Self> {
        let factor = trim_leading_zeros(factor);
        if factor.is_empty() {
            return Err(invalid("factor", "must be a nonzero polynomial"));
        }
        let num = poly_div_exact(&self.num, factor, tol)
            .ok_or_else(|| invalid("factor", "does not divide the numerator"))?;
        let den = poly_div_exact(&self.den, factor, tol)
            .ok_or_else(|| invalid("factor", "does not divide the denominator"))?;
        Self::new(&num, &den)
    }

    /// Largest coefficient-wise difference after padding both to a common
    /// length; `None` if the denominator degrees differ.
    pub fn max_coeff_diff(&self, other: &Self) -> Option<f64> {
        if self.den.len() != other.den.len() {
            return None;
        }
        let pad = |v: &[f64]| {
            let mut out = vec![0.0; self.den.len() - v.len()];
            out.extend_from_slice(v);
            out
        };
        let (a, b) = (pad(&self.num), pad(&other.num));
        let num_diff = a.iter().zip(&b).map(|(x, y)| (x - y).abs());
        let den_diff = self.den.iter().zip(&other.den).map(|(x, y)| (x - y).abs());
        Some(num_diff.chain(den_diff).fold(0.0, f64::max))
    }
}

impl fmt::Display for RationalTransferFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn poly(coeffs: &[f64]) -> String {
            let deg = coeffs.len() - 1;
            let terms: Vec<String> = coeffs
                .iter()
                .enumerate()
                .filter(|(_, &c)| c != 0.0)
                .map(|(i, c)| match deg - i {
                    0 => format!("{c}"),
                    1 => format!("{c}*z"),
                    p => format!("{c}*z^{p}"),
                })
                .collect();
            if terms.is_empty() {
                "0".into()
            } else {
                terms.join(" + ")
            }
        }
        write!(f, "({}) / ({})", poly(&self.num), poly(&self.den))
    }
}

/// Gains and poles of the two first-order relay stages that bracket `G₂`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecompositionParams {
    pub c1: f64,
    pub c3: f64,
    pub eps1: f64,
    pub eps3: f64,
}

impl Default for DecompositionParams {
    fn default() -> Self {
        Self {
            c1: 1.0,
            c3: 1.0,
            eps1: 0.0,
            eps3: 0.0,
        }
    }
}

impl DecompositionParams {
    pub fn new(c1: f64, c3: f64, eps1: f64, eps3: f64) -> Result<Self> {
        let p = Self { c1, c3, eps1, eps3 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.c1 == 0.0 || !self.c1.is_finite() {
            return Err(invalid("c1", "relay gain must be nonzero"));
        }
        if self.c3 == 0.0 || !self.c3.is_finite() {
            return Err(invalid("c3", "relay gain must be nonzero"));
        }
        for (name, eps) in [("eps1", self.eps1), ("eps3", self.eps3)] {
            if !eps.is_finite() || eps.abs() >= 1.0 {
                return Err(invalid(name, format!("relay pole must lie inside the unit circle, got {eps}")));
            }
        }
        Ok(())
    }
}

/// Coefficients `(K₀, K₁, K₂)` of `K₀ / (z² − K₁z − K₂)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondOrderDelayForm {
    pub k0: f64,
    pub k1: f64,
    pub k2: f64,
}

impl SecondOrderDelayForm {
    pub fn from_tf(g: &RationalTransferFunction) -> Result<Self> {
        if g.den_degree() != 2 || g.num_degree() != 0 || g.is_zero() {
            return Err(Error::WrongForm {
                expected: "K0/(z^2 - K1 z - K2)",
                num: g.num_degree(),
                den: g.den_degree(),
            });
        }
        Ok(Self {
            k0: g.num[0],
            k1: -g.den[1],
            k2: -g.den[2],
        })
    }
}

/// The three cascade factors `G = G₃·G₂·G₁`.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub g1: RationalTransferFunction,
    pub g2: RationalTransferFunction,
    pub g3: RationalTransferFunction,
    pub params: DecompositionParams,
}

impl Decomposition {
    pub fn product(&self) -> RationalTransferFunction {
        self.g3.multiply(&self.g2).multiply(&self.g1)
    }

    /// The cascade with the relay poles `(z−ε₁)(z−ε₃)` divided back out of
    /// the zeros of `G₂`.
    pub fn reduced_product(&self) -> Result<RationalTransferFunction> {
        let (e1, e3) = (self.params.eps1, self.params.eps3);
        self.product().cancel_factor(&[1.0, -(e1 + e3), e1 * e3], 1e-12)
    }
}

/// Splits a relative-degree-2 controller into two relative-degree-1 relay
/// stages around a biproper middle stage.
pub fn decompose(g: &RationalTransferFunction, p: DecompositionParams) -> Result<Decomposition> {
    if p.c1 * p.c3 == 0.0 {
        return Err(invalid("c1*c3", "relay gains must be nonzero"));
    }
    p.validate()?;
    let form = SecondOrderDelayForm::from_tf(g)?;
    let scale = form.k0 / (p.c1 * p.c3);
    let g1 = RationalTransferFunction::new(&[p.c1], &[1.0, -p.eps1])?;
    let g3 = RationalTransferFunction::new(&[p.c3], &[1.0, -p.eps3])?;
    let g2 = RationalTransferFunction::new(
        &[scale, -scale * (p.eps1 + p.eps3), scale * p.eps1 * p.eps3],
        &[1.0, -form.k1, -form.k2],
    )?;
    Ok(Decomposition {
        g1,
        g2,
        g3,
        params: p,
    })
}
