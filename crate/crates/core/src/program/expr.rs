use std::collections::BTreeMap;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

/// Index of a variable registered in a [`ConvexProgram`](super::ConvexProgram).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VarId(pub usize);

/// Affine expression `Σ cᵢ xᵢ + c₀` over program variables.
///
/// Terms are kept in insertion order and may repeat a variable; call
/// [`AffExpr::compact`] to merge duplicates and drop zeros.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AffExpr {
    pub terms: Vec<(VarId, f64)>,
    pub constant: f64,
}

impl AffExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(value: f64) -> Self {
        Self { terms: Vec::new(), constant: value }
    }

    pub fn var(id: VarId) -> Self {
        Self { terms: vec![(id, 1.0)], constant: 0.0 }
    }

    pub fn term(id: VarId, coef: f64) -> Self {
        Self { terms: vec![(id, coef)], constant: 0.0 }
    }

    /// True when the expression has no variable terms with nonzero coefficient.
    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|&(_, c)| c == 0.0)
    }

    pub fn add_term(&mut self, id: VarId, coef: f64) {
        if coef != 0.0 {
            self.terms.push((id, coef));
        }
    }

    /// `self += coef * other`.
    pub fn add_scaled(&mut self, other: &AffExpr, coef: f64) {
        if coef == 0.0 {
            return;
        }
        self.terms.extend(other.terms.iter().map(|&(v, c)| (v, c * coef)));
        self.constant += coef * other.constant;
    }

    pub fn scaled(&self, coef: f64) -> AffExpr {
        let mut out = AffExpr::zero();
        out.add_scaled(self, coef);
        out
    }

    /// Merge repeated variables, drop zero coefficients, and sort by variable.
    pub fn compact(&mut self) {
        if self.terms.len() < 2 {
            self.terms.retain(|&(_, c)| c != 0.0);
            return;
        }
        let mut merged: BTreeMap<VarId, f64> = BTreeMap::new();
        for &(v, c) in &self.terms {
            *merged.entry(v).or_insert(0.0) += c;
        }
        self.terms = merged.into_iter().filter(|&(_, c)| c != 0.0).collect();
    }

    pub fn compacted(mut self) -> Self {
        self.compact();
        self
    }

    /// Evaluate at a primal point indexed by variable id.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().fold(self.constant, |acc, &(v, c)| acc + c * x[v.0])
    }

    pub fn max_var(&self) -> Option<VarId> {
        self.terms.iter().map(|&(v, _)| v).max()
    }
}

impl From<f64> for AffExpr {
    fn from(value: f64) -> Self {
        AffExpr::constant(value)
    }
}

impl From<VarId> for AffExpr {
    fn from(id: VarId) -> Self {
        AffExpr::var(id)
    }
}

impl AddAssign<&AffExpr> for AffExpr {
    fn add_assign(&mut self, rhs: &AffExpr) {
        self.add_scaled(rhs, 1.0);
    }
}

impl AddAssign<AffExpr> for AffExpr {
    fn add_assign(&mut self, rhs: AffExpr) {
        self.terms.extend(rhs.terms);
        self.constant += rhs.constant;
    }
}

impl SubAssign<&AffExpr> for AffExpr {
    fn sub_assign(&mut self, rhs: &AffExpr) {
        self.add_scaled(rhs, -1.0);
    }
}

impl AddAssign<f64> for AffExpr {
    fn add_assign(&mut self, rhs: f64) {
        self.constant += rhs;
    }
}

impl SubAssign<f64> for AffExpr {
    fn sub_assign(&mut self, rhs: f64) {
        self.constant -= rhs;
    }
}

impl Add for AffExpr {
    type Output = AffExpr;
    fn add(mut self, rhs: AffExpr) -> AffExpr {
        self += rhs;
        self
    }
}

impl Add<&AffExpr> for AffExpr {
    type Output = AffExpr;
    fn add(mut self, rhs: &AffExpr) -> AffExpr {
        self += rhs;
        self
    }
}

impl Sub for AffExpr {
    type Output = AffExpr;
    fn sub(mut self, rhs: AffExpr) -> AffExpr {
        self -= &rhs;
        self
    }
}

impl Sub<&AffExpr> for AffExpr {
    type Output = AffExpr;
    fn sub(mut self, rhs: &AffExpr) -> AffExpr {
        self -= rhs;
        self
    }
}

impl Add<f64> for AffExpr {
    type Output = AffExpr;
    fn add(mut self, rhs: f64) -> AffExpr {
        self.constant += rhs;
        self
    }
}

impl Sub<f64> for AffExpr {
    type Output = AffExpr;
    fn sub(mut self, rhs: f64) -> AffExpr {
        self.constant -= rhs;
        self
    }
}

impl Mul<f64> for AffExpr {
    type Output = AffExpr;
    fn mul(mut self, rhs: f64) -> AffExpr {
        for t in &mut self.terms {
            t.1 *= rhs;
        }
        self.constant *= rhs;
        self
    }
}

impl Neg for AffExpr {
    type Output = AffExpr;
    fn neg(self) -> AffExpr {
        self * -1.0
    }
}

/// Inner product of a numeric vector with a vector of expressions.
pub fn dot(coefs: &[f64], exprs: &[AffExpr]) -> AffExpr {
    let mut out = AffExpr::zero();
    for (c, e) in coefs.iter().zip(exprs) {
        out.add_scaled(e, *c);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compact_merges_and_drops_zeros() {
        let mut e = AffExpr::term(VarId(2), 1.0) + AffExpr::term(VarId(0), 3.0) + AffExpr::term(VarId(2), -1.0);
        e.compact();
        assert_eq!(e.terms, vec![(VarId(0), 3.0)]);
    }

    #[test]
    fn arithmetic_and_eval() {
        let x = VarId(0);
        let y = VarId(1);
        let e = (AffExpr::var(x) * 2.0 - AffExpr::var(y) + 1.5).compacted();
        assert_eq!(e.eval(&[1.0, 4.0]), 2.0 - 4.0 + 1.5);
        assert!(!e.is_constant());
        assert!(AffExpr::constant(3.0).is_constant());
        let d = dot(&[1.0, -2.0], &[AffExpr::var(x), AffExpr::var(y) + 1.0]);
        assert_eq!(d.eval(&[3.0, 5.0]), 3.0 - 12.0);
    }
}
