//! Even cohomology ring of the target: basis, grading, Poincaré pairing, cup
//! product and the first Chern class, plus moduli-space dimensions.

use std::collections::BTreeMap;
use std::hash::{Hash, Hasher};

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{int, parse_pq, to_pq, Rational};

/// Effective curve class, `d` times the line class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Degree(pub u32);

#[derive(Debug, Clone, PartialEq, Eq)]
enum Kind {
    Projective(usize),
    Custom,
}

/// Frobenius data of an even-graded target `V`.
///
/// Basis `e_0..e_n` with `e_0` the unit. `cup[a][b][ν]` is `c^ν_{ab}`.
#[derive(Debug, Clone)]
pub struct TargetModel {
    kind: Kind,
    gradings: Vec<i64>,
    eta: Vec<Vec<Rational>>,
    eta_inv: Vec<Vec<Rational>>,
    cup: Vec<Vec<Vec<Rational>>>,
    c1_degree: i64,
    dim: i64,
    seeds: BTreeMap<(Vec<usize>, u32), Rational>,
    id: u64,
}

impl PartialEq for TargetModel {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
            && self.gradings == other.gradings
            && self.eta == other.eta
            && self.cup == other.cup
            && self.c1_degree == other.c1_degree
    }
}

impl TargetModel {
    /// `ℙʳ`: `e_α = H^α`, `|e_α| = 2α`, `η_{αβ} = δ_{α+β,r}`, `c_1 = (r+1)H`.
    pub fn projective_space(r: usize) -> Self {
        let n = r + 1;
        let gradings = (0..n).map(|a| 2 * a as i64).collect();
        let mut eta = vec![vec![Rational::zero(); n]; n];
        let mut cup = vec![vec![vec![Rational::zero(); n]; n]; n];
        for a in 0..n {
            eta[a][r - a] = Rational::one();
            for b in 0..n {
                if a + b <= r {
                    cup[a][b][a + b] = Rational::one();
                }
            }
        }
        let mut seeds = BTreeMap::new();
        // The unique line through two general points.
        seeds.insert((vec![r, r], 1), Rational::one());
        let mut t = TargetModel {
            kind: Kind::Projective(r),
            gradings,
            eta_inv: eta.clone(),
            eta,
            cup,
            c1_degree: r as i64 + 1,
            dim: r as i64,
            seeds,
            id: 0,
        };
        t.id = t.compute_id();
        t
    }

    /// Arbitrary even-graded Frobenius data; validated before use.
    pub fn custom(
        gradings: Vec<i64>,
        eta: Vec<Vec<Rational>>,
        cup: Vec<Vec<Vec<Rational>>>,
        c1_degree: i64,
        seeds: BTreeMap<(Vec<usize>, u32), Rational>,
    ) -> Result<Self> {
        let n = gradings.len();
        if n == 0 {
            return Err(Error::InvalidTarget("empty basis".into()));
        }
        if let Some(g) = gradings.iter().find(|g| **g % 2 != 0 || **g < 0) {
            return Err(Error::InvalidTarget(format!(
                "grading {g} is odd or negative; only even cohomology is supported"
            )));
        }
        if gradings[0] != 0 {
            return Err(Error::InvalidTarget("e_0 must have grading 0".into()));
        }
        if eta.len() != n || eta.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidTarget("eta must be a square matrix".into()));
        }
        if cup.len() != n || cup.iter().any(|m| m.len() != n || m.iter().any(|v| v.len() != n)) {
            return Err(Error::InvalidTarget("cup must be an n×n×n tensor".into()));
        }
        for a in 0..n {
            for b in 0..n {
                if eta[a][b] != eta[b][a] {
                    return Err(Error::InvalidTarget("eta is not symmetric".into()));
                }
                if cup[a][b] != cup[b][a] {
                    return Err(Error::InvalidTarget("cup is not commutative".into()));
                }
                for nu in 0..n {
                    let unit = if nu == b { Rational::one() } else { Rational::zero() };
                    if cup[0][b][nu] != unit {
                        return Err(Error::InvalidTarget("e_0 is not the unit".into()));
                    }
                    if !cup[a][b][nu].is_zero() && gradings[nu] != gradings[a] + gradings[b] {
                        return Err(Error::InvalidTarget(format!(
                            "cup e_{a}·e_{b} has a component in e_{nu} of the wrong grading"
                        )));
                    }
                }
            }
        }
        let eta_inv = invert(&eta)
            .ok_or_else(|| Error::InvalidTarget("eta is degenerate".into()))?;
        let dim = *gradings.iter().max().unwrap() / 2;
        let mut t = TargetModel {
            kind: Kind::Custom,
            gradings,
            eta,
            eta_inv,
            cup,
            c1_degree,
            dim,
            seeds,
            id: 0,
        };
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    let ab_c = t.mul_vec(&t.cup[a][b].clone(), c);
                    let a_bc = t.mul_vec(&t.cup[b][c].clone(), a);
                    if ab_c != a_bc {
                        return Err(Error::InvalidTarget("cup is not associative".into()));
                    }
                }
            }
        }
        t.id = t.compute_id();
        Ok(t)
    }

    fn compute_id(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.gradings.hash(&mut h);
        for row in &self.eta {
            for v in row {
                v.hash(&mut h);
            }
        }
        for m in &self.cup {
            for row in m {
                for v in row {
                    v.hash(&mut h);
                }
            }
        }
        self.c1_degree.hash(&mut h);
        h.finish()
    }

    /// Stable content hash; distinct targets get distinct memo tables.
    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn name(&self) -> String {
        match self.kind {
            Kind::Projective(r) => format!("P^{r}"),
            Kind::Custom => format!("custom[{:016x}]", self.id),
        }
    }

    /// `r` for `ℙʳ`.
    pub fn projective_rank(&self) -> Option<usize> {
        match self.kind {
            Kind::Projective(r) => Some(r),
            Kind::Custom => None,
        }
    }

    /// Number of basis elements.
    pub fn rank(&self) -> usize {
        self.gradings.len()
    }

    /// Complex dimension of `V`.
    pub fn dim(&self) -> i64 {
        self.dim
    }

    pub fn grading(&self, alpha: usize) -> i64 {
        self.gradings[alpha]
    }

    pub fn gradings(&self) -> &[i64] {
        &self.gradings
    }

    /// Degree of `c_1(T_V)` on the line class.
    pub fn c1_degree(&self) -> i64 {
        self.c1_degree
    }

    pub(crate) fn seeds(&self) -> &BTreeMap<(Vec<usize>, u32), Rational> {
        &self.seeds
    }

    fn check(&self, alpha: usize) -> Result<()> {
        if alpha < self.rank() {
            Ok(())
        } else {
            Err(Error::BasisIndex(alpha))
        }
    }

    /// `e_α · e_β` as coefficients on the basis.
    pub fn cup_product(&self, alpha: usize, beta: usize) -> Result<Vec<Rational>> {
        self.check(alpha)?;
        self.check(beta)?;
        Ok(self.cup[alpha][beta].clone())
    }

    /// `c^ν_{αβ}` without bounds checks.
    pub fn cup_coeff(&self, alpha: usize, beta: usize, nu: usize) -> &Rational {
        &self.cup[alpha][beta][nu]
    }

    /// Multiplies a class given on the basis by `e_β`.
    pub fn mul_vec(&self, v: &[Rational], beta: usize) -> Vec<Rational> {
        let n = self.rank();
        let mut out = vec![Rational::zero(); n];
        for (a, ca) in v.iter().enumerate() {
            if ca.is_zero() {
                continue;
            }
            for (nu, o) in out.iter_mut().enumerate() {
                let c = &self.cup[a][beta][nu];
                if !c.is_zero() {
                    *o += ca * c;
                }
            }
        }
        out
    }

    /// Product of a multiset of basis classes.
    pub fn product(&self, classes: &[usize]) -> Vec<Rational> {
        let mut v = vec![Rational::zero(); self.rank()];
        v[0] = Rational::one();
        for &c in classes {
            v = self.mul_vec(&v, c);
        }
        v
    }

    /// `∫_V` of a class given on the basis.
    pub fn integrate(&self, v: &[Rational]) -> Rational {
        v.iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(a, c)| c * &self.eta[a][0])
            .sum()
    }

    pub fn poincare_pairing(&self, alpha: usize, beta: usize) -> Result<Rational> {
        self.check(alpha)?;
        self.check(beta)?;
        Ok(self.eta[alpha][beta].clone())
    }

    pub fn inverse_pairing(&self, s1: usize, s2: usize) -> Result<Rational> {
        self.check(s1)?;
        self.check(s2)?;
        Ok(self.eta_inv[s1][s2].clone())
    }

    /// Nonzero entries `(σ₁, σ₂, η^{σ₁σ₂})` of the inverse pairing.
    pub fn inverse_pairing_support(&self) -> Vec<(usize, usize, Rational)> {
        let n = self.rank();
        let mut out = Vec::new();
        for a in 0..n {
            for b in 0..n {
                if !self.eta_inv[a][b].is_zero() {
                    out.push((a, b, self.eta_inv[a][b].clone()));
                }
            }
        }
        out
    }

    /// Complex dimension `D + n − 3 + ∫_β c_1` of `M_{0,n}(V,β)`.
    pub fn moduli_dimension(&self, n: usize, beta: Degree) -> Result<i64> {
        if n < 3 && beta.0 == 0 {
            return Err(Error::Unstable { n, degree: 0 });
        }
        Ok(self.dim + n as i64 - 3 + beta.0 as i64 * self.c1_degree)
    }

    /// The designated divisor class: the least basis index of grading 2.
    pub fn divisor_class(&self) -> Option<usize> {
        (0..self.rank()).find(|&a| self.gradings[a] == 2)
    }

    /// `∫_β e_α` for the divisor class; the line class pairs to one.
    pub fn integral_over_beta(&self, alpha: usize, beta: Degree) -> Result<Rational> {
        self.check(alpha)?;
        if self.gradings[alpha] != 2 || self.divisor_class() != Some(alpha) {
            return Err(Error::NotDivisor(alpha));
        }
        Ok(int(beta.0 as i64))
    }

    pub fn to_config(&self) -> TargetConfig {
        match self.kind {
            Kind::Projective(r) => TargetConfig::ProjectiveSpace { r },
            Kind::Custom => TargetConfig::Custom {
                gradings: self.gradings.clone(),
                eta: self
                    .eta
                    .iter()
                    .map(|row| row.iter().map(|v| Num::Str(to_pq(v))).collect())
                    .collect(),
                cup: self
                    .cup
                    .iter()
                    .map(|m| {
                        m.iter()
                            .map(|row| row.iter().map(|v| Num::Str(to_pq(v))).collect())
                            .collect()
                    })
                    .collect(),
                c1_degree: self.c1_degree,
                seeds: self
                    .seeds
                    .iter()
                    .map(|((classes, d), v)| SeedConfig {
                        classes: classes.clone(),
                        degree: *d,
                        value: Num::Str(to_pq(v)),
                    })
                    .collect(),
            },
        }
    }
}

/// Gauss–Jordan inverse over the rationals.
fn invert(m: &[Vec<Rational>]) -> Option<Vec<Vec<Rational>>> {
    let n = m.len();
    let mut a: Vec<Vec<Rational>> = m.to_vec();
    let mut inv: Vec<Vec<Rational>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { Rational::one() } else { Rational::zero() })
                .collect()
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, piv);
        inv.swap(col, piv);
        let p = a[col][col].clone();
        for j in 0..n {
            a[col][j] = &a[col][j] / &p;
            inv[col][j] = &inv[col][j] / &p;
        }
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                for j in 0..n {
                    let t = &f * &a[col][j];
                    a[r][j] -= t;
                    let t = &f * &inv[col][j];
                    inv[r][j] -= t;
                }
            }
        }
    }
    Some(inv)
}

/// A rational given either as a JSON number or a `"p/q"` string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Num {
    Int(i64),
    Str(String),
}

impl Num {
    pub fn value(&self) -> Result<Rational> {
        match self {
            Num::Int(i) => Ok(int(*i)),
            Num::Str(s) => parse_pq(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedConfig {
    pub classes: Vec<usize>,
    pub degree: u32,
    pub value: Num,
}

/// Target config file: `{"type": "projective_space", "r": 2}` or a custom
/// Frobenius algebra.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TargetConfig {
    ProjectiveSpace {
        r: usize,
    },
    Custom {
        gradings: Vec<i64>,
        eta: Vec<Vec<Num>>,
        cup: Vec<Vec<Vec<Num>>>,
        c1_degree: i64,
        #[serde(default)]
        seeds: Vec<SeedConfig>,
    },
}

impl TargetConfig {
    pub fn build(&self) -> Result<TargetModel> {
        match self {
            TargetConfig::ProjectiveSpace { r } => Ok(TargetModel::projective_space(*r)),
            TargetConfig::Custom {
                gradings,
                eta,
                cup,
                c1_degree,
                seeds,
            } => {
                let eta = eta
                    .iter()
                    .map(|row| row.iter().map(Num::value).collect::<Result<Vec<_>>>())
                    .collect::<Result<Vec<_>>>()?;
                let cup = cup
                    .iter()
                    .map(|m| {
                        m.iter()
                            .map(|row| row.iter().map(Num::value).collect::<Result<Vec<_>>>())
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()?;
                let mut table = BTreeMap::new();
                for s in seeds {
                    let mut classes = s.classes.clone();
                    classes.sort_unstable();
                    table.insert((classes, s.degree), s.value.value()?);
                }
                TargetModel::custom(gradings.clone(), eta, cup, *c1_degree, table)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projective_cup_products() {
        let p2 = TargetModel::projective_space(2);
        assert_eq!(p2.cup_product(1, 1).unwrap(), vec![int(0), int(0), int(1)]);
        let p1 = TargetModel::projective_space(1);
        assert!(p1.cup_product(1, 1).unwrap().iter().all(Zero::is_zero));
        for r in 0..5 {
            let t = TargetModel::projective_space(r);
            for a in 0..=r {
                let mut unit = vec![int(0); r + 1];
                unit[a] = int(1);
                assert_eq!(t.cup_product(0, a).unwrap(), unit);
            }
        }
        assert_eq!(p2.cup_product(3, 0).unwrap_err(), Error::BasisIndex(3));
    }

    #[test]
    fn pairings() {
        let p1 = TargetModel::projective_space(1);
        assert_eq!(p1.poincare_pairing(0, 1).unwrap(), int(1));
        assert_eq!(p1.poincare_pairing(0, 0).unwrap(), int(0));
        let p2 = TargetModel::projective_space(2);
        assert_eq!(p2.inverse_pairing(1, 1).unwrap(), int(1));
        assert_eq!(p2.inverse_pairing(0, 1).unwrap(), int(0));
    }

    #[test]
    fn moduli_dimensions() {
        let p1 = TargetModel::projective_space(1);
        assert_eq!(p1.moduli_dimension(3, Degree(0)).unwrap(), 1);
        for n in 0..6 {
            for d in 1..4 {
                assert_eq!(
                    p1.moduli_dimension(n, Degree(d)).unwrap(),
                    -2 + n as i64 + 2 * d as i64
                );
            }
        }
        let p2 = TargetModel::projective_space(2);
        assert_eq!(p2.moduli_dimension(0, Degree(1)).unwrap(), 2);
        assert_eq!(
            p2.moduli_dimension(2, Degree(0)).unwrap_err(),
            Error::Unstable { n: 2, degree: 0 }
        );
    }

    #[test]
    fn divisor_integrals() {
        let p1 = TargetModel::projective_space(1);
        assert_eq!(p1.integral_over_beta(1, Degree(3)).unwrap(), int(3));
        let p2 = TargetModel::projective_space(2);
        assert_eq!(p2.integral_over_beta(1, Degree(2)).unwrap(), int(2));
        assert_eq!(p2.integral_over_beta(0, Degree(2)).unwrap_err(), Error::NotDivisor(0));
    }

    #[test]
    fn config_round_trip_and_validation() {
        let cfg: TargetConfig = serde_json::from_str(r#"{"type":"projective_space","r":2}"#).unwrap();
        assert_eq!(cfg.build().unwrap(), TargetModel::projective_space(2));

        // P^1 spelled out by hand.
        let text = r#"{"type":"custom","gradings":[0,2],"eta":[[0,1],[1,0]],
            "cup":[[[1,0],[0,1]],[[0,1],[0,0]]],"c1_degree":2,
            "seeds":[{"classes":[1,1],"degree":1,"value":"1/1"}]}"#;
        let cfg: TargetConfig = serde_json::from_str(text).unwrap();
        let t = cfg.build().unwrap();
        assert_eq!(t.rank(), 2);
        assert_eq!(t.dim(), 1);
        assert_eq!(t.inverse_pairing(1, 0).unwrap(), int(1));
        let again = t.to_config().build().unwrap();
        assert_eq!(again, t);

        let odd = r#"{"type":"custom","gradings":[0,1],"eta":[[0,1],[1,0]],
            "cup":[[[1,0],[0,1]],[[0,1],[0,0]]],"c1_degree":2}"#;
        let cfg: TargetConfig = serde_json::from_str(odd).unwrap();
        assert!(matches!(cfg.build(), Err(Error::InvalidTarget(_))));

        let degenerate = r#"{"type":"custom","gradings":[0,2],"eta":[[0,0],[0,0]],
            "cup":[[[1,0],[0,1]],[[0,1],[0,0]]],"c1_degree":2}"#;
        let cfg: TargetConfig = serde_json::from_str(degenerate).unwrap();
        assert!(matches!(cfg.build(), Err(Error::InvalidTarget(_))));
    }
}
