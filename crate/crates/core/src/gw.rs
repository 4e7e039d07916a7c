//! Pure genus-0 Gromov–Witten invariants (no ψ, no κ).
//!
//! Invariants are reduced by the selection rule, the degree-zero rule, the
//! fundamental class and divisor axioms, and finally by WDVV: an insertion
//! `e_a = (1/λ) h·e_u` is traded for the pair `(h, e_u)` in an associativity
//! relation, which moves one unit of grading from the lowest insertion onto
//! another one. Each step lowers the degree, the number of points, or the
//! lowest insertion grading, so the recursion ends at the two-point seeds.

use std::collections::{HashMap, HashSet};
use std::sync::{Arc, RwLock};

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::rational::{binomial, factorial, int, Rational};
use crate::series::{enumerate_monomials, QSeries, Truncation, VarKind, VarRegistry};
use crate::target::{Degree, TargetModel};

/// Normalized pure GW key: sorted class multiset and degree.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PureGwKey {
    pub classes: Vec<usize>,
    pub degree: u32,
}

impl PureGwKey {
    pub fn new(mut classes: Vec<usize>, degree: u32) -> Self {
        classes.sort_unstable();
        PureGwKey { classes, degree }
    }
}

/// Memoized evaluator of pure GW invariants of one target.
#[derive(Debug)]
pub struct GwEngine {
    target: Arc<TargetModel>,
    cache: RwLock<HashMap<PureGwKey, Rational>>,
}

impl GwEngine {
    pub fn new(target: Arc<TargetModel>) -> Self {
        GwEngine {
            target,
            cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn target(&self) -> &TargetModel {
        &self.target
    }

    pub fn cache_len(&self) -> usize {
        self.cache.read().unwrap().len()
    }

    /// `⟨e_{α₁} … e_{αₙ}⟩_d`, symmetric in the classes.
    pub fn pure_gw(&self, classes: &[usize], degree: u32) -> Result<Rational> {
        for &c in classes {
            if c >= self.target.rank() {
                return Err(Error::BasisIndex(c));
            }
        }
        let key = PureGwKey::new(classes.to_vec(), degree);
        let mut stack = HashSet::new();
        self.eval(&key, &mut stack)
    }

    /// Entry point that does not sort its input; used to test symmetry.
    pub fn pure_gw_raw(&self, classes: &[usize], degree: u32) -> Result<Rational> {
        self.pure_gw(classes, degree)
    }

    fn selection(&self, classes: &[usize], degree: u32) -> bool {
        let n = classes.len();
        if degree == 0 && n < 3 {
            return false;
        }
        let total: i64 = classes.iter().map(|&c| self.target.grading(c)).sum();
        match self.target.moduli_dimension(n, Degree(degree)) {
            Ok(dim) => total == 2 * dim,
            Err(_) => false,
        }
    }

    fn eval(&self, key: &PureGwKey, stack: &mut HashSet<PureGwKey>) -> Result<Rational> {
        let t = &*self.target;
        let n = key.classes.len();
        let d = key.degree;
        if !self.selection(&key.classes, d) {
            return Ok(Rational::zero());
        }
        if d == 0 {
            return Ok(if n == 3 {
                t.integrate(&t.product(&key.classes))
            } else {
                Rational::zero()
            });
        }
        if let Some(v) = self.cache.read().unwrap().get(key) {
            return Ok(v.clone());
        }
        if !stack.insert(key.clone()) {
            return Err(Error::Reconstruction(format!(
                "reconstruction loops on ⟨{:?}⟩_{}",
                key.classes, d
            )));
        }
        let result = self.reduce(key, stack);
        stack.remove(key);
        let v = result?;
        self.cache.write().unwrap().insert(key.clone(), v.clone());
        Ok(v)
    }

    fn reduce(&self, key: &PureGwKey, stack: &mut HashSet<PureGwKey>) -> Result<Rational> {
        let t = &*self.target;
        let n = key.classes.len();
        let d = key.degree;
        // Fundamental class axiom (β ≠ 0).
        if key.classes.contains(&0) {
            return Ok(Rational::zero());
        }
        let divisor = t.divisor_class();
        let dint = int(d as i64);
        if n >= 3 {
            if let Some(h) = divisor {
                if let Some(pos) = key.classes.iter().position(|&c| c == h) {
                    let mut rest = key.classes.clone();
                    rest.remove(pos);
                    return Ok(dint * self.eval(&PureGwKey::new(rest, d), stack)?);
                }
            }
            return self.wdvv_step(key, stack);
        }
        if n == 2 {
            return t.seeds().get(&(key.classes.clone(), d)).cloned().ok_or_else(|| {
                Error::Reconstruction(format!(
                    "missing seed ⟨{:?}⟩_{d} for {}",
                    key.classes,
                    t.name()
                ))
            });
        }
        // n ≤ 1: run the divisor axiom backwards.
        let h = divisor.ok_or_else(|| {
            Error::Reconstruction(format!(
                "{} has no unique divisor class to pad ⟨{:?}⟩_{d}",
                t.name(),
                key.classes
            ))
        })?;
        let mut padded = key.classes.clone();
        padded.push(h);
        Ok(self.eval(&PureGwKey::new(padded, d), stack)? / dint)
    }

    /// Solves one WDVV relation for the target invariant.
    fn wdvv_step(&self, key: &PureGwKey, stack: &mut HashSet<PureGwKey>) -> Result<Rational> {
        let t = &*self.target;
        let d = key.degree;
        let h = t.divisor_class().ok_or_else(|| {
            Error::Reconstruction(format!("{} has no unique divisor class", t.name()))
        })?;
        let mut classes = key.classes.clone();
        classes.sort_by_key(|&c| (t.grading(c), c));
        let n = classes.len();
        let a = classes[0];
        let gamma = classes[1];
        let b = classes[n - 1];
        let rest: Vec<usize> = classes[2..n - 1].to_vec();

        // h·e_u = λ e_a.
        let (u, lambda) = (0..t.rank())
            .find_map(|u| {
                let v = &t.cup_product(h, u).ok()?;
                let nz: Vec<usize> = (0..v.len()).filter(|&i| !v[i].is_zero()).collect();
                (nz == [a]).then(|| (u, v[a].clone()))
            })
            .ok_or_else(|| {
                Error::Reconstruction(format!(
                    "class e_{a} of {} is not a multiple of h·e_u",
                    t.name()
                ))
            })?;

        let mut counts = vec![0u32; t.rank()];
        for &c in &rest {
            counts[c] += 1;
        }
        let eta = t.inverse_pairing_support();
        let mut rhs = Rational::zero();
        let mut lhs_rest = Rational::zero();
        for d1 in 0..=d {
            let d2 = d - d1;
            for (s1, coef) in multiset_splits(&counts) {
                let s2: Vec<u32> = counts.iter().zip(&s1).map(|(c, x)| c - x).collect();
                let s1_list = expand(&s1);
                let s2_list = expand(&s2);
                let skip_lhs = d1 == 0 && s1_list.is_empty();
                let coef = Rational::from_integer(coef);
                for (e, f, g) in &eta {
                    // RHS: ⟨h, b, S1, e⟩ η ⟨f, u, γ, S2⟩
                    let l = self.eval(&with(&s1_list, &[h, b, *e], d1), stack)?;
                    if !l.is_zero() {
                        let r = self.eval(&with(&s2_list, &[*f, u, gamma], d2), stack)?;
                        rhs += &coef * g * l * r;
                    }
                    if skip_lhs {
                        continue;
                    }
                    // LHS: ⟨h, u, S1, e⟩ η ⟨f, b, γ, S2⟩
                    let l = self.eval(&with(&s1_list, &[h, u, *e], d1), stack)?;
                    if !l.is_zero() {
                        let r = self.eval(&with(&s2_list, &[*f, b, gamma], d2), stack)?;
                        lhs_rest += &coef * g * l * r;
                    }
                }
            }
        }
        Ok((rhs - lhs_rest) / lambda)
    }

    /// `Σ_n (1/n!) Σ ⟨e_{α₁}…e_{αₙ}⟩_d x^{α₁}…x^{αₙ} q^d` over the `x^α`
    /// (and `q`) variables of `reg`, within `trunc`.
    pub fn potential_series(&self, reg: &VarRegistry, trunc: &Truncation) -> Result<QSeries> {
        let t = &*self.target;
        let mut x_class = vec![None; reg.len()];
        for (i, v) in reg.vars().iter().enumerate() {
            match v.kind {
                VarKind::Q => {}
                _ if v.is_primary() => {
                    if v.class >= t.rank() {
                        return Err(Error::BasisIndex(v.class));
                    }
                    x_class[i] = Some(v.class);
                }
                _ => {
                    return Err(Error::UnknownVariable(format!(
                        "{} is not a primary variable",
                        v.name
                    )))
                }
            }
        }
        let q = reg.q_index();
        let mut out = QSeries::zero(reg, trunc);
        for exp in enumerate_monomials(trunc, q) {
            let d = q.map(|qi| exp[qi]).unwrap_or(0);
            let mut classes = Vec::new();
            let mut denom = BigInt::one();
            for (i, &e) in exp.iter().enumerate() {
                if let Some(c) = x_class[i] {
                    classes.extend(std::iter::repeat_n(c, e as usize));
                    denom *= factorial(e);
                }
            }
            if !self.selection(&classes, d) {
                continue;
            }
            let v = self.pure_gw(&classes, d)?;
            out.add_term(exp, v / Rational::from_integer(denom));
        }
        Ok(out)
    }
}

/// `F = Σ (1/n!) ⟨…⟩_d x…x q^d` for `target`.
pub fn gw_potential_series(
    target: &Arc<TargetModel>,
    reg: &VarRegistry,
    trunc: &Truncation,
) -> Result<QSeries> {
    GwEngine::new(target.clone()).potential_series(reg, trunc)
}

fn with(base: &[usize], extra: &[usize], d: u32) -> PureGwKey {
    let mut v = base.to_vec();
    v.extend_from_slice(extra);
    PureGwKey::new(v, d)
}

fn expand(counts: &[u32]) -> Vec<usize> {
    counts
        .iter()
        .enumerate()
        .flat_map(|(c, &k)| std::iter::repeat_n(c, k as usize))
        .collect()
}

/// All sub-multisets with their binomial multiplicity `Π C(counts_i, sub_i)`.
pub(crate) fn multiset_splits(counts: &[u32]) -> Vec<(Vec<u32>, BigInt)> {
    let mut out = vec![(Vec::with_capacity(counts.len()), BigInt::one())];
    for &c in counts {
        let mut next = Vec::with_capacity(out.len() * (c as usize + 1));
        for (prefix, w) in &out {
            for k in 0..=c {
                let mut p = prefix.clone();
                p.push(k);
                next.push((p, w * binomial(c, k)));
            }
        }
        out = next;
    }
    out
}
