//! Twisted correlators `⟨τ^m κ^p⟩_β` and their reduction to pure invariants.
//!
//! `m` records ψ-powers and classes at marked points (`τ_a^α`, `a ≥ 0`), `p`
//! records κ classes (`κ_{a,α}`, `a ≥ −1`). The main evaluator removes ψ with
//! the puncture/dilaton comparison, removes κ of level `≥ 0` with the κ
//! recursion, and finally turns `κ_{−1,α}` into extra marked points. A second
//! evaluator removes κ first and then uses the ψ recursion; it exists to
//! cross-check the first.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, RwLock};

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gw::GwEngine;
use crate::rational::{binomial, int, Rational};
use crate::target::{Degree, TargetConfig, TargetModel};
use crate::trees::{Decoration, TreeSum};

/// Finitely supported multiplicities `(a, α) ↦ m_a^α`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex {
    min_level: i32,
    entries: BTreeMap<(i32, usize), u32>,
}

impl MultiIndex {
    pub fn new(min_level: i32) -> Self {
        MultiIndex {
            min_level,
            entries: BTreeMap::new(),
        }
    }

    /// τ-index (levels `≥ 0`).
    pub fn tau() -> Self {
        MultiIndex::new(0)
    }

    /// κ-index (levels `≥ −1`).
    pub fn kappa() -> Self {
        MultiIndex::new(-1)
    }

    pub fn from_entries(
        min_level: i32,
        entries: impl IntoIterator<Item = (i32, usize, u32)>,
    ) -> Result<Self> {
        let mut m = MultiIndex::new(min_level);
        for (a, alpha, k) in entries {
            if a < min_level {
                return Err(Error::InvalidCorrelator(format!(
                    "level {a} below the minimum {min_level}"
                )));
            }
            m.add(a, alpha, k);
        }
        Ok(m)
    }

    pub fn min_level(&self) -> i32 {
        self.min_level
    }

    pub fn get(&self, a: i32, alpha: usize) -> u32 {
        self.entries.get(&(a, alpha)).copied().unwrap_or(0)
    }

    pub fn add(&mut self, a: i32, alpha: usize, k: u32) {
        debug_assert!(a >= self.min_level);
        if k > 0 {
            *self.entries.entry((a, alpha)).or_default() += k;
        }
    }

    pub fn with(&self, a: i32, alpha: usize) -> Self {
        let mut m = self.clone();
        m.add(a, alpha, 1);
        m
    }

    pub fn remove(&mut self, a: i32, alpha: usize) -> Result<()> {
        match self.entries.get_mut(&(a, alpha)) {
            Some(k) if *k > 1 => {
                *k -= 1;
                Ok(())
            }
            Some(_) => {
                self.entries.remove(&(a, alpha));
                Ok(())
            }
            None => Err(Error::NotApplicable(format!("no entry ({a}, {alpha})"))),
        }
    }

    pub fn without(&self, a: i32, alpha: usize) -> Result<Self> {
        let mut m = self.clone();
        m.remove(a, alpha)?;
        Ok(m)
    }

    /// `(a, α, multiplicity)` in increasing `(a, α)` order.
    pub fn entries(&self) -> impl Iterator<Item = (i32, usize, u32)> + '_ {
        self.entries.iter().map(|(&(a, al), &k)| (a, al, k))
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `‖m‖`: number of entries of level `≥ 0`.
    pub fn norm(&self) -> u32 {
        self.entries().filter(|e| e.0 >= 0).map(|e| e.2).sum()
    }

    /// `|m|`: total level of entries of level `≥ 0`.
    pub fn weight(&self) -> i64 {
        self.entries()
            .filter(|e| e.0 >= 0)
            .map(|e| e.0 as i64 * e.2 as i64)
            .sum()
    }

    /// Number of entries of every level.
    pub fn len(&self) -> u32 {
        self.entries.values().sum()
    }

    pub fn max_level(&self) -> Option<i32> {
        self.entries.keys().map(|k| k.0).max()
    }

    /// Entries as a flat list, repeated by multiplicity.
    pub fn flat(&self) -> Vec<(i32, usize)> {
        self.entries()
            .flat_map(|(a, al, k)| std::iter::repeat_n((a, al), k as usize))
            .collect()
    }

    pub fn plus(&self, other: &MultiIndex) -> MultiIndex {
        let mut m = self.clone();
        for (a, al, k) in other.entries() {
            m.add(a, al, k);
        }
        m
    }

    /// All `(m', m − m', binom(m, m'))` with `m'` drawn from entries
    /// satisfying `allow`; the other entries stay in the complement.
    pub fn splits(&self, allow: impl Fn(i32) -> bool) -> Vec<(MultiIndex, MultiIndex, BigInt)> {
        let mut out = vec![(
            MultiIndex::new(self.min_level),
            MultiIndex::new(self.min_level),
            BigInt::one(),
        )];
        for (a, al, k) in self.entries() {
            if !allow(a) {
                for o in &mut out {
                    o.1.add(a, al, k);
                }
                continue;
            }
            let mut next = Vec::with_capacity(out.len() * (k as usize + 1));
            for (s, c, w) in &out {
                for j in 0..=k {
                    let mut s = s.clone();
                    let mut c = c.clone();
                    s.add(a, al, j);
                    c.add(a, al, k - j);
                    next.push((s, c, w * binomial(k, j)));
                }
            }
            out = next;
        }
        out
    }
}

/// `⟨τ^m κ^p⟩_d` for a fixed target.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CorrelatorKey {
    pub m: MultiIndex,
    pub p: MultiIndex,
    pub degree: u32,
}

impl CorrelatorKey {
    pub fn new(m: MultiIndex, p: MultiIndex, degree: u32) -> Result<Self> {
        if m.min_level() != 0 {
            return Err(Error::InvalidCorrelator("τ part must have minimum level 0".into()));
        }
        if p.min_level() != -1 {
            return Err(Error::InvalidCorrelator("κ part must have minimum level −1".into()));
        }
        Ok(CorrelatorKey { m, p, degree })
    }

    /// From `(a, α, multiplicity)` triples.
    pub fn from_lists(tau: &[(i32, usize, u32)], kappa: &[(i32, usize, u32)], degree: u32) -> Result<Self> {
        CorrelatorKey::new(
            MultiIndex::from_entries(0, tau.iter().copied())?,
            MultiIndex::from_entries(-1, kappa.iter().copied())?,
            degree,
        )
    }

    /// Number of marked points `‖m‖`.
    pub fn n(&self) -> u32 {
        self.m.norm()
    }

    fn with_tau(&self, a: i32, alpha: usize) -> Self {
        CorrelatorKey {
            m: self.m.with(a, alpha),
            p: self.p.clone(),
            degree: self.degree,
        }
    }

    fn with_kappa(&self, a: i32, alpha: usize) -> Self {
        CorrelatorKey {
            m: self.m.clone(),
            p: self.p.with(a, alpha),
            degree: self.degree,
        }
    }

    fn check(&self, t: &TargetModel) -> Result<()> {
        for (_, al, _) in self.m.entries().chain(self.p.entries()) {
            if al >= t.rank() {
                return Err(Error::BasisIndex(al));
            }
        }
        Ok(())
    }
}

impl fmt::Display for CorrelatorKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "⟨")?;
        let mut first = true;
        for (a, al, k) in self.m.entries() {
            for _ in 0..k {
                write!(f, "{}τ_{a}^{al}", if first { "" } else { " " })?;
                first = false;
            }
        }
        for (a, al, k) in self.p.entries() {
            for _ in 0..k {
                write!(f, "{}κ_{a},{al}", if first { "" } else { " " })?;
                first = false;
            }
        }
        write!(f, "⟩_{}", self.degree)
    }
}

/// Rational combination of products of correlators.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CorrelatorCombination {
    terms: BTreeMap<Vec<CorrelatorKey>, Rational>,
}

impl CorrelatorCombination {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, coef: Rational, mut keys: Vec<CorrelatorKey>) {
        if coef.is_zero() {
            return;
        }
        keys.sort();
        let c = self.terms.entry(keys.clone()).or_insert_with(Rational::zero);
        *c += coef;
        if c.is_zero() {
            self.terms.remove(&keys);
        }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vec<CorrelatorKey>, &Rational)> {
        self.terms.iter()
    }
}

/// Memoized evaluator for one target.
#[derive(Debug)]
pub struct CorrelatorEngine {
    target: Arc<TargetModel>,
    gw: GwEngine,
    cache: RwLock<HashMap<CorrelatorKey, Rational>>,
    alt_cache: RwLock<HashMap<CorrelatorKey, Rational>>,
    misses: AtomicUsize,
}

impl CorrelatorEngine {
    pub fn new(target: Arc<TargetModel>) -> Self {
        CorrelatorEngine {
            gw: GwEngine::new(target.clone()),
            target,
            cache: RwLock::new(HashMap::new()),
            alt_cache: RwLock::new(HashMap::new()),
            misses: AtomicUsize::new(0),
        }
    }

    pub fn target(&self) -> &TargetModel {
        &self.target
    }

    pub fn target_arc(&self) -> &Arc<TargetModel> {
        &self.target
    }

    pub fn gw(&self) -> &GwEngine {
        &self.gw
    }

    /// Number of keys reduced so far (cache misses of the main evaluator).
    pub fn reductions(&self) -> usize {
        self.misses.load(Ordering::Relaxed)
    }

    /// Degree of the integrand: `Σ (2a + |e_μ|)` over `m` and `p`.
    pub fn integrand_degree(&self, key: &CorrelatorKey) -> i64 {
        key.m
            .entries()
            .chain(key.p.entries())
            .map(|(a, al, k)| (2 * a as i64 + self.target.grading(al)) * k as i64)
            .sum()
    }

    /// Complex dimension of `M_{0,‖m‖}(V, β)`.
    pub fn expected_dimension(&self, key: &CorrelatorKey) -> Result<i64> {
        self.target.moduli_dimension(key.n() as usize, Degree(key.degree))
    }

    /// True when the integrand degree matches the real dimension.
    pub fn selection(&self, key: &CorrelatorKey) -> bool {
        match self.expected_dimension(key) {
            Ok(dim) => self.integrand_degree(key) == 2 * dim,
            Err(_) => false,
        }
    }

    fn trivially_zero(&self, key: &CorrelatorKey) -> bool {
        (key.degree == 0 && key.n() < 3) || !self.selection(key)
    }

    /// Coefficient of `e_ν` in `e_{α₁}⋯e_{α_k}·e_α`.
    fn product_with(&self, classes: &[usize], alpha: usize) -> Vec<Rational> {
        let mut all = classes.to_vec();
        all.push(alpha);
        self.target.product(&all)
    }

    fn push(&self, out: &mut CorrelatorCombination, coef: Rational, keys: Vec<CorrelatorKey>) {
        if keys.iter().any(|k| self.trivially_zero(k)) {
            return;
        }
        out.add(coef, keys);
    }

    /// ψ recursion with pivot `τ_{a₁}^{α₁}` (`a₁ ≥ 1`) and co-pivots
    /// `τ_{a₂}^{α₂}`, `τ_{a₃}^{α₃}`.
    pub fn apply_trr_psi(
        &self,
        key: &CorrelatorKey,
        pivot: (i32, usize),
        co1: (i32, usize),
        co2: (i32, usize),
    ) -> Result<CorrelatorCombination> {
        key.check(&self.target)?;
        if pivot.0 < 1 {
            return Err(Error::NotApplicable("ψ recursion needs a pivot of level ≥ 1".into()));
        }
        let rest = key
            .m
            .without(pivot.0, pivot.1)
            .and_then(|m| m.without(co1.0, co1.1))
            .and_then(|m| m.without(co2.0, co2.1))
            .map_err(|_| Error::NotApplicable("pivot or co-pivots absent from m".into()))?;
        let mut out = CorrelatorCombination::new();
        let eta = self.target.inverse_pairing_support();
        let msplits = rest.splits(|_| true);
        let psplits = key.p.splits(|_| true);
        for d1 in 0..=key.degree {
            let d2 = key.degree - d1;
            for (m1, m2, bm) in &msplits {
                for (p1, p2, bp) in &psplits {
                    let coef = Rational::from_integer(bm * bp);
                    for (s1, s2, g) in &eta {
                        let k1 = CorrelatorKey {
                            m: m1.with(pivot.0 - 1, pivot.1).with(0, *s1),
                            p: p1.clone(),
                            degree: d1,
                        };
                        let k2 = CorrelatorKey {
                            m: m2.with(0, *s2).with(co1.0, co1.1).with(co2.0, co2.1),
                            p: p2.clone(),
                            degree: d2,
                        };
                        self.push(&mut out, &coef * g, vec![k1, k2]);
                    }
                }
            }
        }
        Ok(out)
    }

    /// κ recursion with pivot `κ_{a₁,α₁}` (`a₁ ≥ 0`) and co-pivots taken
    /// from `m`.
    pub fn apply_trr_kappa(
        &self,
        key: &CorrelatorKey,
        pivot: (i32, usize),
        co1: (i32, usize),
        co2: (i32, usize),
    ) -> Result<CorrelatorCombination> {
        key.check(&self.target)?;
        if pivot.0 < 0 {
            return Err(Error::NotApplicable("κ recursion needs a pivot of level ≥ 0".into()));
        }
        let prest = key
            .p
            .without(pivot.0, pivot.1)
            .map_err(|_| Error::NotApplicable("pivot absent from p".into()))?;
        let mrest = key
            .m
            .without(co1.0, co1.1)
            .and_then(|m| m.without(co2.0, co2.1))
            .map_err(|_| {
                Error::NotApplicable("κ recursion needs two τ co-pivots present in m".into())
            })?;
        let mut out = CorrelatorCombination::new();
        let eta = self.target.inverse_pairing_support();
        let msplits = mrest.splits(|_| true);
        let psplits = prest.splits(|_| true);
        for d1 in 0..=key.degree {
            let d2 = key.degree - d1;
            for (m1, m2, bm) in &msplits {
                for (p1, p2, bp) in &psplits {
                    let coef = Rational::from_integer(bm * bp);
                    for (s1, s2, g) in &eta {
                        let k1 = CorrelatorKey {
                            m: m1.with(0, *s1),
                            p: p1.with(pivot.0 - 1, pivot.1),
                            degree: d1,
                        };
                        let k2 = CorrelatorKey {
                            m: m2.with(0, *s2).with(co1.0, co1.1).with(co2.0, co2.1),
                            p: p2.clone(),
                            degree: d2,
                        };
                        self.push(&mut out, &coef * g, vec![k1, k2]);
                    }
                }
            }
        }
        if pivot.0 == 0 {
            for (a, al, k) in mrest.entries() {
                let base = mrest.without(a, al)?;
                let v = self.product_with(&[al], pivot.1);
                for (nu, c) in v.iter().enumerate() {
                    if c.is_zero() {
                        continue;
                    }
                    let k1 = CorrelatorKey {
                        m: base.with(a, nu).with(co1.0, co1.1).with(co2.0, co2.1),
                        p: prest.clone(),
                        degree: key.degree,
                    };
                    self.push(&mut out, c * int(k as i64), vec![k1]);
                }
            }
        }
        Ok(out)
    }

    /// Puncture/dilaton comparison with pivot `τ_a^α`.
    pub fn apply_puncture_dilaton(
        &self,
        key: &CorrelatorKey,
        pivot: (i32, usize),
    ) -> Result<CorrelatorCombination> {
        key.check(&self.target)?;
        let (a, alpha) = pivot;
        let rest = key
            .m
            .without(a, alpha)
            .map_err(|_| Error::NotApplicable(format!("pivot τ_{a}^{alpha} absent from m")))?;
        if a == 0 && rest.max_level().unwrap_or(0) > 0 {
            return Err(Error::NotApplicable(
                "a level-0 pivot requires every other τ entry to have level 0".into(),
            ));
        }
        if key.degree == 0 && key.n() == 3 {
            return Err(Error::NotApplicable(
                "cannot forget a point when β = 0 and n = 3".into(),
            ));
        }
        let mut out = CorrelatorCombination::new();
        if key.degree == 0 && key.n() < 3 {
            return Ok(out);
        }
        for (pf, pk, b) in key.p.splits(|lvl| lvl >= 0) {
            // pf (levels ≥ 0 only) is fused with the pivot, pk stays.
            let classes: Vec<usize> = pf.flat().iter().map(|e| e.1).collect();
            let level = pf.weight() as i32 + a - 1;
            let v = self.product_with(&classes, alpha);
            let coef = Rational::from_integer(b);
            for (nu, c) in v.iter().enumerate() {
                if c.is_zero() {
                    continue;
                }
                let k = CorrelatorKey {
                    m: rest.clone(),
                    p: pk.with(level, nu),
                    degree: key.degree,
                };
                self.push(&mut out, &coef * c, vec![k]);
            }
        }
        Ok(out)
    }

    /// Pure GW classes for a key without ψ and with only `κ_{−1}`.
    pub fn lift_kappa_minus_one(&self, key: &CorrelatorKey) -> Result<(Vec<usize>, u32)> {
        if key.m.max_level().unwrap_or(0) > 0 || key.p.entries().any(|e| e.0 >= 0) {
            return Err(Error::NotApplicable(
                "lifting needs τ of level 0 and κ of level −1 only".into(),
            ));
        }
        let classes = key
            .m
            .flat()
            .into_iter()
            .chain(key.p.flat())
            .map(|e| e.1)
            .collect();
        Ok((classes, key.degree))
    }

    pub fn evaluate_combination(&self, c: &CorrelatorCombination) -> Result<Rational> {
        let mut acc = Rational::zero();
        for (keys, coef) in c.iter() {
            let mut v = coef.clone();
            for k in keys {
                if v.is_zero() {
                    break;
                }
                v *= self.evaluate(k)?;
            }
            acc += v;
        }
        Ok(acc)
    }

    fn evaluate_combination_alt(&self, c: &CorrelatorCombination) -> Result<Rational> {
        let mut acc = Rational::zero();
        for (keys, coef) in c.iter() {
            let mut v = coef.clone();
            for k in keys {
                if v.is_zero() {
                    break;
                }
                v *= self.evaluate_alt(k)?;
            }
            acc += v;
        }
        Ok(acc)
    }

    /// Value of `∫_V` of the product of all classes in a three-point,
    /// degree-zero key, or zero when ψ or a non-level-0 κ is present.
    fn degree_zero_base(&self, key: &CorrelatorKey) -> Rational {
        if key.m.max_level().unwrap_or(0) > 0 || key.p.entries().any(|e| e.0 != 0) {
            return Rational::zero();
        }
        let classes: Vec<usize> = key.m.flat().into_iter().chain(key.p.flat()).map(|e| e.1).collect();
        self.target.integrate(&self.target.product(&classes))
    }

    fn divisor_for(&self, key: &CorrelatorKey) -> Result<usize> {
        self.target.divisor_class().ok_or_else(|| {
            Error::Reconstruction(format!(
                "{} has no divisor class to eliminate κ from {key}",
                self.target.name()
            ))
        })
    }

    /// Exact value of `⟨τ^m κ^p⟩_β`.
    pub fn evaluate(&self, key: &CorrelatorKey) -> Result<Rational> {
        key.check(&self.target)?;
        if self.trivially_zero(key) {
            return Ok(Rational::zero());
        }
        if key.degree == 0 && key.n() == 3 {
            return Ok(self.degree_zero_base(key));
        }
        if let Some(v) = self.cache.read().unwrap().get(key) {
            return Ok(v.clone());
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let v = self.reduce(key)?;
        self.cache.write().unwrap().insert(key.clone(), v.clone());
        Ok(v)
    }

    fn reduce(&self, key: &CorrelatorKey) -> Result<Rational> {
        // ψ first: highest level, lowest class.
        if let Some(top) = key.m.max_level().filter(|&a| a >= 1) {
            let alpha = key.m.entries().find(|e| e.0 == top).unwrap().1;
            let c = self.apply_puncture_dilaton(key, (top, alpha))?;
            return self.evaluate_combination(&c);
        }
        if let Some(top) = key.p.max_level().filter(|&a| a >= 0) {
            let alpha = key.p.entries().find(|e| e.0 == top).unwrap().1;
            if key.n() >= 2 {
                let flat = key.m.flat();
                let c = self.apply_trr_kappa(key, (top, alpha), flat[0], flat[1])?;
                return self.evaluate_combination(&c);
            }
            return self.divisor_trick(key);
        }
        let (classes, d) = self.lift_kappa_minus_one(key)?;
        self.gw.pure_gw(&classes, d)
    }

    /// For `‖m‖ ≤ 1`, `β ≠ 0`: add `τ_0^h`, expand by puncture/dilaton and
    /// solve for the term that keeps `p` whole, which equals
    /// `∫_β h · ⟨τ^m κ^p⟩_β`.
    fn divisor_trick(&self, key: &CorrelatorKey) -> Result<Rational> {
        let h = self.divisor_for(key)?;
        let dh = self.target.integral_over_beta(h, Degree(key.degree))?;
        let aug = key.with_tau(0, h);
        let total = self.evaluate(&aug)?;
        let target = key.with_kappa(-1, h);
        let mut rest = Rational::zero();
        for (keys, coef) in self.apply_puncture_dilaton(&aug, (0, h))?.iter() {
            if keys.len() == 1 && keys[0] == target {
                continue;
            }
            let mut v = coef.clone();
            for k in keys {
                v *= self.evaluate(k)?;
            }
            rest += v;
        }
        // The remaining term has coefficient one: κ_{−1,h} is its only fused
        // entry and h·e_0 = h.
        Ok((total - rest) / dh)
    }

    /// Evaluator that eliminates κ first, then ψ by the ψ recursion.
    pub fn evaluate_alt(&self, key: &CorrelatorKey) -> Result<Rational> {
        key.check(&self.target)?;
        if self.trivially_zero(key) {
            return Ok(Rational::zero());
        }
        if key.degree == 0 && key.n() == 3 {
            return Ok(self.degree_zero_base(key));
        }
        if let Some(v) = self.alt_cache.read().unwrap().get(key) {
            return Ok(v.clone());
        }
        let v = self.reduce_alt(key)?;
        self.alt_cache.write().unwrap().insert(key.clone(), v.clone());
        Ok(v)
    }

    fn reduce_alt(&self, key: &CorrelatorKey) -> Result<Rational> {
        let t = &*self.target;
        // κ of level b ≥ 0: read puncture/dilaton backwards with a = b + 1.
        if let Some(b) = key.p.max_level().filter(|&b| b >= 0) {
            let alpha = key.p.entries().find(|e| e.0 == b).unwrap().1;
            let p = key.p.without(b, alpha)?;
            let lifted = CorrelatorKey {
                m: key.m.with(b + 1, alpha),
                p: p.clone(),
                degree: key.degree,
            };
            let mut v = self.evaluate_alt(&lifted)?;
            for (pf, pk, c) in p.splits(|lvl| lvl >= 0) {
                if pf.is_empty() {
                    continue;
                }
                let classes: Vec<usize> = pf.flat().iter().map(|e| e.1).collect();
                let level = pf.weight() as i32 + b;
                let prod = self.product_with(&classes, alpha);
                for (nu, x) in prod.iter().enumerate() {
                    if x.is_zero() {
                        continue;
                    }
                    let k = CorrelatorKey {
                        m: key.m.clone(),
                        p: pk.with(level, nu),
                        degree: key.degree,
                    };
                    v -= Rational::from_integer(c.clone()) * x * self.evaluate_alt(&k)?;
                }
            }
            return Ok(v);
        }
        // Only κ_{−1} left: trade one for a marked point (string equation).
        if let Some((_, alpha, _)) = key.p.entries().next() {
            if key.degree == 0 {
                return Ok(Rational::zero());
            }
            let p = key.p.without(-1, alpha)?;
            let mut v = self.evaluate_alt(&CorrelatorKey {
                m: key.m.with(0, alpha),
                p: p.clone(),
                degree: key.degree,
            })?;
            for (a, mu, k) in key.m.entries().filter(|e| e.0 >= 1) {
                let base = key.m.without(a, mu)?;
                let prod = t.cup_product(mu, alpha)?;
                for (nu, x) in prod.iter().enumerate() {
                    if x.is_zero() {
                        continue;
                    }
                    let kk = CorrelatorKey {
                        m: base.with(a - 1, nu),
                        p: p.clone(),
                        degree: key.degree,
                    };
                    v -= int(k as i64) * x * self.evaluate_alt(&kk)?;
                }
            }
            return Ok(v);
        }
        // Pure descendants.
        let top = key.m.max_level().unwrap_or(0);
        if top == 0 {
            let classes: Vec<usize> = key.m.flat().iter().map(|e| e.1).collect();
            return self.gw.pure_gw(&classes, key.degree);
        }
        if key.n() >= 3 {
            let alpha = key.m.entries().find(|e| e.0 == top).unwrap().1;
            let others = key.m.without(top, alpha)?.flat();
            let c = self.apply_trr_psi(key, (top, alpha), others[0], others[1])?;
            return self.evaluate_combination_alt(&c);
        }
        let h = self.divisor_for(key)?;
        let dh = t.integral_over_beta(h, Degree(key.degree))?;
        Ok(self.evaluate_alt(&key.with_kappa(-1, h))? / dh)
    }

    /// `∫` of a tree sum against marked-point insertions `label ↦ τ_a^α`.
    ///
    /// Each tree contributes `coef / |Aut|` times the sum over node classes
    /// of the product of its vertex correlators.
    pub fn integrate_tree_sum(
        &self,
        sum: &TreeSum,
        insertions: &BTreeMap<u32, (i32, usize)>,
        extra_kappa: &MultiIndex,
    ) -> Result<Rational> {
        let t = &*self.target;
        let eta = t.inverse_pairing_support();
        let mut total = Rational::zero();
        for (tree, coef) in sum.iter() {
            if tree.tail_labels() != insertions.keys().copied().collect::<Vec<_>>() {
                return Err(Error::InvalidTree(
                    "insertions must match the tree's tails".into(),
                ));
            }
            // Per vertex: a list of (coefficient, τ-index, κ-index) alternatives.
            let mut vertex_parts = Vec::new();
            for (v, vert) in tree.vertices.iter().enumerate() {
                let mut levels: BTreeMap<u32, i32> = BTreeMap::new();
                let mut classes: BTreeMap<u32, Vec<Rational>> = BTreeMap::new();
                for l in tree.tails_at(v) {
                    let (a, al) = insertions[&l];
                    levels.insert(l, a);
                    let mut e = vec![Rational::zero(); t.rank()];
                    e[al] = Rational::one();
                    classes.insert(l, e);
                }
                let mut p = if v == 0 { extra_kappa.clone() } else { MultiIndex::kappa() };
                for d in &vert.decor {
                    match d {
                        Decoration::Psi { tail, power } => {
                            *levels.get_mut(tail).unwrap() += *power as i32;
                        }
                        Decoration::Kappa { a, alpha, .. } => p.add(*a, *alpha, 1),
                        Decoration::Ev { tail, alpha, .. } => {
                            let e = classes.get_mut(tail).unwrap();
                            *e = t.mul_vec(e, *alpha);
                        }
                        Decoration::Token { label, .. } => {
                            return Err(Error::NotApplicable(format!(
                                "cannot integrate opaque decoration {label}"
                            )))
                        }
                    }
                }
                // Expand the tail classes into basis monomials.
                let mut parts = vec![(Rational::one(), MultiIndex::tau())];
                for (l, e) in &classes {
                    let mut next = Vec::new();
                    for (c, m) in &parts {
                        for (nu, x) in e.iter().enumerate() {
                            if !x.is_zero() {
                                next.push((c * x, m.with(levels[l], nu)));
                            }
                        }
                    }
                    parts = next;
                }
                vertex_parts.push((parts, p, vert.beta));
            }
            // Sum over node classes.
            let ne = tree.edges.len();
            let mut assignment = vec![0usize; ne];
            let mut acc = Rational::zero();
            loop {
                let mut weight = Rational::one();
                for &k in &assignment {
                    weight *= &eta[k].2;
                }
                let mut value = weight;
                for (v, (parts, p, beta)) in vertex_parts.iter().enumerate() {
                    let mut node = MultiIndex::tau();
                    for (i, e) in tree.edges.iter().enumerate() {
                        let (s1, s2, _) = &eta[assignment[i]];
                        if e[0] == v {
                            node.add(0, *s1, 1);
                        }
                        if e[1] == v {
                            node.add(0, *s2, 1);
                        }
                    }
                    let mut vs = Rational::zero();
                    for (c, m) in parts {
                        let k = CorrelatorKey {
                            m: m.plus(&node),
                            p: p.clone(),
                            degree: *beta,
                        };
                        vs += c * self.evaluate(&k)?;
                    }
                    value *= vs;
                    if value.is_zero() {
                        break;
                    }
                }
                acc += value;
                // Next assignment.
                let mut i = 0;
                while i < ne {
                    assignment[i] += 1;
                    if assignment[i] < eta.len() {
                        break;
                    }
                    assignment[i] = 0;
                    i += 1;
                }
                if i == ne {
                    break;
                }
            }
            total += coef * acc / Rational::from_integer(tree.aut_order());
        }
        Ok(total)
    }
}

/// JSON form of a correlator request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelatorSpec {
    pub target: TargetConfig,
    pub degree: u32,
    #[serde(default)]
    pub tau: Vec<[i64; 3]>,
    #[serde(default)]
    pub kappa: Vec<[i64; 3]>,
}

impl CorrelatorSpec {
    pub fn key(&self) -> Result<CorrelatorKey> {
        fn conv(v: &[[i64; 3]], min: i64, what: &str) -> Result<Vec<(i32, usize, u32)>> {
            v.iter()
                .map(|&[a, al, k]| {
                    if a < min || al < 0 || k < 0 {
                        return Err(Error::InvalidCorrelator(format!(
                            "bad {what} entry [{a}, {al}, {k}]"
                        )));
                    }
                    Ok((a as i32, al as usize, k as u32))
                })
                .collect()
        }
        CorrelatorKey::from_lists(
            &conv(&self.tau, 0, "tau")?,
            &conv(&self.kappa, -1, "kappa")?,
            self.degree,
        )
    }
}

/// JSON response for a correlator request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrelatorReport {
    pub value: String,
    pub expected_dimension: Option<i64>,
    pub reductions: usize,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    fn engine(r: usize) -> CorrelatorEngine {
        CorrelatorEngine::new(Arc::new(TargetModel::projective_space(r)))
    }

    fn key(tau: &[(i32, usize, u32)], kappa: &[(i32, usize, u32)], d: u32) -> CorrelatorKey {
        CorrelatorKey::from_lists(tau, kappa, d).unwrap()
    }

    #[test]
    fn multi_index_norms() {
        let m = MultiIndex::from_entries(-1, [(2, 1, 2), (0, 0, 1), (-1, 1, 3)]).unwrap();
        assert_eq!(m.norm(), 3);
        assert_eq!(m.weight(), 4);
        assert_eq!(m.len(), 6);
        assert!(MultiIndex::from_entries(0, [(-1, 0, 1)]).is_err());
        let s = MultiIndex::from_entries(0, [(0, 1, 2)]).unwrap().splits(|_| true);
        let coefs: Vec<BigInt> = s.iter().map(|x| x.2.clone()).collect();
        assert_eq!(coefs, vec![1.into(), 2.into(), 1.into()]);
    }

    #[test]
    fn selection_examples() {
        let e = engine(1);
        assert!(e.selection(&key(&[(0, 1, 2)], &[], 1)));
        assert!(!e.selection(&key(&[(0, 0, 3)], &[], 0)));
        assert!(e.selection(&key(&[], &[(0, 1, 2)], 2)));
    }

    #[test]
    fn cp1_values() {
        let e = engine(1);
        assert_eq!(e.evaluate(&key(&[(0, 0, 2), (0, 1, 1)], &[], 0)).unwrap(), int(1));
        assert_eq!(e.evaluate(&key(&[], &[(0, 1, 2)], 2)).unwrap(), rat(1, 2));
        assert_eq!(e.evaluate(&key(&[], &[(0, 1, 2)], 1)).unwrap(), int(0));
        assert_eq!(e.evaluate(&key(&[], &[], 1)).unwrap(), int(1));
        assert_eq!(e.evaluate(&key(&[], &[(0, 1, 4)], 3)).unwrap(), int(4));
        assert_eq!(e.evaluate(&key(&[], &[(0, 1, 6)], 4)).unwrap(), int(120));
    }

    #[test]
    fn kappa_zero_zero_counts_points() {
        let e = engine(1);
        assert_eq!(e.evaluate(&key(&[(0, 1, 2)], &[(0, 0, 1)], 1)).unwrap(), int(0));
        assert_eq!(e.evaluate(&key(&[(0, 0, 2), (0, 1, 1)], &[(0, 0, 1)], 0)).unwrap(), int(1));
        assert_eq!(e.evaluate(&key(&[(0, 1, 3)], &[(0, 0, 1)], 1)).unwrap(), int(1));
    }

    #[test]
    fn lift() {
        let e = engine(1);
        let k = key(&[(0, 1, 2)], &[(-1, 1, 1)], 1);
        assert_eq!(e.lift_kappa_minus_one(&k).unwrap(), (vec![1, 1, 1], 1));
        assert_eq!(e.evaluate(&k).unwrap(), int(1));
        assert!(e.lift_kappa_minus_one(&key(&[(1, 1, 1)], &[], 1)).is_err());
        assert_eq!(e.evaluate(&key(&[(0, 0, 3)], &[(-1, 1, 1)], 0)).unwrap(), int(0));
    }

    #[test]
    fn puncture_dilaton_shapes() {
        let e = engine(1);
        let k = key(&[(1, 0, 1), (0, 1, 2)], &[], 1);
        let c = e.apply_puncture_dilaton(&k, (1, 0)).unwrap();
        assert!(e.evaluate_combination(&c).unwrap().is_zero());
        assert!(e.evaluate(&k).unwrap().is_zero());
        let trr = e.apply_trr_psi(&k, (1, 0), (0, 1), (0, 1)).unwrap();
        assert_eq!(e.evaluate_combination(&trr).unwrap(), e.evaluate(&k).unwrap());

        let bad = key(&[(1, 0, 1), (0, 1, 2)], &[], 0);
        assert!(matches!(
            e.apply_puncture_dilaton(&bad, (1, 0)),
            Err(Error::NotApplicable(_))
        ));
        let mixed = key(&[(0, 1, 1), (1, 1, 1)], &[], 1);
        assert!(e.apply_puncture_dilaton(&mixed, (0, 1)).is_err());
    }

    #[test]
    fn alt_route_agrees() {
        let e = engine(1);
        for k in [
            key(&[], &[(0, 1, 2)], 2),
            key(&[(1, 1, 1), (0, 1, 2)], &[], 2),
            key(&[(2, 0, 1), (0, 1, 3)], &[], 2),
            key(&[(0, 1, 1)], &[(1, 1, 1)], 2),
            key(&[], &[(0, 1, 4)], 3),
        ] {
            assert_eq!(e.evaluate(&k).unwrap(), e.evaluate_alt(&k).unwrap(), "{k}");
        }
    }

    #[test]
    fn spec_json() {
        let s: CorrelatorSpec = serde_json::from_str(
            r#"{"target":{"type":"projective_space","r":1},"degree":0,"tau":[[0,0,2],[0,1,1]],"kappa":[]}"#,
        )
        .unwrap();
        assert_eq!(s.key().unwrap(), key(&[(0, 0, 2), (0, 1, 1)], &[], 0));
    }
}
