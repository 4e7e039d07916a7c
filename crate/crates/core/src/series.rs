//! Truncated multivariate formal power series over exact rationals.
//!
//! A [`QSeries`] lives over a [`VarRegistry`] of graded formal variables
//! (`x^α`, `t_a^α`, `s_a^α` and the Novikov variable `q`) and carries a
//! [`Truncation`]: a cap on the exponent of every variable plus an optional
//! cap on the total exponent of the non-`q` variables. Every result is
//! re-truncated, so a coefficient read inside the bounds is always exact.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{int, parse_pq, to_pq, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarKind {
    X,
    T,
    S,
    Q,
}

/// A graded formal variable. `x^α` is shorthand for `t_0^α`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    /// Subscript `a` (level); zero for `x` and `q`.
    pub level: i32,
    /// Superscript `α` (basis index); zero for `q`.
    pub class: usize,
    pub grading: i64,
}

impl Variable {
    /// `x^α = t_0^α`, grading `|e_α| - 2`.
    pub fn x(class: usize, class_grading: i64) -> Self {
        Variable {
            name: format!("x^{class}"),
            kind: VarKind::X,
            level: 0,
            class,
            grading: class_grading - 2,
        }
    }

    /// `t_a^α`, grading `2a - 2 + |e_α|`.
    pub fn t(level: i32, class: usize, class_grading: i64) -> Self {
        Variable {
            name: format!("t_{level}^{class}"),
            kind: VarKind::T,
            level,
            class,
            grading: 2 * level as i64 - 2 + class_grading,
        }
    }

    /// `s_a^α`, grading `2a + |e_α|`.
    pub fn s(level: i32, class: usize, class_grading: i64) -> Self {
        Variable {
            name: format!("s_{level}^{class}"),
            kind: VarKind::S,
            level,
            class,
            grading: 2 * level as i64 + class_grading,
        }
    }

    /// The Novikov variable; `q^d` has grading `-2 c_1 d`.
    pub fn q(c1_degree: i64) -> Self {
        Variable {
            name: "q".to_string(),
            kind: VarKind::Q,
            level: 0,
            class: 0,
            grading: -2 * c1_degree,
        }
    }

    /// Identity used for duplicate detection; `x^α` and `t_0^α` coincide.
    fn identity(&self) -> (VarKind, i32, usize) {
        match self.kind {
            VarKind::X => (VarKind::T, 0, self.class),
            k => (k, self.level, self.class),
        }
    }

    /// True for `x^α` and `t_0^α`.
    pub fn is_primary(&self) -> bool {
        matches!(self.kind, VarKind::X) || (self.kind == VarKind::T && self.level == 0)
    }
}

/// Ordered list of distinct, even-graded variables.
#[derive(Debug, Clone)]
pub struct VarRegistry {
    vars: Arc<Vec<Variable>>,
    q_index: Option<usize>,
}

impl PartialEq for VarRegistry {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.vars, &other.vars) || self.vars == other.vars
    }
}

impl Eq for VarRegistry {}

impl VarRegistry {
    pub fn new(vars: Vec<Variable>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        let mut q_index = None;
        for (i, v) in vars.iter().enumerate() {
            if v.grading % 2 != 0 {
                return Err(Error::OddGrading(v.name.clone(), v.grading));
            }
            if !seen.insert(v.identity()) {
                return Err(Error::DuplicateVariable(v.name.clone()));
            }
            if v.kind == VarKind::Q {
                q_index = Some(i);
            }
        }
        Ok(VarRegistry {
            vars: Arc::new(vars),
            q_index,
        })
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn vars(&self) -> &[Variable] {
        &self.vars
    }

    pub fn q_index(&self) -> Option<usize> {
        self.q_index
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.vars
            .iter()
            .position(|v| v.name == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    /// Finds a variable by kind, level and class (`x^α` matches `t_0^α`).
    pub fn find(&self, kind: VarKind, level: i32, class: usize) -> Option<usize> {
        let probe = Variable {
            name: String::new(),
            kind,
            level,
            class,
            grading: 0,
        }
        .identity();
        self.vars.iter().position(|v| v.identity() == probe)
    }

    /// Total grading of a monomial.
    pub fn grading(&self, exp: &[u32]) -> i64 {
        exp.iter()
            .zip(self.vars.iter())
            .map(|(&e, v)| e as i64 * v.grading)
            .sum()
    }
}

/// Per-variable exponent caps plus an optional cap on the total exponent of
/// the non-`q` variables.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Truncation {
    pub caps: Vec<u32>,
    pub max_total: Option<u32>,
}

impl Truncation {
    pub fn new(caps: Vec<u32>, max_total: Option<u32>) -> Self {
        Truncation { caps, max_total }
    }

    pub fn uniform(nvars: usize, cap: u32) -> Self {
        Truncation::new(vec![cap; nvars], None)
    }

    fn admits(&self, exp: &[u32], q_index: Option<usize>) -> bool {
        if exp.iter().zip(&self.caps).any(|(e, c)| e > c) {
            return false;
        }
        match self.max_total {
            Some(m) => non_q_total(exp, q_index) <= m,
            None => true,
        }
    }

    /// True when every monomial admitted by `self` is admitted by `other`.
    pub fn is_within(&self, other: &Truncation) -> bool {
        self.caps.len() == other.caps.len()
            && self.caps.iter().zip(&other.caps).all(|(a, b)| a <= b)
            && match (self.max_total, other.max_total) {
                (_, None) => true,
                (Some(a), Some(b)) => a <= b,
                (None, Some(_)) => false,
            }
    }

    /// Componentwise minimum.
    pub fn meet(&self, other: &Truncation) -> Truncation {
        let caps = self
            .caps
            .iter()
            .zip(&other.caps)
            .map(|(a, b)| *a.min(b))
            .collect();
        let max_total = match (self.max_total, other.max_total) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        Truncation { caps, max_total }
    }

    /// Lowers every non-`q` cap (and the total cap) by `k`.
    pub fn lowered(&self, k: u32, q_index: Option<usize>) -> Truncation {
        let caps = self
            .caps
            .iter()
            .enumerate()
            .map(|(i, c)| if Some(i) == q_index { *c } else { c.saturating_sub(k) })
            .collect();
        Truncation {
            caps,
            max_total: self.max_total.map(|m| m.saturating_sub(k)),
        }
    }
}

/// Every exponent vector admitted by `trunc`, in lexicographic order.
pub fn enumerate_monomials(trunc: &Truncation, q_index: Option<usize>) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut cur = vec![0u32; trunc.caps.len()];
    fn rec(
        i: usize,
        used: u32,
        cur: &mut Vec<u32>,
        trunc: &Truncation,
        q_index: Option<usize>,
        out: &mut Vec<Vec<u32>>,
    ) {
        if i == cur.len() {
            out.push(cur.clone());
            return;
        }
        let mut cap = trunc.caps[i];
        if Some(i) != q_index {
            if let Some(m) = trunc.max_total {
                cap = cap.min(m - used);
            }
        }
        for e in 0..=cap {
            cur[i] = e;
            let u = if Some(i) == q_index { used } else { used + e };
            rec(i + 1, u, cur, trunc, q_index, out);
        }
        cur[i] = 0;
    }
    rec(0, 0, &mut cur, trunc, q_index, &mut out);
    out
}

fn non_q_total(exp: &[u32], q_index: Option<usize>) -> u32 {
    exp.iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != q_index)
        .map(|(_, e)| *e)
        .sum()
}

/// Truncated formal power series with exact rational coefficients.
///
/// Terms are kept in a `BTreeMap`, so iteration is lexicographic in the
/// exponent vector and zero coefficients are never stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QSeries {
    reg: VarRegistry,
    trunc: Truncation,
    terms: BTreeMap<Vec<u32>, Rational>,
}

impl QSeries {
    pub fn zero(reg: &VarRegistry, trunc: &Truncation) -> Self {
        assert_eq!(reg.len(), trunc.caps.len(), "truncation arity");
        QSeries {
            reg: reg.clone(),
            trunc: trunc.clone(),
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(reg: &VarRegistry, trunc: &Truncation, c: Rational) -> Self {
        let mut s = QSeries::zero(reg, trunc);
        s.add_term(vec![0; reg.len()], c);
        s
    }

    pub fn one(reg: &VarRegistry, trunc: &Truncation) -> Self {
        QSeries::constant(reg, trunc, Rational::one())
    }

    /// The series consisting of the single variable `var`.
    pub fn var(reg: &VarRegistry, trunc: &Truncation, var: usize) -> Self {
        QSeries::monomial(reg, trunc, unit_exp(reg.len(), var), Rational::one())
    }

    pub fn monomial(reg: &VarRegistry, trunc: &Truncation, exp: Vec<u32>, c: Rational) -> Self {
        let mut s = QSeries::zero(reg, trunc);
        s.add_term(exp, c);
        s
    }

    /// Builds a series from raw terms, dropping anything outside the bounds.
    pub fn from_terms(
        reg: &VarRegistry,
        trunc: &Truncation,
        terms: impl IntoIterator<Item = (Vec<u32>, Rational)>,
    ) -> Self {
        let mut s = QSeries::zero(reg, trunc);
        for (e, c) in terms {
            s.add_term(e, c);
        }
        s
    }

    pub fn registry(&self) -> &VarRegistry {
        &self.reg
    }

    pub fn truncation(&self) -> &Truncation {
        &self.trunc
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, &Rational)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Adds `c` to the coefficient of `exp` (ignored outside the truncation).
    pub fn add_term(&mut self, exp: Vec<u32>, c: Rational) {
        debug_assert_eq!(exp.len(), self.reg.len());
        if c.is_zero() || !self.trunc.admits(&exp, self.reg.q_index) {
            return;
        }
        match self.terms.entry(exp) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    fn check_compatible(&self, other: &QSeries) -> Result<()> {
        if self.reg != other.reg {
            return Err(Error::RegistryMismatch);
        }
        if self.trunc != other.trunc {
            return Err(Error::TruncationMismatch);
        }
        Ok(())
    }

    pub fn add(&self, other: &QSeries) -> Result<QSeries> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn sub(&self, other: &QSeries) -> Result<QSeries> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), -c.clone());
        }
        Ok(out)
    }

    pub fn neg(&self) -> QSeries {
        self.scale(&-Rational::one())
    }

    pub fn scale(&self, c: &Rational) -> QSeries {
        if c.is_zero() {
            return QSeries::zero(&self.reg, &self.trunc);
        }
        QSeries {
            reg: self.reg.clone(),
            trunc: self.trunc.clone(),
            terms: self.terms.iter().map(|(e, v)| (e.clone(), v * c)).collect(),
        }
    }

    pub fn mul(&self, other: &QSeries) -> Result<QSeries> {
        self.check_compatible(other)?;
        let q = self.reg.q_index;
        // Sort the right factor by total degree so the inner loop can stop early.
        let mut rhs: Vec<(u32, &Vec<u32>, &Rational)> = other
            .terms
            .iter()
            .map(|(e, c)| (non_q_total(e, q), e, c))
            .collect();
        rhs.sort_by_key(|t| t.0);
        let mut acc: BTreeMap<Vec<u32>, Rational> = BTreeMap::new();
        let mut buf = vec![0u32; self.reg.len()];
        for (ea, ca) in &self.terms {
            let ta = non_q_total(ea, q);
            'inner: for (tb, eb, cb) in &rhs {
                if let Some(m) = self.trunc.max_total {
                    if ta + tb > m {
                        break;
                    }
                }
                for i in 0..buf.len() {
                    let s = ea[i] + eb[i];
                    if s > self.trunc.caps[i] {
                        continue 'inner;
                    }
                    buf[i] = s;
                }
                let prod = ca * *cb;
                match acc.get_mut(&buf) {
                    Some(v) => *v += prod,
                    None => {
                        acc.insert(buf.clone(), prod);
                    }
                }
            }
        }
        acc.retain(|_, v| !v.is_zero());
        Ok(QSeries {
            reg: self.reg.clone(),
            trunc: self.trunc.clone(),
            terms: acc,
        })
    }

    pub fn pow(&self, k: u32) -> Result<QSeries> {
        let mut out = QSeries::one(&self.reg, &self.trunc);
        for _ in 0..k {
            out = out.mul(self)?;
        }
        Ok(out)
    }

    pub fn constant_term(&self) -> Rational {
        self.terms
            .get(&vec![0; self.reg.len()])
            .cloned()
            .unwrap_or_else(Rational::zero)
    }

    /// `Σ_k a^k / k!`; requires a zero constant term.
    pub fn exp(&self) -> Result<QSeries> {
        if !self.constant_term().is_zero() {
            return Err(Error::NonzeroConstantTerm);
        }
        // a^k has total exponent ≥ k, so the sum stops at the largest
        // admissible total exponent.
        let cap_sum: u32 = self.trunc.caps.iter().sum();
        let bound = match (self.trunc.max_total, self.reg.q_index) {
            (Some(m), Some(qi)) => cap_sum.min(m + self.trunc.caps[qi]),
            (Some(m), None) => cap_sum.min(m),
            (None, _) => cap_sum,
        };
        let mut out = QSeries::one(&self.reg, &self.trunc);
        let mut term = out.clone();
        for k in 1..=bound {
            term = term.mul(self)?.scale(&Rational::new(1.into(), k.into()));
            if term.is_zero() {
                break;
            }
            for (e, c) in &term.terms {
                out.add_term(e.clone(), c.clone());
            }
        }
        Ok(out)
    }

    /// Coefficient of `exp`; an error if the monomial is outside the bounds.
    pub fn coefficient(&self, exp: &[u32]) -> Result<Rational> {
        if exp.len() != self.reg.len() {
            return Err(Error::ArityMismatch {
                expected: self.reg.len(),
                got: exp.len(),
            });
        }
        if !self.trunc.admits(exp, self.reg.q_index) {
            return Err(Error::OutsideTruncation(exp.to_vec()));
        }
        Ok(self.terms.get(exp).cloned().unwrap_or_else(Rational::zero))
    }

    /// Coefficient addressed by variable names, e.g. `[("q", 2), ("s_0^1", 2)]`.
    pub fn coefficient_of(&self, powers: &[(&str, u32)]) -> Result<Rational> {
        let mut exp = vec![0; self.reg.len()];
        for (name, p) in powers {
            exp[self.reg.index_of(name)?] += p;
        }
        self.coefficient(&exp)
    }

    /// Formal `∂/∂var`; the cap of `var` (and the total cap) drop by one.
    pub fn partial_derivative(&self, var: usize) -> Result<QSeries> {
        if var >= self.reg.len() {
            return Err(Error::UnknownVariable(format!("#{var}")));
        }
        let mut trunc = self.trunc.clone();
        trunc.caps[var] = trunc.caps[var].saturating_sub(1);
        if Some(var) != self.reg.q_index {
            trunc.max_total = trunc.max_total.map(|m| m.saturating_sub(1));
        }
        let mut out = QSeries::zero(&self.reg, &trunc);
        for (e, c) in &self.terms {
            if e[var] == 0 {
                continue;
            }
            let mut e2 = e.clone();
            e2[var] -= 1;
            out.add_term(e2, c * int(e[var] as i64));
        }
        Ok(out)
    }

    pub fn partial(&self, name: &str) -> Result<QSeries> {
        self.partial_derivative(self.reg.index_of(name)?)
    }

    /// `q ∂/∂q`; the truncation is unchanged.
    pub fn q_log_derivative(&self) -> Result<QSeries> {
        let qi = self
            .reg
            .q_index
            .ok_or_else(|| Error::UnknownVariable("q".to_string()))?;
        let mut out = QSeries::zero(&self.reg, &self.trunc);
        for (e, c) in &self.terms {
            if e[qi] > 0 {
                out.add_term(e.clone(), c * int(e[qi] as i64));
            }
        }
        Ok(out)
    }

    /// Multiplies by a single variable (terms pushed past the caps drop).
    pub fn mul_var(&self, var: usize) -> QSeries {
        let mut out = QSeries::zero(&self.reg, &self.trunc);
        for (e, c) in &self.terms {
            let mut e2 = e.clone();
            e2[var] += 1;
            out.add_term(e2, c.clone());
        }
        out
    }

    /// Restricts to a smaller truncation.
    pub fn retruncate(&self, trunc: &Truncation) -> Result<QSeries> {
        if !trunc.is_within(&self.trunc) {
            return Err(Error::TruncationMismatch);
        }
        Ok(QSeries::from_terms(
            &self.reg,
            trunc,
            self.terms.iter().map(|(e, c)| (e.clone(), c.clone())),
        ))
    }

    /// Sets the variable to zero (drops every term containing it).
    pub fn set_zero(&self, var: usize) -> QSeries {
        QSeries {
            reg: self.reg.clone(),
            trunc: self.trunc.clone(),
            terms: self
                .terms
                .iter()
                .filter(|(e, _)| e[var] == 0)
                .map(|(e, c)| (e.clone(), c.clone()))
                .collect(),
        }
    }

    /// The set of total gradings of stored monomials.
    pub fn gradings(&self) -> std::collections::BTreeSet<i64> {
        self.terms.keys().map(|e| self.reg.grading(e)).collect()
    }

    /// Human-readable monomial, e.g. `q^2·(s_0^1)^2`.
    pub fn monomial_name(&self, exp: &[u32]) -> String {
        let parts: Vec<String> = exp
            .iter()
            .zip(self.reg.vars())
            .filter(|(e, _)| **e > 0)
            .map(|(e, v)| match e {
                1 => v.name.clone(),
                _ if v.kind == VarKind::Q => format!("q^{e}"),
                _ => format!("({})^{e}", v.name),
            })
            .collect();
        if parts.is_empty() {
            "1".to_string()
        } else {
            parts.join("·")
        }
    }

    pub fn to_json(&self) -> SeriesJson {
        SeriesJson {
            vars: self.reg.vars().to_vec(),
            truncation: Some(self.trunc.clone()),
            terms: self
                .terms
                .iter()
                .map(|(e, c)| TermJson {
                    exp: e.clone(),
                    coef: to_pq(c),
                })
                .collect(),
        }
    }

    pub fn from_json(j: &SeriesJson) -> Result<QSeries> {
        let reg = VarRegistry::new(j.vars.clone())?;
        let trunc = match &j.truncation {
            Some(t) => t.clone(),
            None => {
                let mut caps = vec![0; reg.len()];
                for t in &j.terms {
                    for (c, e) in caps.iter_mut().zip(&t.exp) {
                        *c = (*c).max(*e);
                    }
                }
                Truncation::new(caps, None)
            }
        };
        if trunc.caps.len() != reg.len() {
            return Err(Error::Parse("truncation arity".into()));
        }
        let mut s = QSeries::zero(&reg, &trunc);
        for t in &j.terms {
            if t.exp.len() != reg.len() {
                return Err(Error::ArityMismatch {
                    expected: reg.len(),
                    got: t.exp.len(),
                });
            }
            s.add_term(t.exp.clone(), parse_pq(&t.coef)?);
        }
        Ok(s)
    }
}

impl fmt::Display for QSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(e, c)| format!("({})·{}", crate::rational::to_short(c), self.monomial_name(e)))
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

fn unit_exp(n: usize, i: usize) -> Vec<u32> {
    let mut e = vec![0; n];
    e[i] = 1;
    e
}

/// Wire form: `{"vars": [...], "terms": [{"exp": [..], "coef": "p/q"}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesJson {
    pub vars: Vec<Variable>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<Truncation>,
    pub terms: Vec<TermJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermJson {
    pub exp: Vec<u32>,
    pub coef: String,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    fn reg_xq() -> VarRegistry {
        VarRegistry::new(vec![
            Variable::x(0, 0),
            Variable::x(1, 2),
            Variable::s(0, 0, 0),
            Variable::q(2),
        ])
        .unwrap()
    }

    #[test]
    fn one_plus_q_times_one_minus_q() {
        let reg = reg_xq();
        let tr = Truncation::new(vec![3, 3, 3, 2], None);
        let one = QSeries::one(&reg, &tr);
        let q = QSeries::var(&reg, &tr, 3);
        let p = one.add(&q).unwrap().mul(&one.sub(&q).unwrap()).unwrap();
        let expected = one.sub(&q.mul(&q).unwrap()).unwrap();
        assert_eq!(p, expected);
        assert_eq!(p.coefficient(&[0, 0, 0, 2]).unwrap(), rat(-1, 1));
    }

    #[test]
    fn additive_identity_and_truncation_drop() {
        let reg = reg_xq();
        let tr = Truncation::new(vec![3, 1, 3, 2], None);
        let x1 = QSeries::var(&reg, &tr, 1);
        assert_eq!(x1.add(&QSeries::zero(&reg, &tr)).unwrap(), x1);
        assert!(x1.mul(&x1).unwrap().is_zero());
    }

    #[test]
    fn exp_taylor_coefficients() {
        let reg = reg_xq();
        let tr = Truncation::new(vec![3, 3, 3, 2], None);
        assert_eq!(
            QSeries::zero(&reg, &tr).exp().unwrap(),
            QSeries::one(&reg, &tr)
        );
        let e = QSeries::var(&reg, &tr, 1).exp().unwrap();
        for k in 0..=3u32 {
            let f = crate::rational::factorial(k);
            assert_eq!(
                e.coefficient(&[0, k, 0, 0]).unwrap(),
                Rational::new(1.into(), f)
            );
        }
        assert_eq!(e.len(), 4);
        let mixed = QSeries::var(&reg, &tr, 2)
            .add(&QSeries::var(&reg, &tr, 1))
            .unwrap()
            .exp()
            .unwrap();
        assert_eq!(mixed.coefficient(&[0, 1, 1, 0]).unwrap(), rat(1, 1));
        assert_eq!(mixed.coefficient(&[0, 2, 1, 0]).unwrap(), rat(1, 2));
    }

    #[test]
    fn exp_rejects_unit() {
        let reg = reg_xq();
        let tr = Truncation::uniform(4, 2);
        assert_eq!(
            QSeries::one(&reg, &tr).exp().unwrap_err(),
            Error::NonzeroConstantTerm
        );
    }

    #[test]
    fn coefficient_contract() {
        let reg = reg_xq();
        let tr = Truncation::new(vec![3, 3, 3, 2], None);
        let s = QSeries::from_terms(
            &reg,
            &tr,
            [(vec![0, 0, 0, 0], rat(1, 1)), (vec![0, 0, 0, 2], rat(3, 1))],
        );
        assert_eq!(s.coefficient_of(&[("q", 2)]).unwrap(), rat(3, 1));
        assert_eq!(s.coefficient(&[1, 0, 0, 0]).unwrap(), rat(0, 1));
        assert!(matches!(
            s.coefficient(&[0, 0, 0, 3]),
            Err(Error::OutsideTruncation(_))
        ));
        assert!(matches!(
            s.coefficient_of(&[("y", 1)]),
            Err(Error::UnknownVariable(_))
        ));
    }

    #[test]
    fn derivatives() {
        let reg = reg_xq();
        let tr = Truncation::new(vec![3, 3, 3, 2], None);
        let f = QSeries::monomial(&reg, &tr, vec![2, 1, 0, 0], rat(1, 2));
        let d = f.partial("x^1").unwrap();
        assert_eq!(d.coefficient(&[2, 0, 0, 0]).unwrap(), rat(1, 2));
        assert_eq!(d.len(), 1);
        assert_eq!(d.truncation().caps, vec![3, 2, 3, 2]);

        let qe = QSeries::var(&reg, &tr, 3)
            .mul(&QSeries::var(&reg, &tr, 1).exp().unwrap())
            .unwrap();
        assert_eq!(qe.q_log_derivative().unwrap(), qe);
    }

    #[test]
    fn leibniz_on_example() {
        let reg = reg_xq();
        let tr = Truncation::new(vec![3, 3, 3, 2], None);
        let one = QSeries::one(&reg, &tr);
        let f = one.add(&QSeries::var(&reg, &tr, 3)).unwrap();
        let g = QSeries::var(&reg, &tr, 0);
        for v in 0..4 {
            let lhs = f.mul(&g).unwrap().partial_derivative(v).unwrap();
            let fd = f.partial_derivative(v).unwrap();
            let gd = g.partial_derivative(v).unwrap();
            let t = fd.truncation().clone();
            let rhs = f
                .retruncate(&t)
                .unwrap()
                .mul(&gd)
                .unwrap()
                .add(&g.retruncate(&t).unwrap().mul(&fd).unwrap())
                .unwrap();
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn registry_rejects_bad_input() {
        assert!(matches!(
            VarRegistry::new(vec![Variable::x(0, 0), Variable::t(0, 0, 0)]),
            Err(Error::DuplicateVariable(_))
        ));
        let mut odd = Variable::x(1, 2);
        odd.grading = 1;
        assert!(matches!(
            VarRegistry::new(vec![odd]),
            Err(Error::OddGrading(_, 1))
        ));
    }

    #[test]
    fn mismatched_operands() {
        let reg = reg_xq();
        let a = QSeries::one(&reg, &Truncation::uniform(4, 2));
        let b = QSeries::one(&reg, &Truncation::uniform(4, 3));
        assert_eq!(a.add(&b).unwrap_err(), Error::TruncationMismatch);
        let reg2 = VarRegistry::new(vec![Variable::x(0, 0)]).unwrap();
        let c = QSeries::one(&reg2, &Truncation::uniform(1, 2));
        assert_eq!(a.mul(&c).unwrap_err(), Error::RegistryMismatch);
    }

    #[test]
    fn total_degree_cap() {
        let reg = reg_xq();
        let tr = Truncation::new(vec![5, 5, 5, 2], Some(2));
        let x = QSeries::var(&reg, &tr, 0).add(&QSeries::var(&reg, &tr, 1)).unwrap();
        let e = x.exp().unwrap();
        assert!(e.terms().all(|(k, _)| k[0] + k[1] + k[2] <= 2));
        assert_eq!(e.len(), 6);
    }

    #[test]
    fn json_round_trip() {
        let reg = reg_xq();
        let tr = Truncation::new(vec![3, 3, 3, 2], None);
        let e = QSeries::var(&reg, &tr, 1).exp().unwrap();
        let text = serde_json::to_string(&e.to_json()).unwrap();
        assert!(text.contains("\"coef\":\"1/6\""));
        let back: SeriesJson = serde_json::from_str(&text).unwrap();
        assert_eq!(QSeries::from_json(&back).unwrap(), e);
    }
}
