//! Generating functions of correlators and the differential equations they
//! satisfy.

use std::sync::Arc;

use num_traits::{One, Zero};
use rayon::prelude::*;

use crate::correlators::{CorrelatorEngine, CorrelatorKey, MultiIndex};
use crate::error::{Error, Result};
use crate::rational::{factorial, int, rat, Rational};
use crate::series::{enumerate_monomials, QSeries, Truncation, VarKind, VarRegistry, Variable};
use crate::target::TargetModel;

/// Which variables are symbolic (all others are set to zero) and where the
/// series is cut off.
#[derive(Debug, Clone)]
pub struct PotentialSpec {
    pub target: Arc<TargetModel>,
    pub registry: VarRegistry,
    pub truncation: Truncation,
}

/// Parses `x^α`, `t_a^α`, `s_a^α` or `q` (braces and a missing `^` are
/// tolerated: `x1`, `s_{-1}^{1}`).
pub fn parse_variable(target: &TargetModel, name: &str) -> Result<Variable> {
    let clean: String = name.chars().filter(|c| !matches!(c, '{' | '}' | ' ')).collect();
    let bad = || Error::UnknownVariable(name.to_string());
    if clean == "q" {
        return Ok(Variable::q(target.c1_degree()));
    }
    let (head, rest) = clean.split_at(1.min(clean.len()));
    let class_of = |s: &str| -> Result<usize> {
        let c: usize = s.parse().map_err(|_| bad())?;
        if c >= target.rank() {
            return Err(bad());
        }
        Ok(c)
    };
    match head {
        "x" => {
            let c = class_of(rest.trim_start_matches('^'))?;
            Ok(Variable::x(c, target.grading(c)))
        }
        "t" | "s" => {
            let rest = rest.strip_prefix('_').ok_or_else(bad)?;
            let (lvl, cls) = rest.split_once('^').ok_or_else(bad)?;
            let level: i32 = lvl.parse().map_err(|_| bad())?;
            let c = class_of(cls)?;
            if head == "t" {
                if level < 0 {
                    return Err(bad());
                }
                Ok(Variable::t(level, c, target.grading(c)))
            } else {
                if level < -1 {
                    return Err(bad());
                }
                Ok(Variable::s(level, c, target.grading(c)))
            }
        }
        _ => Err(bad()),
    }
}

impl PotentialSpec {
    pub fn new(target: Arc<TargetModel>, registry: VarRegistry, truncation: Truncation) -> Result<Self> {
        if truncation.caps.len() != registry.len() {
            return Err(Error::ArityMismatch {
                expected: registry.len(),
                got: truncation.caps.len(),
            });
        }
        for v in registry.vars() {
            if v.kind != VarKind::Q && v.class >= target.rank() {
                return Err(Error::BasisIndex(v.class));
            }
        }
        Ok(PotentialSpec {
            target,
            registry,
            truncation,
        })
    }

    /// Spec from variable names; every variable gets cap `cap`, `q` gets
    /// `qmax` (and is added if absent), and `max_total` bounds the total
    /// non-`q` degree.
    pub fn from_names(
        target: Arc<TargetModel>,
        names: &[&str],
        cap: u32,
        qmax: u32,
        max_total: Option<u32>,
    ) -> Result<Self> {
        let mut vars = names
            .iter()
            .map(|n| parse_variable(&target, n))
            .collect::<Result<Vec<_>>>()?;
        if !vars.iter().any(|v| v.kind == VarKind::Q) {
            vars.push(Variable::q(target.c1_degree()));
        }
        let caps = vars
            .iter()
            .map(|v| if v.kind == VarKind::Q { qmax } else { cap })
            .collect();
        let reg = VarRegistry::new(vars)?;
        PotentialSpec::new(target, reg, Truncation::new(caps, max_total))
    }

    /// The ℂP¹ spec in `x^0, x^1, s_{−1}^1, s_0^0, s_0^1, q`.
    pub fn cp1_five_variable(cap: u32, qmax: u32, max_total: Option<u32>) -> Result<Self> {
        PotentialSpec::from_names(
            Arc::new(TargetModel::projective_space(1)),
            &["x^0", "x^1", "s_-1^1", "s_0^0", "s_0^1"],
            cap,
            qmax,
            max_total,
        )
    }

    fn key_of(&self, exp: &[u32]) -> CorrelatorKey {
        let mut m = MultiIndex::tau();
        let mut p = MultiIndex::kappa();
        let mut d = 0;
        for (v, &e) in self.registry.vars().iter().zip(exp) {
            match v.kind {
                VarKind::Q => d = e,
                VarKind::X => m.add(0, v.class, e),
                VarKind::T => m.add(v.level, v.class, e),
                VarKind::S => p.add(v.level, v.class, e),
            }
        }
        CorrelatorKey { m, p, degree: d }
    }

    pub fn index(&self, name: &str) -> Result<usize> {
        let v = parse_variable(&self.target, name)?;
        self.registry
            .find(v.kind, v.level, v.class)
            .or_else(|| {
                // x^α and t_0^α name the same variable.
                if v.is_primary() {
                    self.registry
                        .find(VarKind::X, 0, v.class)
                        .or_else(|| self.registry.find(VarKind::T, 0, v.class))
                } else {
                    None
                }
            })
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }
}

/// `H = Σ (1/m!)(1/p!) ⟨τ^m κ^p⟩_d t^m s^p q^d` over the active variables.
pub fn build_h_series(spec: &PotentialSpec, engine: &CorrelatorEngine) -> Result<QSeries> {
    if engine.target() != &*spec.target {
        return Err(Error::InvalidTarget("engine and spec use different targets".into()));
    }
    let q = spec.registry.q_index();
    let cells: Vec<(Vec<u32>, CorrelatorKey)> = enumerate_monomials(&spec.truncation, q)
        .into_iter()
        .map(|e| {
            let k = spec.key_of(&e);
            (e, k)
        })
        .filter(|(_, k)| !(k.degree == 0 && k.n() < 3) && engine.selection(k))
        .collect();
    let values: Vec<(Vec<u32>, Rational)> = cells
        .into_par_iter()
        .map(|(e, k)| {
            let v = engine.evaluate(&k)?;
            let denom = e
                .iter()
                .enumerate()
                .filter(|(i, _)| Some(*i) != q)
                .fold(num_bigint::BigInt::one(), |acc, (_, &x)| acc * factorial(x));
            Ok((e, v / Rational::from_integer(denom)))
        })
        .collect::<Result<_>>()?;
    Ok(QSeries::from_terms(&spec.registry, &spec.truncation, values))
}

/// WDVV residuals of `F`, one series per index quadruple `(a, b, c, d)`:
/// `Σ F_{abe} η^{ef} F_{fcd} − F_{bce} η^{ef} F_{fad}`, derivatives taken in
/// the `x^α` (or `t_0^α`) variables. Other variables are parameters.
pub fn wdvv_residual(f: &QSeries, target: &TargetModel) -> Result<Vec<([usize; 4], QSeries)>> {
    let reg = f.registry();
    let idx = (0..target.rank())
        .map(|c| {
            reg.find(VarKind::X, 0, c)
                .or_else(|| reg.find(VarKind::T, 0, c))
                .ok_or_else(|| Error::UnknownVariable(format!("x^{c}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let low = f.truncation().lowered(3, reg.q_index());
    let r = target.rank();
    let eta = target.inverse_pairing_support();
    let mut third = vec![vec![vec![None; r]; r]; r];
    for a in 0..r {
        for b in a..r {
            let fab = f.partial_derivative(idx[a])?.partial_derivative(idx[b])?;
            for (c, &ic) in idx.iter().enumerate().skip(b) {
                let s = fab.partial_derivative(ic)?.retruncate(&low)?;
                for (x, y, z) in [(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)] {
                    third[x][y][z] = Some(s.clone());
                }
            }
        }
    }
    let d3 = |a: usize, b: usize, c: usize| third[a][b][c].as_ref().unwrap();
    let mut out = Vec::new();
    for a in 0..r {
        for b in 0..r {
            for c in 0..r {
                for d in 0..r {
                    let mut res = QSeries::zero(reg, &low);
                    for (e, g, w) in &eta {
                        let lhs = d3(a, b, *e).mul(d3(*g, c, d))?;
                        let rhs = d3(b, c, *e).mul(d3(*g, a, d))?;
                        res = res.add(&lhs.sub(&rhs)?.scale(w))?;
                    }
                    out.push(([a, b, c, d], res));
                }
            }
        }
    }
    Ok(out)
}

/// True when every residual series vanishes.
pub fn residuals_vanish<T>(rs: &[(T, QSeries)]) -> bool {
    rs.iter().all(|(_, s)| s.is_zero())
}

/// One instance of the recursion equations in differential form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PdeFamily {
    /// `∂³H/∂t_{a₁}^{α₁}∂t_{a₂}^{α₂}∂t_{a₃}^{α₃}`, `a₁ ≥ 1`.
    Psi { pivot: (i32, usize), co: [(i32, usize); 2] },
    /// `∂³H/∂s_{a₁}^{α₁}∂t_{a₂}^{α₂}∂t_{a₃}^{α₃}`, `a₁ ≥ 0`.
    Kappa { pivot: (i32, usize), co: [(i32, usize); 2] },
}

/// Derivative in a named variable; derivatives in `s_{−1}^α` with
/// `|e_α| < 2` vanish identically because `κ_{−1,α}` is zero there.
fn d_var(h: &QSeries, spec: &PotentialSpec, kind: &str, level: i32, class: usize) -> Result<Option<QSeries>> {
    let name = format!("{kind}_{level}^{class}");
    match spec.index(&name) {
        Ok(i) => Ok(Some(h.partial_derivative(i)?)),
        Err(e) => {
            if kind == "s" && level == -1 && spec.target.grading(class) < 2 {
                Ok(None)
            } else {
                Err(e)
            }
        }
    }
}

/// Residual of one recursion equation on `h`.
pub fn trr_pde_residual(h: &QSeries, spec: &PotentialSpec, family: PdeFamily) -> Result<QSeries> {
    let t = &*spec.target;
    let q = spec.registry.q_index();
    let low = h.truncation().lowered(3, q);
    let eta = t.inverse_pairing_support();
    let (pivot, co, lead_kind, demoted_kind) = match family {
        PdeFamily::Psi { pivot, co } => {
            if pivot.0 < 1 {
                return Err(Error::NotApplicable("ψ equation needs a₁ ≥ 1".into()));
            }
            (pivot, co, "t", "t")
        }
        PdeFamily::Kappa { pivot, co } => {
            if pivot.0 < 0 {
                return Err(Error::NotApplicable("κ equation needs a₁ ≥ 0".into()));
            }
            (pivot, co, "s", "s")
        }
    };
    let dco = {
        let a = d_var(h, spec, "t", co[0].0, co[0].1)?.unwrap();
        d_var(&a, spec, "t", co[1].0, co[1].1)?.unwrap()
    };
    let lhs = d_var(&dco, spec, lead_kind, pivot.0, pivot.1)?
        .unwrap()
        .retruncate(&low)?;
    let mut res = lhs;
    if let Some(dem) = d_var(h, spec, demoted_kind, pivot.0 - 1, pivot.1)? {
        for (s1, s2, w) in &eta {
            let l = d_var(&dem, spec, "t", 0, *s1)?.unwrap().retruncate(&low)?;
            let r = d_var(&dco, spec, "t", 0, *s2)?.unwrap().retruncate(&low)?;
            res = res.sub(&l.mul(&r)?.scale(w))?;
        }
    }
    if let PdeFamily::Kappa { pivot: (0, a1), .. } = family {
        for (i, v) in spec.registry.vars().iter().enumerate() {
            if !matches!(v.kind, VarKind::X | VarKind::T) {
                continue;
            }
            let level = if v.kind == VarKind::X { 0 } else { v.level };
            let prod = t.cup_product(v.class, a1)?;
            for (nu, c) in prod.iter().enumerate() {
                if c.is_zero() {
                    continue;
                }
                let d = d_var(&dco, spec, "t", level, nu)?.unwrap();
                let term = d.retruncate(&low)?.mul_var(i).scale(c);
                res = res.sub(&term)?;
            }
        }
    }
    Ok(res)
}

/// Residuals of every recursion equation whose variables are all active,
/// labelled by a short description.
pub fn trr_pde_residuals(h: &QSeries, spec: &PotentialSpec) -> Result<Vec<(String, QSeries)>> {
    let mut taus = Vec::new();
    let mut kappas = Vec::new();
    for v in spec.registry.vars() {
        match v.kind {
            VarKind::X => taus.push((0, v.class)),
            VarKind::T => taus.push((v.level, v.class)),
            VarKind::S if v.level >= 0 => kappas.push((v.level, v.class)),
            _ => {}
        }
    }
    let mut fams = Vec::new();
    for (i, &c1) in taus.iter().enumerate() {
        for &c2 in &taus[i..] {
            for &piv in &taus {
                if piv.0 >= 1 && spec.index(&format!("t_{}^{}", piv.0 - 1, piv.1)).is_ok() {
                    fams.push(PdeFamily::Psi { pivot: piv, co: [c1, c2] });
                }
            }
            for &piv in &kappas {
                fams.push(PdeFamily::Kappa { pivot: piv, co: [c1, c2] });
            }
        }
    }
    let mut out = Vec::new();
    for f in fams {
        match trr_pde_residual(h, spec, f) {
            Ok(r) => out.push((format!("{f:?}"), r)),
            Err(Error::UnknownVariable(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// `h_1, …, h_N` of the ℂP¹ closed form.
pub fn cp1_h_sequence(n: usize) -> Vec<Rational> {
    let mut h: Vec<Rational> = Vec::with_capacity(n);
    if n == 0 {
        return h;
    }
    h.push(Rational::one());
    for k in 1..n as u32 {
        // h_{k+1} from h_1..h_k.
        let mut acc = Rational::zero();
        for l in 1..=k {
            let num = factorial(2 * k - 1) * ((l * l) * (k + 1 - l) * (k + 1 - l));
            let den = factorial(2 * l - 2) * factorial(2 * (k - l)) * (k + 1);
            acc += Rational::new(num, den) * &h[l as usize - 1] * &h[(k + 1 - l) as usize - 1];
        }
        h.push(acc);
    }
    h
}

/// `e^{s_0^0}(½(x^0)^2 x^1 + (1/6)(x^0)^3 s_0^1)`: the degree-zero part.
pub fn cp1_h_in(spec: &PotentialSpec) -> Result<QSeries> {
    let (reg, tr) = (&spec.registry, &spec.truncation);
    let x0 = spec.index("x^0")?;
    let x1 = spec.index("x^1")?;
    let mut inner = QSeries::zero(reg, tr);
    let mut e = vec![0; reg.len()];
    e[x0] = 2;
    e[x1] = 1;
    inner.add_term(e, rat(1, 2));
    if let Ok(s01) = spec.index("s_0^1") {
        let mut e = vec![0; reg.len()];
        e[x0] = 3;
        e[s01] = 1;
        inner.add_term(e, rat(1, 6));
    }
    match spec.index("s_0^0") {
        Ok(s00) => QSeries::var(reg, tr, s00).exp()?.mul(&inner),
        Err(_) => Ok(inner),
    }
}

fn var_or_zero(spec: &PotentialSpec, name: &str) -> QSeries {
    match spec.index(name) {
        Ok(i) => QSeries::var(&spec.registry, &spec.truncation, i),
        Err(_) => QSeries::zero(&spec.registry, &spec.truncation),
    }
}

/// `Σ_{n=1}^N e^{−2s_0^0} q̃^n (s_0^1)^{2n−2}/(2n−2)! h_n` with
/// `q̃ = q·exp(s_{−1}^1 + e^{s_0^0}(x^1 + s_0^1 x^0))`, plus the
/// degree-zero part when `with_h_in`. Inactive variables are zero.
pub fn cp1_closed_form_series(n: usize, spec: &PotentialSpec, with_h_in: bool) -> Result<QSeries> {
    cp1_closed_form_with(&cp1_h_sequence(n), spec, with_h_in)
}

/// As [`cp1_closed_form_series`] with explicit `h_n`.
pub fn cp1_closed_form_with(hs: &[Rational], spec: &PotentialSpec, with_h_in: bool) -> Result<QSeries> {
    if spec.target.projective_rank() != Some(1) {
        return Err(Error::InvalidTarget("closed form is specific to ℂP¹".into()));
    }
    let (reg, tr) = (&spec.registry, &spec.truncation);
    let q = QSeries::var(reg, tr, spec.index("q")?);
    let x0 = var_or_zero(spec, "x^0");
    let x1 = var_or_zero(spec, "x^1");
    let sm = var_or_zero(spec, "s_-1^1");
    let s00 = var_or_zero(spec, "s_0^0");
    let s01 = var_or_zero(spec, "s_0^1");
    let es = s00.exp()?;
    let arg = sm.add(&es.mul(&x1.add(&s01.mul(&x0)?)?)?)?;
    let qt = q.mul(&arg.exp()?)?;
    let pre = s00.scale(&int(-2)).exp()?;
    let mut sum = QSeries::zero(reg, tr);
    let mut qt_pow = QSeries::one(reg, tr);
    for (i, h) in hs.iter().enumerate() {
        let n = i as u32 + 1;
        qt_pow = qt_pow.mul(&qt)?;
        if qt_pow.is_zero() {
            break;
        }
        let w = h / Rational::from_integer(factorial(2 * n - 2));
        sum = sum.add(&qt_pow.mul(&s01.pow(2 * n - 2)?)?.scale(&w))?;
    }
    let mut out = pre.mul(&sum)?;
    if with_h_in {
        out = out.add(&cp1_h_in(spec)?)?;
    }
    Ok(out)
}

/// Residuals of `∂H̃/∂x^0 = e^{s_0^0} s_0^1 ∂H̃/∂s_{−1}^1` and
/// `∂H̃/∂x^1 = e^{s_0^0} ∂H̃/∂s_{−1}^1` for the positive-degree part `H̃`.
pub fn cp1_puncture_dilaton_residuals(ht: &QSeries, spec: &PotentialSpec) -> Result<[QSeries; 2]> {
    let low = ht.truncation().lowered(1, spec.registry.q_index());
    let ds = ht.partial("s_-1^1")?.retruncate(&low)?;
    let es = var_or_zero(spec, "s_0^0").exp()?.retruncate(&low)?;
    let s01 = var_or_zero(spec, "s_0^1").retruncate(&low)?;
    let d0 = ht.partial("x^0")?.retruncate(&low)?;
    let d1 = ht.partial("x^1")?.retruncate(&low)?;
    let r0 = d0.sub(&es.mul(&s01)?.mul(&ds)?)?;
    let r1 = d1.sub(&es.mul(&ds)?)?;
    Ok([r0, r1])
}

/// Spec in `x^0, x^1, s_0^1, q` used by [`cp1_penult_residual`].
pub fn cp1_penult_spec(n: usize) -> Result<PotentialSpec> {
    let cap = 2 * n as u32;
    PotentialSpec::from_names(
        Arc::new(TargetModel::projective_space(1)),
        &["x^0", "x^1", "s_0^1"],
        cap,
        n as u32,
        None,
    )
}

/// `∂H̃''/∂s_0^1 − 2 s_0^1 H̃'' H̃''' − x^0 H̃'''`, primes being `q ∂/∂q`,
/// for `H̃` built from `h_1..h_N`.
pub fn cp1_penult_residual(n: usize) -> Result<QSeries> {
    cp1_penult_residual_for(&cp1_h_sequence(n))
}

pub fn cp1_penult_residual_for(hs: &[Rational]) -> Result<QSeries> {
    let spec = cp1_penult_spec(hs.len().max(1))?;
    let ht = cp1_closed_form_with(hs, &spec, false)?;
    let h2 = ht.q_log_derivative()?.q_log_derivative()?;
    let h3 = h2.q_log_derivative()?;
    let low = ht.truncation().lowered(1, spec.registry.q_index());
    let s = spec.index("s_0^1")?;
    let x0 = spec.index("x^0")?;
    let ds = h2.partial_derivative(s)?.retruncate(&low)?;
    let h2 = h2.retruncate(&low)?;
    let h3 = h3.retruncate(&low)?;
    let prod = h2.mul(&h3)?.mul_var(s).scale(&int(2));
    ds.sub(&prod)?.sub(&h3.mul_var(x0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn h_sequence() {
        assert_eq!(cp1_h_sequence(4), vec![int(1), rat(1, 2), int(4), int(120)]);
        assert!(cp1_h_sequence(0).is_empty());
    }

    #[test]
    fn variable_names() {
        let t = TargetModel::projective_space(1);
        assert_eq!(parse_variable(&t, "x1").unwrap().name, "x^1");
        assert_eq!(parse_variable(&t, "s_{-1}^{1}").unwrap().name, "s_-1^1");
        assert_eq!(parse_variable(&t, "t_2^0").unwrap().grading, 2);
        assert!(parse_variable(&t, "x^2").is_err());
        assert!(parse_variable(&t, "s_-2^1").is_err());
        assert!(parse_variable(&t, "y").is_err());
    }

    #[test]
    fn gw_potential_of_cp1() {
        let spec = PotentialSpec::from_names(
            Arc::new(TargetModel::projective_space(1)),
            &["x^0", "x^1"],
            3,
            1,
            None,
        )
        .unwrap();
        let e = CorrelatorEngine::new(spec.target.clone());
        let h = build_h_series(&spec, &e).unwrap();
        let mut expected = QSeries::zero(&spec.registry, &spec.truncation);
        expected.add_term(vec![2, 1, 0], rat(1, 2));
        for k in 0..=3u32 {
            expected.add_term(vec![0, k, 1], Rational::new(1.into(), factorial(k)));
        }
        assert_eq!(h, expected);
        assert!(residuals_vanish(&wdvv_residual(&h, &spec.target).unwrap()));
    }

    #[test]
    fn perturbed_potential_breaks_wdvv() {
        let spec = PotentialSpec::from_names(
            Arc::new(TargetModel::projective_space(1)),
            &["x^0", "x^1"],
            5,
            3,
            None,
        )
        .unwrap();
        let e = CorrelatorEngine::new(spec.target.clone());
        let mut h = build_h_series(&spec, &e).unwrap();
        assert!(residuals_vanish(&wdvv_residual(&h, &spec.target).unwrap()));
        // Rank two: any change depending on x^1 and q alone keeps WDVV.
        let mut g = h.clone();
        g.add_term(vec![0, 3, 1], int(1));
        assert!(residuals_vanish(&wdvv_residual(&g, &spec.target).unwrap()));
        h.add_term(vec![3, 0, 1], int(1));
        assert!(!residuals_vanish(&wdvv_residual(&h, &spec.target).unwrap()));

        let spec = PotentialSpec::from_names(
            Arc::new(TargetModel::projective_space(2)),
            &["x^0", "x^1", "x^2"],
            8,
            2,
            None,
        )
        .unwrap();
        let e = CorrelatorEngine::new(spec.target.clone());
        let mut h = build_h_series(&spec, &e).unwrap();
        assert!(residuals_vanish(&wdvv_residual(&h, &spec.target).unwrap()));
        h.add_term(vec![0, 0, 5, 2], rat(1, 120));
        assert!(!residuals_vanish(&wdvv_residual(&h, &spec.target).unwrap()));
    }

    #[test]
    fn closed_form_leading_terms() {
        let spec = PotentialSpec::cp1_five_variable(4, 2, Some(4)).unwrap();
        let c = cp1_closed_form_series(2, &spec, true).unwrap();
        assert_eq!(c.coefficient_of(&[("q", 1)]).unwrap(), int(1));
        assert_eq!(c.coefficient_of(&[("q", 2), ("s_0^1", 2)]).unwrap(), rat(1, 4));
        let [r0, r1] = cp1_puncture_dilaton_residuals(&cp1_closed_form_series(2, &spec, false).unwrap(), &spec).unwrap();
        assert!(r0.is_zero() && r1.is_zero());
    }

    #[test]
    fn penult() {
        assert!(cp1_penult_residual(1).unwrap().is_zero());
        assert!(cp1_penult_residual(4).unwrap().is_zero());
        let mut hs = cp1_h_sequence(4);
        hs[2] += int(1);
        let r = cp1_penult_residual_for(&hs).unwrap();
        assert!(!r.is_zero());
        let qi = r.registry().q_index().unwrap();
        assert!(r.terms().all(|(e, _)| e[qi] >= 3));
    }
}
