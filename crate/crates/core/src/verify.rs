//! Randomized and exhaustive consistency suites.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::Zero;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::correlators::{CorrelatorEngine, CorrelatorKey, MultiIndex};
use crate::error::{Error, Result};
use crate::potentials::{
    build_h_series, cp1_closed_form_series, cp1_h_sequence, cp1_penult_residual,
    cp1_puncture_dilaton_residuals, trr_pde_residuals, wdvv_residual,
    PotentialSpec,
};
use crate::rational::{int, Rational};
use crate::target::{Degree, TargetModel};
use crate::trees::{
    enumerate_two_vertex_divisors, forgetful_pullback, forgetful_pushforward, pair_divisor,
    psi_boundary_presentation, DecoratedTree, Decoration, SplitConstraints, Tail, TreeSum, Vertex,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Wdvv,
    Trr,
    Dilaton,
    Cp1,
    Trees,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Suite::Wdvv, Suite::Trr, Suite::Dilaton, Suite::Cp1, Suite::Trees];
}

impl FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wdvv" => Ok(Suite::Wdvv),
            "trr" => Ok(Suite::Trr),
            "dilaton" => Ok(Suite::Dilaton),
            "cp1" => Ok(Suite::Cp1),
            "trees" => Ok(Suite::Trees),
            _ => Err(Error::Parse(format!(
                "unknown suite {s:?} (expected wdvv, trr, dilaton, cp1 or trees)"
            ))),
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Suite::Wdvv => "wdvv",
            Suite::Trr => "trr",
            Suite::Dilaton => "dilaton",
            Suite::Cp1 => "cp1",
            Suite::Trees => "trees",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone)]
pub struct VerifyConfig {
    pub suite: Suite,
    /// Targets `ℙʳ` to exercise; suites that are specific to ℂP¹ ignore it.
    pub ranks: Vec<usize>,
    pub qmax: u32,
    pub samples: usize,
    pub seed: u64,
}

impl VerifyConfig {
    pub fn new(suite: Suite) -> Self {
        VerifyConfig {
            suite,
            ranks: vec![1, 2],
            qmax: 3,
            samples: 50,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub seed: u64,
    pub checks: usize,
    pub failures: Vec<String>,
}

impl SuiteReport {
    fn new(suite: Suite, seed: u64) -> Self {
        SuiteReport {
            suite: suite.to_string(),
            seed,
            ..Default::default()
        }
    }

    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.failures.push(what());
        }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

pub fn run_suite(cfg: &VerifyConfig) -> Result<SuiteReport> {
    match cfg.suite {
        Suite::Wdvv => wdvv_suite(cfg),
        Suite::Trr => trr_suite(cfg),
        Suite::Dilaton => dilaton_suite(cfg),
        Suite::Cp1 => cp1_suite(cfg),
        Suite::Trees => trees_suite(cfg),
    }
}

/// Keys with `d ≤ max_degree` that pass the selection rule and are stable.
pub fn random_admissible_keys(
    engine: &CorrelatorEngine,
    rng: &mut impl Rng,
    count: usize,
    max_degree: u32,
) -> Vec<CorrelatorKey> {
    let t = engine.target();
    let r = t.rank();
    let c1 = t.c1_degree();
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0;
    while out.len() < count && attempts < 200 * count.max(1) {
        attempts += 1;
        let n = rng.gen_range(0..=4u32);
        let mut m = MultiIndex::tau();
        for _ in 0..n {
            let a = if rng.gen_bool(0.6) { 0 } else { rng.gen_range(1..=2) };
            m.add(a, rng.gen_range(0..r), 1);
        }
        let mut p = MultiIndex::kappa();
        for _ in 0..rng.gen_range(0..=3u32) {
            p.add(rng.gen_range(-1..=1), rng.gen_range(0..r), 1);
        }
        let k = CorrelatorKey { m, p, degree: 0 };
        // Solve the selection rule for the degree.
        let deg = engine.integrand_degree(&k);
        let base = 2 * (t.dim() + n as i64 - 3);
        let rem = deg - base;
        if rem < 0 || rem % (2 * c1) != 0 {
            continue;
        }
        let d = (rem / (2 * c1)) as u32;
        if d > max_degree || (d == 0 && n < 3) {
            continue;
        }
        let k = CorrelatorKey { degree: d, ..k };
        if !out.contains(&k) {
            out.push(k);
        }
    }
    out
}

/// Every applicable recursion on `key`, as `(label, lhs, rhs)`.
pub fn relation_checks(
    engine: &CorrelatorEngine,
    key: &CorrelatorKey,
) -> Result<Vec<(String, Rational, Rational)>> {
    let lhs = engine.evaluate(key)?;
    let mut out = Vec::new();
    let flat = key.m.flat();
    let n = flat.len();
    // ψ recursion: highest-level pivot, two co-pivot choices.
    if n >= 3 {
        if let Some(pos) = (0..n).rev().find(|&i| flat[i].0 >= 1) {
            let rest: Vec<(i32, usize)> = (0..n).filter(|&i| i != pos).map(|i| flat[i]).collect();
            for (c1, c2) in copivot_choices(&rest) {
                let c = engine.apply_trr_psi(key, flat[pos], c1, c2)?;
                out.push((
                    format!("trr-psi pivot {:?} co {:?} {:?}", flat[pos], c1, c2),
                    lhs.clone(),
                    engine.evaluate_combination(&c)?,
                ));
            }
        }
    }
    // κ recursion: each distinct pivot of level ≥ 0.
    if n >= 2 {
        let pivots: Vec<(i32, usize)> = key.p.entries().filter(|e| e.0 >= 0).map(|e| (e.0, e.1)).collect();
        for piv in pivots {
            for (c1, c2) in copivot_choices(&flat) {
                let c = engine.apply_trr_kappa(key, piv, c1, c2)?;
                let label = if piv.0 == 0 { "trr-kappa-0" } else { "trr-kappa" };
                out.push((
                    format!("{label} pivot {piv:?} co {c1:?} {c2:?}"),
                    lhs.clone(),
                    engine.evaluate_combination(&c)?,
                ));
            }
        }
    }
    // Puncture/dilaton for every legal pivot.
    if !(key.degree == 0 && key.n() <= 3) {
        for (a, al, _) in key.m.entries() {
            let rest_top = key.m.without(a, al)?.max_level().unwrap_or(0);
            if a >= 1 || rest_top == 0 {
                let c = engine.apply_puncture_dilaton(key, (a, al))?;
                out.push((
                    format!("puncture-dilaton pivot ({a}, {al})"),
                    lhs.clone(),
                    engine.evaluate_combination(&c)?,
                ));
            }
        }
    }
    Ok(out)
}

fn copivot_choices(v: &[(i32, usize)]) -> Vec<((i32, usize), (i32, usize))> {
    let n = v.len();
    if n < 2 {
        return vec![];
    }
    let mut out = vec![(v[0], v[1])];
    if n >= 3 && (v[n - 2], v[n - 1]) != (v[0], v[1]) {
        out.push((v[n - 2], v[n - 1]));
    }
    out
}

fn engines(ranks: &[usize]) -> Vec<CorrelatorEngine> {
    ranks
        .iter()
        .map(|&r| CorrelatorEngine::new(Arc::new(TargetModel::projective_space(r))))
        .collect()
}

fn trr_suite(cfg: &VerifyConfig) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new(Suite::Trr, cfg.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for e in engines(&cfg.ranks) {
        let keys = random_admissible_keys(&e, &mut rng, cfg.samples, cfg.qmax.min(3));
        let results = keys
            .par_iter()
            .map(|k| -> Result<_> {
                let rel = relation_checks(&e, k)?;
                Ok((k.clone(), rel, e.evaluate(k)?, e.evaluate_alt(k)?))
            })
            .collect::<Result<Vec<_>>>()?;
        for (k, rel, main, alt) in results {
            let name = e.target().name();
            for (label, l, r) in rel {
                rep.check(l == r, || format!("{name} {k}: {label}: {l} ≠ {r}"));
            }
            rep.check(main == alt, || format!("{name} {k}: evaluators disagree: {main} ≠ {alt}"));
        }
    }
    Ok(rep)
}

fn dilaton_suite(cfg: &VerifyConfig) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new(Suite::Dilaton, cfg.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for e in engines(&cfg.ranks) {
        let name = e.target().name();
        let h = e.target().divisor_class().ok_or_else(|| {
            Error::InvalidTarget(format!("{name} has no divisor class"))
        })?;
        for k in random_admissible_keys(&e, &mut rng, cfg.samples, cfg.qmax.min(3)) {
            let v = e.evaluate(&k)?;
            let n = k.n() as i64;
            let mut k0 = k.clone();
            k0.p.add(0, 0, 1);
            let v0 = e.evaluate(&k0)?;
            rep.check(v0 == int(n - 2) * &v, || format!("{name} {k}: κ_0,0 gives {v0}, expected ({n}−2)·{v}"));
            let mut km = k.clone();
            km.p.add(-1, h, 1);
            let vm = e.evaluate(&km)?;
            let d = int(k.degree as i64);
            rep.check(vm == &d * &v, || format!("{name} {k}: κ_−1,h gives {vm}, expected {d}·{v}"));
            rep.check(e.selection(&k) || v.is_zero(), || format!("{name} {k}: nonzero off selection"));
        }
        // β = 0, n < 3 vanish, whatever the insertions.
        for n in 0..3u32 {
            for a in 0..3 {
                let mut m = MultiIndex::tau();
                m.add(a, 0, n);
                let mut p = MultiIndex::kappa();
                p.add(a - 1, 0, 1);
                let k = CorrelatorKey { m, p, degree: 0 };
                let v = e.evaluate(&k)?;
                rep.check(v.is_zero(), || format!("{name} {k} should vanish, got {v}"));
            }
        }
    }
    Ok(rep)
}

/// Truncation wide enough for every nonzero `⟨x…x⟩_d` with `d ≤ qmax`, plus
/// the three derivatives WDVV takes.
pub fn wdvv_spec(r: usize, qmax: u32) -> Result<PotentialSpec> {
    let t = Arc::new(TargetModel::projective_space(r));
    let names: Vec<String> = (0..=r).map(|c| format!("x^{c}")).collect();
    let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
    let cap = (r as u32 + 1) * qmax + r as u32 + 3;
    PotentialSpec::from_names(t, &refs, cap, qmax, Some(cap))
}

fn wdvv_suite(cfg: &VerifyConfig) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new(Suite::Wdvv, cfg.seed);
    for &r in &cfg.ranks {
        let spec = wdvv_spec(r, cfg.qmax)?;
        let e = CorrelatorEngine::new(spec.target.clone());
        let f = build_h_series(&spec, &e)?;
        let g = crate::gw::gw_potential_series(&spec.target, &spec.registry, &spec.truncation)?;
        rep.check(f == g, || format!("P^{r}: H at s = 0 differs from the GW potential"));
        for (quad, res) in wdvv_residual(&f, &spec.target)? {
            rep.check(res.is_zero(), || format!("P^{r}: WDVV residual {quad:?} = {res}"));
        }
        let gr = 2 * (r as i64 - 3);
        let grades = f.gradings();
        rep.check(grades.iter().all(|&g| g == gr), || format!("P^{r}: gradings {grades:?}, expected {gr}"));
    }
    Ok(rep)
}

fn cp1_suite(cfg: &VerifyConfig) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new(Suite::Cp1, cfg.seed);
    let hs = cp1_h_sequence(12);
    // Closed-form coefficients of q^n (s_0^1)^{2n−2}.
    let spec = PotentialSpec::from_names(
        Arc::new(TargetModel::projective_space(1)),
        &["s_0^1"],
        22,
        12,
        None,
    )?;
    let cf = cp1_closed_form_series(12, &spec, false)?;
    for (i, h) in hs.iter().enumerate() {
        let n = i as u32 + 1;
        let c = cf.coefficient_of(&[("q", n), ("s_0^1", 2 * n - 2)])?;
        let want = h / Rational::from_integer(crate::rational::factorial(2 * n - 2));
        rep.check(c == want, || format!("closed form q^{n}: {c} ≠ h_{n}/({})!", 2 * n - 2));
    }
    // Engine values ⟨κ_{0,1}^{2n−2}⟩_n.
    let e = CorrelatorEngine::new(spec.target.clone());
    for n in 1..=cfg.qmax.clamp(1, 5) {
        let k = CorrelatorKey::from_lists(&[], &[(0, 1, 2 * n - 2)], n)?;
        let v = e.evaluate(&k)?;
        rep.check(v == hs[n as usize - 1], || format!("⟨κ_0,1^{}⟩_{n} = {v} ≠ h_{n}", 2 * n - 2));
    }
    // Differential equations through q^6.
    let r = cp1_penult_residual(6)?;
    rep.check(r.is_zero(), || format!("penultimate equation residual {r}"));
    let spec5 = PotentialSpec::cp1_five_variable(6, 6, Some(6))?;
    let ht = cp1_closed_form_series(6, &spec5, false)?;
    for (i, res) in cp1_puncture_dilaton_residuals(&ht, &spec5)?.iter().enumerate() {
        rep.check(res.is_zero(), || format!("puncture/dilaton equation {i}: {res}"));
    }
    // Engine against closed form and its recursion equations.
    let spec = PotentialSpec::cp1_five_variable(4, cfg.qmax.min(3), Some(4))?;
    let e = CorrelatorEngine::new(spec.target.clone());
    let h = build_h_series(&spec, &e)?;
    let cf = cp1_closed_form_series(cfg.qmax.min(3) as usize, &spec, true)?;
    rep.check(h == cf, || "engine H differs from the closed form".into());
    for (label, res) in trr_pde_residuals(&h, &spec)? {
        rep.check(res.is_zero(), || format!("{label}: {res}"));
    }
    Ok(rep)
}

/// Shuffles vertex numbering.
pub fn relabel_vertices(t: &DecoratedTree, rng: &mut impl Rng) -> Result<DecoratedTree> {
    let mut perm: Vec<usize> = (0..t.vertices.len()).collect();
    perm.shuffle(rng);
    t.permute_vertices(&perm)
}

/// A random stable tree on tails `1..=n`.
pub fn random_tree(rng: &mut impl Rng, max_vertices: usize, n: u32) -> Result<DecoratedTree> {
    for _ in 0..1000 {
        let nv = rng.gen_range(1..=max_vertices);
        let vertices: Vec<Vertex> = (0..nv)
            .map(|_| Vertex {
                beta: rng.gen_range(0..=2),
                decor: if rng.gen_bool(0.3) {
                    vec![Decoration::Token {
                        label: "γ".into(),
                        degree: 1,
                        pushforward: false,
                    }]
                } else {
                    vec![]
                },
            })
            .collect();
        let edges: Vec<[usize; 2]> = (1..nv).map(|v| [rng.gen_range(0..v), v]).collect();
        let tails: Vec<Tail> = (1..=n)
            .map(|label| Tail {
                label,
                vertex: rng.gen_range(0..nv),
            })
            .collect();
        if let Ok(t) = DecoratedTree::new(vertices, edges, tails) {
            return Ok(t);
        }
    }
    Err(Error::InvalidTree("could not sample a stable tree".into()))
}

fn trees_suite(cfg: &VerifyConfig) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new(Suite::Trees, cfg.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for g in golden_tree_checks()? {
        rep.check(g.1, || g.0.clone());
    }
    for _ in 0..cfg.samples {
        let n = rng.gen_range(0..=4);
        let t = random_tree(&mut rng, 5, n)?;
        let u = relabel_vertices(&t, &mut rng)?;
        rep.check(t.canonical_form() == u.canonical_form(), || format!("canonical form changed under relabeling: {t}"));
        rep.check(t.aut_order() == u.aut_order(), || format!("aut order changed under relabeling: {t}"));
    }
    Ok(rep)
}

/// Hand-enumerated values for the tree calculus, as `(description, ok)`.
pub fn golden_tree_checks() -> Result<Vec<(String, bool)>> {
    let mut out = Vec::new();
    let mut push = |what: &str, ok: bool| out.push((what.to_string(), ok));
    let v = |beta: u32, decor: Vec<Decoration>| Vertex { beta, decor };
    let tail = |label: u32, vertex: usize| Tail { label, vertex };
    let gamma = |pf: bool| Decoration::Token {
        label: "γ'".into(),
        degree: 1,
        pushforward: pf,
    };

    let t = DecoratedTree::new(
        vec![v(0, vec![]), v(1, vec![])],
        vec![[0, 1]],
        vec![tail(1, 0), tail(2, 0), tail(3, 1)],
    )?;
    push("aut order of a two-vertex tree with tails on both sides is 1", t.aut_order() == BigInt::from(1));
    let star = |b1: u32, b2: u32| {
        DecoratedTree::new(
            vec![v(0, vec![]), v(b1, vec![]), v(b2, vec![])],
            vec![[0, 1], [0, 2]],
            vec![tail(1, 0), tail(2, 0), tail(3, 0)],
        )
    };
    push("aut order of a star with equal leaves is 2", star(1, 1)?.aut_order() == BigInt::from(2));
    push("aut order of a star with leaves of degree 1 and 2 is 1", star(1, 2)?.aut_order() == BigInt::from(1));

    let five = |b2: u32, decor: Vec<Decoration>| {
        DecoratedTree::new(
            vec![v(1, vec![]), v(b2, decor)],
            vec![[0, 1]],
            vec![tail(1, 0), tail(2, 0), tail(3, 0), tail(4, 1), tail(5, 1)],
        )
    };
    let p = forgetful_pushforward(&five(1, vec![gamma(true)])?, 5)?;
    let generic = p.len() == 1 && p.iter().all(|(t, c)| *c == int(1) && t.vertices.len() == 2 && t.tail_labels() == [1, 2, 3, 4]);
    push("push-forward forgetting tail 5, both degrees positive: same shape, coefficient 1", generic);
    let p = forgetful_pushforward(&five(0, vec![gamma(false)])?, 5)?;
    push("push-forward onto a dying vertex with a positive-degree class vanishes", p.is_empty());
    let p = forgetful_pushforward(&five(0, vec![])?, 5)?;
    let single = DecoratedTree::single(1, [1, 2, 3, 4])?;
    push(
        "push-forward onto a dying vertex with the unit stabilizes to one vertex",
        p.len() == 1 && p.coefficient(&single) == int(1),
    );

    let pull = forgetful_pullback(&star(1, 1)?, 4)?;
    let halves = pull.iter().filter(|(_, c)| *c == crate::rational::rat(1, 2)).count();
    push("pull-back of the symmetric star puts 1/2 on each leaf", halves == 2 && pull.len() == 3);

    for d in 0..=3u32 {
        let ps = psi_boundary_presentation(3, Degree(d), 1)?;
        push(&format!("ψ_1 on M_0,3(V,{d}) has {d} boundary terms"), ps.len() == d as usize);
    }
    let c = SplitConstraints {
        second: vec![1],
        second_exact: true,
        ..Default::default()
    };
    push("n=3, d=2, tail 1 alone on the second side: 2 trees", enumerate_two_vertex_divisors(3, 2, &c)?.len() == 2);
    push("n=4, d=0: 3 boundary divisors", enumerate_two_vertex_divisors(4, 0, &SplitConstraints::default())?.len() == 3);
    let bare = enumerate_two_vertex_divisors(0, 2, &SplitConstraints::default())?;
    push("n=0, d=2: one tree with aut order 2", bare.len() == 1 && bare[0].1 == BigInt::from(2));

    let mut ok = true;
    for n in 3..=5u32 {
        for d in 0..=2u32 {
            let lhs = psi_boundary_presentation(n + 1, Degree(d), 1)?;
            let mut rhs = TreeSum::new();
            for (t, c) in psi_boundary_presentation(n, Degree(d), 1)?.iter() {
                for (nt, k) in forgetful_pullback(t, n + 1)? {
                    rhs.add(nt, c * k);
                }
            }
            rhs.add(pair_divisor(n + 1, Degree(d), 1, n + 1)?, int(1));
            ok &= lhs == rhs;
        }
    }
    push("ψ_(n+1) = π*ψ_(n) + D_(1,n+1) for n ≤ 5, d ≤ 2", ok);
    Ok(out)
}

/// Insertion map `label ↦ τ_a^α` for [`CorrelatorEngine::integrate_tree_sum`].
pub fn insertions(entries: &[(u32, i32, usize)]) -> BTreeMap<u32, (i32, usize)> {
    entries.iter().map(|&(l, a, al)| (l, (a, al))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suites_pass_small() {
        for s in Suite::ALL {
            let mut cfg = VerifyConfig::new(s);
            cfg.samples = 6;
            cfg.qmax = 2;
            let rep = run_suite(&cfg).unwrap();
            assert!(rep.passed(), "{s}: {:?}", rep.failures);
            assert!(rep.checks > 0);
        }
    }

    #[test]
    fn suite_names() {
        assert_eq!("cp1".parse::<Suite>().unwrap(), Suite::Cp1);
        assert!("nope".parse::<Suite>().is_err());
    }

    #[test]
    fn random_keys_are_admissible() {
        let e = CorrelatorEngine::new(Arc::new(TargetModel::projective_space(2)));
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let keys = random_admissible_keys(&e, &mut rng, 20, 3);
        assert_eq!(keys.len(), 20);
        assert!(keys.iter().all(|k| e.selection(k) && k.degree <= 3));
    }
}
