//! Restricted roots, the reflection group they generate, and numerical
//! checks that the orbit space is the section modulo that group.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::linalg::{self, random_unit, Subspace, Tolerances};
use crate::polarity::{Action, OrthogonalRep};
use crate::scalar::Real;
use crate::seeded;
use crate::symspace::SymmetricPair;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WeylError {
    #[error("a is zero-dimensional")]
    EmptyA,
    #[error("a is not an abelian subspace of p (residual {residual:e})")]
    NotAbelianInP { residual: f64 },
    #[error("eigenvalue clustering is ambiguous: smallest separation {min_separation:e}, largest spread {max_spread:e}")]
    Ambiguous { min_separation: f64, max_spread: f64 },
    #[error("reflection closure exceeded {cap} elements")]
    ClosureCap { cap: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Absolute clustering gap for `λ(H)` with `|H| = 1`.
pub const CLUSTER_GAP: f64 = 1e-6;
/// Separations below this are reported as ambiguous.
const AMBIGUITY: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct Root<T: Real> {
    /// Values on the orthonormal basis of `a`.
    pub covector: DVector<T>,
    pub multiplicity: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapStats<T: Real> {
    /// Smallest distance between distinct cluster values (including zero).
    pub min_separation: T,
    /// Largest spread inside one cluster.
    pub max_spread: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RestrictedRootSystem<T: Real> {
    pub a: Subspace<T>,
    /// All roots, in `±` pairs.
    pub roots: Vec<Root<T>>,
    /// Dimension of the zero eigenspace.
    pub zero_dim: usize,
    /// Whether the eigenspace dimensions add up to the dimension of the
    /// algebra.
    pub bookkeeping_closes: bool,
    /// `max |λ(H) - sum_k λ(a_k) h_k|` over roots.
    pub consistency_residual: T,
    pub gaps: GapStats<T>,
}

impl<T: Real> RestrictedRootSystem<T> {
    pub fn positive(&self) -> impl Iterator<Item = &Root<T>> {
        self.roots.iter().step_by(2)
    }

    /// Whether `v` matches some root covector within `tol`.
    pub fn contains(&self, v: &DVector<T>, tol: T) -> bool {
        self.roots.iter().any(|r| (&r.covector - v).norm() <= tol)
    }
}

struct Cluster<T> {
    value: T,
    members: Vec<usize>,
}

/// Groups sorted non-negative values with an absolute gap; the first
/// cluster is the zero cluster when it starts below the gap.
fn cluster<T: Real>(values: &[T]) -> (Vec<Cluster<T>>, GapStats<T>) {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(std::cmp::Ordering::Equal));
    let gap = T::lit(CLUSTER_GAP);
    let mut out: Vec<(T, T, Vec<usize>)> = Vec::new();
    for i in idx {
        let v = values[i];
        match out.last_mut() {
            Some((_, hi, m)) if v - *hi <= gap => {
                *hi = v;
                m.push(i);
            }
            _ => out.push((v, v, vec![i])),
        }
    }
    let mut stats = GapStats { min_separation: T::max_value().unwrap_or_else(|| T::lit(f64::MAX)), max_spread: T::zero() };
    if out.first().is_some_and(|c| c.0 > gap) {
        stats.min_separation = out[0].0;
    }
    for w in out.windows(2) {
        stats.min_separation = stats.min_separation.min(w[1].0 - w[0].1);
    }
    for c in &out {
        stats.max_spread = stats.max_spread.max(c.1 - c.0);
    }
    let clusters = out
        .into_iter()
        .map(|(lo, hi, members)| Cluster { value: (lo + hi) * T::lit(0.5), members })
        .collect();
    (clusters, stats)
}

fn symmetric_eigen<T: Real>(m: &DMatrix<T>) -> (Vec<T>, DMatrix<T>) {
    let sym = (m + m.transpose()) * T::lit(0.5);
    let e = sym.symmetric_eigen();
    (e.eigenvalues.iter().copied().collect(), e.eigenvectors)
}

const REDRAWS: u64 = 8;

/// Restricted roots of `a ⊂ p` from the spectrum of `(ad H)^2` at a seeded
/// generic unit `H ∈ a`.
pub fn restricted_roots<T: Real>(
    pair: &SymmetricPair<T>,
    a: &Subspace<T>,
    seed: u64,
    tol: &Tolerances,
) -> Result<RestrictedRootSystem<T>, WeylError> {
    let alg = pair.algebra();
    if a.ambient() != alg.dim() {
        return Err(WeylError::DimensionMismatch { expected: alg.dim(), got: a.ambient() });
    }
    if a.is_empty() {
        return Err(WeylError::EmptyA);
    }
    let mut off = pair.p().containment_residual(a);
    for u in a.vectors() {
        for v in a.vectors() {
            off = off.max(alg.bracket_unchecked(&u, &v).norm());
        }
    }
    if off > T::lit(tol.residual) * T::lit(100.0) {
        return Err(WeylError::NotAbelianInP { residual: off.as_f64() });
    }
    let basis = a.vectors();
    let mut last = None;
    for draw in 0..REDRAWS {
        let mut rng = seeded(seed, draw);
        let h = a.embed(&random_unit(&mut rng, a.dim()));
        let adh = alg.ad(&h);
        let (mu, vecs) = symmetric_eigen(&(&adh * &adh));
        let lam: Vec<T> = mu.iter().map(|&m| (-m).max(T::zero()).sqrt()).collect();
        let (clusters, gaps) = cluster(&lam);
        let odd = clusters.iter().any(|c| c.value > T::lit(CLUSTER_GAP) && c.members.len() % 2 == 1);
        if gaps.min_separation < T::lit(AMBIGUITY) || odd {
            last = Some(gaps);
            continue;
        }
        let mut roots = Vec::new();
        let mut zero_dim = 0;
        let mut consistency = T::zero();
        for c in &clusters {
            if c.value <= T::lit(CLUSTER_GAP) {
                zero_dim = c.members.len();
                continue;
            }
            let x = c
                .members
                .iter()
                .map(|&i| pair.p().project(&vecs.column(i).into_owned()))
                .max_by(|u, v| u.norm().partial_cmp(&v.norm()).unwrap_or(std::cmp::Ordering::Equal))
                .expect("nonempty cluster");
            let hx = alg.bracket_unchecked(&h, &x);
            let denom = c.value * x.norm_squared();
            let cov = DVector::from_iterator(
                basis.len(),
                basis.iter().map(|ak| -alg.bracket_unchecked(ak, &hx).dot(&x) / denom),
            );
            consistency = consistency.max((cov.dot(&a.coordinates(&h)) - c.value).abs());
            let m = c.members.len() / 2;
            roots.push(Root { covector: cov.clone(), multiplicity: m });
            roots.push(Root { covector: -cov, multiplicity: m });
        }
        let counted: usize = roots.iter().map(|r| r.multiplicity).sum::<usize>() + zero_dim;
        return Ok(RestrictedRootSystem {
            a: a.clone(),
            roots,
            zero_dim,
            bookkeeping_closes: counted == alg.dim(),
            consistency_residual: consistency,
            gaps,
        });
    }
    let g = last.expect("at least one draw");
    Err(WeylError::Ambiguous { min_separation: g.min_separation.as_f64(), max_spread: g.max_spread.as_f64() })
}

/// Roots of a polar representation relative to a section, from the
/// spectrum of `T(H)^T T(H)` where `T(H): X -> A_X H`.
pub fn rep_roots<T: Real>(
    rep: &OrthogonalRep<T>,
    section: &Subspace<T>,
    seed: u64,
) -> Result<RestrictedRootSystem<T>, WeylError> {
    if section.ambient() != rep.space_dim() {
        return Err(WeylError::DimensionMismatch { expected: rep.space_dim(), got: section.ambient() });
    }
    if section.is_empty() {
        return Err(WeylError::EmptyA);
    }
    let n = rep.algebra().dim();
    let tmat = |v: &DVector<T>| {
        let mut m = DMatrix::zeros(rep.space_dim(), n);
        for (i, g) in rep.generators().iter().enumerate() {
            m.set_column(i, &(g * v));
        }
        m
    };
    let basis = section.vectors();
    let mut last = None;
    for draw in 0..REDRAWS {
        let mut rng = seeded(seed, draw);
        let h = section.embed(&random_unit(&mut rng, section.dim()));
        let th = tmat(&h);
        let (ev, vecs) = symmetric_eigen(&(th.transpose() * &th));
        let lam: Vec<T> = ev.iter().map(|&e| e.max(T::zero()).sqrt()).collect();
        let (clusters, gaps) = cluster(&lam);
        if gaps.min_separation < T::lit(AMBIGUITY) {
            last = Some(gaps);
            continue;
        }
        let tk: Vec<DMatrix<T>> = basis.iter().map(&tmat).collect();
        let mut roots = Vec::new();
        let mut zero_dim = 0;
        let mut consistency = T::zero();
        for c in &clusters {
            if c.value <= T::lit(CLUSTER_GAP) {
                zero_dim = c.members.len();
                continue;
            }
            let x = vecs.column(c.members[0]).into_owned();
            let axh = &th * &x;
            let nrm = axh.norm_squared();
            let cov = DVector::from_iterator(basis.len(), tk.iter().map(|t| c.value * axh.dot(&(t * &x)) / nrm));
            consistency = consistency.max((cov.dot(&section.coordinates(&h)) - c.value).abs());
            roots.push(Root { covector: cov.clone(), multiplicity: c.members.len() });
            roots.push(Root { covector: -cov, multiplicity: c.members.len() });
        }
        let counted: usize = roots.iter().step_by(2).map(|r| r.multiplicity).sum::<usize>() + zero_dim;
        return Ok(RestrictedRootSystem {
            a: section.clone(),
            roots,
            zero_dim,
            bookkeeping_closes: counted == n,
            consistency_residual: consistency,
            gaps,
        });
    }
    let g = last.expect("at least one draw");
    Err(WeylError::Ambiguous { min_separation: g.min_separation.as_f64(), max_spread: g.max_spread.as_f64() })
}

/// A finite group of orthogonal matrices on `a` generated by reflections.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionGroup<T: Real> {
    pub generators: Vec<DMatrix<T>>,
    pub elements: Vec<DMatrix<T>>,
}

impl<T: Real> ReflectionGroup<T> {
    pub fn order(&self) -> usize {
        self.elements.len()
    }

    fn position(&self, m: &DMatrix<T>) -> Option<usize> {
        self.elements.iter().position(|e| linalg::max_abs(&(e - m)) < T::lit(DEDUPE))
    }

    /// Worst `|w w' - nearest element|` over all products.
    pub fn closure_residual(&self) -> T {
        let mut worst = T::zero();
        for a in &self.elements {
            for b in &self.elements {
                let p = a * b;
                let d = self.elements.iter().fold(T::max_value().unwrap_or_else(|| T::lit(f64::MAX)), |m, e| m.min(linalg::max_abs(&(e - &p))));
                worst = worst.max(d);
            }
        }
        worst
    }

    /// Orbit `{w v}` of a coordinate vector.
    pub fn orbit(&self, v: &DVector<T>) -> Vec<DVector<T>> {
        self.elements.iter().map(|w| w * v).collect()
    }
}

const DEDUPE: f64 = 1e-8;
/// Cap on the closure, reached only with inconsistent root data.
pub const CLOSURE_CAP: usize = 10_000;

/// Closes the reflections `s_λ(v) = v - 2 <v,λ>/<λ,λ> λ` under products.
pub fn weyl_group_closure<T: Real>(roots: &RestrictedRootSystem<T>) -> Result<ReflectionGroup<T>, WeylError> {
    let r = roots.a.dim();
    if r == 0 {
        return Err(WeylError::EmptyA);
    }
    let id = DMatrix::<T>::identity(r, r);
    let mut gens: Vec<DMatrix<T>> = Vec::new();
    for root in &roots.roots {
        let l = &root.covector;
        let s = &id - (l * l.transpose()) * (T::lit(2.0) / l.norm_squared());
        if !gens.iter().any(|g| linalg::max_abs(&(g - &s)) < T::lit(DEDUPE)) {
            gens.push(s);
        }
    }
    let mut group = ReflectionGroup { generators: gens, elements: vec![id] };
    let mut frontier = 0;
    while frontier < group.elements.len() {
        let e = group.elements[frontier].clone();
        frontier += 1;
        for g in group.generators.clone() {
            let p = &g * &e;
            if group.position(&p).is_none() {
                if group.elements.len() >= CLOSURE_CAP {
                    return Err(WeylError::ClosureCap { cap: CLOSURE_CAP });
                }
                group.elements.push(p);
            }
        }
    }
    Ok(group)
}

/// Compass search over the group: moves `x -> exp(±s A_i) x` with step `s`
/// halving from 1 whenever no move improves.
struct Compass<T: Real> {
    /// `steps[k][2 i + σ]` = `exp(±s_k A_i)`.
    steps: Vec<Vec<DMatrix<T>>>,
}

const COMPASS_LEVELS: usize = 30;
const POLISH_FACTOR: usize = 8;

impl<T: Real> Compass<T> {
    fn new(rep: &OrthogonalRep<T>) -> Self {
        let mut steps = Vec::with_capacity(COMPASS_LEVELS);
        let mut s = T::one();
        for _ in 0..COMPASS_LEVELS {
            let mut level = Vec::new();
            for a in rep.generators() {
                level.push(linalg::expm(&(a * s)));
                level.push(linalg::expm(&(a * -s)));
            }
            steps.push(level);
            s *= T::lit(0.5);
        }
        Self { steps }
    }

    /// Minimizes `f(g x0)`; returns `(g, f)` after at most `budget` evaluations.
    fn minimize(&self, x0: &DVector<T>, g0: DMatrix<T>, budget: usize, f: impl Fn(&DVector<T>) -> T) -> (DMatrix<T>, T) {
        let mut g = g0;
        let mut x = &g * x0;
        let mut fx = f(&x);
        let mut evals = 1;
        let mut level = 0;
        while level < self.steps.len() && evals < budget {
            let mut improved = false;
            for m in &self.steps[level] {
                if evals >= budget {
                    break;
                }
                let cand = m * &x;
                let fc = f(&cand);
                evals += 1;
                if fc < fx {
                    x = cand;
                    fx = fc;
                    g = m * &g;
                    improved = true;
                }
            }
            if !improved {
                level += 1;
            }
        }
        (g, fx)
    }
}

fn random_group_element<T: Real, R: Rng>(rep: &OrthogonalRep<T>, rng: &mut R) -> DMatrix<T> {
    let n = rep.algebra().dim();
    let t = DVector::from_iterator(n, (0..n).map(|_| T::lit(rng.random_range(-std::f64::consts::PI..std::f64::consts::PI))));
    rep.group_element(&t)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub starts: usize,
    pub evaluations: usize,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self { starts: 32, evaluations: 500, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuotientDistance<T: Real> {
    /// Best value found; an upper bound for the orbit distance.
    pub distance: T,
    /// The minimizing group element `g` (distance is `d(p, g q)`).
    pub transform: DMatrix<T>,
}

/// `min_g d(p, g q)` by multi-start compass search; the first start is the
/// identity.
pub fn quotient_distance<T: Real>(
    action: &Action<T>,
    p: &DVector<T>,
    q: &DVector<T>,
    cfg: &OptimizerConfig,
) -> QuotientDistance<T> {
    quotient_distance_with(action, &Compass::new(action.rep()), p, q, cfg)
}

fn quotient_distance_with<T: Real>(
    action: &Action<T>,
    compass: &Compass<T>,
    p: &DVector<T>,
    q: &DVector<T>,
    cfg: &OptimizerConfig,
) -> QuotientDistance<T> {
    let rep = action.rep();
    let m = action.manifold();
    let f = |x: &DVector<T>| m.distance(p, x).powi(2);
    let n = rep.space_dim();
    let (g, _) = (0..cfg.starts.max(1))
        .map(|s| {
            let g0 = if s == 0 {
                DMatrix::identity(n, n)
            } else {
                random_group_element(rep, &mut seeded(cfg.seed, s as u64))
            };
            compass.minimize(q, g0, cfg.evaluations, f)
        })
        .fold(None::<(DMatrix<T>, T)>, |best, cur| match best {
            Some(b) if b.1 <= cur.1 => Some(b),
            _ => Some(cur),
        })
        .expect("at least one start");
    // polish the winner; large groups need many sweeps to settle
    let (g, fx) = compass.minimize(q, g, POLISH_FACTOR * cfg.evaluations, f);
    QuotientDistance { distance: fx.max(T::zero()).sqrt(), transform: g }
}

/// Distance in `Σ / W` between points of the section.
pub fn section_distance<T: Real>(action: &Action<T>, section: &Subspace<T>, w: &ReflectionGroup<T>, x: &DVector<T>, y: &DVector<T>) -> T {
    let cy = section.coordinates(y);
    w.elements
        .iter()
        .map(|e| action.manifold().distance(x, &section.embed(&(e * &cy))))
        .fold(T::max_value().unwrap_or_else(|| T::lit(f64::MAX)), |a, b| a.min(b))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitSampler {
    pub samples: usize,
    /// Compass budget pulling each sample towards the section.
    pub refine_evaluations: usize,
    pub near: f64,
    pub matched: f64,
    pub seed: u64,
}

impl Default for OrbitSampler {
    fn default() -> Self {
        Self { samples: 256, refine_evaluations: 400, near: 1e-3, matched: 1e-2, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SectionOrbitReport<T: Real> {
    /// Samples that ended within `near` of the section.
    pub near_section: usize,
    /// Worst distance from such a sample to the `W`-orbit of `p`.
    pub worst_distance: T,
    pub holds: bool,
}

/// Samples `g p`, pulls each towards `Σ` along the orbit, and checks that
/// every orbit point found on `Σ` lies in `W p`.
pub fn section_orbit_check<T: Real>(
    action: &Action<T>,
    section: &Subspace<T>,
    w: &ReflectionGroup<T>,
    p: &DVector<T>,
    sampler: &OrbitSampler,
) -> SectionOrbitReport<T> {
    let rep = action.rep();
    let compass = Compass::new(rep);
    let wp: Vec<DVector<T>> = w.orbit(&section.coordinates(p)).iter().map(|c| section.embed(c)).collect();
    let f = |x: &DVector<T>| (x - section.project(x)).norm_squared();
    let near = T::lit(sampler.near);
    let results: Vec<Option<T>> = (0..sampler.samples)
        .into_par_iter()
        .map(|i| {
            let g0 = random_group_element(rep, &mut seeded(sampler.seed, i as u64));
            let (g, fx) = compass.minimize(p, g0, sampler.refine_evaluations, f);
            if fx.sqrt() >= near {
                return None;
            }
            let x = section.project(&(g * p));
            Some(wp.iter().map(|y| (&x - y).norm()).fold(T::max_value().unwrap_or_else(|| T::lit(f64::MAX)), |a, b| a.min(b)))
        })
        .collect();
    let hits: Vec<T> = results.into_iter().flatten().collect();
    let worst = hits.iter().copied().fold(T::zero(), |a, b| a.max(b));
    SectionOrbitReport { near_section: hits.len(), worst_distance: worst, holds: worst < T::lit(sampler.matched) }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReductionReport<T: Real> {
    pub pairs: usize,
    pub max_relative: T,
    /// `max(quotient - section/W)`; positive values beyond the optimizer
    /// slack contradict the reduction.
    pub max_excess: T,
    pub worst_pair: usize,
}

/// Compares orbit-space and `Σ/W` distances for seeded pairs in `Σ`.
pub fn reduction_isometry_check<T: Real>(
    action: &Action<T>,
    section: &Subspace<T>,
    w: &ReflectionGroup<T>,
    pairs: usize,
    cfg: &OptimizerConfig,
) -> ReductionReport<T> {
    let compass = Compass::new(action.rep());
    let m = action.manifold();
    let rows: Vec<(T, T)> = (0..pairs)
        .into_par_iter()
        .map(|i| {
            let mut rng = seeded(cfg.seed, 1_000_000 + i as u64);
            let x = m.normalize(&section.embed(&crate::linalg::random_normal(&mut rng, section.dim())));
            let y = m.normalize(&section.embed(&crate::linalg::random_normal(&mut rng, section.dim())));
            let s = section_distance(action, section, w, &x, &y);
            let q = quotient_distance_with(action, &compass, &x, &y, &OptimizerConfig { seed: cfg.seed ^ (i as u64 + 1), ..*cfg }).distance;
            ((q - s).abs() / s.max(T::lit(1e-6)), q - s)
        })
        .collect();
    let mut report = ReductionReport { pairs, max_relative: T::zero(), max_excess: T::lit(f64::MIN), worst_pair: 0 };
    for (i, (rel, ex)) in rows.into_iter().enumerate() {
        if rel > report.max_relative {
            report.max_relative = rel;
            report.worst_pair = i;
        }
        report.max_excess = report.max_excess.max(ex);
    }
    report
}
