//! Fuchsian groups, closed-geodesic enumeration and trace invariants.

use crate::error::{LabError, Result};
use crate::geodesic::{ClosedGeodesic, Representative};
use crate::mobius::{self, Mat2, IDENTITY};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuchsianGroup {
    pub generators: Vec<Mat2>,
    /// Lowercase letters name generators, uppercase their inverses.
    pub names: Vec<char>,
    pub relator: String,
    /// Circumradius of a Dirichlet domain centred at `i`, when known. Needed
    /// for the completeness certificate of the enumeration.
    pub dirichlet_radius: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthSpectrum {
    pub entries: Vec<ClosedGeodesic>,
    pub simple: bool,
    pub min_gap: f64,
    pub tolerance: f64,
    /// Lengths up to this value are provably complete.
    pub certified_radius: f64,
    pub word_budget: usize,
    pub elements_visited: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct EnumerationOptions {
    pub word_budget: usize,
    pub tol: f64,
}

impl Default for EnumerationOptions {
    fn default() -> Self {
        EnumerationOptions { word_budget: 12, tol: 1e-7 }
    }
}

type C2 = [[Complex64; 2]; 2];

fn cmul(a: &C2, b: &C2) -> C2 {
    let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

fn cinv(a: &C2) -> C2 {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    [[a[1][1] / det, -a[0][1] / det], [-a[1][0] / det, a[0][0] / det]]
}

/// Disk-model element to upper half-plane via the Cayley map `0 -> i`.
fn disk_to_half_plane(m: &C2) -> Mat2 {
    let i = Complex64::i();
    let one = Complex64::new(1.0, 0.0);
    let c = [[i, i], [-one, one]];
    let r = cmul(&cmul(&c, m), &cinv(&c));
    let mut out = [[0.0; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            debug_assert!(r[a][b].im.abs() < 1e-9);
            out[a][b] = r[a][b].re;
        }
    }
    let s = mobius::det(&out).sqrt();
    out.map(|row| row.map(|v| v / s))
}

/// Regular-octagon genus-2 surface group with relator `a b A B c d C D`.
///
/// Side pairings are translations perpendicular to a side composed with a
/// quarter turn; the octagon is a Dirichlet domain for the centre.
pub fn build_genus2_group() -> FuchsianGroup {
    let alpha = 1.0 + 2f64.sqrt();
    let beta = (alpha * alpha - 1.0).sqrt();
    let c = |v: f64| Complex64::new(v, 0.0);
    let trans = |k: i32| -> C2 {
        let e = Complex64::from_polar(1.0, k as f64 * PI / 4.0);
        [[c(alpha), e * beta], [e.conj() * beta, c(alpha)]]
    };
    let rot = |phi: f64| -> C2 {
        let z = Complex64::new(0.0, 0.0);
        [[Complex64::from_polar(1.0, phi / 2.0), z], [z, Complex64::from_polar(1.0, -phi / 2.0)]]
    };
    let side = |i: i32| cmul(&trans(i + 2), &rot(-PI / 2.0));
    let gens = [cinv(&side(0)), side(1), cinv(&side(4)), side(5)];
    // cosh R = cot(pi/8)^2 for the regular octagon with angles pi/4
    let cot = 1.0 / (PI / 8.0).tan();
    FuchsianGroup {
        generators: gens.iter().map(disk_to_half_plane).collect(),
        names: vec!['a', 'b', 'c', 'd'],
        relator: "abABcdCD".into(),
        dirichlet_radius: Some((cot * cot).acosh()),
    }
}

impl FuchsianGroup {
    pub fn rank(&self) -> usize {
        self.generators.len()
    }

    /// Letter index `2i` is generator `i`, `2i + 1` its inverse.
    pub fn letter(&self, l: usize) -> Mat2 {
        let g = &self.generators[l / 2];
        if l.is_multiple_of(2) {
            *g
        } else {
            mobius::inverse(g)
        }
    }

    fn letter_char(&self, l: usize) -> char {
        let c = self.names[l / 2];
        if l.is_multiple_of(2) {
            c
        } else {
            c.to_ascii_uppercase()
        }
    }

    fn parse_letter(&self, ch: char) -> Result<usize> {
        let lower = ch.to_ascii_lowercase();
        let i = self
            .names
            .iter()
            .position(|&n| n == lower)
            .ok_or_else(|| LabError::InvalidArgument(format!("unknown letter {ch}")))?;
        Ok(2 * i + usize::from(ch.is_ascii_uppercase()))
    }

    pub fn eval_word(&self, word: &str) -> Result<Mat2> {
        let mut m = IDENTITY;
        for ch in word.chars() {
            m = mobius::mul(&m, &self.letter(self.parse_letter(ch)?));
        }
        Ok(m)
    }

    /// Distance of the relator from `+-I`.
    pub fn relator_residual(&self) -> f64 {
        match self.eval_word(&self.relator) {
            Ok(m) => mobius::psl_distance(&m, &IDENTITY),
            Err(_) => f64::INFINITY,
        }
    }
}

/// Translation length `2 arccosh(|tr|/2)`.
pub fn geodesic_length(m: &Mat2) -> Result<f64> {
    let tr = mobius::trace(m).abs();
    let det = mobius::det(m);
    if (det - 1.0).abs() > 1e-9 {
        return Err(LabError::InvalidArgument(format!("det = {det}, expected 1")));
    }
    if !(tr > 2.0) {
        return Err(LabError::NotHyperbolic { trace: mobius::trace(m) });
    }
    Ok(length_from_trace(tr))
}

/// `2 arccosh(t/2)` written to stay accurate as `t -> 2`.
pub fn length_from_trace(abs_trace: f64) -> f64 {
    let tm = 0.5 * (abs_trace - 2.0);
    2.0 * (tm * (tm + 2.0)).sqrt().asinh()
}

/// True when `|tr| - 2` is small enough that the length is ill-conditioned.
pub fn is_near_parabolic(m: &Mat2) -> bool {
    mobius::trace(m).abs() - 2.0 < 1e-8
}

/// `|det(I - P)|` of the linearized return map.
pub fn poincare_det(geodesic: &ClosedGeodesic) -> f64 {
    match geodesic.representative {
        Representative::HyperbolicAxis { .. } => 4.0 * (0.5 * geodesic.length).sinh().powi(2),
        Representative::TorusLine { .. } => 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceInvariant {
    /// `T / sqrt(pdet)`, computed without the phase.
    pub modulus: f64,
    /// Phase reduced to `[0, 2 pi)`.
    pub phase: f64,
    pub value: Complex64,
}

pub fn trace_invariant(geodesic: &ClosedGeodesic, sub_integral: f64, maslov: i32) -> Result<TraceInvariant> {
    let pdet = geodesic.poincare_det;
    if !(pdet > 0.0) || !pdet.is_finite() {
        return Err(LabError::DegenerateOrbit(format!("Poincare determinant {pdet}")));
    }
    let modulus = geodesic.primitive_period / pdet.sqrt();
    let quarter = (maslov.rem_euclid(4)) as f64 * PI / 2.0;
    let phase = (sub_integral.rem_euclid(2.0 * PI) + quarter).rem_euclid(2.0 * PI);
    Ok(TraceInvariant { modulus, phase, value: Complex64::from_polar(modulus, phase) })
}

fn psl_key(m: &Mat2) -> [i64; 4] {
    let flat = [m[0][0], m[0][1], m[1][0], m[1][1]];
    let lead = flat.iter().find(|v| v.abs() > 1e-6).copied().unwrap_or(1.0);
    let s = lead.signum();
    flat.map(|v| (s * v * 1e6).round() as i64)
}

struct Element {
    m: Mat2,
    word: Vec<u8>,
    disp: f64,
}

struct Class {
    rep: Mat2,
    word: Vec<u8>,
    length: f64,
    abs_trace: f64,
}

pub fn enumerate_closed_geodesics(group: &FuchsianGroup, l_max: f64) -> Result<LengthSpectrum> {
    enumerate_with(group, l_max, EnumerationOptions::default())
}

/// Breadth-first search over words, pruned by displacement of `i`.
///
/// Every element moving `i` by at most `r_c = min(frontier, prune) - R` is reached,
/// where `R` is the Dirichlet circumradius. Each class of length `l` has a
/// representative whose axis passes within `R` of `i`, hence displacement at
/// most `l + 2R`, so lengths up to `r_c - 2R` are complete.
pub fn enumerate_with(group: &FuchsianGroup, l_max: f64, opts: EnumerationOptions) -> Result<LengthSpectrum> {
    if !(l_max > 0.0) {
        return Err(LabError::InvalidArgument(format!("L_max = {l_max} must be positive")));
    }
    let big_r = group
        .dirichlet_radius
        .ok_or_else(|| LabError::InvalidArgument("group has no Dirichlet radius".into()))?;
    let reach = l_max + 2.0 * big_r;
    let prune = reach + big_r;
    let nl = 2 * group.rank();
    let letters: Vec<Mat2> = (0..nl).map(|l| group.letter(l)).collect();

    let mut seen: HashSet<[i64; 4]> = HashSet::new();
    seen.insert(psl_key(&IDENTITY));
    let mut all: Vec<Element> = Vec::new();
    let mut level = vec![Element { m: IDENTITY, word: Vec::new(), disp: 0.0 }];
    for _ in 0..opts.word_budget {
        let mut next = Vec::new();
        for e in &level {
            for (l, lm) in letters.iter().enumerate() {
                if let Some(&last) = e.word.last() {
                    if last as usize ^ 1 == l {
                        continue;
                    }
                }
                let m = mobius::mul(&e.m, lm);
                let disp = mobius::displacement(&m);
                if disp <= prune && seen.insert(psl_key(&m)) {
                    let mut word = e.word.clone();
                    word.push(l as u8);
                    next.push(Element { m, word, disp });
                }
            }
        }
        all.append(&mut level);
        level = next;
        if level.is_empty() {
            break;
        }
    }
    let frontier = level.iter().map(|e| e.disp).fold(f64::INFINITY, f64::min);
    all.append(&mut level);
    let certified = if frontier >= prune { l_max } else { frontier - 3.0 * big_r };
    if certified < l_max {
        return Err(LabError::IncompleteEnumeration {
            achieved_radius: certified,
            requested: l_max,
            budget: opts.word_budget,
        });
    }
    let elements_visited = all.len();

    // Candidates: hyperbolic, short, axis within R of i.
    let mut cands: Vec<&Element> = all
        .iter()
        .filter(|e| {
            let t = mobius::trace(&e.m).abs();
            if t <= 2.0 + 1e-12 {
                return false;
            }
            let len = length_from_trace(t);
            if len > l_max + opts.tol {
                return false;
            }
            let cosh2r = (e.disp.cosh() - 1.0) / (len.cosh() - 1.0);
            cosh2r <= big_r.cosh().powi(2) * (1.0 + 1e-9)
        })
        .collect();
    cands.sort_by(|a, b| {
        (a.word.len(), &a.word).cmp(&(b.word.len(), &b.word))
    });
    let ball = |radius: f64| -> Vec<Mat2> {
        all.iter().filter(|e| e.disp <= radius + 1e-9).map(|e| e.m).collect()
    };

    let mut classes: Vec<Class> = Vec::new();
    for e in cands {
        let t = mobius::trace(&e.m).abs();
        let len = length_from_trace(t);
        let conj_ball = ball(2.0 * big_r + 0.5 * len);
        let known = classes.iter().any(|c| {
            (c.abs_trace - t).abs() <= opts.tol * t && conjugate_in(&conj_ball, &e.m, &c.rep, opts.tol)
        });
        if !known {
            classes.push(Class { rep: e.m, word: e.word.clone(), length: len, abs_trace: t });
        }
    }
    classes.sort_by(|a, b| a.length.total_cmp(&b.length).then_with(|| a.word.cmp(&b.word)));

    // Split into primitives and powers.
    let mut primitives: Vec<&Class> = Vec::new();
    let mut n_powers = 0usize;
    for c in &classes {
        let conj_ball = ball(2.0 * big_r + 0.5 * c.length);
        let is_power = primitives.iter().any(|p| {
            let m = (c.length / p.length).round();
            m >= 2.0
                && (m * p.length - c.length).abs() <= opts.tol * c.length
                && conjugate_in(&conj_ball, &mobius::power(&p.rep, m as u32), &c.rep, opts.tol)
        });
        if is_power {
            n_powers += 1;
        } else {
            primitives.push(c);
        }
    }

    let mut entries = Vec::new();
    for p in &primitives {
        let base = cyclic_reduce(&p.word);
        let base_m = word_matrix(&letters, &base);
        let len = length_from_trace(mobius::trace(&base_m).abs());
        let mut m = 1u32;
        while m as f64 * len <= l_max + opts.tol {
            let word: Vec<u8> = base.iter().copied().cycle().take(base.len() * m as usize).collect();
            let length = m as f64 * len;
            let geo = ClosedGeodesic {
                word: Some(word.iter().map(|&l| group.letter_char(l as usize)).collect()),
                representative: Representative::HyperbolicAxis { matrix: mobius::power(&base_m, m) },
                length,
                primitive_period: len,
                poincare_det: 4.0 * (0.5 * length).sinh().powi(2),
                iterate: m,
            };
            entries.push(geo);
            m += 1;
        }
    }
    let generated_powers = entries.iter().filter(|g| g.iterate > 1).count();
    if generated_powers != n_powers {
        return Err(LabError::Mismatch(format!(
            "{n_powers} non-primitive classes found, {generated_powers} iterates generated"
        )));
    }
    entries.sort_by(|a, b| a.length.total_cmp(&b.length).then_with(|| a.word.cmp(&b.word)));
    let min_gap = entries
        .windows(2)
        .map(|w| w[1].length - w[0].length)
        .fold(f64::INFINITY, f64::min);
    Ok(LengthSpectrum {
        simple: min_gap > opts.tol,
        entries,
        min_gap,
        tolerance: opts.tol,
        certified_radius: certified,
        word_budget: opts.word_budget,
        elements_visited,
    })
}

/// Is `g` conjugate to `h` or `h^{-1}` by some element of `ball`?
fn conjugate_in(ball: &[Mat2], g: &Mat2, h: &Mat2, tol: f64) -> bool {
    let hi = mobius::inverse(h);
    let scale = mobius::frobenius_sq(h).sqrt();
    ball.iter().any(|c| {
        let x = mobius::conj(c, g);
        mobius::psl_distance(&x, h) <= tol * scale || mobius::psl_distance(&x, &hi) <= tol * scale
    })
}

fn word_matrix(letters: &[Mat2], word: &[u8]) -> Mat2 {
    word.iter().fold(IDENTITY, |m, &l| mobius::mul(&m, &letters[l as usize]))
}

fn cyclic_reduce(word: &[u8]) -> Vec<u8> {
    let mut w = word.to_vec();
    while w.len() >= 2 && w[0] ^ 1 == w[w.len() - 1] {
        w.pop();
        w.remove(0);
    }
    w
}
