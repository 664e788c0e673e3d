// Copyright 2026 vflux Contributors
// SPDX-License-Identifier: Apache-2.0

//! Generators of the reduced density-matrix dynamics.
//!
//! The Redfield superoperator is applied to each of the nine 3×3 basis
//! matrices to obtain a full 9×9 matrix on `vec(ρ)` (row-major, levels
//! ordered `e1, e2, g`). Populations and the excited-state coherence form
//! an invariant block; projecting onto it gives the 5×5 generator acting on
//! `[ρ11, ρ22, ρgg, ρ12, ρ21]`.
//!
//! Two algebraic forms of the superoperator are kept:
//!
//! * the commutator form, used for the undressed dynamics and the block
//!   decoupling check;
//! * the expanded form (anticommutator loss plus "sandwich" gain terms), in
//!   which only the sandwich coefficients carry counting fields.
//!
//! Both forms reduce to each other at zero field; the tests hold them
//! against a hand-expanded set of population and coherence equations.

use std::fmt::Write as _;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::model::{
    build_rates, dress_rates, dress_rates_derivative, Bath, Channel, CountingFields, CountingKind,
    DressedRateSet, Level, RateSet, SystemSpec,
};

const E1: usize = 0;
const E2: usize = 1;
const G: usize = 2;

/// `[ρ11, ρ22, ρgg, ρ12, ρ21]` as (row, column) of the 3×3 density matrix.
pub const BLOCK: [(usize, usize); 5] = [(E1, E1), (E2, E2), (G, G), (E1, E2), (E2, E1)];
/// Ground/excited coherences, decoupled from [`BLOCK`].
pub const OUTER_BLOCK: [(usize, usize); 4] = [(E1, G), (G, E1), (E2, G), (G, E2)];

/// Left null vector `⟨I|` of every trace-preserving generator.
pub const TRACE_ROW: [C64; 5] = [
    C64::new(1.0, 0.0),
    C64::new(1.0, 0.0),
    C64::new(1.0, 0.0),
    C64::new(0.0, 0.0),
    C64::new(0.0, 0.0),
];

/// Population/coherence block of the density matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateVector(pub [C64; 5]);

impl StateVector {
    pub fn from_populations(p11: f64, p22: f64, pgg: f64) -> Self {
        let z = C64::new(0.0, 0.0);
        Self([
            C64::new(p11, 0.0),
            C64::new(p22, 0.0),
            C64::new(pgg, 0.0),
            z,
            z,
        ])
    }

    pub fn ground() -> Self {
        Self::from_populations(0.0, 0.0, 1.0)
    }

    pub fn rho11(&self) -> C64 {
        self.0[0]
    }
    pub fn rho22(&self) -> C64 {
        self.0[1]
    }
    pub fn rhogg(&self) -> C64 {
        self.0[2]
    }
    pub fn rho12(&self) -> C64 {
        self.0[3]
    }
    pub fn rho21(&self) -> C64 {
        self.0[4]
    }

    pub fn trace(&self) -> C64 {
        self.0[0] + self.0[1] + self.0[2]
    }

    /// `ρ12 + ρ21`, the combination entering the currents.
    pub fn coherence_sum(&self) -> f64 {
        (self.0[3] + self.0[4]).re
    }

    /// Largest imaginary part of a population or mismatch of `ρ21` with
    /// `conj(ρ12)`.
    pub fn hermiticity_defect(&self) -> f64 {
        let pops = self.0[..3].iter().map(|p| p.im.abs()).fold(0.0, f64::max);
        pops.max((self.0[4] - self.0[3].conj()).norm())
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.0
    }

    pub fn max_abs_diff(&self, other: &StateVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// A 5×5 generator, possibly dressed by counting fields.
#[derive(Debug, Clone)]
pub struct Generator {
    pub m: CMat,
    pub chi: CountingFields,
}

impl Generator {
    pub fn apply(&self, v: &StateVector) -> StateVector {
        let out = linalg::matvec(&self.m, &v.0);
        StateVector([out[0], out[1], out[2], out[3], out[4]])
    }

    /// `⟨I| m`, zero for a trace-preserving generator.
    pub fn trace_defect(&self) -> f64 {
        linalg::vecmat(&TRACE_ROW, &self.m)
            .iter()
            .map(|x| x.norm())
            .fold(0.0, f64::max)
    }

    /// Plain-text dump: a `#`-prefixed header, then five rows of five
    /// space-separated `re,im` pairs in scientific notation with 17
    /// significant digits.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str("# vflux-generator v1\n");
        s.push_str("# order rho11 rho22 rhogg rho12 rho21\n");
        let _ = writeln!(
            s,
            "# chiL {:.16e} chiR {:.16e} kind {}",
            self.chi.chi_l,
            self.chi.chi_r,
            self.chi.kind.tag()
        );
        for i in 0..5 {
            let row: Vec<String> = (0..5)
                .map(|j| format!("{:.16e},{:.16e}", self.m[(i, j)].re, self.m[(i, j)].im))
                .collect();
            s.push_str(&row.join(" "));
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::Usage(format!("generator dump: {msg}"));
        let mut chi = CountingFields::zero(CountingKind::Energy);
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let parts: Vec<&str> = rest.split_whitespace().collect();
                if parts.first() == Some(&"chiL") && parts.len() == 6 {
                    let num = |s: &str| {
                        s.parse::<f64>()
                            .map_err(|e| bad(format!("line {}: {e}", lineno + 1)))
                    };
                    chi.chi_l = num(parts[1])?;
                    chi.chi_r = num(parts[3])?;
                    chi.kind = match parts[5] {
                        "energy" => CountingKind::Energy,
                        "particle" => CountingKind::Particle,
                        other => return Err(bad(format!("unknown kind `{other}`"))),
                    };
                }
                continue;
            }
            let mut row = Vec::new();
            for cell in line.split_whitespace() {
                let (re, im) = cell
                    .split_once(',')
                    .ok_or_else(|| bad(format!("line {}: expected re,im", lineno + 1)))?;
                let parse = |s: &str| {
                    s.parse::<f64>()
                        .map_err(|e| bad(format!("line {}: {e}", lineno + 1)))
                };
                row.push(C64::new(parse(re)?, parse(im)?));
            }
            if row.len() != 5 {
                return Err(bad(format!("line {}: expected 5 entries", lineno + 1)));
            }
            rows.push(row);
        }
        if rows.len() != 5 {
            return Err(bad(format!("expected 5 rows, found {}", rows.len())));
        }
        Ok(Self {
            m: CMat::from_fn(5, 5, |i, j| rows[i][j]),
            chi,
        })
    }
}

/// Dense 3×3 operator on the system Hilbert space.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Op3([[C64; 3]; 3]);

impl Op3 {
    fn zero() -> Self {
        Op3([[C64::new(0.0, 0.0); 3]; 3])
    }

    /// `|a⟩⟨b|`
    fn ket_bra(a: usize, b: usize) -> Self {
        let mut m = Self::zero();
        m.0[a][b] = C64::new(1.0, 0.0);
        m
    }

    fn diag(d: [f64; 3]) -> Self {
        let mut m = Self::zero();
        for (i, x) in d.into_iter().enumerate() {
            m.0[i][i] = C64::new(x, 0.0);
        }
        m
    }

    fn mul(&self, o: &Op3) -> Op3 {
        let mut out = Self::zero();
        for i in 0..3 {
            for j in 0..3 {
                let mut acc = C64::new(0.0, 0.0);
                for k in 0..3 {
                    acc += self.0[i][k] * o.0[k][j];
                }
                out.0[i][j] = acc;
            }
        }
        out
    }

    fn add_scaled(&mut self, o: &Op3, s: C64) {
        for i in 0..3 {
            for j in 0..3 {
                self.0[i][j] += o.0[i][j] * s;
            }
        }
    }

    fn commutator(a: &Op3, b: &Op3) -> Op3 {
        let mut out = a.mul(b);
        out.add_scaled(&b.mul(a), C64::new(-1.0, 0.0));
        out
    }
}

/// σ = + raises, σ = − lowers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Sigma {
    Plus,
    Minus,
}

impl Sigma {
    const BOTH: [Sigma; 2] = [Sigma::Plus, Sigma::Minus];

    fn flip(self) -> Self {
        match self {
            Sigma::Plus => Sigma::Minus,
            Sigma::Minus => Sigma::Plus,
        }
    }
}

/// `φ⁺_i = |e_i⟩⟨g|`, `φ⁻_i = |g⟩⟨e_i|`.
fn phi(sigma: Sigma, i: Level) -> Op3 {
    match sigma {
        Sigma::Plus => Op3::ket_bra(i.index(), G),
        Sigma::Minus => Op3::ket_bra(G, i.index()),
    }
}

/// `ψ⁺ = |e1⟩⟨e2|`, `ψ⁻ = |e2⟩⟨e1|`.
fn psi(sigma: Sigma) -> Op3 {
    match sigma {
        Sigma::Plus => Op3::ket_bra(E1, E2),
        Sigma::Minus => Op3::ket_bra(E2, E1),
    }
}

fn undressed(rates: &RateSet, sigma: Sigma, ch: Channel, level: Level) -> f64 {
    match sigma {
        Sigma::Plus => rates.gamma_plus(ch, level),
        Sigma::Minus => rates.gamma_minus(ch, level),
    }
}

fn dressed(rates: &DressedRateSet, sigma: Sigma, ch: Channel, level: Level) -> C64 {
    match sigma {
        Sigma::Plus => rates.gamma_plus(ch, level),
        Sigma::Minus => rates.gamma_minus(ch, level),
    }
}

/// Coefficients of the expanded superoperator.
struct ExpandedTerms {
    energies: Option<[f64; 3]>,
    /// Γ^σ_ij(ε_j) on `φ^σ̄_i φ^σ_j ρ + ρ φ^σ̄_j φ^σ_i`, indexed `[σ][i][j]`.
    loss: [[[f64; 2]; 2]; 2],
    /// ½(Γ^σ_ij(ε_i, χ) + Γ^σ_ij(ε_j, χ)) on `φ^σ_i ρ φ^σ̄_j`.
    sandwich: [[[C64; 2]; 2]; 2],
    middle: [f64; 2],
}

fn sigma_index(s: Sigma) -> usize {
    match s {
        Sigma::Plus => 0,
        Sigma::Minus => 1,
    }
}

fn sandwich_coefficients(d: &DressedRateSet) -> [[[C64; 2]; 2]; 2] {
    let mut out = [[[C64::new(0.0, 0.0); 2]; 2]; 2];
    for s in Sigma::BOTH {
        for i in Level::BOTH {
            for j in Level::BOTH {
                let ch = Channel::of(i, j);
                out[sigma_index(s)][i.index()][j.index()] =
                    (dressed(d, s, ch, i) + dressed(d, s, ch, j)) * 0.5;
            }
        }
    }
    out
}

impl ExpandedTerms {
    fn full(spec: &SystemSpec, rates: &RateSet, d: &DressedRateSet) -> Self {
        let mut loss = [[[0.0; 2]; 2]; 2];
        for s in Sigma::BOTH {
            for i in Level::BOTH {
                for j in Level::BOTH {
                    loss[sigma_index(s)][i.index()][j.index()] =
                        undressed(rates, s, Channel::of(i, j), j);
                }
            }
        }
        Self {
            energies: Some([spec.eps1, spec.eps2, 0.0]),
            loss,
            sandwich: sandwich_coefficients(d),
            middle: [rates.middle_gain, rates.middle_loss],
        }
    }

    /// Only the field-dependent sandwich terms, as needed for derivatives.
    fn sandwich_only(d: &DressedRateSet) -> Self {
        Self {
            energies: None,
            loss: [[[0.0; 2]; 2]; 2],
            sandwich: sandwich_coefficients(d),
            middle: [0.0, 0.0],
        }
    }

    fn apply(&self, rho: &Op3) -> Op3 {
        let mut out = Op3::zero();
        let half = C64::new(0.5, 0.0);
        if let Some(e) = self.energies {
            let h = Op3::diag(e);
            out.add_scaled(&Op3::commutator(&h, rho), C64::new(0.0, -1.0));
        }
        for s in Sigma::BOTH {
            let si = sigma_index(s);
            for i in Level::BOTH {
                for j in Level::BOTH {
                    let g = self.loss[si][i.index()][j.index()];
                    if g != 0.0 {
                        let left = phi(s.flip(), i).mul(&phi(s, j)).mul(rho);
                        let right = rho.mul(&phi(s.flip(), j)).mul(&phi(s, i));
                        out.add_scaled(&left, C64::new(-0.5 * g, 0.0));
                        out.add_scaled(&right, C64::new(-0.5 * g, 0.0));
                    }
                    let c = self.sandwich[si][i.index()][j.index()];
                    if c != C64::new(0.0, 0.0) {
                        let term = phi(s, i).mul(rho).mul(&phi(s.flip(), j));
                        out.add_scaled(&term, c);
                    }
                }
            }
            let gm = self.middle[si];
            if gm != 0.0 {
                out.add_scaled(&middle_dissipator(s, rho), C64::new(gm, 0.0) * half);
            }
        }
        out
    }
}

/// `[ψ^σ ρ, ψ^σ̄] + [ψ^σ, ρ ψ^σ̄]`
fn middle_dissipator(s: Sigma, rho: &Op3) -> Op3 {
    let a = psi(s);
    let b = psi(s.flip());
    let mut out = Op3::commutator(&a.mul(rho), &b);
    out.add_scaled(&Op3::commutator(&a, &rho.mul(&b)), C64::new(1.0, 0.0));
    out
}

/// Commutator form of the undressed Redfield equation.
fn commutator_form(spec: &SystemSpec, rates: &RateSet, rho: &Op3) -> Op3 {
    let mut out = Op3::zero();
    let h = Op3::diag([spec.eps1, spec.eps2, 0.0]);
    out.add_scaled(&Op3::commutator(&h, rho), C64::new(0.0, -1.0));
    for s in Sigma::BOTH {
        for i in Level::BOTH {
            for j in Level::BOTH {
                let g = undressed(rates, s, Channel::of(i, j), j);
                if g == 0.0 {
                    continue;
                }
                let mut term = Op3::commutator(&phi(s, j).mul(rho), &phi(s.flip(), i));
                term.add_scaled(
                    &Op3::commutator(&phi(s, i), &rho.mul(&phi(s.flip(), j))),
                    C64::new(1.0, 0.0),
                );
                out.add_scaled(&term, C64::new(0.5 * g, 0.0));
            }
        }
        let gm = match s {
            Sigma::Plus => rates.middle_gain,
            Sigma::Minus => rates.middle_loss,
        };
        if gm != 0.0 {
            out.add_scaled(&middle_dissipator(s, rho), C64::new(0.5 * gm, 0.0));
        }
    }
    out
}

/// 9×9 matrix of a linear map on 3×3 operators, in row-major `vec(ρ)`.
fn superoperator(map: impl Fn(&Op3) -> Op3) -> CMat {
    let mut m = linalg::zeros(9, 9);
    for a in 0..3 {
        for b in 0..3 {
            let out = map(&Op3::ket_bra(a, b));
            for x in 0..3 {
                for y in 0..3 {
                    m[(3 * x + y, 3 * a + b)] = out.0[x][y];
                }
            }
        }
    }
    m
}

/// The same matrix restricted to [`BLOCK`], evaluating only the five
/// basis operators it needs. Entry-for-entry identical to projecting the
/// 9×9 matrix.
fn block_superoperator(map: impl Fn(&Op3) -> Op3) -> CMat {
    let mut m = linalg::zeros(5, 5);
    for (c, &(a, b)) in BLOCK.iter().enumerate() {
        let out = map(&Op3::ket_bra(a, b));
        for (r, &(x, y)) in BLOCK.iter().enumerate() {
            m[(r, c)] = out.0[x][y];
        }
    }
    m
}

#[cfg(test)]
fn project_block(full: &CMat) -> CMat {
    CMat::from_fn(5, 5, |r, c| {
        let (x, y) = BLOCK[r];
        let (a, b) = BLOCK[c];
        full[(3 * x + y, 3 * a + b)]
    })
}

#[cfg(test)]
fn full_counting_superoperator(spec: &SystemSpec, rates: &RateSet, chi: &CountingFields) -> CMat {
    let d = dress_rates(rates, chi);
    let terms = ExpandedTerms::full(spec, rates, &d);
    superoperator(|rho| terms.apply(rho))
}

/// Undressed 5×5 generator.
pub fn build_generator(spec: &SystemSpec) -> Result<Generator> {
    build_counting_generator(spec, &CountingFields::zero(CountingKind::Energy))
}

/// 5×5 generator with counting fields on the left and right leads.
///
/// At zero field the result is bit-identical to [`build_generator`].
pub fn build_counting_generator(spec: &SystemSpec, chi: &CountingFields) -> Result<Generator> {
    let rates = build_rates(spec)?;
    Ok(generator_from_rates(spec, &rates, chi))
}

pub(crate) fn generator_from_rates(
    spec: &SystemSpec,
    rates: &RateSet,
    chi: &CountingFields,
) -> Generator {
    let d = dress_rates(rates, chi);
    let terms = ExpandedTerms::full(spec, rates, &d);
    Generator {
        m: block_superoperator(|rho| terms.apply(rho)),
        chi: *chi,
    }
}

/// Highest derivative order supported by [`generator_chi_derivative`].
pub const MAX_DERIVATIVE_ORDER: u32 = 4;

/// `∂ⁿ L / ∂(iχ_bath)ⁿ` at `chi0`.
pub fn generator_chi_derivative(
    spec: &SystemSpec,
    chi0: &CountingFields,
    bath: Bath,
    order: u32,
) -> Result<CMat> {
    let rates = build_rates(spec)?;
    derivative_from_rates(&rates, chi0, bath, order)
}

pub(crate) fn derivative_from_rates(
    rates: &RateSet,
    chi0: &CountingFields,
    bath: Bath,
    order: u32,
) -> Result<CMat> {
    if order == 0 || order > MAX_DERIVATIVE_ORDER {
        return Err(Error::Usage(format!(
            "derivative order must be in 1..={MAX_DERIVATIVE_ORDER}, got {order}"
        )));
    }
    let d = dress_rates_derivative(rates, chi0, bath, order);
    let terms = ExpandedTerms::sandwich_only(&d);
    Ok(block_superoperator(|rho| terms.apply(rho)))
}

/// Full 9×9 undressed superoperator in commutator form.
pub fn full_superoperator(spec: &SystemSpec) -> Result<CMat> {
    let rates = build_rates(spec)?;
    Ok(superoperator(|rho| commutator_form(spec, &rates, rho)))
}

/// Largest entry of the 9×9 undressed superoperator that couples the
/// population/coherence block to the ground/excited coherences.
pub fn verify_block_decoupling(spec: &SystemSpec) -> Result<f64> {
    let full = full_superoperator(spec)?;
    let index = |(x, y): (usize, usize)| 3 * x + y;
    let mut worst = 0.0_f64;
    for &p in &BLOCK {
        for &q in &OUTER_BLOCK {
            worst = worst.max(full[(index(p), index(q))].norm());
            worst = worst.max(full[(index(q), index(p))].norm());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{bose_occupation, SystemSpec};
    use crate::presets;
    use proptest::prelude::*;

    /// Population and coherence equations expanded by hand from the
    /// operator form. The `ρ21` row rotates with `+iΔ`; every other entry is
    /// as in the usual printed form.
    fn hand_expanded(spec: &SystemSpec) -> CMat {
        let r = build_rates(spec).unwrap();
        let gp = |c, l| r.gamma_plus(c, l);
        let gm = |c, l| r.gamma_minus(c, l);
        use Channel::*;
        use Level::*;
        let (mp, mm) = (r.middle_gain, r.middle_loss);
        let d = spec.delta();
        let re = |x: f64| C64::new(x, 0.0);
        let mut m = linalg::zeros(5, 5);
        // ρ11
        m[(0, 0)] = re(-(gm(C11, E1) + mm));
        m[(0, 1)] = re(mp);
        m[(0, 2)] = re(gp(C11, E1));
        m[(0, 3)] = re(-0.5 * gm(C12, E2));
        m[(0, 4)] = re(-0.5 * gm(C12, E2));
        // ρ22
        m[(1, 0)] = re(mm);
        m[(1, 1)] = re(-(gm(C22, E2) + mp));
        m[(1, 2)] = re(gp(C22, E2));
        m[(1, 3)] = re(-0.5 * gm(C12, E1));
        m[(1, 4)] = re(-0.5 * gm(C12, E1));
        // ρgg
        m[(2, 0)] = re(gm(C11, E1));
        m[(2, 1)] = re(gm(C22, E2));
        m[(2, 2)] = re(-(gp(C11, E1) + gp(C22, E2)));
        m[(2, 3)] = re(0.5 * (gm(C12, E1) + gm(C12, E2)));
        m[(2, 4)] = re(0.5 * (gm(C12, E1) + gm(C12, E2)));
        // ρ12 and ρ21
        let damp = -0.5 * (gm(C11, E1) + gm(C22, E2)) - 0.5 * (mp + mm);
        for (row, rot) in [(3, -d), (4, d)] {
            m[(row, 0)] = re(-0.5 * gm(C12, E1));
            m[(row, 1)] = re(-0.5 * gm(C12, E2));
            m[(row, 2)] = re(0.5 * (gp(C12, E1) + gp(C12, E2)));
            m[(row, row)] = C64::new(damp, rot);
        }
        m
    }

    fn specs() -> Vec<SystemSpec> {
        let mut v: Vec<_> = presets::figure_specs()
            .into_iter()
            .map(|(_, s)| s)
            .collect();
        v.extend(presets::random_family(21).take(50));
        v
    }

    #[test]
    fn generator_matches_hand_expansion() {
        for spec in specs() {
            let g = build_generator(&spec).unwrap();
            let diff = linalg::max_abs_diff(&g.m, &hand_expanded(&spec));
            assert!(diff < 1e-15, "{diff} for {spec:?}");
        }
    }

    #[test]
    fn commutator_and_expanded_forms_agree() {
        for spec in specs() {
            let g = build_generator(&spec).unwrap();
            let projected = project_block(&full_superoperator(&spec).unwrap());
            assert!(linalg::max_abs_diff(&g.m, &projected) < 1e-15);
            // Also on the full 9×9 space.
            let rates = build_rates(&spec).unwrap();
            let zero = CountingFields::zero(CountingKind::Energy);
            let expanded = full_counting_superoperator(&spec, &rates, &zero);
            assert_eq!(project_block(&expanded), g.m);
            let commutator = full_superoperator(&spec).unwrap();
            assert!(linalg::max_abs_diff(&expanded, &commutator) < 1e-15);
        }
    }

    #[test]
    fn trace_is_preserved() {
        for spec in specs() {
            assert!(build_generator(&spec).unwrap().trace_defect() < 1e-14);
        }
    }

    #[test]
    fn no_interference_decouples_coherences() {
        let g = build_generator(&presets::fig4(0.5)).unwrap();
        let spec = SystemSpec {
            g_m: 0.0,
            ..presets::fig4(0.5)
        };
        let g0 = build_generator(&spec).unwrap();
        for gen in [g, g0] {
            for p in 0..3 {
                for c in 3..5 {
                    assert_eq!(gen.m[(p, c)], C64::new(0.0, 0.0));
                    assert_eq!(gen.m[(c, p)], C64::new(0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn zero_field_counting_generator_is_bit_exact() {
        for spec in specs() {
            let g = build_generator(&spec).unwrap();
            for kind in [CountingKind::Energy, CountingKind::Particle] {
                let c = build_counting_generator(&spec, &CountingFields::zero(kind)).unwrap();
                for i in 0..5 {
                    for j in 0..5 {
                        assert_eq!(g.m[(i, j)], c.m[(i, j)]);
                    }
                }
            }
        }
    }

    #[test]
    fn counting_a_decoupled_bath_changes_nothing() {
        let spec = SystemSpec {
            g_r11: 0.0,
            g_r22: 0.0,
            g_r12: 0.0,
            ..presets::fig2(0.5, 0.0)
        };
        let g = build_generator(&spec).unwrap();
        let chi = CountingFields::on(Bath::Right, 0.3, CountingKind::Energy);
        let c = build_counting_generator(&spec, &chi).unwrap();
        assert_eq!(linalg::max_abs_diff(&g.m, &c.m), 0.0);
    }

    #[test]
    fn analytic_derivative_matches_finite_difference() {
        let h = 1e-5;
        for spec in specs().into_iter().take(20) {
            for kind in [CountingKind::Energy, CountingKind::Particle] {
                for bath in Bath::BOTH {
                    let plus = build_counting_generator(&spec, &CountingFields::on(bath, h, kind))
                        .unwrap();
                    let minus =
                        build_counting_generator(&spec, &CountingFields::on(bath, -h, kind))
                            .unwrap();
                    let an = generator_chi_derivative(&spec, &CountingFields::zero(kind), bath, 1)
                        .unwrap();
                    let fd = (&plus.m - &minus.m) * faer::Scale(C64::new(0.0, -0.5 / h));
                    for i in 0..5 {
                        for j in 0..5 {
                            let a = an[(i, j)];
                            let err = (fd[(i, j)] - a).norm();
                            assert!(err <= 1e-6 * a.norm().max(1e-12), "{i},{j}: {err} vs {a}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn second_derivative_is_sign_free() {
        let spec = presets::fig2(0.4, 0.9);
        let zero = CountingFields::zero(CountingKind::Energy);
        let h2 = generator_chi_derivative(&spec, &zero, Bath::Right, 2).unwrap();
        let rates = build_rates(&spec).unwrap();
        let lead = rates.lead(Bath::Right);
        // Gain g -> e1 lands on ρ11 at ε1² γ n, loss e1 -> g on ρgg at ε1² γ (1+n).
        let e1 = spec.eps1;
        assert!((h2[(0, 2)].re - e1 * e1 * lead.gain(Channel::C11, Level::E1)).abs() < 1e-16);
        assert!((h2[(2, 0)].re - e1 * e1 * lead.loss(Channel::C11, Level::E1)).abs() < 1e-16);
        let h1 = generator_chi_derivative(&spec, &zero, Bath::Right, 1).unwrap();
        assert!(h1[(0, 2)].re < 0.0 && h1[(2, 0)].re > 0.0);
    }

    #[test]
    fn particle_derivative_entry() {
        let spec = SystemSpec {
            g_r11: 0.004,
            ..presets::fig4(0.8)
        };
        let zero = CountingFields::zero(CountingKind::Particle);
        let h1 = generator_chi_derivative(&spec, &zero, Bath::Right, 1).unwrap();
        let n = bose_occupation(spec.eps1, spec.temp_r).unwrap();
        assert!((h1[(2, 0)].re - 0.004 * (1.0 + n)).abs() < 1e-16);
        // With the channel switched off the entry vanishes.
        let h1 = generator_chi_derivative(&presets::fig4(0.8), &zero, Bath::Right, 1).unwrap();
        assert_eq!(h1[(2, 0)], C64::new(0.0, 0.0));
    }

    #[test]
    fn derivative_order_is_checked() {
        let spec = presets::fig4(0.8);
        let zero = CountingFields::zero(CountingKind::Energy);
        assert!(matches!(
            generator_chi_derivative(&spec, &zero, Bath::Left, 0),
            Err(Error::Usage(_))
        ));
        assert!(matches!(
            generator_chi_derivative(&spec, &zero, Bath::Left, 5),
            Err(Error::Usage(_))
        ));
        let uncoupled = SystemSpec {
            g_r11: 0.0,
            g_r22: 0.0,
            ..spec
        };
        let h = generator_chi_derivative(&uncoupled, &zero, Bath::Right, 3).unwrap();
        assert_eq!(linalg::max_abs(&h), 0.0);
    }

    #[test]
    fn block_decoupling_holds() {
        for spec in specs() {
            assert!(verify_block_decoupling(&spec).unwrap() <= 1e-14);
        }
    }

    #[test]
    fn zero_field_spectrum_is_stable() {
        for spec in specs() {
            let g = build_generator(&spec).unwrap();
            let mut ev = linalg::eigenvalues(&g.m).unwrap();
            ev.sort_by(|a, b| a.norm().partial_cmp(&b.norm()).unwrap());
            assert!(ev[0].norm() < 1e-12, "{:?}", ev[0]);
            assert!(ev[1..].iter().all(|z| z.re < 0.0), "{ev:?}");
        }
    }

    #[test]
    fn reflected_fields_give_conjugate_spectrum() {
        let spec = presets::fig2(0.2, 0.9);
        for chi in [0.05, 0.1, 0.7] {
            let plus = build_counting_generator(
                &spec,
                &CountingFields::on(Bath::Right, chi, CountingKind::Energy),
            )
            .unwrap();
            let minus = build_counting_generator(
                &spec,
                &CountingFields::on(Bath::Right, -chi, CountingKind::Energy),
            )
            .unwrap();
            let mut a: Vec<C64> = linalg::eigenvalues(&plus.m).unwrap();
            let b: Vec<C64> = linalg::eigenvalues(&minus.m).unwrap();
            for z in &mut a {
                *z = z.conj();
            }
            for z in &a {
                let nearest = b.iter().map(|w| (w - z).norm()).fold(f64::MAX, f64::min);
                assert!(nearest < 1e-13);
            }
        }
    }

    #[test]
    fn text_dump_round_trips() {
        let spec = presets::fig2(0.3, 0.6);
        let chi = CountingFields::on(Bath::Left, 0.125, CountingKind::Particle);
        let g = build_counting_generator(&spec, &chi).unwrap();
        let text = g.to_text();
        assert!(text.starts_with("# vflux-generator v1\n"));
        let back = Generator::from_text(&text).unwrap();
        assert_eq!(back.chi, chi);
        assert_eq!(linalg::max_abs_diff(&back.m, &g.m), 0.0);
        assert!(Generator::from_text("1,0 2,0\n").is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn zero_field_generator_preserves_hermiticity(seed in 0u64..10_000) {
            let spec = presets::random_family(seed).next().unwrap();
            let g = build_generator(&spec).unwrap();
            let z = C64::new(0.13, -0.4);
            let v = StateVector([
                C64::new(0.2, 0.0), C64::new(0.3, 0.0), C64::new(0.5, 0.0), z, z.conj(),
            ]);
            let out = g.apply(&v);
            prop_assert!(out.hermiticity_defect() < 1e-15);
            prop_assert!(g.trace_defect() < 1e-14);
        }
    }
}
