// Copyright 2026 vflux Contributors
// SPDX-License-Identifier: Apache-2.0

//! Full counting statistics of the energy or particle flow into a lead.
//!
//! The cumulant generating function is the eigenvalue `E0(χ)` of the
//! dressed generator that is continuously connected to `E0(0) = 0`.
//! Cumulants are its derivatives with respect to `iχ` at zero, computed
//! three ways:
//!
//! * directly, `E1 = ⟨I|H1|P0⟩`;
//! * by the projected-resolvent recursion, to any order up to four;
//! * by central differences of the tracked eigenvalue.

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::liouvillian::{
    derivative_from_rates, generator_from_rates, Generator, MAX_DERIVATIVE_ORDER, TRACE_ROW,
};
use crate::model::{build_rates, Bath, CountingFields, CountingKind, RateSet, SystemSpec};
use crate::steady::{steady_state, SteadyState};

/// Relative singular-value cutoff of the pseudoinverse.
pub const PINV_CUTOFF: f64 = 1e-12;
/// Two eigenvalues closer than this cannot be told apart by tracking.
pub const BRANCH_SEPARATION: f64 = 1e-9;
/// Largest field increment between two tracking steps.
pub const BRANCH_STEP: f64 = 1e-3;
/// Imaginary residue above which a cumulant is flagged.
pub const IMAG_WARNING: f64 = 1e-10;
/// Default finite-difference step.
pub const DEFAULT_FD_STEP: f64 = 1e-4;
pub const FD_STEP_RANGE: (f64, f64) = (1e-6, 1e-2);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CumulantMethod {
    Direct,
    Perturbative,
    FiniteDifference,
}

impl CumulantMethod {
    pub fn tag(self) -> &'static str {
        match self {
            CumulantMethod::Direct => "direct",
            CumulantMethod::Perturbative => "perturbative",
            CumulantMethod::FiniteDifference => "finite_difference",
        }
    }
}

/// Cumulants `E1..EN` of the flow into one lead.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulantSet {
    pub bath: Bath,
    pub kind: CountingKind,
    pub values: Vec<f64>,
    pub method: CumulantMethod,
    /// Largest imaginary part dropped when reporting `values`.
    pub imag_residue: f64,
}

impl CumulantSet {
    fn from_complex(
        bath: Bath,
        kind: CountingKind,
        method: CumulantMethod,
        values: &[C64],
    ) -> Self {
        Self {
            bath,
            kind,
            values: values.iter().map(|z| z.re).collect(),
            method,
            imag_residue: values.iter().map(|z| z.im.abs()).fold(0.0, f64::max),
        }
    }

    /// Current into the lead.
    pub fn current(&self) -> f64 {
        self.values[0]
    }

    /// Zero-frequency noise power, when computed.
    pub fn noise(&self) -> Option<f64> {
        self.values.get(1).copied()
    }

    pub fn imag_warning(&self) -> bool {
        self.imag_residue > IMAG_WARNING
    }
}

fn fields_at(bath: Bath, chi: f64, kind: CountingKind) -> CountingFields {
    CountingFields::on(bath, chi, kind)
}

fn nearest(values: &[C64], target: C64) -> Result<C64> {
    let mut by_distance: Vec<C64> = values.to_vec();
    by_distance.sort_by(|a, b| (a - target).norm().total_cmp(&(b - target).norm()));
    let (best, next) = (by_distance[0], by_distance[1]);
    if (best - next).norm() < BRANCH_SEPARATION {
        return Err(Error::Branch(format!(
            "eigenvalues {best} and {next} are closer than {BRANCH_SEPARATION:e}"
        )));
    }
    Ok(best)
}

fn tracked_eigenvalue(spec: &SystemSpec, rates: &RateSet, chi: &CountingFields) -> Result<C64> {
    let start = generator_from_rates(spec, rates, &CountingFields::zero(chi.kind));
    let mut current = nearest(&linalg::eigenvalues(&start.m)?, C64::new(0.0, 0.0))?;
    if chi.is_zero() {
        return Ok(current);
    }
    let size = chi.chi_l.abs().max(chi.chi_r.abs());
    let halvings = (size / BRANCH_STEP).log2().ceil().clamp(0.0, 60.0) as i32;
    for k in (0..=halvings).rev() {
        let s = 0.5_f64.powi(k);
        let step = CountingFields {
            chi_l: chi.chi_l * s,
            chi_r: chi.chi_r * s,
            kind: chi.kind,
        };
        let gen = generator_from_rates(spec, rates, &step);
        current = nearest(&linalg::eigenvalues(&gen.m)?, current)?;
    }
    Ok(current)
}

/// Cumulant generating function `E0(χ)`, tracked continuously from zero
/// field through the sequence `χ/2^K, …, χ/2, χ`.
pub fn dominant_eigenvalue(spec: &SystemSpec, chi: &CountingFields) -> Result<C64> {
    let rates = build_rates(spec)?;
    tracked_eigenvalue(spec, &rates, chi)
}

/// Building blocks of the perturbative expansion at zero field.
#[derive(Debug, Clone)]
pub struct Expansion {
    pub steady: SteadyState,
    pub p0: [C64; 5],
    /// Projected resolvent `Q·L⁺·Q`.
    pub r: CMat,
    /// `Q = 1 − |P0⟩⟨I|`.
    pub q: CMat,
    pub generator: Generator,
}

impl Expansion {
    pub fn new(spec: &SystemSpec) -> Result<Self> {
        let rates = build_rates(spec)?;
        Self::from_rates(spec, &rates)
    }

    fn from_rates(spec: &SystemSpec, rates: &RateSet) -> Result<Self> {
        let generator =
            generator_from_rates(spec, rates, &CountingFields::zero(CountingKind::Energy));
        let steady = steady_state(&generator)?;
        let p0 = steady.state.0;
        let (pinv, discarded) = linalg::pseudo_inverse(&generator.m, PINV_CUTOFF)?;
        if discarded != 1 {
            return Err(Error::DegenerateSteadyState(format!(
                "{discarded} singular values below the pseudoinverse cutoff, expected 1"
            )));
        }
        let q = CMat::from_fn(5, 5, |i, j| {
            let id = if i == j {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            };
            id - p0[i] * TRACE_ROW[j]
        });
        let r = &q * &pinv * &q;
        Ok(Self {
            steady,
            p0,
            r,
            q,
            generator,
        })
    }
}

/// Projected resolvent `R = Q·L⁺·Q` of the undressed generator.
pub fn pseudo_inverse_r(spec: &SystemSpec) -> Result<CMat> {
    Ok(Expansion::new(spec)?.r)
}

/// `E1 = ⟨I| ∂L/∂(iχ) |P0⟩`.
pub fn first_cumulant_direct(spec: &SystemSpec, bath: Bath, kind: CountingKind) -> Result<f64> {
    let rates = build_rates(spec)?;
    let gen = generator_from_rates(spec, &rates, &CountingFields::zero(kind));
    let p0 = steady_state(&gen)?.state.0;
    let h1 = derivative_from_rates(&rates, &CountingFields::zero(kind), bath, 1)?;
    Ok(linalg::dot(&TRACE_ROW, &linalg::matvec(&h1, &p0)).re)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Cumulants `E1..EN`, `N ≤ 4`, by the projected-resolvent recursion
///
/// `E_N = Σ_n C(N,n)⟨I|H_n|P_{N−n}⟩ − Σ_k C(N,k) E_k ⟨I|P_{N−k}⟩`,
/// `P_N = R Σ_n C(N,n)(E_n − H_n)|P_{N−n}⟩`,
///
/// with `H_n = ∂ⁿL/∂(iχ)ⁿ` at zero field.
pub fn cumulants_perturbative(
    spec: &SystemSpec,
    bath: Bath,
    kind: CountingKind,
    order: usize,
) -> Result<CumulantSet> {
    if order == 0 || order > MAX_DERIVATIVE_ORDER as usize {
        return Err(Error::Usage(format!(
            "cumulant order must be in 1..={MAX_DERIVATIVE_ORDER}, got {order}"
        )));
    }
    let rates = build_rates(spec)?;
    let ex = Expansion::from_rates(spec, &rates)?;
    let zero = CountingFields::zero(kind);
    let h: Vec<CMat> = (1..=order as u32)
        .map(|n| derivative_from_rates(&rates, &zero, bath, n))
        .collect::<Result<_>>()?;
    let e = recursion(&ex, &h);
    Ok(CumulantSet::from_complex(
        bath,
        kind,
        CumulantMethod::Perturbative,
        &e,
    ))
}

/// Runs the recursion on given `H_1..H_N`.
pub(crate) fn recursion(ex: &Expansion, h: &[CMat]) -> Vec<C64> {
    let order = h.len();
    let mut p: Vec<Vec<C64>> = vec![ex.p0.to_vec()];
    let mut e: Vec<C64> = Vec::with_capacity(order);
    let project = |v: &[C64]| linalg::dot(&TRACE_ROW, v);
    for n_tot in 1..=order {
        let mut en = C64::new(0.0, 0.0);
        for n in 1..=n_tot {
            en += project(&linalg::matvec(&h[n - 1], &p[n_tot - n])) * binomial(n_tot, n);
        }
        for k in 1..n_tot {
            en -= e[k - 1] * project(&p[n_tot - k]) * binomial(n_tot, k);
        }
        e.push(en);
        if n_tot == order {
            break;
        }
        let mut acc = vec![C64::new(0.0, 0.0); 5];
        for n in 1..=n_tot {
            let prev = &p[n_tot - n];
            let hp = linalg::matvec(&h[n - 1], prev);
            let c = binomial(n_tot, n);
            for i in 0..5 {
                acc[i] += (e[n - 1] * prev[i] - hp[i]) * c;
            }
        }
        p.push(linalg::matvec(&ex.r, &acc));
    }
    e
}

/// First and optionally second cumulant from central differences of the
/// tracked eigenvalue, refined by one Richardson step.
pub fn cumulants_finite_difference(
    spec: &SystemSpec,
    bath: Bath,
    kind: CountingKind,
    order: usize,
    h: f64,
) -> Result<CumulantSet> {
    if !(h >= FD_STEP_RANGE.0 && h <= FD_STEP_RANGE.1) {
        return Err(Error::Usage(format!(
            "finite-difference step {h} outside [{:e}, {:e}]",
            FD_STEP_RANGE.0, FD_STEP_RANGE.1
        )));
    }
    if order == 0 || order > 2 {
        return Err(Error::Usage(format!(
            "finite differences give orders 1 and 2, got {order}"
        )));
    }
    let rates = build_rates(spec)?;
    let g = |chi: f64| tracked_eigenvalue(spec, &rates, &fields_at(bath, chi, kind));
    let g0 = g(0.0)?;
    let mut first = Vec::with_capacity(2);
    let mut second = Vec::with_capacity(2);
    for step in [h, h / 2.0] {
        let (gp, gm) = (g(step)?, g(-step)?);
        first.push((gp - gm) / (2.0 * step));
        second.push((gp - g0 * 2.0 + gm) / (step * step));
    }
    let richardson = |d: &[C64]| (d[1] * 4.0 - d[0]) / 3.0;
    let i = C64::new(0.0, 1.0);
    // d/d(iχ) = −i d/dχ
    let mut values = vec![-i * richardson(&first)];
    if order == 2 {
        values.push(-richardson(&second));
    }
    Ok(CumulantSet::from_complex(
        bath,
        kind,
        CumulantMethod::FiniteDifference,
        &values,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn cgf_vanishes_at_zero_field() {
        for (_, spec) in presets::figure_specs() {
            let Ok(e) = dominant_eigenvalue(&spec, &CountingFields::zero(CountingKind::Energy))
            else {
                continue;
            };
            assert!(e.norm() < 1e-12);
        }
    }

    #[test]
    fn cgf_is_conjugate_symmetric() {
        let spec = presets::fig4(1.0);
        for chi in [0.05, 0.1] {
            let plus =
                dominant_eigenvalue(&spec, &fields_at(Bath::Right, chi, CountingKind::Energy))
                    .unwrap();
            let minus =
                dominant_eigenvalue(&spec, &fields_at(Bath::Right, -chi, CountingKind::Energy))
                    .unwrap();
            assert!((plus.conj() - minus).norm() < 1e-14);
            assert!(plus.re < 0.0);
        }
    }

    #[test]
    fn cgf_leading_order() {
        let spec = presets::fig4(1.0);
        let chi = 1e-4;
        let e =
            dominant_eigenvalue(&spec, &fields_at(Bath::Right, chi, CountingKind::Energy)).unwrap();
        let j = first_cumulant_direct(&spec, Bath::Right, CountingKind::Energy).unwrap();
        let lead = C64::new(0.0, chi * j);
        assert!((e - lead).norm() < 1e-3 * lead.norm());
    }

    #[test]
    fn degenerate_corner_has_no_branch() {
        let spec = presets::fig2(1.0, 1.0);
        let r = dominant_eigenvalue(&spec, &fields_at(Bath::Right, 0.01, CountingKind::Energy));
        assert!(matches!(r, Err(Error::Branch(_))));
        assert!(matches!(
            cumulants_perturbative(&spec, Bath::Right, CountingKind::Energy, 2),
            Err(Error::DegenerateSteadyState(_))
        ));
    }

    #[test]
    fn tracking_follows_large_fields() {
        let spec = presets::fig2b(2.0, 1.0);
        let kind = CountingKind::Particle;
        let mut prev = C64::new(0.0, 0.0);
        // Walk the field outward; the tracked value moves continuously.
        for k in 1..=40 {
            let chi = 0.05 * k as f64;
            let e = dominant_eigenvalue(&spec, &fields_at(Bath::Left, chi, kind)).unwrap();
            assert!((e - prev).norm() < 0.05 * 0.05, "{chi}");
            prev = e;
        }
    }

    #[test]
    fn resolvent_identities() {
        for spec in [
            presets::fig4(1.0),
            presets::fig2b(2.0, 1.0),
            presets::fig3(0.3, 0.8, 1.5, 0.6),
        ] {
            let ex = Expansion::new(&spec).unwrap();
            let rl = &ex.r * &ex.generator.m;
            let lr = &ex.generator.m * &ex.r;
            assert!(linalg::max_abs_diff(&rl, &ex.q) < 1e-9);
            assert!(linalg::max_abs_diff(&lr, &ex.q) < 1e-9);
            let rp = linalg::matvec(&ex.r, &ex.p0);
            assert!(rp.iter().all(|x| x.norm() < 1e-12));
            let ir = linalg::vecmat(&TRACE_ROW, &ex.r);
            assert!(ir.iter().all(|x| x.norm() < 1e-12));
        }
    }

    #[test]
    fn equilibrium_has_no_current() {
        let spec = SystemSpec {
            temp_l: 0.8,
            temp_r: 0.8,
            temp_m: 0.8,
            ..presets::fig5(0.004, 1.0)
        };
        for bath in Bath::BOTH {
            for kind in [CountingKind::Energy, CountingKind::Particle] {
                assert!(first_cumulant_direct(&spec, bath, kind).unwrap().abs() < 1e-12);
                let fd = cumulants_finite_difference(&spec, bath, kind, 1, 1e-4).unwrap();
                assert!(fd.current().abs() < 1e-8);
            }
        }
    }

    #[test]
    fn decoupled_lead_counts_nothing() {
        let spec = SystemSpec {
            g_r11: 0.0,
            g_r22: 0.0,
            g_r12: 0.0,
            g_m: 0.01,
            ..presets::fig4(1.0)
        };
        let spec = SystemSpec {
            g_l22: 0.01,
            ..spec
        };
        let c = cumulants_perturbative(&spec, Bath::Right, CountingKind::Energy, 4).unwrap();
        assert!(c.values.iter().all(|&v| v == 0.0));
        assert_eq!(
            first_cumulant_direct(&spec, Bath::Right, CountingKind::Energy).unwrap(),
            0.0
        );
    }

    #[test]
    fn methods_agree_on_first_cumulant() {
        let mut specs: Vec<SystemSpec> = presets::figure_specs()
            .into_iter()
            .map(|(_, s)| s)
            .collect();
        specs.extend(presets::random_family(77).take(100));
        for spec in specs {
            if steady_state(&crate::liouvillian::build_generator(&spec).unwrap()).is_err() {
                continue;
            }
            for bath in Bath::BOTH {
                for kind in [CountingKind::Energy, CountingKind::Particle] {
                    let d = first_cumulant_direct(&spec, bath, kind).unwrap();
                    let p = cumulants_perturbative(&spec, bath, kind, 2).unwrap();
                    let f = cumulants_finite_difference(&spec, bath, kind, 2, 1e-4).unwrap();
                    assert!((p.current() - d).abs() <= 1e-12, "{d} {}", p.current());
                    assert!((f.current() - d).abs() <= 1e-7);
                    assert!(p.noise().unwrap() >= -1e-10);
                }
            }
        }
    }

    #[test]
    fn second_cumulant_matches_finite_difference() {
        let spec = presets::fig4(1.0);
        let p = cumulants_perturbative(&spec, Bath::Right, CountingKind::Energy, 2).unwrap();
        let f =
            cumulants_finite_difference(&spec, Bath::Right, CountingKind::Energy, 2, 1e-4).unwrap();
        assert!(rel(f.values[1], p.values[1]) < 1e-4);
        assert!(p.imag_residue < 1e-12 && !p.imag_warning());
    }

    #[test]
    fn second_cumulant_matches_closed_expansion() {
        // E2 = ⟨I|H2|P0⟩ − 2⟨I|(H1 − E1) R (H1 − E1)|P0⟩
        let spec = presets::fig3(0.4, 0.9, 1.7, 0.6);
        let ex = Expansion::new(&spec).unwrap();
        let zero = CountingFields::zero(CountingKind::Energy);
        let rates = build_rates(&spec).unwrap();
        let h1 = derivative_from_rates(&rates, &zero, Bath::Left, 1).unwrap();
        let h2 = derivative_from_rates(&rates, &zero, Bath::Left, 2).unwrap();
        let e1 = linalg::dot(&TRACE_ROW, &linalg::matvec(&h1, &ex.p0));
        let shifted = |v: &[C64]| {
            let hv = linalg::matvec(&h1, v);
            hv.iter()
                .zip(v)
                .map(|(a, b)| a - e1 * b)
                .collect::<Vec<_>>()
        };
        let inner = shifted(&linalg::matvec(&ex.r, &shifted(&ex.p0)));
        let e2 = linalg::dot(&TRACE_ROW, &linalg::matvec(&h2, &ex.p0))
            - linalg::dot(&TRACE_ROW, &inner) * 2.0;
        let c = cumulants_perturbative(&spec, Bath::Left, CountingKind::Energy, 2).unwrap();
        assert!((c.values[1] - e2.re).abs() < 1e-15);
    }

    #[test]
    fn higher_cumulants_match_iterated_differences() {
        // Third and fourth cumulants against seven-point stencils on the
        // tracked eigenvalue.
        let spec = presets::fig4(1.4);
        let c = cumulants_perturbative(&spec, Bath::Right, CountingKind::Particle, 4).unwrap();
        let h = 2e-2;
        let g = |k: f64| {
            dominant_eigenvalue(
                &spec,
                &fields_at(Bath::Right, k * h, CountingKind::Particle),
            )
            .unwrap()
        };
        let (m3, m2, m1, z, p1, p2, p3) =
            (g(-3.0), g(-2.0), g(-1.0), g(0.0), g(1.0), g(2.0), g(3.0));
        // Fourth-order accurate third and fourth derivatives.
        let d3 = (m3 * (1.0 / 8.0) - m2 + m1 * (13.0 / 8.0) - p1 * (13.0 / 8.0) + p2
            - p3 * (1.0 / 8.0))
            / (h * h * h);
        let d4 = (m3 * (-1.0 / 6.0) + m2 * 2.0 - m1 * (13.0 / 2.0) + z * (28.0 / 3.0)
            - p1 * (13.0 / 2.0)
            + p2 * 2.0
            - p3 * (1.0 / 6.0))
            / (h * h * h * h);
        // d³/d(iχ)³ = i d³/dχ³, d⁴/d(iχ)⁴ = d⁴/dχ⁴
        let e3 = C64::new(0.0, 1.0) * d3;
        assert!(rel(e3.re, c.values[2]) < 1e-4, "{} {}", e3.re, c.values[2]);
        assert!(rel(d4.re, c.values[3]) < 1e-3, "{} {}", d4.re, c.values[3]);
    }

    #[test]
    fn particle_flows_balance() {
        for spec in presets::random_family(3).take(50) {
            let l = first_cumulant_direct(&spec, Bath::Left, CountingKind::Particle).unwrap();
            let r = first_cumulant_direct(&spec, Bath::Right, CountingKind::Particle).unwrap();
            assert!((l + r).abs() < 1e-10);
        }
    }

    #[test]
    fn guards() {
        let spec = presets::fig4(1.0);
        for h in [1e-7, 0.02, f64::NAN] {
            assert!(matches!(
                cumulants_finite_difference(&spec, Bath::Left, CountingKind::Energy, 1, h),
                Err(Error::Usage(_))
            ));
        }
        assert!(matches!(
            cumulants_perturbative(&spec, Bath::Left, CountingKind::Energy, 5),
            Err(Error::Usage(_))
        ));
    }
}
