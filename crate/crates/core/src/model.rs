// Copyright 2026 vflux Contributors
// SPDX-License-Identifier: Apache-2.0

//! System parameters, validation, and bath transition rates.
//!
//! Units are dimensionless with ħ = k_B = 1. The ground state sits at zero
//! energy and the excited levels obey `eps1 >= eps2 > 0`.
//!
//! Rates follow the flat-coupling Bose model: for a lead `u` and channel
//! `(i, j)` evaluated at level energy `ε`,
//!
//! ```text
//! gain_u = γ^u_ij · n_u(ε)          loss_u = γ^u_ij · (1 + n_u(ε))
//! ```
//!
//! The left and right leads are kept separate so that counting fields can
//! dress each lead before the two contributions are summed.

use std::fmt;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest excited-state gap accepted when the middle bath is coupled.
pub const DELTA_MIN: f64 = 1e-9;

/// One nonequilibrium scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SystemSpec {
    pub eps1: f64,
    pub eps2: f64,
    pub temp_l: f64,
    pub temp_m: f64,
    pub temp_r: f64,
    pub g_l11: f64,
    pub g_l22: f64,
    pub g_l12: f64,
    pub g_r11: f64,
    pub g_r22: f64,
    pub g_r12: f64,
    pub g_m: f64,
}

impl SystemSpec {
    /// Serialized field names, in declaration order.
    pub const FIELD_NAMES: [&'static str; 12] = [
        "eps1", "eps2", "tempL", "tempM", "tempR", "gL11", "gL22", "gL12", "gR11", "gR22", "gR12",
        "gM",
    ];

    pub fn field(&self, name: &str) -> Option<f64> {
        Some(match name {
            "eps1" => self.eps1,
            "eps2" => self.eps2,
            "tempL" => self.temp_l,
            "tempM" => self.temp_m,
            "tempR" => self.temp_r,
            "gL11" => self.g_l11,
            "gL22" => self.g_l22,
            "gL12" => self.g_l12,
            "gR11" => self.g_r11,
            "gR22" => self.g_r22,
            "gR12" => self.g_r12,
            "gM" => self.g_m,
            _ => return None,
        })
    }

    pub fn set_field(&mut self, name: &str, value: f64) -> Result<()> {
        let slot = match name {
            "eps1" => &mut self.eps1,
            "eps2" => &mut self.eps2,
            "tempL" => &mut self.temp_l,
            "tempM" => &mut self.temp_m,
            "tempR" => &mut self.temp_r,
            "gL11" => &mut self.g_l11,
            "gL22" => &mut self.g_l22,
            "gL12" => &mut self.g_l12,
            "gR11" => &mut self.g_r11,
            "gR22" => &mut self.g_r22,
            "gR12" => &mut self.g_r12,
            "gM" => &mut self.g_m,
            _ => return Err(Error::Usage(format!("unknown SystemSpec field `{name}`"))),
        };
        *slot = value;
        Ok(())
    }

    pub fn values(&self) -> [f64; 12] {
        Self::FIELD_NAMES.map(|n| self.field(n).unwrap())
    }

    pub fn delta(&self) -> f64 {
        self.eps1 - self.eps2
    }

    pub fn level(&self, level: Level) -> f64 {
        match level {
            Level::E1 => self.eps1,
            Level::E2 => self.eps2,
        }
    }

    pub fn temperature(&self, bath: Bath) -> f64 {
        match bath {
            Bath::Left => self.temp_l,
            Bath::Right => self.temp_r,
        }
    }

    /// Coupling coefficient of `bath` on `channel`.
    pub fn coupling(&self, bath: Bath, channel: Channel) -> f64 {
        match (bath, channel) {
            (Bath::Left, Channel::C11) => self.g_l11,
            (Bath::Left, Channel::C22) => self.g_l22,
            (Bath::Left, Channel::C12) => self.g_l12,
            (Bath::Right, Channel::C11) => self.g_r11,
            (Bath::Right, Channel::C22) => self.g_r22,
            (Bath::Right, Channel::C12) => self.g_r12,
        }
    }

    /// Largest admissible cross coefficient `sqrt(γ11 γ22)` for `bath`.
    pub fn interference_bound(&self, bath: Bath) -> f64 {
        (self.coupling(bath, Channel::C11) * self.coupling(bath, Channel::C22)).sqrt()
    }

    /// Same spec with the left and right leads exchanged.
    pub fn mirrored(&self) -> Self {
        Self {
            temp_l: self.temp_r,
            temp_r: self.temp_l,
            g_l11: self.g_r11,
            g_l22: self.g_r22,
            g_l12: self.g_r12,
            g_r11: self.g_l11,
            g_r22: self.g_l22,
            g_r12: self.g_l12,
            ..*self
        }
    }
}

/// The two leads that carry counting fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Bath {
    #[serde(rename = "L")]
    Left,
    #[serde(rename = "R")]
    Right,
}

impl Bath {
    pub const BOTH: [Bath; 2] = [Bath::Left, Bath::Right];

    fn index(self) -> usize {
        match self {
            Bath::Left => 0,
            Bath::Right => 1,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Bath::Left => "L",
            Bath::Right => "R",
        }
    }
}

/// Excited level; the ground state is implicit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Level {
    E1,
    E2,
}

impl Level {
    pub const BOTH: [Level; 2] = [Level::E1, Level::E2];

    pub fn index(self) -> usize {
        match self {
            Level::E1 => 0,
            Level::E2 => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        match i {
            0 => Level::E1,
            1 => Level::E2,
            _ => panic!("excited level index {i} out of range"),
        }
    }
}

/// Symmetric coupling channel `(i, j)` between the excited levels and ground.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    C11,
    C22,
    C12,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::C11, Channel::C22, Channel::C12];

    /// Channel of the ordered pair of excited levels; `(1, 2)` and `(2, 1)`
    /// share a coefficient.
    pub fn of(i: Level, j: Level) -> Self {
        match (i, j) {
            (Level::E1, Level::E1) => Channel::C11,
            (Level::E2, Level::E2) => Channel::C22,
            _ => Channel::C12,
        }
    }

    fn index(self) -> usize {
        match self {
            Channel::C11 => 0,
            Channel::C22 => 1,
            Channel::C12 => 2,
        }
    }
}

/// Quantity transferred into a counted bath.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CountingKind {
    Energy,
    Particle,
}

impl CountingKind {
    pub fn tag(self) -> &'static str {
        match self {
            CountingKind::Energy => "energy",
            CountingKind::Particle => "particle",
        }
    }

    /// Quantum carried by one emission at `omega`.
    pub fn quantum(self, omega: f64) -> f64 {
        match self {
            CountingKind::Energy => omega,
            CountingKind::Particle => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CountingFields {
    pub chi_l: f64,
    pub chi_r: f64,
    pub kind: CountingKind,
}

impl CountingFields {
    pub fn zero(kind: CountingKind) -> Self {
        Self {
            chi_l: 0.0,
            chi_r: 0.0,
            kind,
        }
    }

    /// Field `chi` on a single bath, zero on the other.
    pub fn on(bath: Bath, chi: f64, kind: CountingKind) -> Self {
        match bath {
            Bath::Left => Self {
                chi_l: chi,
                chi_r: 0.0,
                kind,
            },
            Bath::Right => Self {
                chi_l: 0.0,
                chi_r: chi,
                kind,
            },
        }
    }

    pub fn chi(&self, bath: Bath) -> f64 {
        match bath {
            Bath::Left => self.chi_l,
            Bath::Right => self.chi_r,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.chi_l == 0.0 && self.chi_r == 0.0
    }
}

/// Bose-Einstein occupation `1 / (exp(omega / temp) - 1)`.
pub fn bose_occupation(omega: f64, temp: f64) -> Result<f64> {
    if !(omega > 0.0) {
        return Err(Error::Domain(format!(
            "Bose occupation needs a positive frequency, got {omega}"
        )));
    }
    if !(temp > 0.0) {
        return Err(Error::Domain(format!(
            "Bose occupation needs a positive temperature, got {temp}"
        )));
    }
    Ok(1.0 / (omega / temp).exp_m1())
}

/// Rates contributed by one lead, indexed `[channel][level]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LeadRates {
    pub gain: [[f64; 2]; 3],
    pub loss: [[f64; 2]; 3],
}

impl LeadRates {
    pub fn gain(&self, channel: Channel, level: Level) -> f64 {
        self.gain[channel.index()][level.index()]
    }

    pub fn loss(&self, channel: Channel, level: Level) -> f64 {
        self.loss[channel.index()][level.index()]
    }
}

/// Undressed transition rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateSet {
    pub leads: [LeadRates; 2],
    pub middle_gain: f64,
    pub middle_loss: f64,
    pub delta: f64,
    pub levels: [f64; 2],
}

impl RateSet {
    pub fn lead(&self, bath: Bath) -> &LeadRates {
        &self.leads[bath.index()]
    }

    /// Γ⁺ on `channel` at the energy of `level`, summed over both leads.
    pub fn gamma_plus(&self, channel: Channel, level: Level) -> f64 {
        self.leads[0].gain(channel, level) + self.leads[1].gain(channel, level)
    }

    /// Γ⁻ on `channel` at the energy of `level`, summed over both leads.
    pub fn gamma_minus(&self, channel: Channel, level: Level) -> f64 {
        self.leads[0].loss(channel, level) + self.leads[1].loss(channel, level)
    }

    pub fn level(&self, level: Level) -> f64 {
        self.levels[level.index()]
    }
}

/// Undressed rates built from a validated spec.
pub fn build_rates(spec: &SystemSpec) -> Result<RateSet> {
    let violations = validate(spec);
    if !violations.is_empty() {
        return Err(Error::InvalidSpec(violations));
    }
    let mut leads = [LeadRates::default(); 2];
    for bath in Bath::BOTH {
        let temp = spec.temperature(bath);
        let lead = &mut leads[bath.index()];
        for channel in Channel::ALL {
            let g = spec.coupling(bath, channel);
            if g == 0.0 {
                continue;
            }
            for level in Level::BOTH {
                let omega = spec.level(level);
                // A channel only reaches a level energy it couples to.
                if omega == 0.0 {
                    continue;
                }
                let n = bose_occupation(omega, temp)?;
                lead.gain[channel.index()][level.index()] = g * n;
                lead.loss[channel.index()][level.index()] = g * (1.0 + n);
            }
        }
    }
    let delta = spec.delta();
    let (middle_gain, middle_loss) = if spec.g_m > 0.0 {
        let n = bose_occupation(delta, spec.temp_m)?;
        (spec.g_m * n, spec.g_m * (1.0 + n))
    } else {
        (0.0, 0.0)
    };
    Ok(RateSet {
        leads,
        middle_gain,
        middle_loss,
        delta,
        levels: [spec.eps1, spec.eps2],
    })
}

/// Complex per-lead rates, indexed `[channel][level]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DressedLead {
    pub gain: [[C64; 2]; 3],
    pub loss: [[C64; 2]; 3],
}

/// Rates after counting-field dressing.
///
/// Only the lead rates are dressed. The middle-bath rates are copied as is.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DressedRateSet {
    pub leads: [DressedLead; 2],
    pub middle_gain: f64,
    pub middle_loss: f64,
    pub delta: f64,
    pub levels: [f64; 2],
}

impl DressedRateSet {
    pub fn gamma_plus(&self, channel: Channel, level: Level) -> C64 {
        let (c, l) = (channel.index(), level.index());
        self.leads[0].gain[c][l] + self.leads[1].gain[c][l]
    }

    pub fn gamma_minus(&self, channel: Channel, level: Level) -> C64 {
        let (c, l) = (channel.index(), level.index());
        self.leads[0].loss[c][l] + self.leads[1].loss[c][l]
    }

    pub fn lead(&self, bath: Bath) -> &DressedLead {
        &self.leads[bath.index()]
    }
}

fn phase(angle: f64) -> C64 {
    C64::new(angle.cos(), angle.sin())
}

/// Multiply each lead's gain by `exp(-i q χ)` and loss by `exp(+i q χ)`,
/// with `q` the transferred quantum at the level energy.
pub fn dress_rates(rates: &RateSet, chi: &CountingFields) -> DressedRateSet {
    let mut leads = [DressedLead::default(); 2];
    for bath in Bath::BOTH {
        let lead = rates.lead(bath);
        let out = &mut leads[bath.index()];
        let x = chi.chi(bath);
        for c in 0..3 {
            for l in 0..2 {
                let q = chi.kind.quantum(rates.levels[l]);
                out.gain[c][l] = C64::new(lead.gain[c][l], 0.0) * phase(-q * x);
                out.loss[c][l] = C64::new(lead.loss[c][l], 0.0) * phase(q * x);
            }
        }
    }
    DressedRateSet {
        leads,
        middle_gain: rates.middle_gain,
        middle_loss: rates.middle_loss,
        delta: rates.delta,
        levels: rates.levels,
    }
}

/// `n`th derivative of the dressed rates with respect to `iχ` on `bath`,
/// evaluated at `chi0`.
///
/// Each gain picks up `(-q)^n` and each loss `(+q)^n`. The other lead and
/// the middle bath do not depend on the field and come out zero.
pub fn dress_rates_derivative(
    rates: &RateSet,
    chi0: &CountingFields,
    bath: Bath,
    order: u32,
) -> DressedRateSet {
    let dressed = dress_rates(rates, chi0);
    if order == 0 {
        return dressed;
    }
    let mut leads = [DressedLead::default(); 2];
    let src = dressed.lead(bath);
    let out = &mut leads[bath.index()];
    let n = order as i32;
    for c in 0..3 {
        for l in 0..2 {
            let q = chi0.kind.quantum(rates.levels[l]);
            out.gain[c][l] = src.gain[c][l] * (-q).powi(n);
            out.loss[c][l] = src.loss[c][l] * q.powi(n);
        }
    }
    DressedRateSet {
        leads,
        middle_gain: 0.0,
        middle_loss: 0.0,
        delta: rates.delta,
        levels: rates.levels,
    }
}

/// A broken `SystemSpec` invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub bound: &'static str,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} violates {} ({})",
            self.field, self.bound, self.detail
        )
    }
}

pub const BOUND_FINITE: &str = "finiteness";
pub const BOUND_TEMPERATURE: &str = "temperature positivity";
pub const BOUND_COUPLING: &str = "coupling nonnegativity";
pub const BOUND_INTERFERENCE: &str = "interference bound";
pub const BOUND_ORDERING: &str = "level ordering";
pub const BOUND_POSITIVE_LEVEL: &str = "positive level";
pub const BOUND_MIDDLE_GAP: &str = "middle-bath gap";

/// How strictly the lower excited level is checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ValidationMode {
    #[default]
    Strict,
    /// Accept `eps2 = 0` for the formal single-channel limit.
    Eps2ZeroLimit,
}

/// All invariant violations of `spec`; empty when the spec is valid.
pub fn validate(spec: &SystemSpec) -> Vec<Violation> {
    validate_with(spec, ValidationMode::Strict)
}

pub fn validate_with(spec: &SystemSpec, mode: ValidationMode) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |field: &str, bound: &'static str, detail: String| {
        out.push(Violation {
            field: field.to_string(),
            bound,
            detail,
        });
    };

    for (name, value) in SystemSpec::FIELD_NAMES.iter().zip(spec.values()) {
        if !value.is_finite() {
            push(name, BOUND_FINITE, format!("{value} is not finite"));
        }
    }
    for (name, t) in [
        ("tempL", spec.temp_l),
        ("tempM", spec.temp_m),
        ("tempR", spec.temp_r),
    ] {
        if !(t > 0.0) {
            push(name, BOUND_TEMPERATURE, format!("{t} <= 0"));
        }
    }
    for name in ["gL11", "gL22", "gL12", "gR11", "gR22", "gR12", "gM"] {
        let g = spec.field(name).unwrap();
        if g < 0.0 {
            push(name, BOUND_COUPLING, format!("{g} < 0"));
        }
    }
    for (bath, name) in [(Bath::Left, "gL12"), (Bath::Right, "gR12")] {
        let g12 = spec.coupling(bath, Channel::C12);
        let bound = spec.interference_bound(bath);
        // Relative slack so that a coefficient set exactly at the bound passes.
        if g12 > bound * (1.0 + 1e-12) {
            push(
                name,
                BOUND_INTERFERENCE,
                format!("{g12} > sqrt(g11 g22) = {bound}"),
            );
        }
    }
    if spec.eps1 < spec.eps2 {
        push(
            "eps1",
            BOUND_ORDERING,
            format!("eps1 = {} < eps2 = {}", spec.eps1, spec.eps2),
        );
    }
    if !(spec.eps2 > 0.0) {
        let lower_level_uncoupled = spec.g_l22 == 0.0 && spec.g_r22 == 0.0;
        let allowed =
            spec.eps2 == 0.0 && (lower_level_uncoupled || mode == ValidationMode::Eps2ZeroLimit);
        if !allowed {
            push(
                "eps2",
                BOUND_POSITIVE_LEVEL,
                format!("eps2 = {} <= 0", spec.eps2),
            );
        }
    }
    if spec.g_m > 0.0 && !(spec.delta() >= DELTA_MIN) {
        push(
            "gM",
            BOUND_MIDDLE_GAP,
            format!(
                "middle bath coupled with eps1 - eps2 = {} < {DELTA_MIN}",
                spec.delta()
            ),
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn bose_occupation_values() {
        assert_eq!(bose_occupation(1.0, 1e-3).unwrap(), 0.0);
        let t = 0.7;
        assert!((bose_occupation(t * std::f64::consts::LN_2, t).unwrap() - 1.0).abs() < 1e-14);
        // 1/(e - 1) to 18 digits.
        let expected = 0.581_976_706_869_326_4_f64;
        assert!(rel(bose_occupation(1.0, 1.0).unwrap(), expected) < 1e-15);
    }

    #[test]
    fn bose_occupation_rejects_bad_domain() {
        assert!(matches!(bose_occupation(0.0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(bose_occupation(-1.0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(bose_occupation(1.0, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn rates_match_bose_sums() {
        let spec = presets::fig2(0.0, 0.0);
        let rates = build_rates(&spec).unwrap();
        let n2 = bose_occupation(1.0, 2.0).unwrap();
        let n1 = bose_occupation(1.0, 1.0).unwrap();
        let gp = rates.gamma_plus(Channel::C11, Level::E1);
        assert!(rel(gp, 0.01 * n2 + 0.01 * n1) < 1e-15);

        let spec = SystemSpec {
            g_m: 0.01,
            ..presets::fig4(0.5)
        };
        let rates = build_rates(&spec).unwrap();
        let nm = bose_occupation(1.1 - 0.9, 0.5).unwrap();
        assert!(rel(rates.middle_gain, 0.01 * nm) < 1e-15);
        assert!(rel(rates.middle_loss - rates.middle_gain, 0.01) < 1e-12);
    }

    #[test]
    fn decoupled_system_has_zero_rates() {
        let spec = SystemSpec {
            g_l11: 0.0,
            g_l22: 0.0,
            g_l12: 0.0,
            g_r11: 0.0,
            g_r22: 0.0,
            g_r12: 0.0,
            g_m: 0.0,
            ..presets::fig2(0.0, 0.0)
        };
        let rates = build_rates(&spec).unwrap();
        for ch in Channel::ALL {
            for lv in Level::BOTH {
                assert_eq!(rates.gamma_plus(ch, lv), 0.0);
                assert_eq!(rates.gamma_minus(ch, lv), 0.0);
            }
        }
        assert_eq!(rates.middle_gain, 0.0);
    }

    #[test]
    fn emission_excess_is_the_bare_coupling() {
        let spec = presets::random_family(7).next().unwrap();
        let rates = build_rates(&spec).unwrap();
        for ch in Channel::ALL {
            let total = spec.coupling(Bath::Left, ch) + spec.coupling(Bath::Right, ch);
            for lv in Level::BOTH {
                let excess = rates.gamma_minus(ch, lv) - rates.gamma_plus(ch, lv);
                assert!((excess - total).abs() < 1e-15, "{ch:?} {lv:?}");
            }
        }
    }

    #[test]
    fn single_bath_detailed_balance() {
        let spec = SystemSpec {
            g_r11: 0.0,
            g_r22: 0.0,
            g_r12: 0.0,
            ..presets::fig2(0.3, 0.0)
        };
        let rates = build_rates(&spec).unwrap();
        for (ch, lv) in [(Channel::C11, Level::E1), (Channel::C22, Level::E2)] {
            let ratio = rates.gamma_plus(ch, lv) / rates.gamma_minus(ch, lv);
            assert!(ratio < 1.0);
            assert!(rel(ratio, (-spec.level(lv) / spec.temp_l).exp()) < 1e-14);
        }
    }

    #[test]
    fn dressing_at_zero_field_is_bit_exact() {
        for spec in presets::random_family(3).take(10) {
            let rates = build_rates(&spec).unwrap();
            for kind in [CountingKind::Energy, CountingKind::Particle] {
                let d = dress_rates(&rates, &CountingFields::zero(kind));
                for ch in Channel::ALL {
                    for lv in Level::BOTH {
                        let p = d.gamma_plus(ch, lv);
                        let m = d.gamma_minus(ch, lv);
                        assert_eq!(p.re, rates.gamma_plus(ch, lv));
                        assert_eq!(m.re, rates.gamma_minus(ch, lv));
                        assert_eq!(p.im, 0.0);
                        assert_eq!(m.im, 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn analytic_derivatives_match_finite_difference() {
        let spec = presets::fig4(0.7);
        let spec = SystemSpec {
            g_r11: 0.004,
            g_l22: 0.003,
            ..spec
        };
        let rates = build_rates(&spec).unwrap();
        let h = 1e-5;
        for kind in [CountingKind::Energy, CountingKind::Particle] {
            for bath in Bath::BOTH {
                let plus = dress_rates(&rates, &CountingFields::on(bath, h, kind));
                let minus = dress_rates(&rates, &CountingFields::on(bath, -h, kind));
                let d = dress_rates_derivative(&rates, &CountingFields::zero(kind), bath, 1);
                for ch in Channel::ALL {
                    for lv in Level::BOTH {
                        // d/d(iχ) = -i d/dχ
                        let fd_p = (plus.gamma_plus(ch, lv) - minus.gamma_plus(ch, lv)) / (2.0 * h)
                            * C64::new(0.0, -1.0);
                        let fd_m = (plus.gamma_minus(ch, lv) - minus.gamma_minus(ch, lv))
                            / (2.0 * h)
                            * C64::new(0.0, -1.0);
                        let an_p = d.gamma_plus(ch, lv);
                        let an_m = d.gamma_minus(ch, lv);
                        if an_p.norm() > 0.0 {
                            assert!((fd_p - an_p).norm() / an_p.norm() <= 1e-6);
                        }
                        if an_m.norm() > 0.0 {
                            assert!((fd_m - an_m).norm() / an_m.norm() <= 1e-6);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn first_derivative_signs() {
        let spec = presets::fig4(0.7);
        let spec = SystemSpec {
            g_r11: 0.004,
            ..spec
        };
        let rates = build_rates(&spec).unwrap();
        let e = dress_rates_derivative(
            &rates,
            &CountingFields::zero(CountingKind::Energy),
            Bath::Right,
            1,
        );
        let n = bose_occupation(spec.eps1, spec.temp_r).unwrap();
        let d = e.gamma_plus(Channel::C11, Level::E1);
        assert!(rel(d.re, -spec.eps1 * 0.004 * n) < 1e-14);
        let p = dress_rates_derivative(
            &rates,
            &CountingFields::zero(CountingKind::Particle),
            Bath::Right,
            1,
        );
        let d = p.gamma_minus(Channel::C11, Level::E1);
        assert!(rel(d.re, 0.004 * (1.0 + n)) < 1e-14);
        // The uncounted lead drops out.
        assert_eq!(p.lead(Bath::Left).loss, [[C64::new(0.0, 0.0); 2]; 3]);
    }

    #[test]
    fn validation_reports_each_bound() {
        let base = presets::fig3(0.8, 1.0, 1.0, 0.5);
        assert!(validate(&base).is_empty());

        let bad = SystemSpec {
            g_l12: 1.1 * base.interference_bound(Bath::Left),
            ..base
        };
        let v = validate(&bad);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].bound, BOUND_INTERFERENCE);
        assert_eq!(v[0].field, "gL12");

        let bad = SystemSpec {
            temp_r: 0.0,
            ..base
        };
        let v = validate(&bad);
        assert_eq!(v[0].bound, BOUND_TEMPERATURE);
        assert_eq!(v[0].field, "tempR");

        let bad = SystemSpec { eps1: 0.5, ..base };
        assert_eq!(validate(&bad)[0].bound, BOUND_ORDERING);

        let bad = SystemSpec {
            eps1: 1.0,
            eps2: 1.0,
            g_m: 0.01,
            ..base
        };
        assert_eq!(validate(&bad)[0].bound, BOUND_MIDDLE_GAP);

        let bad = SystemSpec {
            g_r22: -0.1,
            ..base
        };
        assert!(validate(&bad).iter().any(|v| v.bound == BOUND_COUPLING));
    }

    #[test]
    fn eps2_zero_needs_decoupled_level_or_limit_mode() {
        let spec = SystemSpec {
            eps2: 0.0,
            ..presets::fig2(0.0, 0.0)
        };
        assert_eq!(validate(&spec)[0].bound, BOUND_POSITIVE_LEVEL);
        assert!(validate_with(&spec, ValidationMode::Eps2ZeroLimit).is_empty());
        let spec = SystemSpec {
            g_l22: 0.0,
            g_r22: 0.0,
            ..spec
        };
        assert!(validate(&spec).is_empty());
        assert!(build_rates(&spec).is_ok());
    }

    #[test]
    fn field_access_round_trips() {
        let mut spec = presets::fig4(0.5);
        for (i, name) in SystemSpec::FIELD_NAMES.iter().enumerate() {
            spec.set_field(name, i as f64 + 0.5).unwrap();
        }
        for (i, name) in SystemSpec::FIELD_NAMES.iter().enumerate() {
            assert_eq!(spec.field(name), Some(i as f64 + 0.5));
        }
        assert!(spec.set_field("gamma", 1.0).is_err());
    }
}
