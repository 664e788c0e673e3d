// Copyright 2026 vflux Contributors
// SPDX-License-Identifier: Apache-2.0

//! Parameter sets of the reference scenarios and a seeded family of random
//! valid specs used by the test suites.
//!
//! Cross coefficients are given as fractions of `sqrt(γ11 γ22)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::SystemSpec;

/// Diagonal coupling shared by every reference scenario.
pub const GAMMA: f64 = 0.01;

/// Resonant two-bath setup at `T_L = 2`, `T_R = 1`.
pub fn fig2(frac_l12: f64, frac_r12: f64) -> SystemSpec {
    fig3(frac_l12, frac_r12, 2.0, 1.0)
}

/// Resonant two-bath setup with maximal left interference and none on the right.
pub fn fig2b(temp_l: f64, temp_r: f64) -> SystemSpec {
    fig3(1.0, 0.0, temp_l, temp_r)
}

/// Resonant two-bath setup at arbitrary bath temperatures.
pub fn fig3(frac_l12: f64, frac_r12: f64, temp_l: f64, temp_r: f64) -> SystemSpec {
    SystemSpec {
        eps1: 1.0,
        eps2: 1.0,
        temp_l,
        temp_m: 1.0,
        temp_r,
        g_l11: GAMMA,
        g_l22: GAMMA,
        g_l12: frac_l12 * GAMMA,
        g_r11: GAMMA,
        g_r22: GAMMA,
        g_r12: frac_r12 * GAMMA,
        g_m: 0.0,
    }
}

/// Cyclic three-terminal setup: left drives `g -> e1`, the middle bath
/// moves `e1 -> e2`, right closes `e2 -> g`.
pub fn fig4(temp_m: f64) -> SystemSpec {
    fig5(0.0, temp_m)
}

/// Three-terminal setup with the direct two-terminal channels switched on
/// at strength `gamma` (`γ^L_22 = γ^R_11 = gamma`).
pub fn fig5(gamma: f64, temp_m: f64) -> SystemSpec {
    SystemSpec {
        eps1: 1.1,
        eps2: 0.9,
        temp_l: 2.0,
        temp_m,
        temp_r: 0.5,
        g_l11: GAMMA,
        g_l22: gamma,
        g_l12: 0.0,
        g_r11: gamma,
        g_r22: GAMMA,
        g_r12: 0.0,
        g_m: GAMMA,
    }
}

/// Draw one valid, non-degenerate spec.
///
/// A quarter of the draws are resonant two-bath specs; the rest have a
/// finite gap and a possibly coupled middle bath. Cross coefficients stay
/// below 90% of their bound so no dark state forms.
pub fn random_valid_spec<R: Rng + ?Sized>(rng: &mut R) -> SystemSpec {
    let eps2 = rng.random_range(0.4..1.4);
    let resonant = rng.random_bool(0.25);
    let (eps1, g_m) = if resonant {
        (eps2, 0.0)
    } else {
        (
            eps2 + rng.random_range(0.05..0.8),
            rng.random_range(0.0..0.02),
        )
    };
    let lead = |rng: &mut R| {
        let g11: f64 = rng.random_range(0.002..0.02);
        let g22: f64 = rng.random_range(0.002..0.02);
        let g12 = rng.random_range(0.0..0.9) * (g11 * g22).sqrt();
        (g11, g22, g12)
    };
    let (g_l11, g_l22, g_l12) = lead(rng);
    let (g_r11, g_r22, g_r12) = lead(rng);
    SystemSpec {
        eps1,
        eps2,
        temp_l: rng.random_range(0.3..3.0),
        temp_m: rng.random_range(0.3..3.0),
        temp_r: rng.random_range(0.3..3.0),
        g_l11,
        g_l22,
        g_l12,
        g_r11,
        g_r22,
        g_r12,
        g_m,
    }
}

/// Endless deterministic stream of random valid specs.
pub fn random_family(seed: u64) -> impl Iterator<Item = SystemSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    std::iter::repeat_with(move || random_valid_spec(&mut rng))
}

/// Every reference parameter set, labelled.
pub fn figure_specs() -> Vec<(&'static str, SystemSpec)> {
    vec![
        ("fig2a-corner", fig2(1.0, 0.0)),
        ("fig2a-diagonal", fig2(0.5, 0.5)),
        ("fig2b", fig2b(2.0, 1.0)),
        ("fig2b-TR0.5", fig2b(1.5, 0.5)),
        ("fig21-mixed", fig2(0.3, 0.7)),
        ("fig3-inset", fig3(0.8, 1.0, 1.5, 0.5)),
        ("fig3-optimum", fig3(0.76, 0.98, 1.9, 0.1)),
        ("fig4", fig4(0.5)),
        ("fig4-hot", fig4(1.5)),
        ("fig5", fig5(0.01, 0.5)),
        ("fig5-mid", fig5(0.006, 1.0)),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate;

    #[test]
    fn presets_are_valid() {
        for (name, spec) in figure_specs() {
            assert!(validate(&spec).is_empty(), "{name}");
        }
        for spec in random_family(11).take(200) {
            assert!(validate(&spec).is_empty(), "{spec:?}");
        }
    }

    #[test]
    fn random_family_is_deterministic() {
        let a: Vec<_> = random_family(5).take(5).collect();
        let b: Vec<_> = random_family(5).take(5).collect();
        assert_eq!(a, b);
    }
}
