// Copyright 2026 vflux Contributors
// SPDX-License-Identifier: Apache-2.0

//! Thermal rectification and heat amplification.
//!
//! Forward bias means `T_L = t0 + ΔT/2`, `T_R = t0 − ΔT/2`; the backward
//! configuration swaps the two. The rectification factor is invariant under
//! the opposite choice because relabeling the leads maps one onto the other.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::SystemSpec;
use crate::transport::{heat_currents, Flows};

/// Denominators at or below this make the rectification factor undefined.
pub const RECTIFICATION_FLOOR: f64 = 1e-15;
/// `|∂JeM/∂TM|` at or below this makes the amplification factor undefined.
pub const AMPLIFICATION_FLOOR: f64 = 1e-14;
/// Relative step of the temperature derivative.
pub const AMPLIFICATION_REL_STEP: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RectificationResult {
    pub t0: f64,
    pub delta_t: f64,
    pub j_forward: f64,
    pub j_backward: f64,
    pub rj: f64,
}

/// `R_J = |J_f + J_b| / max(J_f, −J_b)` with `J ≡ JeR`.
///
/// The denominator is evaluated as `max(|J_f|, |J_b|)`. The two agree
/// whenever heat flows from hot to cold (`J_f ≥ 0 ≥ J_b` for `ΔT > 0`); the
/// absolute form also covers `ΔT < 0`, where both currents change sign.
pub fn rectification(spec: &SystemSpec, t0: f64, delta_t: f64) -> Result<RectificationResult> {
    if !(t0 > 0.0) || !(delta_t.abs() < 2.0 * t0) {
        return Err(Error::Usage(format!(
            "rectification needs t0 > 0 and |dT| < 2 t0, got t0 = {t0}, dT = {delta_t}"
        )));
    }
    let (hot, cold) = (t0 + delta_t / 2.0, t0 - delta_t / 2.0);
    let forward = SystemSpec {
        temp_l: hot,
        temp_r: cold,
        ..*spec
    };
    let backward = SystemSpec {
        temp_l: cold,
        temp_r: hot,
        ..*spec
    };
    let j_forward = heat_currents(&forward)?.right;
    let j_backward = heat_currents(&backward)?.right;
    let den = j_forward.abs().max(j_backward.abs());
    if !(den > RECTIFICATION_FLOOR) {
        return Err(Error::IndeterminateRectification(format!(
            "max(|J_f|, |J_b|) = {den:e} at t0 = {t0}, dT = {delta_t}"
        )));
    }
    let rj = (j_forward + j_backward).abs() / den;
    Ok(RectificationResult {
        t0,
        delta_t,
        j_forward,
        j_backward,
        rj,
    })
}

/// Default bias grid: 50 points `k·1.9·t0/50`, `k = 1..=50`.
pub fn default_delta_t_grid(t0: f64) -> Vec<f64> {
    (1..=50).map(|k| k as f64 * 1.9 * t0 / 50.0).collect()
}

/// Default middle-bath temperature grid: 100 points over `[0.1, 2.0]`.
pub fn default_tm_grid() -> Vec<f64> {
    (0..100).map(|k| 0.1 + 1.9 * k as f64 / 99.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RectificationMax {
    pub rj_max: f64,
    pub delta_t_star: f64,
}

/// Grid maximum of `R_J` over biases. Indeterminate points are skipped and
/// ties go to the first grid index attaining the maximum.
pub fn max_rectification(spec: &SystemSpec, t0: f64, grid: &[f64]) -> Result<RectificationMax> {
    let mut best: Option<RectificationMax> = None;
    for &dt in grid {
        let r = match rectification(spec, t0, dt) {
            Ok(r) => r,
            Err(Error::IndeterminateRectification(_)) => continue,
            Err(e) => return Err(e),
        };
        if best.is_none_or(|b| r.rj > b.rj_max) {
            best = Some(RectificationMax {
                rj_max: r.rj,
                delta_t_star: dt,
            });
        }
    }
    best.ok_or_else(|| {
        Error::IndeterminateRectification("every grid point is indeterminate".into())
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AmplificationResult {
    pub t_m: f64,
    pub beta_l: f64,
    pub beta_r: f64,
    /// `∂Je/∂TM` for the left, right and middle baths.
    pub dj_dtm: Flows,
    pub stencil_h: f64,
    /// `θ = 1` when `∂JeL/∂JeM < 0`.
    pub theta: u8,
    /// `|β_R − |β_L + (−1)^θ||`
    pub branch_residual: f64,
}

fn currents_at(spec: &SystemSpec, t_m: f64) -> Result<Flows> {
    heat_currents(&SystemSpec {
        temp_m: t_m,
        ..*spec
    })
}

fn central(spec: &SystemSpec, t_m: f64, h: f64) -> Result<Flows> {
    let (p, m) = (currents_at(spec, t_m + h)?, currents_at(spec, t_m - h)?);
    let d = |a: f64, b: f64| (a - b) / (2.0 * h);
    Ok(Flows {
        left: d(p.left, m.left),
        right: d(p.right, m.right),
        middle: d(p.middle, m.middle),
    })
}

/// `β_u = |∂JeU/∂TM| / |∂JeM/∂TM|` at fixed lead temperatures.
///
/// Central differences at `h` and `h/2` combined by one Richardson step;
/// `h` defaults to `1e-4·t_m`.
pub fn amplification(spec: &SystemSpec, t_m: f64, h: Option<f64>) -> Result<AmplificationResult> {
    let h = h.unwrap_or(AMPLIFICATION_REL_STEP * t_m);
    if !(h > 0.0) || !(t_m - h > 0.0) {
        return Err(Error::Usage(format!(
            "amplification needs 0 < h < tM, got h = {h}, tM = {t_m}"
        )));
    }
    let coarse = central(spec, t_m, h)?;
    let fine = central(spec, t_m, h / 2.0)?;
    let rich = |c: f64, f: f64| (4.0 * f - c) / 3.0;
    let d = Flows {
        left: rich(coarse.left, fine.left),
        right: rich(coarse.right, fine.right),
        middle: rich(coarse.middle, fine.middle),
    };
    if !(d.middle.abs() > AMPLIFICATION_FLOOR) {
        return Err(Error::IndeterminateAmplification(format!(
            "|dJeM/dTM| = {:e} at tM = {t_m}",
            d.middle.abs()
        )));
    }
    let beta_l = (d.left / d.middle).abs();
    let beta_r = (d.right / d.middle).abs();
    let theta = u8::from(d.left / d.middle < 0.0);
    let sign = if theta == 1 { -1.0 } else { 1.0 };
    let branch_residual = (beta_r - (beta_l + sign).abs()).abs();
    Ok(AmplificationResult {
        t_m,
        beta_l,
        beta_r,
        dj_dtm: d,
        stencil_h: h,
        theta,
        branch_residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AmplificationMax {
    pub beta_r_max: f64,
    pub t_m_star: f64,
}

/// Grid maximum of `β_R`, skipping indeterminate points; ties go to the
/// first grid index.
pub fn max_amplification(spec: &SystemSpec, grid: &[f64]) -> Result<AmplificationMax> {
    let mut best: Option<AmplificationMax> = None;
    for &t_m in grid {
        let a = match amplification(spec, t_m, None) {
            Ok(a) => a,
            Err(Error::IndeterminateAmplification(_)) => continue,
            Err(e) => return Err(e),
        };
        if best.is_none_or(|b| a.beta_r > b.beta_r_max) {
            best = Some(AmplificationMax {
                beta_r_max: a.beta_r,
                t_m_star: t_m,
            });
        }
    }
    best.ok_or_else(|| {
        Error::IndeterminateAmplification("every grid point is indeterminate".into())
    })
}

/// `|ε2/(ε1 − ε2)|`, the amplification factor of the pure L → M → R cycle.
pub fn cyclic_amplification_analytic(eps1: f64, eps2: f64) -> Result<f64> {
    if eps1 == eps2 {
        return Err(Error::Domain(
            "cyclic amplification needs eps1 != eps2".into(),
        ));
    }
    Ok((eps2 / (eps1 - eps2)).abs())
}

/// Spec with the two leads' temperatures and couplings exchanged.
pub fn relabeled(spec: &SystemSpec) -> SystemSpec {
    spec.mirrored()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    #[test]
    fn symmetric_interference_does_not_rectify() {
        for f in [0.0, 0.3, 0.7, 0.95] {
            let spec = presets::fig3(f, f, 1.0, 1.0);
            for dt in default_delta_t_grid(1.0) {
                assert!(rectification(&spec, 1.0, dt).unwrap().rj <= 1e-10);
            }
            assert!(
                max_rectification(&spec, 1.0, &default_delta_t_grid(1.0))
                    .unwrap()
                    .rj_max
                    <= 1e-10
            );
        }
    }

    #[test]
    fn zero_bias_is_indeterminate() {
        let spec = presets::fig3(0.8, 1.0, 1.0, 1.0);
        assert!(matches!(
            rectification(&spec, 1.0, 0.0),
            Err(Error::IndeterminateRectification(_))
        ));
        assert!(matches!(
            rectification(&spec, 1.0, 2.0),
            Err(Error::Usage(_))
        ));
        assert!(matches!(
            max_rectification(&spec, 1.0, &[0.0]),
            Err(Error::IndeterminateRectification(_))
        ));
    }

    #[test]
    fn inset_rectification_grows_with_bias() {
        let spec = presets::fig3(0.8, 1.0, 1.0, 1.0);
        let mut last = 0.0;
        for k in 1..=18 {
            let r = rectification(&spec, 1.0, 0.1 * k as f64).unwrap();
            assert!(r.rj > last);
            assert!((0.0..=1.0).contains(&r.rj));
            last = r.rj;
        }
        let grid = default_delta_t_grid(1.0);
        let m = max_rectification(&spec, 1.0, &grid).unwrap();
        assert_eq!(m.delta_t_star, *grid.last().unwrap());
    }

    #[test]
    fn relabeling_with_reversed_bias_is_invariant() {
        for (fl, fr) in [(0.8, 1.0), (0.2, 0.6), (1.0, 0.1)] {
            let spec = presets::fig3(fl, fr, 1.0, 1.0);
            for dt in [0.3, 1.1, 1.8] {
                let a = rectification(&spec, 1.0, dt).unwrap();
                let b = rectification(&relabeled(&spec), 1.0, -dt).unwrap();
                assert!((a.rj - b.rj).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn cyclic_amplification() {
        assert_eq!(
            cyclic_amplification_analytic(1.1, 0.9).unwrap(),
            0.9 / (1.1 - 0.9)
        );
        assert!((cyclic_amplification_analytic(1.1, 0.9).unwrap() - 4.5).abs() < 1e-12);
        assert_eq!(cyclic_amplification_analytic(2.0, 1.0).unwrap(), 1.0);
        assert!((cyclic_amplification_analytic(1.0, 0.99).unwrap() - 99.0).abs() < 1e-9);
        assert!(matches!(
            cyclic_amplification_analytic(1.0, 1.0),
            Err(Error::Domain(_))
        ));
        for k in 0..=13 {
            let tm = 0.2 + 0.1 * k as f64;
            let a = amplification(&presets::fig4(tm), tm, None).unwrap();
            assert!((a.beta_r - 4.5).abs() < 1e-3, "{tm}: {}", a.beta_r);
            assert!(a.branch_residual <= 1e-6);
            assert_eq!(a.theta, 1);
        }
        let m = max_amplification(&presets::fig4(1.0), &default_tm_grid()).unwrap();
        assert!((m.beta_r_max - 4.5).abs() < 1e-3);
    }

    #[test]
    fn two_terminal_channel_kills_amplification() {
        let spec = presets::fig5(0.01, 1.0);
        let a = amplification(&spec, 1.0, None).unwrap();
        assert!(a.beta_r < 1.0);
        assert!(a.branch_residual <= 1e-6);
    }

    #[test]
    fn uncoupled_middle_bath_is_indeterminate() {
        let spec = SystemSpec {
            g_m: 0.0,
            ..presets::fig4(1.0)
        };
        assert!(matches!(
            amplification(&spec, 1.0, None),
            Err(Error::IndeterminateAmplification(_))
        ));
        assert!(matches!(
            max_amplification(&spec, &[0.5, 1.0]),
            Err(Error::IndeterminateAmplification(_))
        ));
        assert!(matches!(
            amplification(&spec, 1.0, Some(2.0)),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn default_grids() {
        let g = default_delta_t_grid(1.0);
        assert_eq!(g.len(), 50);
        assert!((g[49] - 1.9).abs() < 1e-15 && g[0] > 0.0);
        let t = default_tm_grid();
        assert_eq!(t.len(), 100);
        assert!((t[0] - 0.1).abs() < 1e-15 && (t[99] - 2.0).abs() < 1e-15);
    }
}
