//! Fixed points of the symmetric model and their stability.
//!
//! Setting the time derivatives to zero, the transverse pair `(s_x, s_y)` is
//! linear in itself for fixed `s_z`:
//!
//! ```text
//! α = -(γ0 - Γ_eff s_z)/2,  β = J_eff s_z
//! s_x = -β Ω s_z / (α² + β²),  s_y = α Ω s_z / (α² + β²)
//! ```
//!
//! Substituting into the `s_z` equation, the Ω²Γ_eff terms cancel and what is
//! left is the cubic
//!
//! ```text
//! (s_z + 1)(α² + β²) + (Ω²/2) s_z = 0
//! ```
//!
//! whose roots are found with [`crate::poly::polynomial_roots`]. Only real roots
//! describe physical expectation values.

use std::fmt;

use nalgebra::Matrix3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::couplings::EffectiveCouplings;
use crate::meanfield::{rhs_symmetric, DriveParams, SymmetricState};
use crate::poly::polynomial_roots;
use crate::{Error, Result};

/// A root counts as physical when `|Im s_z| <= PHYSICAL_TOL`.
pub const PHYSICAL_TOL: f64 = 1e-8;
/// An eigenvalue counts as real when `|Im λ| <= EIGEN_REAL_TOL` (units of γ0).
pub const EIGEN_REAL_TOL: f64 = 1e-8;
/// Coarse grid used before refining bistable-interval boundaries.
pub const WIDTH_SCAN_POINTS: usize = 512;
/// Bisection stops once a boundary is bracketed this tightly (γ0).
pub const WIDTH_BOUNDARY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StabilityClass {
    StableFocusNode,
    UnstableFocusNode,
    /// Saddle-focus whose real eigenvalue is negative (one-dimensional stable manifold).
    SaddleFocus1D,
    /// Saddle-focus whose real eigenvalue is positive (two-dimensional stable manifold).
    SaddleFocus2D,
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AnalyticRegime {
    Mono,
    Bi,
    LcCh,
    LcChMono,
    Unclassified,
}

impl AnalyticRegime {
    pub fn label(self) -> &'static str {
        match self {
            AnalyticRegime::Mono => "Mono",
            AnalyticRegime::Bi => "Bi",
            AnalyticRegime::LcCh => "LcCh",
            AnalyticRegime::LcChMono => "LcChMono",
            AnalyticRegime::Unclassified => "Unclassified",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        [
            AnalyticRegime::Mono,
            AnalyticRegime::Bi,
            AnalyticRegime::LcCh,
            AnalyticRegime::LcChMono,
            AnalyticRegime::Unclassified,
        ]
        .into_iter()
        .find(|r| r.label() == s)
    }
}

impl fmt::Display for AnalyticRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    /// For non-physical roots this holds the real parts of the complex solution.
    pub state: SymmetricState,
    pub sz_root: Complex64,
    pub physical: bool,
    pub eigenvalues: Option<[Complex64; 3]>,
    pub stability: Option<StabilityClass>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BistableWidth {
    pub width: f64,
    pub omega_lo: f64,
    pub omega_hi: f64,
}

/// Coefficients (highest degree first) of the steady-state cubic in `s_z`.
pub fn steady_state_cubic(eff: &EffectiveCouplings, drive: &DriveParams) -> [f64; 4] {
    let (j, g, g0, w) = (eff.j_eff, eff.gamma_eff, drive.gamma0, drive.omega);
    // α² + β² = a s² + b s + c
    let a = 0.25 * g * g + j * j;
    let b = -0.5 * g0 * g;
    let c = 0.25 * g0 * g0;
    [a, a + b, b + c + 0.5 * w * w, c]
}

/// Analytic Jacobian of [`rhs_symmetric`].
pub fn jacobian_symmetric(
    s: &SymmetricState,
    eff: &EffectiveCouplings,
    drive: &DriveParams,
) -> Matrix3<f64> {
    let (j, g, w, g0) = (eff.j_eff, eff.gamma_eff, drive.omega, drive.gamma0);
    let alpha = -0.5 * (g0 - g * s.sz);
    Matrix3::new(
        alpha,
        j * s.sz,
        j * s.sy + 0.5 * g * s.sx,
        -j * s.sz,
        alpha,
        -w - j * s.sx + 0.5 * g * s.sy,
        -g * s.sx,
        w - g * s.sy,
        -g0,
    )
}

/// Eigenvalues of a real 3×3 matrix, sorted by imaginary then real part.
pub fn eigenvalues3(m: &Matrix3<f64>) -> [Complex64; 3] {
    let ev = m.complex_eigenvalues();
    let mut out = [ev[0], ev[1], ev[2]];
    out.sort_by(|a, b| a.im.total_cmp(&b.im).then(a.re.total_cmp(&b.re)));
    out
}

/// Focus-node / saddle-focus pattern of one real eigenvalue plus a complex
/// pair. All-real triples and near-zero real parts are `Degenerate`.
pub fn classify_eigenvalues(ev: &[Complex64; 3]) -> StabilityClass {
    let (real, pair): (Vec<&Complex64>, Vec<&Complex64>) =
        ev.iter().partition(|z| z.im.abs() <= EIGEN_REAL_TOL);
    if real.len() != 1 || pair.len() != 2 {
        return StabilityClass::Degenerate;
    }
    let r = real[0].re;
    let p = pair[0].re;
    if r.abs() <= EIGEN_REAL_TOL || p.abs() <= EIGEN_REAL_TOL {
        return StabilityClass::Degenerate;
    }
    match (r < 0.0, p < 0.0) {
        (true, true) => StabilityClass::StableFocusNode,
        (false, false) => StabilityClass::UnstableFocusNode,
        (true, false) => StabilityClass::SaddleFocus1D,
        (false, true) => StabilityClass::SaddleFocus2D,
    }
}

/// Stability class of a physical equilibrium.
pub fn classify_equilibrium(eq: &Equilibrium) -> Result<StabilityClass> {
    if !eq.physical {
        return Err(Error::invalid("stability is only defined for physical equilibria"));
    }
    Ok(match &eq.eigenvalues {
        Some(ev) => classify_eigenvalues(ev),
        None => StabilityClass::Degenerate,
    })
}

/// Every root of the steady-state cubic, back-substituted and classified.
pub fn symmetric_equilibria(
    eff: &EffectiveCouplings,
    drive: &DriveParams,
    tol_physical: f64,
) -> Result<Vec<Equilibrium>> {
    drive.validate()?;
    if !(eff.j_eff.is_finite() && eff.gamma_eff.is_finite()) {
        return Err(Error::invalid("effective couplings must be finite"));
    }
    let roots = polynomial_roots(&steady_state_cubic(eff, drive))?;
    let w = drive.omega;
    Ok(roots
        .into_iter()
        .map(|root| {
            let physical = root.im.abs() <= tol_physical;
            if !physical {
                let alpha = -0.5 * (drive.gamma0 - eff.gamma_eff * root);
                let beta = eff.j_eff * root;
                let d = alpha * alpha + beta * beta;
                let sx = -beta * w * root / d;
                let sy = alpha * w * root / d;
                return Equilibrium {
                    state: SymmetricState::new(sx.re, sy.re, root.re),
                    sz_root: root,
                    physical,
                    eigenvalues: None,
                    stability: None,
                };
            }
            let sz = root.re;
            let alpha = -0.5 * (drive.gamma0 - eff.gamma_eff * sz);
            let beta = eff.j_eff * sz;
            let d = alpha * alpha + beta * beta;
            if d < 1e-30 {
                return Equilibrium {
                    state: SymmetricState::new(0.0, 0.0, sz),
                    sz_root: root,
                    physical,
                    eigenvalues: None,
                    stability: Some(StabilityClass::Degenerate),
                };
            }
            let state = SymmetricState::new(-beta * w * sz / d, alpha * w * sz / d, sz);
            let ev = eigenvalues3(&jacobian_symmetric(&state, eff, drive));
            Equilibrium {
                state,
                sz_root: root,
                physical,
                eigenvalues: Some(ev),
                stability: Some(classify_eigenvalues(&ev)),
            }
        })
        .collect())
}

/// Maps the classes of the physical equilibria onto a regime.
pub fn regime_from_equilibria(eqs: &[Equilibrium]) -> AnalyticRegime {
    use StabilityClass::*;
    let mut classes: Vec<StabilityClass> = eqs
        .iter()
        .filter(|e| e.physical)
        .map(|e| e.stability.unwrap_or(Degenerate))
        .collect();
    classes.sort_by_key(|c| *c as u8);
    match classes.as_slice() {
        [StableFocusNode] => AnalyticRegime::Mono,
        [SaddleFocus1D] => AnalyticRegime::LcCh,
        [StableFocusNode, StableFocusNode, SaddleFocus2D] => AnalyticRegime::Bi,
        [StableFocusNode, SaddleFocus1D, SaddleFocus2D] => AnalyticRegime::LcChMono,
        _ => AnalyticRegime::Unclassified,
    }
}

/// Analytic regime of the symmetric model; invalid input is `Unclassified`.
pub fn classify_regime(eff: &EffectiveCouplings, drive: &DriveParams) -> AnalyticRegime {
    symmetric_equilibria(eff, drive, PHYSICAL_TOL)
        .map(|eqs| regime_from_equilibria(&eqs))
        .unwrap_or(AnalyticRegime::Unclassified)
}

fn physical_root_count(eff: &EffectiveCouplings, gamma0: f64, omega: f64) -> usize {
    let drive = DriveParams { omega, gamma0 };
    polynomial_roots(&steady_state_cubic(eff, &drive))
        .map(|r| r.iter().filter(|z| z.im.abs() <= PHYSICAL_TOL).count())
        .unwrap_or(0)
}

/// A drive range wide enough to contain any bistable interval of `eff`.
pub fn default_omega_range(eff: &EffectiveCouplings, gamma0: f64) -> (f64, f64) {
    (
        1e-3 * gamma0,
        (2.0 * (eff.j_eff.abs() + eff.gamma_eff.abs()) + 2.0 * gamma0).max(10.0 * gamma0),
    )
}

/// Extent of the drive interval on which all three equilibria are physical.
///
/// Scans [`WIDTH_SCAN_POINTS`] drive values, then bisects each outer boundary
/// to [`WIDTH_BOUNDARY_TOL`]. Boundary points where two roots merge count as
/// bistable. With no bistable point the width is 0 and both ends equal
/// `omega_min`.
pub fn bistable_width(
    eff: &EffectiveCouplings,
    gamma0: f64,
    omega_min: f64,
    omega_max: f64,
) -> Result<BistableWidth> {
    if !(omega_min.is_finite() && omega_max.is_finite() && omega_min < omega_max) {
        return Err(Error::invalid(format!(
            "need omega_min < omega_max, got [{omega_min}, {omega_max}]"
        )));
    }
    if !(gamma0 > 0.0) {
        return Err(Error::invalid("gamma0 must be positive"));
    }
    let bistable = |w: f64| physical_root_count(eff, gamma0, w) == 3;
    let step = (omega_max - omega_min) / (WIDTH_SCAN_POINTS - 1) as f64;
    let grid = |i: usize| {
        if i == WIDTH_SCAN_POINTS - 1 {
            omega_max
        } else {
            omega_min + i as f64 * step
        }
    };
    let hits: Vec<usize> = (0..WIDTH_SCAN_POINTS).filter(|&i| bistable(grid(i))).collect();
    let (Some(&first), Some(&last)) = (hits.first(), hits.last()) else {
        return Ok(BistableWidth {
            width: 0.0,
            omega_lo: omega_min,
            omega_hi: omega_min,
        });
    };

    // `inside` satisfies the predicate, `outside` does not.
    let refine = |mut inside: f64, mut outside: f64| {
        while (inside - outside).abs() > WIDTH_BOUNDARY_TOL {
            let mid = 0.5 * (inside + outside);
            if bistable(mid) {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        inside
    };
    let omega_lo = if first == 0 {
        omega_min
    } else {
        refine(grid(first), grid(first - 1))
    };
    let omega_hi = if last == WIDTH_SCAN_POINTS - 1 {
        omega_max
    } else {
        refine(grid(last), grid(last + 1))
    };
    Ok(BistableWidth {
        width: omega_hi - omega_lo,
        omega_lo,
        omega_hi,
    })
}

/// Everything the analytic side knows about one parameter point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriaReport {
    pub couplings: EffectiveCouplings,
    pub drive: DriveParams,
    pub equilibria: Vec<Equilibrium>,
    pub regime: AnalyticRegime,
}

pub fn equilibria_report(eff: &EffectiveCouplings, drive: &DriveParams) -> Result<EquilibriaReport> {
    let equilibria = symmetric_equilibria(eff, drive, PHYSICAL_TOL)?;
    let regime = regime_from_equilibria(&equilibria);
    Ok(EquilibriaReport {
        couplings: *eff,
        drive: *drive,
        equilibria,
        regime,
    })
}

/// Max-norm of the symmetric right-hand side at `s`.
pub fn residual(s: &SymmetricState, eff: &EffectiveCouplings, drive: &DriveParams) -> f64 {
    let d = rhs_symmetric(s, eff, drive);
    d.sx.abs().max(d.sy.abs()).max(d.sz.abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn eff(j: f64, g: f64) -> EffectiveCouplings {
        EffectiveCouplings::new(j, g)
    }

    fn physical(eqs: &[Equilibrium]) -> Vec<&Equilibrium> {
        eqs.iter().filter(|e| e.physical).collect()
    }

    #[test]
    fn undriven_ground_state_is_a_root() {
        let eqs = symmetric_equilibria(&eff(3.0, -1.0), &DriveParams::new(0.0), PHYSICAL_TOL).unwrap();
        let ground = eqs
            .iter()
            .find(|e| e.physical && (e.state.sz + 1.0).abs() < 1e-12)
            .expect("ground state root");
        assert_eq!(ground.state.sx, 0.0);
        assert_eq!(ground.state.sy, 0.0);
    }

    #[test]
    fn bistable_point_has_three_physical_roots() {
        let eqs = symmetric_equilibria(&eff(3.0, -1.8), &DriveParams::new(2.06), PHYSICAL_TOL).unwrap();
        assert_eq!(physical(&eqs).len(), 3);
        for e in &eqs {
            assert!(residual(&e.state, &eff(3.0, -1.8), &DriveParams::new(2.06)) < 1e-9);
        }
    }

    #[test]
    fn monostable_point_has_one_physical_root() {
        let e = eff(3.0, 0.5);
        let d = DriveParams::new(2.5);
        let eqs = symmetric_equilibria(&e, &d, PHYSICAL_TOL).unwrap();
        assert_eq!(physical(&eqs).len(), 1);

        // independent check: sign changes of the cubic on a dense grid
        let p = steady_state_cubic(&e, &d);
        let f = |s: f64| ((p[0] * s + p[1]) * s + p[2]) * s + p[3];
        let grid: Vec<f64> = (0..2000).map(|i| -1.5 + 3.0 * i as f64 / 1999.0).collect();
        let changes = grid.windows(2).filter(|w| f(w[0]) * f(w[1]) < 0.0).count();
        assert_eq!(changes, 1);
    }

    #[test]
    fn single_atom_reduces_to_one_root() {
        let d = DriveParams::new(1.0);
        let eqs = symmetric_equilibria(&EffectiveCouplings::default(), &d, PHYSICAL_TOL).unwrap();
        assert_eq!(eqs.len(), 1);
        assert!((eqs[0].state.sz + 1.0 / 3.0).abs() < 1e-14);
        assert!((eqs[0].state.sy - 2.0 / 3.0).abs() < 1e-14);
        // one stable focus-node: eigenvalues -1/2 and -3/4 ± i√(Ω² - 1/16)
        assert_eq!(classify_regime(&EffectiveCouplings::default(), &d), AnalyticRegime::Mono);
    }

    #[test]
    fn uncoupled_linearisation() {
        let j = jacobian_symmetric(
            &SymmetricState::new(0.0, 0.0, -1.0),
            &EffectiveCouplings::default(),
            &DriveParams::new(0.0),
        );
        let ev = eigenvalues3(&j);
        let mut re: Vec<f64> = ev.iter().map(|z| z.re).collect();
        re.sort_by(f64::total_cmp);
        assert_eq!(re, vec![-1.0, -0.5, -0.5]);
        assert!(ev.iter().all(|z| z.im == 0.0));
    }

    #[test]
    fn trace_is_divergence() {
        // div f = 2α - γ0 = -(γ0 - Γ s_z) - γ0
        let e = eff(2.3, -1.4);
        let d = DriveParams::new(1.1);
        let s = SymmetricState::new(0.2, -0.3, -0.6);
        let tr = jacobian_symmetric(&s, &e, &d).trace();
        assert!((tr - (-(1.0 - (-1.4) * -0.6) - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn eigenvalue_patterns() {
        let sfn = [c(-0.2, -3.0), c(-1.0, 0.0), c(-0.2, 3.0)];
        assert_eq!(classify_eigenvalues(&sfn), StabilityClass::StableFocusNode);
        let sf1 = [c(0.2, -3.0), c(-1.0, 0.0), c(0.2, 3.0)];
        assert_eq!(classify_eigenvalues(&sf1), StabilityClass::SaddleFocus1D);
        let sf2 = [c(-0.2, -3.0), c(1.0, 0.0), c(-0.2, 3.0)];
        assert_eq!(classify_eigenvalues(&sf2), StabilityClass::SaddleFocus2D);
        let ufn = [c(0.2, -3.0), c(1.0, 0.0), c(0.2, 3.0)];
        assert_eq!(classify_eigenvalues(&ufn), StabilityClass::UnstableFocusNode);
        let all_real = [c(-1.0, 0.0), c(-2.0, 0.0), c(-3.0, 0.0)];
        assert_eq!(classify_eigenvalues(&all_real), StabilityClass::Degenerate);
        let marginal = [c(0.0, -3.0), c(-1.0, 0.0), c(0.0, 3.0)];
        assert_eq!(classify_eigenvalues(&marginal), StabilityClass::Degenerate);
    }

    #[test]
    fn non_physical_input_rejected() {
        let eqs = symmetric_equilibria(&eff(3.0, 0.5), &DriveParams::new(2.5), PHYSICAL_TOL).unwrap();
        let np = eqs.iter().find(|e| !e.physical).unwrap();
        assert!(classify_equilibrium(np).is_err());
        let p = eqs.iter().find(|e| e.physical).unwrap();
        assert_eq!(classify_equilibrium(p).unwrap(), StabilityClass::StableFocusNode);
    }

    #[test]
    fn regime_spot_checks() {
        assert_eq!(classify_regime(&eff(3.0, 0.5), &DriveParams::new(2.5)), AnalyticRegime::Mono);
        assert_eq!(classify_regime(&eff(3.0, -1.8), &DriveParams::new(2.06)), AnalyticRegime::Bi);
        assert_eq!(classify_regime(&eff(3.0, -2.41), &DriveParams::new(1.56)), AnalyticRegime::LcCh);
    }

    #[test]
    fn regime_labels_round_trip() {
        for r in [
            AnalyticRegime::Mono,
            AnalyticRegime::Bi,
            AnalyticRegime::LcCh,
            AnalyticRegime::LcChMono,
            AnalyticRegime::Unclassified,
        ] {
            assert_eq!(AnalyticRegime::from_label(r.label()), Some(r));
        }
    }

    #[test]
    fn width_zero_for_single_atom() {
        let w = bistable_width(&EffectiveCouplings::default(), 1.0, 0.0, 50.0).unwrap();
        assert_eq!(w.width, 0.0);
        assert_eq!(w.omega_lo, w.omega_hi);
    }

    #[test]
    fn width_brackets_bistable_point() {
        let e = eff(3.0, -1.8);
        let w = bistable_width(&e, 1.0, 0.01, 10.0).unwrap();
        assert!(w.width > 0.0);
        assert!(w.omega_lo < 2.06 && 2.06 < w.omega_hi);
        assert!((w.width - (w.omega_hi - w.omega_lo)).abs() < 1e-15);
        // just inside/outside each edge
        let count = |om: f64| physical_root_count(&e, 1.0, om);
        assert_eq!(count(w.omega_lo + 1e-4), 3);
        assert_eq!(count(w.omega_hi - 1e-4), 3);
        assert_eq!(count(w.omega_lo - 1e-4), 1);
        assert_eq!(count(w.omega_hi + 1e-4), 1);
        assert!(bistable_width(&e, 1.0, 5.0, 1.0).is_err());
    }
}
