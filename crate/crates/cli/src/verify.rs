//! The acceptance criteria as a batch run against the frozen constants.
//!
//! Every criterion prints one deterministic line; wall-clock measurements
//! only enter as pass/fail flags, with the seconds reported on stderr.

use std::f64::consts::PI;
use std::io::Write;
use std::time::Instant;

use serde::Serialize;

use nodal_lab::chain::exponents;
use nodal_lab::experiments::{
    beta_shape, chain_for_pair, compute_spectrum, concentric_capacity, lemma_1d_suite, projection_suite, scaling_fit, scaling_rows,
    shape_family, square_pure_modes, Spectrum, SLIT_R0,
};
use nodal_lab::grid::DomainKind;
use nodal_lab::harmonic::{beurling_nevanlinna_check, harmonic_measure_at_zero, ObstacleSet};
use nodal_lab::io::Constants;

use crate::Failure;

/// `π j₀₁²`, the disk's `λ₁ · Area`.
pub const FABER_KRAHN: f64 = 18.168_260_889_661_697;

#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub id: u32,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn frozen(c: &Constants, name: &str) -> Result<f64, Failure> {
    c.get(name).map(|e| e.value).ok_or_else(|| Failure::Input(format!("constants file lacks {name}")))
}

fn within(measured: f64, reference: f64, rel: f64) -> bool {
    (measured - reference).abs() <= rel * reference.abs()
}

/// Sorted `π²(j² + k²)` for the unit square.
pub fn square_eigenvalues(count: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (1..=count).flat_map(|j| (1..=count).map(move |k| PI * PI * (j * j + k * k) as f64)).collect();
    v.sort_by(f64::total_cmp);
    v.truncate(count);
    v
}

pub fn run_all(c: &Constants, out: &mut dyn Write) -> Result<Vec<CriterionResult>, Failure> {
    let mut results = Vec::new();
    let mut emit = |r: CriterionResult, out: &mut dyn Write| -> Result<(), Failure> {
        writeln!(out, "criterion {:>2} {} {}: {}", r.id, if r.pass { "PASS" } else { "FAIL" }, r.name, r.detail)?;
        results.push(r);
        Ok(())
    };

    let t = Instant::now();
    let s20 = compute_spectrum(DomainKind::Square, 257, 1.0, 20, 0)?;
    let secs = t.elapsed().as_secs_f64();
    eprintln!("criterion 1: {secs:.1} s");
    let exact = square_eigenvalues(20);
    let worst = s20.pairs.iter().zip(&exact).map(|(p, e)| (p.lambda - e).abs() / e).fold(0.0, f64::max);
    emit(
        CriterionResult {
            id: 1,
            name: "eigensolver accuracy",
            pass: worst < 0.01 && secs < 60.0,
            detail: format!("max rel error {worst:.3e} over 20 eigenvalues; under 60 s: {}", secs < 60.0),
        },
        out,
    )?;

    let spectra: Vec<Spectrum> =
        vec![compute_spectrum(DomainKind::Square, 257, 1.0, 60, 0)?, compute_spectrum(DomainKind::Disk, 257, 2.0, 60, 0)?];
    let c_lower = frozen(c, "scaling_c_lower")?;
    let mut rows = Vec::new();
    let mut pure = Vec::new();
    for (i, s) in spectra.iter().enumerate() {
        let r = scaling_rows(&s.domain, &s.pairs, 1, c_lower)?;
        if i == 0 {
            pure = square_pure_modes(&s.domain, &r);
        }
        rows.extend(r);
    }
    let (slope, _) = scaling_fit(&rows);
    let floor = rows.iter().map(|r| r.r_min_sqrt_lambda).fold(f64::INFINITY, f64::min);
    let lam_max = rows.iter().map(|r| r.lambda).fold(0.0, f64::max);
    let pure_err = pure.iter().map(|p| p.rel_error).fold(0.0, f64::max);
    emit(
        CriterionResult {
            id: 2,
            name: "scaling law",
            pass: rows.len() >= 100
                && lam_max <= 5000.0
                && (slope + 0.5).abs() <= 0.1
                && floor >= 0.5
                && !pure.is_empty()
                && pure_err <= 0.1
                && floor >= 0.95 * c_lower,
            detail: format!(
                "{} eigenfunctions, slope {slope:.4}, min r*sqrt(lambda) {floor:.4}, {} simple square modes max rel error {pure_err:.4}",
                rows.len(),
                pure.len()
            ),
        },
        out,
    )?;

    let family = shape_family(257)?;
    let inrad_max = family.iter().map(|f| f.inrad_product).fold(0.0, f64::max);
    let inrad_frozen = frozen(c, "inrad_upper")?;
    emit(
        CriterionResult {
            id: 3,
            name: "inner radius upper bound",
            pass: inrad_max <= 7.0 && within(inrad_max, inrad_frozen, 0.05),
            detail: format!("max lambda1*inrad^2 {inrad_max:.4} (frozen {inrad_frozen:.4})"),
        },
        out,
    )?;

    let fk_min = family.iter().map(|f| f.fk_product).fold(f64::INFINITY, f64::min);
    let disk = family.iter().find(|f| f.name == "disk").expect("disk in family");
    emit(
        CriterionResult {
            id: 4,
            name: "Faber-Krahn",
            pass: fk_min >= FABER_KRAHN * 0.98 && within(disk.fk_product, FABER_KRAHN, 0.02),
            detail: format!("min lambda1*area {fk_min:.4}, disk {:.4}", disk.fk_product),
        },
        out,
    )?;

    let mut violations = 0;
    let mut final_fail = 0;
    let mut all_fail = 0;
    let mut slow = 0;
    let mut runs = 0;
    for s in &spectra {
        for p in &s.pairs {
            let t = Instant::now();
            let (summary, reports) = chain_for_pair(p, &s.domain)?;
            slow += usize::from(t.elapsed().as_secs_f64() >= 10.0);
            violations += reports.iter().map(|r| r.step2_violations).sum::<usize>();
            final_fail += reports.iter().filter(|r| !r.final_ok).count();
            all_fail += usize::from(!summary.all_ok);
            runs += 1;
        }
    }
    emit(
        CriterionResult {
            id: 5,
            name: "chain pipeline",
            pass: violations == 0 && final_fail == 0 && slow == 0,
            detail: format!("{runs} eigenfunctions: step-2 violations {violations}, final-bound failures {final_fail}, reports not all_ok {all_fail}, over 10 s {slow}"),
        },
        out,
    )?;

    let ann = concentric_capacity(2, 0.25, 0.5, 257, 1e-10)?;
    let ball = concentric_capacity(3, 0.15, 0.45, 97, 1e-10)?;
    let (e2, e3) = (ann.rel_error.unwrap_or(f64::INFINITY), ball.rel_error.unwrap_or(f64::INFINITY));
    emit(
        CriterionResult {
            id: 6,
            name: "capacity",
            pass: e2 <= 0.05 && e3 <= 0.07,
            detail: format!("annulus {:.4} (rel {e2:.4}), balls {:.4} (rel {e3:.4})", ann.capacity, ball.capacity),
        },
        out,
    )?;

    let b2 = beta_shape(2, 256)?;
    let b3 = beta_shape(3, 32)?;
    emit(
        CriterionResult {
            id: 7,
            name: "beta(gamma) shape",
            pass: b2.rel_error <= 0.2 && b3.rel_error <= 0.2,
            detail: format!("2D slope {:.4} vs {:.4}, 3D slope {:.4} vs {:.4}", b2.slope, b2.target_slope, b3.slope, b3.target_slope),
        },
        out,
    )?;

    let proj = projection_suite(100, 64, 0.25, 0)?;
    emit(
        CriterionResult {
            id: 8,
            name: "projection Poincare",
            pass: proj.falsified == 0 && proj.intermediate_failures == 0,
            detail: format!("100 trials, falsified {}, max required C {:.4} vs {:.1}", proj.falsified, proj.c_required_max, proj.c_tracked),
        },
        out,
    )?;

    let lemma = lemma_1d_suite(1000, 0, 1e-6)?;
    emit(
        CriterionResult {
            id: 9,
            name: "1D lemma",
            pass: lemma.falsified == 0,
            detail: format!("1000 functions, falsified {}, max lhs/rhs {:.4}", lemma.falsified, lemma.max_ratio),
        },
        out,
    )?;

    let empty = harmonic_measure_at_zero(&ObstacleSet::empty(), 1000, 0)?;
    let circle = harmonic_measure_at_zero(&ObstacleSet::circle(0.5)?, 100_000, 0)?;
    let table = beurling_nevanlinna_check(&SLIT_R0, 200_000, 0)?;
    let t = Instant::now();
    harmonic_measure_at_zero(&ObstacleSet::radial_slit(0.1)?, 1_000_000, 1)?;
    let secs = t.elapsed().as_secs_f64();
    eprintln!("criterion 10: 1e6 samples in {secs:.1} s");
    emit(
        CriterionResult {
            id: 10,
            name: "harmonic measure",
            pass: empty.omega0 == 0.0
                && circle.omega0 >= 1.0 - 3.0 * circle.stderr
                && table.variation < 0.3
                && table.monotone
                && secs < 30.0,
            detail: format!(
                "empty {}, circle {:.4}, slit variation {:.4}, monotone {}, 1e6 samples under 30 s: {}",
                empty.omega0,
                circle.omega0,
                table.variation,
                table.monotone,
                secs < 30.0
            ),
        },
        out,
    )?;

    let (x2, x3) = (exponents(2)?, exponents(3)?);
    emit(
        CriterionResult {
            id: 11,
            name: "exponent formulas",
            pass: (x2.k, x3.k, x2.alpha, x3.alpha) == (0.5, 3.625, 8.5, 18.75),
            detail: format!("k(2) {}, k(3) {}, alpha(2) {}, alpha(3) {}", x2.k, x3.k, x2.alpha, x3.alpha),
        },
        out,
    )?;

    let again = |seed: u64| -> Result<String, Failure> {
        let s = compute_spectrum(DomainKind::Disk, 65, 2.0, 8, seed)?;
        let rows = scaling_rows(&s.domain, &s.pairs, 1, 0.5)?;
        let h = harmonic_measure_at_zero(&ObstacleSet::radial_slit(0.2)?, 20_000, seed)?;
        let p = projection_suite(10, 32, 0.25, seed)?;
        let bits: Vec<u64> = s.pairs.iter().flat_map(|p| p.phi.iter().map(|x| x.to_bits())).collect();
        Ok(format!("{bits:?}{rows:?}{h:?}{p:?}"))
    };
    let same = again(5)? == again(5)?;
    emit(
        CriterionResult { id: 12, name: "determinism", pass: same, detail: format!("repeated spectrum, scaling, harmonic and projection runs identical: {same}") },
        out,
    )?;
    Ok(results)
}
