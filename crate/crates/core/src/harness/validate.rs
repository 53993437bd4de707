//! Seeded self-check suite: channel identities, the common-phase subproblem
//! against a grid search, and water-filling optimality.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::{det_product_identity, predict_rank, rank1_trace_closed_form, trace_identity};
use crate::capacity::waterfill;
use crate::channel::{effective_channel, ChannelSet, PhaseConfig};
use crate::error::Result;
use crate::geometry::{Scenario, Vec3};
use crate::optimizer::{phase_objective, solve_common_phase};
use crate::{CMatrix, CVector, C64};

pub const GRID_POINTS: usize = 720;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed value of the checked quantity.
    pub worst: f64,
    pub tolerance: f64,
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn random_phase(rng: &mut ChaCha8Rng) -> C64 {
    C64::from_polar(1.0, rng.gen_range(-PI..PI))
}

/// Random `N_t x 2` deployment around the reference layout whose channel is
/// comfortably rank two.
pub fn random_rank_two_scenario(rng: &mut ChaCha8Rng) -> Scenario {
    loop {
        let total = 2 * rng.gen_range(10..100);
        let base = Scenario::reference().with_antennas(rng.gen_range(2..6), 2);
        let mut s = base.with_total_elements(total, 0.5).expect("even split of at least 20 elements");
        let mut jitter = |r: f64| Vec3::new(rng.gen_range(-r..r), rng.gen_range(-r..r), rng.gen_range(-r..r));
        s.bs.position += jitter(0.5);
        s.user.position += jitter(0.5);
        s.bs.axis = jitter(1.0).normalize();
        s.user.axis = jitter(1.0).normalize();
        if s.validate().is_err() {
            continue;
        }
        let Ok(r) = predict_rank(&s) else { continue };
        if r.predicted_rank == 2 && (1.0 - r.rho_t.powi(2)) * (1.0 - r.rho_r.powi(2)) > 1e-2 {
            return s;
        }
    }
}

/// Two user antennas with every BS/user response at broadside, so both
/// BS-side responses coincide and the channel is rank one.
pub fn rank_one_scenario(nt: usize, total: usize) -> Result<Scenario> {
    let mut s = Scenario::reference().with_antennas(nt, 2).with_total_elements(total, 0.5)?;
    s.bs.axis = Vec3::new(0.0, 0.0, 1.0);
    s.user.axis = Vec3::new(0.0, 0.0, 1.0);
    s.validate()?;
    Ok(s)
}

/// Random common-phase subproblem `(X, Y)` with `X - I` PSD and rank-one `Y`,
/// shaped so that `X + g Y + conj(g) Y^H` stays positive definite.
pub fn random_subproblem(rng: &mut ChaCha8Rng, n: usize) -> (CMatrix, CMatrix) {
    let mut z = || C64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
    let h0 = CMatrix::from_fn(n, n, |_, _| z());
    let u = CVector::from_fn(n, |_, _| z());
    let w = CVector::from_fn(n, |_, _| z());
    let x = CMatrix::identity(n, n) + &h0 * h0.adjoint() + (&u * u.adjoint()) * C64::new(w.norm_squared(), 0.0);
    let y = &u * (w.transpose() * h0.adjoint());
    (x, y)
}

fn outcome(name: &'static str, worst: f64, tolerance: f64) -> CheckOutcome {
    CheckOutcome { name, passed: worst <= tolerance, worst, tolerance }
}

fn identities(s: &Scenario, pc: &PhaseConfig) -> Result<(f64, f64)> {
    let (closed, numerical) = det_product_identity(s, pc)?;
    let (sum, trace) = trace_identity(s, pc)?;
    Ok((rel(closed, numerical), rel(sum, trace)))
}

/// Determinant and trace identities on the reference deployment and on
/// `count` random rank-two ones, plus the rank-one trace form.
pub fn check_identities(rng: &mut ChaCha8Rng, count: usize) -> Result<Vec<CheckOutcome>> {
    let mut det_worst = 0.0f64;
    let mut trace_worst = 0.0f64;
    let mut cases = vec![(Scenario::reference(), PhaseConfig::unit())];
    for _ in 0..count {
        let s = random_rank_two_scenario(rng);
        let pc = PhaseConfig::structured(random_phase(rng), random_phase(rng));
        cases.push((s, pc));
    }
    for (s, pc) in &cases {
        let (d, t) = identities(s, pc)?;
        det_worst = det_worst.max(d);
        trace_worst = trace_worst.max(t);
    }

    let s = rank_one_scenario(2, 1000)?;
    let cs = ChannelSet::new(&s)?;
    let mut rank1_worst = 0.0f64;
    for _ in 0..count.max(1) {
        let pc = PhaseConfig::structured(random_phase(rng), random_phase(rng));
        let h = effective_channel(&cs, &pc);
        let tr = (&h * h.adjoint()).trace().re;
        rank1_worst = rank1_worst.max(rel(rank1_trace_closed_form(&s, &pc)?, tr));
    }
    Ok(vec![
        outcome("determinant identity", det_worst, 1e-8),
        outcome("trace identity", trace_worst, 1e-8),
        outcome("rank-one trace closed form", rank1_worst, 1e-6),
    ])
}

/// Largest amount by which a `GRID_POINTS` unit-circle grid beats the
/// closed-form phase, in bits/s/Hz.
pub fn grid_excess(x: &CMatrix, y: &CMatrix) -> Result<f64> {
    let g = solve_common_phase(x, y)?;
    let best = phase_objective(x, y, g);
    let grid = (0..GRID_POINTS)
        .map(|k| phase_objective(x, y, C64::from_polar(1.0, 2.0 * PI * k as f64 / GRID_POINTS as f64)))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((grid - best).max(0.0))
}

pub fn check_subproblem(rng: &mut ChaCha8Rng, count: usize) -> Result<CheckOutcome> {
    let mut worst = 0.0f64;
    for _ in 0..count {
        let n = rng.gen_range(2..5);
        let (x, y) = random_subproblem(rng, n);
        worst = worst.max(grid_excess(&x, &y)?);
    }
    Ok(outcome("common-phase subproblem vs grid", worst, 1e-8))
}

/// Worst KKT residual of a water-filling solution, relative to the budget.
pub fn kkt_residual(deltas: &[f64], power: f64, sigma2: f64) -> Result<f64> {
    let alloc = waterfill(deltas, power, sigma2)?;
    let mu = alloc.water_level;
    let mut worst = (alloc.levels.iter().sum::<f64>() - power).abs();
    for (&p, &d) in alloc.levels.iter().zip(deltas) {
        worst = worst.max((-p).max(0.0));
        if d <= 0.0 {
            worst = worst.max(p);
            continue;
        }
        let floor = sigma2 / (d * d);
        if p > 0.0 {
            worst = worst.max((p + floor - mu).abs());
        } else {
            worst = worst.max((mu - floor).max(0.0));
        }
    }
    Ok(worst / power)
}

pub fn check_waterfill(rng: &mut ChaCha8Rng, count: usize) -> Result<CheckOutcome> {
    let mut worst = 0.0f64;
    for _ in 0..count {
        let n = rng.gen_range(1..7);
        let deltas: Vec<f64> = (0..n).map(|_| 10f64.powf(rng.gen_range(-3.0..1.0))).collect();
        let power = 10f64.powf(rng.gen_range(-3.0..2.0));
        worst = worst.max(kkt_residual(&deltas, power, 1e-2)?);
    }
    Ok(outcome("water-filling KKT", worst, 1e-9))
}

/// The full suite with 100 random cases per check.
pub fn run_validation(seed: u64) -> Result<Vec<CheckOutcome>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = check_identities(&mut rng, 100)?;
    out.push(check_subproblem(&mut rng, 100)?);
    out.push(check_waterfill(&mut rng, 100)?);
    Ok(out)
}
