//! Capacity maximization: alternating optimization over `Q` and the two
//! common phase shifts, the per-element alternating benchmark, and the
//! fixed-template heuristic.

use nalgebra::Cholesky;

use crate::capacity::{log_det_identity_plus, log2_det_hpd, optimal_covariance_detailed, TransmitCovariance};
use crate::channel::{ChannelSet, PhaseConfig, StructuredChannel};
use crate::error::{Error, Result};
use crate::geometry::Scenario;
use crate::{CMatrix, CVector, C64};

pub const DEFAULT_EPS: f64 = 1e-5;
pub const DEFAULT_MAX_CYCLES: usize = 500;
pub const DEFAULT_ELEMENT_CAP: usize = 4096;

/// When the alternating loop stops.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StopRule {
    /// After a full cycle in which no single update raised the objective by
    /// a relative `eps` or more.
    #[default]
    CycleMax,
    /// As soon as any single update raises the objective by less than `eps`.
    AnyVariable,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AoConfig {
    pub eps: f64,
    pub max_cycles: usize,
    pub stop_rule: StopRule,
}

impl Default for AoConfig {
    fn default() -> Self {
        AoConfig { eps: DEFAULT_EPS, max_cycles: DEFAULT_MAX_CYCLES, stop_rule: StopRule::CycleMax }
    }
}

/// Outcome of a capacity maximization.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub covariance: TransmitCovariance,
    pub phases: PhaseConfig,
    pub rate: f64,
    /// Objective after every update, starting from the first `Q` update.
    pub objective_trace: Vec<f64>,
    /// Completed cycles.
    pub iterations: usize,
    pub converged: bool,
    /// All singular values of the final channel, descending.
    pub singular_values: Vec<f64>,
    /// Water-filling levels of the last covariance update.
    pub power_levels: Vec<f64>,
}

fn relative_increment(new: f64, old: f64) -> f64 {
    if old > 0.0 {
        (new - old) / old
    } else if new > old {
        f64::INFINITY
    } else {
        0.0
    }
}

fn rate_of(h: &CMatrix, q: &CMatrix, sigma2: f64) -> f64 {
    log_det_identity_plus(&(h * q * h.adjoint()), sigma2)
}

/// Optimal covariance for `h`; a channel with no usable eigenchannel keeps
/// the uniform covariance.
fn best_covariance(h: &CMatrix, power: f64, sigma2: f64) -> Result<(TransmitCovariance, Vec<f64>, Vec<f64>)> {
    match optimal_covariance_detailed(h, power, sigma2) {
        Ok(sol) => Ok((sol.covariance, sol.allocation.levels, sol.spectrum.all_singular_values)),
        Err(Error::EmptySpectrum) => Ok((TransmitCovariance::uniform(h.ncols(), power), Vec::new(), Vec::new())),
        Err(e) => Err(e),
    }
}

fn all_singular_values(h: &CMatrix) -> Vec<f64> {
    let mut sv: Vec<f64> = h.clone().singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// The link matrices `A, B, C` with `Q^{1/2}` absorbed, so that
/// `H(g1, g2) Q^{1/2} = g1 A + g2 B + g1 g2 C`.
pub fn build_abc(sc: &StructuredChannel, q: &TransmitCovariance) -> (CMatrix, CMatrix, CMatrix) {
    let f = q.sqrt_factor();
    let (a, b, c) = sc.components();
    (a * &f, b * &f, c * f)
}

/// `X` and `Y` of a single common-phase subproblem: the objective as a
/// function of the free phase `g` is `log2 det(X + g Y + conj(g) Y^H)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemData {
    pub a: CMatrix,
    pub b: CMatrix,
    pub c: CMatrix,
    pub x: CMatrix,
    pub y: CMatrix,
}

fn identity_like(m: &CMatrix) -> CMatrix {
    CMatrix::identity(m.nrows(), m.nrows())
}

/// Subproblem for `gamma1` with `gamma2` fixed.
pub fn gamma1_subproblem(a: CMatrix, b: CMatrix, c: CMatrix, gamma2: C64, sigma2: f64) -> SubproblemData {
    let s = C64::new(1.0 / sigma2, 0.0);
    let base = &a * a.adjoint() + &b * b.adjoint() + &c * c.adjoint();
    let cross = (&c * a.adjoint()) * gamma2 + (&a * c.adjoint()) * gamma2.conj();
    let x = identity_like(&a) + (base + cross) * s;
    let y = ((&a * b.adjoint()) * gamma2.conj() + &c * b.adjoint()) * s;
    SubproblemData { a, b, c, x, y }
}

/// Subproblem for `gamma2` with `gamma1` fixed.
pub fn gamma2_subproblem(a: CMatrix, b: CMatrix, c: CMatrix, gamma1: C64, sigma2: f64) -> SubproblemData {
    let s = C64::new(1.0 / sigma2, 0.0);
    let base = &a * a.adjoint() + &b * b.adjoint() + &c * c.adjoint();
    let cross = (&c * b.adjoint()) * gamma1 + (&b * c.adjoint()) * gamma1.conj();
    let x = identity_like(&a) + (base + cross) * s;
    let y = ((&b * a.adjoint()) * gamma1.conj() + &c * a.adjoint()) * s;
    SubproblemData { a, b, c, x, y }
}

/// `log2 det(X + g Y + conj(g) Y^H)`.
pub fn phase_objective(x: &CMatrix, y: &CMatrix, g: C64) -> f64 {
    log2_det_hpd(&(x + y * g + y.adjoint() * g.conj()))
}

/// `nu = tr(X^{-1} Y)`, the sole nonzero eigenvalue of `X^{-1} Y` for rank-one `Y`.
pub fn subproblem_nu(x: &CMatrix, y: &CMatrix) -> Result<C64> {
    let ch = Cholesky::new(x.clone())
        .ok_or_else(|| Error::Numerical("subproblem matrix X is not positive definite".into()))?;
    Ok(ch.solve(y).trace())
}

/// Unit-modulus maximizer `e^{-j arg nu}` of `log det(X + g Y + conj(g) Y^H)`.
pub fn solve_common_phase(x: &CMatrix, y: &CMatrix) -> Result<C64> {
    let nu = subproblem_nu(x, y)?;
    if nu.norm() > 1e-12 * y.norm() && nu.norm() > 0.0 {
        Ok(C64::from_polar(1.0, -nu.arg()))
    } else {
        Ok(C64::new(1.0, 0.0))
    }
}

/// Phase `g` maximizing `log det(X + g Y + conj(g) Y^H)`, kept only if it
/// does not lose to `current` through rounding.
fn improve_phase(x: &CMatrix, y: &CMatrix, current: C64) -> Result<(C64, f64)> {
    let g = solve_common_phase(x, y)?;
    let new = phase_objective(x, y, g);
    let old = phase_objective(x, y, current);
    Ok(if new >= old { (g, new) } else { (current, old) })
}

/// Alternating optimization over `Q`, `gamma1`, `gamma2` on an arbitrary
/// (possibly link-masked) structured channel.
pub fn algorithm1_structured(sc: &StructuredChannel, power: f64, sigma2: f64, cfg: &AoConfig) -> Result<SolveResult> {
    let one = C64::new(1.0, 0.0);
    let (mut g1, mut g2) = (one, one);
    let nt = sc.bs_antennas();
    let mut prev = rate_of(&sc.matrix(g1, g2), &TransmitCovariance::uniform(nt, power).q, sigma2);
    let mut trace = Vec::new();
    let mut cov = TransmitCovariance::uniform(nt, power);
    let mut levels = Vec::new();
    let mut cycles = 0;
    let mut converged = false;

    'outer: while cycles < cfg.max_cycles {
        cycles += 1;
        let mut worst: f64 = 0.0;
        let mut step = |rate: f64, prev: &mut f64, trace: &mut Vec<f64>| -> bool {
            let inc = relative_increment(rate, *prev);
            worst = worst.max(inc);
            *prev = rate;
            trace.push(rate);
            cfg.stop_rule == StopRule::AnyVariable && inc < cfg.eps
        };

        let h = sc.matrix(g1, g2);
        let (q, lv, _) = best_covariance(&h, power, sigma2)?;
        let mut r = rate_of(&h, &q.q, sigma2);
        if r >= prev || trace.is_empty() {
            cov = q;
            levels = lv;
        } else {
            r = prev;
        }
        if step(r, &mut prev, &mut trace) {
            converged = true;
            break 'outer;
        }

        let (a, b, c) = build_abc(sc, &cov);
        let sub = gamma1_subproblem(a, b, c, g2, sigma2);
        let (ng1, r) = improve_phase(&sub.x, &sub.y, g1)?;
        g1 = ng1;
        if step(r, &mut prev, &mut trace) {
            converged = true;
            break 'outer;
        }

        let sub = gamma2_subproblem(sub.a, sub.b, sub.c, g1, sigma2);
        let (ng2, r) = improve_phase(&sub.x, &sub.y, g2)?;
        g2 = ng2;
        if step(r, &mut prev, &mut trace) {
            converged = true;
            break 'outer;
        }

        if cfg.stop_rule == StopRule::CycleMax && worst < cfg.eps {
            converged = true;
            break;
        }
    }

    let h = sc.matrix(g1, g2);
    Ok(SolveResult {
        rate: rate_of(&h, &cov.q, sigma2),
        objective_trace: trace,
        covariance: cov,
        phases: PhaseConfig::structured(g1, g2),
        iterations: cycles,
        converged,
        singular_values: all_singular_values(&h),
        power_levels: levels,
    })
}

/// Alternating optimization of `Q` and the two common phase shifts.
pub fn algorithm1(cs: &ChannelSet, s: &Scenario, eps: f64) -> Result<SolveResult> {
    let cfg = AoConfig { eps, ..AoConfig::default() };
    algorithm1_structured(&StructuredChannel::new(cs), s.tx_power, s.noise_power, &cfg)
}

/// Co-phasing templates at unit common phase, then the optimal `Q`.
pub fn heuristic_structured(sc: &StructuredChannel, power: f64, sigma2: f64) -> Result<SolveResult> {
    let one = C64::new(1.0, 0.0);
    let h = sc.matrix(one, one);
    let (q, levels, sv) = best_covariance(&h, power, sigma2)?;
    let rate = rate_of(&h, &q.q, sigma2);
    Ok(SolveResult {
        covariance: q,
        phases: PhaseConfig::unit(),
        rate,
        objective_trace: vec![rate],
        iterations: 1,
        converged: true,
        singular_values: if sv.is_empty() { all_singular_values(&h) } else { sv },
        power_levels: levels,
    })
}

pub fn heuristic_fixed_phase(cs: &ChannelSet, s: &Scenario) -> Result<SolveResult> {
    heuristic_structured(&StructuredChannel::new(cs), s.tx_power, s.noise_power)
}

/// Channel the per-element benchmark sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ElementChannel {
    /// Matrices reconstructed from the factored far-field channels.
    #[default]
    Factored,
    /// Element-wise matrices from exact per-pair distances.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerElementConfig {
    pub ao: AoConfig,
    pub element_cap: usize,
    pub channel: ElementChannel,
}

impl Default for PerElementConfig {
    fn default() -> Self {
        PerElementConfig { ao: AoConfig::default(), element_cap: DEFAULT_ELEMENT_CAP, channel: ElementChannel::Factored }
    }
}

/// Working state of the per-element sweep.
struct ElementState {
    r1: CMatrix,
    t1: CMatrix,
    r2: CMatrix,
    t2: CMatrix,
    s: CMatrix,
    phi1: CVector,
    phi2: CVector,
    /// `S Phi1 T1`
    f: CMatrix,
    /// `R2 Phi2 S`
    g: CMatrix,
    h: CMatrix,
}

impl ElementState {
    fn new(r1: CMatrix, t1: CMatrix, r2: CMatrix, t2: CMatrix, s: CMatrix, phi1: CVector, phi2: CVector) -> Self {
        let p1t1 = crate::channel::scale_rows(&t1, &phi1);
        let f = &s * &p1t1;
        let g = &r2 * crate::channel::scale_rows(&s, &phi2);
        let h = &r1 * &p1t1 + &r2 * crate::channel::scale_rows(&(&t2 + &f), &phi2);
        ElementState { r1, t1, r2, t2, s, phi1, phi2, f, g, h }
    }

    /// Best value of one coefficient whose contribution to `H` is `phi * u w^T`.
    fn best_coefficient(&self, u: &CVector, w: &nalgebra::RowDVector<C64>, phi: C64, q: &CMatrix, sigma2: f64) -> Result<(C64, f64)> {
        let s = C64::new(1.0 / sigma2, 0.0);
        let contrib = u * w * phi;
        let h0 = &self.h - contrib;
        let qh0 = q * h0.adjoint();
        let wq = w * q;
        let power = (&wq * w.adjoint())[(0, 0)];
        let x = CMatrix::identity(u.len(), u.len()) + (&h0 * &qh0 + (u * u.adjoint()) * power) * s;
        let y = (u * (w * &qh0)) * s;
        improve_phase(&x, &y, phi)
    }

    fn update_phi1(&mut self, m: usize, q: &CMatrix, sigma2: f64) -> Result<f64> {
        let u: CVector = self.r1.column(m) + self.g.column(m);
        let w = self.t1.row(m).into_owned();
        let old = self.phi1[m];
        let (new, rate) = self.best_coefficient(&u, &w, old, q, sigma2)?;
        let delta = new - old;
        if delta != C64::new(0.0, 0.0) {
            self.h += (&u * &w) * delta;
            self.f += (self.s.column(m) * &w) * delta;
            self.phi1[m] = new;
        }
        Ok(rate)
    }

    fn update_phi2(&mut self, m: usize, q: &CMatrix, sigma2: f64) -> Result<f64> {
        let u: CVector = self.r2.column(m).into_owned();
        let w = self.t2.row(m) + self.f.row(m);
        let old = self.phi2[m];
        let (new, rate) = self.best_coefficient(&u, &w, old, q, sigma2)?;
        let delta = new - old;
        if delta != C64::new(0.0, 0.0) {
            self.h += (&u * &w) * delta;
            self.g += (&u * self.s.row(m)) * delta;
            self.phi2[m] = new;
        }
        Ok(rate)
    }
}

/// Alternating optimization over `Q` and every individual reflection
/// coefficient, starting from the co-phasing templates at unit common phase.
pub fn per_element_ao_with(cs: &ChannelSet, s: &Scenario, cfg: &PerElementConfig) -> Result<SolveResult> {
    let elements = cs.irs1_elements() + cs.irs2_elements();
    if elements > cfg.element_cap {
        return Err(Error::ElementCapExceeded { elements, cap: cfg.element_cap });
    }
    let (power, sigma2) = (s.tx_power, s.noise_power);
    let (phi1, phi2) = PhaseConfig::unit().expand(cs);
    let mut st = match cfg.channel {
        ElementChannel::Factored => ElementState::new(
            cs.r1.matrix(),
            cs.t1.matrix(),
            cs.r2.matrix(),
            cs.t2.matrix(),
            cs.s.matrix(),
            phi1,
            phi2,
        ),
        ElementChannel::Exact => {
            let ex = match &cs.exact {
                Some(ex) => ex.clone(),
                None => ChannelSet::with_exact(s)?.exact.expect("exact channels requested"),
            };
            ElementState::new(ex.r1, ex.t1, ex.r2, ex.t2, ex.s, phi1, phi2)
        }
    };

    let (mut cov, mut levels, _) = best_covariance(&st.h, power, sigma2)?;
    let mut prev = rate_of(&st.h, &cov.q, sigma2);
    let mut trace = vec![prev];
    let mut cycles = 0;
    let mut converged = false;
    let ao = cfg.ao;

    let record = |rate: f64, prev: &mut f64, trace: &mut Vec<f64>| -> f64 {
        let inc = relative_increment(rate, *prev);
        *prev = rate;
        trace.push(rate);
        inc
    };

    while cycles < ao.max_cycles {
        cycles += 1;
        let mut incs = [0.0; 3];

        let mut r = prev;
        for m in 0..st.phi1.len() {
            r = st.update_phi1(m, &cov.q, sigma2)?;
        }
        incs[0] = record(r, &mut prev, &mut trace);
        if ao.stop_rule == StopRule::AnyVariable && incs[0] < ao.eps {
            converged = true;
            break;
        }

        let mut r = prev;
        for m in 0..st.phi2.len() {
            r = st.update_phi2(m, &cov.q, sigma2)?;
        }
        incs[1] = record(r, &mut prev, &mut trace);
        if ao.stop_rule == StopRule::AnyVariable && incs[1] < ao.eps {
            converged = true;
            break;
        }

        let (q, lv, _) = best_covariance(&st.h, power, sigma2)?;
        let mut r = rate_of(&st.h, &q.q, sigma2);
        if r >= prev {
            cov = q;
            levels = lv;
        } else {
            r = prev;
        }
        incs[2] = record(r, &mut prev, &mut trace);
        if ao.stop_rule == StopRule::AnyVariable && incs[2] < ao.eps {
            converged = true;
            break;
        }

        if ao.stop_rule == StopRule::CycleMax && incs.iter().all(|&i| i < ao.eps) {
            converged = true;
            break;
        }
    }

    Ok(SolveResult {
        rate: rate_of(&st.h, &cov.q, sigma2),
        objective_trace: trace,
        covariance: cov,
        singular_values: all_singular_values(&st.h),
        phases: PhaseConfig::PerElement { phi1: st.phi1, phi2: st.phi2 },
        iterations: cycles,
        converged,
        power_levels: levels,
    })
}

pub fn per_element_ao(cs: &ChannelSet, s: &Scenario, eps: f64, max_iters: usize) -> Result<SolveResult> {
    let cfg = PerElementConfig { ao: AoConfig { eps, max_cycles: max_iters, ..AoConfig::default() }, ..PerElementConfig::default() };
    per_element_ao_with(cs, s, &cfg)
}
