//! Von Neumann analysis of the nodal DG discretisation of
//! u_t + a u_x = mu u_xx on a uniform periodic mesh.
//!
//! Under the Bloch ansatz u_{j+1} = e^{ikh} u_j every element sees the same
//! (N+1)x(N+1) operator M(kh), with (h/2) du/dt = M u. Modes satisfy
//! -i omega (h/2) v = M v.

use crate::basis::{svv_kernel, BasisError, KernelSpec, NodalBasis, NodeFamily};
use crate::linalg::{self, EigError};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

type CMat = DMatrix<Complex64>;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VnError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error("eigensolver failed at kh = {kh}: {source}")]
    Eigen { kh: f64, source: EigError },
    #[error("k grid must start near zero (first |kh| < 1e-3), got {0}")]
    GridStart(f64),
    #[error("k grid must be ascending")]
    GridOrder,
    #[error("lambda grid must be non-negative and ascending")]
    LambdaGrid,
    #[error("mode-set scan needs a k grid spanning one full 2*pi period")]
    PeriodGrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvvSettings {
    pub mu: f64,
    pub kernel: KernelSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VnConfig {
    pub n: usize,
    pub family: NodeFamily,
    pub a: f64,
    pub h: f64,
    /// domain length entering mu = a L / Pe
    pub length: f64,
    pub lambda: f64,
    /// `None` is inviscid
    pub pe: Option<f64>,
    pub svv: Option<SvvSettings>,
}

impl Default for VnConfig {
    fn default() -> Self {
        Self {
            n: 7,
            family: NodeFamily::Gauss,
            a: 1.0,
            h: 1.0,
            length: 1.0,
            lambda: 0.0,
            pe: None,
            svv: None,
        }
    }
}

impl VnConfig {
    pub fn mu(&self) -> f64 {
        match self.pe {
            Some(pe) => self.a * self.length / pe,
            None => 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), VnError> {
        if !(self.lambda >= 0.0) {
            return Err(VnError::InvalidConfig(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if let Some(pe) = self.pe {
            if !(pe > 0.0) {
                return Err(VnError::InvalidConfig(format!("Pe must be > 0, got {pe}")));
            }
        }
        if !(self.h > 0.0) || !(self.length > 0.0) {
            return Err(VnError::InvalidConfig("h and L must be positive".into()));
        }
        if let Some(s) = &self.svv {
            if !(s.mu >= 0.0) {
                return Err(VnError::InvalidConfig(format!("mu_SVV must be >= 0, got {}", s.mu)));
            }
        }
        Ok(())
    }
}

/// Per-configuration data reused across wave numbers.
#[derive(Debug, Clone)]
pub struct VnContext {
    pub cfg: VnConfig,
    pub basis: NodalBasis,
    dtw: DMatrix<f64>,
    winv: Vec<f64>,
    filter: Option<DMatrix<f64>>,
}

impl VnContext {
    pub fn new(cfg: &VnConfig) -> Result<Self, VnError> {
        cfg.validate()?;
        let basis = NodalBasis::new(cfg.n as i64, cfg.family)?;
        let np = basis.np();
        let mut dtw = basis.d.transpose();
        for i in 0..np {
            for j in 0..np {
                dtw[(i, j)] *= basis.weights[j];
            }
        }
        let winv = basis.weights.iter().map(|w| 1.0 / w).collect();
        let filter = match &cfg.svv {
            Some(s) => Some(basis.filter_matrix(&svv_kernel(cfg.n, s.kernel)?)?),
            None => None,
        };
        Ok(Self { cfg: cfg.clone(), basis, dtw, winv, filter })
    }

    /// Phase-shifted BR1 gradient: q = (2/h) G u.
    pub fn gradient(&self, kh: f64) -> CMat {
        let np = self.basis.np();
        let e = Complex64::from_polar(1.0, kh);
        let em = e.conj();
        let (ll, lr) = (&self.basis.l_left, &self.basis.l_right);
        CMat::from_fn(np, np, |i, j| {
            let uhat_r = 0.5 * (lr[j] + e * ll[j]);
            let uhat_l = 0.5 * (em * lr[j] + ll[j]);
            (lr[i] * uhat_r - ll[i] * uhat_l - self.dtw[(i, j)]) * self.winv[i]
        })
    }

    /// Advective part with flux a{u} + (lambda a / 2)[[u]].
    pub fn advection(&self, kh: f64) -> CMat {
        let np = self.basis.np();
        let (a, lam) = (self.cfg.a, self.cfg.lambda);
        let e = Complex64::from_polar(1.0, kh);
        let em = e.conj();
        let (ll, lr) = (&self.basis.l_left, &self.basis.l_right);
        CMat::from_fn(np, np, |i, j| {
            let f_r = a * (0.5 * (1.0 + lam) * lr[j] + 0.5 * (1.0 - lam) * e * ll[j]);
            let f_l = a * (0.5 * (1.0 + lam) * em * lr[j] + 0.5 * (1.0 - lam) * ll[j]);
            (a * self.dtw[(i, j)] - lr[i] * f_r + ll[i] * f_l) * self.winv[i]
        })
    }

    pub fn operator(&self, kh: f64) -> VnOperator {
        let mut m = self.advection(kh);
        let mu = self.cfg.mu();
        let needs_grad = mu > 0.0 || self.cfg.svv.map_or(false, |s| s.mu > 0.0);
        if needs_grad {
            let g = self.gradient(kh);
            let s = 2.0 / self.cfg.h;
            if mu > 0.0 {
                m += &g * &g * Complex64::new(mu * s, 0.0);
            }
            if let (Some(svv), Some(f)) = (&self.cfg.svv, &self.filter) {
                if svv.mu > 0.0 {
                    let fc = f.map(|x| Complex64::new(x, 0.0));
                    m += &g * fc * &g * Complex64::new(svv.mu * s, 0.0);
                }
            }
        }
        VnOperator { kh, m }
    }

    pub fn decompose(&self, op: &VnOperator) -> Result<ModeDecomposition, VnError> {
        let kh = op.kh;
        let h = self.cfg.h;
        let e = linalg::eig(&op.m).map_err(|source| VnError::Eigen { kh, source })?;
        let omega: Vec<Complex64> = e.values.iter().map(|&z| z * I * (2.0 / h)).collect();
        let u0 = self.initial_condition(kh);
        let amps = e
            .vectors
            .clone()
            .lu()
            .solve(&u0)
            .ok_or(VnError::Eigen { kh, source: EigError::IllConditioned(f64::INFINITY) })?;
        let primary = argmin_abs(&omega);
        Ok(ModeDecomposition {
            kh,
            n: self.cfg.n,
            h,
            omega,
            vectors: e.vectors,
            amps: amps.as_slice().to_vec(),
            primary,
            cond: e.cond,
            l_left: self.basis.l_left.clone(),
            l_right: self.basis.l_right.clone(),
        })
    }

    /// Nodal samples of e^{ikx} on the reference element centred at 0.
    pub fn initial_condition(&self, kh: f64) -> DVector<Complex64> {
        DVector::from_iterator(
            self.basis.np(),
            self.basis.nodes.iter().map(|&xi| Complex64::from_polar(1.0, 0.5 * kh * xi)),
        )
    }
}

#[derive(Debug, Clone)]
pub struct VnOperator {
    pub kh: f64,
    pub m: CMat,
}

pub fn assemble_operator(cfg: &VnConfig, kh: f64) -> Result<VnOperator, VnError> {
    if !(kh.abs() <= std::f64::consts::PI + 1e-12) {
        return Err(VnError::InvalidConfig(format!("|kh| must be <= pi, got {kh}")));
    }
    Ok(VnContext::new(cfg)?.operator(kh))
}

pub fn decompose(op: &VnOperator, cfg: &VnConfig) -> Result<ModeDecomposition, VnError> {
    VnContext::new(cfg)?.decompose(op)
}

#[derive(Debug, Clone)]
pub struct ModeDecomposition {
    pub kh: f64,
    pub n: usize,
    pub h: f64,
    pub omega: Vec<Complex64>,
    /// unit-norm eigenvectors as columns
    pub vectors: CMat,
    pub amps: Vec<Complex64>,
    pub primary: usize,
    pub cond: f64,
    l_left: Vec<f64>,
    l_right: Vec<f64>,
}

impl ModeDecomposition {
    pub fn modes(&self) -> usize {
        self.omega.len()
    }

    /// omega_hat = omega h / (N+1)
    pub fn omega_hat(&self, m: usize) -> Complex64 {
        self.omega[m] * (self.h / (self.n as f64 + 1.0))
    }

    pub fn k_hat(&self) -> f64 {
        self.kh / (self.n as f64 + 1.0)
    }

    pub fn with_primary(mut self, p: usize) -> Self {
        self.primary = p;
        self
    }

    /// Secondary-mode content sum_{m != p} A_m v_m.
    pub fn secondary_content(&self) -> DVector<Complex64> {
        let mut s = DVector::zeros(self.modes());
        for m in (0..self.modes()).filter(|&m| m != self.primary) {
            s += self.vectors.column(m) * self.amps[m];
        }
        s
    }

    /// Jump of a nodal element state across the right interface under the
    /// Bloch shift: u(1) - e^{ikh} u(-1).
    pub fn trace_jump(&self, u: &DVector<Complex64>) -> Complex64 {
        let e = Complex64::from_polar(1.0, self.kh);
        let ur: Complex64 = self.l_right.iter().zip(u.iter()).map(|(l, v)| v * l).sum();
        let ul: Complex64 = self.l_left.iter().zip(u.iter()).map(|(l, v)| v * l).sum();
        ur - e * ul
    }

    pub fn residual(&self, op: &VnOperator, m: usize) -> f64 {
        let v = self.vectors.column(m).into_owned();
        let lhs = &op.m * &v;
        let rhs = &v * (-I * self.omega[m] * (self.h / 2.0));
        (lhs - rhs).norm()
    }
}

pub fn secondary_mode_error(dec: &ModeDecomposition) -> f64 {
    dec.secondary_content().norm()
}

pub fn interface_jump(dec: &ModeDecomposition) -> Complex64 {
    dec.trace_jump(&dec.secondary_content())
}

fn argmin_abs(omega: &[Complex64]) -> usize {
    let mut best = 0;
    for (m, w) in omega.iter().enumerate() {
        if w.norm() < omega[best].norm() {
            best = m;
        }
    }
    best
}

fn argmax_amp(amps: &[Complex64]) -> usize {
    let mut best = 0;
    for (m, a) in amps.iter().enumerate() {
        if a.norm() > amps[best].norm() {
            best = m;
        }
    }
    best
}

#[derive(Debug, Clone)]
pub struct PrimaryTrack {
    pub indices: Vec<usize>,
    /// grid positions where the top two overlaps differ by < 1e-3
    pub ambiguous: Vec<usize>,
    /// max-|A_m| cross-check per grid point
    pub amp_agrees: Vec<bool>,
    pub decomps: Vec<ModeDecomposition>,
}

pub const AMBIGUITY_GAP: f64 = 1e-3;

fn decompose_grid(ctx: &VnContext, grid: &[f64]) -> Vec<Result<ModeDecomposition, VnError>> {
    grid.par_iter().map(|&kh| ctx.decompose(&ctx.operator(kh))).collect()
}

pub fn track_primary(cfg: &VnConfig, k_grid: &[f64]) -> Result<PrimaryTrack, VnError> {
    let ctx = VnContext::new(cfg)?;
    check_k_grid(k_grid)?;
    let decs = decompose_grid(&ctx, k_grid).into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(continue_primary(decs))
}

fn check_k_grid(k_grid: &[f64]) -> Result<(), VnError> {
    let first = *k_grid.first().ok_or(VnError::GridStart(f64::NAN))?;
    if first.abs() >= 1e-3 {
        return Err(VnError::GridStart(first));
    }
    if k_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(VnError::GridOrder);
    }
    Ok(())
}

fn continue_primary(decs: Vec<ModeDecomposition>) -> PrimaryTrack {
    let mut indices = Vec::with_capacity(decs.len());
    let mut ambiguous = Vec::new();
    let mut out = Vec::with_capacity(decs.len());
    let mut prev: Option<DVector<Complex64>> = None;
    for (g, d) in decs.into_iter().enumerate() {
        let p = match &prev {
            None => argmin_abs(&d.omega),
            Some(pv) => {
                let ov: Vec<f64> = (0..d.modes()).map(|m| pv.dotc(&d.vectors.column(m)).norm()).collect();
                let mut order: Vec<usize> = (0..ov.len()).collect();
                order.sort_by(|&a, &b| ov[b].total_cmp(&ov[a]));
                if ov.len() > 1 && ov[order[0]] - ov[order[1]] < AMBIGUITY_GAP {
                    ambiguous.push(g);
                }
                order[0]
            }
        };
        prev = Some(d.vectors.column(p).into_owned());
        indices.push(p);
        out.push(d.with_primary(p));
    }
    let amp_agrees = out.iter().map(|d| argmax_amp(&d.amps) == d.primary).collect();
    PrimaryTrack { indices, ambiguous, amp_agrees, decomps: out }
}

/// Uniform k_hat grid of `points` values in (0, pi], as kh values.
pub fn default_k_grid(n: usize, points: usize) -> Vec<f64> {
    let np = n as f64 + 1.0;
    (1..=points).map(|i| std::f64::consts::PI * i as f64 / points as f64 * np).collect()
}

/// Seeded grid for primary tracking: kh = 1e-4 followed by the k_hat grid.
pub fn tracking_grid(n: usize, points: usize) -> Vec<f64> {
    let mut g = vec![1e-4];
    g.extend(default_k_grid(n, points));
    g
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k_hat: f64,
    pub kh: f64,
    pub mode_index: usize,
    pub re_omega: f64,
    pub im_omega: f64,
    pub re_omega_hat: f64,
    pub im_omega_hat: f64,
    pub is_primary: bool,
    pub amp_abs: f64,
    pub secondary_error: f64,
    pub jump_abs: f64,
}

#[derive(Debug, Clone)]
pub struct SweepFailure {
    pub kh: f64,
    pub error: VnError,
}

#[derive(Debug, Clone)]
pub struct Sweep {
    pub rows: Vec<SweepRow>,
    pub failures: Vec<SweepFailure>,
    pub ambiguous_kh: Vec<f64>,
    pub amp_disagreements: usize,
}

impl Sweep {
    pub fn primary_rows(&self) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(|r| r.is_primary)
    }
}

/// All modes at every grid point. Primary continuation restarts after a
/// failed grid point.
pub fn dispersion_dissipation_sweep(cfg: &VnConfig, k_grid: &[f64]) -> Result<Sweep, VnError> {
    let ctx = VnContext::new(cfg)?;
    if k_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(VnError::GridOrder);
    }
    let results = decompose_grid(&ctx, k_grid);
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let mut ambiguous_kh = Vec::new();
    let mut amp_disagreements = 0;
    let mut run: Vec<ModeDecomposition> = Vec::new();
    let mut flush = |run: &mut Vec<ModeDecomposition>, rows: &mut Vec<SweepRow>| {
        if run.is_empty() {
            return;
        }
        let t = continue_primary(std::mem::take(run));
        ambiguous_kh.extend(t.ambiguous.iter().map(|&g| t.decomps[g].kh));
        amp_disagreements += t.amp_agrees.iter().filter(|&&a| !a).count();
        for d in &t.decomps {
            rows.extend(sweep_rows(d));
        }
    };
    for (r, &kh) in results.into_iter().zip(k_grid) {
        match r {
            Ok(d) => run.push(d),
            Err(error) => {
                flush(&mut run, &mut rows);
                failures.push(SweepFailure { kh, error });
            }
        }
    }
    flush(&mut run, &mut rows);
    Ok(Sweep { rows, failures, ambiguous_kh, amp_disagreements })
}

fn sweep_rows(d: &ModeDecomposition) -> Vec<SweepRow> {
    let sec = secondary_mode_error(d);
    let jump = interface_jump(d).norm();
    (0..d.modes())
        .map(|m| {
            let wh = d.omega_hat(m);
            SweepRow {
                k_hat: d.k_hat(),
                kh: d.kh,
                mode_index: m,
                re_omega: d.omega[m].re,
                im_omega: d.omega[m].im,
                re_omega_hat: wh.re,
                im_omega_hat: wh.im,
                is_primary: m == d.primary,
                amp_abs: d.amps[m].norm(),
                secondary_error: sec,
                jump_abs: jump,
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Mode sets versus lambda

/// Relative gap below which two mode-set maxima are clustered together.
pub const GROUP_GAP: f64 = 0.10;
/// Maxima below this are treated as zero dissipation.
pub const ZERO_DISSIPATION: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeGroup {
    /// lengths of the monodromy cycles clustered into this group
    pub cycles: Vec<usize>,
    pub modes: usize,
    /// max over the period and over member branches of |Im omega_hat|
    pub max_dissipation: f64,
    pub contains_primary: bool,
    /// false for the lone dissipated mode that grows with lambda
    pub bounded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaPoint {
    pub lambda: f64,
    pub groups: Vec<ModeGroup>,
    /// smallest eigenvector overlap accepted while following branches
    pub min_overlap: f64,
    pub ambiguous: bool,
}

impl LambdaPoint {
    pub fn largest_bounded(&self) -> Option<f64> {
        self.groups.iter().filter(|g| g.bounded).map(|g| g.max_dissipation).reduce(f64::max)
    }

    pub fn primary_group(&self) -> Option<&ModeGroup> {
        self.groups.iter().find(|g| g.contains_primary)
    }

    fn is_degenerate(&self) -> bool {
        self.groups.iter().all(|g| g.max_dissipation < ZERO_DISSIPATION)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Merge,
    Split,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BifurcationEvent {
    pub kind: EventKind,
    /// midpoint of the bracketing lambda interval
    pub lambda: f64,
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    pub groups_before: usize,
    pub groups_after: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaScan {
    pub points: Vec<LambdaPoint>,
    pub events: Vec<BifurcationEvent>,
}

/// Overlap below which a branch continuation step is flagged.
pub const MIN_TRUSTED_OVERLAP: f64 = 0.5;

/// Evenly spaced kh samples over one period [kh0, kh0 + 2 pi].
pub fn period_grid(kh0: f64, intervals: usize) -> Vec<f64> {
    let tau = 2.0 * std::f64::consts::PI;
    (0..=intervals).map(|i| kh0 + tau * i as f64 / intervals as f64).collect()
}

/// Mode sets for each lambda. Eigen-branches are followed across one full
/// period of kh by eigenvector overlap; since M(kh + 2 pi) = M(kh) the
/// branches end on a permutation of their starting modes. The cycles of
/// that permutation are the sets of modes that exchange identity along
/// the wave-number axis. Cycles whose maxima differ by less than
/// GROUP_GAP are clustered.
pub fn max_dissipation_vs_lambda(
    cfg: &VnConfig,
    lambda_grid: &[f64],
    k_grid: &[f64],
) -> Result<LambdaScan, VnError> {
    if lambda_grid.iter().any(|l| !(*l >= 0.0)) || lambda_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(VnError::LambdaGrid);
    }
    let span = k_grid.last().copied().unwrap_or(0.0) - k_grid.first().copied().unwrap_or(0.0);
    if k_grid.len() < 3 || (span - 2.0 * std::f64::consts::PI).abs() > 1e-9 {
        return Err(VnError::PeriodGrid);
    }
    if k_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(VnError::GridOrder);
    }
    cfg.validate()?;
    let points = lambda_grid
        .par_iter()
        .map(|&lambda| {
            let c = VnConfig { lambda, ..cfg.clone() };
            mode_sets(&VnContext::new(&c)?, k_grid).map(|p| LambdaPoint { lambda, ..p })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let events = detect_events(&points);
    Ok(LambdaScan { points, events })
}

fn mode_sets(ctx: &VnContext, k_grid: &[f64]) -> Result<LambdaPoint, VnError> {
    let np = ctx.basis.np();
    let scale = ctx.cfg.h / (ctx.cfg.n as f64 + 1.0);
    let mut min_overlap: f64 = 1.0;
    // branch b currently sits on column slot[b] of the latest decomposition
    let mut branch_max = vec![0.0f64; np];
    let mut start: Option<ModeDecomposition> = None;
    let mut prev_vecs: Option<CMat> = None;
    let mut primary = 0;
    for &kh in k_grid {
        let d = ctx.decompose(&ctx.operator(kh))?;
        let (vecs, omega) = match &prev_vecs {
            None => {
                primary = argmin_abs(&d.omega);
                (d.vectors.clone(), d.omega.clone())
            }
            Some(pv) => {
                let score = overlaps(pv, &d.vectors);
                let perm = linalg::assign_max(&score);
                for (b, &c) in perm.iter().enumerate() {
                    min_overlap = min_overlap.min(score[(b, c)]);
                }
                let vecs = CMat::from_fn(np, np, |i, b| d.vectors[(i, perm[b])]);
                let omega = perm.iter().map(|&c| d.omega[c]).collect();
                (vecs, omega)
            }
        };
        for (b, w) in omega.iter().enumerate() {
            branch_max[b] = branch_max[b].max((w * scale).im.abs());
        }
        if start.is_none() {
            start = Some(d);
        }
        prev_vecs = Some(vecs);
    }
    let start = start.expect("non-empty grid");
    let end = prev_vecs.expect("non-empty grid");
    // branch b ends on the start mode sigma[b]
    let score = overlaps(&end, &start.vectors);
    let sigma = linalg::assign_max(&score);
    for (b, &c) in sigma.iter().enumerate() {
        min_overlap = min_overlap.min(score[(b, c)]);
    }
    let mut seen = vec![false; np];
    let mut cycles: Vec<(Vec<usize>, f64)> = Vec::new();
    for s in 0..np {
        if seen[s] {
            continue;
        }
        let mut cyc = vec![s];
        seen[s] = true;
        let mut x = sigma[s];
        while x != s {
            seen[x] = true;
            cyc.push(x);
            x = sigma[x];
        }
        let m = cyc.iter().map(|&b| branch_max[b]).fold(0.0, f64::max);
        cycles.push((cyc, m));
    }
    cycles.sort_by(|a, b| a.1.total_cmp(&b.1));
    let mut clusters: Vec<Vec<(Vec<usize>, f64)>> = Vec::new();
    for c in cycles {
        let joins = clusters.last().map_or(false, |g| {
            let prev = g.last().unwrap().1;
            c.1 < ZERO_DISSIPATION || c.1 - prev <= GROUP_GAP * c.1
        });
        if joins {
            clusters.last_mut().unwrap().push(c);
        } else {
            clusters.push(vec![c]);
        }
    }
    let groups = clusters
        .into_iter()
        .map(|g| {
            let modes: usize = g.iter().map(|c| c.0.len()).sum();
            let max_dissipation = g.iter().map(|c| c.1).fold(0.0, f64::max);
            ModeGroup {
                cycles: g.iter().map(|c| c.0.len()).collect(),
                modes,
                max_dissipation,
                contains_primary: g.iter().any(|c| c.0.contains(&primary)),
                bounded: !(modes == 1 && max_dissipation >= ZERO_DISSIPATION),
            }
        })
        .collect();
    Ok(LambdaPoint {
        lambda: ctx.cfg.lambda,
        groups,
        min_overlap,
        ambiguous: min_overlap < MIN_TRUSTED_OVERLAP,
    })
}

fn overlaps(a: &CMat, b: &CMat) -> DMatrix<f64> {
    let n = a.ncols();
    DMatrix::from_fn(n, n, |i, j| a.column(i).dotc(&b.column(j)).norm())
}

fn detect_events(points: &[LambdaPoint]) -> Vec<BifurcationEvent> {
    points
        .windows(2)
        .filter(|w| !w[0].is_degenerate() && !w[1].is_degenerate())
        .filter_map(|w| {
            let (a, b) = (w[0].groups.len(), w[1].groups.len());
            let kind = match b.cmp(&a) {
                std::cmp::Ordering::Less => EventKind::Merge,
                std::cmp::Ordering::Greater => EventKind::Split,
                std::cmp::Ordering::Equal => return None,
            };
            Some(BifurcationEvent {
                kind,
                lambda: 0.5 * (w[0].lambda + w[1].lambda),
                lambda_lo: w[0].lambda,
                lambda_hi: w[1].lambda,
                groups_before: a,
                groups_after: b,
            })
        })
        .collect()
}
