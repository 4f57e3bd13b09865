//! Taylor-Green initial data and the reported observables: kinetic energy,
//! its decay rate, enstrophy, numerical viscosity and shell spectra.

use crate::basis::NodalBasis;
use crate::dgsem3d::{ConservedField, Reduction, Solver, NVAR};
use crate::physics3d::{ConsState, GasModel};
use rayon::prelude::*;
use rustfft::{num_complex::Complex64, FftPlanner};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("need at least 3 samples, got {0}")]
    TooFewSamples(usize),
    #[error("sample times must be strictly increasing")]
    TimeOrder,
    #[error("spectrum grid {got} is below the nodal resolution {min}")]
    GridTooCoarse { got: usize, min: usize },
}

pub const ZETA_THRESHOLD: f64 = 1e-12;

/// Taylor-Green vortex with rho0 = V0 = 1.
pub fn tgv_initial_condition(x: [f64; 3], gas: &GasModel) -> ConsState {
    let (sx, cx) = x[0].sin_cos();
    let (sy, cy) = x[1].sin_cos();
    let cz = x[2].cos();
    let v = [sx * cy * cz, -cx * sy * cz, 0.0];
    let p = gas.p0() + ((2.0 * x[0]).cos() + (2.0 * x[1]).cos()) * ((2.0 * x[2]).cos() + 2.0) / 16.0;
    ConsState::from_primitive(1.0, v, p, gas)
}

fn reduce(parts: Vec<f64>, mode: Reduction) -> f64 {
    match mode {
        Reduction::Deterministic => parts.iter().sum(),
        Reduction::Unordered => parts.into_par_iter().sum(),
    }
}

fn element_quadrature<F>(solver: &Solver, u: &ConservedField, f: F) -> f64
where
    F: Fn(usize) -> Vec<f64> + Sync,
{
    let np = solver.basis.np();
    let w = &solver.basis.weights;
    let parts: Vec<f64> = (0..solver.mesh.elements())
        .into_par_iter()
        .map(|elem| {
            let vals = f(elem);
            let mut s = 0.0;
            for (node, v) in vals.iter().enumerate() {
                s += w[node % np] * w[(node / np) % np] * w[node / (np * np)] * v;
            }
            s
        })
        .collect();
    let _ = u;
    // sum_elements (h/2)^3 sum_nodes ... divided by |Omega| = (2 pi)^3
    let jac = (solver.h() / 2.0).powi(3);
    reduce(parts, solver.cfg.reduction) * jac / (2.0 * PI).powi(3)
}

/// (1/|Omega|) int 1/2 rho |v|^2 by Gauss-Lobatto quadrature.
pub fn kinetic_energy(solver: &Solver, u: &ConservedField) -> f64 {
    let npe = solver.npe();
    element_quadrature(solver, u, |elem| {
        (0..npe)
            .map(|node| {
                let q = u.state(elem, node);
                0.5 * (q[1] * q[1] + q[2] * q[2] + q[3] * q[3]) / q[0]
            })
            .collect()
    })
}

/// Velocity curl at every node of one element from element-internal
/// derivatives.
pub fn element_vorticity(solver: &Solver, u: &ConservedField, elem: usize) -> Vec<[f64; 3]> {
    let g = velocity_gradient_local(&solver.basis, solver.h(), u, elem);
    g.iter().map(|gv| [gv[2][1] - gv[1][2], gv[0][2] - gv[2][0], gv[1][0] - gv[0][1]]).collect()
}

/// gv[node][i][j] = d v_i / d x_j inside one element.
pub fn velocity_gradient_local(basis: &NodalBasis, h: f64, u: &ConservedField, elem: usize) -> Vec<[[f64; 3]; 3]> {
    let np = basis.np();
    let npe = np * np * np;
    let vel: Vec<[f64; 3]> = (0..npe)
        .map(|node| {
            let q = u.state(elem, node);
            [q[1] / q[0], q[2] / q[0], q[3] / q[0]]
        })
        .collect();
    let strides = [1, np, np * np];
    let mut out = vec![[[0.0; 3]; 3]; npe];
    for node in 0..npe {
        for d in 0..3 {
            let s = strides[d];
            let i = (node / s) % np;
            let first = node - i * s;
            for m in 0..np {
                let dm = basis.d[(i, m)] * 2.0 / h;
                let v = vel[first + m * s];
                for c in 0..3 {
                    out[node][c][d] += dm * v[c];
                }
            }
        }
    }
    out
}

/// (1 / 2|Omega|) int |curl v|^2.
pub fn enstrophy(solver: &Solver, u: &ConservedField) -> f64 {
    element_quadrature(solver, u, |elem| {
        element_vorticity(solver, u, elem)
            .iter()
            .map(|w| 0.5 * (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]))
            .collect()
    })
}

/// epsilon = -dK/dt: centred differences inside, one-sided (second order)
/// at the ends.
pub fn kinetic_energy_rate(times: &[f64], k: &[f64]) -> Result<Vec<f64>, DiagnosticsError> {
    let n = times.len();
    if n < 3 || k.len() != n {
        return Err(DiagnosticsError::TooFewSamples(n.min(k.len())));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(DiagnosticsError::TimeOrder);
    }
    let mut eps = vec![0.0; n];
    for i in 1..n - 1 {
        // non-uniform three-point derivative
        let (h0, h1) = (times[i] - times[i - 1], times[i + 1] - times[i]);
        let d = (h0 * h0 * (k[i + 1] - k[i]) + h1 * h1 * (k[i] - k[i - 1])) / (h0 * h1 * (h0 + h1));
        eps[i] = -d;
    }
    eps[0] = -one_sided(times[0], times[1], times[2], k[0], k[1], k[2]);
    eps[n - 1] = -one_sided(times[n - 1], times[n - 2], times[n - 3], k[n - 1], k[n - 2], k[n - 3]);
    Ok(eps)
}

/// Derivative at t0 of the quadratic through three samples.
fn one_sided(t0: f64, t1: f64, t2: f64, k0: f64, k1: f64, k2: f64) -> f64 {
    let (a, b) = (t1 - t0, t2 - t0);
    (k1 - k0) * b / (a * (b - a)) - (k2 - k0) * a / (b * (b - a))
}

/// mu_num = eps / (2 zeta); `None` while zeta is below the threshold.
pub fn numerical_viscosity(eps: f64, zeta: f64) -> Option<f64> {
    if zeta < ZETA_THRESHOLD {
        None
    } else {
        Some(eps / (2.0 * zeta))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsSeries {
    pub times: Vec<f64>,
    pub kinetic_energy: Vec<f64>,
    pub enstrophy: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub k: f64,
    pub eps: Option<f64>,
    pub zeta: f64,
    pub mu_num: Option<f64>,
}

impl DiagnosticsSeries {
    pub fn push(&mut self, t: f64, k: f64, zeta: f64) {
        self.times.push(t);
        self.kinetic_energy.push(k);
        self.enstrophy.push(zeta);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn eps(&self) -> Result<Vec<f64>, DiagnosticsError> {
        kinetic_energy_rate(&self.times, &self.kinetic_energy)
    }

    pub fn mu_num(&self) -> Result<Vec<Option<f64>>, DiagnosticsError> {
        Ok(self.eps()?.iter().zip(&self.enstrophy).map(|(&e, &z)| numerical_viscosity(e, z)).collect())
    }

    /// Full table; eps and mu_num are empty when fewer than 3 samples exist.
    pub fn rows(&self) -> Vec<DiagnosticsRow> {
        let eps = self.eps().ok();
        (0..self.len())
            .map(|i| {
                let e = eps.as_ref().map(|v| v[i]);
                DiagnosticsRow {
                    t: self.times[i],
                    k: self.kinetic_energy[i],
                    eps: e,
                    zeta: self.enstrophy[i],
                    mu_num: e.and_then(|e| numerical_viscosity(e, self.enstrophy[i])),
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergySpectrum {
    pub time: f64,
    pub grid: usize,
    /// E(k) for shells k = 0..=k_max; shell 0 holds the mean flow
    pub energy: Vec<f64>,
    /// mean of 1/2 |v|^2 over the sampling grid
    pub grid_energy: f64,
}

impl EnergySpectrum {
    pub fn k_max(&self) -> usize {
        self.energy.len() - 1
    }

    pub fn total(&self) -> f64 {
        self.energy.iter().sum()
    }

    pub fn peak_shell(&self) -> usize {
        let mut best = 1.min(self.k_max());
        for k in 1..=self.k_max() {
            if self.energy[k] > self.energy[best] {
                best = k;
            }
        }
        best
    }
}

pub fn default_grid(solver: &Solver) -> usize {
    2 * solver.cfg.e * solver.basis.np()
}

/// Shell-binned spectrum of the velocity sampled on a uniform cell-centred
/// grid of `grid_res`^3 points by exact tensor-product Lagrange evaluation.
pub fn energy_spectrum(
    solver: &Solver,
    u: &ConservedField,
    grid_res: usize,
    time: f64,
) -> Result<EnergySpectrum, DiagnosticsError> {
    let min = solver.cfg.e * solver.basis.np();
    if grid_res < min {
        return Err(DiagnosticsError::GridTooCoarse { got: grid_res, min });
    }
    let n = grid_res;
    let e = solver.cfg.e;
    let np = solver.basis.np();
    let h = solver.h();
    // per grid coordinate: element index and Lagrange weights
    let axis: Vec<(usize, Vec<f64>)> = (0..n)
        .map(|j| {
            let x = (j as f64 + 0.5) * 2.0 * PI / n as f64;
            let el = ((x / h).floor() as usize).min(e - 1);
            let xi = 2.0 * (x - el as f64 * h) / h - 1.0;
            (el, solver.basis.interpolation_weights(xi))
        })
        .collect();
    // velocity on the grid, component-major, index i + n (j + n k)
    let mut vel: Vec<Vec<Complex64>> = vec![vec![Complex64::new(0.0, 0.0); n * n * n]; 3];
    let slabs: Vec<Vec<[f64; 3]>> = (0..n)
        .into_par_iter()
        .map(|k| {
            let mut slab = vec![[0.0; 3]; n * n];
            let (ek, wk) = &axis[k];
            for j in 0..n {
                let (ej, wj) = &axis[j];
                for i in 0..n {
                    let (ei, wi) = &axis[i];
                    let elem = solver.mesh.index([*ei, *ej, *ek]);
                    let blk = u.element(elem);
                    let mut v = [0.0; 3];
                    for c in 0..np {
                        for b in 0..np {
                            let wbc = wj[b] * wk[c];
                            if wbc == 0.0 {
                                continue;
                            }
                            for a in 0..np {
                                let node = a + np * (b + np * c);
                                let q = &blk[node * NVAR..node * NVAR + NVAR];
                                let wt = wi[a] * wbc;
                                v[0] += wt * q[1] / q[0];
                                v[1] += wt * q[2] / q[0];
                                v[2] += wt * q[3] / q[0];
                            }
                        }
                    }
                    slab[i + n * j] = v;
                }
            }
            slab
        })
        .collect();
    let mut grid_energy_parts = Vec::with_capacity(n);
    for (k, slab) in slabs.iter().enumerate() {
        let mut s = 0.0;
        for (ij, v) in slab.iter().enumerate() {
            for c in 0..3 {
                vel[c][ij + n * n * k] = Complex64::new(v[c], 0.0);
            }
            s += 0.5 * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
        }
        grid_energy_parts.push(s);
    }
    let grid_energy = grid_energy_parts.iter().sum::<f64>() / (n * n * n) as f64;
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n);
    for comp in vel.iter_mut() {
        fft3(comp, n, fft.as_ref());
    }
    let kmax = ((3f64).sqrt() * n as f64 / 2.0).ceil() as usize;
    let mut energy = vec![0.0; kmax + 1];
    let norm = 1.0 / (n * n * n) as f64;
    let wave = |i: usize| if i < (n + 1) / 2 { i as f64 } else { i as f64 - n as f64 };
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                let kk = (wave(i).powi(2) + wave(j).powi(2) + wave(k).powi(2)).sqrt();
                let shell = shell_index(kk);
                let idx = i + n * (j + n * k);
                let e2: f64 = vel.iter().map(|c| (c[idx] * norm).norm_sqr()).sum();
                energy[shell.min(kmax)] += 0.5 * e2;
            }
        }
    }
    Ok(EnergySpectrum { time, grid: n, energy, grid_energy })
}

/// Integer shell k with k - 1/2 < |kappa| <= k + 1/2.
pub fn shell_index(kappa: f64) -> usize {
    let s = (kappa - 0.5).ceil();
    if s <= 0.0 {
        0
    } else {
        s as usize
    }
}

fn fft3(data: &mut [Complex64], n: usize, fft: &dyn rustfft::Fft<f64>) {
    // x lines are contiguous
    for line in data.chunks_mut(n) {
        fft.process(line);
    }
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                buf[j] = data[i + n * (j + n * k)];
            }
            fft.process(&mut buf);
            for j in 0..n {
                data[i + n * (j + n * k)] = buf[j];
            }
        }
    }
    for j in 0..n {
        for i in 0..n {
            for k in 0..n {
                buf[k] = data[i + n * (j + n * k)];
            }
            fft.process(&mut buf);
            for k in 0..n {
                data[i + n * (j + n * k)] = buf[k];
            }
        }
    }
}
