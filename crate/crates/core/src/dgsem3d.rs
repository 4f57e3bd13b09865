//! Nodal DGSEM for the compressible Navier-Stokes equations on the periodic
//! box [-pi, pi]^3 with E^3 hexahedra and Gauss-Lobatto nodes.
//!
//! Inviscid part: split-form flux differencing with the Pirozzoli two-point
//! flux in the volume and the lambda-scaled Roe flux at faces. Viscous part:
//! BR1 on velocity and temperature, both stages with interface averages.
//! Time integration: Williamson low-storage RK3.

use crate::basis::{svv_kernel, BasisError, KernelSpec, NodalBasis, NodeFamily};
use crate::physics3d::{
    cons_to_prim, euler_flux_dir, filter_width, pirozzoli, roe_dissipation_prim, smagorinsky_viscosity,
    Cons, GasModel, PhysicsError, Primitive, VelGrad,
};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const NVAR: usize = 5;
/// gradient variables: v1, v2, v3, T
pub const NGRAD: usize = 4;
pub const C_VISC: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error(transparent)]
    Physics(#[from] PhysicsError),
    #[error("non-physical state in element {element} node {node}: rho = {rho:.6e}, p = {p:.6e}")]
    Positivity { element: usize, node: usize, rho: f64, p: f64 },
    #[error("field layout does not match the solver (expected E={e}, N={n})")]
    Layout { e: usize, n: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mesh {
    pub e: usize,
}

impl Mesh {
    pub fn new(e: usize) -> Result<Self, SolverError> {
        if e == 0 {
            return Err(SolverError::InvalidConfig("need at least one element per direction".into()));
        }
        Ok(Self { e })
    }

    pub fn h(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.e as f64
    }

    pub fn elements(&self) -> usize {
        self.e * self.e * self.e
    }

    pub fn element_volume(&self) -> f64 {
        self.h().powi(3)
    }

    pub fn coords(&self, elem: usize) -> [usize; 3] {
        [elem % self.e, (elem / self.e) % self.e, elem / (self.e * self.e)]
    }

    pub fn index(&self, c: [usize; 3]) -> usize {
        c[0] + self.e * (c[1] + self.e * c[2])
    }

    /// Periodic neighbour in direction d, `up` = +1 side.
    pub fn neighbor(&self, elem: usize, d: usize, up: bool) -> usize {
        let mut c = self.coords(elem);
        c[d] = if up { (c[d] + 1) % self.e } else { (c[d] + self.e - 1) % self.e };
        self.index(c)
    }
}

/// Element-blocked nodal storage: data[((elem * np^3) + node) * 5 + var],
/// node = i + np (j + np k) with i along x.
#[derive(Debug, Clone, PartialEq)]
pub struct ConservedField {
    pub mesh: Mesh,
    pub n: usize,
    pub data: Vec<f64>,
}

impl ConservedField {
    pub fn np(&self) -> usize {
        self.n + 1
    }

    pub fn nodes_per_element(&self) -> usize {
        self.np().pow(3)
    }

    pub fn from_fn(mesh: Mesh, basis: &NodalBasis, f: impl Fn([f64; 3]) -> Cons) -> Self {
        let np = basis.np();
        let npe = np * np * np;
        let mut data = vec![0.0; mesh.elements() * npe * NVAR];
        for elem in 0..mesh.elements() {
            for node in 0..npe {
                let x = node_position(&mesh, basis, elem, node);
                let q = f(x);
                let o = (elem * npe + node) * NVAR;
                data[o..o + NVAR].copy_from_slice(&q);
            }
        }
        Self { mesh, n: basis.n, data }
    }

    pub fn state(&self, elem: usize, node: usize) -> Cons {
        let o = (elem * self.nodes_per_element() + node) * NVAR;
        let mut q = [0.0; NVAR];
        q.copy_from_slice(&self.data[o..o + NVAR]);
        q
    }

    pub fn element(&self, elem: usize) -> &[f64] {
        let s = self.nodes_per_element() * NVAR;
        &self.data[elem * s..(elem + 1) * s]
    }
}

pub fn node_position(mesh: &Mesh, basis: &NodalBasis, elem: usize, node: usize) -> [f64; 3] {
    let np = basis.np();
    let c = mesh.coords(elem);
    let idx = [node % np, (node / np) % np, node / (np * np)];
    let h = mesh.h();
    let mut x = [0.0; 3];
    for d in 0..3 {
        x[d] = -std::f64::consts::PI + h * (c[d] as f64 + 0.5 * (1.0 + basis.nodes[idx[d]]));
    }
    x
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ViscosityModel {
    None,
    Constant { mu: f64 },
    Smagorinsky,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SvvViscosity {
    Constant { mu: f64 },
    Smagorinsky,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvvConfig {
    pub kernel: KernelSpec,
    pub viscosity: SvvViscosity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reduction {
    /// fixed-order sums, bit-reproducible for any thread count
    Deterministic,
    Unordered,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub n: usize,
    pub e: usize,
    pub gas: GasModel,
    pub lambda: f64,
    pub viscosity: ViscosityModel,
    pub svv: Option<SvvConfig>,
    pub cfl: f64,
    pub t_end: f64,
    pub snapshots: Vec<f64>,
    pub diag_interval: f64,
    /// Harten entropy-fix threshold (fraction of c); off by default
    pub entropy_fix: Option<f64>,
    pub reduction: Reduction,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            n: 3,
            e: 4,
            gas: GasModel::default(),
            lambda: 1.0,
            viscosity: ViscosityModel::None,
            svv: None,
            cfl: 0.4,
            t_end: 1.0,
            snapshots: Vec::new(),
            diag_interval: 0.05,
            entropy_fix: None,
            reduction: Reduction::Deterministic,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |m: String| Err(SolverError::InvalidConfig(m));
        self.gas.validate()?;
        if self.n < 1 || self.n > crate::basis::MAX_DEGREE {
            return bad(format!("N must be in 1..=20, got {}", self.n));
        }
        if self.e < 1 {
            return bad("E must be >= 1".into());
        }
        if !(self.lambda >= 0.0) {
            return bad(format!("lambda must be >= 0, got {}", self.lambda));
        }
        if !(self.cfl > 0.0) {
            return bad(format!("CFL must be > 0, got {}", self.cfl));
        }
        if !(self.t_end >= 0.0) {
            return bad("t_end must be >= 0".into());
        }
        if !(self.diag_interval > 0.0) {
            return bad("diagnostics interval must be > 0".into());
        }
        if let ViscosityModel::Constant { mu } = self.viscosity {
            if !(mu >= 0.0) {
                return bad(format!("mu must be >= 0, got {mu}"));
            }
        }
        if let Some(s) = &self.svv {
            match s.viscosity {
                SvvViscosity::Constant { mu } if !(mu >= 0.0) => return bad(format!("mu_SVV must be >= 0, got {mu}")),
                SvvViscosity::Smagorinsky if self.viscosity != ViscosityModel::None => {
                    return bad("Smagorinsky-SVV requires viscosity model 'none'".into())
                }
                _ => {}
            }
        }
        if self.snapshots.iter().any(|&t| !(t >= 0.0 && t <= self.t_end)) {
            return bad("snapshot times must lie in [0, t_end]".into());
        }
        Ok(())
    }

    pub fn has_viscous_terms(&self) -> bool {
        self.viscosity != ViscosityModel::None || self.svv.is_some()
    }
}

/// Precomputed operators and scratch-free residual evaluation.
#[derive(Debug, Clone)]
pub struct Solver {
    pub cfg: SolverConfig,
    pub mesh: Mesh,
    pub basis: NodalBasis,
    np: usize,
    /// D row-major: d[i * np + m] = l_m'(x_i)
    d: Vec<f64>,
    inv_w: Vec<f64>,
    /// tensor-product SVV filter, row-major np x np
    filter: Option<Vec<f64>>,
    delta: f64,
}

/// BR1 gradients: grad[(elem * npe + node) * 12 + 3 * g + dir]
#[derive(Debug, Clone)]
pub struct Gradients {
    pub data: Vec<f64>,
}

impl Gradients {
    pub fn at(&self, npe: usize, elem: usize, node: usize) -> ([[f64; 3]; 3], [f64; 3]) {
        let o = (elem * npe + node) * NGRAD * 3;
        let g = &self.data[o..o + NGRAD * 3];
        (
            [[g[0], g[1], g[2]], [g[3], g[4], g[5]], [g[6], g[7], g[8]]],
            [g[9], g[10], g[11]],
        )
    }
}

impl Solver {
    pub fn new(cfg: &SolverConfig) -> Result<Self, SolverError> {
        cfg.validate()?;
        let mesh = Mesh::new(cfg.e)?;
        let basis = NodalBasis::new(cfg.n as i64, NodeFamily::GaussLobatto)?;
        let np = basis.np();
        let mut d = vec![0.0; np * np];
        for i in 0..np {
            for m in 0..np {
                d[i * np + m] = basis.d[(i, m)];
            }
        }
        let inv_w = basis.weights.iter().map(|w| 1.0 / w).collect();
        let filter = match &cfg.svv {
            Some(s) => {
                let f = basis.filter_matrix(&svv_kernel(cfg.n, s.kernel)?)?;
                Some(row_major(&f))
            }
            None => None,
        };
        let delta = filter_width(mesh.element_volume(), cfg.n);
        Ok(Self { cfg: cfg.clone(), mesh, basis, np, d, inv_w, filter, delta })
    }

    pub fn npe(&self) -> usize {
        self.np * self.np * self.np
    }

    pub fn h(&self) -> f64 {
        self.mesh.h()
    }

    pub fn filter_width(&self) -> f64 {
        self.delta
    }

    pub fn new_field(&self, f: impl Fn([f64; 3]) -> Cons) -> ConservedField {
        ConservedField::from_fn(self.mesh, &self.basis, f)
    }

    fn check_layout(&self, u: &ConservedField) -> Result<(), SolverError> {
        if u.mesh != self.mesh || u.n != self.cfg.n || u.data.len() != self.mesh.elements() * self.npe() * NVAR {
            return Err(SolverError::Layout { e: self.cfg.e, n: self.cfg.n });
        }
        Ok(())
    }

    #[inline]
    fn stride(&self, d: usize) -> usize {
        match d {
            0 => 1,
            1 => self.np,
            _ => self.np * self.np,
        }
    }

    /// Node index along direction d through the line of `node`, at position t.
    #[inline]
    fn line_node(&self, node: usize, d: usize, t: usize) -> usize {
        let s = self.stride(d);
        let pos = (node / s) % self.np;
        node - pos * s + t * s
    }

    #[inline]
    fn line_pos(&self, node: usize, d: usize) -> usize {
        (node / self.stride(d)) % self.np
    }

    fn primitives(&self, u: &ConservedField) -> Result<Vec<Primitive>, SolverError> {
        let npe = self.npe();
        let gamma = self.cfg.gas.gamma;
        let w: Vec<Primitive> = u
            .data
            .par_chunks(NVAR)
            .map(|q| cons_to_prim(&[q[0], q[1], q[2], q[3], q[4]], gamma))
            .collect();
        if let Some((k, bad)) = w.iter().enumerate().find(|(_, p)| !(p.rho > 0.0) || !(p.p > 0.0)) {
            return Err(SolverError::Positivity { element: k / npe, node: k % npe, rho: bad.rho, p: bad.p });
        }
        Ok(w)
    }

    /// BR1 gradients of (v, T) in strong form with averaged interface values.
    pub fn compute_gradients_br1(&self, u: &ConservedField) -> Result<Gradients, SolverError> {
        self.check_layout(u)?;
        let w = self.primitives(u)?;
        Ok(self.gradients_from_prim(&w))
    }

    fn gradients_from_prim(&self, w: &[Primitive]) -> Gradients {
        let npe = self.npe();
        let np = self.np;
        let two_h = 2.0 / self.h();
        let gvar = |p: &Primitive| [p.v[0], p.v[1], p.v[2], p.p / p.rho];
        let mut data = vec![0.0; self.mesh.elements() * npe * NGRAD * 3];
        data.par_chunks_mut(npe * NGRAD * 3).enumerate().for_each(|(elem, out)| {
            let we = &w[elem * npe..(elem + 1) * npe];
            for d in 0..3 {
                let up = self.mesh.neighbor(elem, d, true);
                let dn = self.mesh.neighbor(elem, d, false);
                for node in 0..npe {
                    let i = self.line_pos(node, d);
                    let mut acc = [0.0; NGRAD];
                    for m in 0..np {
                        let g = gvar(&we[self.line_node(node, d, m)]);
                        let dim = self.d[i * np + m];
                        for v in 0..NGRAD {
                            acc[v] += dim * g[v];
                        }
                    }
                    if i == np - 1 {
                        let own = gvar(&we[node]);
                        let other = gvar(&w[up * npe + self.line_node(node, d, 0)]);
                        for v in 0..NGRAD {
                            acc[v] += self.inv_w[i] * (0.5 * (own[v] + other[v]) - own[v]);
                        }
                    }
                    if i == 0 {
                        let own = gvar(&we[node]);
                        let other = gvar(&w[dn * npe + self.line_node(node, d, np - 1)]);
                        for v in 0..NGRAD {
                            acc[v] -= self.inv_w[i] * (0.5 * (own[v] + other[v]) - own[v]);
                        }
                    }
                    for v in 0..NGRAD {
                        out[node * NGRAD * 3 + 3 * v + d] = two_h * acc[v];
                    }
                }
            }
        });
        Gradients { data }
    }

    /// Tensor-product modal filter applied to every gradient component.
    pub fn apply_svv_to_gradients(&self, g: &Gradients) -> Gradients {
        match &self.filter {
            None => g.clone(),
            Some(f) => self.filter_gradients(g, f),
        }
    }

    fn filter_gradients(&self, g: &Gradients, f: &[f64]) -> Gradients {
        let npe = self.npe();
        let np = self.np;
        let nc = NGRAD * 3;
        let mut data = g.data.clone();
        data.par_chunks_mut(npe * nc).for_each(|blk| {
            let mut tmp = vec![0.0; npe * nc];
            for d in 0..3 {
                for node in 0..npe {
                    let i = self.line_pos(node, d);
                    let o = node * nc;
                    tmp[o..o + nc].iter_mut().for_each(|x| *x = 0.0);
                    for m in 0..np {
                        let fim = f[i * np + m];
                        if fim == 0.0 {
                            continue;
                        }
                        let src = self.line_node(node, d, m) * nc;
                        for c in 0..nc {
                            tmp[o + c] += fim * blk[src + c];
                        }
                    }
                }
                blk.copy_from_slice(&tmp);
            }
        });
        Gradients { data }
    }

    /// Nodal viscous flux (5x3 per node, momentum and energy rows only are
    /// non-zero) and the nodal eddy/SVV viscosity.
    fn viscous_fluxes(&self, w: &[Primitive], g: &Gradients) -> Vec<f64> {
        let npe = self.npe();
        let gas = &self.cfg.gas;
        let filtered = self.filter.as_ref().map(|f| self.filter_gradients(g, f));
        let mu_mol = match self.cfg.viscosity {
            ViscosityModel::Constant { mu } => mu,
            _ => 0.0,
        };
        let smag = self.cfg.viscosity == ViscosityModel::Smagorinsky;
        let mut out = vec![0.0; self.mesh.elements() * npe * 15];
        out.par_chunks_mut(npe * 15).enumerate().for_each(|(elem, blk)| {
            for node in 0..npe {
                let p = &w[elem * npe + node];
                let (gv, gt) = g.at(npe, elem, node);
                let mut mu = mu_mol;
                let mut kappa = mu_mol * gas.cp() / gas.pr;
                let mu_s = if smag || matches!(self.cfg.svv, Some(SvvConfig { viscosity: SvvViscosity::Smagorinsky, .. })) {
                    smagorinsky_viscosity(&gv, self.delta)
                } else {
                    0.0
                };
                if smag {
                    mu += mu_s;
                    kappa += gas.kappa_turbulent(mu_s);
                }
                let mut f = [[0.0; 3]; 5];
                if mu != 0.0 || kappa != 0.0 {
                    add_viscous(&mut f, mu, kappa, &p.v, &gv, &gt);
                }
                if let (Some(s), Some(fg)) = (&self.cfg.svv, &filtered) {
                    let mu_svv = match s.viscosity {
                        SvvViscosity::Constant { mu } => mu,
                        SvvViscosity::Smagorinsky => mu_s,
                    };
                    if mu_svv != 0.0 {
                        let (hv, ht) = fg.at(npe, elem, node);
                        add_viscous(&mut f, mu_svv, gas.kappa_turbulent(mu_svv), &p.v, &hv, &ht);
                    }
                }
                for r in 0..5 {
                    for d in 0..3 {
                        blk[node * 15 + 3 * r + d] = f[r][d];
                    }
                }
            }
        });
        out
    }

    /// Strong-form nodal time derivative du/dt.
    pub fn spatial_residual(&self, u: &ConservedField) -> Result<ConservedField, SolverError> {
        self.residual_parts(u, Parts::ALL)
    }

    /// Selected contributions of the residual (volume, surface, viscous).
    pub fn residual_parts(&self, u: &ConservedField, parts: Parts) -> Result<ConservedField, SolverError> {
        self.check_layout(u)?;
        let w = self.primitives(u)?;
        let gamma = self.cfg.gas.gamma;
        let enth: Vec<f64> = w.par_iter().map(|p| p.enthalpy(gamma)).collect();
        let fv = if parts.viscous && self.cfg.has_viscous_terms() {
            let g = self.gradients_from_prim(&w);
            Some(self.viscous_fluxes(&w, &g))
        } else {
            None
        };
        let npe = self.npe();
        let two_h = 2.0 / self.h();
        let mut out = vec![0.0; u.data.len()];
        let failed: Vec<SolverError> = out
            .par_chunks_mut(npe * NVAR)
            .enumerate()
            .filter_map(|(elem, res)| {
                self.element_residual(elem, u, &w, &enth, fv.as_deref(), res, parts, two_h).err()
            })
            .collect();
        if let Some(e) = failed.into_iter().next() {
            return Err(e);
        }
        Ok(ConservedField { mesh: u.mesh, n: u.n, data: out })
    }

    #[allow(clippy::too_many_arguments)]
    fn element_residual(
        &self,
        elem: usize,
        u: &ConservedField,
        w: &[Primitive],
        enth: &[f64],
        fv: Option<&[f64]>,
        res: &mut [f64],
        parts: Parts,
        two_h: f64,
    ) -> Result<(), SolverError> {
        let np = self.np;
        let npe = self.npe();
        let base = elem * npe;
        let q = |e: usize, node: usize| -> Cons {
            let o = (e * npe + node) * NVAR;
            [u.data[o], u.data[o + 1], u.data[o + 2], u.data[o + 3], u.data[o + 4]]
        };
        let mut acc = vec![[0.0; NVAR]; np];
        for d in 0..3 {
            let s = self.stride(d);
            let mut n = [0.0; 3];
            n[d] = 1.0;
            let up = self.mesh.neighbor(elem, d, true);
            let dn = self.mesh.neighbor(elem, d, false);
            for first in (0..npe).filter(|&nd| self.line_pos(nd, d) == 0) {
                // volume: 2 sum_m D_im F#(u_i, u_m), F# symmetric so each pair once
                if parts.volume {
                    acc.iter_mut().for_each(|a| *a = [0.0; NVAR]);
                    for i in 0..np {
                        let ni = first + i * s;
                        let (wi, hi) = (&w[base + ni], enth[base + ni]);
                        let fii = euler_flux_dir(wi, &q(elem, ni), d);
                        let dii = 2.0 * self.d[i * np + i];
                        for r in 0..NVAR {
                            acc[i][r] += dii * fii[r];
                        }
                        for m in i + 1..np {
                            let nm = first + m * s;
                            let f = pirozzoli(wi, hi, &w[base + nm], enth[base + nm], d);
                            let (dim, dmi) = (2.0 * self.d[i * np + m], 2.0 * self.d[m * np + i]);
                            for r in 0..NVAR {
                                acc[i][r] += dim * f[r];
                                acc[m][r] += dmi * f[r];
                            }
                        }
                    }
                    for (i, a) in acc.iter().enumerate() {
                        let o = (first + i * s) * NVAR;
                        for r in 0..NVAR {
                            res[o + r] -= a[r];
                        }
                    }
                }
                // faces: (F* - F_own) lifted to the end nodes
                if parts.surface {
                    let last = first + (np - 1) * s;
                    for (node, i) in [(last, np - 1), (first, 0)] {
                        let (le, ln, re, rn) = if i == np - 1 { (elem, node, up, first) } else { (dn, last, elem, node) };
                        let (l, r) = (le * npe + ln, re * npe + rn);
                        let fstar = self.face_flux(&w[l], enth[l], &w[r], enth[r], d, &n)?;
                        let own = euler_flux_dir(&w[base + node], &q(elem, node), d);
                        let sign = if i == np - 1 { 1.0 } else { -1.0 };
                        for r in 0..NVAR {
                            res[node * NVAR + r] -= sign * self.inv_w[i] * (fstar[r] - own[r]);
                        }
                    }
                }
            }
            if let Some(fv) = fv {
                let fvd = |e: usize, node: usize, r: usize| fv[(e * npe + node) * 15 + 3 * r + d];
                for node in 0..npe {
                    let i = self.line_pos(node, d);
                    let first = node - i * s;
                    let mut acc = [0.0; NVAR];
                    for m in 0..np {
                        let dim = self.d[i * np + m];
                        for r in 1..NVAR {
                            acc[r] += dim * fvd(elem, first + m * s, r);
                        }
                    }
                    if i == np - 1 {
                        let other = self.line_node(node, d, 0);
                        for r in 1..NVAR {
                            let own = fvd(elem, node, r);
                            acc[r] += self.inv_w[i] * (0.5 * (own + fvd(up, other, r)) - own);
                        }
                    }
                    if i == 0 {
                        let other = self.line_node(node, d, np - 1);
                        for r in 1..NVAR {
                            let own = fvd(elem, node, r);
                            acc[r] -= self.inv_w[i] * (0.5 * (own + fvd(dn, other, r)) - own);
                        }
                    }
                    for r in 1..NVAR {
                        res[node * NVAR + r] += acc[r];
                    }
                }
            }
        }
        for x in res.iter_mut() {
            *x *= two_h;
        }
        Ok(())
    }

    /// Interface flux: the volume two-point flux plus lambda-scaled Roe
    /// dissipation. Using the same two-point flux on faces keeps the lambda = 0
    /// scheme kinetic-energy preserving.
    #[inline]
    fn face_flux(
        &self,
        wl: &Primitive,
        hl: f64,
        wr: &Primitive,
        hr: f64,
        d: usize,
        n: &[f64; 3],
    ) -> Result<[f64; 5], SolverError> {
        let mut f = pirozzoli(wl, hl, wr, hr, d);
        let lam = self.cfg.lambda;
        if lam != 0.0 {
            let diss = roe_dissipation_prim(wl, wr, n, self.cfg.gas.gamma, self.cfg.entropy_fix)?;
            for r in 0..5 {
                f[r] -= lam * diss[r];
            }
        }
        Ok(f)
    }

    /// Largest effective kinematic diffusivity over nodes (0 if inviscid).
    fn max_diffusivity(&self, u: &ConservedField, w: &[Primitive]) -> f64 {
        if !self.cfg.has_viscous_terms() {
            return 0.0;
        }
        let gas = &self.cfg.gas;
        let npe = self.npe();
        let mu_mol = match self.cfg.viscosity {
            ViscosityModel::Constant { mu } => mu,
            _ => 0.0,
        };
        let needs_smag = self.cfg.viscosity == ViscosityModel::Smagorinsky
            || matches!(self.cfg.svv, Some(SvvConfig { viscosity: SvvViscosity::Smagorinsky, .. }));
        let g = if needs_smag { Some(self.gradients_from_prim(w)) } else { None };
        let mu_svv_const = match self.cfg.svv {
            Some(SvvConfig { viscosity: SvvViscosity::Constant { mu }, .. }) => mu,
            _ => 0.0,
        };
        let _ = u;
        (0..w.len())
            .into_par_iter()
            .map(|k| {
                let mu_s = g.as_ref().map_or(0.0, |g| {
                    let (gv, _) = g.at(npe, k / npe, k % npe);
                    smagorinsky_viscosity(&gv, self.delta)
                });
                let mu = mu_mol + mu_s + mu_svv_const;
                let kappa = mu_mol * gas.cp() / gas.pr + gas.kappa_turbulent(mu_s + mu_svv_const);
                (4.0 / 3.0 * mu).max(gas.gamma * kappa / gas.cp()) / w[k].rho
            })
            .reduce(|| 0.0, f64::max)
    }

    /// dt = CFL min h / ((2N+1) s (|v| + c)) with s = max(1, lambda)
    /// for the scaled Roe penalty, also limited by
    /// h^2 / ((2N+1)^2 nu_max C_visc) when viscous terms are active.
    pub fn compute_dt(&self, u: &ConservedField) -> Result<f64, SolverError> {
        self.check_layout(u)?;
        let w = self.primitives(u)?;
        let gamma = self.cfg.gas.gamma;
        let h = self.h();
        let k = (2 * self.cfg.n + 1) as f64;
        let smax = w
            .par_iter()
            .map(|p| (p.v[0] * p.v[0] + p.v[1] * p.v[1] + p.v[2] * p.v[2]).sqrt() + p.sound_speed(gamma))
            .reduce(|| 0.0, f64::max);
        let penalty = self.cfg.lambda.max(1.0);
        let mut dt = self.cfg.cfl * h / (k * smax * penalty);
        let nu = self.max_diffusivity(u, &w);
        if nu > 0.0 {
            dt = dt.min(self.cfg.cfl * h * h / (k * k * nu * C_VISC));
        }
        Ok(dt)
    }

    /// Williamson three-stage low-storage Runge-Kutta step.
    pub fn rk3_step(&self, u: &ConservedField, dt: f64) -> Result<ConservedField, SolverError> {
        let mut out = u.clone();
        let mut du = vec![0.0; u.data.len()];
        for s in 0..3 {
            let r = self.spatial_residual(&out)?;
            let (a, b) = (RK3_A[s], RK3_B[s]);
            du.par_iter_mut().zip(out.data.par_iter_mut()).zip(r.data.par_iter()).for_each(|((g, x), rv)| {
                *g = a * *g + dt * rv;
                *x += b * *g;
            });
        }
        Ok(out)
    }

    /// Volume integral of each conservative variable.
    pub fn totals(&self, u: &ConservedField) -> [f64; NVAR] {
        let npe = self.npe();
        let np = self.np;
        let jac = (self.h() / 2.0).powi(3);
        let per_elem: Vec<[f64; NVAR]> = (0..self.mesh.elements())
            .into_par_iter()
            .map(|elem| {
                let mut s = [0.0; NVAR];
                for node in 0..npe {
                    let (i, j, k) = (node % np, (node / np) % np, node / (np * np));
                    let wq = self.basis.weights[i] * self.basis.weights[j] * self.basis.weights[k] * jac;
                    let o = (elem * npe + node) * NVAR;
                    for r in 0..NVAR {
                        s[r] += wq * u.data[o + r];
                    }
                }
                s
            })
            .collect();
        per_elem.iter().fold([0.0; NVAR], |mut a, s| {
            for r in 0..NVAR {
                a[r] += s[r];
            }
            a
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Parts {
    pub volume: bool,
    pub surface: bool,
    pub viscous: bool,
}

impl Parts {
    pub const ALL: Parts = Parts { volume: true, surface: true, viscous: true };
}

pub const RK3_A: [f64; 3] = [0.0, -5.0 / 9.0, -153.0 / 128.0];
pub const RK3_B: [f64; 3] = [1.0 / 3.0, 15.0 / 16.0, 8.0 / 15.0];
pub const RK3_C: [f64; 3] = [0.0, 1.0 / 3.0, 3.0 / 4.0];

/// Amplification factor of one RK3 step for du/dt = z u / dt.
pub fn rk3_amplification(z: num_complex::Complex64) -> num_complex::Complex64 {
    let mut u = num_complex::Complex64::new(1.0, 0.0);
    let mut du = num_complex::Complex64::new(0.0, 0.0);
    for s in 0..3 {
        du = du * RK3_A[s] + z * u;
        u += du * RK3_B[s];
    }
    u
}

fn add_viscous(f: &mut [[f64; 3]; 5], mu: f64, kappa: f64, v: &[f64; 3], gv: &VelGrad, gt: &[f64; 3]) {
    let t = crate::physics3d::viscous_flux(mu, kappa, v, gv, gt);
    for r in 1..5 {
        for d in 0..3 {
            f[r][d] += t.0[r][d];
        }
    }
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let (r, c) = m.shape();
    let mut out = vec![0.0; r * c];
    for i in 0..r {
        for j in 0..c {
            out[i * c + j] = m[(i, j)];
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub field: ConservedField,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    Completed,
    Aborted { time: f64, error: SolverError },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub series: crate::diagnostics::DiagnosticsSeries,
    pub snapshots: Vec<Snapshot>,
    pub status: RunStatus,
    pub steps: usize,
}

/// Taylor-Green run from t = 0 to t_end.
pub fn run(cfg: &SolverConfig) -> Result<RunOutput, SolverError> {
    let solver = Solver::new(cfg)?;
    let gas = cfg.gas;
    let u0 = solver.new_field(|x| crate::diagnostics::tgv_initial_condition(x, &gas).0);
    Ok(solver.march(u0, |_, _| {}))
}

impl Solver {
    /// Stop times: diagnostics cadence, snapshots and t_end, sorted.
    fn stop_times(&self) -> Vec<f64> {
        let c = &self.cfg;
        let mut ts: Vec<f64> = Vec::new();
        let mut i = 0usize;
        loop {
            let t = i as f64 * c.diag_interval;
            if t > c.t_end * (1.0 + 1e-14) {
                break;
            }
            ts.push(t.min(c.t_end));
            i += 1;
        }
        ts.extend(c.snapshots.iter().copied());
        ts.push(c.t_end);
        ts.sort_by(f64::total_cmp);
        ts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * c.t_end.max(1.0));
        ts
    }

    /// March `u` to t_end, recording diagnostics and snapshots. `observer`
    /// sees every accepted step (time, field). A positivity failure stops
    /// the run and keeps everything recorded so far.
    pub fn march(&self, mut u: ConservedField, mut observer: impl FnMut(f64, &ConservedField)) -> RunOutput {
        use crate::diagnostics::{enstrophy, kinetic_energy, DiagnosticsSeries};
        let c = &self.cfg;
        let tol = 1e-12 * c.t_end.max(1.0);
        let is_diag = |t: f64| {
            let r = t / c.diag_interval;
            (r - r.round()).abs() * c.diag_interval <= tol || (t - c.t_end).abs() <= tol
        };
        let mut series = DiagnosticsSeries::default();
        let mut snapshots = Vec::new();
        let mut steps = 0;
        let mut t = 0.0;
        let record = |t: f64, u: &ConservedField, series: &mut DiagnosticsSeries, snaps: &mut Vec<Snapshot>| {
            if is_diag(t) {
                series.push(t, kinetic_energy(self, u), enstrophy(self, u));
            }
            if c.snapshots.iter().any(|&s| (s - t).abs() <= tol) {
                snaps.push(Snapshot { time: t, field: u.clone() });
            }
        };
        let stops = self.stop_times();
        record(0.0, &u, &mut series, &mut snapshots);
        for &stop in stops.iter().filter(|&&s| s > tol) {
            while t < stop - tol {
                let dt = match self.compute_dt(&u) {
                    Ok(dt) => dt,
                    Err(error) => return RunOutput { series, snapshots, status: RunStatus::Aborted { time: t, error }, steps },
                };
                let (dt, t_next) = if t + dt >= stop - tol { (stop - t, stop) } else { (dt, t + dt) };
                match self.rk3_step(&u, dt) {
                    Ok(v) => u = v,
                    Err(error) => return RunOutput { series, snapshots, status: RunStatus::Aborted { time: t, error }, steps },
                }
                t = t_next;
                steps += 1;
                observer(t, &u);
            }
            record(stop, &u, &mut series, &mut snapshots);
        }
        RunOutput { series, snapshots, status: RunStatus::Completed, steps }
    }
}
