//! Pointwise compressible-flow physics in nondimensional form
//! (rho0 = V0 = 1, R = 1 so T = p / rho, p0 = 1 / (gamma M0^2)).

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhysicsError {
    #[error("non-physical state: rho = {rho:.6e}, p = {p:.6e}")]
    NonPhysical { rho: f64, p: f64 },
    #[error("non-physical Roe average: c^2 = {0:.6e}")]
    RoeAverage(f64),
    #[error("invalid gas model: {0}")]
    InvalidGas(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GasModel {
    pub gamma: f64,
    pub pr: f64,
    pub pr_t: f64,
    pub mach: f64,
    /// `None` is inviscid
    pub re: Option<f64>,
}

impl Default for GasModel {
    fn default() -> Self {
        Self { gamma: 1.4, pr: 0.72, pr_t: 0.7, mach: 0.1, re: None }
    }
}

impl GasModel {
    pub fn validate(&self) -> Result<(), PhysicsError> {
        if !(self.gamma > 1.0) {
            return Err(PhysicsError::InvalidGas(format!("gamma must exceed 1, got {}", self.gamma)));
        }
        if !(self.pr > 0.0 && self.pr_t > 0.0) {
            return Err(PhysicsError::InvalidGas("Pr and Pr_t must be positive".into()));
        }
        if !(self.mach > 0.0) {
            return Err(PhysicsError::InvalidGas("Mach number must be positive".into()));
        }
        if let Some(re) = self.re {
            if !(re > 0.0) {
                return Err(PhysicsError::InvalidGas(format!("Re must be positive, got {re}")));
            }
        }
        Ok(())
    }

    pub fn p0(&self) -> f64 {
        1.0 / (self.gamma * self.mach * self.mach)
    }

    pub fn cp(&self) -> f64 {
        self.gamma / (self.gamma - 1.0)
    }

    pub fn mu(&self) -> f64 {
        self.re.map_or(0.0, |re| 1.0 / re)
    }

    pub fn kappa(&self) -> f64 {
        self.mu() * self.cp() / self.pr
    }

    /// Conductivity paired with an eddy or SVV viscosity.
    pub fn kappa_turbulent(&self, mu_t: f64) -> f64 {
        mu_t * self.cp() / self.pr_t
    }
}

/// Conservative variables (rho, rho v1, rho v2, rho v3, rho e).
pub type Cons = [f64; 5];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsState(pub Cons);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Primitive {
    pub rho: f64,
    pub v: [f64; 3],
    pub p: f64,
}

impl Primitive {
    pub fn temperature(&self) -> f64 {
        self.p / self.rho
    }

    pub fn enthalpy(&self, gamma: f64) -> f64 {
        let ke = 0.5 * (self.v[0] * self.v[0] + self.v[1] * self.v[1] + self.v[2] * self.v[2]);
        gamma / (gamma - 1.0) * self.p / self.rho + ke
    }

    pub fn sound_speed(&self, gamma: f64) -> f64 {
        (gamma * self.p / self.rho).sqrt()
    }
}

impl ConsState {
    pub fn from_primitive(rho: f64, v: [f64; 3], p: f64, gas: &GasModel) -> Self {
        ConsState(prim_to_cons(&Primitive { rho, v, p }, gas.gamma))
    }

    pub fn primitive(&self, gas: &GasModel) -> Result<Primitive, PhysicsError> {
        let w = cons_to_prim(&self.0, gas.gamma);
        if !(w.rho > 0.0) || !(w.p > 0.0) {
            return Err(PhysicsError::NonPhysical { rho: w.rho, p: w.p });
        }
        Ok(w)
    }
}

#[inline]
pub fn cons_to_prim(q: &Cons, gamma: f64) -> Primitive {
    let rho = q[0];
    let v = [q[1] / rho, q[2] / rho, q[3] / rho];
    let p = (gamma - 1.0) * (q[4] - 0.5 * (q[1] * v[0] + q[2] * v[1] + q[3] * v[2]));
    Primitive { rho, v, p }
}

#[inline]
pub fn prim_to_cons(w: &Primitive, gamma: f64) -> Cons {
    let ke = 0.5 * w.rho * (w.v[0] * w.v[0] + w.v[1] * w.v[1] + w.v[2] * w.v[2]);
    [w.rho, w.rho * w.v[0], w.rho * w.v[1], w.rho * w.v[2], w.p / (gamma - 1.0) + ke]
}

/// 5x3 flux, column d is the flux in direction d.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxTensor(pub [[f64; 3]; 5]);

impl FluxTensor {
    pub fn zero() -> Self {
        FluxTensor([[0.0; 3]; 5])
    }

    pub fn column(&self, d: usize) -> [f64; 5] {
        [self.0[0][d], self.0[1][d], self.0[2][d], self.0[3][d], self.0[4][d]]
    }
}

#[inline]
pub fn euler_flux_dir(w: &Primitive, q: &Cons, d: usize) -> [f64; 5] {
    let vd = w.v[d];
    let mut f = [q[0] * vd, q[1] * vd, q[2] * vd, q[3] * vd, (q[4] + w.p) * vd];
    f[1 + d] += w.p;
    f
}

pub fn euler_flux(q: &ConsState, gas: &GasModel) -> Result<FluxTensor, PhysicsError> {
    let w = q.primitive(gas)?;
    let mut t = FluxTensor::zero();
    for d in 0..3 {
        let f = euler_flux_dir(&w, &q.0, d);
        for r in 0..5 {
            t.0[r][d] = f[r];
        }
    }
    Ok(t)
}

/// Pirozzoli two-point flux in direction d:
///   f_rho   = {rho}{v_d}
///   f_rho v = {rho}{v_d}{v} + {p} e_d
///   f_rho e = {rho}{v_d}{H}
/// where {.} is the arithmetic mean of the two states.
#[inline]
pub fn pirozzoli(wl: &Primitive, hl: f64, wr: &Primitive, hr: f64, d: usize) -> [f64; 5] {
    let rho = 0.5 * (wl.rho + wr.rho);
    let vd = 0.5 * (wl.v[d] + wr.v[d]);
    let m = rho * vd;
    let mut f = [
        m,
        m * 0.5 * (wl.v[0] + wr.v[0]),
        m * 0.5 * (wl.v[1] + wr.v[1]),
        m * 0.5 * (wl.v[2] + wr.v[2]),
        m * 0.5 * (hl + hr),
    ];
    f[1 + d] += 0.5 * (wl.p + wr.p);
    f
}

pub fn two_point_flux(
    ql: &ConsState,
    qr: &ConsState,
    direction: usize,
    gas: &GasModel,
) -> Result<[f64; 5], PhysicsError> {
    assert!(direction < 3, "direction must be 0, 1 or 2");
    let wl = ql.primitive(gas)?;
    let wr = qr.primitive(gas)?;
    Ok(pirozzoli(&wl, wl.enthalpy(gas.gamma), &wr, wr.enthalpy(gas.gamma), direction))
}

/// Roe upwind dissipation 1/2 sum_e alpha_e |beta_e| K_e across a face with
/// unit normal n (pointing from L to R). The one-half makes
/// {F.n} - diss the classical Roe flux. `harten` enables Harten's entropy
/// fix with threshold delta = harten * c.
#[inline]
pub fn roe_dissipation_prim(
    wl: &Primitive,
    wr: &Primitive,
    n: &[f64; 3],
    gamma: f64,
    harten: Option<f64>,
) -> Result<[f64; 5], PhysicsError> {
    let sl = wl.rho.sqrt();
    let sr = wr.rho.sqrt();
    let inv = 1.0 / (sl + sr);
    let v = [
        (sl * wl.v[0] + sr * wr.v[0]) * inv,
        (sl * wl.v[1] + sr * wr.v[1]) * inv,
        (sl * wl.v[2] + sr * wr.v[2]) * inv,
    ];
    let h = (sl * wl.enthalpy(gamma) + sr * wr.enthalpy(gamma)) * inv;
    let ke = 0.5 * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    let c2 = (gamma - 1.0) * (h - ke);
    if !(c2 > 0.0) {
        return Err(PhysicsError::RoeAverage(c2));
    }
    let c = c2.sqrt();
    let rho = sl * sr;
    let vn = v[0] * n[0] + v[1] * n[1] + v[2] * n[2];

    let drho = wr.rho - wl.rho;
    let dp = wr.p - wl.p;
    let dv = [wr.v[0] - wl.v[0], wr.v[1] - wl.v[1], wr.v[2] - wl.v[2]];
    let dvn = dv[0] * n[0] + dv[1] * n[1] + dv[2] * n[2];

    let fix = |b: f64| -> f64 {
        let a = b.abs();
        match harten {
            Some(eps) if eps > 0.0 => {
                let delta = eps * c;
                if a < delta {
                    (b * b + delta * delta) / (2.0 * delta)
                } else {
                    a
                }
            }
            _ => a,
        }
    };
    let l1 = fix(vn - c);
    let l2 = fix(vn);
    let l5 = fix(vn + c);

    let a1 = (dp - rho * c * dvn) / (2.0 * c2);
    let a5 = (dp + rho * c * dvn) / (2.0 * c2);
    let a2 = drho - dp / c2;
    // shear jump (tangential velocity)
    let dvt = [dv[0] - dvn * n[0], dv[1] - dvn * n[1], dv[2] - dvn * n[2]];

    let w1 = l1 * a1;
    let w5 = l5 * a5;
    let w2 = l2 * a2;
    let mut d = [0.0; 5];
    d[0] = w1 + w2 + w5;
    for i in 0..3 {
        d[1 + i] = w1 * (v[i] - c * n[i]) + w2 * v[i] + w5 * (v[i] + c * n[i]) + l2 * rho * dvt[i];
    }
    d[4] = w1 * (h - vn * c)
        + w2 * ke
        + w5 * (h + vn * c)
        + l2 * rho * (v[0] * dvt[0] + v[1] * dvt[1] + v[2] * dvt[2]);
    for x in &mut d {
        *x *= 0.5;
    }
    Ok(d)
}

pub fn roe_dissipation(
    ql: &ConsState,
    qr: &ConsState,
    n: &[f64; 3],
    gas: &GasModel,
) -> Result<[f64; 5], PhysicsError> {
    let wl = ql.primitive(gas)?;
    let wr = qr.primitive(gas)?;
    roe_dissipation_prim(&wl, &wr, n, gas.gamma, None)
}

/// {F.n} - lambda * diss_Roe
pub fn riemann_flux(
    ql: &ConsState,
    qr: &ConsState,
    n: &[f64; 3],
    lambda: f64,
    gas: &GasModel,
) -> Result<[f64; 5], PhysicsError> {
    let wl = ql.primitive(gas)?;
    let wr = qr.primitive(gas)?;
    let mut f = [0.0; 5];
    for d in 0..3 {
        if n[d] == 0.0 {
            continue;
        }
        let fl = euler_flux_dir(&wl, &ql.0, d);
        let fr = euler_flux_dir(&wr, &qr.0, d);
        for r in 0..5 {
            f[r] += 0.5 * (fl[r] + fr[r]) * n[d];
        }
    }
    if lambda != 0.0 {
        let diss = roe_dissipation_prim(&wl, &wr, n, gas.gamma, None)?;
        for r in 0..5 {
            f[r] -= lambda * diss[r];
        }
    }
    Ok(f)
}

/// Velocity gradient, `gv[i][j]` = d v_i / d x_j.
pub type VelGrad = [[f64; 3]; 3];

/// tau = mu (grad v + grad v^T) - 2/3 mu (div v) I, energy row
/// sum_j v_j tau_ij + kappa dT/dx_i.
pub fn viscous_flux(mu: f64, kappa: f64, v: &[f64; 3], gv: &VelGrad, gt: &[f64; 3]) -> FluxTensor {
    let div = gv[0][0] + gv[1][1] + gv[2][2];
    let mut t = FluxTensor::zero();
    for i in 0..3 {
        for j in 0..3 {
            let mut tau = mu * (gv[i][j] + gv[j][i]);
            if i == j {
                tau -= 2.0 / 3.0 * mu * div;
            }
            t.0[1 + i][j] = tau;
        }
    }
    for d in 0..3 {
        t.0[4][d] = v[0] * t.0[1][d] + v[1] * t.0[2][d] + v[2] * t.0[3][d] + kappa * gt[d];
    }
    t
}

pub const C_SMAGORINSKY: f64 = 0.2;

/// |S| = sqrt(2 S:S), S the symmetric part of grad v.
pub fn strain_magnitude(gv: &VelGrad) -> f64 {
    let mut ss = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            let s = 0.5 * (gv[i][j] + gv[j][i]);
            ss += s * s;
        }
    }
    (2.0 * ss).sqrt()
}

pub fn smagorinsky_viscosity(gv: &VelGrad, delta: f64) -> f64 {
    C_SMAGORINSKY * C_SMAGORINSKY * delta * delta * strain_magnitude(gv)
}

pub fn filter_width(cell_volume: f64, n: usize) -> f64 {
    (cell_volume / ((n + 1) as f64).powi(3)).cbrt()
}

/// SVV flux from filtered gradients. The stress keeps the dilatational
/// term so that an identity kernel gives exactly `viscous_flux`.
pub fn svv_flux(
    mu_svv: f64,
    kappa_svv: f64,
    v: &[f64; 3],
    hat_gv: &VelGrad,
    hat_gt: &[f64; 3],
) -> FluxTensor {
    viscous_flux(mu_svv, kappa_svv, v, hat_gv, hat_gt)
}
