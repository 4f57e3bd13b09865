//! Reference-element machinery on [-1, 1]: node families, Lagrange
//! differentiation, orthonormal Legendre transforms and SVV kernels.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BasisError {
    #[error("polynomial degree {0} is out of range (0..=20)")]
    InvalidDegree(i64),
    #[error("Gauss-Lobatto nodes need N >= 1")]
    LobattoDegreeZero,
    #[error("power kernel needs N >= 1")]
    PowerKernelDegreeZero,
    #[error("invalid kernel parameter: {0}")]
    InvalidKernel(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeFamily {
    Gauss,
    GaussLobatto,
}

impl std::str::FromStr for NodeFamily {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "gauss" => Ok(NodeFamily::Gauss),
            "gauss-lobatto" | "lobatto" => Ok(NodeFamily::GaussLobatto),
            _ => Err(format!("unknown node family '{s}'")),
        }
    }
}

pub const MAX_DEGREE: usize = 20;

/// Nodal basis on one reference element.
#[derive(Debug, Clone)]
pub struct NodalBasis {
    pub n: usize,
    pub family: NodeFamily,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// D[(i, j)] = l_j'(x_i)
    pub d: DMatrix<f64>,
    pub l_left: Vec<f64>,
    pub l_right: Vec<f64>,
    /// V[(i, k)] = phi_k(x_i), phi_k orthonormal Legendre
    pub v: DMatrix<f64>,
    pub vinv: DMatrix<f64>,
    bary: Vec<f64>,
}

/// Legendre P_n(x) and P_n'(x) by the three-term recurrence.
pub fn legendre(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, x);
    let (mut d0, mut d1) = (0.0, 1.0);
    for k in 1..n {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * x * p1 - kf * p0) / (kf + 1.0);
        let d2 = d0 + (2.0 * kf + 1.0) * p1;
        p0 = p1;
        p1 = p2;
        d0 = d1;
        d1 = d2;
    }
    (p1, d1)
}

fn gauss_nodes(n: usize) -> (Vec<f64>, Vec<f64>) {
    // roots of P_{n+1}
    let m = n + 1;
    let mut x = vec![0.0; m];
    let mut w = vec![0.0; m];
    for j in 0..m {
        let mut r = -(std::f64::consts::PI * (j as f64 + 0.75) / (m as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(m, r);
            let dr = p / dp;
            r -= dr;
            if dr.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre(m, r);
        x[j] = r;
        w[j] = 2.0 / ((1.0 - r * r) * dp * dp);
    }
    (x, w)
}

fn lobatto_nodes(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n + 1];
    let mut w = vec![0.0; n + 1];
    let nf = n as f64;
    x[0] = -1.0;
    x[n] = 1.0;
    for j in 1..n {
        // interior nodes are roots of P_N'; Newton on q = P_N' using
        // (1-x^2) P_N'' = 2x P_N' - N(N+1) P_N
        let mut r = -(std::f64::consts::PI * j as f64 / nf).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, r);
            let ddp = (2.0 * r * dp - nf * (nf + 1.0) * p) / (1.0 - r * r);
            let dr = dp / ddp;
            r -= dr;
            if dr.abs() < 1e-15 {
                break;
            }
        }
        x[j] = r;
    }
    for j in 0..=n {
        let (p, _) = legendre(n, x[j]);
        w[j] = 2.0 / (nf * (nf + 1.0) * p * p);
    }
    (x, w)
}

fn barycentric_weights(x: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|j| {
            let prod: f64 = (0..x.len()).filter(|&k| k != j).map(|k| x[j] - x[k]).product();
            1.0 / prod
        })
        .collect()
}

impl NodalBasis {
    pub fn new(n: i64, family: NodeFamily) -> Result<Self, BasisError> {
        if n < 0 || n as usize > MAX_DEGREE {
            return Err(BasisError::InvalidDegree(n));
        }
        let n = n as usize;
        let (nodes, weights) = match family {
            NodeFamily::Gauss => gauss_nodes(n),
            NodeFamily::GaussLobatto => {
                if n == 0 {
                    return Err(BasisError::LobattoDegreeZero);
                }
                lobatto_nodes(n)
            }
        };
        let bary = barycentric_weights(&nodes);
        let np = n + 1;
        let mut d = DMatrix::zeros(np, np);
        for i in 0..np {
            let mut diag = 0.0;
            for j in 0..np {
                if i != j {
                    let v = bary[j] / bary[i] / (nodes[i] - nodes[j]);
                    d[(i, j)] = v;
                    diag -= v;
                }
            }
            d[(i, i)] = diag;
        }
        let (l_left, l_right) = match family {
            NodeFamily::GaussLobatto => {
                let mut l = vec![0.0; np];
                let mut r = vec![0.0; np];
                l[0] = 1.0;
                r[n] = 1.0;
                (l, r)
            }
            NodeFamily::Gauss => (
                lagrange_weights(&nodes, &bary, -1.0),
                lagrange_weights(&nodes, &bary, 1.0),
            ),
        };
        let mut v = DMatrix::zeros(np, np);
        for i in 0..np {
            for k in 0..np {
                v[(i, k)] = orthonormal_legendre(k, nodes[i]);
            }
        }
        let vinv = match family {
            // exact: phi_j phi_k has degree <= 2N <= 2N+1
            NodeFamily::Gauss => {
                let mut m = v.transpose();
                for k in 0..np {
                    for i in 0..np {
                        m[(k, i)] *= weights[i];
                    }
                }
                m
            }
            NodeFamily::GaussLobatto => v
                .clone()
                .try_inverse()
                .expect("Vandermonde matrix on distinct nodes is invertible"),
        };
        Ok(Self { n, family, nodes, weights, d, l_left, l_right, v, vinv, bary })
    }

    pub fn np(&self) -> usize {
        self.n + 1
    }

    /// Lagrange basis values l_j(x) for all j.
    pub fn interpolation_weights(&self, x: f64) -> Vec<f64> {
        lagrange_weights(&self.nodes, &self.bary, x)
    }

    /// Dense filter matrix V diag(Q) V^{-1}.
    pub fn filter_matrix(&self, kernel: &SvvKernel) -> Result<DMatrix<f64>, BasisError> {
        if kernel.q.len() != self.np() {
            return Err(BasisError::DimensionMismatch { expected: self.np(), got: kernel.q.len() });
        }
        if kernel.q.iter().all(|&q| q == 1.0) {
            return Ok(DMatrix::identity(self.np(), self.np()));
        }
        let mut vq = self.v.clone();
        for k in 0..self.np() {
            for i in 0..self.np() {
                vq[(i, k)] *= kernel.q[k];
            }
        }
        Ok(vq * &self.vinv)
    }
}

pub fn build_basis(n: i64, family: NodeFamily) -> Result<NodalBasis, BasisError> {
    NodalBasis::new(n, family)
}

pub fn orthonormal_legendre(k: usize, x: f64) -> f64 {
    legendre(k, x).0 * ((2 * k + 1) as f64 / 2.0).sqrt()
}

fn lagrange_weights(nodes: &[f64], bary: &[f64], x: f64) -> Vec<f64> {
    if let Some(j) = nodes.iter().position(|&xj| xj == x) {
        let mut l = vec![0.0; nodes.len()];
        l[j] = 1.0;
        return l;
    }
    let t: Vec<f64> = nodes.iter().zip(bary).map(|(&xj, &bj)| bj / (x - xj)).collect();
    let s: f64 = t.iter().sum();
    t.into_iter().map(|v| v / s).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum KernelSpec {
    Power { p: f64 },
    Exponential { m: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvvKernel {
    pub spec: KernelSpec,
    pub q: Vec<f64>,
}

/// Modal SVV kernel. Power: Q(k) = (k/N)^P with Q(0) = 0 for P > 0 and
/// Q = 1 for P = 0. Exponential: Q(k) = exp(-(k-N)^2/(k-M)^2) above the
/// cut-off M, zero at and below it.
pub fn svv_kernel(n: usize, spec: KernelSpec) -> Result<SvvKernel, BasisError> {
    let q = match spec {
        KernelSpec::Power { p } => {
            if n == 0 {
                return Err(BasisError::PowerKernelDegreeZero);
            }
            if !(p >= 0.0) || !p.is_finite() {
                return Err(BasisError::InvalidKernel(format!("P must be >= 0, got {p}")));
            }
            if p == 0.0 {
                vec![1.0; n + 1]
            } else {
                (0..=n).map(|k| (k as f64 / n as f64).powf(p)).collect()
            }
        }
        KernelSpec::Exponential { m } => {
            if m >= n {
                return Err(BasisError::InvalidKernel(format!("cut-off M={m} must be < N={n}")));
            }
            (0..=n)
                .map(|k| {
                    if k <= m {
                        0.0
                    } else {
                        let a = (k as f64 - n as f64).powi(2);
                        let b = (k as f64 - m as f64).powi(2);
                        (-a / b).exp()
                    }
                })
                .collect()
        }
    };
    Ok(SvvKernel { spec, q })
}

pub fn apply_modal_filter(
    basis: &NodalBasis,
    kernel: &SvvKernel,
    nodal: &[f64],
) -> Result<Vec<f64>, BasisError> {
    if nodal.len() != basis.np() {
        return Err(BasisError::DimensionMismatch { expected: basis.np(), got: nodal.len() });
    }
    let f = basis.filter_matrix(kernel)?;
    Ok((f * DVector::from_column_slice(nodal)).as_slice().to_vec())
}
