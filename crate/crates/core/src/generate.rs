//! Seeded random instances.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::InstanceFile;
use crate::linalg::{self, DenseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PsiKind {
    Identity,
    /// `Ψ` with orthonormal rows, so `ΨΨᵀ = I`.
    TightFrame,
    /// Gaussian `Ψ` scaled to `σ_max(Ψ) = 1`.
    Random,
}

impl fmt::Display for PsiKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PsiKind::Identity => "identity",
            PsiKind::TightFrame => "tight-frame",
            PsiKind::Random => "random",
        })
    }
}

impl FromStr for PsiKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(PsiKind::Identity),
            "tight-frame" => Ok(PsiKind::TightFrame),
            "random" => Ok(PsiKind::Random),
            other => Err(Error::InvalidInput(format!("unknown Ψ kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerateOptions {
    pub m: usize,
    pub n: usize,
    pub l: usize,
    /// Number of nonzeros in `Ψᵀx*`.
    pub sparsity: usize,
    pub psi: PsiKind,
    pub seed: u64,
}

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

fn subset(rng: &mut ChaCha8Rng, len: usize, k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..len).collect();
    for i in 0..k {
        let j = rng.random_range(i..len);
        idx.swap(i, j);
    }
    let mut out = idx[..k].to_vec();
    out.sort_unstable();
    out
}

/// Coefficient bounded away from zero.
fn coefficient(rng: &mut ChaCha8Rng) -> f64 {
    let g: f64 = StandardNormal.sample(rng);
    g.signum() * (0.5 + g.abs())
}

/// Gaussian `Φ` with unit-norm rows, `Ψ` of the requested kind, and `x*`
/// with `sparsity` nonzeros in `Ψᵀx*` whenever that is achievable.
///
/// For non-identity `Ψ`, `x*` is drawn from `Ker(Ψ_Jᵀ)` for a random
/// cosupport `J` of size `l − sparsity`; when that kernel is trivial a dense
/// Gaussian `x*` is used instead.
pub fn generate(opts: &GenerateOptions) -> Result<InstanceFile> {
    let GenerateOptions { m, n, l, sparsity, psi: kind, seed } = *opts;
    if m == 0 || n == 0 || l == 0 {
        return Err(Error::InvalidInput("m, n and l must be positive".into()));
    }
    if m > n {
        return Err(Error::InvalidInput(format!("need m ≤ n, got m = {m}, n = {n}")));
    }
    if sparsity > l {
        return Err(Error::InvalidInput(format!("need sparsity ≤ l, got {sparsity} > {l}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut phi = gaussian(&mut rng, m, n);
    for mut row in phi.row_iter_mut() {
        let nrm = row.norm();
        row /= nrm;
    }
    let psi = match kind {
        PsiKind::Identity => {
            if l != n {
                return Err(Error::InvalidInput(format!("identity Ψ needs l = n, got l = {l}, n = {n}")));
            }
            DMatrix::identity(n, n)
        }
        PsiKind::TightFrame => {
            if l < n {
                return Err(Error::InvalidInput(format!("a tight frame needs l ≥ n, got l = {l}, n = {n}")));
            }
            gaussian(&mut rng, l, n).qr().q().transpose()
        }
        PsiKind::Random => {
            let g = gaussian(&mut rng, n, l);
            let s = DenseMatrix::from_na(g.clone()).spectral_norm();
            g / s
        }
    };
    let psi = DenseMatrix::from_na(psi);

    let x_star: Vec<f64> = if kind == PsiKind::Identity {
        let mut x = vec![0.0; n];
        for i in subset(&mut rng, n, sparsity) {
            x[i] = coefficient(&mut rng);
        }
        x
    } else {
        let cosupport = subset(&mut rng, l, l - sparsity);
        let u = linalg::nullspace_basis(&psi.select_columns(&cosupport).transpose(), None)?;
        if u.ncols() > 0 && sparsity > 0 {
            let c: Vec<f64> = (0..u.ncols()).map(|_| coefficient(&mut rng)).collect();
            u.mul_vec(&c)?
        } else if sparsity == 0 {
            vec![0.0; n]
        } else {
            (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
        }
    };
    let phi = DenseMatrix::from_na(phi);
    let b = phi.mul_vec(&x_star)?;
    Ok(InstanceFile {
        name: Some(format!("{kind}-m{m}-n{n}-l{l}-k{sparsity}-seed{seed}")),
        phi: phi.to_rows(),
        psi: psi.to_rows(),
        b,
        x_star: Some(x_star),
        delta: None,
        lambda: None,
        seed: Some(seed),
    })
}
