//! Kernel evaluation, Gram matrices and kernel PCA.
//!
//! Kernel PCA is fit on state vectors (rows of a panel). The double-centered
//! Gram matrix is eigendecomposed; each retained direction is stored as dual
//! coefficients `v_p / sqrt(λ_p)` so that projecting the training rows yields
//! the usual principal-component scores `sqrt(λ_p) v_p`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Eigenvalues at or below this fraction of the largest are treated as zero.
pub const RELATIVE_RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec<T: Real> {
    /// `exp(-‖x − z‖² / (2 bandwidth²))`
    Rbf { bandwidth: T },
    /// `⟨x, z⟩`
    Linear,
    /// `(⟨x, z⟩ + offset)^degree`
    Polynomial { degree: u32, offset: T },
}

impl<T: Real> KernelSpec<T> {
    pub fn rbf(bandwidth: T) -> Result<Self> {
        let spec = KernelSpec::Rbf { bandwidth };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Rbf { bandwidth } if !(bandwidth > T::zero() && bandwidth.finite()) => Err(
                Error::InvalidParameter(format!("rbf bandwidth must be positive, got {bandwidth}")),
            ),
            KernelSpec::Polynomial { degree: 0, .. } => {
                Err(Error::InvalidParameter("polynomial degree must be at least 1".into()))
            }
            KernelSpec::Polynomial { offset, .. } if !offset.finite() => {
                Err(Error::InvalidParameter("polynomial offset must be finite".into()))
            }
            _ => Ok(()),
        }
    }

    /// Evaluates the kernel on two equal-length points.
    #[inline]
    pub fn eval(&self, x: &[T], z: &[T]) -> T {
        match *self {
            KernelSpec::Rbf { bandwidth } => {
                let d2 = x
                    .iter()
                    .zip(z)
                    .fold(T::zero(), |acc, (&a, &b)| acc + (a - b) * (a - b));
                (-d2 / (T::lit(2.0) * bandwidth * bandwidth)).exp()
            }
            KernelSpec::Linear => dot(x, z),
            KernelSpec::Polynomial { degree, offset } => {
                let base = dot(x, z) + offset;
                (0..degree).fold(T::one(), |acc, _| acc * base)
            }
        }
    }
}

#[inline]
fn dot<T: Real>(x: &[T], z: &[T]) -> T {
    x.iter().zip(z).fold(T::zero(), |acc, (&a, &b)| acc + a * b)
}

/// Gram matrix with entry (m, q) = k(x_m, z_q).
pub fn gram<T: Real>(spec: &KernelSpec<T>, x: &DMatrix<T>, z: &DMatrix<T>) -> Result<DMatrix<T>> {
    spec.validate()?;
    if x.ncols() != z.ncols() {
        return Err(Error::Shape(format!(
            "kernel inputs have {} and {} columns",
            x.ncols(),
            z.ncols()
        )));
    }
    // points as contiguous columns
    let xt = x.transpose();
    let zt = z.transpose();
    let mut k = DMatrix::zeros(x.nrows(), z.nrows());
    for q in 0..zt.ncols() {
        let zq = zt.column(q);
        let zq = zq.as_slice();
        for m in 0..xt.ncols() {
            k[(m, q)] = spec.eval(xt.column(m).as_slice(), zq);
        }
    }
    Ok(k)
}

/// Median of all pairwise Euclidean distances between rows of `x`.
pub fn median_bandwidth<T: Real>(x: &DMatrix<T>) -> Result<T> {
    let m = x.nrows();
    if m < 2 {
        return Err(Error::InsufficientSamples { have: m, need: 2 });
    }
    let xt = x.transpose();
    let mut dists = Vec::with_capacity(m * (m - 1) / 2);
    for i in 0..m {
        for j in (i + 1)..m {
            dists.push((xt.column(i) - xt.column(j)).norm());
        }
    }
    let cmp = |a: &T, b: &T| a.partial_cmp(b).expect("finite distances");
    let mid = dists.len() / 2;
    let (_, &mut upper, _) = dists.select_nth_unstable_by(mid, cmp);
    let median = if dists.len() % 2 == 1 {
        upper
    } else {
        let lower = dists[..mid].iter().copied().fold(T::zero(), |a, b| a.max(b));
        (lower + upper) / T::lit(2.0)
    };
    if median <= T::zero() {
        if dists.iter().all(|d| *d <= T::zero()) {
            return Err(Error::DegenerateInput("all points are identical".into()));
        }
        // more than half of the pairs coincide; fall back to the smallest positive distance
        let smallest = dists.into_iter().filter(|d| *d > T::zero()).fold(None, |acc: Option<T>, d| {
            Some(acc.map_or(d, |a| a.min(d)))
        });
        return Ok(smallest.expect("a positive distance exists"));
    }
    Ok(median)
}

/// How many principal components to retain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ComponentSelection<T: Real> {
    /// Exactly this many components.
    Count(usize),
    /// Smallest count whose eigenvalue mass reaches this fraction of the total.
    Fraction(T),
}

impl<T: Real> ComponentSelection<T> {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ComponentSelection::Count(0) => {
                Err(Error::InvalidParameter("component count must be at least 1".into()))
            }
            ComponentSelection::Fraction(rho) if !(rho > T::zero() && rho <= T::one()) => Err(
                Error::InvalidParameter(format!("explained-variance fraction must lie in (0, 1], got {rho}")),
            ),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct KernelPcaModel<T: Real> {
    spec: KernelSpec<T>,
    training_points: DMatrix<T>,
    /// M×P
    dual_coefficients: DMatrix<T>,
    /// Retained eigenvalues, descending.
    eigenvalues: DVector<T>,
    /// Sum of all numerically nonzero eigenvalues.
    total_mass: T,
    rank: usize,
    /// Row means of the uncentered training Gram matrix.
    gram_row_means: DVector<T>,
    gram_mean: T,
}

impl<T: Real> KernelPcaModel<T> {
    pub fn spec(&self) -> &KernelSpec<T> {
        &self.spec
    }

    pub fn training_points(&self) -> &DMatrix<T> {
        &self.training_points
    }

    pub fn dual_coefficients(&self) -> &DMatrix<T> {
        &self.dual_coefficients
    }

    pub fn eigenvalues(&self) -> &DVector<T> {
        &self.eigenvalues
    }

    /// Retained component count P.
    pub fn components(&self) -> usize {
        self.dual_coefficients.ncols()
    }

    /// Numerical rank of the centered Gram matrix.
    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Fraction of the eigenvalue mass captured by the retained components.
    pub fn explained_fraction(&self) -> T {
        if self.total_mass > T::zero() {
            self.eigenvalues.sum() / self.total_mass
        } else {
            T::zero()
        }
    }

    /// Projects rows of `x` onto the principal directions, centering with the
    /// training statistics. Returns a Q×P matrix.
    pub fn project(&self, x: &DMatrix<T>) -> Result<DMatrix<T>> {
        if x.ncols() != self.training_points.ncols() {
            return Err(Error::Shape(format!(
                "model was fit on {} columns, got {}",
                self.training_points.ncols(),
                x.ncols()
            )));
        }
        let mut k = gram(&self.spec, x, &self.training_points)?;
        let m = T::count(k.ncols());
        for q in 0..k.nrows() {
            let row_mean = k.row(q).sum() / m;
            for i in 0..k.ncols() {
                k[(q, i)] = k[(q, i)] - row_mean - self.gram_row_means[i] + self.gram_mean;
            }
        }
        Ok(k * &self.dual_coefficients)
    }
}

/// Double-centers a symmetric Gram matrix, returning the centered matrix,
/// its row means and grand mean.
fn center_gram<T: Real>(k: &DMatrix<T>) -> (DMatrix<T>, DVector<T>, T) {
    let m = k.nrows();
    let mt = T::count(m);
    let row_means = DVector::from_fn(m, |i, _| k.row(i).sum() / mt);
    let grand = row_means.sum() / mt;
    let kc = DMatrix::from_fn(m, m, |i, j| k[(i, j)] - row_means[i] - row_means[j] + grand);
    (kc, row_means, grand)
}

pub fn fit_kernel_pca<T: Real>(
    spec: &KernelSpec<T>,
    x: &DMatrix<T>,
    selection: ComponentSelection<T>,
) -> Result<KernelPcaModel<T>> {
    selection.validate()?;
    let m = x.nrows();
    if m < 2 {
        return Err(Error::InsufficientSamples { have: m, need: 2 });
    }
    let k = gram(spec, x, x)?;
    let (kc, gram_row_means, gram_mean) = center_gram(&k);

    let eig = kc.symmetric_eigen();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .expect("finite eigenvalues")
    });
    let largest = eig.eigenvalues[order[0]].max(T::zero());
    let tol = T::lit(RELATIVE_RANK_TOL).max(T::lit(10.0) * T::count(m) * T::eps());
    let rank = if largest > T::zero() {
        order
            .iter()
            .take_while(|&&i| eig.eigenvalues[i] > tol * largest)
            .count()
    } else {
        0
    };
    let total_mass = order[..rank]
        .iter()
        .fold(T::zero(), |acc, &i| acc + eig.eigenvalues[i]);

    let p = match selection {
        ComponentSelection::Count(p) => {
            if p > rank {
                return Err(Error::Rank {
                    requested: p,
                    achievable: rank,
                });
            }
            p
        }
        ComponentSelection::Fraction(rho) => {
            if rank == 0 {
                return Err(Error::Rank {
                    requested: 1,
                    achievable: 0,
                });
            }
            let target = rho * total_mass;
            let mut cum = T::zero();
            let mut p = rank;
            for (k, &i) in order[..rank].iter().enumerate() {
                cum += eig.eigenvalues[i];
                if cum >= target {
                    p = k + 1;
                    break;
                }
            }
            p
        }
    };

    let mut dual = DMatrix::zeros(m, p);
    let mut eigenvalues = DVector::zeros(p);
    for (c, &i) in order[..p].iter().enumerate() {
        let lambda = eig.eigenvalues[i];
        eigenvalues[c] = lambda;
        let v = eig.eigenvectors.column(i);
        let pivot = v.iter().fold((T::zero(), T::zero()), |(best, sgn), &e| {
            if e.abs() > best {
                (e.abs(), e)
            } else {
                (best, sgn)
            }
        });
        let sign = if pivot.1 < T::zero() { -T::one() } else { T::one() };
        let scale = sign / lambda.sqrt();
        dual.set_column(c, &(v * scale));
    }

    Ok(KernelPcaModel {
        spec: *spec,
        training_points: x.clone(),
        dual_coefficients: dual,
        eigenvalues,
        total_mass,
        rank,
        gram_row_means,
        gram_mean,
    })
}
