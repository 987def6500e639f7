//! The generic uncertain-system contract: canonical-form matrices built by
//! Kronecker products, the decomposition of the control-input function into
//! known, parametric, and non-parametric parts, and input-constraint
//! polytopes over the real and augmented inputs.

use crate::numerics::{DomainError, Mat, Scalar};

/// Problem dimensions. `d` is the relative degree, uniform across the slow
/// and fast partitions; `n_x`/`n_z` count degrees of freedom, `m` real
/// inputs, `w` adapted parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dimensions {
    pub d: usize,
    pub n_x: usize,
    pub n_z: usize,
    pub m: usize,
    pub w: usize,
}

impl Dimensions {
    pub fn new(d: usize, n_x: usize, n_z: usize, m: usize, w: usize) -> Self {
        assert!(d >= 1 && n_x >= 1 && n_z >= 1 && m >= 1, "degenerate dimensions");
        Self { d, n_x, n_z, m, w }
    }

    /// Length of the slow state vector `x`.
    pub fn dim_x(&self) -> usize {
        self.d * self.n_x
    }

    /// Length of the fast state vector `z`.
    pub fn dim_z(&self) -> usize {
        self.d * self.n_z
    }

    /// Length of the combined state `chi = (x, z)`.
    pub fn dim_chi(&self) -> usize {
        self.dim_x() + self.dim_z()
    }

    /// Rows of the control-input function `tau`.
    pub fn n_tau(&self) -> usize {
        self.n_x + self.n_z
    }

    /// Length of the augmented input `(u, vartheta)`.
    pub fn dim_u_bar(&self) -> usize {
        self.m + self.n_z
    }
}

/// Chain-integrator matrices for one partition and the combined state.
///
/// States are stored derivative-major: the first `n` entries are the
/// position-level block, the next `n` the first derivatives, and so on, which
/// is the layout the Kronecker products `A (x) I_n`, `B (x) I_n` act on.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalForm {
    pub a_x: Mat<f64>,
    pub b_x: Mat<f64>,
    pub a_z: Mat<f64>,
    pub b_z: Mat<f64>,
    pub a_chi: Mat<f64>,
    pub b_chi: Mat<f64>,
}

/// Build the canonical-form matrices for the given dimensions.
pub fn build_canonical(dims: &Dimensions) -> CanonicalForm {
    let d = dims.d;
    let mut a = Mat::<f64>::zeros(d, d);
    for i in 0..d.saturating_sub(1) {
        a[(i, i + 1)] = 1.0;
    }
    let mut b = Mat::<f64>::zeros(d, 1);
    b[(d - 1, 0)] = 1.0;

    let a_x = a.kron(&Mat::identity(dims.n_x));
    let b_x = b.kron(&Mat::identity(dims.n_x));
    let a_z = a.kron(&Mat::identity(dims.n_z));
    let b_z = b.kron(&Mat::identity(dims.n_z));

    let nchi = dims.dim_chi();
    let mut a_chi = Mat::<f64>::zeros(nchi, nchi);
    a_chi.set_block(0, 0, &a_x);
    a_chi.set_block(dims.dim_x(), dims.dim_x(), &a_z);
    let mut b_chi = Mat::<f64>::zeros(nchi, dims.n_tau());
    b_chi.set_block(0, 0, &b_x);
    b_chi.set_block(dims.dim_x(), dims.n_x, &b_z);

    CanonicalForm {
        a_x,
        b_x,
        a_z,
        b_z,
        a_chi,
        b_chi,
    }
}

/// Polytopic input constraint `{ p : C p <= c }`, kept together with the
/// generating intervals when it was built from a box.
#[derive(Debug, Clone, PartialEq)]
pub struct InputPolytope {
    c_mat: Mat<f64>,
    c_vec: Vec<f64>,
    intervals: Option<Vec<(f64, f64)>>,
}

impl InputPolytope {
    pub fn new(c_mat: Mat<f64>, c_vec: Vec<f64>) -> Self {
        assert_eq!(c_mat.rows(), c_vec.len(), "polytope row count mismatch");
        Self {
            c_mat,
            c_vec,
            intervals: None,
        }
    }

    /// Axis-aligned box `[lo_i, hi_i]` per variable, encoded as the row pairs
    /// `-p_i <= -lo_i`, `p_i <= hi_i`.
    pub fn from_box(intervals: &[(f64, f64)]) -> Self {
        let n = intervals.len();
        let mut c_mat = Mat::<f64>::zeros(2 * n, n);
        let mut c_vec = vec![0.0; 2 * n];
        for (i, &(lo, hi)) in intervals.iter().enumerate() {
            assert!(lo < hi, "empty interval [{lo}, {hi}]");
            c_mat[(2 * i, i)] = -1.0;
            c_vec[2 * i] = -lo;
            c_mat[(2 * i + 1, i)] = 1.0;
            c_vec[2 * i + 1] = hi;
        }
        Self {
            c_mat,
            c_vec,
            intervals: Some(intervals.to_vec()),
        }
    }

    /// Concatenate two box polytopes (real inputs x fast-command set).
    pub fn box_product(&self, other: &Self) -> Self {
        let a = self.intervals.as_ref().expect("box_product on non-box polytope");
        let b = other.intervals.as_ref().expect("box_product on non-box polytope");
        let mut both = a.clone();
        both.extend_from_slice(b);
        Self::from_box(&both)
    }

    pub fn n_rows(&self) -> usize {
        self.c_vec.len()
    }

    pub fn n_vars(&self) -> usize {
        self.c_mat.cols()
    }

    pub fn intervals(&self) -> Option<&[(f64, f64)]> {
        self.intervals.as_deref()
    }

    /// Per-row slack `c - C p`; all positive iff `p` is strictly interior.
    pub fn margins<S: Scalar>(&self, point: &[S]) -> Vec<S> {
        assert_eq!(point.len(), self.n_vars(), "margins: point length mismatch");
        (0..self.n_rows())
            .map(|i| {
                let mut acc = S::from_real(self.c_vec[i]);
                for j in 0..self.n_vars() {
                    let cij = self.c_mat[(i, j)];
                    if cij != 0.0 {
                        acc -= S::from_real(cij) * point[j].clone();
                    }
                }
                acc
            })
            .collect()
    }

    pub fn min_margin(&self, point: &[f64]) -> f64 {
        self.margins(point)
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn is_strictly_interior(&self, point: &[f64]) -> bool {
        self.min_margin(point) > 0.0
    }

    /// Midpoint of the generating box (the analytic-center heuristic used to
    /// start the allocator).
    pub fn box_midpoint(&self) -> Vec<f64> {
        self.intervals
            .as_ref()
            .expect("box_midpoint on non-box polytope")
            .iter()
            .map(|&(lo, hi)| 0.5 * (lo + hi))
            .collect()
    }
}

/// Per-row slack of `poly` at `point` (`c - C p`).
pub fn polytope_margin(poly: &InputPolytope, point: &[f64]) -> Vec<f64> {
    poly.margins(point)
}

/// Per-component compact parameter set, the known box the estimates must
/// never leave.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl ParamBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        assert_eq!(lo.len(), hi.len(), "parameter box bound lengths differ");
        for (l, h) in lo.iter().zip(&hi) {
            assert!(l < h, "empty parameter interval [{l}, {h}]");
        }
        Self { lo, hi }
    }

    pub fn len(&self) -> usize {
        self.lo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lo.is_empty()
    }

    pub fn contains(&self, w: &[f64], tol: f64) -> bool {
        assert_eq!(w.len(), self.len(), "parameter length mismatch");
        w.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(wi, (lo, hi))| *wi >= lo - tol && *wi <= hi + tol)
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| 0.5 * (l + h)).collect()
    }

    pub fn clamp(&self, w: &mut [f64]) {
        for (wi, (lo, hi)) in w.iter_mut().zip(self.lo.iter().zip(&self.hi)) {
            *wi = wi.clamp(*lo, *hi);
        }
    }
}

/// Augmented control input: the real input `u` together with the fast-state
/// command `vartheta`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedInput {
    pub u: Vec<f64>,
    pub vartheta: Vec<f64>,
}

impl AugmentedInput {
    pub fn from_stacked(dims: &Dimensions, u_bar: &[f64]) -> Self {
        assert_eq!(u_bar.len(), dims.dim_u_bar(), "augmented input length mismatch");
        Self {
            u: u_bar[..dims.m].to_vec(),
            vartheta: u_bar[dims.m..].to_vec(),
        }
    }

    pub fn stacked(&self) -> Vec<f64> {
        let mut out = self.u.clone();
        out.extend_from_slice(&self.vartheta);
        out
    }
}

/// State/input box over which Lipschitz and boundedness checks are sampled.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub x: Vec<(f64, f64)>,
    pub z: Vec<(f64, f64)>,
    pub u: Vec<(f64, f64)>,
}

impl Envelope {
    pub fn sample<R: rand::Rng>(&self, rng: &mut R) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let draw = |iv: &[(f64, f64)], rng: &mut R| -> Vec<f64> {
            iv.iter().map(|&(lo, hi)| rng.gen_range(lo..hi)).collect()
        };
        (draw(&self.x, rng), draw(&self.z, rng), draw(&self.u, rng))
    }
}

/// A concrete plant: canonical dimensions, the decomposition of `tau` into a
/// known part, a regressor linear in the unknown parameters, and a bounded
/// non-parametric remainder, plus the constraint polytopes.
///
/// `tau0` and `regressor` are generic over the scalar so the allocator can
/// differentiate straight through the model.
pub trait SystemModel {
    fn dims(&self) -> Dimensions;
    fn canonical(&self) -> &CanonicalForm;
    /// Constraint polytope over the real input `u`.
    fn input_polytope(&self) -> &InputPolytope;
    /// Constraint polytope over the augmented input `(u, vartheta)`.
    fn augmented_polytope(&self) -> &InputPolytope;
    /// The known compact parameter set (empty when the model is exact).
    fn param_box(&self) -> &ParamBox;
    /// The plant-side parameter values.
    fn true_params(&self) -> &[f64];
    fn envelope(&self) -> &Envelope;
    /// Declared bound on the non-parametric uncertainty over the envelope.
    fn delta_max(&self) -> f64;

    /// Known component of the control-input function, `n_x + n_z` rows.
    fn tau0<S: Scalar>(&self, x: &[S], z: &[S], u: &[S]) -> Result<Vec<S>, DomainError>;
    /// Regressor of the parametric component, `(n_x + n_z) x w`.
    fn regressor<S: Scalar>(&self, x: &[S], z: &[S], u: &[S]) -> Result<Mat<S>, DomainError>;
    /// Non-parametric remainder (plant side only; never differentiated).
    fn delta(&self, x: &[f64], z: &[f64], u: &[f64]) -> Vec<f64>;
}

/// Estimated control-input function `tau0 + phi * w_hat`.
pub fn tau_hat<S: Scalar, M: SystemModel + ?Sized>(
    model: &M,
    x: &[S],
    z: &[S],
    u: &[S],
    w_hat: &[S],
) -> Result<Vec<S>, DomainError> {
    let mut tau = model.tau0(x, z, u)?;
    let w = model.dims().w;
    assert_eq!(w_hat.len(), w, "parameter estimate length mismatch");
    if w > 0 {
        let phi = model.regressor(x, z, u)?;
        let corr = phi.matvec(w_hat);
        for (t, c) in tau.iter_mut().zip(corr) {
            *t += c;
        }
    }
    Ok(tau)
}

/// Plant-side control-input function `tau0 + phi * W + delta`.
pub fn tau_true<M: SystemModel + ?Sized>(
    model: &M,
    x: &[f64],
    z: &[f64],
    u: &[f64],
) -> Result<Vec<f64>, DomainError> {
    let w_true: Vec<f64> = model.true_params().to_vec();
    let mut tau = tau_hat(model, x, z, u, &w_true)?;
    for (t, d) in tau.iter_mut().zip(model.delta(x, z, u)) {
        *t += d;
    }
    Ok(tau)
}

/// Split a `tau` vector into its slow and fast rows.
pub fn split_tau<'a, S>(dims: &Dimensions, tau: &'a [S]) -> (&'a [S], &'a [S]) {
    assert_eq!(tau.len(), dims.n_tau(), "tau length mismatch");
    tau.split_at(dims.n_x)
}
