//! Modal decomposition of the swing dynamics and closed-form curves.
//!
//! With inertia matrix `M`, stiffness `K`, and uniform damping `D = gamma*M`,
//! the second-order system `M x'' + D x' + K x = u` diagonalizes through the
//! generalized eigenproblem `K V = M V diag(lambda)` with `V' M V = I`. Every
//! per-machine response then splits into scalar mode responses governed by
//! the constants `c`, `d`, `eta` of each mode. The methods here evaluate
//! those mode sums: impulse responses of rotor frequency, rotor angle, and
//! arbitrary angle-linear observables, plus the stationary cross-correlation
//! functions of the angle fluctuations under white machine forcing.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::GridCase;

/// Eigenvalues with magnitude below this are treated as exact zeros.
pub const EIGENVALUE_CLAMP: f64 = 1e-10;

/// Scalar constants of one mode: the two first-order rates and the
/// inverse rate gap. For `lambda = 0` they reduce to `c = 0`,
/// `d = -gamma`, `eta = 1/gamma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeConstants {
    pub c: Complex64,
    pub d: Complex64,
    pub eta: Complex64,
}

/// Computes the mode constants for damping ratio `gamma` and eigenvalue
/// `lambda`. The square root of `gamma^2 - 4*lambda` is taken with
/// nonnegative imaginary part, so underdamped modes get `c = conj(d)`
/// with `Im(c) >= 0`. Fails when the discriminant vanishes: the two
/// rates coincide and `eta` is undefined.
pub fn mode_constants(gamma: f64, lambda: f64) -> Result<ModeConstants> {
    let disc = gamma * gamma - 4.0 * lambda;
    let scale = (gamma * gamma).max(4.0 * lambda.abs()).max(1e-300);
    if disc.abs() < 1e-12 * scale {
        return Err(Error::CriticalDamping {
            index: 0,
            value: gamma * gamma,
        });
    }
    let root = if disc >= 0.0 {
        Complex64::new(disc.sqrt(), 0.0)
    } else {
        Complex64::new(0.0, (-disc).sqrt())
    };
    let g = Complex64::new(gamma, 0.0);
    Ok(ModeConstants {
        c: (-g + root) / 2.0,
        d: (-g - root) / 2.0,
        eta: Complex64::new(1.0, 0.0) / root,
    })
}

/// The diagonalized system: eigenvalues ascending, mode shape columns
/// normalized so `V' M V = I`, and per-mode constants for the shared
/// damping ratio.
#[derive(Debug, Clone)]
pub struct ModalDecomposition {
    lambdas: Vec<f64>,
    shapes: DMatrix<f64>,
    gamma: f64,
    constants: Vec<ModeConstants>,
}

/// Solves the inertia-stiffness eigenproblem `K V = M V diag(lambda)`
/// by whitening. Returns inertia-orthonormal shapes and ascending
/// eigenvalues with tiny ones clamped to zero; `V' M V = I` holds to
/// 1e-9 and `V' K V = diag(lambda)` to 1e-8, verified on every call.
/// Damping plays no part, so this accepts any case.
pub fn mass_stiffness_eigs(case: &GridCase) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let check = case.jacobian_check();
    if !check.symmetric {
        return Err(Error::NotSymmetric {
            max_asymmetry: check.max_asymmetry,
            tol: crate::grid::SYMMETRY_TOL,
        });
    }
    let n = case.n();
    let m = case.inertia();
    let k = case.jacobian();

    // Whiten: S = M^-1/2 K M^-1/2 is symmetric with the same eigenvalues
    // as the generalized problem; V = M^-1/2 U.
    let m_inv_sqrt = DVector::from_iterator(n, m.iter().map(|&mi| 1.0 / mi.sqrt()));
    let mut s = DMatrix::from_fn(n, n, |i, j| m_inv_sqrt[i] * k[(i, j)] * m_inv_sqrt[j]);
    // Symmetrize rounding residue before the symmetric solver.
    s = (&s + s.transpose()) * 0.5;
    let (eigenvalues, eigenvectors) = jacobi_eigen(s);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eigenvalues[a].total_cmp(&eigenvalues[b]));

    let mut lambdas = Vec::with_capacity(n);
    let mut shapes = DMatrix::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        let mut l = eigenvalues[src];
        if l < -EIGENVALUE_CLAMP {
            return Err(Error::NotPsd(l));
        }
        if l.abs() < EIGENVALUE_CLAMP {
            l = 0.0;
        }
        lambdas.push(l);
        for r in 0..n {
            shapes[(r, col)] = m_inv_sqrt[r] * eigenvectors[(r, src)];
        }
        // Canonical sign: largest-magnitude entry positive.
        let mut imax = 0;
        for r in 1..n {
            if shapes[(r, col)].abs() > shapes[(imax, col)].abs() {
                imax = r;
            }
        }
        if shapes[(imax, col)] < 0.0 {
            for r in 0..n {
                shapes[(r, col)] = -shapes[(r, col)];
            }
        }
    }

    let m_mat = DMatrix::from_diagonal(m);
    let ortho = shapes.transpose() * &m_mat * &shapes - DMatrix::identity(n, n);
    if ortho.norm() > 1e-9 {
        return Err(Error::EigenAccuracy(format!(
            "mass orthonormality residual {:.3e}",
            ortho.norm()
        )));
    }
    let diag = shapes.transpose() * k * &shapes
        - DMatrix::from_diagonal(&DVector::from_vec(lambdas.clone()));
    if diag.norm() > 1e-8 {
        return Err(Error::EigenAccuracy(format!(
            "stiffness diagonalization residual {:.3e}",
            diag.norm()
        )));
    }
    Ok((shapes, lambdas))
}

/// Cyclic Jacobi diagonalization. Rotation-based sweeps keep the
/// off-diagonal residual at rounding level even when eigenvalues
/// cluster, where shift-based solvers can leave residuals far above
/// it. Cost is cubic per sweep, irrelevant at these sizes.
fn jacobi_eigen(mut a: DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut u = DMatrix::identity(n, n);
    let scale = a.abs().max().max(f64::MIN_POSITIVE);
    for _sweep in 0..60 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in p + 1..n {
                off = off.max(a[(p, q)].abs());
            }
        }
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.abs() <= 1e-18 * scale {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (theta * theta + 1.0).sqrt())
                } else {
                    -1.0 / (-theta + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let ukp = u[(k, p)];
                    let ukq = u[(k, q)];
                    u[(k, p)] = c * ukp - s * ukq;
                    u[(k, q)] = s * ukp + c * ukq;
                }
            }
        }
    }
    (a.diagonal(), u)
}

/// Diagonalizes a case for response work. On top of the eigensolve this
/// needs a uniform damping ratio and rejects critically damped modes.
pub fn decompose(case: &GridCase) -> Result<ModalDecomposition> {
    let gamma = match case.uniform_damping_ratio() {
        Some(g) => g,
        None => {
            let g0 = case.damping()[0] / case.inertia()[0];
            let gi = (1..case.n())
                .map(|i| case.damping()[i] / case.inertia()[i])
                .find(|gi| (gi - g0).abs() > 1e-9 * g0)
                .unwrap_or(g0);
            return Err(Error::NonUniformDamping(g0, gi));
        }
    };
    let (shapes, lambdas) = mass_stiffness_eigs(case)?;

    let constants = lambdas
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            mode_constants(gamma, l).map_err(|_| Error::CriticalDamping {
                index: i,
                value: gamma * gamma,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(ModalDecomposition {
        lambdas,
        shapes,
        gamma,
        constants,
    })
}

impl ModalDecomposition {
    pub fn n(&self) -> usize {
        self.lambdas.len()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Eigenvalues, ascending, with near-zeros clamped to exactly zero.
    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    /// Mode shapes as columns, mass-orthonormal.
    pub fn mode_shapes(&self) -> &DMatrix<f64> {
        &self.shapes
    }

    pub fn constants(&self, mode: usize) -> ModeConstants {
        self.constants[mode]
    }

    /// Damped oscillation frequency of each mode in Hz; zero for the
    /// rigid and overdamped modes.
    pub fn mode_freqs_hz(&self) -> Vec<f64> {
        self.constants
            .iter()
            .map(|mc| mc.c.im.max(0.0) / (2.0 * std::f64::consts::PI))
            .collect()
    }

    fn weights(&self, k: usize, l: usize) -> Vec<f64> {
        (0..self.n())
            .map(|i| self.shapes[(k, i)] * self.shapes[(l, i)])
            .collect()
    }

    /// Weights of each mode for an observable row against source
    /// machine `k`: `(row' V)_i * V_ki`.
    fn row_weights(&self, row: &DVector<f64>, k: usize) -> Result<Vec<f64>> {
        if row.len() != self.n() {
            return Err(Error::Dimension(format!(
                "output row has {} entries, system has {} machines",
                row.len(),
                self.n()
            )));
        }
        let proj = self.shapes.transpose() * row;
        Ok((0..self.n()).map(|i| proj[i] * self.shapes[(k, i)]).collect())
    }

    fn mode_sum<F>(&self, weights: &[f64], taus: &[f64], kernel: F) -> Result<Vec<f64>>
    where
        F: Fn(&ModeConstants, f64) -> Complex64,
    {
        let vals: Vec<Complex64> = taus
            .iter()
            .map(|&tau| {
                self.constants
                    .iter()
                    .zip(weights)
                    .map(|(mc, &w)| kernel(mc, tau) * w)
                    .sum()
            })
            .collect();
        realness(&vals)
    }

    /// Rotor frequency at machine `k` after a unit angular-momentum
    /// impulse at machine `l`, on the given lag grid. At `tau = 0` this
    /// equals the `(k, l)` entry of the inverse inertia matrix.
    pub fn impulse_frequency(&self, k: usize, l: usize, taus: &[f64]) -> Result<Vec<f64>> {
        self.check_machine(k)?;
        self.check_machine(l)?;
        let w = self.weights(k, l);
        self.mode_sum(&w, taus, |mc, tau| {
            mc.eta * (mc.c * (mc.c * tau).exp() - mc.d * (mc.d * tau).exp())
        })
    }

    /// Oscillatory part of `impulse_frequency`: the same curve with the
    /// rigid mode dropped. Correlation estimators built on drift-free
    /// angle records can only reach this component.
    pub fn impulse_frequency_oscillatory(
        &self,
        k: usize,
        l: usize,
        taus: &[f64],
    ) -> Result<Vec<f64>> {
        self.check_machine(k)?;
        self.check_machine(l)?;
        let mut w = self.weights(k, l);
        for (i, wi) in w.iter_mut().enumerate() {
            if self.lambdas[i] == 0.0 {
                *wi = 0.0;
            }
        }
        self.mode_sum(&w, taus, |mc, tau| {
            mc.eta * (mc.c * (mc.c * tau).exp() - mc.d * (mc.d * tau).exp())
        })
    }

    /// Rotor angle at machine `k` after a unit impulse at machine `l`.
    /// Starts at zero; the rigid mode contributes a saturating ramp.
    pub fn impulse_angle(&self, k: usize, l: usize, taus: &[f64]) -> Result<Vec<f64>> {
        self.check_machine(k)?;
        self.check_machine(l)?;
        let w = self.weights(k, l);
        self.mode_sum(&w, taus, angle_kernel)
    }

    /// Impulse response of an angle-linear observable `row' * angles`
    /// to a unit impulse at machine `k`. Rows with zero net weight on
    /// the rigid mode (for example row sums of zero against uniform
    /// inertia) are free of the rigid drift automatically.
    pub fn impulse_output_angle(
        &self,
        row: &DVector<f64>,
        k: usize,
        taus: &[f64],
    ) -> Result<Vec<f64>> {
        self.check_machine(k)?;
        let w = self.row_weights(row, k)?;
        self.mode_sum(&w, taus, angle_kernel)
    }

    /// Impulse response of `row' * frequencies` to a unit impulse at
    /// machine `k`.
    pub fn impulse_output_freq(
        &self,
        row: &DVector<f64>,
        k: usize,
        taus: &[f64],
    ) -> Result<Vec<f64>> {
        self.check_machine(k)?;
        let w = self.row_weights(row, k)?;
        self.mode_sum(&w, taus, |mc, tau| {
            mc.eta * (mc.c * (mc.c * tau).exp() - mc.d * (mc.d * tau).exp())
        })
    }

    /// Weights of each mode for an observable row against a forcing
    /// row: `(row' V)_i * (source' V)_i`.
    fn pair_weights(&self, row: &DVector<f64>, source: &DVector<f64>) -> Result<Vec<f64>> {
        for (name, r) in [("output", row), ("source", source)] {
            if r.len() != self.n() {
                return Err(Error::Dimension(format!(
                    "{name} row has {} entries, system has {} machines",
                    r.len(),
                    self.n()
                )));
            }
        }
        let out = self.shapes.transpose() * row;
        let src = self.shapes.transpose() * source;
        Ok((0..self.n()).map(|i| out[i] * src[i]).collect())
    }

    /// Impulse response of `row' * angles` to the forcing pattern
    /// `source' * impulses`, a unit impulse distributed over machines
    /// by the source row. Zero-sum source rows put no momentum into
    /// the rigid mode, so the response settles instead of drifting.
    pub fn impulse_output_angle_from(
        &self,
        row: &DVector<f64>,
        source: &DVector<f64>,
        taus: &[f64],
    ) -> Result<Vec<f64>> {
        let w = self.pair_weights(row, source)?;
        self.mode_sum(&w, taus, angle_kernel)
    }

    /// Impulse response of `row' * frequencies` to the forcing pattern
    /// `source' * impulses`.
    pub fn impulse_output_freq_from(
        &self,
        row: &DVector<f64>,
        source: &DVector<f64>,
        taus: &[f64],
    ) -> Result<Vec<f64>> {
        let w = self.pair_weights(row, source)?;
        self.mode_sum(&w, taus, |mc, tau| {
            mc.eta * (mc.c * (mc.c * tau).exp() - mc.d * (mc.d * tau).exp())
        })
    }

    /// Stationary cross-correlation `E[angle_k(t+tau) angle_l(t)]` of the
    /// angle fluctuations when every machine is forced by independent
    /// white noise of intensity `alpha * inertia`. The rigid mode is a
    /// random walk with no stationary moment and is excluded; the value
    /// is the correlation of the oscillatory part. Lags must be
    /// nonnegative.
    pub fn analytic_crosscorr_angle(
        &self,
        alpha: f64,
        k: usize,
        l: usize,
        taus: &[f64],
    ) -> Result<Vec<f64>> {
        self.crosscorr(alpha, k, l, taus, false)
    }

    /// Stationary cross-correlation `E[freq_k(t+tau) angle_l(t)]`, the
    /// lag-derivative of the angle cross-correlation.
    pub fn analytic_crosscorr_freq_angle(
        &self,
        alpha: f64,
        k: usize,
        l: usize,
        taus: &[f64],
    ) -> Result<Vec<f64>> {
        self.crosscorr(alpha, k, l, taus, true)
    }

    fn crosscorr(
        &self,
        alpha: f64,
        k: usize,
        l: usize,
        taus: &[f64],
        rate: bool,
    ) -> Result<Vec<f64>> {
        self.check_machine(k)?;
        self.check_machine(l)?;
        if !(alpha > 0.0) {
            return Err(Error::Config(format!(
                "noise intensity must be positive, got {alpha}"
            )));
        }
        if let Some(&t) = taus.iter().find(|&&t| t < 0.0) {
            return Err(Error::Config(format!(
                "correlation lags must be nonnegative, got {t}"
            )));
        }
        let g = self.gamma;
        let mut w = self.weights(k, l);
        for (wi, &li) in w.iter_mut().zip(&self.lambdas) {
            if li == 0.0 {
                *wi = 0.0;
            }
        }
        let vals: Vec<Complex64> = taus
            .iter()
            .map(|&tau| {
                self.constants
                    .iter()
                    .zip(&w)
                    .filter(|(_, &wi)| wi != 0.0)
                    .map(|(mc, &wi)| {
                        let half = Complex64::new(0.5, 0.0);
                        let ig = Complex64::new(1.0 / g, 0.0);
                        let ta = (half / mc.c + ig) * (mc.c * tau).exp();
                        let tb = (half / mc.d + ig) * (mc.d * tau).exp();
                        let term = if rate {
                            mc.c * ta + mc.d * tb
                        } else {
                            ta + tb
                        };
                        term * mc.eta * mc.eta * (-alpha * wi)
                    })
                    .sum()
            })
            .collect();
        realness(&vals)
    }

    fn check_machine(&self, k: usize) -> Result<()> {
        if k < self.n() {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "machine index {} out of range for {} machines",
                k,
                self.n()
            )))
        }
    }
}

fn angle_kernel(mc: &ModeConstants, tau: f64) -> Complex64 {
    mc.eta * ((mc.c * tau).exp() - (mc.d * tau).exp())
}

/// Strips imaginary parts after verifying they are rounding residue:
/// the conjugate-pair structure must cancel them to within 1e-9 of the
/// curve's real magnitude.
fn realness(vals: &[Complex64]) -> Result<Vec<f64>> {
    let max_re = vals.iter().map(|v| v.re.abs()).fold(0.0, f64::max);
    let max_im = vals.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
    if max_im > 1e-9 * max_re.max(1e-12) {
        return Err(Error::NonrealResidue {
            imag: max_im,
            real: max_re,
        });
    }
    Ok(vals.iter().map(|v| v.re).collect())
}
