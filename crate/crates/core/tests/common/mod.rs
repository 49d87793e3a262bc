//! Shared instance generators and numerical oracles for the integration tests.
#![allow(dead_code)]

use drvar::fit::{fit_logistic, fit_ols, Arm};
use drvar::sandwich::{assemble_b, EstimatingEquations};
use drvar::{Dataset64, DesignMatrix64, Estimand, OrFit64, PsFit64};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn names(p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("x{j}")).collect()
}

fn normal(rng: &mut ChaCha12Rng) -> f64 {
    Distribution::<f64>::sample(&StandardNormal, rng)
}

/// Logistic treatment and linear outcome on `p` standard normal covariates.
pub fn random_dataset(n: usize, p: usize, rng: &mut ChaCha12Rng) -> Dataset64 {
    let b: Vec<f64> = (0..p).map(|_| rng.random_range(-0.6..0.6)).collect();
    let g: Vec<f64> = (0..p).map(|_| rng.random_range(-2.0..2.0)).collect();
    let mut x = Array2::<f64>::zeros((n, p));
    let mut z = Vec::with_capacity(n);
    let mut y = Array1::<f64>::zeros(n);
    for i in 0..n {
        let mut lin = 0.1;
        let mut mean = 1.0;
        for j in 0..p {
            let v = normal(rng);
            x[(i, j)] = v;
            lin += b[j] * v;
            mean += g[j] * v;
        }
        let t = rng.random::<f64>() < 1.0 / (1.0 + (-lin).exp());
        z.push(t);
        let effect = if t { 2.0 + 0.5 * x[(i, 0)] } else { 0.0 };
        y[i] = mean + effect + normal(rng);
    }
    Dataset64::new(y, z, x, names(p)).expect("finite data")
}

/// A dataset on which the propensity and both outcome models fit.
pub struct Instance {
    pub data: Dataset64,
    pub v: DesignMatrix64,
    pub w: DesignMatrix64,
    pub ps: PsFit64,
    pub or0: OrFit64,
    pub or1: OrFit64,
}

impl Instance {
    pub fn or_for(&self, estimand: Estimand) -> &OrFit64 {
        match estimand {
            Estimand::Atc => &self.or1,
            _ => &self.or0,
        }
    }
}

/// Draws until the fits succeed; separation is possible at the smallest sizes.
pub fn random_instance(seed: u64) -> Instance {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    loop {
        let n = rng.random_range(30..=200);
        let p = rng.random_range(2..=5);
        let data = random_dataset(n, p, &mut rng);
        let cols = names(p);
        let v = data.design(&cols).unwrap();
        let w = data.design(&cols).unwrap();
        let Ok(ps) = fit_logistic(&v, data.treatment()) else {
            continue;
        };
        let Ok(or0) = fit_ols(&w, data.outcome(), data.treatment(), Arm::Control) else {
            continue;
        };
        let Ok(or1) = fit_ols(&w, data.outcome(), data.treatment(), Arm::Treated) else {
            continue;
        };
        return Instance {
            data,
            v,
            w,
            ps,
            or0,
            or1,
        };
    }
}

/// `−N⁻¹ Σ ∂Ψ/∂θ'` by central differences with relative step `h`.
pub fn fd_jacobian<E: EstimatingEquations<f64>>(eqs: &E, h: f64) -> Array2<f64> {
    let theta = eqs.theta_hat().values;
    let d = theta.len();
    let n = eqs.n() as f64;
    let mut a = Array2::<f64>::zeros((d, d));
    for j in 0..d {
        let step = h * theta[j].abs().max(1.0);
        let mut up = theta.clone();
        let mut down = theta.clone();
        up[j] += step;
        down[j] -= step;
        let diff = eqs.psi(up.view()).sum_axis(ndarray::Axis(0))
            - eqs.psi(down.view()).sum_axis(ndarray::Axis(0));
        for k in 0..d {
            a[(k, j)] = -diff[k] / (2.0 * step * n);
        }
    }
    a
}

/// Gauss-Jordan inverse with partial pivoting.
pub fn gauss_jordan_inverse(a: &Array2<f64>) -> Array2<f64> {
    let d = a.nrows();
    let mut m = a.clone();
    let mut inv = Array2::<f64>::eye(d);
    for col in 0..d {
        let piv = (col..d)
            .max_by(|&i, &j| m[(i, col)].abs().total_cmp(&m[(j, col)].abs()))
            .unwrap();
        for k in 0..d {
            m.swap((col, k), (piv, k));
            inv.swap((col, k), (piv, k));
        }
        let p = m[(col, col)];
        assert!(p != 0.0, "singular matrix in oracle");
        for k in 0..d {
            m[(col, k)] /= p;
            inv[(col, k)] /= p;
        }
        for r in 0..d {
            if r != col {
                let f = m[(r, col)];
                for k in 0..d {
                    m[(r, k)] -= f * m[(col, k)];
                    inv[(r, k)] -= f * inv[(col, k)];
                }
            }
        }
    }
    inv
}

/// SE of `c'θ̂` from a numerical `A`, the Gram `B` and an explicit inverse.
pub fn numeric_sandwich_se<E: EstimatingEquations<f64>>(eqs: &E) -> f64 {
    let theta = eqs.theta_hat();
    let a = fd_jacobian(eqs, 1e-5);
    let b = assemble_b(&eqs.psi(theta.values.view()));
    let a_inv = gauss_jordan_inverse(&a);
    let sigma = a_inv.dot(&b).dot(&a_inv.t());
    let c = &theta.contrast;
    (c.dot(&sigma.dot(c)) / eqs.n() as f64).sqrt()
}

pub fn frobenius(a: &Array2<f64>) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn rel_error(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    frobenius(&(a - b)) / frobenius(b).max(f64::MIN_POSITIVE)
}

/// Minimum-norm least squares through `A⁺ = (A'A)⁻¹A'` for full column rank `A`.
pub fn pinv_solve(a: &Array2<f64>, y: &Array1<f64>) -> Array1<f64> {
    let ata = a.t().dot(a);
    gauss_jordan_inverse(&ata).dot(&a.t().dot(y))
}
