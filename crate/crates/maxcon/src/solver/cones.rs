//! Cone algebra for the product of a nonnegative orthant and second-order
//! cones: Jordan products, boundary steps and Nesterov-Todd scalings.
//!
//! Vectors over the cone are stored flat: the orthant coordinates first,
//! then each second-order cone block `(z₀, z₁)` with `z₀ ≥ ‖z₁‖₂`.

use nalgebra::{DMatrix, DVector};

/// Shape of the cone product: orthant size plus one dimension per SOC block.
#[derive(Debug, Clone)]
pub(crate) struct ConeLayout {
    pub lin: usize,
    pub soc: Vec<usize>,
}

impl ConeLayout {
    pub fn total(&self) -> usize {
        self.lin + self.soc.iter().sum::<usize>()
    }

    /// Barrier degree: one per orthant coordinate, one per SOC block.
    pub fn degree(&self) -> usize {
        self.lin + self.soc.len()
    }

    pub fn identity(&self) -> DVector<f64> {
        let mut e = DVector::zeros(self.total());
        for i in 0..self.lin {
            e[i] = 1.0;
        }
        let mut off = self.lin;
        for &m in &self.soc {
            e[off] = 1.0;
            off += m;
        }
        e
    }

    /// Smallest distance of `z` to the cone boundary, negative outside.
    pub fn min_margin(&self, z: &DVector<f64>) -> f64 {
        let mut margin = f64::INFINITY;
        for i in 0..self.lin {
            margin = margin.min(z[i]);
        }
        let mut off = self.lin;
        for &m in &self.soc {
            let tail = z.rows(off + 1, m - 1).norm();
            margin = margin.min(z[off] - tail);
            off += m;
        }
        margin
    }

    /// Shifts `z` along the cone identity until strictly interior.
    pub fn shift_interior(&self, z: &mut DVector<f64>) {
        let margin = self.min_margin(z);
        if margin <= 0.0 {
            let step = 1.0 - margin;
            for i in 0..self.lin {
                z[i] += step;
            }
            let mut off = self.lin;
            for &m in &self.soc {
                z[off] += step;
                off += m;
            }
        }
    }

    /// Jordan product `a ∘ b`.
    pub fn jordan_mul(&self, a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.total());
        for i in 0..self.lin {
            out[i] = a[i] * b[i];
        }
        let mut off = self.lin;
        for &m in &self.soc {
            let a0 = a[off];
            let b0 = b[off];
            let mut dot = a0 * b0;
            for j in 1..m {
                dot += a[off + j] * b[off + j];
            }
            out[off] = dot;
            for j in 1..m {
                out[off + j] = a0 * b[off + j] + b0 * a[off + j];
            }
            off += m;
        }
        out
    }

    /// Solves `a ∘ z = b` for `z`; `a` must be interior.
    pub fn jordan_div(&self, b: &DVector<f64>, a: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.total());
        for i in 0..self.lin {
            out[i] = b[i] / a[i];
        }
        let mut off = self.lin;
        for &m in &self.soc {
            let a0 = a[off];
            let mut tail_sq = 0.0;
            let mut adotb = 0.0;
            for j in 1..m {
                tail_sq += a[off + j] * a[off + j];
                adotb += a[off + j] * b[off + j];
            }
            let sigma = a0 * a0 - tail_sq;
            let z0 = (a0 * b[off] - adotb) / sigma;
            out[off] = z0;
            for j in 1..m {
                out[off + j] = (b[off + j] - z0 * a[off + j]) / a0;
            }
            off += m;
        }
        out
    }

    /// Largest `t` with `z + t·dz` still in the cone (`∞` when unbounded).
    /// `z` must be interior.
    pub fn max_step(&self, z: &DVector<f64>, dz: &DVector<f64>) -> f64 {
        let mut step = f64::INFINITY;
        for i in 0..self.lin {
            if dz[i] < 0.0 {
                step = step.min(-z[i] / dz[i]);
            }
        }
        let mut off = self.lin;
        for &m in &self.soc {
            // First positive root of (z₀+t·d₀)² − ‖z₁+t·d₁‖², which starts
            // positive at t = 0 for interior z.
            let mut a = dz[off] * dz[off];
            let mut b = z[off] * dz[off];
            let mut c = z[off] * z[off];
            for j in 1..m {
                a -= dz[off + j] * dz[off + j];
                b -= z[off + j] * dz[off + j];
                c -= z[off + j] * z[off + j];
            }
            b *= 2.0;
            step = step.min(smallest_positive_root(a, b, c));
            off += m;
        }
        step
    }
}

/// Smallest positive root of `a·t² + b·t + c = 0` with `c > 0`; infinity
/// when no positive root exists.
fn smallest_positive_root(a: f64, b: f64, c: f64) -> f64 {
    let eps = 1e-14 * (a.abs() + b.abs() + c.abs()).max(1.0);
    if a.abs() <= eps {
        if b < 0.0 {
            return -c / b;
        }
        return f64::INFINITY;
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return f64::INFINITY;
    }
    let sq = disc.sqrt();
    let q = -0.5 * (b + b.signum() * sq);
    let (r1, r2) = if q == 0.0 {
        (0.0, 0.0)
    } else {
        (q / a, c / q)
    };
    let mut best = f64::INFINITY;
    for r in [r1, r2] {
        if r > 0.0 {
            best = best.min(r);
        }
    }
    best
}

/// Nesterov-Todd scaling of one SOC block: `W = η·V(w̄)` with
/// `V(w̄) = [w̄₀ w̄₁ᵀ; w̄₁ I + w̄₁w̄₁ᵀ/(1+w̄₀)]` and `w̄ᵀJw̄ = 1`.
#[derive(Debug, Clone)]
pub(crate) struct SocScaling {
    pub eta: f64,
    pub wbar: DVector<f64>,
}

/// NT scaling of the full cone product, with the scaled point
/// `λ̃ = W·λ = W⁻¹·ζ` cached.
#[derive(Debug, Clone)]
pub(crate) struct Scaling {
    pub lin_w: DVector<f64>,
    pub soc: Vec<SocScaling>,
    pub lambda: DVector<f64>,
}

fn hh_apply(wbar: &DVector<f64>, v: &mut [f64]) {
    // v ← V(w̄)·v in place.
    let m = wbar.len();
    let w0 = wbar[0];
    let mut tail_dot = 0.0;
    for j in 1..m {
        tail_dot += wbar[j] * v[j];
    }
    let v0 = v[0];
    v[0] = w0 * v0 + tail_dot;
    let coef = v0 + tail_dot / (1.0 + w0);
    for j in 1..m {
        v[j] += coef * wbar[j];
    }
}

impl Scaling {
    /// Computes the NT scaling for interior `(ζ, λ)`; `None` when either
    /// point has drifted numerically out of the cone interior.
    pub fn compute(layout: &ConeLayout, zeta: &DVector<f64>, lambda: &DVector<f64>) -> Option<Self> {
        let mut lin_w = DVector::zeros(layout.lin);
        let mut scaled = DVector::zeros(layout.total());
        for i in 0..layout.lin {
            if zeta[i] <= 0.0 || lambda[i] <= 0.0 {
                return None;
            }
            lin_w[i] = (zeta[i] / lambda[i]).sqrt();
            scaled[i] = (zeta[i] * lambda[i]).sqrt();
        }
        let mut soc = Vec::with_capacity(layout.soc.len());
        let mut off = layout.lin;
        for &m in &layout.soc {
            let z = zeta.rows(off, m);
            let l = lambda.rows(off, m);
            let jz = z[0] * z[0] - z.rows(1, m - 1).norm_squared();
            let jl = l[0] * l[0] - l.rows(1, m - 1).norm_squared();
            if jz <= 0.0 || jl <= 0.0 || z[0] <= 0.0 || l[0] <= 0.0 {
                return None;
            }
            let a = jz.sqrt();
            let b = jl.sqrt();
            let eta = (a / b).sqrt();
            let gamma = (0.5 * (1.0 + z.dot(&l) / (a * b))).sqrt();
            let mut wbar = DVector::zeros(m);
            wbar[0] = (z[0] / a + l[0] / b) / (2.0 * gamma);
            for j in 1..m {
                wbar[j] = (z[j] / a - l[j] / b) / (2.0 * gamma);
            }
            // λ̃ block = η·V(w̄)·λ.
            let mut block: Vec<f64> = l.iter().copied().collect();
            hh_apply(&wbar, &mut block);
            for (j, v) in block.iter().enumerate() {
                scaled[off + j] = eta * v;
            }
            soc.push(SocScaling { eta, wbar });
            off += m;
        }
        Some(Self {
            lin_w,
            soc,
            lambda: scaled,
        })
    }

    /// `W·v`.
    pub fn apply_w(&self, layout: &ConeLayout, v: &DVector<f64>) -> DVector<f64> {
        let mut out = v.clone();
        for i in 0..layout.lin {
            out[i] *= self.lin_w[i];
        }
        let mut off = layout.lin;
        for (k, &m) in layout.soc.iter().enumerate() {
            let s = &self.soc[k];
            let mut block: Vec<f64> = (0..m).map(|j| v[off + j]).collect();
            hh_apply(&s.wbar, &mut block);
            for (j, val) in block.iter().enumerate() {
                out[off + j] = s.eta * val;
            }
            off += m;
        }
        out
    }

    /// `W⁻¹·v`, using `V(w̄)⁻¹ = V(Jw̄)`.
    pub fn apply_w_inv(&self, layout: &ConeLayout, v: &DVector<f64>) -> DVector<f64> {
        let mut out = v.clone();
        for i in 0..layout.lin {
            out[i] /= self.lin_w[i];
        }
        let mut off = layout.lin;
        for (k, &m) in layout.soc.iter().enumerate() {
            let s = &self.soc[k];
            let jw = reflect(&s.wbar);
            let mut block: Vec<f64> = (0..m).map(|j| v[off + j]).collect();
            hh_apply(&jw, &mut block);
            for (j, val) in block.iter().enumerate() {
                out[off + j] = val / s.eta;
            }
            off += m;
        }
        out
    }

    /// `W⁻²·v`, using `W⁻² = η⁻²·(2(Jw̄)(Jw̄)ᵀ − J)`.
    pub fn apply_w2_inv(&self, layout: &ConeLayout, v: &DVector<f64>) -> DVector<f64> {
        let mut out = v.clone();
        for i in 0..layout.lin {
            out[i] /= self.lin_w[i] * self.lin_w[i];
        }
        let mut off = layout.lin;
        for (k, &m) in layout.soc.iter().enumerate() {
            let s = &self.soc[k];
            let jw = reflect(&s.wbar);
            let mut dot = 0.0;
            for j in 0..m {
                dot += jw[j] * v[off + j];
            }
            let e2 = s.eta * s.eta;
            out[off] = (2.0 * jw[0] * dot - v[off]) / e2;
            for j in 1..m {
                out[off + j] = (2.0 * jw[j] * dot + v[off + j]) / e2;
            }
            off += m;
        }
        out
    }

    /// Dense `W⁻²` of one SOC block, for KKT assembly.
    pub fn soc_w2_inv_matrix(&self, k: usize, m: usize) -> DMatrix<f64> {
        let s = &self.soc[k];
        let jw = reflect(&s.wbar);
        let e2 = s.eta * s.eta;
        let mut out = DMatrix::zeros(m, m);
        for r in 0..m {
            for c in 0..m {
                out[(r, c)] = 2.0 * jw[r] * jw[c] / e2;
            }
        }
        out[(0, 0)] -= 1.0 / e2;
        for j in 1..m {
            out[(j, j)] += 1.0 / e2;
        }
        out
    }
}

fn reflect(wbar: &DVector<f64>) -> DVector<f64> {
    let mut jw = wbar.clone();
    for j in 1..jw.len() {
        jw[j] = -jw[j];
    }
    jw
}
