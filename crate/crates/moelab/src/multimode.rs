//! Multi-mode tensor products, partial traces, and number-conserving
//! two-mode gates applied through their photon-number sector blocks.
//!
//! Flat index convention: mode 0 is the slowest axis, matching Kronecker
//! products taken left to right.

use ndarray::{s, Array1, Array2};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::fock::DensityOperator;
use crate::numeric::{self, adjoint, eigvalsh, trace};

/// Density operator on a product of truncated Fock modes.
#[derive(Debug, Clone)]
pub struct MultiModeState {
    dims: Vec<usize>,
    mat: Array2<C64>,
}

impl MultiModeState {
    pub fn from_parts(dims: Vec<usize>, mat: Array2<C64>) -> Result<Self> {
        let total: usize = dims.iter().product();
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::InvalidDimension(0));
        }
        if mat.dim() != (total, total) {
            return Err(Error::Shape(format!(
                "joint matrix is {:?}, mode dims {:?} need {t}x{t}",
                mat.dim(),
                dims,
                t = total
            )));
        }
        Ok(Self { dims, mat })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn total_dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.mat
    }

    /// Product state of single-mode factors.
    pub fn tensor(parts: &[&DensityOperator]) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::InvalidDimension(0));
        }
        let mut mat = parts[0].matrix().clone();
        for p in &parts[1..] {
            mat = kron(&mat, p.matrix());
        }
        let dims = parts.iter().map(|p| p.dim()).collect();
        Ok(Self { dims, mat })
    }

    /// Total trace.
    pub fn trace(&self) -> C64 {
        trace(&self.mat)
    }

    /// Eigenvalue-based entropy of the whole joint state.
    pub fn entropy(&self) -> Result<f64> {
        let w = eigvalsh(&self.mat)?;
        let clamped: Vec<f64> = w.iter().map(|&x| x.max(0.0)).collect();
        Ok(numeric::shannon_entropy(&clamped))
    }

    /// Reduce to one mode, tracing the others out.
    pub fn reduce_to_mode(&self, mode: usize) -> Result<DensityOperator> {
        let k = self.dims.len();
        if mode >= k {
            return Err(Error::Shape(format!(
                "mode {mode} out of range for {k} modes"
            )));
        }
        let d = self.dims[mode];
        // stride of the kept mode and enumeration of spectator multi-indices
        let mut strides = vec![1usize; k];
        for i in (0..k - 1).rev() {
            strides[i] = strides[i + 1] * self.dims[i + 1];
        }
        let spect_total: usize = self
            .dims
            .iter()
            .enumerate()
            .filter(|&(m, _)| m != mode)
            .map(|(_, &dm)| dm)
            .product();
        let mut out = Array2::<C64>::zeros((d, d));
        for s_flat in 0..spect_total {
            // decode spectator multi-index into a flat base offset
            let mut rem = s_flat;
            let mut base = 0usize;
            for m in (0..k).rev() {
                if m == mode {
                    continue;
                }
                let nm = rem % self.dims[m];
                rem /= self.dims[m];
                base += nm * strides[m];
            }
            for i in 0..d {
                let ri = base + i * strides[mode];
                for j in 0..d {
                    out[(i, j)] += self.mat[(ri, base + j * strides[mode])];
                }
            }
        }
        Ok(DensityOperator::from_trusted(out))
    }

    /// Reduce to an ordered subset of modes.
    pub fn reduce_to_modes(&self, keep: &[usize]) -> Result<MultiModeState> {
        let k = self.dims.len();
        if keep.is_empty() || keep.iter().any(|&m| m >= k) {
            return Err(Error::Shape(format!(
                "keep set {keep:?} invalid for {k} modes"
            )));
        }
        let mut strides = vec![1usize; k];
        for i in (0..k - 1).rev() {
            strides[i] = strides[i + 1] * self.dims[i + 1];
        }
        let kept_dims: Vec<usize> = keep.iter().map(|&m| self.dims[m]).collect();
        let kept_total: usize = kept_dims.iter().product();
        let spect: Vec<usize> = (0..k).filter(|m| !keep.contains(m)).collect();
        let spect_total: usize = spect.iter().map(|&m| self.dims[m]).product();

        let flat_of = |kept_flat: usize, base: usize| -> usize {
            let mut rem = kept_flat;
            let mut idx = base;
            for pos in (0..keep.len()).rev() {
                let n = rem % kept_dims[pos];
                rem /= kept_dims[pos];
                idx += n * strides[keep[pos]];
            }
            idx
        };

        let mut out = Array2::<C64>::zeros((kept_total, kept_total));
        for s_flat in 0..spect_total {
            let mut rem = s_flat;
            let mut base = 0usize;
            for &m in spect.iter().rev() {
                let nm = rem % self.dims[m];
                rem /= self.dims[m];
                base += nm * strides[m];
            }
            for i in 0..kept_total {
                let ri = flat_of(i, base);
                for j in 0..kept_total {
                    out[(i, j)] += self.mat[(ri, flat_of(j, base))];
                }
            }
        }
        MultiModeState::from_parts(kept_dims, out)
    }

    /// Conjugate by a two-mode gate acting on modes (i, j), i != j.
    ///
    /// The joint tensor is permuted so the gate's modes lead, the gate's
    /// dense matrix is applied by two GEMMs, and the permutation is undone.
    pub fn apply_two_mode_gate(&mut self, gate: &TwoModeGate, i: usize, j: usize) -> Result<()> {
        let k = self.dims.len();
        if i >= k || j >= k || i == j {
            return Err(Error::Shape(format!(
                "gate modes ({i},{j}) invalid for {k} modes"
            )));
        }
        if self.dims[i] != gate.d_a || self.dims[j] != gate.d_b {
            return Err(Error::Shape(format!(
                "gate is {}x{}, modes have dims {}x{}",
                gate.d_a, gate.d_b, self.dims[i], self.dims[j]
            )));
        }
        if k == 2 && i == 0 && j == 1 {
            self.mat = gate.conjugate(&self.mat)?;
            return Ok(());
        }
        // permutation bringing modes (i, j) to the front
        let mut order: Vec<usize> = vec![i, j];
        order.extend((0..k).filter(|m| *m != i && *m != j));
        let permuted = permute_joint(&self.mat, &self.dims, &order);
        let d_ab = gate.d_a * gate.d_b;
        let rest: usize = self.total_dim() / d_ab;
        let u = gate.dense();
        // left multiply: rows grouped as (d_ab, rest)
        let x = permuted
            .into_shape_with_order((d_ab, rest * d_ab * rest))
            .expect("shape");
        let y = u.dot(&x);
        // right multiply: columns grouped as (d_ab, rest)
        let y = y
            .into_shape_with_order((d_ab * rest, d_ab, rest))
            .expect("shape");
        let yt = y.permuted_axes([0, 2, 1]);
        let yt = yt
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order((d_ab * rest * rest, d_ab))
            .expect("shape");
        let z = yt.dot(&u.t().mapv(|v| v.conj()));
        let z = z
            .into_shape_with_order((d_ab * rest, rest, d_ab))
            .expect("shape");
        let z = z.permuted_axes([0, 2, 1]);
        let z = z
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order((d_ab * rest, d_ab * rest))
            .expect("shape");
        // undo the mode permutation
        let perm_dims: Vec<usize> = order.iter().map(|&m| self.dims[m]).collect();
        let mut inverse = vec![0usize; k];
        for (pos, &m) in order.iter().enumerate() {
            inverse[m] = pos;
        }
        self.mat = permute_joint(&z, &perm_dims, &inverse);
        Ok(())
    }
}

/// Kronecker product of dense complex matrices.
pub fn kron(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    let (ra, ca) = a.dim();
    let (rb, cb) = b.dim();
    let mut out = Array2::zeros((ra * rb, ca * cb));
    for ia in 0..ra {
        for ja in 0..ca {
            let v = a[(ia, ja)];
            if v == C64::new(0.0, 0.0) {
                continue;
            }
            let mut block = out.slice_mut(s![ia * rb..(ia + 1) * rb, ja * cb..(ja + 1) * cb]);
            block.assign(&b.mapv(|w| w * v));
        }
    }
    out
}

/// Reorder the modes of a joint density matrix. `order[pos] = old mode index`.
fn permute_joint(mat: &Array2<C64>, dims: &[usize], order: &[usize]) -> Array2<C64> {
    let k = dims.len();
    let total: usize = dims.iter().product();
    let mut shape = Vec::with_capacity(2 * k);
    shape.extend_from_slice(dims);
    shape.extend_from_slice(dims);
    let tensor = mat
        .clone()
        .into_shape_with_order(ndarray::IxDyn(&shape))
        .expect("shape");
    let mut axes: Vec<usize> = order.to_vec();
    axes.extend(order.iter().map(|&m| m + k));
    let permuted = tensor.permuted_axes(ndarray::IxDyn(&axes));
    permuted
        .as_standard_layout()
        .into_owned()
        .into_shape_with_order((total, total))
        .expect("shape")
}

/// Which pair of single-mode photon numbers a gate's generator conserves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateKind {
    /// Conserves n_a + n_b (beam splitter).
    Sum,
    /// Conserves n_a - n_b (two-mode squeezer).
    Difference,
}

/// Two-mode Gaussian unitary stored as exact exponentials of the generator's
/// photon-number sector blocks. Complete sectors are exact; sectors clipped
/// by either cutoff are unitary on the retained subspace.
#[derive(Debug, Clone)]
pub struct TwoModeGate {
    pub d_a: usize,
    pub d_b: usize,
    pub kind: GateKind,
    /// (flat joint indices of the sector, unitary block on them)
    sectors: Vec<(Vec<usize>, Array2<C64>)>,
}

impl TwoModeGate {
    /// exp[theta (a^dag b - a b^dag)] with theta = arccos(sqrt(eta)):
    /// transmissivity-eta beam splitter.
    pub fn beam_splitter(eta: f64, d_a: usize, d_b: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::Domain(format!(
                "transmissivity must lie in [0,1], got {eta}"
            )));
        }
        let theta = eta.sqrt().acos();
        let mut sectors = Vec::new();
        for m in 0..(d_a + d_b - 1) {
            let lo = m.saturating_sub(d_b - 1);
            let hi = m.min(d_a - 1);
            let idx: Vec<usize> = (lo..=hi).map(|na| na * d_b + (m - na)).collect();
            let n = idx.len();
            // generator entry between (na, nb) and (na+1, nb-1): theta*sqrt((na+1) nb)
            let mut g = Array2::<C64>::zeros((n, n));
            for (r, na) in (lo..=hi).enumerate() {
                if na < hi {
                    let nb = m - na;
                    let v = theta * (((na + 1) * nb) as f64).sqrt();
                    g[(r + 1, r)] = C64::new(v, 0.0);
                    g[(r, r + 1)] = C64::new(-v, 0.0);
                }
            }
            let u = numeric::expm_antihermitian(&g)?;
            sectors.push((idx, u));
        }
        Ok(Self {
            d_a,
            d_b,
            kind: GateKind::Sum,
            sectors,
        })
    }

    /// exp[r (a^dag b^dag - a b)]: two-mode squeezer with gain cosh^2 r.
    pub fn two_mode_squeezer(r: f64, d_a: usize, d_b: usize) -> Result<Self> {
        if r < 0.0 {
            return Err(Error::Domain(format!(
                "squeeze parameter must be nonnegative, got {r}"
            )));
        }
        let mut sectors = Vec::new();
        for delta in -(d_b as isize - 1)..=(d_a as isize - 1) {
            // basis ordered by nb ascending; na = nb + delta
            let nb_lo = (-delta).max(0) as usize;
            let nb_hi_signed = (d_b as isize - 1).min(d_a as isize - 1 - delta);
            if nb_hi_signed < nb_lo as isize {
                continue;
            }
            let nb_hi = nb_hi_signed as usize;
            let idx: Vec<usize> = (nb_lo..=nb_hi)
                .map(|nb| ((nb as isize + delta) as usize) * d_b + nb)
                .collect();
            let n = idx.len();
            // a^dag b^dag couples (na, nb) -> (na+1, nb+1): r*sqrt((na+1)(nb+1))
            let mut g = Array2::<C64>::zeros((n, n));
            for (row, nb) in (nb_lo..nb_hi).enumerate() {
                let na = (nb as isize + delta) as usize;
                let v = r * (((na + 1) * (nb + 1)) as f64).sqrt();
                g[(row + 1, row)] = C64::new(v, 0.0);
                g[(row, row + 1)] = C64::new(-v, 0.0);
            }
            let u = numeric::expm_antihermitian(&g)?;
            sectors.push((idx, u));
        }
        Ok(Self {
            d_a,
            d_b,
            kind: GateKind::Difference,
            sectors,
        })
    }

    /// Dense matrix on the joint space (use only at modest sizes).
    pub fn dense(&self) -> Array2<C64> {
        let n = self.d_a * self.d_b;
        let mut u = Array2::zeros((n, n));
        for (idx, block) in &self.sectors {
            for (r, &ir) in idx.iter().enumerate() {
                for (c, &ic) in idx.iter().enumerate() {
                    u[(ir, ic)] = block[(r, c)];
                }
            }
        }
        u
    }

    /// U X U^dag computed sector-block by sector-block.
    pub fn conjugate(&self, x: &Array2<C64>) -> Result<Array2<C64>> {
        let n = self.d_a * self.d_b;
        if x.dim() != (n, n) {
            return Err(Error::Shape(format!(
                "joint matrix is {:?}, gate needs {n}x{n}",
                x.dim()
            )));
        }
        let mut out = Array2::<C64>::zeros((n, n));
        for (idx_r, u_r) in &self.sectors {
            for (idx_c, u_c) in &self.sectors {
                // gather X[idx_r, idx_c]
                let mut sub = Array2::<C64>::zeros((idx_r.len(), idx_c.len()));
                for (r, &ir) in idx_r.iter().enumerate() {
                    for (c, &ic) in idx_c.iter().enumerate() {
                        sub[(r, c)] = x[(ir, ic)];
                    }
                }
                let res = u_r.dot(&sub).dot(&adjoint(u_c));
                for (r, &ir) in idx_r.iter().enumerate() {
                    for (c, &ic) in idx_c.iter().enumerate() {
                        out[(ir, ic)] = res[(r, c)];
                    }
                }
            }
        }
        Ok(out)
    }

    /// Matrix element <n_a', n_b'| U |n_a, n_b>, zero outside the sectors.
    /// Sectors are stored in key order, giving O(1) lookup.
    pub fn element(&self, nap: usize, nbp: usize, na: usize, nb: usize) -> C64 {
        let zero = C64::new(0.0, 0.0);
        if nap >= self.d_a || na >= self.d_a || nbp >= self.d_b || nb >= self.d_b {
            return zero;
        }
        match self.kind {
            GateKind::Sum => {
                let s = na + nb;
                if nap + nbp != s {
                    return zero;
                }
                let lo = s.saturating_sub(self.d_b - 1);
                let block = &self.sectors[s].1;
                block[(nap - lo, na - lo)]
            }
            GateKind::Difference => {
                let delta = na as isize - nb as isize;
                if nap as isize - nbp as isize != delta {
                    return zero;
                }
                let pos = (delta + self.d_b as isize - 1) as usize;
                let nb_lo = (-delta).max(0) as usize;
                let block = &self.sectors[pos].1;
                block[(nbp - nb_lo, nb - nb_lo)]
            }
        }
    }

    /// Largest deviation of U^dag U from the identity over all sector blocks.
    pub fn unitarity_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for (_, u) in &self.sectors {
            let g = adjoint(u).dot(u);
            for i in 0..g.nrows() {
                for j in 0..g.ncols() {
                    let want = if i == j { 1.0 } else { 0.0 };
                    let dev = (g[(i, j)] - C64::new(want, 0.0)).norm();
                    if dev > worst {
                        worst = dev;
                    }
                }
            }
        }
        worst
    }

}

/// Column-stochastic check helper: populations of a joint diagonal.
pub fn joint_populations(m: &MultiModeState) -> Array1<f64> {
    m.matrix().diag().mapv(|z| z.re)
}
