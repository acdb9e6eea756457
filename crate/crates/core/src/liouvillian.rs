//! Real-valued generator matrices for the damped, driven dynamics.
//!
//! The equation of motion for the density matrix (drive Hamiltonian,
//! spontaneous decay between neighboring levels, extra coherence dephasing)
//! is linear and preserves Hermiticity and trace. Exploiting Hermiticity,
//! the d^2 complex matrix elements reduce to d^2 real coordinates: for each
//! index pair (r, c) with r < c the real and imaginary part of `rho_rc`,
//! followed by all populations `rho_rr` in a trailing block. The dynamics
//! then reads `dv/dt = M v` with a real sparse matrix `M`, and steady states
//! span the null space of `M`. Keeping populations at the end lets the
//! null-space back substitution stop early when only populations are needed.
//!
//! Dissipation model: each decay channel `a -> b` with rate `gamma` is a
//! standard jump term `gamma (J rho J^+ - {J^+ J, rho} / 2)` with
//! `J = |b><a|`; drive-phase noise adds `-Gamma` to the damping of each
//! affected coherence without touching populations (for the ladder, the 2-1
//! and 3-2 coherences damp with their own rates and the 3-1 coherence with
//! the sum, since it involves both drive photons).

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::physics::DriveParams;

/// Largest atom count for which a joint generator may be built.
pub const MAX_EXACT_ATOMS: usize = 4;

/// Index map between an n-atom density matrix and its real vector image.
///
/// Hilbert product states are indexed with atom 0 as the most significant
/// digit in base `levels`. Coherence slots come first (real part at the even
/// slot, imaginary part right after it, pairs ordered row-major over the
/// upper triangle), populations occupy the trailing `hilbert_dim` slots in
/// Hilbert index order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RealEmbedding {
    levels: usize,
    atoms: usize,
    hilbert: usize,
}

impl RealEmbedding {
    pub fn new(levels: usize, atoms: usize) -> Self {
        let hilbert = levels.pow(atoms as u32);
        RealEmbedding { levels, atoms, hilbert }
    }

    pub fn hilbert_dim(&self) -> usize {
        self.hilbert
    }

    /// Length of the real vector image, `hilbert_dim^2`.
    pub fn dim(&self) -> usize {
        self.hilbert * self.hilbert
    }

    /// First population slot; populations fill `[offset, dim)`.
    pub fn population_offset(&self) -> usize {
        self.dim() - self.hilbert
    }

    pub fn population_slot(&self, h: usize) -> usize {
        self.population_offset() + h
    }

    /// (real, imaginary) slots of the coherence `rho_rc`, requires `r < c`.
    pub fn coherence_slots(&self, r: usize, c: usize) -> (usize, usize) {
        debug_assert!(r < c && c < self.hilbert);
        let d = self.hilbert;
        let k = r * d - r * (r + 1) / 2 + (c - r - 1);
        (2 * k, 2 * k + 1)
    }

    /// Real image of a Hermitian matrix given row-major as `hilbert^2`
    /// complex entries.
    pub fn embed(&self, rho: &[Complex64]) -> Vec<f64> {
        let d = self.hilbert;
        assert_eq!(rho.len(), d * d);
        let mut v = vec![0.0; self.dim()];
        for r in 0..d {
            v[self.population_slot(r)] = rho[r * d + r].re;
            for c in r + 1..d {
                let (x, y) = self.coherence_slots(r, c);
                v[x] = rho[r * d + c].re;
                v[y] = rho[r * d + c].im;
            }
        }
        v
    }

    /// Inverse of [`embed`]: reconstructs the full Hermitian matrix.
    pub fn extract(&self, v: &[f64]) -> Vec<Complex64> {
        let d = self.hilbert;
        assert_eq!(v.len(), self.dim());
        let mut rho = vec![Complex64::new(0.0, 0.0); d * d];
        for r in 0..d {
            rho[r * d + r] = Complex64::new(v[self.population_slot(r)], 0.0);
            for c in r + 1..d {
                let (x, y) = self.coherence_slots(r, c);
                rho[r * d + c] = Complex64::new(v[x], v[y]);
                rho[c * d + r] = Complex64::new(v[x], -v[y]);
            }
        }
        rho
    }
}

/// Sparse real generator in coordinate form, entries sorted by column then
/// row (the order the triangular factorization consumes them in).
#[derive(Clone, Debug)]
pub struct GeneratorMatrix {
    dim: usize,
    population_offset: usize,
    entries: Vec<(u32, u32, f64)>,
}

impl GeneratorMatrix {
    /// Sorts column-major and merges duplicate coordinates.
    pub fn from_triplets(
        dim: usize,
        population_offset: usize,
        mut triplets: Vec<(u32, u32, f64)>,
    ) -> Self {
        triplets.sort_unstable_by(|a, b| (a.1, a.0).cmp(&(b.1, b.0)));
        let mut entries: Vec<(u32, u32, f64)> = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            match entries.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => entries.push((r, c, v)),
            }
        }
        entries.retain(|e| e.2 != 0.0);
        GeneratorMatrix { dim, population_offset, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Slots at and beyond this index are populations.
    pub fn population_offset(&self) -> usize {
        self.population_offset
    }

    pub fn entries(&self) -> &[(u32, u32, f64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// Dense matrix-vector product `y = M x`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(y.len(), self.dim);
        y.fill(0.0);
        for &(r, c, v) in &self.entries {
            y[r as usize] += v * x[c as usize];
        }
    }

    /// Largest entry magnitude; the scale reference for residual checks.
    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, e| m.max(e.2.abs()))
    }
}

/// Collects complex superoperator terms into real coordinate triplets.
struct Scatter {
    emb: RealEmbedding,
    triplets: Vec<(u32, u32, f64)>,
}

impl Scatter {
    fn new(emb: RealEmbedding) -> Self {
        Scatter { emb, triplets: Vec::new() }
    }

    /// Records `d rho_(tr,tc) / dt += w * rho_(sr,sc)`.
    ///
    /// Targets in the lower triangle are skipped: they are conjugates of
    /// tracked elements and receive their own (conjugate) contributions when
    /// the mirrored term is emitted.
    fn add(&mut self, tr: usize, tc: usize, sr: usize, sc: usize, w: Complex64) {
        if (w.re == 0.0 && w.im == 0.0) || tr > tc {
            return;
        }
        use std::cmp::Ordering::*;
        match sr.cmp(&sc) {
            Less => {
                let (x, y) = self.emb.coherence_slots(sr, sc);
                self.emit(tr, tc, x, w);
                self.emit(tr, tc, y, Complex64::new(-w.im, w.re)); // w * i
            }
            Greater => {
                let (x, y) = self.emb.coherence_slots(sc, sr);
                self.emit(tr, tc, x, w);
                self.emit(tr, tc, y, Complex64::new(w.im, -w.re)); // w * (-i)
            }
            Equal => self.emit(tr, tc, self.emb.population_slot(sr), w),
        }
    }

    /// Scatters one complex coefficient onto the real rows of the target.
    fn emit(&mut self, tr: usize, tc: usize, col: usize, z: Complex64) {
        if tr < tc {
            let (xr, yr) = self.emb.coherence_slots(tr, tc);
            if z.re != 0.0 {
                self.triplets.push((xr as u32, col as u32, z.re));
            }
            if z.im != 0.0 {
                self.triplets.push((yr as u32, col as u32, z.im));
            }
        } else if z.re != 0.0 {
            // population row: the imaginary parts of all contributions
            // cancel by hermiticity preservation and are dropped
            self.triplets.push((self.emb.population_slot(tr) as u32, col as u32, z.re));
        }
    }
}

/// Builds the real generator for `n` atoms with per-atom detunings and a
/// symmetric coupling matrix (row-major `n x n`, diagonal ignored).
pub fn build_generator(
    p: &DriveParams,
    deltas: &[f64],
    couplings: &[f64],
) -> Result<GeneratorMatrix> {
    p.validate()?;
    let n = deltas.len();
    if n == 0 {
        return Err(Error::InvalidParams("at least one atom is required".into()));
    }
    if n > MAX_EXACT_ATOMS {
        return Err(Error::SizeLimit { atoms: n, limit: MAX_EXACT_ATOMS });
    }
    if couplings.len() != n * n {
        return Err(Error::InvalidParams(format!(
            "coupling matrix must be {n} x {n}, got {} entries",
            couplings.len()
        )));
    }
    for &x in deltas.iter().chain(couplings) {
        if !x.is_finite() {
            return Err(Error::InvalidParams("non-finite detuning or coupling".into()));
        }
    }

    let d = p.scheme.levels();
    let top = p.scheme.top();
    let emb = RealEmbedding::new(d, n);
    let dh = emb.hilbert_dim();
    let stride: Vec<usize> = (0..n).map(|i| d.pow((n - 1 - i) as u32)).collect();
    let level_of = |h: usize, i: usize| (h / stride[i]) % d;

    // ladder amplitude between levels a and a+1
    let amp = |a: usize| -> f64 {
        match a {
            0 => p.omega12,
            1 => p.omega23,
            _ => 0.0,
        }
    };
    // total decay rate out of a level (level 1 decays with gamma21 in both
    // schemes; in the two-level reduction it is the top level)
    let decay_out = |l: usize| -> f64 {
        match l {
            1 => p.gamma21,
            2 => p.gamma32,
            _ => 0.0,
        }
    };
    // extra dephasing of a coherence between two distinct levels
    let deph = |a: usize, b: usize| -> f64 {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        match (lo, hi) {
            (0, 1) => p.deph21,
            (1, 2) => p.deph32,
            (0, 2) => p.deph21 + p.deph32,
            _ => 0.0,
        }
    };

    // Hamiltonian nonzeros in the Hilbert product basis
    let mut ham: Vec<(usize, usize, f64)> = Vec::new();
    for h in 0..dh {
        let mut diag = 0.0;
        for i in 0..n {
            if level_of(h, i) == top {
                diag -= deltas[i];
                for j in i + 1..n {
                    if level_of(h, j) == top {
                        diag += couplings[i * n + j];
                    }
                }
            }
        }
        if diag != 0.0 {
            ham.push((h, h, diag));
        }
        for i in 0..n {
            let li = level_of(h, i);
            if li + 1 < d {
                let a = amp(li);
                if a != 0.0 {
                    ham.push((h + stride[i], h, a));
                }
            }
            if li > 0 {
                let a = amp(li - 1);
                if a != 0.0 {
                    ham.push((h - stride[i], h, a));
                }
            }
        }
    }

    let mut sc = Scatter::new(emb);

    // commutator -i [H, rho]
    for &(hp, hq, val) in &ham {
        for b in 0..dh {
            sc.add(hp, b, hq, b, Complex64::new(0.0, -val));
        }
        for a in 0..dh {
            sc.add(a, hq, a, hp, Complex64::new(0.0, val));
        }
    }

    // jump gains J rho J^+ for each decay channel of each atom
    for i in 0..n {
        for from in 1..d {
            let rate = decay_out(from);
            if rate == 0.0 {
                continue;
            }
            let shift = stride[i]; // decay lowers the level by one
            for r in 0..dh {
                if level_of(r, i) != from {
                    continue;
                }
                for c in 0..dh {
                    if level_of(c, i) != from {
                        continue;
                    }
                    sc.add(r - shift, c - shift, r, c, Complex64::new(rate, 0.0));
                }
            }
        }
    }

    // anticommutator losses and pure dephasing, diagonal in the element basis
    for r in 0..dh {
        for c in r..dh {
            let mut loss = 0.0;
            for i in 0..n {
                let lr = level_of(r, i);
                let lc = level_of(c, i);
                loss += 0.5 * (decay_out(lr) + decay_out(lc));
                if lr != lc {
                    loss += deph(lr, lc);
                }
            }
            if loss != 0.0 {
                sc.add(r, c, r, c, Complex64::new(-loss, 0.0));
            }
        }
    }

    Ok(GeneratorMatrix::from_triplets(emb.dim(), emb.population_offset(), sc.triplets))
}

/// Generator of one atom whose detuning already absorbs all environment
/// shifts.
pub fn build_single_generator(p: &DriveParams, delta_eff: f64) -> Result<GeneratorMatrix> {
    build_generator(p, &[delta_eff], &[0.0])
}

/// Generator of one exactly-treated pair: per-atom effective detunings (the
/// partner excluded from each) plus the exact pair coupling `v`.
pub fn build_pair_generator(
    p: &DriveParams,
    delta_eff_1: f64,
    delta_eff_2: f64,
    v: f64,
) -> Result<GeneratorMatrix> {
    build_generator(p, &[delta_eff_1, delta_eff_2], &[0.0, v, v, 0.0])
}
