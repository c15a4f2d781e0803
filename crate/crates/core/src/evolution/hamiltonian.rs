use num_complex::Complex64;

use super::grid::WavePacketGrid;
use crate::error::{Error, Result};
use crate::lattice::{validate_hopping_set, ForceSpec, HoppingSet, Offset};

/// `H = -Σ J_m |l><l+m| - Σ (F·m) |m><m|` on an `L x L` grid with open boundaries.
///
/// The operator is real symmetric, so real and imaginary parts of a state are propagated
/// independently. States are kept in zero-padded row-major buffers of width `L + 2 pad`,
/// where `pad` is the hopping range; the halo stays zero, which realises the hard wall.
#[derive(Debug, Clone)]
pub struct TiltedHamiltonian {
    side: usize,
    pad: usize,
    width: usize,
    /// `(|flat offset|, J)` per `{m, -m}` pair.
    pairs: Vec<(usize, f64)>,
    /// `-F·m` on the padded layout, zero in the halo.
    diag: Vec<f64>,
    spectral_bound: f64,
}

impl TiltedHamiltonian {
    pub fn new(hoppings: &HoppingSet, force: &ForceSpec, side: usize) -> Result<Self> {
        if side.is_multiple_of(2) || side < 3 {
            return Err(Error::param(
                "L",
                format!("grid side must be odd and >= 3, got {side}"),
            ));
        }
        let report = validate_hopping_set(hoppings, 0.0, None);
        if !report.symmetry_violations.is_empty() {
            let v = &report.symmetry_violations[0];
            return Err(Error::AsymmetricHoppings(format!(
                "J{:?} = {} but partner is {:?}",
                v.offset, v.value, v.partner
            )));
        }
        let range = hoppings.range();
        if range as usize >= side {
            return Err(Error::HoppingRange { range, side });
        }
        let pad = range as usize;
        let width = side + 2 * pad;
        let pairs = hoppings
            .pairs()
            .map(|(m, j)| {
                let flat = i64::from(m.m1) * width as i64 + i64::from(m.m2);
                (flat.unsigned_abs() as usize, j)
            })
            .collect();
        let h = (side / 2) as i32;
        let mut diag = vec![0.0; width * width];
        let mut max_tilt: f64 = 0.0;
        for m1 in -h..=h {
            for m2 in -h..=h {
                let tilt = force.dot(Offset::new(m1, m2));
                max_tilt = max_tilt.max(tilt.abs());
                let i = (m1 + h) as usize + pad;
                let j = (m2 + h) as usize + pad;
                diag[i * width + j] = -tilt;
            }
        }
        Ok(TiltedHamiltonian {
            side,
            pad,
            width,
            pairs,
            diag,
            spectral_bound: 2.0 * hoppings.total_abs() + max_tilt,
        })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    /// `2 Σ |J_m| + max_grid |F·m|`, an upper bound on the spectral radius.
    pub fn spectral_bound(&self) -> f64 {
        self.spectral_bound
    }

    pub(crate) fn padded_len(&self) -> usize {
        self.width * self.width
    }

    pub(crate) fn pack(&self, psi: &WavePacketGrid, re: &mut [f64], im: &mut [f64]) {
        assert_eq!(psi.side(), self.side, "grid size mismatch");
        re.fill(0.0);
        im.fill(0.0);
        for (r, row) in psi.amplitudes().chunks_exact(self.side).enumerate() {
            let base = (r + self.pad) * self.width + self.pad;
            for (j, a) in row.iter().enumerate() {
                re[base + j] = a.re;
                im[base + j] = a.im;
            }
        }
    }

    pub(crate) fn unpack(&self, re: &[f64], im: &[f64]) -> WavePacketGrid {
        let mut amps = Vec::with_capacity(self.side * self.side);
        for r in 0..self.side {
            let base = (r + self.pad) * self.width + self.pad;
            amps.extend((0..self.side).map(|j| Complex64::new(re[base + j], im[base + j])));
        }
        WavePacketGrid::from_amplitudes(self.side, amps).expect("side already validated")
    }

    /// `dst = scale * H src` on the interior; the halo of `dst` is left untouched.
    pub(crate) fn apply_real(&self, src: &[f64], dst: &mut [f64], scale: f64) {
        debug_assert_eq!(src.len(), self.padded_len());
        debug_assert_eq!(dst.len(), self.padded_len());
        let mut row = vec![0.0; self.side];
        for r in 0..self.side {
            let base = self.row_base(r);
            self.dispatch_row(src, &mut row, base, scale);
            dst[base..base + self.side].copy_from_slice(&row);
        }
    }

    pub(crate) fn row_base(&self, r: usize) -> usize {
        (r + self.pad) * self.width + self.pad
    }

    fn dispatch_row(&self, src: &[f64], out: &mut [f64], base: usize, scale: f64) {
        #[cfg(target_arch = "x86_64")]
        {
            if std::is_x86_feature_detected!("avx512f") {
                // SAFETY: the required CPU feature was detected at runtime.
                unsafe { row_avx512(src, out, &self.diag, base, &self.pairs, scale) };
                return;
            }
            if std::is_x86_feature_detected!("avx2") {
                // SAFETY: as above.
                unsafe { row_avx2(src, out, &self.diag, base, &self.pairs, scale) };
                return;
            }
        }
        row_kernel(src, out, &self.diag, base, &self.pairs, scale);
    }

    /// Derivative `(H im, -H re)` of `dψ/dt = -i H ψ`, handed to `visit` one interior row at a
    /// time as `(base, d_re, d_im)`. Rows are visited in order.
    ///
    /// Always inlined so that it picks up the instruction set of the calling function.
    #[inline(always)]
    pub(crate) fn derivative_rows(
        &self,
        re: &[f64],
        im: &[f64],
        rows: &mut [Vec<f64>; 2],
        mut visit: impl FnMut(usize, &[f64], &[f64]),
    ) {
        let [d_re, d_im] = rows;
        d_re.resize(self.side, 0.0);
        d_im.resize(self.side, 0.0);
        for r in 0..self.side {
            let base = self.row_base(r);
            row_kernel(im, d_re, &self.diag, base, &self.pairs, 1.0);
            row_kernel(re, d_im, &self.diag, base, &self.pairs, -1.0);
            visit(base, d_re, d_im);
        }
    }

    /// `H ψ` as a new grid.
    pub fn apply(&self, psi: &WavePacketGrid) -> WavePacketGrid {
        let n = self.padded_len();
        let (mut re, mut im) = (vec![0.0; n], vec![0.0; n]);
        let (mut hre, mut him) = (vec![0.0; n], vec![0.0; n]);
        self.pack(psi, &mut re, &mut im);
        self.apply_real(&re, &mut hre, 1.0);
        self.apply_real(&im, &mut him, 1.0);
        self.unpack(&hre, &him)
    }

    /// `<ψ|H|ψ>`; the imaginary part vanishes up to rounding.
    pub fn expectation(&self, psi: &WavePacketGrid) -> Complex64 {
        let hpsi = self.apply(psi);
        psi.inner(&hpsi)
    }

    /// Real energy `<ψ|H|ψ>` from padded buffers, reusing `scratch`.
    pub(crate) fn energy_padded(&self, re: &[f64], im: &[f64], scratch: &mut [f64]) -> f64 {
        let mut e = 0.0;
        for part in [re, im] {
            self.apply_real(part, scratch, 1.0);
            e += self.interior_dot(part, scratch);
        }
        e
    }

    fn interior_dot(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut s = 0.0;
        for r in 0..self.side {
            let base = self.row_base(r);
            s += a[base..base + self.side]
                .iter()
                .zip(&b[base..base + self.side])
                .map(|(x, y)| x * y)
                .sum::<f64>();
        }
        s
    }
}

const CHUNK: usize = 16;

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f")]
unsafe fn row_avx512(
    src: &[f64],
    out: &mut [f64],
    diag: &[f64],
    base: usize,
    pairs: &[(usize, f64)],
    scale: f64,
) {
    row_kernel(src, out, diag, base, pairs, scale);
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn row_avx2(
    src: &[f64],
    out: &mut [f64],
    diag: &[f64],
    base: usize,
    pairs: &[(usize, f64)],
    scale: f64,
) {
    row_kernel(src, out, diag, base, pairs, scale);
}

/// One interior row `out = scale * (diag * src - Σ J (src[i+o] + src[i-o]))` starting at `base`.
///
/// Chunks keep the accumulator in registers; a row that is not a multiple of the chunk width
/// ends with a chunk overlapping its predecessor, which recomputes identical values. No fused
/// multiply-add is used, so the result does not depend on the instruction set.
#[inline(always)]
fn row_kernel(
    src: &[f64],
    out: &mut [f64],
    diag: &[f64],
    base: usize,
    pairs: &[(usize, f64)],
    scale: f64,
) {
    let len = out.len();
    if len < CHUNK {
        for (jj, o) in out.iter_mut().enumerate() {
            let i = base + jj;
            let mut acc = diag[i] * src[i];
            for &(off, jm) in pairs {
                acc -= jm * (src[i + off] + src[i - off]);
            }
            *o = scale * acc;
        }
        return;
    }
    let mut j = 0;
    loop {
        let i = base + j;
        let s: &[f64; CHUNK] = src[i..i + CHUNK].try_into().unwrap();
        let d: &[f64; CHUNK] = diag[i..i + CHUNK].try_into().unwrap();
        let mut acc = [0.0; CHUNK];
        for t in 0..CHUNK {
            acc[t] = d[t] * s[t];
        }
        for &(o, jm) in pairs {
            let up: &[f64; CHUNK] = src[i + o..i + o + CHUNK].try_into().unwrap();
            let dn: &[f64; CHUNK] = src[i - o..i - o + CHUNK].try_into().unwrap();
            for t in 0..CHUNK {
                acc[t] -= jm * (up[t] + dn[t]);
            }
        }
        let dst: &mut [f64; CHUNK] = (&mut out[j..j + CHUNK]).try_into().unwrap();
        for t in 0..CHUNK {
            dst[t] = scale * acc[t];
        }
        if j + CHUNK == len {
            break;
        }
        j = (j + CHUNK).min(len - CHUNK);
    }
}

/// `H ψ` for hoppings `J` and force `F`, with open boundaries.
pub fn apply_hamiltonian(
    hoppings: &HoppingSet,
    force: &ForceSpec,
    psi: &WavePacketGrid,
) -> Result<WavePacketGrid> {
    Ok(TiltedHamiltonian::new(hoppings, force, psi.side())?.apply(psi))
}
