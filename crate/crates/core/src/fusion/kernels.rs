//! 3×3 convolution + bias + ReLU kernels.
//!
//! The portable kernel is a direct convolution computed in register tiles
//! of `P` pixels by `NV` vectors of 16 output channels. The AVX-512 kernel
//! uses Winograd F(4×4, 3×3): 6×6 input patches and kernels are moved into
//! a transformed domain where the convolution becomes 36 independent
//! channel-mixing products, then 4×4 output blocks are transformed back.
//!
//! In both, each output value accumulates its terms in a fixed order that
//! does not depend on tiling or scheduling.

use super::engine::{Backend, PackedLayer, LANES};

/// One input tensor of a convolution whose channels start at `w_off` in the
/// layer's input channel numbering.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Src<'a> {
    pub data: &'a [f32],
    pub c: usize,
    /// Floats per padded row.
    pub row: usize,
    pub w_off: usize,
}

struct Job<'a> {
    srcs: &'a [Src<'a>],
    layer: &'a PackedLayer,
    h: usize,
    w: usize,
    /// Padded width of the output tensor in pixels.
    out_pw: usize,
}

/// Convolves `srcs` (concatenated along channels) and writes the interior
/// of the zero-bordered output tensor `out`.
pub(crate) fn conv3x3_relu(
    backend: Backend,
    srcs: &[Src<'_>],
    layer: &PackedLayer,
    out: &mut [f32],
    out_pw: usize,
    h: usize,
    w: usize,
) {
    let (ph, pw) = (h.div_ceil(4) * 4 + 2, w.div_ceil(4) * 4 + 2);
    assert!(out_pw == pw && out.len() == ph * pw * layer.ocp);
    for s in srcs {
        assert!(s.row == pw * s.c && s.data.len() == ph * s.row);
        assert!(s.w_off + s.c <= layer.ic);
    }
    assert_eq!(layer.weights.len(), 9 * layer.ic * layer.ocp);
    let job = Job { srcs, layer, h, w, out_pw };
    match backend {
        Backend::Portable => portable::run(&job, out),
        Backend::Avx512 => {
            assert!(avx512_available(), "avx512f kernel requested on a CPU without it");
            assert_eq!(layer.wino.len(), 36 * layer.ic * layer.ocp);
            #[cfg(target_arch = "x86_64")]
            // SAFETY: feature presence checked just above; shapes asserted.
            unsafe {
                avx512::run(&job, out)
            }
        }
    }
}

#[cfg(target_arch = "x86_64")]
pub(crate) fn avx512_available() -> bool {
    use core::arch::x86_64::{__cpuid, __cpuid_count, _xgetbv};

    #[target_feature(enable = "xsave")]
    unsafe fn xcr0() -> u64 {
        _xgetbv(0)
    }

    #[allow(unused_unsafe)]
    // SAFETY: cpuid is always available on x86-64; xgetbv only runs once
    // the OS reports XSAVE support.
    unsafe {
        if __cpuid(0).eax < 7 {
            return false;
        }
        if __cpuid(1).ecx & (1 << 27) == 0 {
            return false;
        }
        // SSE, AVX, opmask and both upper ZMM state components
        if xcr0() & 0xe6 != 0xe6 {
            return false;
        }
        __cpuid_count(7, 0).ebx & (1 << 16) != 0
    }
}

#[cfg(not(target_arch = "x86_64"))]
pub(crate) fn avx512_available() -> bool {
    false
}

mod portable {
    use super::{Job, LANES};

    pub(super) fn run(job: &Job<'_>, out: &mut [f32]) {
        match job.layer.ocp / LANES {
            1 => rows::<8, 1>(job, out),
            2 => rows::<4, 2>(job, out),
            _ => rows::<2, 4>(job, out),
        }
    }

    fn rows<const P: usize, const NV: usize>(job: &Job<'_>, out: &mut [f32]) {
        let ocp = job.layer.ocp;
        for oc0 in (0..ocp).step_by(NV * LANES) {
            let nv_here = ((ocp - oc0) / LANES).min(NV);
            for y in 0..job.h {
                let mut x = 0;
                while x < job.w {
                    if nv_here == NV && x + P <= job.w {
                        tile::<P, NV>(job, out, y, x, oc0);
                        x += P;
                    } else {
                        for v in 0..nv_here {
                            tile::<1, 1>(job, out, y, x, oc0 + v * LANES);
                        }
                        x += 1;
                    }
                }
            }
        }
    }

    #[inline(always)]
    fn tile<const P: usize, const NV: usize>(job: &Job<'_>, out: &mut [f32], y: usize, x0: usize, oc0: usize) {
        let l = job.layer;
        let (ic, ocp) = (l.ic, l.ocp);
        let mut acc = [[[0.0f32; LANES]; NV]; P];
        for p in acc.iter_mut() {
            for (v, a) in p.iter_mut().enumerate() {
                a.copy_from_slice(&l.bias[oc0 + v * LANES..oc0 + (v + 1) * LANES]);
            }
        }
        for s in job.srcs {
            for ky in 0..3 {
                for kx in 0..3 {
                    let base = (y + ky) * s.row + (x0 + kx) * s.c;
                    let wbase = ((ky * 3 + kx) * ic + s.w_off) * ocp + oc0;
                    for i in 0..s.c {
                        let wrow = &l.weights[wbase + i * ocp..wbase + i * ocp + NV * LANES];
                        for (p, accp) in acc.iter_mut().enumerate() {
                            let a = s.data[base + p * s.c + i];
                            for (v, accv) in accp.iter_mut().enumerate() {
                                let wv: &[f32; LANES] = wrow[v * LANES..(v + 1) * LANES].try_into().unwrap();
                                for k in 0..LANES {
                                    accv[k] += a * wv[k];
                                }
                            }
                        }
                    }
                }
            }
        }
        let row = job.out_pw * ocp;
        for (p, accp) in acc.iter().enumerate() {
            let o = (y + 1) * row + (x0 + p + 1) * ocp + oc0;
            for (v, accv) in accp.iter().enumerate() {
                for k in 0..LANES {
                    out[o + v * LANES + k] = accv[k].max(0.0);
                }
            }
        }
    }
}

/// Winograd-domain kernel `G·g·Gᵀ`, row-major 6×6.
pub(crate) fn winograd_kernel(g: &[[f64; 3]; 3]) -> [f64; 36] {
    const G: [[f64; 3]; 6] = [
        [0.25, 0.0, 0.0],
        [-1.0 / 6.0, -1.0 / 6.0, -1.0 / 6.0],
        [-1.0 / 6.0, 1.0 / 6.0, -1.0 / 6.0],
        [1.0 / 24.0, 1.0 / 12.0, 1.0 / 6.0],
        [1.0 / 24.0, -1.0 / 12.0, 1.0 / 6.0],
        [0.0, 0.0, 1.0],
    ];
    let mut tmp = [[0.0; 3]; 6];
    for i in 0..6 {
        for j in 0..3 {
            tmp[i][j] = (0..3).map(|k| G[i][k] * g[k][j]).sum();
        }
    }
    let mut u = [0.0; 36];
    for i in 0..6 {
        for j in 0..6 {
            u[i * 6 + j] = (0..3).map(|k| tmp[i][k] * G[j][k]).sum();
        }
    }
    u
}

#[cfg(target_arch = "x86_64")]
mod avx512 {
    use alloc::vec;
    use core::arch::x86_64::*;

    use super::{Job, LANES};

    /// `Bᵀ·d` for one 6-vector.
    #[target_feature(enable = "avx512f")]
    #[inline]
    fn bt(d: [__m512; 6]) -> [__m512; 6] {
        let four = _mm512_set1_ps(4.0);
        let five = _mm512_set1_ps(5.0);
        let two = _mm512_set1_ps(2.0);
        let d13 = _mm512_sub_ps(d[1], d[3]);
        let d42 = _mm512_sub_ps(d[4], d[2]);
        [
            _mm512_fmadd_ps(four, d[0], _mm512_fnmadd_ps(five, d[2], d[4])),
            _mm512_fnmadd_ps(four, _mm512_add_ps(d[1], d[2]), _mm512_add_ps(d[3], d[4])),
            _mm512_fmadd_ps(four, _mm512_sub_ps(d[1], d[2]), _mm512_sub_ps(d[4], d[3])),
            _mm512_fnmadd_ps(two, d13, d42),
            _mm512_fmadd_ps(two, d13, d42),
            _mm512_fmadd_ps(four, d[1], _mm512_fnmadd_ps(five, d[3], d[5])),
        ]
    }

    /// `Aᵀ·m` for one 6-vector.
    #[target_feature(enable = "avx512f")]
    #[inline]
    fn at(m: [__m512; 6]) -> [__m512; 4] {
        let a = _mm512_add_ps(m[1], m[2]);
        let b = _mm512_sub_ps(m[1], m[2]);
        let c = _mm512_add_ps(m[3], m[4]);
        let d = _mm512_sub_ps(m[3], m[4]);
        [
            _mm512_add_ps(_mm512_add_ps(m[0], a), c),
            _mm512_fmadd_ps(_mm512_set1_ps(2.0), d, b),
            _mm512_fmadd_ps(_mm512_set1_ps(4.0), c, a),
            _mm512_add_ps(_mm512_fmadd_ps(_mm512_set1_ps(8.0), d, b), m[5]),
        ]
    }

    #[target_feature(enable = "avx512f")]
    pub(super) unsafe fn run(job: &Job<'_>, out: &mut [f32]) {
        if job.layer.oc <= NARROW_MAX && job.srcs.iter().all(|s| s.c % LANES == 0) {
            return narrow(job, out);
        }
        match job.layer.ocp / LANES {
            1 => blocks::<16, 1>(job, out),
            2 => blocks::<12, 2>(job, out),
            3 => blocks::<8, 3>(job, out),
            _ => blocks::<6, 4>(job, out),
        }
    }

    /// Layers with at most this many outputs vectorize over input channels
    /// instead of padding the outputs to a full vector.
    const NARROW_MAX: usize = 4;

    /// Direct convolution with one vector of input channels per tap,
    /// reduced across lanes at the end. Pays off when most of a padded
    /// output vector would be wasted.
    #[target_feature(enable = "avx512f")]
    unsafe fn narrow(job: &Job<'_>, out: &mut [f32]) {
        let l = job.layer;
        let (ic, ocp, oc) = (l.ic, l.ocp, l.oc);
        // [o][tap][ic]
        let mut wt = vec![0.0f32; oc * 9 * ic];
        for o in 0..oc {
            for tap in 0..9 {
                for i in 0..ic {
                    wt[(o * 9 + tap) * ic + i] = l.weights[(tap * ic + i) * ocp + o];
                }
            }
        }
        let row = job.out_pw * ocp;
        let op = out.as_mut_ptr();
        for y in 0..job.h {
            for x in 0..job.w {
                let mut acc = [_mm512_setzero_ps(); NARROW_MAX];
                for s in job.srcs {
                    for tap in 0..9 {
                        let (ky, kx) = (tap / 3, tap % 3);
                        let base = s.data.as_ptr().add((y + ky) * s.row + (x + kx) * s.c);
                        for c0 in (0..s.c).step_by(LANES) {
                            let a = _mm512_loadu_ps(base.add(c0));
                            let wi = tap * ic + s.w_off + c0;
                            for (o, acc_o) in acc.iter_mut().enumerate().take(oc) {
                                let wv = _mm512_loadu_ps(wt.as_ptr().add(o * 9 * ic + wi));
                                *acc_o = _mm512_fmadd_ps(a, wv, *acc_o);
                            }
                        }
                    }
                }
                let o_px = op.add((y + 1) * row + (x + 1) * ocp);
                for (o, acc_o) in acc.iter().enumerate().take(oc) {
                    let v = _mm512_reduce_add_ps(*acc_o) + l.bias[o];
                    *o_px.add(o) = v.max(0.0);
                }
                for o in oc..ocp {
                    *o_px.add(o) = 0.0;
                }
            }
        }
    }

    /// Processes runs of up to `tb` 4×4 output tiles from one tile row at a
    /// time so the transformed inputs and products stay in cache.
    #[target_feature(enable = "avx512f")]
    unsafe fn blocks<const P: usize, const NV: usize>(job: &Job<'_>, out: &mut [f32]) {
        let l = job.layer;
        let (ic, ocp) = (l.ic, l.ocp);
        let tb = P * (36 / P).max(1);
        let (th, tw) = (job.h.div_ceil(4), job.w.div_ceil(4));
        // odd strides between the 36 planes keep them out of each other's
        // cache sets
        let (vs, ms) = (tb * ic + LANES, tb * ocp + LANES);
        let mut v = vec![0.0f32; 36 * vs];
        let mut m = vec![0.0f32; 36 * ms];
        for ty in 0..th {
            for tx0 in (0..tw).step_by(tb) {
                let nt = tb.min(tw - tx0);
                input_transform(job, ty, tx0, nt, vs, &mut v);
                for pos in 0..36 {
                    let vp = v.as_ptr().add(pos * vs);
                    let up = l.wino.as_ptr().add(pos * ic * ocp);
                    let mp = m.as_mut_ptr().add(pos * ms);
                    let mut oc0 = 0;
                    while oc0 < ocp {
                        if oc0 + NV * LANES <= ocp {
                            gemm_run::<P, NV>(vp, up.add(oc0), mp.add(oc0), nt, ic, ocp);
                            oc0 += NV * LANES;
                        } else {
                            gemm_run::<P, 1>(vp, up.add(oc0), mp.add(oc0), nt, ic, ocp);
                            oc0 += LANES;
                        }
                    }
                }
                output_transform(job, ty, tx0, nt, ms, &m, out);
            }
        }
    }

    #[target_feature(enable = "avx512f")]
    #[inline]
    unsafe fn gemm_run<const P: usize, const NV: usize>(vp: *const f32, up: *const f32, mp: *mut f32, nt: usize, ic: usize, ocp: usize) {
        let mut t = 0;
        while t + P <= nt {
            gemm::<P, NV>(vp.add(t * ic), up, mp.add(t * ocp), ic, ocp);
            t += P;
        }
        while t + 4 <= nt {
            gemm::<4, NV>(vp.add(t * ic), up, mp.add(t * ocp), ic, ocp);
            t += 4;
        }
        while t < nt {
            gemm::<1, NV>(vp.add(t * ic), up, mp.add(t * ocp), ic, ocp);
            t += 1;
        }
    }

    /// `m[p][oc] = Σ_k v[p][k]·u[k][oc]` for `P` tiles and `NV·16` outputs.
    #[target_feature(enable = "avx512f")]
    #[inline]
    unsafe fn gemm<const P: usize, const NV: usize>(vp: *const f32, up: *const f32, mp: *mut f32, ic: usize, ocp: usize) {
        let mut acc = [[_mm512_setzero_ps(); NV]; P];
        for k in 0..ic {
            let mut wv = [_mm512_setzero_ps(); NV];
            for v in 0..NV {
                wv[v] = _mm512_loadu_ps(up.add(k * ocp + v * LANES));
            }
            for p in 0..P {
                let a = _mm512_set1_ps(*vp.add(p * ic + k));
                for v in 0..NV {
                    acc[p][v] = _mm512_fmadd_ps(a, wv[v], acc[p][v]);
                }
            }
        }
        for p in 0..P {
            for v in 0..NV {
                _mm512_storeu_ps(mp.add(p * ocp + v * LANES), acc[p][v]);
            }
        }
    }

    #[target_feature(enable = "avx512f")]
    unsafe fn input_transform(job: &Job<'_>, ty: usize, tx0: usize, nt: usize, vs: usize, v: &mut [f32]) {
        let ic = job.layer.ic;
        let vp = v.as_mut_ptr();
        for t in 0..nt {
            for s in job.srcs {
                let base = s.data.as_ptr().add(4 * ty * s.row + 4 * (tx0 + t) * s.c);
                let mut c0 = 0;
                while c0 < s.c {
                    let lanes = (s.c - c0).min(LANES);
                    let mask: __mmask16 = if lanes == LANES { 0xffff } else { (1u16 << lanes) - 1 };
                    let mut d = [[_mm512_setzero_ps(); 6]; 6];
                    for (i, row) in d.iter_mut().enumerate() {
                        for (j, e) in row.iter_mut().enumerate() {
                            *e = _mm512_maskz_loadu_ps(mask, base.add(i * s.row + j * s.c + c0));
                        }
                    }
                    let mut tmp = [[_mm512_setzero_ps(); 6]; 6];
                    for j in 0..6 {
                        let col = bt([d[0][j], d[1][j], d[2][j], d[3][j], d[4][j], d[5][j]]);
                        for i in 0..6 {
                            tmp[i][j] = col[i];
                        }
                    }
                    for i in 0..6 {
                        let row = bt(tmp[i]);
                        for j in 0..6 {
                            let dst = vp.add((i * 6 + j) * vs + t * ic + s.w_off + c0);
                            _mm512_mask_storeu_ps(dst, mask, row[j]);
                        }
                    }
                    c0 += LANES;
                }
            }
        }
    }

    #[target_feature(enable = "avx512f")]
    unsafe fn output_transform(job: &Job<'_>, ty: usize, tx0: usize, nt: usize, ms: usize, m: &[f32], out: &mut [f32]) {
        let l = job.layer;
        let ocp = l.ocp;
        let row = job.out_pw * ocp;
        let zero = _mm512_setzero_ps();
        let op = out.as_mut_ptr();
        let rows = (job.h - 4 * ty).min(4);
        for t in 0..nt {
            let tx = tx0 + t;
            let cols = (job.w - 4 * tx).min(4);
            for oc0 in (0..ocp).step_by(LANES) {
                let bias = _mm512_loadu_ps(l.bias.as_ptr().add(oc0));
                let mut mm = [[zero; 6]; 6];
                for (i, r) in mm.iter_mut().enumerate() {
                    for (j, e) in r.iter_mut().enumerate() {
                        *e = _mm512_loadu_ps(m.as_ptr().add((i * 6 + j) * ms + t * ocp + oc0));
                    }
                }
                let mut tmp = [[zero; 6]; 4];
                for j in 0..6 {
                    let col = at([mm[0][j], mm[1][j], mm[2][j], mm[3][j], mm[4][j], mm[5][j]]);
                    for i in 0..4 {
                        tmp[i][j] = col[i];
                    }
                }
                for (i, r) in tmp.iter().enumerate().take(rows) {
                    let y = at(*r);
                    for (j, yv) in y.iter().enumerate().take(cols) {
                        let o = op.add((4 * ty + i + 1) * row + (4 * tx + j + 1) * ocp + oc0);
                        _mm512_storeu_ps(o, _mm512_max_ps(_mm512_add_ps(*yv, bias), zero));
                    }
                }
            }
        }
    }
}
