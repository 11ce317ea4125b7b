//! Exact Euclidean distance transform on a binary grid.
//!
//! Two separable passes: a 1D nearest-feature sweep down every column, then
//! the lower envelope of parabolas along every row. All distances are kept
//! as integer squared cell distances so the result is exact.

use crate::par;

/// Squared distance (in cells) from every cell to the nearest `true` cell.
/// Grid is row-major with `width` columns. Returns `None` when no cell is set.
pub fn squared_edt(features: &[bool], width: usize, height: usize) -> Option<Vec<u64>> {
    assert_eq!(features.len(), width * height);
    if !features.iter().any(|f| *f) {
        return None;
    }

    // Column pass, stored column-major: col[i * height + j].
    let mut col = vec![u64::MAX; width * height];
    par::for_each_chunk_mut(&mut col, height, |i, column| {
        let mut last: Option<usize> = None;
        for j in 0..height {
            if features[j * width + i] {
                last = Some(j);
            }
            if let Some(l) = last {
                column[j] = (j - l) as u64;
            }
        }
        last = None;
        for j in (0..height).rev() {
            if features[j * width + i] {
                last = Some(j);
            }
            if let Some(l) = last {
                let d = (l - j) as u64;
                if d < column[j] {
                    column[j] = d;
                }
            }
        }
        for v in column.iter_mut() {
            if *v != u64::MAX {
                *v *= *v;
            }
        }
    });

    let mut out = vec![0u64; width * height];
    par::for_each_chunk_mut(&mut out, width, |j, row| {
        let f: Vec<u64> = (0..width).map(|i| col[i * height + j]).collect();
        lower_envelope(&f, row);
    });
    Some(out)
}

/// 1D squared distance transform of a sampled function. `u64::MAX` entries
/// are treated as absent. At least one entry must be finite.
fn lower_envelope(f: &[u64], out: &mut [u64]) {
    let n = f.len();
    let mut v: Vec<usize> = Vec::with_capacity(n);
    let mut z: Vec<f64> = Vec::with_capacity(n + 1);
    let key = |q: usize| f[q] as f64 + (q * q) as f64;
    for q in (0..n).filter(|&q| f[q] != u64::MAX) {
        loop {
            match v.last() {
                None => {
                    v.push(q);
                    z.clear();
                    z.push(f64::NEG_INFINITY);
                    break;
                }
                Some(&p) => {
                    let s = (key(q) - key(p)) / (2.0 * (q as f64 - p as f64));
                    if s <= *z.last().unwrap() {
                        v.pop();
                        z.pop();
                        if v.is_empty() {
                            continue;
                        }
                    } else {
                        v.push(q);
                        z.push(s);
                        break;
                    }
                }
            }
        }
    }
    let mut k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while k + 1 < v.len() && z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let d = q.abs_diff(p) as u64;
        *o = d * d + f[p];
    }
}
