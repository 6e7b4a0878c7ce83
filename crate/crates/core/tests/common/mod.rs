#![allow(dead_code)]

use bellforge::inequality::SymmetricBellInequality;
use bellforge::quantum::Mat2;
use bellforge::Rational;

pub type Mat8 = [[f64; 8]; 8];

pub const ID: Mat2 = [[1.0, 0.0], [0.0, 1.0]];

pub fn kron3(a: &Mat2, b: &Mat2, c: &Mat2) -> Mat8 {
    let mut out = [[0.0; 8]; 8];
    for r in 0..8 {
        for s in 0..8 {
            let (r0, r1, r2) = (r >> 2, (r >> 1) & 1, r & 1);
            let (s0, s1, s2) = (s >> 2, (s >> 1) & 1, s & 1);
            out[r][s] = a[r0][s0] * b[r1][s1] * c[r2][s2];
        }
    }
    out
}

pub fn sandwich(bra: &[f64; 8], ket: &[f64; 8], op: &Mat8) -> f64 {
    (0..8).map(|r| (0..8).map(|s| bra[r] * op[r][s] * ket[s]).sum::<f64>()).sum()
}

pub fn proj(phi: f64) -> Mat2 {
    let (c, s) = (phi.cos(), phi.sin());
    [[(1.0 - c) / 2.0, -s / 2.0], [-s / 2.0, (1.0 + c) / 2.0]]
}

/// (𝓜⁽²⁾, 𝓜⁽³⁾) summed over every ordered index tuple and party pair with
/// Kronecker products built here.
pub fn oracle_split(ineq: &SymmetricBellInequality, state: &[f64; 8], angles: &[f64]) -> (f64, f64) {
    let m = ineq.m();
    let p: Vec<Mat2> = angles.iter().map(|&a| proj(a)).collect();
    let mut m2 = 0.0;
    let mut m3 = 0.0;
    for i in 0..m {
        for j in 0..m {
            let c = ineq.pair(i, j).to_f64();
            for op in [kron3(&p[i], &p[j], &ID), kron3(&p[i], &ID, &p[j]), kron3(&ID, &p[i], &p[j])] {
                m2 += c * sandwich(state, state, &op);
            }
            for k in 0..m {
                m3 += ineq.triple(i, j, k).to_f64() * sandwich(state, state, &kron3(&p[i], &p[j], &p[k]));
            }
        }
    }
    (m2, m3)
}

/// Classical value with every ordered index tuple written out.
pub fn oracle_classical(ineq: &SymmetricBellInequality, a: &[u8], b: &[u8], c: &[u8]) -> Rational {
    let m = ineq.m();
    let mut v = Rational::from_integer(0);
    for i in 0..m {
        for j in 0..m {
            let hits = (a[i] * b[j] + a[i] * c[j] + b[i] * c[j]) as i64;
            v += &(&ineq.pair(i, j) * &Rational::from_integer(hits));
            for k in 0..m {
                let hit = (a[i] * b[j] * c[k]) as i64;
                v += &(&ineq.triple(i, j, k) * &Rational::from_integer(hit));
            }
        }
    }
    v
}

pub fn bits(m: usize, w: u32) -> Vec<u8> {
    (0..m).map(|i| ((w >> i) & 1) as u8).collect()
}

pub fn random_inequality(m: usize, pairs: &[i64], triples: &[i64]) -> SymmetricBellInequality {
    let p: Vec<((usize, usize), Rational)> = bellforge::inequality::sorted_pairs(m)
        .zip(pairs.iter().cycle())
        .map(|(k, &v)| (k, Rational::from_integer(v)))
        .collect();
    let t: Vec<((usize, usize, usize), Rational)> = bellforge::inequality::sorted_triples(m)
        .zip(triples.iter().cycle())
        .map(|(k, &v)| (k, Rational::from_integer(v)))
        .collect();
    SymmetricBellInequality::new(m, p, t).unwrap()
}
