use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::qsim::BitString;

/// Linear subspace of `{0,1}^n` over GF(2), kept in reduced row-echelon form.
///
/// Rows are sorted by pivot (leftmost set bit) and every pivot column is zero
/// in all other rows, so two subspaces are equal iff their rows are equal.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Subspace {
    n: usize,
    rows: Vec<BitString>,
}

fn pivot(v: u64) -> u32 {
    63 - v.leading_zeros()
}

impl Subspace {
    /// Span of the given vectors. Zero and dependent generators are dropped.
    pub fn from_generators(n: usize, generators: &[BitString]) -> Self {
        let mut basis: Vec<u64> = Vec::new();
        for g in generators {
            assert_eq!(g.len(), n, "generator length differs from ambient dimension");
            let mut v = g.value();
            for b in &basis {
                if v >> pivot(*b) & 1 == 1 {
                    v ^= b;
                }
            }
            if v == 0 {
                continue;
            }
            let p = pivot(v);
            for b in basis.iter_mut() {
                if *b >> p & 1 == 1 {
                    *b ^= v;
                }
            }
            basis.push(v);
        }
        basis.sort_unstable_by(|a, b| b.cmp(a));
        Self {
            n,
            rows: basis
                .into_iter()
                .map(|v| BitString::new(v, n).expect("row fits ambient dimension"))
                .collect(),
        }
    }

    /// Uniformly random subspace of the given dimension.
    pub fn random<R: RngCore + ?Sized>(n: usize, dim: usize, rng: &mut R) -> Self {
        assert!(dim <= n && n <= 63, "invalid subspace shape {dim} in {n}");
        let mask = (1u64 << n) - 1;
        let mut gens = Vec::with_capacity(dim);
        let mut current = Self::from_generators(n, &[]);
        while current.dim() < dim {
            let v = BitString::new(rng.random::<u64>() & mask, n).expect("masked");
            if !current.contains(&v) {
                gens.push(v);
                current = Self::from_generators(n, &gens);
            }
        }
        current
    }

    pub fn ambient_dim(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    /// Canonical basis rows.
    pub fn basis(&self) -> &[BitString] {
        &self.rows
    }

    pub fn len(&self) -> u64 {
        1u64 << self.dim()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, v: &BitString) -> bool {
        if v.len() != self.n {
            return false;
        }
        let mut x = v.value();
        for r in &self.rows {
            if x >> pivot(r.value()) & 1 == 1 {
                x ^= r.value();
            }
        }
        x == 0
    }

    /// Orthogonal complement under the GF(2) dot product.
    pub fn dual(&self) -> Subspace {
        let pivots: Vec<u32> = self.rows.iter().map(|r| pivot(r.value())).collect();
        let gens: Vec<BitString> = (0..self.n as u32)
            .filter(|bit| !pivots.contains(bit))
            .map(|free| {
                let mut v = 1u64 << free;
                for (r, p) in self.rows.iter().zip(&pivots) {
                    if r.value() >> free & 1 == 1 {
                        v |= 1u64 << p;
                    }
                }
                BitString::new(v, self.n).expect("fits")
            })
            .collect();
        Subspace::from_generators(self.n, &gens)
    }

    /// Every member, in increasing numeric order.
    pub fn elements(&self) -> Vec<BitString> {
        let mut out: Vec<BitString> = (0..self.len())
            .map(|mask| {
                self.rows
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask >> i & 1 == 1)
                    .fold(BitString::zeros(self.n), |acc, (_, r)| acc.xor(r))
            })
            .collect();
        out.sort();
        out
    }
}
