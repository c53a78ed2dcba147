//! Dense LU with partial pivoting and a block-tridiagonal solver with an
//! optional periodic wrap-around.

/// LU factors of a square row-major matrix.
#[derive(Debug, Clone)]
pub struct DenseLu {
    n: usize,
    lu: Vec<f64>,
    piv: Vec<usize>,
}

impl DenseLu {
    /// Returns `None` for a (numerically) singular matrix.
    pub fn factor(n: usize, a: &[f64]) -> Option<Self> {
        let mut lu = a.to_vec();
        let mut piv: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, big) = (k..n)
                .map(|i| (i, lu[i * n + k].abs()))
                .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if !(big > 0.0) || !big.is_finite() {
                return None;
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                piv.swap(k, p);
            }
            let d = lu[k * n + k];
            for i in k + 1..n {
                let l = lu[i * n + k] / d;
                lu[i * n + k] = l;
                if l != 0.0 {
                    for j in k + 1..n {
                        lu[i * n + j] -= l * lu[k * n + j];
                    }
                }
            }
        }
        Some(DenseLu { n, lu, piv })
    }

    /// Solves in place for `m` right-hand sides stored row-major (`n × m`).
    pub fn solve_many(&self, b: &mut [f64], m: usize) {
        let n = self.n;
        let mut tmp = vec![0.0; n * m];
        for i in 0..n {
            tmp[i * m..(i + 1) * m].copy_from_slice(&b[self.piv[i] * m..(self.piv[i] + 1) * m]);
        }
        for i in 0..n {
            for k in 0..i {
                let l = self.lu[i * n + k];
                if l != 0.0 {
                    for c in 0..m {
                        tmp[i * m + c] -= l * tmp[k * m + c];
                    }
                }
            }
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                let u = self.lu[i * n + k];
                if u != 0.0 {
                    for c in 0..m {
                        tmp[i * m + c] -= u * tmp[k * m + c];
                    }
                }
            }
            let d = self.lu[i * n + i];
            for c in 0..m {
                tmp[i * m + c] /= d;
            }
        }
        b.copy_from_slice(&tmp);
    }
}

/// `c ← c − a·b` for row-major `a (r×k)`, `b (k×m)`, `c (r×m)`.
fn sub_mul(r: usize, k: usize, m: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    for i in 0..r {
        for p in 0..k {
            let x = a[i * k + p];
            if x != 0.0 {
                for j in 0..m {
                    c[i * m + j] -= x * b[p * m + j];
                }
            }
        }
    }
}

/// `Aᵢ xᵢ₋₁ + Bᵢ xᵢ + Cᵢ xᵢ₊₁ = dᵢ` for `n` cells with `b × b` blocks. When
/// periodic, `A₀` couples to the last cell and `Cₙ₋₁` to the first.
#[derive(Debug, Clone)]
pub struct BlockTridiag {
    pub n: usize,
    pub b: usize,
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BlockTridiag {
    pub fn zeros(n: usize, b: usize) -> Self {
        let len = n * b * b;
        BlockTridiag { n, b, lower: vec![0.0; len], diag: vec![0.0; len], upper: vec![0.0; len] }
    }

    fn at(b: usize, cell: usize, r: usize, c: usize) -> usize {
        cell * b * b + r * b + c
    }

    pub fn add_lower(&mut self, cell: usize, r: usize, c: usize, v: f64) {
        self.lower[Self::at(self.b, cell, r, c)] += v;
    }
    pub fn add_diag(&mut self, cell: usize, r: usize, c: usize, v: f64) {
        self.diag[Self::at(self.b, cell, r, c)] += v;
    }
    pub fn add_upper(&mut self, cell: usize, r: usize, c: usize, v: f64) {
        self.upper[Self::at(self.b, cell, r, c)] += v;
    }

    fn block<'a>(v: &'a [f64], b: usize, i: usize) -> &'a [f64] {
        &v[i * b * b..(i + 1) * b * b]
    }

    /// Block Thomas on cells `0..n` ignoring the wrap-around blocks, for
    /// `m` right-hand sides (`d` is `n·b × m`, overwritten by the solution).
    fn solve_open(&self, n: usize, d: &mut [f64], m: usize) -> Option<()> {
        let b = self.b;
        let bb = b * b;
        let mut lus = Vec::with_capacity(n);
        // Modified upper blocks B'^{-1} C and right-hand sides.
        let mut cprime = vec![0.0; n * bb];
        for i in 0..n {
            let mut bi = Self::block(&self.diag, b, i).to_vec();
            if i > 0 {
                let a = Self::block(&self.lower, b, i);
                sub_mul(b, b, b, a, &cprime[(i - 1) * bb..i * bb], &mut bi);
                let (prev, cur) = d.split_at_mut(i * b * m);
                sub_mul(b, b, m, a, &prev[(i - 1) * b * m..], &mut cur[..b * m]);
            }
            let lu = DenseLu::factor(b, &bi)?;
            if i + 1 < n {
                let cp = &mut cprime[i * bb..(i + 1) * bb];
                cp.copy_from_slice(Self::block(&self.upper, b, i));
                lu.solve_many(cp, b);
            }
            lu.solve_many(&mut d[i * b * m..(i + 1) * b * m], m);
            lus.push(lu);
        }
        for i in (0..n.saturating_sub(1)).rev() {
            let (cur, next) = d.split_at_mut((i + 1) * b * m);
            sub_mul(b, b, m, &cprime[i * bb..(i + 1) * bb], &next[..b * m], &mut cur[i * b * m..]);
        }
        Some(())
    }

    /// Solves for one right-hand side; `None` if a pivot block is singular.
    pub fn solve(&self, rhs: &[f64], periodic: bool) -> Option<Vec<f64>> {
        let (n, b) = (self.n, self.b);
        let mut x = rhs.to_vec();
        if !periodic || n < 3 {
            self.solve_open(n, &mut x, 1)?;
            return Some(x);
        }
        // Unknowns 0..n−1 in terms of the last cell: x_i = y_i + Z_i x_last.
        let m = 1 + b;
        let inner = n - 1;
        let mut rhs_many = vec![0.0; inner * b * m];
        for i in 0..inner {
            for r in 0..b {
                rhs_many[(i * b + r) * m] = rhs[i * b + r];
            }
        }
        let a0 = Self::block(&self.lower, b, 0);
        let cl = Self::block(&self.upper, b, inner - 1);
        for r in 0..b {
            for c in 0..b {
                rhs_many[r * m + 1 + c] -= a0[r * b + c];
                rhs_many[((inner - 1) * b + r) * m + 1 + c] -= cl[r * b + c];
            }
        }
        self.solve_open(inner, &mut rhs_many, m)?;
        let y = |i: usize, r: usize| rhs_many[(i * b + r) * m];
        let z = |i: usize, r: usize, c: usize| rhs_many[(i * b + r) * m + 1 + c];
        let al = Self::block(&self.lower, b, n - 1);
        let bl = Self::block(&self.diag, b, n - 1);
        let cn = Self::block(&self.upper, b, n - 1);
        let mut s = bl.to_vec();
        let mut t: Vec<f64> = (0..b).map(|r| rhs[(n - 1) * b + r]).collect();
        for r in 0..b {
            for p in 0..b {
                let (ap, cp) = (al[r * b + p], cn[r * b + p]);
                t[r] -= ap * y(inner - 1, p) + cp * y(0, p);
                for c in 0..b {
                    s[r * b + c] += ap * z(inner - 1, p, c) + cp * z(0, p, c);
                }
            }
        }
        DenseLu::factor(b, &s)?.solve_many(&mut t, 1);
        for i in 0..inner {
            for r in 0..b {
                let mut v = y(i, r);
                for c in 0..b {
                    v += z(i, r, c) * t[c];
                }
                x[i * b + r] = v;
            }
        }
        x[(n - 1) * b..].copy_from_slice(&t);
        Some(x)
    }

    /// `y = M x`, used to verify solves.
    pub fn apply(&self, x: &[f64], periodic: bool) -> Vec<f64> {
        let (n, b) = (self.n, self.b);
        let mut y = vec![0.0; n * b];
        for i in 0..n {
            let mut add = |blk: &[f64], j: usize| {
                for r in 0..b {
                    for c in 0..b {
                        y[i * b + r] += blk[r * b + c] * x[j * b + c];
                    }
                }
            };
            add(Self::block(&self.diag, b, i), i);
            if i > 0 {
                add(Self::block(&self.lower, b, i), i - 1);
            } else if periodic {
                add(Self::block(&self.lower, b, i), n - 1);
            }
            if i + 1 < n {
                add(Self::block(&self.upper, b, i), i + 1);
            } else if periodic {
                add(Self::block(&self.upper, b, i), 0);
            }
        }
        y
    }
}
