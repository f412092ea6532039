//! Prime-field arithmetic in Montgomery form for moduli up to 256 bits.
//!
//! Only as many 64-bit limbs as the modulus needs are processed, so a 64-bit
//! field costs a single-limb multiply per operation.

use num_bigint::BigUint;

use crate::macau::U256;

/// Field element in Montgomery representation, always reduced below p.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Fe(U256);

#[derive(Clone, Debug)]
pub(crate) struct FieldCtx {
    p: U256,
    limbs: usize,
    /// -p^{-1} mod 2^64
    inv: u64,
    r2: Fe,
    one: Fe,
    // Tonelli-Shanks constants: p - 1 = q * 2^s, c = z^q for a non-residue z
    ts_s: u32,
    ts_q: U256,
    ts_c: Fe,
}

impl FieldCtx {
    /// `p` must be an odd prime greater than 2.
    pub(crate) fn new(p: U256) -> Self {
        assert!(p.bit(0) && p > U256::from_u64(2), "modulus must be an odd prime");
        let limbs = (p.bits() as usize).div_ceil(64);
        let p0 = p.limbs()[0];
        let mut inv = 1u64;
        for _ in 0..6 {
            inv = inv.wrapping_mul(2u64.wrapping_sub(p0.wrapping_mul(inv)));
        }
        let inv = inv.wrapping_neg();

        let pb = BigUint::from_bytes_be(&p.to_be_bytes());
        let r = BigUint::from(1u8) << (64 * limbs);
        let to_u256 = |v: &BigUint| U256::from_be_slice(&v.to_bytes_be()).expect("reduced below p");
        let r2 = to_u256(&((&r * &r) % &pb));
        let one = to_u256(&(&r % &pb));

        let mut ctx = FieldCtx {
            p,
            limbs,
            inv,
            r2: Fe(r2),
            one: Fe(one),
            ts_s: 0,
            ts_q: U256::ZERO,
            ts_c: Fe(U256::ZERO),
        };

        let p_minus_1 = p.wrapping_sub(&U256::ONE);
        let mut q = p_minus_1;
        let mut s = 0;
        while !q.bit(0) {
            q = q.shr1();
            s += 1;
        }
        let mut z = 2u64;
        let c = loop {
            let zf = ctx.small(z);
            if ctx.legendre(&zf) == -1 {
                break ctx.pow(&zf, &q);
            }
            z += 1;
        };
        ctx.ts_s = s;
        ctx.ts_q = q;
        ctx.ts_c = c;
        ctx
    }

    pub(crate) fn zero(&self) -> Fe {
        Fe(U256::ZERO)
    }

    pub(crate) fn one(&self) -> Fe {
        self.one
    }

    /// `x` must already be reduced below p.
    pub(crate) fn to_mont(&self, x: &U256) -> Fe {
        debug_assert!(*x < self.p);
        self.mul(&Fe(*x), &self.r2)
    }

    pub(crate) fn small(&self, x: u64) -> Fe {
        let v = if self.limbs == 1 { x % self.p.low_u64() } else { x };
        self.to_mont(&U256::from_u64(v))
    }

    pub(crate) fn to_int(&self, a: &Fe) -> U256 {
        self.mul(a, &Fe(U256::ONE)).0
    }

    pub(crate) fn is_zero(&self, a: &Fe) -> bool {
        a.0.is_zero()
    }

    pub(crate) fn add(&self, a: &Fe, b: &Fe) -> Fe {
        if self.limbs == 1 {
            let p = self.p.0[0];
            let (s, carry) = a.0 .0[0].overflowing_add(b.0 .0[0]);
            let s = if carry || s >= p { s.wrapping_sub(p) } else { s };
            return Fe(U256::from_u64(s));
        }
        let (s, carry) = a.0.overflowing_add(&b.0);
        if carry || s >= self.p {
            Fe(s.wrapping_sub(&self.p))
        } else {
            Fe(s)
        }
    }

    pub(crate) fn sub(&self, a: &Fe, b: &Fe) -> Fe {
        if self.limbs == 1 {
            let (d, borrow) = a.0 .0[0].overflowing_sub(b.0 .0[0]);
            let d = if borrow { d.wrapping_add(self.p.0[0]) } else { d };
            return Fe(U256::from_u64(d));
        }
        let (d, borrow) = a.0.overflowing_sub(&b.0);
        if borrow {
            Fe(d.wrapping_add(&self.p))
        } else {
            Fe(d)
        }
    }

    pub(crate) fn double(&self, a: &Fe) -> Fe {
        self.add(a, a)
    }

    /// Montgomery product a*b*R^{-1} mod p (CIOS).
    #[allow(clippy::needless_range_loop)]
    pub(crate) fn mul(&self, a: &Fe, b: &Fe) -> Fe {
        if self.limbs == 1 {
            return self.mul_single(a.0 .0[0], b.0 .0[0]);
        }
        let n = self.limbs;
        let (a, b, p) = (a.0.limbs(), b.0.limbs(), self.p.limbs());
        let mut t = [0u64; 6];
        for i in 0..n {
            let mut c = 0u128;
            for j in 0..n {
                let s = t[j] as u128 + a[j] as u128 * b[i] as u128 + c;
                t[j] = s as u64;
                c = s >> 64;
            }
            let s = t[n] as u128 + c;
            t[n] = s as u64;
            t[n + 1] = (s >> 64) as u64;

            let m = t[0].wrapping_mul(self.inv);
            let s = t[0] as u128 + m as u128 * p[0] as u128;
            let mut c = s >> 64;
            for j in 1..n {
                let s = t[j] as u128 + m as u128 * p[j] as u128 + c;
                t[j - 1] = s as u64;
                c = s >> 64;
            }
            let s = t[n] as u128 + c;
            t[n - 1] = s as u64;
            t[n] = t[n + 1] + (s >> 64) as u64;
        }
        // t < 2p; for n < 4 the carry limb stays inside the U256, for n == 4
        // the subtraction below wraps back into range
        let mut r = [0u64; 4];
        let keep = (n + 1).min(4);
        r[..keep].copy_from_slice(&t[..keep]);
        let r = U256::from_limbs(r);
        if t[n] != 0 || r >= self.p {
            Fe(r.wrapping_sub(&self.p))
        } else {
            Fe(r)
        }
    }

    /// One-limb Montgomery product; t + m*p < 2p * 2^64 so the high word
    /// needs at most one subtraction, with the carry standing in for bit 64.
    fn mul_single(&self, a: u64, b: u64) -> Fe {
        let p = self.p.0[0];
        let t = a as u128 * b as u128;
        let m = (t as u64).wrapping_mul(self.inv);
        let (s, carry) = t.overflowing_add(m as u128 * p as u128);
        let hi = (s >> 64) as u64;
        let r = if carry || hi >= p { hi.wrapping_sub(p) } else { hi };
        Fe(U256::from_u64(r))
    }

    pub(crate) fn square(&self, a: &Fe) -> Fe {
        self.mul(a, a)
    }

    pub(crate) fn pow(&self, a: &Fe, e: &U256) -> Fe {
        let mut acc = self.one;
        for i in (0..e.bits()).rev() {
            acc = self.square(&acc);
            if e.bit(i) {
                acc = self.mul(&acc, a);
            }
        }
        acc
    }

    /// Inverse by Fermat's little theorem; the inverse of zero is zero.
    pub(crate) fn inv(&self, a: &Fe) -> Fe {
        self.pow(a, &self.p.wrapping_sub(&U256::from_u64(2)))
    }

    /// 1 for a non-zero square, -1 for a non-square, 0 for zero.
    pub(crate) fn legendre(&self, a: &Fe) -> i8 {
        if self.is_zero(a) {
            return 0;
        }
        let e = self.p.wrapping_sub(&U256::ONE).shr1();
        if self.pow(a, &e) == self.one {
            1
        } else {
            -1
        }
    }

    /// Tonelli-Shanks square root.
    pub(crate) fn sqrt(&self, a: &Fe) -> Option<Fe> {
        match self.legendre(a) {
            0 => return Some(self.zero()),
            -1 => return None,
            _ => {}
        }
        let mut m = self.ts_s;
        let mut c = self.ts_c;
        let mut t = self.pow(a, &self.ts_q);
        let q_plus_1_half = self.ts_q.wrapping_add(&U256::ONE).shr1();
        let mut r = self.pow(a, &q_plus_1_half);
        while t != self.one {
            let mut i = 0;
            let mut t2 = t;
            while t2 != self.one {
                t2 = self.square(&t2);
                i += 1;
            }
            let mut b = c;
            for _ in 0..(m - i - 1) {
                b = self.square(&b);
            }
            m = i;
            c = self.square(&b);
            t = self.mul(&t, &c);
            r = self.mul(&r, &b);
        }
        Some(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(p: u64) -> FieldCtx {
        FieldCtx::new(U256::from_u64(p))
    }

    #[test]
    fn small_field_matches_native_arithmetic() {
        for p in [3u64, 5, 17, 97, 65_521] {
            let f = ctx(p);
            for a in (0..p).step_by((p as usize / 40).max(1)) {
                for b in (0..p).step_by((p as usize / 40).max(1)) {
                    let (fa, fb) = (f.to_mont(&U256::from_u64(a)), f.to_mont(&U256::from_u64(b)));
                    assert_eq!(f.to_int(&f.add(&fa, &fb)).low_u64(), (a + b) % p);
                    assert_eq!(f.to_int(&f.sub(&fa, &fb)).low_u64(), (a + p - b) % p);
                    assert_eq!(f.to_int(&f.mul(&fa, &fb)).low_u64(), a * b % p);
                }
            }
        }
    }

    #[test]
    fn near_word_size_modulus_matches_u128() {
        let p = 0xffff_ffff_ffff_fe3bu64;
        let f = ctx(p);
        let mut x = 0x1234_5678_9abc_def0u64;
        for _ in 0..2000 {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let (a, b) = (x % p, x.rotate_left(17) % p);
            let prod = f.mul(&f.to_mont(&U256::from_u64(a)), &f.to_mont(&U256::from_u64(b)));
            assert_eq!(f.to_int(&prod).low_u64() as u128, a as u128 * b as u128 % p as u128);
            let sum = f.add(&f.to_mont(&U256::from_u64(a)), &f.to_mont(&U256::from_u64(b)));
            assert_eq!(f.to_int(&sum).low_u64() as u128, (a as u128 + b as u128) % p as u128);
        }
    }

    #[test]
    fn inverse_and_sqrt_exhaustive_mod_17() {
        let f = ctx(17);
        let squares: Vec<u64> = (0..17).map(|x| x * x % 17).collect();
        for a in 0..17u64 {
            let fa = f.to_mont(&U256::from_u64(a));
            if a != 0 {
                assert_eq!(f.mul(&fa, &f.inv(&fa)), f.one());
            }
            match f.sqrt(&fa) {
                Some(r) => {
                    assert!(squares.contains(&a));
                    assert_eq!(f.square(&r), fa);
                }
                None => assert!(!squares.contains(&a)),
            }
        }
    }

    #[test]
    fn full_width_modulus() {
        // secp256k1 field prime
        let p = U256::from_hex("fffffffffffffffffffffffffffffffffffffffffffffffffffffffefffffc2f").unwrap();
        let f = FieldCtx::new(p);
        let pb = BigUint::from_bytes_be(&p.to_be_bytes());
        let a = crate::macau::sha256(b"a");
        let b = crate::macau::sha256(b"b");
        let (a, b) = (
            U256::from_be_slice(&(BigUint::from_bytes_be(&a.to_be_bytes()) % &pb).to_bytes_be()).unwrap(),
            U256::from_be_slice(&(BigUint::from_bytes_be(&b.to_be_bytes()) % &pb).to_bytes_be()).unwrap(),
        );
        let prod = f.to_int(&f.mul(&f.to_mont(&a), &f.to_mont(&b)));
        let expected = BigUint::from_bytes_be(&a.to_be_bytes()) * BigUint::from_bytes_be(&b.to_be_bytes()) % &pb;
        assert_eq!(BigUint::from_bytes_be(&prod.to_be_bytes()), expected);
        let fa = f.to_mont(&a);
        let sq = f.square(&fa);
        let root = f.sqrt(&sq).unwrap();
        assert!(root == fa || root == f.sub(&f.zero(), &fa));
    }
}
