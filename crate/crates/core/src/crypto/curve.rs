//! Short Weierstrass curves y^2 = x^3 + a*x + b over a prime field.
//!
//! Public points are affine; the group law runs internally in Jacobian
//! coordinates so scalar multiplication needs a single inversion.

use serde::{Deserialize, Serialize};

use super::field::{Fe, FieldCtx};
use super::CryptoError;
use crate::macau::U256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Point {
    Infinity,
    Affine { x: U256, y: U256 },
}

impl Point {
    pub fn affine(x: u64, y: u64) -> Self {
        Point::Affine {
            x: U256::from_u64(x),
            y: U256::from_u64(y),
        }
    }

    pub fn is_infinity(&self) -> bool {
        matches!(self, Point::Infinity)
    }
}

/// Domain parameters plus precomputed field constants.
#[derive(Clone, Debug)]
pub struct CurveParams {
    pub name: String,
    pub p: U256,
    pub a: U256,
    pub b: U256,
    pub g: Point,
    /// Exact order of `g`.
    pub order: U256,
    field: FieldCtx,
    a_m: Fe,
    b_m: Fe,
}

impl PartialEq for CurveParams {
    fn eq(&self, other: &Self) -> bool {
        (&self.name, self.p, self.a, self.b, self.g, self.order)
            == (&other.name, other.p, other.a, other.b, other.g, other.order)
    }
}

impl Eq for CurveParams {}

/// Jacobian point (X/Z^2, Y/Z^3); Z = 0 encodes infinity.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Jac {
    x: Fe,
    y: Fe,
    z: Fe,
}

pub const CURVE_NAMES: [&str; 3] = ["toy17", "test64", "secp256k1"];

impl CurveParams {
    pub fn new(name: &str, p: U256, a: U256, b: U256, g: Point, order: U256) -> Result<Self, CryptoError> {
        let invalid = |why: &str| CryptoError::InvalidCurve(format!("{name}: {why}"));
        if !p.bit(0) || p <= U256::from_u64(3) {
            return Err(invalid("modulus must be an odd prime above 3"));
        }
        if a >= p || b >= p {
            return Err(invalid("coefficients must be reduced modulo p"));
        }
        if order.is_zero() {
            return Err(invalid("order must be positive"));
        }
        let field = FieldCtx::new(p);
        let a_m = field.to_mont(&a);
        let b_m = field.to_mont(&b);
        let curve = CurveParams {
            name: name.to_string(),
            p,
            a,
            b,
            g,
            order,
            field,
            a_m,
            b_m,
        };
        // 4a^3 + 27b^2 != 0
        let f = &curve.field;
        let a3 = f.mul(&f.square(&a_m), &a_m);
        let disc = f.add(&f.mul(&f.small(4), &a3), &f.mul(&f.small(27), &f.square(&b_m)));
        if f.is_zero(&disc) {
            return Err(invalid("singular curve"));
        }
        if g.is_infinity() || !curve.contains(&g) {
            return Err(invalid("base point is not a finite curve point"));
        }
        if !curve.mul_unchecked(&order, &g).is_infinity() {
            return Err(invalid("order * G is not the point at infinity"));
        }
        Ok(curve)
    }

    /// y^2 = x^3 + 7 over F_17. Its group has 18 points and G = (15, 13)
    /// generates all of them, so the order is not prime.
    pub fn toy17() -> Self {
        Self::new(
            "toy17",
            U256::from_u64(17),
            U256::ZERO,
            U256::from_u64(7),
            Point::affine(15, 13),
            U256::from_u64(18),
        )
        .expect("toy curve parameters are valid")
    }

    /// y^2 = x^3 + 2 over a 64-bit prime field with prime group order.
    pub fn test64() -> Self {
        Self::new(
            "test64",
            U256::from_u64(0xffff_ffff_ffff_fe3b),
            U256::ZERO,
            U256::from_u64(2),
            Point::affine(2, 1_516_891_982_983_580_397),
            U256::from_u64(0xffff_fffe_47b8_4085),
        )
        .expect("test curve parameters are valid")
    }

    pub fn secp256k1() -> Self {
        let h = |s: &str| U256::from_hex(s).expect("constant");
        Self::new(
            "secp256k1",
            h("fffffffffffffffffffffffffffffffffffffffffffffffffffffffefffffc2f"),
            U256::ZERO,
            U256::from_u64(7),
            Point::Affine {
                x: h("79be667ef9dcbbac55a06295ce870b07029bfcdb2dce28d959f2815b16f81798"),
                y: h("483ada7726a3c4655da4fbfc0e1108a8fd17b448a68554199c47d08ffb10d4b8"),
            },
            h("fffffffffffffffffffffffffffffffebaaedce6af48a03bbfd25e8cd0364141"),
        )
        .expect("secp256k1 parameters are valid")
    }

    pub fn by_name(name: &str) -> Result<Self, CryptoError> {
        match name {
            "toy17" => Ok(Self::toy17()),
            "test64" => Ok(Self::test64()),
            "secp256k1" => Ok(Self::secp256k1()),
            other => Err(CryptoError::UnknownCurve(other.to_string())),
        }
    }

    /// Bytes in a fixed-width field element.
    pub fn coord_bytes(&self) -> usize {
        (self.p.bits() as usize).div_ceil(8)
    }

    /// Bytes in a fixed-width scalar.
    pub fn scalar_bytes(&self) -> usize {
        (self.order.bits() as usize).div_ceil(8)
    }

    pub(crate) fn field(&self) -> &FieldCtx {
        &self.field
    }

    /// x^3 + a*x + b in Montgomery form.
    pub(crate) fn rhs(&self, x: &Fe) -> Fe {
        let f = &self.field;
        let x3 = f.mul(&f.square(x), x);
        f.add(&f.add(&x3, &f.mul(&self.a_m, x)), &self.b_m)
    }

    pub fn contains(&self, pt: &Point) -> bool {
        match pt {
            Point::Infinity => true,
            Point::Affine { x, y } => {
                if *x >= self.p || *y >= self.p {
                    return false;
                }
                let f = &self.field;
                let (xm, ym) = (f.to_mont(x), f.to_mont(y));
                f.square(&ym) == self.rhs(&xm)
            }
        }
    }

    fn check(&self, pt: &Point) -> Result<(), CryptoError> {
        if self.contains(pt) {
            Ok(())
        } else {
            Err(CryptoError::PointNotOnCurve)
        }
    }

    pub(crate) fn to_jac(&self, pt: &Point) -> Jac {
        let f = &self.field;
        match pt {
            Point::Infinity => Jac {
                x: f.one(),
                y: f.one(),
                z: f.zero(),
            },
            Point::Affine { x, y } => Jac {
                x: f.to_mont(x),
                y: f.to_mont(y),
                z: f.one(),
            },
        }
    }

    pub(crate) fn to_affine(&self, j: &Jac) -> Point {
        let f = &self.field;
        if f.is_zero(&j.z) {
            return Point::Infinity;
        }
        let zinv = f.inv(&j.z);
        let zinv2 = f.square(&zinv);
        let zinv3 = f.mul(&zinv2, &zinv);
        Point::Affine {
            x: f.to_int(&f.mul(&j.x, &zinv2)),
            y: f.to_int(&f.mul(&j.y, &zinv3)),
        }
    }

    pub(crate) fn jac_double(&self, p: &Jac) -> Jac {
        let f = &self.field;
        if f.is_zero(&p.z) || f.is_zero(&p.y) {
            return self.to_jac(&Point::Infinity);
        }
        let xx = f.square(&p.x);
        let yy = f.square(&p.y);
        let yyyy = f.square(&yy);
        let zz = f.square(&p.z);
        // S = 2((X + YY)^2 - XX - YYYY)
        let s = f.double(&f.sub(&f.sub(&f.square(&f.add(&p.x, &yy)), &xx), &yyyy));
        // M = 3XX + a ZZ^2
        let mut m = f.add(&f.double(&xx), &xx);
        if !f.is_zero(&self.a_m) {
            m = f.add(&m, &f.mul(&self.a_m, &f.square(&zz)));
        }
        let t = f.sub(&f.square(&m), &f.double(&s));
        let yyyy8 = f.double(&f.double(&f.double(&yyyy)));
        let y3 = f.sub(&f.mul(&m, &f.sub(&s, &t)), &yyyy8);
        let z3 = f.sub(&f.sub(&f.square(&f.add(&p.y, &p.z)), &yy), &zz);
        Jac { x: t, y: y3, z: z3 }
    }

    pub(crate) fn jac_add(&self, p: &Jac, q: &Jac) -> Jac {
        let f = &self.field;
        if f.is_zero(&p.z) {
            return *q;
        }
        if f.is_zero(&q.z) {
            return *p;
        }
        let z1z1 = f.square(&p.z);
        let z2z2 = f.square(&q.z);
        let u1 = f.mul(&p.x, &z2z2);
        let u2 = f.mul(&q.x, &z1z1);
        let s1 = f.mul(&f.mul(&p.y, &q.z), &z2z2);
        let s2 = f.mul(&f.mul(&q.y, &p.z), &z1z1);
        let h = f.sub(&u2, &u1);
        let r = f.double(&f.sub(&s2, &s1));
        if f.is_zero(&h) {
            return if f.is_zero(&r) {
                self.jac_double(p)
            } else {
                self.to_jac(&Point::Infinity)
            };
        }
        let i = f.square(&f.double(&h));
        let j = f.mul(&h, &i);
        let v = f.mul(&u1, &i);
        let x3 = f.sub(&f.sub(&f.square(&r), &j), &f.double(&v));
        let y3 = f.sub(&f.mul(&r, &f.sub(&v, &x3)), &f.double(&f.mul(&s1, &j)));
        let z3 = f.mul(&f.sub(&f.sub(&f.square(&f.add(&p.z, &q.z)), &z1z1), &z2z2), &h);
        Jac { x: x3, y: y3, z: z3 }
    }

    /// Fixed 4-bit window, most significant nibble first.
    fn window_table(&self, base: &Jac) -> [Jac; 16] {
        let mut table = [self.to_jac(&Point::Infinity); 16];
        table[1] = *base;
        for i in 2..16 {
            table[i] = self.jac_add(&table[i - 1], base);
        }
        table
    }

    fn nibble(k: &U256, w: u32) -> usize {
        (0..4).fold(0usize, |v, b| v | ((k.bit(w * 4 + b) as usize) << b))
    }

    /// Sum of k_i * base_i using one shared doubling chain (4-bit windows).
    fn jac_multi_mul(&self, terms: &[(&U256, &Jac)]) -> Jac {
        let tables: Vec<[Jac; 16]> = terms.iter().map(|(_, b)| self.window_table(b)).collect();
        let nibbles = terms.iter().map(|(k, _)| k.bits().div_ceil(4)).max().unwrap_or(0);
        let mut acc = self.to_jac(&Point::Infinity);
        for w in (0..nibbles).rev() {
            for _ in 0..4 {
                acc = self.jac_double(&acc);
            }
            for ((k, _), table) in terms.iter().zip(&tables) {
                let idx = Self::nibble(k, w);
                if idx != 0 {
                    acc = self.jac_add(&acc, &table[idx]);
                }
            }
        }
        acc
    }

    pub(crate) fn jac_mul(&self, k: &U256, base: &Jac) -> Jac {
        self.jac_multi_mul(&[(k, base)])
    }

    pub(crate) fn mul_unchecked(&self, k: &U256, pt: &Point) -> Point {
        self.to_affine(&self.jac_mul(k, &self.to_jac(pt)))
    }

    /// u*P + v*Q with a single final inversion.
    pub(crate) fn double_mul_unchecked(&self, u: &U256, p: &Point, v: &U256, q: &Point) -> Point {
        let (jp, jq) = (self.to_jac(p), self.to_jac(q));
        self.to_affine(&self.jac_multi_mul(&[(u, &jp), (v, &jq)]))
    }

    pub(crate) fn neg_unchecked(&self, pt: &Point) -> Point {
        match pt {
            Point::Infinity => Point::Infinity,
            Point::Affine { x, y } => Point::Affine {
                x: *x,
                y: if y.is_zero() { *y } else { self.p.wrapping_sub(y) },
            },
        }
    }

    pub(crate) fn add_unchecked(&self, p: &Point, q: &Point) -> Point {
        self.to_affine(&self.jac_add(&self.to_jac(p), &self.to_jac(q)))
    }

    /// Fixed-width uncompressed encoding: tag (0x00 infinity, 0x04 affine), x, y.
    pub fn encode_point(&self, pt: &Point) -> Vec<u8> {
        let w = self.coord_bytes();
        let mut out = Vec::with_capacity(1 + 2 * w);
        match pt {
            Point::Infinity => {
                out.push(0x00);
                out.resize(1 + 2 * w, 0);
            }
            Point::Affine { x, y } => {
                out.push(0x04);
                out.extend_from_slice(&x.to_be_bytes()[32 - w..]);
                out.extend_from_slice(&y.to_be_bytes()[32 - w..]);
            }
        }
        out
    }

    pub fn decode_point(&self, bytes: &[u8]) -> Result<Point, CryptoError> {
        let w = self.coord_bytes();
        if bytes.len() != 1 + 2 * w {
            return Err(CryptoError::MalformedPoint);
        }
        let pt = match bytes[0] {
            0x00 if bytes[1..].iter().all(|&b| b == 0) => Point::Infinity,
            0x04 => Point::Affine {
                x: U256::from_be_slice(&bytes[1..1 + w]).ok_or(CryptoError::MalformedPoint)?,
                y: U256::from_be_slice(&bytes[1 + w..]).ok_or(CryptoError::MalformedPoint)?,
            },
            _ => return Err(CryptoError::MalformedPoint),
        };
        self.check(&pt)?;
        Ok(pt)
    }

    pub fn encode_scalar(&self, k: &U256) -> Vec<u8> {
        k.to_be_bytes()[32 - self.scalar_bytes()..].to_vec()
    }

    pub fn decode_scalar(&self, bytes: &[u8]) -> Result<U256, CryptoError> {
        if bytes.len() != self.scalar_bytes() {
            return Err(CryptoError::KeyLengthMismatch {
                expected: self.scalar_bytes(),
                got: bytes.len(),
            });
        }
        U256::from_be_slice(bytes).ok_or(CryptoError::InvalidScalar)
    }
}

pub fn on_curve(pt: &Point, params: &CurveParams) -> bool {
    params.contains(pt)
}

pub fn point_add(p: &Point, q: &Point, params: &CurveParams) -> Result<Point, CryptoError> {
    params.check(p)?;
    params.check(q)?;
    Ok(params.add_unchecked(p, q))
}

pub fn point_neg(p: &Point, params: &CurveParams) -> Result<Point, CryptoError> {
    params.check(p)?;
    Ok(params.neg_unchecked(p))
}

pub fn scalar_mul(k: &U256, p: &Point, params: &CurveParams) -> Result<Point, CryptoError> {
    params.check(p)?;
    Ok(params.mul_unchecked(k, p))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Textbook affine group law over u64, independent of the Jacobian code.
    struct ToyOracle {
        p: i64,
        a: i64,
        b: i64,
    }

    type Aff = Option<(i64, i64)>;

    impl ToyOracle {
        fn inv(&self, x: i64) -> i64 {
            (1..self.p).find(|&y| (x.rem_euclid(self.p) * y) % self.p == 1).unwrap()
        }

        fn add(&self, p1: Aff, p2: Aff) -> Aff {
            let p = self.p;
            match (p1, p2) {
                (None, q) | (q, None) => q,
                (Some((x1, y1)), Some((x2, y2))) => {
                    if x1 == x2 && (y1 + y2) % p == 0 {
                        return None;
                    }
                    let l = if (x1, y1) == (x2, y2) {
                        (3 * x1 * x1 + self.a) * self.inv(2 * y1)
                    } else {
                        (y2 - y1) * self.inv(x2 - x1)
                    }
                    .rem_euclid(p);
                    let x3 = (l * l - x1 - x2).rem_euclid(p);
                    Some((x3, (l * (x1 - x3) - y1).rem_euclid(p)))
                }
            }
        }

        fn points(&self) -> Vec<Aff> {
            let mut pts = vec![None];
            for x in 0..self.p {
                for y in 0..self.p {
                    if (y * y - (x * x * x + self.a * x + self.b)).rem_euclid(self.p) == 0 {
                        pts.push(Some((x, y)));
                    }
                }
            }
            pts
        }
    }

    fn to_point(a: Aff) -> Point {
        match a {
            None => Point::Infinity,
            Some((x, y)) => Point::affine(x as u64, y as u64),
        }
    }

    const ORACLE: ToyOracle = ToyOracle { p: 17, a: 0, b: 7 };

    #[test]
    fn membership_by_substitution() {
        let c = CurveParams::toy17();
        assert!(on_curve(&Point::affine(15, 13), &c));
        assert!(on_curve(&Point::affine(1, 5), &c));
        assert!(!on_curve(&Point::affine(0, 0), &c));
        assert!(on_curve(&Point::Infinity, &c));
        assert!(!on_curve(&Point::affine(18, 5), &c));
    }

    #[test]
    fn addition_table_matches_oracle() {
        let c = CurveParams::toy17();
        let pts = ORACLE.points();
        assert_eq!(pts.len(), 18);
        for &p in &pts {
            for &q in &pts {
                let got = point_add(&to_point(p), &to_point(q), &c).unwrap();
                assert_eq!(got, to_point(ORACLE.add(p, q)), "{p:?} + {q:?}");
            }
        }
    }

    #[test]
    fn group_axioms_exhaustive() {
        let c = CurveParams::toy17();
        let pts: Vec<Point> = ORACLE.points().into_iter().map(to_point).collect();
        for p in &pts {
            assert_eq!(point_add(p, &Point::Infinity, &c).unwrap(), *p);
            let neg = point_neg(p, &c).unwrap();
            assert_eq!(point_add(p, &neg, &c).unwrap(), Point::Infinity);
            for q in &pts {
                let pq = point_add(p, q, &c).unwrap();
                assert!(c.contains(&pq));
                assert_eq!(pq, point_add(q, p, &c).unwrap());
                for r in &pts {
                    let left = point_add(&pq, r, &c).unwrap();
                    let right = point_add(p, &point_add(q, r, &c).unwrap(), &c).unwrap();
                    assert_eq!(left, right);
                }
            }
        }
    }

    #[test]
    fn explicit_inverse() {
        let c = CurveParams::toy17();
        let inverse = point_add(&Point::affine(15, 13), &Point::affine(15, 17 - 13), &c).unwrap();
        assert_eq!(inverse, Point::Infinity);
    }

    #[test]
    fn off_curve_inputs_rejected() {
        let c = CurveParams::toy17();
        let bad = Point::affine(0, 0);
        assert!(matches!(point_add(&bad, &c.g, &c), Err(CryptoError::PointNotOnCurve)));
        assert!(matches!(
            scalar_mul(&U256::ONE, &bad, &c),
            Err(CryptoError::PointNotOnCurve)
        ));
    }

    #[test]
    fn scalar_mul_matches_iterated_addition() {
        let c = CurveParams::toy17();
        let g = Some((15i64, 13i64));
        let mut acc: Aff = None;
        for k in 0..=18u64 {
            let got = scalar_mul(&U256::from_u64(k), &c.g, &c).unwrap();
            assert_eq!(got, to_point(acc), "k = {k}");
            acc = ORACLE.add(acc, g);
        }
        assert_eq!(scalar_mul(&c.order, &c.g, &c).unwrap(), Point::Infinity);
        // every point is a multiple of G, so G generates the whole group
        let order_by_enumeration = ORACLE.points().len() as u64;
        assert_eq!(c.order, U256::from_u64(order_by_enumeration));
    }

    #[test]
    fn distributivity_exhaustive() {
        let c = CurveParams::toy17();
        for pt in ORACLE.points().into_iter().map(to_point) {
            for j in 0..18u64 {
                for k in 0..18u64 {
                    let lhs = scalar_mul(&U256::from_u64(j + k), &pt, &c).unwrap();
                    let rhs = point_add(
                        &scalar_mul(&U256::from_u64(j), &pt, &c).unwrap(),
                        &scalar_mul(&U256::from_u64(k), &pt, &c).unwrap(),
                        &c,
                    )
                    .unwrap();
                    assert_eq!(lhs, rhs);
                }
            }
        }
    }

    #[test]
    fn larger_curves_validate() {
        for name in CURVE_NAMES {
            let c = CurveParams::by_name(name).unwrap();
            assert!(c.contains(&c.g));
            assert_eq!(c.mul_unchecked(&c.order, &c.g), Point::Infinity);
            assert_eq!(c.mul_unchecked(&U256::ONE, &c.g), c.g);
        }
        assert!(matches!(
            CurveParams::by_name("p521"),
            Err(CryptoError::UnknownCurve(_))
        ));
    }

    #[test]
    fn secp256k1_known_multiple() {
        let c = CurveParams::secp256k1();
        let two_g = scalar_mul(&U256::from_u64(2), &c.g, &c).unwrap();
        let expected = Point::Affine {
            x: U256::from_hex("c6047f9441ed7d6d3045406e95c07cd85c778e4b8cef3ca7abac09b95c709ee5").unwrap(),
            y: U256::from_hex("1ae168fea63dc339a3c58419466ceaeef7f632653266d0e1236431a950cfe52a").unwrap(),
        };
        assert_eq!(two_g, expected);
    }

    #[test]
    fn invalid_parameters_rejected() {
        let p = U256::from_u64(17);
        // singular: a = b = 0
        assert!(CurveParams::new("s", p, U256::ZERO, U256::ZERO, Point::affine(0, 0), U256::ONE).is_err());
        // wrong order
        assert!(CurveParams::new(
            "o",
            p,
            U256::ZERO,
            U256::from_u64(7),
            Point::affine(15, 13),
            U256::from_u64(9)
        )
        .is_err());
        // base point off the curve
        assert!(CurveParams::new(
            "g",
            p,
            U256::ZERO,
            U256::from_u64(7),
            Point::affine(0, 0),
            U256::from_u64(18)
        )
        .is_err());
    }

    #[test]
    fn point_encoding_roundtrip() {
        let c = CurveParams::test64();
        for k in [0u64, 1, 2, 12345] {
            let pt = c.mul_unchecked(&U256::from_u64(k), &c.g);
            let enc = c.encode_point(&pt);
            assert_eq!(enc.len(), 17);
            assert_eq!(c.decode_point(&enc).unwrap(), pt);
        }
        let mut enc = c.encode_point(&c.g);
        enc[16] ^= 1;
        assert!(c.decode_point(&enc).is_err());
    }
}
