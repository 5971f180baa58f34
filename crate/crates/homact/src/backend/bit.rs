//! The binary-expansion model: x ∼ y iff bit min(x,y) of max(x,y) is 1.

use std::collections::HashSet;

use super::pool::VertexPool;
use crate::term::{Nat, VertexTerm};

pub(crate) fn adjacent(x: &Nat, y: &Nat) -> bool {
    x.has_bit(y) || y.has_bit(x)
}

fn nat(x: &VertexTerm) -> &Nat {
    x.as_nat().expect("validated BIT vertex")
}

/// Least z outside `pool` and `extra` whose neighbourhood inside `pool` is
/// exactly `u`.
///
/// A z that is not a digit position of any pooled number meets the pool
/// only through its own digits, so those candidates are U plus a free part
/// drawn from the positions outside the pool, in increasing order.  The
/// finitely many remaining candidates are the digit positions themselves,
/// each checked directly.
pub(crate) fn least_witness(u: &[VertexTerm], pool: &VertexPool, extra: &[VertexTerm]) -> Nat {
    let extra: HashSet<&VertexTerm> = extra.iter().collect();
    let uset: HashSet<&Nat> = u.iter().map(nat).collect();
    let blocked = |z: &Nat| {
        let v = VertexTerm::Nat(z.clone());
        pool.contains(&v) || extra.contains(&v)
    };

    let mut free = Vec::new();
    let mut next_free = 0u64;
    let mut from_free = None;
    for f in 0u64.. {
        while (free.len() as u32) < 64 - f.leading_zeros() {
            while pool.contains(&VertexTerm::nat(next_free)) {
                next_free += 1;
            }
            free.push(next_free);
            next_free += 1;
        }
        let mut bits: Vec<Nat> = uset.iter().map(|n| (*n).clone()).collect();
        bits.extend((0..64).filter(|k| f >> k & 1 == 1).map(|k| Nat::Small(free[k as usize])));
        let z = Nat::from_bits(bits);
        if !blocked(&z) && pool.nat_parents_of(&z).is_empty() {
            from_free = Some(z);
            break;
        }
    }
    let from_free = from_free.expect("finitely many exclusions");

    for z in pool.nat_bit_values() {
        if *z >= from_free {
            break;
        }
        if blocked(z) {
            continue;
        }
        let mut hits = 0usize;
        let mut ok = true;
        for b in z.bits() {
            if pool.contains(&VertexTerm::Nat(b.clone())) {
                if uset.contains(&b) {
                    hits += 1;
                } else {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            continue;
        }
        for p in pool.nat_parents_of(z) {
            if uset.contains(p) {
                hits += 1;
            } else {
                ok = false;
                break;
            }
        }
        if ok && hits == uset.len() {
            return z.clone();
        }
    }
    from_free
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(u: &[u64], v: &[u64]) -> u64 {
        (0u64..)
            .find(|z| {
                !u.contains(z)
                    && !v.contains(z)
                    && u.iter().all(|x| adjacent(&Nat::Small(*x), &Nat::Small(*z)))
                    && v.iter().all(|x| !adjacent(&Nat::Small(*x), &Nat::Small(*z)))
            })
            .unwrap()
    }

    fn fast(u: &[u64], v: &[u64]) -> Nat {
        let uu: Vec<VertexTerm> = u.iter().map(|x| VertexTerm::nat(*x)).collect();
        let pool: VertexPool = u.iter().chain(v).map(|x| VertexTerm::nat(*x)).collect();
        least_witness(&uu, &pool, &[])
    }

    #[test]
    fn matches_scan_on_small_sets() {
        assert_eq!(brute(&[0], &[1]), 5);
        assert_eq!(fast(&[0], &[1]), Nat::Small(5));
        for mask in 0u32..3u32.pow(6) {
            let mut u = vec![];
            let mut v = vec![];
            let mut m = mask;
            for x in 0..6u64 {
                match m % 3 {
                    1 => u.push(x),
                    2 => v.push(x),
                    _ => {}
                }
                m /= 3;
            }
            assert_eq!(fast(&u, &v), Nat::Small(brute(&u, &v)), "U={u:?} V={v:?}");
        }
    }

    #[test]
    fn large_members_stay_cheap() {
        let big = Nat::pow2(Nat::Small(200));
        let u = vec![VertexTerm::Nat(big.clone())];
        let pool: VertexPool = u.iter().cloned().collect();
        let z = least_witness(&u, &pool, &[]);
        // 200 is a digit of `big`, adjacent to it and nothing else pooled
        assert_eq!(z, Nat::Small(200));
    }
}
