use std::collections::{BTreeSet, HashMap};

use crate::error::{Error, Result};

/// Cayley table of a finite group.  Element 0 is always the identity.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiniteTable {
    n: u32,
    mul: Vec<u32>,
    inv: Vec<u32>,
    gens: Vec<u32>,
}

impl FiniteTable {
    pub fn new(table: Vec<Vec<u32>>) -> Result<FiniteTable> {
        let n = table.len();
        let bad = |msg: String| Error::ValidationError { field: "table".into(), msg };
        if n == 0 {
            return Err(bad("empty table".into()));
        }
        for (i, row) in table.iter().enumerate() {
            if row.len() != n {
                return Err(bad(format!("row {i} has {} entries, expected {n}", row.len())));
            }
            if let Some(x) = row.iter().find(|x| **x as usize >= n) {
                return Err(bad(format!("entry {x} out of range in row {i}")));
            }
        }
        for i in 0..n {
            if table[0][i] as usize != i || table[i][0] as usize != i {
                return Err(bad("element 0 must be the identity".into()));
            }
        }
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    let l = table[table[a][b] as usize][c];
                    let r = table[a][table[b][c] as usize];
                    if l != r {
                        return Err(bad(format!("not associative at ({a},{b},{c})")));
                    }
                }
            }
        }
        let mut inv = vec![0u32; n];
        for a in 0..n {
            match (0..n).find(|&b| table[a][b] == 0 && table[b][a] == 0) {
                Some(b) => inv[a] = b as u32,
                None => return Err(bad(format!("element {a} has no inverse"))),
            }
        }
        let mul = table.into_iter().flatten().collect();
        let mut t = FiniteTable { n: n as u32, mul, inv, gens: Vec::new() };
        t.gens = t.greedy_generators();
        Ok(t)
    }

    pub fn trivial() -> FiniteTable {
        FiniteTable { n: 1, mul: vec![0], inv: vec![0], gens: vec![] }
    }

    pub fn cyclic(n: u32) -> FiniteTable {
        let table = (0..n).map(|a| (0..n).map(|b| (a + b) % n).collect()).collect();
        FiniteTable::new(table).expect("cyclic table")
    }

    /// Closure of the given permutations of {0..m}, elements listed in
    /// breadth-first order from the identity.
    pub fn from_permutations(gens: &[Vec<u32>]) -> Result<FiniteTable> {
        let m = gens.first().map(|g| g.len()).unwrap_or(0);
        for g in gens {
            let set: BTreeSet<u32> = g.iter().copied().collect();
            if g.len() != m || set.len() != m || set.iter().any(|x| *x as usize >= m) {
                return Err(Error::ValidationError {
                    field: "permutations".into(),
                    msg: format!("{g:?} is not a permutation of 0..{m}"),
                });
            }
        }
        let compose = |a: &[u32], b: &[u32]| -> Vec<u32> { b.iter().map(|&x| a[x as usize]).collect() };
        let id: Vec<u32> = (0..m as u32).collect();
        let mut elems = vec![id.clone()];
        let mut index: HashMap<Vec<u32>, u32> = HashMap::from([(id, 0)]);
        let mut next = 0;
        while next < elems.len() {
            let cur = elems[next].clone();
            for g in gens {
                let p = compose(&cur, g);
                if !index.contains_key(&p) {
                    index.insert(p.clone(), elems.len() as u32);
                    elems.push(p);
                }
            }
            next += 1;
        }
        let table = elems
            .iter()
            .map(|a| elems.iter().map(|b| index[&compose(a, b)]).collect())
            .collect();
        FiniteTable::new(table)
    }

    pub fn order(&self) -> u32 {
        self.n
    }

    pub fn mul(&self, a: u32, b: u32) -> u32 {
        self.mul[(a * self.n + b) as usize]
    }

    pub fn inv(&self, a: u32) -> u32 {
        self.inv[a as usize]
    }

    pub fn gens(&self) -> &[u32] {
        &self.gens
    }

    pub fn elements(&self) -> impl Iterator<Item = u32> {
        0..self.n
    }

    /// Subgroup generated by `gens`.
    pub fn closure(&self, gens: &[u32]) -> BTreeSet<u32> {
        let mut out = BTreeSet::from([0u32]);
        let mut frontier = vec![0u32];
        while let Some(x) = frontier.pop() {
            for &g in gens {
                let y = self.mul(x, g);
                if out.insert(y) {
                    frontier.push(y);
                }
            }
        }
        out
    }

    fn greedy_generators(&self) -> Vec<u32> {
        let mut gens = Vec::new();
        let mut span = BTreeSet::from([0u32]);
        for a in 1..self.n {
            if !span.contains(&a) {
                gens.push(a);
                span = self.closure(&gens);
            }
        }
        gens
    }

    pub fn table(&self) -> Vec<Vec<u32>> {
        self.mul.chunks(self.n as usize).map(|r| r.to_vec()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_groups() {
        assert!(FiniteTable::new(vec![vec![0, 1], vec![1, 1]]).is_err());
        assert!(FiniteTable::new(vec![vec![1, 0], vec![0, 1]]).is_err());
        assert!(FiniteTable::new(vec![vec![0, 1, 2], vec![1, 0, 0], vec![2, 0, 0]]).is_err());
    }

    #[test]
    fn symmetric_group_from_permutations() {
        let s3 = FiniteTable::from_permutations(&[vec![1, 0, 2], vec![0, 2, 1]]).unwrap();
        assert_eq!(s3.order(), 6);
        for a in s3.elements() {
            assert_eq!(s3.mul(a, s3.inv(a)), 0);
        }
        assert_eq!(s3.closure(s3.gens()).len(), 6);
    }
}
