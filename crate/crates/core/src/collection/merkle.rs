use super::digest::DigestAlgo;

/// Binary hash tree over packet digests. Each parent is `H(left ‖ right)`;
/// an unpaired node at the end of a level moves up unchanged.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MerkleTree {
    levels: Vec<Vec<Vec<u8>>>,
}

impl MerkleTree {
    /// Panics on an empty leaf set.
    pub fn build(leaves: Vec<Vec<u8>>, algo: DigestAlgo) -> Self {
        assert!(!leaves.is_empty(), "merkle tree needs at least one leaf");
        let mut levels = vec![leaves];
        while levels.last().unwrap().len() > 1 {
            let prev = levels.last().unwrap();
            let next = prev
                .chunks(2)
                .map(|pair| match pair {
                    [l, r] => algo.digest_pair(l, r),
                    [single] => single.clone(),
                    _ => unreachable!(),
                })
                .collect();
            levels.push(next);
        }
        Self { levels }
    }

    pub fn root(&self) -> &[u8] {
        &self.levels.last().unwrap()[0]
    }

    pub fn leaves(&self) -> &[Vec<u8>] {
        &self.levels[0]
    }

    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }
}

pub fn merkle_root(leaves: Vec<Vec<u8>>, algo: DigestAlgo) -> Vec<u8> {
    MerkleTree::build(leaves, algo).root().to_vec()
}
