//! Seeded epoch batching.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};

/// Shuffles `0..n` and chunks it into batches of `batch_size`; the last batch may be short.
pub fn make_batches<R: Rng + ?Sized>(n: usize, batch_size: usize, rng: &mut R) -> Result<Vec<Vec<usize>>> {
    if n == 0 {
        return Err(Error::Domain("cannot batch an empty dataset".into()));
    }
    if batch_size == 0 {
        return Err(Error::Domain("batch size must be at least 1".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    Ok(order.chunks(batch_size).map(<[usize]>::to_vec).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn hundred_by_sixty_four() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let b = make_batches(100, 64, &mut rng).unwrap();
        assert_eq!(b.iter().map(Vec::len).collect::<Vec<_>>(), vec![64, 36]);
    }

    #[test]
    fn empty_and_zero_batch_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(make_batches(0, 4, &mut rng).is_err());
        assert!(make_batches(4, 0, &mut rng).is_err());
    }

    #[test]
    fn same_seed_same_order() {
        let a = make_batches(50, 7, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = make_batches(50, 7, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn batches_partition_the_dataset(n in 1usize..300, bs in 1usize..80, seed in any::<u64>()) {
            let b = make_batches(n, bs, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let mut all: Vec<usize> = b.concat();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            prop_assert!(b.iter().all(|x| x.len() <= bs && !x.is_empty()));
        }
    }
}
