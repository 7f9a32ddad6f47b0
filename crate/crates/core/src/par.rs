use rayon::prelude::*;

/// Two-pass parallel gather: count the items each slab produces, allocate the
/// output once, then let every slab fill its own disjoint window.
///
/// Slab `i` always lands after slab `i - 1`, so the result is in canonical
/// order regardless of the number of worker threads.
pub(crate) fn gather_by_slabs<T, C, F>(slabs: usize, count: C, fill: F) -> Vec<T>
where
    T: Default + Clone + Send + Sync,
    C: Fn(usize) -> usize + Sync,
    F: Fn(usize, &mut [T]) + Sync,
{
    let counts: Vec<usize> = (0..slabs).into_par_iter().map(&count).collect();
    let total: usize = counts.iter().sum();
    let mut out = vec![T::default(); total];
    let mut windows = Vec::with_capacity(slabs);
    let mut rest: &mut [T] = &mut out;
    for &c in &counts {
        let (head, tail) = rest.split_at_mut(c);
        windows.push(head);
        rest = tail;
    }
    windows
        .into_par_iter()
        .enumerate()
        .for_each(|(i, window)| fill(i, window));
    out
}

/// Exclusive prefix sum; returns the offsets and the total.
pub(crate) fn exclusive_scan(counts: &[usize]) -> (Vec<usize>, usize) {
    let mut offsets = Vec::with_capacity(counts.len());
    let mut acc = 0usize;
    for &c in counts {
        offsets.push(acc);
        acc += c;
    }
    (offsets, acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gather_keeps_slab_order() {
        let out = gather_by_slabs(
            5,
            |i| i,
            |i, w| {
                for (k, slot) in w.iter_mut().enumerate() {
                    *slot = i * 10 + k;
                }
            },
        );
        assert_eq!(out, vec![10, 20, 21, 30, 31, 32, 40, 41, 42, 43]);
    }

    #[test]
    fn scan() {
        let (o, t) = exclusive_scan(&[3, 0, 2]);
        assert_eq!(o, vec![0, 3, 3]);
        assert_eq!(t, 5);
    }
}
